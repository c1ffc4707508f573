// Payload decoding helpers (browser and node share globalThis.atob).

export function b64ToFloat32(b64: string): Float32Array {
  const binary = globalThis.atob(b64);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return new Float32Array(bytes.buffer);
}

export function pngDataUrl(b64: string): string {
  return `data:image/png;base64,${b64}`;
}
