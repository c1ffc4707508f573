// Service connectivity: auto-reconnecting event socket plus the two REST
// calls the console is allowed to make (/hoc/resolve, /config/thresholds).

import type { Action } from "./state.js";
import type { PrefPair, ServiceEvent, StateSnapshot } from "./types.js";

export interface ResolveResult {
  ok: boolean;
  status: number;
  error?: string;
}

export class ServiceClient {
  private socket: WebSocket | null = null;
  private reconnectDelay = 500;
  private closed = false;

  constructor(
    private readonly baseUrl: string,
    private readonly dispatch: (action: Action) => void,
    private readonly lastEventId: () => number,
  ) {}

  connect(): void {
    if (this.closed) {
      return;
    }
    const wsUrl =
      this.baseUrl.replace(/^http/, "ws") + `/events?since=${this.lastEventId()}`;
    const socket = new WebSocket(wsUrl);
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectDelay = 500;
      this.dispatch({ type: "connected" });
      void this.refreshSnapshot();
    };
    socket.onmessage = (message) => {
      const event = JSON.parse(message.data as string) as ServiceEvent;
      this.dispatch({ type: "event", event });
    };
    socket.onclose = () => {
      this.dispatch({ type: "disconnected" });
      if (!this.closed) {
        setTimeout(() => this.connect(), this.reconnectDelay);
        this.reconnectDelay = Math.min(this.reconnectDelay * 2, 5000);
      }
    };
  }

  close(): void {
    this.closed = true;
    this.socket?.close();
  }

  async refreshSnapshot(): Promise<void> {
    try {
      const response = await fetch(`${this.baseUrl}/state`);
      if (response.ok) {
        const snapshot = (await response.json()) as StateSnapshot;
        this.dispatch({ type: "snapshot", snapshot });
      }
    } catch {
      // connection flaps are handled by the socket lifecycle
    }
  }

  async resolveHoc(prefs: PrefPair[], requestId?: number): Promise<ResolveResult> {
    this.dispatch({ type: "resolve_started" });
    try {
      const response = await fetch(`${this.baseUrl}/hoc/resolve`, {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({
          prefs,
          responder: "console",
          ...(requestId !== undefined ? { request_id: requestId } : {}),
        }),
      });
      if (!response.ok) {
        const detail = await response
          .json()
          .then((body) => String(body.detail ?? body.error ?? response.statusText))
          .catch(() => response.statusText);
        this.dispatch({ type: "resolve_failed", message: detail });
        return { ok: false, status: response.status, error: detail };
      }
      return { ok: true, status: response.status };
    } catch (error) {
      const message = error instanceof Error ? error.message : String(error);
      this.dispatch({ type: "resolve_failed", message });
      return { ok: false, status: 0, error: message };
    }
  }

  async setThresholds(update: {
    theta_scene?: number;
    theta_roi?: number;
    theta_trav?: number;
  }): Promise<ResolveResult> {
    const response = await fetch(`${this.baseUrl}/config/thresholds`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(update),
    });
    if (!response.ok) {
      const detail = await response
        .json()
        .then((body) => String(body.detail ?? response.statusText))
        .catch(() => response.statusText);
      return { ok: false, status: response.status, error: detail };
    }
    return { ok: true, status: response.status };
  }

  async fetchState(): Promise<StateSnapshot> {
    const response = await fetch(`${this.baseUrl}/state`);
    return (await response.json()) as StateSnapshot;
  }
}
