// Preference editor model. The editor shows the full current list but the
// submission carries only changed or added rows (a partial update).

import type { PrefPair } from "./types.js";

export interface TauRow {
  prompt: string;
  weight: number;
  original: number | null; // null marks a row added in the editor
}

export function rowsFromPrefs(prefs: PrefPair[]): TauRow[] {
  return prefs.map(([prompt, weight]) => ({ prompt, weight, original: weight }));
}

export function addRow(rows: TauRow[], prompt: string, weight = 0): TauRow[] {
  return [...rows, { prompt, weight, original: null }];
}

export function setWeight(rows: TauRow[], index: number, weight: number): TauRow[] {
  return rows.map((row, i) => (i === index ? { ...row, weight } : row));
}

export function removeAddedRow(rows: TauRow[], index: number): TauRow[] {
  // Only editor-added rows may be removed; existing prompts can only be
  // re-weighted (the merge rule has no removal).
  return rows.filter((row, i) => i !== index || row.original !== null);
}

export function validateRows(rows: TauRow[]): string | null {
  const seen = new Set<string>();
  for (const row of rows) {
    if (!row.prompt.trim()) {
      return "prompts must be non-empty";
    }
    if (seen.has(row.prompt)) {
      return `duplicate prompt: ${row.prompt}`;
    }
    seen.add(row.prompt);
    if (!(row.weight >= -1 && row.weight <= 1)) {
      return `weight for "${row.prompt}" must be in [-1, 1]`;
    }
  }
  return null;
}

export function changedRows(rows: TauRow[]): PrefPair[] {
  return rows
    .filter((row) => row.original === null || row.weight !== row.original)
    .map((row) => [row.prompt, row.weight] as PrefPair);
}
