/** Display formatting only; values are never recomputed client-side. */

export function formatDuration(ms: number): string {
  if (ms < 1000) return `${ms} ms`;
  const seconds = ms / 1000;
  if (seconds < 60) return `${trimFloat(seconds)} s`;
  const minutes = seconds / 60;
  if (minutes < 60) return `${trimFloat(minutes)} min`;
  return `${trimFloat(minutes / 60)} h`;
}

export function formatShare(numerator: number, denominator: number, value: number): string {
  return `${numerator}/${denominator} (${trimFloat(value * 100)}%)`;
}

export function formatTimestamp(epochSeconds: number): string {
  // Logical stub clocks report small tick values, not real epochs.
  if (epochSeconds < 1e6) return `t+${trimFloat(epochSeconds)}s`;
  return new Date(epochSeconds * 1000).toISOString();
}

export function trimFloat(value: number, digits = 2): string {
  const fixed = value.toFixed(digits);
  return fixed.replace(/\.?0+$/, "") || "0";
}

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

export function truncate(text: string, max = 400): string {
  if (text.length <= max) return text;
  return `${text.slice(0, max)}… [${text.length - max} more chars]`;
}
