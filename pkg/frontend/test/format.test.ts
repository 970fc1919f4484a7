import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  formatDuration,
  formatShare,
  formatTimestamp,
  trimFloat,
  truncate,
} from "../src/format.js";

describe("formatDuration", () => {
  it("picks sensible units", () => {
    expect(formatDuration(12)).toBe("12 ms");
    expect(formatDuration(1500)).toBe("1.5 s");
    expect(formatDuration(90_000)).toBe("1.5 min");
    expect(formatDuration(5_400_000)).toBe("1.5 h");
  });
});

describe("formatShare", () => {
  it("keeps the exact rational next to the percentage", () => {
    expect(formatShare(3, 4, 0.75)).toBe("3/4 (75%)");
    expect(formatShare(1, 3, 1 / 3)).toBe("1/3 (33.33%)");
  });
});

describe("formatTimestamp", () => {
  it("labels logical-clock ticks distinctly from epochs", () => {
    expect(formatTimestamp(4)).toBe("t+4s");
    expect(formatTimestamp(1_700_000_000)).toMatch(/^\d{4}-\d{2}-\d{2}T/);
  });
});

describe("trimFloat", () => {
  it("drops trailing zeros", () => {
    expect(trimFloat(10)).toBe("10");
    expect(trimFloat(10.5)).toBe("10.5");
    expect(trimFloat(0.333333)).toBe("0.33");
  });
});

describe("escapeHtml", () => {
  it("escapes markup characters", () => {
    expect(escapeHtml('<div a="b">&')).toBe("&lt;div a=&quot;b&quot;&gt;&amp;");
  });
});

describe("truncate", () => {
  it("keeps short text and marks long text", () => {
    expect(truncate("short", 10)).toBe("short");
    expect(truncate("x".repeat(12), 10)).toBe(`${"x".repeat(10)}… [2 more chars]`);
  });
});
