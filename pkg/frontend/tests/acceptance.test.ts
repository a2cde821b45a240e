/**
 * Acceptance: rendering a genuine gate export (produced by the segfuse CLI
 * on synthetic data) yields two class curves whose plotted values equal
 * per-(class,index) means recomputed here from scratch, within 1e-9.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { describe, expect, it } from "vitest";

import { renderGateDynamics, renderTraining } from "../src/plots";

const FIXTURES = join(__dirname, "fixtures");

function independentMeans(csvText: string): Map<string, { mean: number; n: number }> {
  // deliberately separate from src/: split, group, average by hand
  const out = new Map<string, number[]>();
  const lines = csvText.trim().split("\n").slice(1);
  for (const line of lines) {
    const [, label, index, gate] = line.split(",");
    const key = `${label}:${index}`;
    const bucket = out.get(key) ?? [];
    bucket.push(Number(gate));
    out.set(key, bucket);
  }
  const means = new Map<string, { mean: number; n: number }>();
  for (const [key, values] of out) {
    means.set(key, {
      mean: values.reduce((s, v) => s + v, 0) / values.length,
      n: values.length,
    });
  }
  return means;
}

describe("gate dynamics acceptance", () => {
  const csvText = readFileSync(join(FIXTURES, "gates.csv"), "utf8");

  it("renders both class curves from a real CLI export", () => {
    const plot = renderGateDynamics(csvText);
    expect(plot.warnings).toEqual([]);
    expect(plot.real.length).toBeGreaterThan(0);
    expect(plot.fake.length).toBeGreaterThan(0);
    expect(plot.svg).toContain("<svg");
    expect(plot.svg).toContain('data-name="real"');
    expect(plot.svg).toContain('data-name="fake (AI-generated)"');
  });

  it("plotted values equal independently recomputed group means within 1e-9", () => {
    const plot = renderGateDynamics(csvText);
    const oracle = independentMeans(csvText);
    let checked = 0;
    for (const [label, series] of [
      [0, plot.real],
      [1, plot.fake],
    ] as const) {
      for (const point of series) {
        const expected = oracle.get(`${label}:${point.segmentIndex}`);
        expect(expected).toBeDefined();
        expect(Math.abs(point.mean - expected!.mean)).toBeLessThan(1e-9);
        expect(point.count).toBe(expected!.n);
        checked += 1;
      }
    }
    expect(checked).toBe(oracle.size);
  });
});

describe("training curves acceptance", () => {
  it("plots the fixture history losslessly", () => {
    const csvText = readFileSync(join(FIXTURES, "history.csv"), "utf8");
    const plot = renderTraining(csvText);
    expect(plot.warnings).toEqual([]);
    const lines = csvText.trim().split("\n").slice(1);
    expect(plot.rows).toHaveLength(lines.length);
    lines.forEach((line, i) => {
      const [epoch, trainLoss, valLoss, valAcc] = line.split(",").map(Number);
      expect(plot.rows[i]).toEqual({ epoch, trainLoss, valLoss, valAcc });
    });
  });
});
