/**
 * The two plot products: fusion-gate dynamics by class, and training curves.
 * Each render function is pure text-to-text; the plot* wrappers add file IO
 * and route warnings to stderr.
 */

import { readFileSync, writeFileSync } from "node:fs";

import { parseGatesCsv, parseHistoryCsv, HistoryRow } from "./csv";
import { gateSeries, SeriesPoint } from "./stats";
import { Curve, lineChart } from "./svg";

export interface GatePlot {
  svg: string;
  real: SeriesPoint[];
  fake: SeriesPoint[];
  warnings: string[];
}

export interface TrainingPlot {
  svg: string;
  rows: HistoryRow[];
  warnings: string[];
}

const REAL_COLOR = "#1f77b4";
const FAKE_COLOR = "#d62728";

function gateCurve(name: string, color: string, series: SeriesPoint[]): Curve {
  return {
    name,
    color,
    points: series.map((p) => ({ x: p.segmentIndex, y: p.mean })),
    band: series.map((p) => ({ x: p.segmentIndex, lo: p.mean - p.std, hi: p.mean + p.std })),
  };
}

export function renderGateDynamics(csvText: string): GatePlot {
  const rows = parseGatesCsv(csvText);
  const real = gateSeries(rows, 0);
  const fake = gateSeries(rows, 1);
  if (real.length === 0 && fake.length === 0) {
    throw new Error("gates CSV has no data rows");
  }
  const warnings: string[] = [];
  const curves: Curve[] = [];
  if (real.length > 0) {
    curves.push(gateCurve("real", REAL_COLOR, real));
  } else {
    warnings.push("no real-class rows; plotting the fake curve alone");
  }
  if (fake.length > 0) {
    curves.push(gateCurve("fake (AI-generated)", FAKE_COLOR, fake));
  } else {
    warnings.push("no fake-class rows; plotting the real curve alone");
  }
  const svg = lineChart({
    title: "Fusion gate dynamics (band: +-1 std dev)",
    xLabel: "Segment index",
    yLabel: "Mean gate (contents-stream share)",
    curves,
    metadata: { real, fake },
  });
  return { svg, real, fake, warnings };
}

export function renderTraining(csvText: string): TrainingPlot {
  const { rows, warnings } = parseHistoryCsv(csvText);
  const curves: Curve[] = [
    {
      name: "train loss",
      color: "#1f77b4",
      points: rows.map((r) => ({ x: r.epoch, y: r.trainLoss })),
    },
    {
      name: "val loss",
      color: "#d62728",
      points: rows.map((r) => ({ x: r.epoch, y: r.valLoss })),
    },
    {
      name: "val accuracy",
      color: "#2ca02c",
      dashed: true,
      axis: "right",
      points: rows.map((r) => ({ x: r.epoch, y: r.valAcc })),
    },
  ];
  const svg = lineChart({
    title: "Training curves",
    xLabel: "Epoch",
    yLabel: "BCE loss",
    y2Label: "Validation accuracy",
    curves,
    metadata: { rows },
  });
  return { svg, rows, warnings };
}

export function plotGateDynamics(gatesCsvPath: string, outImage: string): GatePlot {
  const result = renderGateDynamics(readFileSync(gatesCsvPath, "utf8"));
  for (const w of result.warnings) {
    console.warn(`warning: ${w}`);
  }
  writeFileSync(outImage, result.svg);
  return result;
}

export function plotTraining(historyCsvPath: string, outImage: string): TrainingPlot {
  const result = renderTraining(readFileSync(historyCsvPath, "utf8"));
  for (const w of result.warnings) {
    console.warn(`warning: ${w}`);
  }
  writeFileSync(outImage, result.svg);
  return result;
}
