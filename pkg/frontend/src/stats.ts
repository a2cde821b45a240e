import { GateCsvRow } from "./csv";

/** Mean gate and dispersion for one (class, segment index) group. */
export interface SeriesPoint {
  segmentIndex: number;
  mean: number;
  std: number;
  count: number;
}

/**
 * Group one class's rows by segment index, sorted by index.  The band shown
 * on the plot is mean +- one population standard deviation.
 */
export function gateSeries(rows: readonly GateCsvRow[], label: 0 | 1): SeriesPoint[] {
  const groups = new Map<number, number[]>();
  for (const row of rows) {
    if (row.label !== label) continue;
    const bucket = groups.get(row.segmentIndex);
    if (bucket === undefined) {
      groups.set(row.segmentIndex, [row.meanGate]);
    } else {
      bucket.push(row.meanGate);
    }
  }
  return [...groups.entries()]
    .sort((a, b) => a[0] - b[0])
    .map(([segmentIndex, values]) => {
      const mean = values.reduce((s, v) => s + v, 0) / values.length;
      const variance = values.reduce((s, v) => s + (v - mean) ** 2, 0) / values.length;
      return { segmentIndex, mean, std: Math.sqrt(variance), count: values.length };
    });
}
