/**
 * Minimal hand-built SVG line charts.  No DOM, no dependencies: the chart is
 * assembled as a string, so identical inputs produce identical bytes.
 */

export interface Point {
  x: number;
  y: number;
}

export interface BandPoint {
  x: number;
  lo: number;
  hi: number;
}

export interface Curve {
  name: string;
  color: string;
  points: Point[];
  band?: BandPoint[];
  dashed?: boolean;
  /** "right" curves are scaled against the secondary y axis. */
  axis?: "left" | "right";
}

export interface ChartOptions {
  title: string;
  xLabel: string;
  yLabel: string;
  y2Label?: string;
  curves: Curve[];
  width?: number;
  height?: number;
  /** Serialized into a <metadata> block so the plotted data rides with the image. */
  metadata?: unknown;
}

interface Range {
  min: number;
  max: number;
}

function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function padRange(values: number[]): Range {
  let min = Math.min(...values);
  let max = Math.max(...values);
  if (min === max) {
    min -= 0.5;
    max += 0.5;
  }
  const pad = (max - min) * 0.06;
  return { min: min - pad, max: max + pad };
}

/** Tick positions at a "nice" step covering [min, max], about `count` of them. */
function ticks(range: Range, count = 5): number[] {
  const span = range.max - range.min;
  const rough = span / count;
  const mag = 10 ** Math.floor(Math.log10(rough));
  let step = 10 * mag;
  for (const m of [1, 2, 2.5, 5]) {
    if (m * mag >= rough) {
      step = m * mag;
      break;
    }
  }
  const out: number[] = [];
  for (let t = Math.ceil(range.min / step) * step; t <= range.max + 1e-12; t += step) {
    out.push(t);
  }
  return out;
}

function formatTick(v: number): string {
  const s = v.toFixed(4);
  return s.replace(/\.?0+$/, "") || "0";
}

export function lineChart(opts: ChartOptions): string {
  const width = opts.width ?? 720;
  const height = opts.height ?? 440;
  const hasRight = opts.curves.some((c) => c.axis === "right");
  const margin = { top: 48, right: hasRight ? 64 : 28, bottom: 56, left: 68 };
  const innerW = width - margin.left - margin.right;
  const innerH = height - margin.top - margin.bottom;

  const xs = opts.curves.flatMap((c) => c.points.map((p) => p.x));
  if (xs.length === 0) {
    throw new Error("nothing to plot: every curve is empty");
  }
  const leftYs = opts.curves
    .filter((c) => c.axis !== "right")
    .flatMap((c) => [
      ...c.points.map((p) => p.y),
      ...(c.band ?? []).flatMap((b) => [b.lo, b.hi]),
    ]);
  const rightYs = opts.curves
    .filter((c) => c.axis === "right")
    .flatMap((c) => c.points.map((p) => p.y));

  const xr = padRange(xs);
  const yr = padRange(leftYs.length > 0 ? leftYs : [0, 1]);
  const y2r = padRange(rightYs.length > 0 ? rightYs : [0, 1]);

  const px = (x: number) => margin.left + ((x - xr.min) / (xr.max - xr.min)) * innerW;
  const py = (y: number, r: Range = yr) =>
    margin.top + (1 - (y - r.min) / (r.max - r.min)) * innerH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
  );
  if (opts.metadata !== undefined) {
    parts.push(`<metadata>${escapeXml(JSON.stringify(opts.metadata))}</metadata>`);
  }
  parts.push(`<rect width="${width}" height="${height}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${width / 2}" y="24" text-anchor="middle" font-size="16" fill="#111">` +
      `${escapeXml(opts.title)}</text>`,
  );

  // gridlines and tick labels
  for (const t of ticks(xr)) {
    const x = px(t).toFixed(2);
    parts.push(
      `<line x1="${x}" y1="${margin.top}" x2="${x}" y2="${margin.top + innerH}" ` +
        `stroke="#e3e3e3" stroke-width="1"/>`,
      `<text x="${x}" y="${margin.top + innerH + 18}" text-anchor="middle" ` +
        `font-size="11" fill="#444">${formatTick(t)}</text>`,
    );
  }
  for (const t of ticks(yr)) {
    const y = py(t).toFixed(2);
    parts.push(
      `<line x1="${margin.left}" y1="${y}" x2="${margin.left + innerW}" y2="${y}" ` +
        `stroke="#e3e3e3" stroke-width="1"/>`,
      `<text x="${margin.left - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" ` +
        `font-size="11" fill="#444">${formatTick(t)}</text>`,
    );
  }
  if (hasRight) {
    for (const t of ticks(y2r)) {
      const y = py(t, y2r).toFixed(2);
      parts.push(
        `<text x="${margin.left + innerW + 8}" y="${y}" text-anchor="start" ` +
          `dominant-baseline="middle" font-size="11" fill="#444">${formatTick(t)}</text>`,
      );
    }
  }

  // axes
  const x0 = margin.left;
  const y0 = margin.top + innerH;
  parts.push(
    `<line x1="${x0}" y1="${margin.top}" x2="${x0}" y2="${y0}" stroke="#111" stroke-width="1.5"/>`,
    `<line x1="${x0}" y1="${y0}" x2="${x0 + innerW}" y2="${y0}" stroke="#111" stroke-width="1.5"/>`,
    `<text x="${margin.left + innerW / 2}" y="${height - 14}" text-anchor="middle" ` +
      `font-size="13" fill="#111">${escapeXml(opts.xLabel)}</text>`,
    `<text x="20" y="${margin.top + innerH / 2}" text-anchor="middle" font-size="13" ` +
      `fill="#111" transform="rotate(-90 20 ${margin.top + innerH / 2})">` +
      `${escapeXml(opts.yLabel)}</text>`,
  );
  if (hasRight && opts.y2Label !== undefined) {
    const cx = width - 16;
    const cy = margin.top + innerH / 2;
    parts.push(
      `<text x="${cx}" y="${cy}" text-anchor="middle" font-size="13" fill="#111" ` +
        `transform="rotate(90 ${cx} ${cy})">${escapeXml(opts.y2Label)}</text>`,
    );
  }

  // bands first so curves draw on top
  for (const curve of opts.curves) {
    if (!curve.band || curve.band.length === 0) continue;
    const upper = curve.band.map((b) => `${px(b.x).toFixed(2)},${py(b.hi).toFixed(2)}`);
    const lower = [...curve.band]
      .reverse()
      .map((b) => `${px(b.x).toFixed(2)},${py(b.lo).toFixed(2)}`);
    parts.push(
      `<polygon points="${[...upper, ...lower].join(" ")}" fill="${curve.color}" ` +
        `fill-opacity="0.15" stroke="none"/>`,
    );
  }

  for (const curve of opts.curves) {
    const r = curve.axis === "right" ? y2r : yr;
    const coords = curve.points
      .map((p) => `${px(p.x).toFixed(2)},${py(p.y, r).toFixed(2)}`)
      .join(" ");
    const dash = curve.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<polyline points="${coords}" fill="none" stroke="${curve.color}" ` +
        `stroke-width="2"${dash} data-name="${escapeXml(curve.name)}"/>`,
    );
    if (curve.points.length <= 64) {
      for (const p of curve.points) {
        parts.push(
          `<circle cx="${px(p.x).toFixed(2)}" cy="${py(p.y, r).toFixed(2)}" r="2.5" ` +
            `fill="${curve.color}"/>`,
        );
      }
    }
  }

  // legend
  let ly = margin.top + 10;
  for (const curve of opts.curves) {
    const lx = margin.left + innerW - 150;
    const dash = curve.dashed ? ` stroke-dasharray="6 4"` : "";
    parts.push(
      `<line x1="${lx}" y1="${ly}" x2="${lx + 24}" y2="${ly}" stroke="${curve.color}" ` +
        `stroke-width="2"${dash}/>`,
      `<text x="${lx + 30}" y="${ly + 4}" font-size="12" fill="#111">` +
        `${escapeXml(curve.name)}</text>`,
    );
    ly += 18;
  }

  parts.push("</svg>");
  return parts.join("\n");
}
