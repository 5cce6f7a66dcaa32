/**
 * riglid-figures — SVG plots from riglid experiment CSVs
 *
 * Reads the delimited output of the primary experiment tool and renders
 * publication-style convergence figures: log-log decay curves with
 * power-law reference overlays, dispersive envelopes, and limit-approach
 * plots.  Slope annotations are least-squares fits in log-log space over
 * the plotted rows — the same fit the experiment manifests record — and
 * no physics is ever recomputed here.
 *
 * Rendering is a pure function of (CSV bytes, spec): identical inputs give
 * byte-identical SVG.
 */

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

export interface Csv {
  columns: string[];
  rows: number[][];
}

export interface PowerOverlay {
  type: "power";
  exponent: number;
  anchor?: "first" | "last";
  label?: string;
}

export interface ColumnOverlay {
  type: "column";
  column: string;
  label?: string;
}

export type Overlay = PowerOverlay | ColumnOverlay;

export type FigureKind = "loglog-slope" | "envelope" | "limit-approach";

export interface FigureSpec {
  input: string;
  output: string;
  kind: FigureKind;
  x: string;
  y: string;
  title?: string;
  overlays?: Overlay[];
  /** restrict the slope fit to rows [i0, i1) — defaults to all rows */
  slopeRange?: [number, number];
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

export function parseCsv(text: string): Csv {
  const lines = text.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const columns = lines[0].split(",").map((name) => name.trim());
  const rows = lines.slice(1).map((line, index) => {
    const parts = line.split(",");
    if (parts.length !== columns.length) {
      throw new Error(`CSV row ${index + 1} has ${parts.length} fields, expected ${columns.length}`);
    }
    return parts.map((part) => Number(part));
  });
  if (rows.length === 0) {
    throw new Error("CSV has a header but no data rows");
  }
  return { columns, rows };
}

export function column(csv: Csv, name: string): number[] {
  const index = csv.columns.indexOf(name);
  if (index < 0) {
    throw new Error(`missing column '${name}' (have: ${csv.columns.join(", ")})`);
  }
  return csv.rows.map((row) => row[index]);
}

// ---------------------------------------------------------------------------
// Slope fit (least squares in log-log space, matching the primary's fit)
// ---------------------------------------------------------------------------

export function fitLogLogSlope(x: number[], y: number[]): number {
  const lx: number[] = [];
  const ly: number[] = [];
  for (let i = 0; i < x.length; i++) {
    if (x[i] > 0 && Math.abs(y[i]) > 0) {
      lx.push(Math.log(x[i]));
      ly.push(Math.log(Math.abs(y[i])));
    }
  }
  if (lx.length < 2) {
    return NaN;
  }
  const mean = (v: number[]) => v.reduce((a, b) => a + b, 0) / v.length;
  const mx = mean(lx);
  const my = mean(ly);
  let num = 0;
  let den = 0;
  for (let i = 0; i < lx.length; i++) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

// ---------------------------------------------------------------------------
// SVG assembly
// ---------------------------------------------------------------------------

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 70, right: 24, top: 42, bottom: 52 };
const COLORS = ["#1f6fb2", "#c23b22", "#3a8f5d", "#8a5fb0", "#b08c3a"];

function fmt(value: number, digits = 6): string {
  if (!isFinite(value)) return "nan";
  return Number(value.toPrecision(digits)).toString();
}

type Scale = (v: number) => number;

function makeScale(values: number[], lo: number, hi: number, log: boolean): Scale {
  const finite = values.filter((v) => isFinite(v) && (!log || v > 0));
  let vmin = Math.min(...finite);
  let vmax = Math.max(...finite);
  if (!isFinite(vmin) || !isFinite(vmax)) {
    vmin = log ? 1e-1 : 0;
    vmax = log ? 1 : 1;
  }
  if (vmin === vmax) {
    vmin = log ? vmin / 2 : vmin - 1;
    vmax = log ? vmax * 2 : vmax + 1;
  }
  if (log) {
    const a = Math.log10(vmin);
    const b = Math.log10(vmax);
    return (v) => lo + ((Math.log10(v) - a) / (b - a)) * (hi - lo);
  }
  const pad = 0.05 * (vmax - vmin);
  const a = vmin - pad;
  const b = vmax + pad;
  return (v) => lo + ((v - a) / (b - a)) * (hi - lo);
}

function logTicks(values: number[]): number[] {
  const positives = values.filter((v) => v > 0 && isFinite(v));
  if (positives.length === 0) return [];
  const lo = Math.floor(Math.log10(Math.min(...positives)));
  const hi = Math.ceil(Math.log10(Math.max(...positives)));
  const ticks: number[] = [];
  for (let d = lo; d <= hi; d++) {
    ticks.push(Math.pow(10, d));
  }
  return ticks;
}

function linTicks(values: number[], count = 5): number[] {
  const finite = values.filter((v) => isFinite(v));
  const lo = Math.min(...finite);
  const hi = Math.max(...finite);
  const ticks: number[] = [];
  for (let i = 0; i <= count; i++) {
    ticks.push(lo + ((hi - lo) * i) / count);
  }
  return ticks;
}

function polyline(xs: number[], ys: number[], sx: Scale, sy: Scale,
                  color: string, dash?: string): string {
  const points = xs
    .map((x, i) => [x, ys[i]])
    .filter(([x, y]) => isFinite(sx(x)) && isFinite(sy(y)))
    .map(([x, y]) => `${fmt(sx(x), 7)},${fmt(HEIGHT - sy(y), 7)}`)
    .join(" ");
  const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline fill="none" stroke="${color}" stroke-width="1.6"${dashAttr} points="${points}"/>`;
}

function markers(xs: number[], ys: number[], sx: Scale, sy: Scale,
                 color: string): string {
  return xs
    .map((x, i) => [x, ys[i]])
    .filter(([x, y]) => isFinite(sx(x)) && isFinite(sy(y)))
    .map(([x, y]) =>
      `<circle cx="${fmt(sx(x), 7)}" cy="${fmt(HEIGHT - sy(y), 7)}" r="3.2" fill="${color}"/>`)
    .join("\n");
}

interface Series {
  label: string;
  xs: number[];
  ys: number[];
  color: string;
  dash?: string;
  dots?: boolean;
}

export function renderFigure(spec: FigureSpec, csvText: string): string {
  const csv = parseCsv(csvText);
  const xs = column(csv, spec.x);
  const ys = column(csv, spec.y);

  const series: Series[] = [
    { label: spec.y, xs, ys, color: COLORS[0], dots: true },
  ];
  for (const [i, overlay] of (spec.overlays ?? []).entries()) {
    const color = COLORS[(i + 1) % COLORS.length];
    if (overlay.type === "power") {
      const anchorIndex = overlay.anchor === "last" ? xs.length - 1 : 0;
      const c = ys[anchorIndex] / Math.pow(xs[anchorIndex], overlay.exponent);
      series.push({
        label: overlay.label ?? `x^${fmt(overlay.exponent, 4)}`,
        xs,
        ys: xs.map((x) => c * Math.pow(x, overlay.exponent)),
        color,
        dash: "6 4",
      });
    } else {
      series.push({
        label: overlay.label ?? overlay.column,
        xs,
        ys: column(csv, overlay.column),
        color,
        dash: "6 4",
      });
    }
  }

  const logX = true;
  const logY = spec.kind !== "limit-approach";
  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys);
  const sx = makeScale(allX, MARGIN.left, WIDTH - MARGIN.right, logX);
  const sy = makeScale(allY, MARGIN.bottom, HEIGHT - MARGIN.top, logY);

  const fitRange = spec.slopeRange ?? [0, xs.length];
  const slope = fitLogLogSlope(xs.slice(fitRange[0], fitRange[1]),
                               ys.slice(fitRange[0], fitRange[1]));
  const annotate = xs.length >= 2 && isFinite(slope);

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`);
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${WIDTH - MARGIN.left - MARGIN.right}" height="${HEIGHT - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#444" stroke-width="1"/>`);

  // axis ticks
  const xticks = logX ? logTicks(allX) : linTicks(allX);
  for (const t of xticks) {
    const px = sx(t);
    if (!isFinite(px) || px < MARGIN.left - 1 || px > WIDTH - MARGIN.right + 1) continue;
    parts.push(`<line x1="${fmt(px, 7)}" y1="${HEIGHT - MARGIN.bottom}" x2="${fmt(px, 7)}" y2="${HEIGHT - MARGIN.bottom + 5}" stroke="#444"/>`);
    parts.push(`<text x="${fmt(px, 7)}" y="${HEIGHT - MARGIN.bottom + 18}" font-size="11" text-anchor="middle">${fmt(t, 3)}</text>`);
  }
  const yticks = logY ? logTicks(allY) : linTicks(allY);
  for (const t of yticks) {
    const py = HEIGHT - sy(t);
    if (!isFinite(py) || py < MARGIN.top - 1 || py > HEIGHT - MARGIN.bottom + 1) continue;
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${fmt(py, 7)}" x2="${MARGIN.left}" y2="${fmt(py, 7)}" stroke="#444"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${fmt(py + 4, 7)}" font-size="11" text-anchor="end">${fmt(t, 3)}</text>`);
  }

  // series
  for (const s of series) {
    if (s.xs.length > 1) {
      parts.push(polyline(s.xs, s.ys, sx, sy, s.color, s.dash));
    }
    if (s.dots || s.xs.length === 1) {
      parts.push(markers(s.xs, s.ys, sx, sy, s.color));
    }
  }

  // legend
  let legendY = MARGIN.top + 14;
  for (const s of series) {
    parts.push(`<line x1="${WIDTH - MARGIN.right - 150}" y1="${legendY - 4}" x2="${WIDTH - MARGIN.right - 126}" y2="${legendY - 4}" stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`);
    parts.push(`<text x="${WIDTH - MARGIN.right - 120}" y="${legendY}" font-size="12">${s.label}</text>`);
    legendY += 16;
  }

  // labels and annotation
  if (spec.title) {
    parts.push(`<text x="${WIDTH / 2}" y="24" font-size="15" text-anchor="middle">${spec.title}</text>`);
  }
  parts.push(`<text x="${WIDTH / 2}" y="${HEIGHT - 14}" font-size="13" text-anchor="middle">${spec.x}</text>`);
  parts.push(`<text x="18" y="${HEIGHT / 2}" font-size="13" text-anchor="middle" transform="rotate(-90 18 ${HEIGHT / 2})">${spec.y}</text>`);
  if (annotate) {
    parts.push(`<text x="${MARGIN.left + 12}" y="${MARGIN.top + 18}" font-size="13" fill="#222">slope = ${fmt(slope, 10)}</text>`);
  }
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

/** The slope a rendered figure would annotate, or NaN for degenerate input. */
export function figureSlope(spec: FigureSpec, csvText: string): number {
  const csv = parseCsv(csvText);
  const xs = column(csv, spec.x);
  const ys = column(csv, spec.y);
  const range = spec.slopeRange ?? [0, xs.length];
  return fitLogLogSlope(xs.slice(range[0], range[1]), ys.slice(range[0], range[1]));
}
