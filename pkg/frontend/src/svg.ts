export interface Series {
  xs: number[];
  ys: number[];
  color: string;
  label?: string;
  dash?: string;
  width?: number;
}

export interface Annotation {
  text: string;
  color?: string;
  attrs?: Record<string, string>;
}

export interface VLine {
  x: number;
  color: string;
  label?: string;
}

export interface ChartSpec {
  title?: string;
  xLabel?: string;
  yLabel?: string;
  xLog?: boolean;
  yLog?: boolean;
  width?: number;
  height?: number;
  annotations?: Annotation[];
  vlines?: VLine[];
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;").replace(/"/g, "&quot;");
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    const e = v.toExponential(0);
    return e.replace("e+", "e").replace(/^1e/, "1e");
  }
  let s = v.toPrecision(4);
  if (s.includes(".")) s = s.replace(/\.?0+$/, "");
  return s;
}

function niceTicksLinear(lo: number, hi: number, target = 6): number[] {
  const range = hi - lo;
  if (!(range > 0)) return [lo];
  const rawStep = range / target;
  const mag = Math.pow(10, Math.floor(Math.log10(rawStep)));
  let step = mag;
  for (const mult of [1, 2, 5, 10]) {
    if (mag * mult >= rawStep) {
      step = mag * mult;
      break;
    }
  }
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12 * range; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * range ? 0 : v);
  }
  return ticks;
}

function ticksLog(lo: number, hi: number): number[] {
  // decade ticks, with 2 and 5 mantissas filled in when the span is short
  const e0 = Math.floor(Math.log10(lo));
  const e1 = Math.ceil(Math.log10(hi));
  const decades: number[] = [];
  for (let e = e0; e <= e1; e++) decades.push(Math.pow(10, e));
  const mantissas = e1 - e0 <= 3 ? [1, 2, 5] : [1];
  const ticks: number[] = [];
  for (const d of decades) {
    for (const m of mantissas) {
      const v = m * d;
      if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) ticks.push(v);
    }
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

interface Bounds {
  lo: number;
  hi: number;
}

function dataBounds(values: number[][], log: boolean): Bounds {
  let lo = Infinity;
  let hi = -Infinity;
  for (const arr of values) {
    for (const v of arr) {
      if (!Number.isFinite(v)) continue;
      if (log && v <= 0) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!(lo <= hi)) {
    throw new Error("no drawable points");
  }
  if (lo === hi) {
    if (log) {
      lo /= Math.sqrt(10);
      hi *= Math.sqrt(10);
    } else {
      lo -= 1;
      hi += 1;
    }
  }
  return { lo, hi };
}

export function renderChart(series: Series[], spec: ChartSpec): string {
  const width = spec.width ?? 760;
  const height = spec.height ?? 480;
  const annotations = spec.annotations ?? [];
  const marginTop = 16 + (spec.title ? 26 : 0) + annotations.length * 18 + 6;
  const marginLeft = 72;
  const marginRight = 24;
  const marginBottom = 52;
  const plotW = width - marginLeft - marginRight;
  const plotH = height - marginTop - marginBottom;

  const xb = dataBounds(
    series.map((s) => s.xs).concat(spec.vlines ? [spec.vlines.map((v) => v.x)] : []),
    !!spec.xLog
  );
  const yb = dataBounds(series.map((s) => s.ys), !!spec.yLog);

  const tx = (v: number) => (spec.xLog ? Math.log10(v) : v);
  const ty = (v: number) => (spec.yLog ? Math.log10(v) : v);
  const padFrac = 0.04;
  const x0 = tx(xb.lo);
  const x1 = tx(xb.hi);
  const y0 = ty(yb.lo);
  const y1 = ty(yb.hi);
  const xPad = (x1 - x0) * padFrac || 0.5;
  const yPad = (y1 - y0) * padFrac || 0.5;
  const sx = (v: number) => marginLeft + ((tx(v) - (x0 - xPad)) / (x1 - x0 + 2 * xPad)) * plotW;
  const sy = (v: number) => marginTop + plotH - ((ty(v) - (y0 - yPad)) / (y1 - y0 + 2 * yPad)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
      `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`
  );
  parts.push(`<rect width="${width}" height="${height}" fill="white"/>`);

  let cursorY = 16;
  if (spec.title) {
    cursorY += 10;
    parts.push(
      `<text x="${width / 2}" y="${cursorY}" text-anchor="middle" font-size="16">${esc(spec.title)}</text>`
    );
    cursorY += 16;
  }
  for (const a of annotations) {
    cursorY += 14;
    const extra = Object.entries(a.attrs ?? {})
      .map(([k, v]) => ` ${k}="${esc(v)}"`)
      .join("");
    parts.push(
      `<text x="${marginLeft}" y="${cursorY}" font-size="12" fill="${a.color ?? "#333"}"${extra}>${esc(a.text)}</text>`
    );
    cursorY += 4;
  }

  const xticks = spec.xLog ? ticksLog(xb.lo, xb.hi) : niceTicksLinear(xb.lo, xb.hi);
  const yticks = spec.yLog ? ticksLog(yb.lo, yb.hi) : niceTicksLinear(yb.lo, yb.hi);
  for (const v of xticks) {
    const px = sx(v);
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${marginTop}" x2="${px.toFixed(2)}" y2="${marginTop + plotH}" stroke="#e0e0e0"/>`
    );
    parts.push(
      `<text x="${px.toFixed(2)}" y="${marginTop + plotH + 18}" text-anchor="middle" font-size="11">${esc(fmtTick(v))}</text>`
    );
  }
  for (const v of yticks) {
    const py = sy(v);
    parts.push(
      `<line x1="${marginLeft}" y1="${py.toFixed(2)}" x2="${marginLeft + plotW}" y2="${py.toFixed(2)}" stroke="#e0e0e0"/>`
    );
    parts.push(
      `<text x="${marginLeft - 6}" y="${(py + 4).toFixed(2)}" text-anchor="end" font-size="11">${esc(fmtTick(v))}</text>`
    );
  }
  parts.push(
    `<rect x="${marginLeft}" y="${marginTop}" width="${plotW}" height="${plotH}" fill="none" stroke="#888"/>`
  );
  if (spec.xLabel) {
    parts.push(
      `<text x="${marginLeft + plotW / 2}" y="${height - 14}" text-anchor="middle" font-size="13">${esc(spec.xLabel)}</text>`
    );
  }
  if (spec.yLabel) {
    const ly = marginTop + plotH / 2;
    parts.push(
      `<text x="20" y="${ly}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${ly})">${esc(spec.yLabel)}</text>`
    );
  }

  for (const vl of spec.vlines ?? []) {
    if (!Number.isFinite(vl.x) || (spec.xLog && vl.x <= 0)) continue;
    const px = sx(vl.x);
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${marginTop}" x2="${px.toFixed(2)}" y2="${marginTop + plotH}" ` +
        `stroke="${vl.color}" stroke-dasharray="4 4" stroke-width="1.4"/>`
    );
    if (vl.label) {
      parts.push(
        `<text x="${(px + 4).toFixed(2)}" y="${marginTop + 14}" font-size="11" fill="${vl.color}">${esc(vl.label)}</text>`
      );
    }
  }

  for (const s of series) {
    // break the polyline at gaps: non-finite samples or non-positive ones on a log axis
    const runs: string[][] = [[]];
    for (let i = 0; i < s.xs.length; i++) {
      const x = s.xs[i]!;
      const y = s.ys[i]!;
      const bad =
        !Number.isFinite(x) ||
        !Number.isFinite(y) ||
        (spec.xLog && x <= 0) ||
        (spec.yLog && y <= 0);
      if (bad) {
        if (runs[runs.length - 1]!.length > 0) runs.push([]);
        continue;
      }
      runs[runs.length - 1]!.push(`${sx(x).toFixed(2)},${sy(y).toFixed(2)}`);
    }
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    const w = s.width ?? 1.8;
    for (const run of runs) {
      if (run.length === 0) continue;
      if (run.length === 1) {
        const [pt] = run;
        const [cx, cy] = pt!.split(",");
        parts.push(`<circle cx="${cx}" cy="${cy}" r="2.2" fill="${s.color}"/>`);
      } else {
        parts.push(
          `<polyline points="${run.join(" ")}" fill="none" stroke="${s.color}" stroke-width="${w}"${dash}/>`
        );
      }
    }
  }

  const labeled = series.filter((s) => s.label);
  labeled.forEach((s, i) => {
    const lx = marginLeft + plotW - 150;
    const ly = marginTop + 16 + i * 17;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 22}" y2="${ly - 4}" stroke="${s.color}" stroke-width="2"${dash}/>`
    );
    parts.push(`<text x="${lx + 28}" y="${ly}" font-size="12">${esc(s.label!)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
