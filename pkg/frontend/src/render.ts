import { basename } from "node:path";

import { column, parseCsv, requireColumns, type Table } from "./csv";
import { type FigureSpec } from "./figures";
import { fitDecay } from "./fit";
import { renderChart, type Annotation, type Series } from "./svg";

export interface RenderResult {
  svg: string;
  meta: Record<string, unknown>;
}

const COLUMN_EXPONENTS: Record<string, number> = {
  L1: 1,
  L2: 2,
  Linf: Infinity,
};

function normExponent(spec: FigureSpec, columnName: string): number {
  if (spec.m !== undefined) return spec.m;
  const m = COLUMN_EXPONENTS[columnName];
  if (m === undefined) {
    throw new Error(
      `cannot infer the norm exponent of column '${columnName}'; set "m" in the figure spec`
    );
  }
  return m;
}

function renderDecay(spec: FigureSpec, table: Table): RenderResult {
  const columnName = spec.column ?? "L2";
  requireColumns(table, spec.input, ["t", columnName]);
  const t = column(table, "t");
  const v = column(table, columnName);
  const fit = fitDecay(t, v, spec.window);
  const dim = spec.dim ?? 3;
  const mu = spec.mu ?? 1;
  const m = normExponent(spec, columnName);
  const predicted = -(dim / 2) * (1 / mu - 1 / m);

  const [lo, hi] = fit.window;
  const fitLine: Series = {
    xs: [lo, hi],
    ys: [Math.exp(fit.intercept) * Math.pow(lo, fit.slope), Math.exp(fit.intercept) * Math.pow(hi, fit.slope)],
    color: "#d32f2f",
    label: `fit slope ${fit.slope.toFixed(4)}`,
    width: 1.6,
  };
  // reference decay anchored to the fitted value at the window start
  const refAnchor = Math.exp(fit.intercept) * Math.pow(lo, fit.slope);
  const refLine: Series = {
    xs: [lo, hi],
    ys: [refAnchor, refAnchor * Math.pow(hi / lo, predicted)],
    color: "#2e7d32",
    label: `reference slope ${predicted}`,
    dash: "6 4",
    width: 1.6,
  };
  const data: Series = { xs: t, ys: v, color: "#1565c0", label: `${columnName} norm` };

  const annotations: Annotation[] = [
    {
      text: `fitted slope ${fit.slope.toFixed(6)} on window [${lo}, ${hi}] (${fit.nSamples} samples, r^2 ${fit.rSquared.toFixed(5)})`,
      attrs: {
        "data-slope": String(fit.slope),
        "data-window-lo": String(lo),
        "data-window-hi": String(hi),
      },
    },
    {
      text: `theoretical slope ${predicted} for dim ${dim}, mu ${mu}, m ${m}`,
      attrs: { "data-predicted": String(predicted) },
    },
  ];
  const svg = renderChart([data, fitLine, refLine], {
    title: spec.title ?? `norm decay (${basename(spec.input)})`,
    xLabel: "t",
    yLabel: `||u||_${columnName}`,
    xLog: true,
    yLog: true,
    annotations,
  });
  return {
    svg,
    meta: {
      slope: fit.slope,
      intercept: fit.intercept,
      rSquared: fit.rSquared,
      predicted,
      window: fit.window,
      nSamples: fit.nSamples,
    },
  };
}

function renderBlowup(spec: FigureSpec, table: Table): RenderResult {
  requireColumns(table, spec.input, ["t", "Linf", "Lm"]);
  const t = column(table, "t");
  const linf = column(table, "Linf");
  const lm = column(table, "Lm");
  const series: Series[] = [
    { xs: t, ys: linf, color: "#d32f2f", label: "sup norm" },
    { xs: t, ys: lm, color: "#1565c0", label: "Lm norm" },
  ];
  const vlines = spec.tStar !== undefined ? [{ x: spec.tStar, color: "#555", label: `T* = ${spec.tStar}` }] : [];
  const finite = linf.filter((v) => Number.isFinite(v));
  const growth = finite.length > 0 && finite[0]! > 0 ? Math.max(...finite) / finite[0]! : NaN;
  const svg = renderChart(series, {
    title: spec.title ?? `amplitude history (${basename(spec.input)})`,
    xLabel: "t",
    yLabel: "norm",
    yLog: true,
    vlines,
    annotations: [
      {
        text: `sup norm growth ${Number.isFinite(growth) ? growth.toFixed(2) : "n/a"}x over the run`,
        attrs: { "data-growth": String(growth) },
      },
    ],
  });
  return { svg, meta: { growth, tStar: spec.tStar ?? null, samples: t.length } };
}

function renderGap(spec: FigureSpec, table: Table): RenderResult {
  requireColumns(table, spec.input, ["t", "lhs", "rhs", "gap"]);
  const t = column(table, "t");
  const lhs = column(table, "lhs");
  const rhs = column(table, "rhs");
  const gap = column(table, "gap");
  const maxGap = Math.max(...gap);
  const passed = maxGap <= 0;
  const verdict: Annotation = passed
    ? { text: "PASS: gap never positive", color: "#2e7d32", attrs: { "data-max-gap": String(maxGap) } }
    : { text: `FAIL: max gap ${maxGap.toExponential(3)}`, color: "#c62828", attrs: { "data-max-gap": String(maxGap) } };
  const svg = renderChart(
    [
      { xs: t, ys: lhs, color: "#1565c0", label: "one-sided distance" },
      { xs: t, ys: rhs, color: "#2e7d32", label: "allowed budget" },
      { xs: t, ys: gap, color: "#d32f2f", label: "gap", dash: "5 3" },
    ],
    {
      title: spec.title ?? `contraction gap (${basename(spec.input)})`,
      xLabel: "t",
      yLabel: "L1 distance",
      annotations: [verdict],
    }
  );
  return { svg, meta: { maxGap, passed } };
}

function renderPicard(spec: FigureSpec, table: Table): RenderResult {
  requireColumns(table, spec.input, ["k", "diff"]);
  const k = column(table, "k");
  const diff = column(table, "diff");
  const finite = diff.filter((d) => Number.isFinite(d) && d > 0);
  const lastDiff = finite.length > 0 ? finite[finite.length - 1]! : NaN;
  const svg = renderChart([{ xs: k, ys: diff, color: "#6a1b9a", label: "successive diff" }], {
    title: spec.title ?? `Picard convergence (${basename(spec.input)})`,
    xLabel: "iteration",
    yLabel: "diff",
    yLog: true,
    annotations: [
      {
        text: `${table.rows} iterates, last recorded diff ${Number.isFinite(lastDiff) ? lastDiff.toExponential(3) : "n/a"}`,
        attrs: { "data-last-diff": String(lastDiff) },
      },
    ],
  });
  return { svg, meta: { iterations: table.rows, lastDiff } };
}

export function renderFigure(spec: FigureSpec): RenderResult {
  const table = parseCsv(spec.input);
  switch (spec.kind) {
    case "decay":
      return renderDecay(spec, table);
    case "blowup":
      return renderBlowup(spec, table);
    case "gap":
      return renderGap(spec, table);
    case "picard":
      return renderPicard(spec, table);
  }
}
