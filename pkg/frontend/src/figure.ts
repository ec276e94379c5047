// Small-multiple figure builder: one panel per step parameter, one series
// per algorithm, rendered to deterministic standalone SVG text.

import { MetricName, ResultRow, metricValue } from "./csv.js";

export interface FigureSpec {
    metric: MetricName;
    /** Log-scale the y axis; defaults to true for the train objective. */
    logY?: boolean;
    /** Keep only these algorithms (default: all present). */
    algorithms?: string[];
    /** Keep only these panel keys (default: all present). */
    ltilde?: number[];
    /** Seed to plot (default: the smallest seed present). */
    seed?: number;
}

export interface SeriesPoint {
    epoch: number;
    value: number;
}

export interface Series {
    algorithm: string;
    points: SeriesPoint[];
}

export interface Panel {
    ltilde: number;
    series: Series[];
}

// Fixed series order and palette, keyed by algorithm name.
const ALGORITHM_ORDER = [
    "gd",
    "sgd",
    "saga",
    "lsvrg",
    "adagrad_norm",
    "adagrad_diag",
    "adasaga_norm",
    "adasaga_diag",
    "adalsvrg_norm",
    "adalsvrg_diag",
    "rmsprop",
    "rmsprop_saga",
    "rmsprop_lsvrg",
    "adam",
    "adam_saga",
    "adam_lsvrg",
];

const PALETTE = [
    "#4477aa", "#ee6677", "#228833", "#ccbb44", "#66ccee", "#aa3377",
    "#bbbbbb", "#000000", "#e69f00", "#56b4e9", "#009e73", "#f0e442",
    "#0072b2", "#d55e00", "#cc79a7", "#999933",
];

function algorithmRank(name: string): number {
    const idx = ALGORITHM_ORDER.indexOf(name);
    return idx >= 0 ? idx : ALGORITHM_ORDER.length;
}

export function seriesColor(name: string): string {
    const idx = ALGORITHM_ORDER.indexOf(name);
    if (idx >= 0) {
        return PALETTE[idx % PALETTE.length];
    }
    let h = 0;
    for (const ch of name) {
        h = (h * 31 + ch.charCodeAt(0)) >>> 0;
    }
    return PALETTE[h % PALETTE.length];
}

/** Variance-reduced algorithms draw solid, plain-estimator baselines dashed. */
export function isVarianceReduced(name: string): boolean {
    return name.includes("saga") || name.includes("lsvrg");
}

export function selectPanels(rows: ResultRow[], spec: FigureSpec): Panel[] {
    const logY = spec.logY ?? spec.metric === "train_objective";
    let kept = rows.filter((r) => !r.diverged); // truncate at the last finite checkpoint
    if (spec.algorithms !== undefined) {
        const allow = new Set(spec.algorithms);
        kept = kept.filter((r) => allow.has(r.algorithm));
    }
    if (spec.ltilde !== undefined) {
        const allow = new Set(spec.ltilde);
        kept = kept.filter((r) => allow.has(r.ltilde));
    }
    if (kept.length === 0) {
        throw new Error("empty selection: no rows match the requested filters");
    }
    const seed = spec.seed ?? Math.min(...kept.map((r) => r.seed));
    kept = kept.filter((r) => r.seed === seed);
    kept = kept.filter((r) => {
        const v = metricValue(r, spec.metric);
        return v !== null && (!logY || v > 0);
    });
    if (kept.length === 0) {
        throw new Error(`empty selection: no plottable values for metric '${spec.metric}'`);
    }
    const panelKeys = [...new Set(kept.map((r) => r.ltilde))].sort((a, b) => a - b);
    return panelKeys.map((lt) => {
        const inPanel = kept.filter((r) => r.ltilde === lt);
        const names = [...new Set(inPanel.map((r) => r.algorithm))].sort(
            (a, b) => algorithmRank(a) - algorithmRank(b) || a.localeCompare(b),
        );
        const series = names.map((name) => ({
            algorithm: name,
            points: inPanel
                .filter((r) => r.algorithm === name)
                .sort((a, b) => a.epoch - b.epoch)
                .map((r) => ({ epoch: r.epoch, value: metricValue(r, spec.metric) as number })),
        }));
        return { ltilde: lt, series };
    });
}

function fmt(v: number): string {
    if (v === 0) {
        return "0";
    }
    const a = Math.abs(v);
    if (a >= 10000 || a < 0.01) {
        return v.toExponential(1);
    }
    return String(Number(v.toPrecision(3)));
}

interface Scale {
    lo: number;
    hi: number;
    map(v: number): number;
}

function linearScale(values: number[], outLo: number, outHi: number): Scale {
    let lo = Math.min(...values);
    let hi = Math.max(...values);
    if (lo === hi) {
        lo -= 0.5;
        hi += 0.5;
    }
    return {
        lo,
        hi,
        map: (v) => outLo + ((v - lo) / (hi - lo)) * (outHi - outLo),
    };
}

const PANEL_W = 300;
const PANEL_H = 220;
const MARGIN = { left: 62, right: 14, top: 30, bottom: 40 };
const LEGEND_H = 26;

export function renderFigure(rows: ResultRow[], spec: FigureSpec): string {
    const logY = spec.logY ?? spec.metric === "train_objective";
    const panels = selectPanels(rows, spec);
    const cols = Math.min(3, panels.length);
    const gridRows = Math.ceil(panels.length / cols);
    const width = cols * PANEL_W;
    const height = LEGEND_H + gridRows * PANEL_H;

    const out: string[] = [];
    out.push(
        `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" ` +
        `viewBox="0 0 ${width} ${height}" font-family="Helvetica, Arial, sans-serif">`,
    );
    out.push(`<rect width="${width}" height="${height}" fill="white"/>`);

    // shared legend across panels
    const legendNames = [...new Set(panels.flatMap((p) => p.series.map((s) => s.algorithm)))].sort(
        (a, b) => algorithmRank(a) - algorithmRank(b) || a.localeCompare(b),
    );
    let lx = 8;
    for (const name of legendNames) {
        const dash = isVarianceReduced(name) ? "" : ` stroke-dasharray="5,3"`;
        out.push(
            `<line x1="${lx}" y1="${LEGEND_H / 2}" x2="${lx + 22}" y2="${LEGEND_H / 2}" ` +
            `stroke="${seriesColor(name)}" stroke-width="2"${dash}/>`,
        );
        out.push(
            `<text x="${lx + 26}" y="${LEGEND_H / 2 + 4}" font-size="11">${name}</text>`,
        );
        lx += 34 + 7 * name.length;
    }
    out.push(
        `<text x="${width - 8}" y="${LEGEND_H / 2 + 4}" font-size="11" ` +
        `text-anchor="end">${spec.metric}</text>`,
    );

    panels.forEach((panel, idx) => {
        const px = (idx % cols) * PANEL_W;
        const py = LEGEND_H + Math.floor(idx / cols) * PANEL_H;
        const x0 = px + MARGIN.left;
        const x1 = px + PANEL_W - MARGIN.right;
        const y0 = py + PANEL_H - MARGIN.bottom;
        const y1 = py + MARGIN.top;

        const xs = panel.series.flatMap((s) => s.points.map((p) => p.epoch));
        const raw = panel.series.flatMap((s) => s.points.map((p) => p.value));
        const ys = logY ? raw.map(Math.log10) : raw;
        const xScale = linearScale(xs, x0, x1);
        const yScale = linearScale(ys, y0, y1);

        out.push(`<g>`);
        out.push(
            `<text x="${px + PANEL_W / 2}" y="${py + 18}" font-size="12" ` +
            `text-anchor="middle">ltilde = ${fmt(panel.ltilde)}</text>`,
        );
        out.push(
            `<rect x="${x0}" y="${y1}" width="${x1 - x0}" height="${y0 - y1}" ` +
            `fill="none" stroke="#444444" stroke-width="1"/>`,
        );
        for (let k = 0; k < 4; k++) {
            const xv = xScale.lo + (k / 3) * (xScale.hi - xScale.lo);
            const xpix = xScale.map(xv).toFixed(2);
            out.push(
                `<line x1="${xpix}" y1="${y0}" x2="${xpix}" y2="${y0 + 4}" stroke="#444444"/>`,
            );
            out.push(
                `<text x="${xpix}" y="${y0 + 16}" font-size="9" text-anchor="middle">${fmt(xv)}</text>`,
            );
            const yv = yScale.lo + (k / 3) * (yScale.hi - yScale.lo);
            const ypix = yScale.map(yv).toFixed(2);
            const label = logY ? fmt(10 ** yv) : fmt(yv);
            out.push(
                `<line x1="${x0 - 4}" y1="${ypix}" x2="${x0}" y2="${ypix}" stroke="#444444"/>`,
            );
            out.push(
                `<text x="${x0 - 6}" y="${Number(ypix) + 3}" font-size="9" text-anchor="end">${label}</text>`,
            );
        }
        out.push(
            `<text x="${px + PANEL_W / 2}" y="${py + PANEL_H - 6}" font-size="10" ` +
            `text-anchor="middle">epochs</text>`,
        );
        for (const series of panel.series) {
            const pts = series.points
                .map((p) => {
                    const x = xScale.map(p.epoch).toFixed(2);
                    const y = yScale.map(logY ? Math.log10(p.value) : p.value).toFixed(2);
                    return `${x},${y}`;
                })
                .join(" ");
            const dash = isVarianceReduced(series.algorithm) ? "" : ` stroke-dasharray="5,3"`;
            out.push(
                `<polyline points="${pts}" fill="none" stroke="${seriesColor(series.algorithm)}" ` +
                `stroke-width="1.5"${dash}/>`,
            );
        }
        out.push(`</g>`);
    });

    out.push(`</svg>`);
    return out.join("\n") + "\n";
}
