export { CSV_COLUMNS, parseResultsCsv, metricValue } from "./csv.js";
export type { MetricName, ResultRow } from "./csv.js";
export {
    isVarianceReduced,
    renderFigure,
    selectPanels,
    seriesColor,
} from "./figure.js";
export type { FigureSpec, Panel, Series, SeriesPoint } from "./figure.js";
export { runPlot } from "./cli.js";
