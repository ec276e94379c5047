// Reader for the benchmark sweep CSV schema.

export interface ResultRow {
    algorithm: string;
    ltilde: number;
    seed: number;
    gradients: number;
    epoch: number;
    trainObjective: number;
    balancedAccuracy: number | null;
    diverged: boolean;
}

export const CSV_COLUMNS = [
    "algorithm",
    "ltilde",
    "seed",
    "gradients",
    "epoch",
    "train_objective",
    "balanced_accuracy",
    "diverged",
] as const;

export type MetricName = "train_objective" | "balanced_accuracy";

function parseNumber(raw: string, column: string, line: number): number {
    const value = Number(raw);
    if (raw.trim() === "" || !Number.isFinite(value)) {
        throw new Error(`line ${line}: column '${column}' is not numeric: '${raw}'`);
    }
    return value;
}

export function parseResultsCsv(text: string): ResultRow[] {
    const lines = text.split(/\r?\n/);
    while (lines.length > 0 && lines[lines.length - 1] === "") {
        lines.pop();
    }
    if (lines.length === 0) {
        throw new Error("empty CSV file");
    }
    const header = lines[0].split(",");
    for (let i = 0; i < CSV_COLUMNS.length; i++) {
        if (header[i] !== CSV_COLUMNS[i]) {
            throw new Error(
                `CSV schema mismatch: expected column '${CSV_COLUMNS[i]}' at position ${i}, ` +
                `found '${header[i] ?? "<missing>"}'`,
            );
        }
    }
    if (header.length !== CSV_COLUMNS.length) {
        throw new Error(`CSV schema mismatch: unexpected extra column '${header[CSV_COLUMNS.length]}'`);
    }
    const rows: ResultRow[] = [];
    for (let k = 1; k < lines.length; k++) {
        const parts = lines[k].split(",");
        if (parts.length !== CSV_COLUMNS.length) {
            throw new Error(`line ${k + 1}: expected ${CSV_COLUMNS.length} columns, found ${parts.length}`);
        }
        if (parts[7] !== "true" && parts[7] !== "false") {
            throw new Error(`line ${k + 1}: column 'diverged' must be true or false, found '${parts[7]}'`);
        }
        rows.push({
            algorithm: parts[0],
            ltilde: parseNumber(parts[1], "ltilde", k + 1),
            seed: parseNumber(parts[2], "seed", k + 1),
            gradients: parseNumber(parts[3], "gradients", k + 1),
            epoch: parseNumber(parts[4], "epoch", k + 1),
            trainObjective: parseNumber(parts[5], "train_objective", k + 1),
            balancedAccuracy: parts[6] === "" ? null : parseNumber(parts[6], "balanced_accuracy", k + 1),
            diverged: parts[7] === "true",
        });
    }
    return rows;
}

export function metricValue(row: ResultRow, metric: MetricName): number | null {
    return metric === "train_objective" ? row.trainObjective : row.balancedAccuracy;
}
