#!/usr/bin/env node
// Render comparison figures from a benchmark sweep CSV.

import { readFileSync, writeFileSync } from "node:fs";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { MetricName, parseResultsCsv } from "./csv.js";
import { FigureSpec, renderFigure } from "./figure.js";

export function runPlot(argv: string[]): void {
    const args = yargs(argv)
        .option("csv", { type: "string", demandOption: true, describe: "sweep CSV path" })
        .option("metric", {
            type: "string",
            choices: ["train_objective", "balanced_accuracy"] as const,
            default: "train_objective" as const,
        })
        .option("out", { type: "string", demandOption: true, describe: "output SVG path" })
        .option("logy", {
            type: "boolean",
            describe: "log-scale the y axis (default: on for the objective)",
        })
        .option("algos", { type: "string", describe: "comma list of algorithms to keep" })
        .option("ltilde", { type: "string", describe: "comma list of panel keys to keep" })
        .option("seed", { type: "number", describe: "seed to plot (default: smallest)" })
        .strict()
        .parseSync();

    const spec: FigureSpec = {
        metric: args.metric as MetricName,
        logY: args.logy,
        algorithms: args.algos?.split(",").map((s) => s.trim()).filter((s) => s !== ""),
        ltilde: args.ltilde
            ?.split(",")
            .map((s) => Number(s.trim()))
            .filter((v) => Number.isFinite(v)),
        seed: args.seed,
    };
    const rows = parseResultsCsv(readFileSync(args.csv, "utf-8"));
    const svg = renderFigure(rows, spec);
    writeFileSync(args.out, svg, "utf-8");
    const panels = new Set(rows.filter((r) => !r.diverged).map((r) => r.ltilde)).size;
    console.log(`wrote ${args.out} (${panels} panel key(s) in input)`);
}

const invokedDirectly =
    process.argv[1] !== undefined &&
    import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
    try {
        runPlot(hideBin(process.argv));
    } catch (err) {
        console.error(String(err instanceof Error ? err.message : err));
        process.exit(1);
    }
}
