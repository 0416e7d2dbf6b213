/**
 * Four-panel figure set from a trajectory CSV.
 *
 * Panels: chord flows, hot-layer volumes, consumer pump inputs, producer
 * pump inputs, each against time in hours with the schedule events drawn as
 * vertical markers. Rendering is read-only over the CSV; nothing is
 * recomputed.
 *
 * Usage:
 *   node dist/render.js <trajectory.csv> <output-dir> \
 *     [--events 6,12,18] [--panels q_ch,V_sh,u_ch,u_pr]
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { parseTrajectoryCsv, seriesGroup, Trajectory } from "./csv.js";
import { renderPanel } from "./svg.js";

export interface PanelDef {
  key: string;
  prefix: string;
  title: string;
  yLabel: string;
}

export const PANELS: PanelDef[] = [
  { key: "q_ch", prefix: "q_ch_", title: "Chord flows", yLabel: "flow (m^3/s)" },
  { key: "V_sh", prefix: "V_sh_", title: "Hot-layer volumes", yLabel: "volume (m^3)" },
  { key: "u_ch", prefix: "u_ch_", title: "Consumer pump inputs", yLabel: "pressure (Pa)" },
  { key: "u_pr", prefix: "u_pr_", title: "Producer pump inputs", yLabel: "pressure (Pa)" },
];

export interface FigureSpec {
  csvPath: string;
  outDir: string;
  /** Event marker times, hours. */
  events?: number[];
  /** Panel keys to render; defaults to all four. */
  panels?: string[];
}

export const DEFAULT_EVENT_HOURS = [6, 12, 18];

export function panelSvg(traj: Trajectory, def: PanelDef, events: number[]): string {
  const hours = traj.t.map((s) => s / 3600.0);
  return renderPanel({
    title: def.title,
    xLabel: "time (h)",
    yLabel: def.yLabel,
    x: hours,
    series: seriesGroup(traj, def.prefix),
    markers: events,
  });
}

export function renderFigures(spec: FigureSpec): string[] {
  const text = readFileSync(spec.csvPath, "utf-8");
  const traj = parseTrajectoryCsv(text);
  const events = spec.events ?? DEFAULT_EVENT_HOURS;
  const keys = spec.panels ?? PANELS.map((p) => p.key);

  const defs = keys.map((k) => {
    const def = PANELS.find((p) => p.key === k);
    if (!def) {
      throw new Error(`unknown panel: ${k} (choose from ${PANELS.map((p) => p.key).join(", ")})`);
    }
    return def;
  });

  mkdirSync(spec.outDir, { recursive: true });
  const written: string[] = [];
  for (const def of defs) {
    const path = join(spec.outDir, `${def.key}.svg`);
    writeFileSync(path, panelSvg(traj, def, events));
    written.push(path);
  }
  return written;
}

function parseArgs(argv: string[]): FigureSpec {
  const positional: string[] = [];
  let events: number[] | undefined;
  let panels: string[] | undefined;
  for (let i = 0; i < argv.length; i++) {
    const a = argv[i];
    if (a === "--events") {
      events = argv[++i].split(",").map(Number);
      if (events.some((e) => !Number.isFinite(e))) {
        throw new Error("--events expects a comma-separated list of hours");
      }
    } else if (a === "--panels") {
      panels = argv[++i].split(",");
    } else {
      positional.push(a);
    }
  }
  if (positional.length !== 2) {
    throw new Error("usage: render <trajectory.csv> <output-dir> [--events h,h,...] [--panels ...]");
  }
  return { csvPath: positional[0], outDir: positional[1], events, panels };
}

const invokedDirectly =
  process.argv[1] !== undefined && import.meta.url.endsWith(process.argv[1].split("/").pop()!);

if (invokedDirectly) {
  try {
    const written = renderFigures(parseArgs(process.argv.slice(2)));
    for (const p of written) console.log(`wrote ${p}`);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  }
}
