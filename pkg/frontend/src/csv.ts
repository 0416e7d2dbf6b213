/**
 * Trajectory CSV reader.
 *
 * The simulator writes a fixed schema: t_s, q_ch_1..n, q_pr_1..n, V_sh_1..n,
 * V_sc_1..n, x_b_1..n, u_ch_1..n, u_pr_1..n, S_ch, H_tilde, sat_active.
 * Parsing validates that schema and fails naming the first missing column.
 */

export interface Trajectory {
  /** Column name -> values, in file order. */
  columns: Map<string, number[]>;
  /** Simulation time in seconds. */
  t: number[];
  nCh: number;
  nPr: number;
  nSt: number;
}

export interface Series {
  label: string;
  values: number[];
}

const SCALARS = ["t_s", "S_ch", "H_tilde", "sat_active"];
const GROUPS: Array<[string, "nCh" | "nPr" | "nSt"]> = [
  ["q_ch_", "nCh"],
  ["q_pr_", "nPr"],
  ["V_sh_", "nSt"],
  ["V_sc_", "nSt"],
  ["x_b_", "nPr"],
  ["u_ch_", "nCh"],
  ["u_pr_", "nPr"],
];

function groupWidth(header: string[], prefix: string): number {
  let n = 0;
  while (header.includes(`${prefix}${n + 1}`)) n += 1;
  return n;
}

export function parseTrajectoryCsv(text: string): Trajectory {
  const lines = text.split("\n").filter((l) => l.trim().length > 0);
  if (lines.length < 2) {
    throw new Error("trajectory CSV needs a header and at least one sample row");
  }
  const header = lines[0].split(",").map((h) => h.trim());

  for (const name of SCALARS) {
    if (!header.includes(name)) {
      throw new Error(`missing column: ${name}`);
    }
  }
  const widths = { nCh: 0, nPr: 0, nSt: 0 };
  for (const [prefix, dim] of GROUPS) {
    const n = groupWidth(header, prefix);
    if (n === 0) {
      throw new Error(`missing column: ${prefix}1`);
    }
    if (widths[dim] === 0) {
      widths[dim] = n;
    } else if (widths[dim] !== n) {
      throw new Error(
        `column group ${prefix}* has ${n} entries, expected ${widths[dim]} ` +
          `to match its companion group`
      );
    }
  }

  const columns = new Map<string, number[]>(header.map((h) => [h, []]));
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== header.length) {
      throw new Error(`row ${i} has ${parts.length} fields, header has ${header.length}`);
    }
    for (let j = 0; j < parts.length; j++) {
      const v = Number(parts[j]);
      if (!Number.isFinite(v)) {
        throw new Error(`row ${i}, column ${header[j]}: not a number: ${parts[j]}`);
      }
      columns.get(header[j])!.push(v);
    }
  }

  return {
    columns,
    t: columns.get("t_s")!,
    nCh: widths.nCh,
    nPr: widths.nPr,
    nSt: widths.nSt,
  };
}

/** All series of one indexed column group, e.g. prefix "q_ch_". */
export function seriesGroup(traj: Trajectory, prefix: string): Series[] {
  const out: Series[] = [];
  for (let i = 1; traj.columns.has(`${prefix}${i}`); i++) {
    out.push({ label: `${prefix}${i}`, values: traj.columns.get(`${prefix}${i}`)! });
  }
  if (out.length === 0) {
    throw new Error(`missing column: ${prefix}1`);
  }
  return out;
}
