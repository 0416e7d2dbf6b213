import { readFileSync } from "node:fs";
import { join, dirname } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import { parseTrajectoryCsv, seriesGroup } from "../src/csv.js";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

const reference = readFileSync(join(FIXTURES, "reference_sample.csv"), "utf-8");

describe("parseTrajectoryCsv", () => {
  it("parses the reference sample with the full schema", () => {
    const traj = parseTrajectoryCsv(reference);
    expect(traj.nCh).toBe(17);
    expect(traj.nPr).toBe(3);
    expect(traj.nSt).toBe(3);
    expect(traj.t.length).toBeGreaterThan(10);
    expect(traj.t[0]).toBe(0);
    // 24 h horizon in seconds
    expect(traj.t[traj.t.length - 1]).toBe(86400);
    expect(traj.columns.get("sat_active")!.every((v) => v === 0 || v === 1)).toBe(true);
  });

  it("round-trips numeric values exactly", () => {
    const traj = parseTrajectoryCsv(reference);
    const firstLine = reference.split("\n")[1].split(",");
    expect(traj.columns.get("t_s")![0]).toBe(Number(firstLine[0]));
    expect(traj.columns.get("q_ch_1")![0]).toBe(Number(firstLine[1]));
  });

  it("fails naming a missing scalar column", () => {
    const broken = reference
      .split("\n")
      .map((line, i) => (i === 0 ? line.replace("H_tilde", "H_tildo") : line))
      .join("\n");
    expect(() => parseTrajectoryCsv(broken)).toThrowError(/missing column: H_tilde/);
  });

  it("fails naming a missing series group", () => {
    const lines = reference.split("\n");
    const header = lines[0].split(",");
    const drop = header.findIndex((h) => h === "V_sh_1");
    const without = lines
      .filter((l) => l.trim().length > 0)
      .map((line) => {
        const parts = line.split(",");
        parts.splice(drop, 1);
        return parts.join(",");
      })
      .join("\n");
    expect(() => parseTrajectoryCsv(without)).toThrowError(/missing column: V_sh_1/);
  });

  it("rejects ragged rows", () => {
    const lines = reference.split("\n").filter((l) => l.trim().length > 0);
    lines[3] = lines[3] + ",1.0";
    expect(() => parseTrajectoryCsv(lines.join("\n"))).toThrowError(/row 3/);
  });
});

describe("seriesGroup", () => {
  it("collects an indexed group in order", () => {
    const traj = parseTrajectoryCsv(reference);
    const group = seriesGroup(traj, "u_pr_");
    expect(group.map((s) => s.label)).toEqual(["u_pr_1", "u_pr_2", "u_pr_3"]);
    expect(group[0].values.length).toBe(traj.t.length);
  });

  it("fails on unknown prefixes", () => {
    const traj = parseTrajectoryCsv(reference);
    expect(() => seriesGroup(traj, "pressure_")).toThrowError(/missing column: pressure_1/);
  });
});
