import { describe, expect, it } from "vitest";
import {
  aggAttrChoices,
  buildQuery,
  comparatorsFor,
  initialBuilderState,
} from "../src/querybuilder.js";
import type { ColumnInfo } from "../src/types.js";

const columns: ColumnInfo[] = [
  { name: "month", type: "categorical" },
  { name: "delay", type: "real" },
  { name: "day_of_week", type: "integer" },
];

describe("query builder constraints", () => {
  it("offers ordering comparators only on numeric columns", () => {
    expect(comparatorsFor(columns[0]!)).not.toContain("gt");
    expect(comparatorsFor(columns[1]!)).toContain("gt");
    expect(comparatorsFor(columns[2]!)).toContain("lt");
  });

  it("offers only numeric columns as aggregation attributes", () => {
    expect(aggAttrChoices(columns)).toEqual(["delay", "day_of_week"]);
  });

  it("builds filter payloads with numeric term coercion", () => {
    const state = { ...initialBuilderState(columns), op: "filter" as const,
                    attr: "delay", cmp: "gt", term: "12.5" };
    expect(buildQuery(state, columns)).toEqual(
      { op: "filter", attr: "delay", cmp: "gt", term: 12.5 });
  });

  it("keeps categorical terms as strings", () => {
    const state = { ...initialBuilderState(columns), op: "filter" as const,
                    attr: "month", cmp: "eq", term: "JUN" };
    expect(buildQuery(state, columns)).toEqual(
      { op: "filter", attr: "month", cmp: "eq", term: "JUN" });
  });

  it("rejects invalid combinations", () => {
    const gtOnCat = { ...initialBuilderState(columns), op: "filter" as const,
                      attr: "month", cmp: "gt", term: "x" };
    expect(() => buildQuery(gtOnCat, columns)).toThrow();
    const notANumber = { ...initialBuilderState(columns), op: "filter" as const,
                         attr: "delay", cmp: "gt", term: "many" };
    expect(() => buildQuery(notANumber, columns)).toThrow();
  });

  it("omits agg_attr for count and includes it otherwise", () => {
    const count = { ...initialBuilderState(columns), op: "group" as const,
                    groupAttr: "month", agg: "count" };
    expect(buildQuery(count, columns)).toEqual({ op: "group", attr: "month", agg: "count" });
    const avg = { ...initialBuilderState(columns), op: "group" as const,
                  groupAttr: "month", agg: "avg", aggAttr: "delay" };
    expect(buildQuery(avg, columns)).toEqual(
      { op: "group", attr: "month", agg: "avg", agg_attr: "delay" });
  });

  it("builds back payloads", () => {
    const state = { ...initialBuilderState(columns), op: "back" as const };
    expect(buildQuery(state, columns)).toEqual({ op: "back" });
  });
});
