import type { ColumnInfo, QueryPayload } from "./types.js";

// Builds FILTER / GROUP / BACK payloads constrained to the dataset schema:
// ordering comparators only on numeric columns, aggregation attributes only
// numeric, terms parsed to numbers for numeric columns.

export const NUMERIC_CMPS = ["eq", "neq", "gt", "lt", "contains"] as const;
export const CATEGORICAL_CMPS = ["eq", "neq", "contains"] as const;
export const AGGS = ["count", "sum", "avg"] as const;

export function isNumeric(column: ColumnInfo): boolean {
  return column.type === "integer" || column.type === "real";
}

export function comparatorsFor(column: ColumnInfo): readonly string[] {
  return isNumeric(column) ? NUMERIC_CMPS : CATEGORICAL_CMPS;
}

export function aggAttrChoices(columns: ColumnInfo[]): string[] {
  return columns.filter(isNumeric).map((c) => c.name);
}

export interface BuilderState {
  op: "filter" | "group" | "back";
  attr: string;
  cmp: string;
  term: string;
  groupAttr: string;
  agg: string;
  aggAttr: string;
}

export function initialBuilderState(columns: ColumnInfo[]): BuilderState {
  const first = columns[0]?.name ?? "";
  const numeric = aggAttrChoices(columns)[0] ?? "";
  return {
    op: "group",
    attr: first,
    cmp: "eq",
    term: "",
    groupAttr: first,
    agg: "count",
    aggAttr: numeric,
  };
}

export function buildQuery(state: BuilderState, columns: ColumnInfo[]): QueryPayload {
  if (state.op === "back") return { op: "back" };
  if (state.op === "group") {
    const payload: QueryPayload = { op: "group", attr: state.groupAttr, agg: state.agg as QueryPayload["agg"] };
    if (state.agg !== "count") payload.agg_attr = state.aggAttr;
    return payload;
  }
  const column = columns.find((c) => c.name === state.attr);
  if (!column) throw new Error(`unknown column ${state.attr}`);
  if (!comparatorsFor(column).includes(state.cmp)) {
    throw new Error(`${state.cmp} not valid for ${column.type} column ${column.name}`);
  }
  let term: string | number = state.term;
  if (isNumeric(column) && state.cmp !== "contains") {
    term = Number(state.term);
    if (Number.isNaN(term)) throw new Error(`term "${state.term}" is not a number`);
  }
  return { op: "filter", attr: state.attr, cmp: state.cmp as QueryPayload["cmp"], term };
}
