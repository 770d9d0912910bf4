import { describe, expect, it } from "vitest";
import { ServiceError, SessionClient } from "../src/api.js";
import { recordedServiceFetch } from "./helpers.js";

describe("SessionClient", () => {
  it("round-trips the recorded conversation", async () => {
    const { fetchFn, state } = recordedServiceFetch();
    const client = new SessionClient("http://svc", fetchFn);
    const datasets = await client.datasets();
    expect(datasets.length).toBe(1);
    const created = await client.createSession("synthetic_trips", "fixed:Uni@10%", true);
    expect(created.session_id).toBe("fixture-session");
    const step = await client.submitQuery(created.session_id, {
      op: "filter", attr: "delay", cmp: "gt", term: 12.0});
    expect(step.step).toBe(0);
    expect(state.requests[0]).toBe("GET http://svc/datasets");
    expect(state.requests.filter((r) => r.includes("/query")).length).toBe(1);
  });

  it("raises ServiceError with the service detail", async () => {
    const fetchFn = (async () =>
      new Response(JSON.stringify({ detail: "BACK at root frame" }), { status: 409 })
    ) as typeof fetch;
    const client = new SessionClient("http://svc", fetchFn);
    await expect(client.submitQuery("x", { op: "back" })).rejects.toThrowError(ServiceError);
    await expect(client.submitQuery("x", { op: "back" })).rejects.toThrow("BACK at root");
  });

  it("sends each submit exactly once", async () => {
    let calls = 0;
    const fetchFn = (async () => {
      calls += 1;
      return new Response("oops", { status: 500 });
    }) as typeof fetch;
    const client = new SessionClient("http://svc", fetchFn);
    await expect(client.submitQuery("x", { op: "back" })).rejects.toThrow();
    expect(calls).toBe(1);
  });
});
