import { SessionClient, ServiceError } from "./api.js";
import { chartBarOrder, renderBarChart, renderRowTable } from "./chart.js";
import {
  aggAttrChoices,
  buildQuery,
  comparatorsFor,
  initialBuilderState,
  isNumeric,
  type BuilderState,
} from "./querybuilder.js";
import type { DatasetInfo, SessionReport, StepPayload } from "./types.js";
import { describeQuery, projectReport, stackDepth, type ViewModel } from "./viewmodel.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function option(value: string, label?: string): HTMLOptionElement {
  const node = el("option", { value }, label ?? value);
  return node;
}

export class ExplorerApp {
  private client: SessionClient;
  private dataset: DatasetInfo | null = null;
  private sessionId: string | null = null;
  private steps: StepPayload[] = [];
  private inFlight = false;
  private builder: BuilderState | null = null;
  private meta = { configHash: "", checkpointId: "", policy: "", mirror: false };

  readonly root: HTMLElement;
  readonly banner: HTMLElement;
  readonly history: HTMLElement;
  readonly provenanceBody: HTMLTableSectionElement;
  readonly summary: HTMLElement;
  readonly controls: {
    policy: HTMLSelectElement;
    mirror: HTMLInputElement;
    start: HTMLButtonElement;
    op: HTMLSelectElement;
    attr: HTMLSelectElement;
    cmp: HTMLSelectElement;
    term: HTMLInputElement;
    agg: HTMLSelectElement;
    aggAttr: HTMLSelectElement;
    submit: HTMLButtonElement;
    back: HTMLButtonElement;
  };

  constructor(root: HTMLElement, client: SessionClient) {
    this.root = root;
    this.client = client;

    this.banner = el("div", { class: "banner hidden", role: "alert" });
    const header = el("header", { class: "header" });
    header.appendChild(el("h1", {}, "edapilot explorer"));
    this.summary = el("div", { class: "session-summary" });
    header.appendChild(this.summary);

    const controlsBox = el("section", { class: "controls" });
    const policy = el("select", { "data-testid": "policy" });
    const mirror = el("input", { type: "checkbox", "data-testid": "mirror" });
    const start = el("button", { "data-testid": "start" }, "new session");
    const sessionRow = el("div", { class: "row" });
    sessionRow.append("policy ", policy, " mirror ", mirror, start);
    controlsBox.appendChild(sessionRow);

    const op = el("select", { "data-testid": "op" });
    ["group", "filter", "back"].forEach((o) => op.appendChild(option(o)));
    const attr = el("select", { "data-testid": "attr" });
    const cmp = el("select", { "data-testid": "cmp" });
    const term = el("input", { type: "text", "data-testid": "term", placeholder: "term" });
    const agg = el("select", { "data-testid": "agg" });
    ["count", "sum", "avg"].forEach((a) => agg.appendChild(option(a)));
    const aggAttr = el("select", { "data-testid": "agg-attr" });
    const submit = el("button", { "data-testid": "submit" }, "run query");
    const back = el("button", { "data-testid": "back" }, "back");
    const builderRow = el("div", { class: "row" });
    builderRow.append(op, attr, cmp, term, agg, aggAttr, submit, back);
    controlsBox.appendChild(builderRow);

    this.history = el("section", { class: "history", "data-testid": "history" });
    const provenance = el("section", { class: "provenance" });
    provenance.appendChild(el("h2", {}, "provenance"));
    const table = el("table", { "data-testid": "provenance" });
    const head = table.createTHead().insertRow();
    for (const title of ["step", "query", "sample", "SR", "scanned", "full",
                         "cost", "saved", "intent", "diverged"]) {
      head.appendChild(el("th", {}, title));
    }
    this.provenanceBody = table.createTBody();
    provenance.appendChild(table);

    this.controls = { policy, mirror, start, op, attr, cmp, term, agg, aggAttr, submit, back };
    root.append(header, this.banner, controlsBox, this.history, provenance);

    start.addEventListener("click", () => void this.startSession());
    op.addEventListener("change", () => this.syncBuilderVisibility());
    attr.addEventListener("change", () => this.syncComparators());
    submit.addEventListener("click", () => void this.submitFromBuilder());
    back.addEventListener("click", () => void this.submit({ op: "back" }));
    this.refreshControls();
  }

  // --- session lifecycle ---------------------------------------------------

  async init(): Promise<void> {
    try {
      const datasets = await this.client.datasets();
      this.dataset = datasets[0] ?? null;
      if (!this.dataset) {
        this.showBanner("service has no datasets loaded");
        return;
      }
      this.controls.policy.replaceChildren(
        ...this.dataset.policies.map((p) => option(p)),
      );
      this.builder = initialBuilderState(this.dataset.columns);
      this.populateBuilder();
      const fragment = new URLSearchParams(window.location.hash.slice(1));
      const existing = fragment.get("sid");
      if (existing) await this.resumeSession(existing);
    } catch (error) {
      this.showBanner(`cannot reach service: ${error}`);
    }
  }

  async startSession(): Promise<void> {
    if (!this.dataset) return;
    const policy = this.controls.policy.value || this.dataset.policies[0] || "full";
    const mirror = this.controls.mirror.checked;
    try {
      const created = await this.client.createSession(this.dataset.name, policy, mirror);
      this.sessionId = created.session_id;
      this.steps = [];
      this.meta = {
        configHash: created.config_hash,
        checkpointId: created.checkpoint_id,
        policy,
        mirror,
      };
      window.location.hash = `sid=${created.session_id}`;
      this.hideBanner();
      this.renderAll();
    } catch (error) {
      this.showBanner(`could not create session: ${error}`);
    }
  }

  async resumeSession(sessionId: string): Promise<void> {
    try {
      const report = await this.client.report(sessionId);
      this.sessionId = sessionId;
      this.applyReport(report);
    } catch {
      window.location.hash = "";
    }
  }

  /** Replace local state with the server report (exact projection). */
  applyReport(report: SessionReport): ViewModel {
    const vm = projectReport(report);
    this.steps = report.steps;
    this.meta = {
      configHash: vm.configHash,
      checkpointId: vm.checkpointId,
      policy: vm.policy,
      mirror: vm.mirror,
    };
    this.renderAll(vm);
    return vm;
  }

  // --- querying --------------------------------------------------------------

  async submitFromBuilder(): Promise<void> {
    if (!this.builder || !this.dataset) return;
    this.builder.op = this.controls.op.value as BuilderState["op"];
    this.builder.attr = this.controls.attr.value;
    this.builder.cmp = this.controls.cmp.value;
    this.builder.term = this.controls.term.value;
    this.builder.groupAttr = this.controls.attr.value;
    this.builder.agg = this.controls.agg.value;
    this.builder.aggAttr = this.controls.aggAttr.value;
    try {
      const query = buildQuery(this.builder, this.dataset.columns);
      await this.submit(query);
    } catch (error) {
      this.showBanner(String(error));
    }
  }

  async submit(query: Parameters<SessionClient["submitQuery"]>[1]): Promise<void> {
    if (!this.sessionId) {
      this.showBanner("start a session first");
      return;
    }
    if (this.inFlight) return; // one in-flight query per session
    this.inFlight = true;
    this.refreshControls();
    try {
      const step = await this.client.submitQuery(this.sessionId, query);
      this.steps.push(step);
      this.hideBanner();
      this.renderAll();
    } catch (error) {
      if (error instanceof ServiceError) {
        this.showBanner(`query rejected (${error.status}): ${error.detail}`);
      } else {
        this.showBanner(`network error, query not retried: ${error}`);
      }
    } finally {
      this.inFlight = false;
      this.refreshControls();
    }
  }

  // --- rendering --------------------------------------------------------------

  get depth(): number {
    return stackDepth(this.steps);
  }

  private syncBuilderVisibility(): void {
    const op = this.controls.op.value;
    const isFilter = op === "filter";
    const isGroup = op === "group";
    this.controls.cmp.classList.toggle("hidden", !isFilter);
    this.controls.term.classList.toggle("hidden", !isFilter);
    this.controls.agg.classList.toggle("hidden", !isGroup);
    this.controls.aggAttr.classList.toggle(
      "hidden", !isGroup || this.controls.agg.value === "count");
    this.controls.attr.classList.toggle("hidden", op === "back");
  }

  private syncComparators(): void {
    if (!this.dataset) return;
    const column = this.dataset.columns.find((c) => c.name === this.controls.attr.value);
    if (!column) return;
    this.controls.cmp.replaceChildren(...comparatorsFor(column).map((c) => option(c)));
  }

  private populateBuilder(): void {
    if (!this.dataset) return;
    this.controls.attr.replaceChildren(
      ...this.dataset.columns.map((c) => option(c.name)),
    );
    this.controls.aggAttr.replaceChildren(
      ...aggAttrChoices(this.dataset.columns).map((name) => option(name)),
    );
    this.syncComparators();
    this.syncBuilderVisibility();
  }

  private refreshControls(): void {
    const live = this.sessionId !== null && !this.inFlight;
    this.controls.submit.disabled = !live;
    this.controls.back.disabled = !live || this.depth < 2;
  }

  private renderAll(vm?: ViewModel): void {
    this.renderSummary();
    this.renderHistory();
    this.renderProvenance(vm);
    this.refreshControls();
  }

  private renderSummary(): void {
    this.summary.replaceChildren(
      el("span", { "data-testid": "session-id" }, this.sessionId ?? "no session"),
      el("span", {}, ` policy=${this.meta.policy}`),
      el("span", {}, ` mirror=${String(this.meta.mirror)}`),
      el("span", { class: "hash" }, ` cfg=${this.meta.configHash}`),
      el("span", { class: "hash" }, ` ckpt=${this.meta.checkpointId}`),
    );
  }

  private renderHistory(): void {
    this.history.replaceChildren();
    for (const step of this.steps) {
      const card = el("article", { class: "step-card", "data-step": String(step.step) });
      card.appendChild(el("h3", {}, `${step.step}: ${describeQuery(step.query)}`));
      if (step.display.kind === "grouped_bars") {
        card.appendChild(renderBarChart(step.display, step.diverged));
      } else {
        const columns = this.dataset?.columns.map((c) => c.name) ?? [];
        card.appendChild(renderRowTable(step.display, columns));
        card.appendChild(
          el("p", { class: "matched" }, `matched rows: ${String(step.display.matched_rows)}`),
        );
      }
      if (step.mirror && step.diverged) {
        const diff = el("div", { class: "mirror-diff" });
        diff.appendChild(el("h4", {}, "full data shows"));
        diff.appendChild(
          step.mirror.kind === "grouped_bars"
            ? renderBarChart(step.mirror, null)
            : renderRowTable(step.mirror, this.dataset?.columns.map((c) => c.name) ?? []),
        );
        card.appendChild(diff);
      }
      this.history.appendChild(card);
    }
  }

  private renderProvenance(vm?: ViewModel): void {
    const rows = (vm ?? this.localViewModel()).provenance;
    this.provenanceBody.replaceChildren();
    for (const row of rows) {
      const tr = this.provenanceBody.insertRow();
      tr.setAttribute("data-step", String(row.step));
      tr.insertCell().textContent = String(row.step);
      tr.insertCell().textContent = row.query;
      tr.insertCell().textContent = row.sample_id;
      tr.insertCell().textContent = String(row.effective_sr);
      tr.insertCell().textContent = String(row.rows_scanned);
      tr.insertCell().textContent = String(row.rows_scanned_full);
      tr.insertCell().textContent = String(row.cost_ratio);
      tr.insertCell().textContent = String(row.latency_saved_cum);
      const intent = tr.insertCell();
      intent.className = "intent-bars";
      for (const p of row.intent_probs) {
        const bar = el("span", { class: "intent-bar", "data-p": String(p) });
        bar.style.width = `${Math.round(p * 48)}px`;
        intent.appendChild(bar);
      }
      tr.insertCell().textContent =
        row.diverged === null ? "-" : row.diverged ? "yes" : "no";
    }
  }

  /** Local steps projected through the same code path as a server report. */
  localViewModel(): ViewModel {
    return projectReport({
      session_id: this.sessionId ?? "",
      dataset: this.dataset?.name ?? "",
      policy: this.meta.policy,
      mirror: this.meta.mirror,
      steps: this.steps,
      latency_reduction: 0,
      intent_trace: this.steps.map((s) => s.intent_probs),
      config_hash: this.meta.configHash,
      checkpoint_id: this.meta.checkpointId,
    });
  }

  private showBanner(message: string): void {
    this.banner.textContent = message;
    this.banner.classList.remove("hidden");
  }

  private hideBanner(): void {
    this.banner.classList.add("hidden");
  }
}

export function mountApp(root: HTMLElement, baseUrl: string): ExplorerApp {
  const app = new ExplorerApp(root, new SessionClient(baseUrl));
  void app.init();
  return app;
}
