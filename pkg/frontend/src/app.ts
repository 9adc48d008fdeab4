/**
 * Annotation workbench entry point: renders the candidate queue, submits
 * verdicts with optimistic locking, and shows the per-iteration metrics.
 * All decisions are server-validated; a rejected POST unlocks the card and
 * surfaces the server's message inline.
 */

import { AnnotationApi, ApiError, type CandidatePayload } from "./api.js";
import { metricsToSeries, renderChart } from "./chart.js";
import { SessionQueue, buildDecision, type VerdictChoice } from "./state.js";

const api = new AnnotationApi("");
const queue = new SessionQueue();

const el = (id: string) => document.getElementById(id)!;

function describeRule(rule: CandidatePayload["rule"]): string {
  switch (rule.kind) {
    case "exact_match":
      return `${rule.attribute} (anchor) = ${rule.attribute} (rec)`;
    case "range":
      return `${rule.anchor_attribute} (anchor) ? ${rule.rec_attribute} (rec)`;
    case "contain":
      return `${rule.attribute} present on ${rule.side ?? "?"} side`;
    default:
      return `descriptions agree that ${rule.attribute} are [${rule.token}]`;
  }
}

function attributeTable(attrs: Record<string, unknown>): string {
  const rows = Object.entries(attrs)
    .map(([k, v]) => `<tr><th>${k}</th><td>${v === null ? "—" : String(v)}</td></tr>`)
    .join("");
  return `<table class="attrs">${rows}</table>`;
}

function exampleBlock(candidate: CandidatePayload): string {
  return candidate.examples
    .map(
      (ex) => `
      <details class="example">
        <summary>${ex.pair_id} (weak label ${ex.label > 0 ? "+1" : "−1"})</summary>
        <div class="pair">
          <div><h4>${ex.anchor.name}</h4>${attributeTable(ex.anchor.attributes)}
               <p class="desc">${ex.anchor.description}</p></div>
          <div><h4>${ex.rec.name}</h4>${attributeTable(ex.rec.attributes)}
               <p class="desc">${ex.rec.description}</p></div>
        </div>
      </details>`,
    )
    .join("");
}

function controls(candidate: CandidatePayload): string {
  const kind = candidate.rule.kind;
  if (kind === "range") {
    return `
      <button data-verdict="range" data-direction="ge" accesskey="g">accept ≥</button>
      <button data-verdict="range" data-direction="le" accesskey="l">accept ≤</button>
      <button data-verdict="abstain" accesskey="a">abstain</button>`;
  }
  if (kind === "contain") {
    return `
      <button data-verdict="contain" data-side="anchor">present on anchor</button>
      <button data-verdict="contain" data-side="rec">present on rec</button>
      <button data-verdict="abstain" accesskey="a">abstain</button>`;
  }
  return `
    <button data-verdict="${kind}" accesskey="y">accept</button>
    <button data-verdict="abstain" accesskey="a">abstain</button>`;
}

function renderQueue(): void {
  const root = el("queue");
  if (queue.cards.length === 0) {
    root.innerHTML = `<div class="empty">No open session. Waiting for the run…</div>`;
    el("finalize").setAttribute("disabled", "true");
    return;
  }
  root.innerHTML = queue.cards
    .map((card) => {
      const rule = card.candidate.rule;
      const decided = card.status === "decided";
      const verdict = decided
        ? `<span class="verdict">${card.verdict}${card.params?.direction ? " " + card.params.direction : ""}</span>`
        : "";
      const muBar = `<span class="mu" style="width:${Math.min(100, rule.mu * 400).toFixed(0)}px"
                      title="importance ${rule.mu.toFixed(4)}"></span>`;
      return `
      <article class="card ${card.status}" data-rule="${rule.id}">
        <header>
          <code>${rule.id}</code> <strong>${rule.kind}</strong> ${muBar} ${verdict}
        </header>
        <p class="describe">${describeRule(rule)}</p>
        ${rule.prompt_text ? `<blockquote class="prompt">${rule.prompt_text}</blockquote>` : ""}
        ${exampleBlock(card.candidate)}
        <footer>${decided ? "" : controls(card.candidate)}
          ${card.error ? `<span class="error">${card.error}</span>` : ""}
        </footer>
      </article>`;
    })
    .join("");
  const finalize = el("finalize");
  if (queue.canFinalize) finalize.removeAttribute("disabled");
  else finalize.setAttribute("disabled", "true");
}

async function submit(ruleId: string, choice: VerdictChoice): Promise<void> {
  const card = queue.card(ruleId);
  let body;
  try {
    body = buildDecision(card, choice);
  } catch (err) {
    queue.reject(ruleId, (err as Error).message);
    renderQueue();
    return;
  }
  queue.markSubmitting(ruleId);
  renderQueue();
  try {
    await api.submitDecision(body);
    queue.confirm(ruleId, body.verdict, body.params);
  } catch (err) {
    queue.reject(ruleId, err instanceof ApiError ? err.detail : String(err));
  }
  renderQueue();
}

async function refreshMetrics(): Promise<void> {
  try {
    const doc = await api.metrics();
    el("chart").innerHTML = renderChart(metricsToSeries(doc));
    const final = doc.final ?? {};
    el("metrics-summary").textContent =
      `iterations ${String(final.completed_iterations ?? 0)} · ` +
      `rules ${String(final.accepted_rules ?? 0)} · ` +
      `minted ${String(final.total_minted ?? 0)} · ` +
      `test accuracy ${final.test_accuracy != null ? Number(final.test_accuracy).toFixed(4) : "—"}`;
  } catch {
    el("metrics-summary").textContent = "metrics unavailable";
  }
}

async function poll(): Promise<void> {
  try {
    const status = await api.status();
    el("status").textContent =
      `iteration ${status.iteration} · stage ${status.stage}` +
      (status.done ? " · run complete" : "");
    el("banner").classList.add("hidden");
    if (status.stage === "annotation") {
      const session = await api.session();
      const stale = queue.iteration !== session.iteration ||
        queue.cards.length !== session.candidates.length;
      if (stale || session.state === "finalized") queue.load(session);
      else {
        // keep local optimistic state; fold in any server-confirmed decisions
        for (const [rid, d] of Object.entries(session.decisions)) {
          const card = queue.cards.find((c) => c.candidate.rule.id === rid);
          if (card && card.status !== "decided") queue.confirm(rid, d.verdict, d.params);
        }
      }
      renderQueue();
    } else if (queue.cards.length && queue.finalized === false && status.stage !== "annotation") {
      queue.cards = [];
      renderQueue();
    }
    await refreshMetrics();
  } catch {
    el("banner").classList.remove("hidden");
  }
}

function wire(): void {
  el("queue").addEventListener("click", (event) => {
    const button = (event.target as HTMLElement).closest("button[data-verdict]");
    if (!button) return;
    const article = button.closest("article[data-rule]") as HTMLElement;
    void submit(article.dataset.rule!, {
      verdict: (button as HTMLElement).dataset.verdict!,
      direction: (button as HTMLElement).dataset.direction as "le" | "ge" | undefined,
      side: (button as HTMLElement).dataset.side as "anchor" | "rec" | undefined,
    });
  });
  el("finalize").addEventListener("click", async () => {
    try {
      await api.finalize();
      queue.finalized = true;
      queue.cards = [];
      renderQueue();
    } catch (err) {
      el("status").textContent = err instanceof ApiError ? err.detail : String(err);
    }
  });
  void poll();
  setInterval(() => void poll(), 1500);
}

if (typeof document !== "undefined" && document.getElementById("queue")) {
  wire();
}
