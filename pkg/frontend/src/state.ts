/**
 * Client-side queue state for one annotation session.
 *
 * Cards never mutate rule semantics; they only track what the annotator has
 * chosen and what the server has confirmed. Verdict payloads are validated
 * here exactly as far as the form needs (a range pick requires a direction),
 * everything else is the server's call.
 */

import type { CandidatePayload, DecisionBody, SessionPayload } from "./api.js";

export type CardStatus = "pending" | "submitting" | "decided";

export interface Card {
  candidate: CandidatePayload;
  status: CardStatus;
  verdict?: string;
  params?: Record<string, string>;
  error?: string;
}

export interface VerdictChoice {
  verdict: string;
  direction?: "le" | "ge";
  side?: "anchor" | "rec";
}

export function verdictOptions(card: Card): string[] {
  return [card.candidate.rule.kind, "abstain"];
}

/** Map form controls to the decision body; throws on incomplete input. */
export function buildDecision(card: Card, choice: VerdictChoice): DecisionBody {
  const rule = card.candidate.rule;
  if (choice.verdict !== "abstain" && choice.verdict !== rule.kind) {
    throw new Error(`verdict ${choice.verdict} is invalid on a ${rule.kind} candidate`);
  }
  const params: Record<string, string> = {};
  if (choice.verdict === "range") {
    if (choice.direction !== "le" && choice.direction !== "ge") {
      throw new Error("a range verdict needs a direction (≤ or ≥)");
    }
    params.direction = choice.direction;
  }
  if (choice.verdict === "contain") {
    const side = choice.side ?? rule.side;
    if (side !== "anchor" && side !== "rec") {
      throw new Error("a contain verdict needs a side");
    }
    params.side = side;
  }
  return { rule_id: rule.id, verdict: choice.verdict, params, annotator: "ui" };
}

export class SessionQueue {
  cards: Card[] = [];
  iteration = 0;
  finalized = false;

  load(session: SessionPayload): void {
    this.iteration = session.iteration;
    this.finalized = session.state === "finalized";
    this.cards = session.candidates.map((candidate) => {
      const decided = session.decisions[candidate.rule.id];
      return {
        candidate,
        status: decided ? ("decided" as const) : ("pending" as const),
        verdict: decided?.verdict,
        params: decided?.params,
      };
    });
  }

  card(ruleId: string): Card {
    const card = this.cards.find((c) => c.candidate.rule.id === ruleId);
    if (!card) throw new Error(`unknown rule ${ruleId}`);
    return card;
  }

  /** Optimistically lock the card while its POST is in flight. */
  markSubmitting(ruleId: string): void {
    const card = this.card(ruleId);
    if (card.status === "decided") return;
    card.status = "submitting";
    card.error = undefined;
  }

  confirm(ruleId: string, verdict: string, params: Record<string, string>): void {
    const card = this.card(ruleId);
    card.status = "decided";
    card.verdict = verdict;
    card.params = params;
    card.error = undefined;
  }

  /** Roll the card back with the server's validation message. */
  reject(ruleId: string, message: string): void {
    const card = this.card(ruleId);
    card.status = "pending";
    card.error = message;
  }

  get pending(): Card[] {
    return this.cards.filter((c) => c.status !== "decided");
  }

  get canFinalize(): boolean {
    return this.cards.length > 0 && this.pending.length === 0 && !this.finalized;
  }
}
