// Chat application: DOM construction, turn rendering, and submit flow.
// All state derives from API responses; a turn shows either an answer with
// its source cards or an error with a retry button, never both.

import { AskResponse, ContextCard, QaragApi } from "./api.js";

export interface ChatTurn {
  question: string;
  strategy: string;
  answer?: AskResponse;
  error?: string;
}

const FALLBACK_STRATEGY = "dual_track";

export class ChatApp {
  readonly turns: ChatTurn[] = [];
  private pending = false;

  private banner: HTMLElement;
  private turnList: HTMLElement;
  private form: HTMLFormElement;
  private input: HTMLInputElement;
  private submitButton: HTMLButtonElement;
  private selector: HTMLSelectElement;

  constructor(private root: HTMLElement, private api: QaragApi) {
    this.root.innerHTML = `
      <div class="health-banner" id="health-banner"></div>
      <div class="turns" id="turns"></div>
      <form class="ask-form" id="ask-form">
        <select id="strategy-selector" aria-label="retrieval strategy"></select>
        <span class="strategy-warning" id="strategy-warning" hidden></span>
        <input id="question-input" type="text" autocomplete="off"
               placeholder="Ask about the guidelines..." aria-label="question" />
        <button id="submit-button" type="submit" disabled>Ask</button>
      </form>`;
    this.banner = this.query("#health-banner");
    this.turnList = this.query("#turns");
    this.form = this.query("#ask-form");
    this.input = this.query("#question-input");
    this.submitButton = this.query("#submit-button");
    this.selector = this.query("#strategy-selector");

    this.input.addEventListener("input", () => this.syncControls());
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submitQuestion(this.input.value);
    });
  }

  private query<T extends HTMLElement>(selector: string): T {
    return this.root.querySelector(selector) as T;
  }

  get selectedStrategy(): string {
    return this.selector.value || FALLBACK_STRATEGY;
  }

  get isPending(): boolean {
    return this.pending;
  }

  private syncControls(): void {
    const empty = this.input.value.trim().length === 0;
    this.submitButton.disabled = this.pending || empty;
    this.input.disabled = this.pending;
    this.selector.disabled = this.pending;
  }

  async init(): Promise<void> {
    await Promise.all([this.loadStrategies(), this.refreshHealth()]);
    this.syncControls();
  }

  async loadStrategies(): Promise<void> {
    try {
      const strategies = await this.api.strategies();
      this.selector.innerHTML = "";
      for (const s of strategies) {
        const option = document.createElement("option");
        option.value = s.kind;
        option.textContent = s.kind;
        this.selector.appendChild(option);
      }
      this.selector.value = FALLBACK_STRATEGY;
    } catch {
      this.selector.innerHTML = `<option value="${FALLBACK_STRATEGY}">${FALLBACK_STRATEGY}</option>`;
      const warning = this.query("#strategy-warning");
      warning.textContent = "could not load strategies; using dual_track";
      warning.hidden = false;
    }
  }

  async refreshHealth(): Promise<void> {
    try {
      const health = await this.api.health();
      if (health.index_size === 0) {
        this.banner.textContent = "index is empty — ingest a corpus to start asking";
        this.banner.className = "health-banner warn";
      } else {
        this.banner.textContent = `index: ${health.index_size} chunks (dim ${health.dimension})`;
        this.banner.className = "health-banner ok";
      }
    } catch {
      this.banner.textContent = "service unreachable";
      this.banner.className = "health-banner error";
    }
  }

  async submitQuestion(text: string): Promise<void> {
    const question = text.trim();
    if (!question || this.pending) return;
    this.pending = true;
    this.syncControls();

    const turn: ChatTurn = { question, strategy: this.selectedStrategy };
    this.turns.push(turn);
    try {
      turn.answer = await this.api.ask(question, turn.strategy);
    } catch (error) {
      turn.error = error instanceof Error ? error.message : String(error);
    } finally {
      this.pending = false;
      this.input.value = "";
      this.syncControls();
      this.renderTurns();
    }
  }

  private renderTurns(): void {
    this.turnList.innerHTML = "";
    this.turns.forEach((turn, i) => this.turnList.appendChild(this.renderTurn(turn, i)));
    this.turnList.scrollTop = this.turnList.scrollHeight;
  }

  private renderTurn(turn: ChatTurn, index: number): HTMLElement {
    const element = document.createElement("div");
    element.className = "turn";
    element.dataset.index = String(index);

    const question = document.createElement("div");
    question.className = "turn-question";
    question.textContent = turn.question;
    element.appendChild(question);

    const meta = document.createElement("div");
    meta.className = "turn-strategy";
    meta.textContent = turn.strategy;
    element.appendChild(meta);

    if (turn.error !== undefined) {
      const error = document.createElement("div");
      error.className = "turn-error";
      error.textContent = turn.error;
      const retry = document.createElement("button");
      retry.className = "retry-button";
      retry.textContent = "Retry";
      retry.addEventListener("click", () => {
        this.turns.splice(this.turns.indexOf(turn), 1);
        this.renderTurns();
        void this.submitQuestion(turn.question);
      });
      error.appendChild(retry);
      element.appendChild(error);
      return element;
    }

    const response = turn.answer!;
    const answer = document.createElement("div");
    answer.className = "turn-answer";
    answer.textContent = response.answer;
    element.appendChild(answer);

    const sources = document.createElement("ol");
    sources.className = "sources";
    response.contexts.forEach((context, n) =>
      sources.appendChild(this.renderSource(context, n + 1)),
    );
    element.appendChild(sources);
    return element;
  }

  private renderSource(context: ContextCard, number: number): HTMLElement {
    const item = document.createElement("li");
    item.className = "source-card";

    const header = document.createElement("button");
    header.type = "button";
    header.className = "source-header";
    header.innerHTML =
      `<span class="source-number">[${number}]</span>` +
      ` <span class="source-doc">doc=${context.doc_id}</span>` +
      ` <span class="source-chunk">chunk=${context.chunk_index}</span>` +
      ` <span class="source-score">score=${context.score.toFixed(3)}</span>` +
      ` <span class="track-badge track-${context.source_track}">${context.source_track}</span>`;

    const text = document.createElement("pre");
    text.className = "source-text";
    text.hidden = true;
    text.textContent = context.text;

    header.addEventListener("click", () => {
      text.hidden = !text.hidden;
    });
    item.appendChild(header);
    item.appendChild(text);
    return item;
  }
}

export function mountChatApp(root: HTMLElement, api: QaragApi): ChatApp {
  return new ChatApp(root, api);
}
