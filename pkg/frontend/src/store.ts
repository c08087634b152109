/** UI state container for the contestation loop.
 *
 * Holds everything the screens render and exposes the user-level actions
 * (pick instance, fetch flipset, dispute, what-if). DOM-free so tests and
 * the scripted end-to-end flow drive exactly the code the browser runs.
 * The dispute basket always mirrors the server's session state: every
 * mutation is reconciled from the PATCH response.
 */

import { ApiClient, ApiError } from "./api.js";
import type {
  ExperimentSummary, FlipsetPayload, HistoryEntry, ModelInfo,
  PredictionRow, Session,
} from "./types.js";

export type SortKey = "test_index" | "prob" | "margin" | "k";

export interface Banner {
  flipped: boolean;
  retrainedProb: number;
  disputedCount: number;
}

export interface CumulativePoint {
  index: number;
  delta: number;
  cumulative: number;
}

export interface StoreState {
  models: ModelInfo[];
  modelId: string | null;
  tau: number;
  predictions: PredictionRow[];
  sortKey: SortKey;
  sortAscending: boolean;
  selected: PredictionRow | null;
  session: Session | null;
  flipset: FlipsetPayload | null;
  flipsetRequested: boolean;
  algorithm: "greedy" | "iterative";
  whatifPending: boolean;
  experiment: ExperimentSummary | null;
  error: string | null;
  banner: Banner | null;
}

type Listener = (state: StoreState) => void;

function initialState(): StoreState {
  return {
    models: [],
    modelId: null,
    tau: 0.5,
    predictions: [],
    sortKey: "margin",
    sortAscending: true,
    selected: null,
    session: null,
    flipset: null,
    flipsetRequested: false,
    algorithm: "iterative",
    whatifPending: false,
    experiment: null,
    error: null,
    banner: null,
  };
}

export class AppStore {
  state: StoreState = initialState();
  private listeners: Listener[] = [];
  private whatifToken = 0;

  constructor(private readonly api: ApiClient) {}

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener(this.state);
    }
  }

  private update(patch: Partial<StoreState>): void {
    this.state = { ...this.state, ...patch };
    this.notify();
  }

  private fail(err: unknown): void {
    const message = err instanceof ApiError
      ? `${err.message}${err.detail ? ` (${err.detail})` : ""}`
      : String(err);
    this.update({ error: message });
  }

  async loadModels(): Promise<void> {
    try {
      const { models } = await this.api.listModels();
      this.update({ models, error: null });
    } catch (err) {
      this.fail(err);
    }
  }

  async selectModel(modelId: string): Promise<void> {
    this.update({
      modelId, predictions: [], selected: null, session: null,
      flipset: null, flipsetRequested: false, banner: null, experiment: null,
    });
    try {
      const { predictions, tau } = await this.api.listPredictions(modelId);
      this.update({ predictions, tau, error: null });
    } catch (err) {
      this.fail(err);
      return;
    }
    try {
      const experiment = await this.api.getExperiment(modelId);
      this.update({ experiment });
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 404)) {
        this.fail(err);
      }
    }
  }

  sortBy(key: SortKey): void {
    const ascending = this.state.sortKey === key ? !this.state.sortAscending : true;
    this.update({ sortKey: key, sortAscending: ascending });
  }

  /** Predictions in display order; ties fall back to ascending index. */
  sortedPredictions(): PredictionRow[] {
    const { predictions, sortKey, sortAscending } = this.state;
    const value = (row: PredictionRow): number =>
      sortKey === "k" ? (row.k ?? Number.POSITIVE_INFINITY) : row[sortKey];
    return [...predictions].sort((a, b) => {
      const diff = value(a) - value(b);
      const primary = sortAscending ? diff : -diff;
      return primary !== 0 ? primary : a.test_index - b.test_index;
    });
  }

  async selectInstance(testIndex: number): Promise<void> {
    const { modelId, predictions } = this.state;
    if (modelId === null) {
      return;
    }
    const selected = predictions.find((p) => p.test_index === testIndex) ?? null;
    this.update({
      selected, session: null, flipset: null, flipsetRequested: false, banner: null,
    });
    try {
      const session = await this.api.createSession(modelId, testIndex);
      this.update({ session, error: null });
    } catch (err) {
      this.fail(err);
    }
  }

  /** Rebuild state for an existing session (page reload path). */
  async rehydrate(sessionId: string): Promise<void> {
    try {
      const session = await this.api.getSession(sessionId);
      const { predictions, tau } = await this.api.listPredictions(session.model_id);
      const selected = predictions.find((p) => p.test_index === session.test_index) ?? null;
      this.update({
        modelId: session.model_id, predictions, tau, selected, session,
        flipset: null, flipsetRequested: false, banner: null, error: null,
      });
    } catch (err) {
      this.fail(err);
    }
  }

  setAlgorithm(algorithm: "greedy" | "iterative"): void {
    this.update({ algorithm });
  }

  async fetchFlipset(): Promise<void> {
    const { modelId, selected, algorithm } = this.state;
    if (modelId === null || selected === null) {
      return;
    }
    this.update({ flipsetRequested: true, flipset: null });
    try {
      const flipset = await this.api.computeFlipset(modelId, selected.test_index, algorithm);
      this.update({ flipset, error: null });
    } catch (err) {
      this.fail(err);
    }
  }

  /** Server-provided deltas accumulated for the crossing bar (display only). */
  cumulativeTrace(): CumulativePoint[] {
    const flipset = this.state.flipset;
    if (flipset === null || !flipset.found) {
      return [];
    }
    let running = flipset.original_prob;
    return flipset.members.map((member) => {
      running += member.delta;
      return { index: member.index, delta: member.delta, cumulative: running };
    });
  }

  disputed(): number[] {
    return this.state.session?.disputed ?? [];
  }

  canWhatIf(): boolean {
    return this.state.session !== null && this.disputed().length > 0
      && !this.state.whatifPending;
  }

  private async patchDisputed(add: number[], remove: number[]): Promise<void> {
    const session = this.state.session;
    if (session === null) {
      return;
    }
    try {
      const { disputed } = await this.api.patchDisputed(session.id, add, remove);
      this.update({ session: { ...session, disputed }, error: null });
    } catch (err) {
      this.fail(err);
    }
  }

  toggleDispute(trainIndex: number): Promise<void> {
    return this.disputed().includes(trainIndex)
      ? this.patchDisputed([], [trainIndex])
      : this.patchDisputed([trainIndex], []);
  }

  disputeAllMembers(): Promise<void> {
    const members = this.state.flipset?.members ?? [];
    return this.patchDisputed(members.map((m) => m.index), []);
  }

  clearDisputes(): Promise<void> {
    return this.patchDisputed([], this.disputed());
  }

  /** Run the what-if retrain; a cancel issued while it is in flight
   * discards the result client-side (the server call still completes). */
  async runWhatIf(): Promise<void> {
    const session = this.state.session;
    if (session === null || !this.canWhatIf()) {
      return;
    }
    const token = ++this.whatifToken;
    this.update({ whatifPending: true, banner: null });
    try {
      const outcome = await this.api.runWhatIf(session.id);
      if (token !== this.whatifToken) {
        return; // cancelled: result discarded, timeline refreshes on reload
      }
      const history: HistoryEntry[] = [...session.history, outcome.history_entry];
      this.update({
        whatifPending: false,
        session: { ...session, history },
        banner: {
          flipped: outcome.flipped,
          retrainedProb: outcome.retrained_prob,
          disputedCount: outcome.history_entry.disputed.length,
        },
        error: null,
      });
    } catch (err) {
      if (token === this.whatifToken) {
        this.update({ whatifPending: false });
        this.fail(err);
      }
    }
  }

  cancelWhatIf(): void {
    if (this.state.whatifPending) {
      this.whatifToken++;
      this.update({ whatifPending: false });
    }
  }

  timeline(): HistoryEntry[] {
    return this.state.session?.history ?? [];
  }
}
