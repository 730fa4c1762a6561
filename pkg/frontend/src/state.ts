// Session state and transitions. The UI computes nothing over bandit state;
// it only stores what the server returned.

import { ApiClient, ApiError, AskResponse, StatsResponse } from './api.js';

export type FeedbackState = 'none' | 'up' | 'down';

export interface AnswerEntry {
  question: string;
  answer: AskResponse;
  feedback: FeedbackState;
  expanded: boolean;
}

export interface UiSession {
  baseUrl: string;
  entries: AnswerEntry[]; // newest first
  stats: StatsResponse | null;
  asking: boolean;
  banner: string | null; // inline error/retry banner
  toast: string | null;
  validation: string | null;
}

export function newSession(baseUrl: string): UiSession {
  return {
    baseUrl,
    entries: [],
    stats: null,
    asking: false,
    banner: null,
    toast: null,
    validation: null,
  };
}

export class FeedbackConsole {
  readonly session: UiSession;

  constructor(
    private readonly client: ApiClient,
    private readonly onChange: (session: UiSession) => void = () => {},
  ) {
    this.session = newSession(client.baseUrl);
  }

  private changed(): void {
    this.onChange(this.session);
  }

  async ask(question: string): Promise<AnswerEntry | null> {
    const trimmed = question.trim();
    if (!trimmed) {
      this.session.validation = 'Type a question first.';
      this.changed();
      return null; // client-side validation: no request leaves the browser
    }
    this.session.validation = null;
    this.session.banner = null;
    this.session.asking = true;
    this.changed();
    try {
      const answer = await this.client.ask(trimmed);
      const entry: AnswerEntry = {
        question: trimmed,
        answer,
        feedback: 'none',
        expanded: false,
      };
      this.session.entries.unshift(entry);
      return entry;
    } catch (error) {
      this.session.banner =
        error instanceof ApiError
          ? `The service answered ${error.status}: ${error.detail}. Retry?`
          : 'Cannot reach the service. Retry?';
      return null;
    } finally {
      this.session.asking = false;
      this.changed();
    }
  }

  entry(questionId: string): AnswerEntry | undefined {
    return this.session.entries.find((e) => e.answer.question_id === questionId);
  }

  async submitFeedback(questionId: string, useful: boolean): Promise<void> {
    const entry = this.entry(questionId);
    if (!entry || entry.feedback !== 'none') {
      return; // buttons are disabled after one submission per question
    }
    try {
      await this.client.feedback(questionId, useful);
      entry.feedback = useful ? 'up' : 'down';
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        entry.feedback = useful ? 'up' : 'down'; // server already has it; lock
        this.session.toast = 'Feedback was already recorded for this answer.';
      } else if (error instanceof ApiError) {
        this.session.toast = `Feedback failed: ${error.detail}`;
      } else {
        this.session.toast = 'Feedback failed: service unreachable.';
      }
      this.changed();
      return;
    }
    await this.refreshStats();
    this.changed();
  }

  toggleDocuments(questionId: string): void {
    const entry = this.entry(questionId);
    if (entry) {
      entry.expanded = !entry.expanded;
      this.changed();
    }
  }

  dismissToast(): void {
    this.session.toast = null;
    this.changed();
  }

  async refreshStats(): Promise<void> {
    try {
      this.session.stats = await this.client.stats();
    } catch {
      // Stats panel keeps its last server values; the next poll retries.
    }
    this.changed();
  }

  startPolling(intervalMs = 2000, setTimer: typeof setInterval = setInterval): () => void {
    void this.refreshStats();
    const handle = setTimer(() => void this.refreshStats(), intervalMs);
    return () => clearInterval(handle as Parameters<typeof clearInterval>[0]);
  }
}
