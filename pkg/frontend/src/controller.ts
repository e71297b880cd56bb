import { StudyApiLike } from "./api.js";
import { Countdown } from "./countdown.js";
import { TrialStateMachine } from "./state.js";
import { Answer, TrialPayload, isComplete } from "./types.js";

export interface TrialViewBinding {
  // renders both images and wires the three controls to onAnswer
  showTrial(trial: TrialPayload, onAnswer: (answer: Answer) => void): void;
  updateCountdown(remainingMs: number): void;
  showProgress(completedTrials: number): void;
  showComplete(completedTrials: number): void;
  // retry re-enters the loop without consuming the trial (server dedupes)
  showError(message: string, retry: () => void): void;
}

export interface LoopOptions {
  preload?: (urls: string[]) => Promise<void>;
  now?: () => number;
  tickMs?: number;
}

export interface LoopSummary {
  completedTrials: number;
}

// Drives one participant session: fetch, preload, countdown, submit, repeat.
// Exactly one answer per trial leaves the client, whether it comes from a
// click, a double click (deduped), or countdown expiry (auto "dont_know").
// Per-trial correctness is never surfaced, only the progress count.
export class TrialLoop {
  readonly machine = new TrialStateMachine();
  private completed = 0;
  private countdown: Countdown | null = null;

  constructor(
    private api: StudyApiLike,
    private sessionId: string,
    private view: TrialViewBinding,
    private options: LoopOptions = {},
  ) {}

  async run(): Promise<LoopSummary> {
    for (;;) {
      const done = await this.step();
      if (done) {
        return { completedTrials: this.completed };
      }
    }
  }

  // one fetch-show-answer round; false means "keep looping"
  private async step(): Promise<boolean> {
    let trial: TrialPayload;
    try {
      await this.api.ping(); // warm the connection before issuance starts the clock
      const next = await this.api.nextTrial(this.sessionId);
      if (isComplete(next)) {
        this.machine.transition("complete");
        this.view.showComplete(this.completed);
        return true;
      }
      trial = next;
      // countdown display only starts once both images are ready
      await (this.options.preload ?? preloadNoop)([trial.left_url, trial.right_url]);
    } catch (err) {
      await this.pause(String(err));
      return false;
    }

    this.machine.transition("showing", trial.trial_id);
    const answer = await new Promise<Answer>((resolve) => {
      let settled = false;
      const once = (a: Answer) => {
        // first event wins: a double click or a click racing the countdown
        // collapses to a single answer
        if (!settled) {
          settled = true;
          resolve(a);
        }
      };
      this.view.showTrial(trial, once);
      this.countdown = new Countdown(
        (ms) => this.view.updateCountdown(ms),
        () => once("dont_know"),
        this.options.now,
        this.options.tickMs,
      );
      this.countdown.start(trial.deadline_ms);
    });
    this.countdown?.stop();

    // retry submission until the server accepts it; the pending trial is not
    // consumed by a network failure and the server dedupes by trial_id
    for (;;) {
      try {
        await this.api.submitAnswer(this.sessionId, trial.trial_id, answer);
        break;
      } catch (err) {
        await this.pause(String(err));
      }
    }
    this.machine.transition("submitted");
    this.completed += 1;
    this.view.showProgress(this.completed);
    this.machine.transition("loading");
    return false;
  }

  private pause(message: string): Promise<void> {
    const from = this.machine.state;
    const trialId = this.machine.currentTrialId;
    if (from !== "error") {
      this.machine.transition("error");
    }
    return new Promise((resolve) => {
      this.view.showError(message, () => {
        if (from === "showing" && trialId !== null) {
          this.machine.transition("showing", trialId);
        } else {
          this.machine.transition("loading");
        }
        resolve();
      });
    });
  }
}

function preloadNoop(): Promise<void> {
  return Promise.resolve();
}

export function preloadImages(urls: string[]): Promise<void> {
  return Promise.all(
    urls.map(
      (url) =>
        new Promise<void>((resolve, reject) => {
          const img = new Image();
          img.onload = () => resolve();
          img.onerror = () => reject(new Error(`failed to preload ${url}`));
          img.src = url;
        }),
    ),
  ).then(() => undefined);
}
