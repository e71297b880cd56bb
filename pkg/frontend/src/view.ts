import { TrialViewBinding } from "./controller.js";
import { Answer, TrialPayload } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

// Plain-DOM implementation of the trial view: two images, a countdown bar,
// and the three answer buttons.
export class DomView implements TrialViewBinding {
  private leftImg = el<HTMLImageElement>("img-left");
  private rightImg = el<HTMLImageElement>("img-right");
  private countdownEl = el<HTMLElement>("countdown");
  private progressEl = el<HTMLElement>("progress");
  private statusEl = el<HTMLElement>("status");
  private buttons: Record<Answer, HTMLButtonElement> = {
    left: el<HTMLButtonElement>("btn-left"),
    right: el<HTMLButtonElement>("btn-right"),
    dont_know: el<HTMLButtonElement>("btn-dont-know"),
  };
  private retryBtn = el<HTMLButtonElement>("btn-retry");
  private handler: ((a: Answer) => void) | null = null;

  constructor() {
    (Object.keys(this.buttons) as Answer[]).forEach((answer) => {
      this.buttons[answer].addEventListener("click", () => {
        this.handler?.(answer);
        this.setButtonsEnabled(false);
      });
    });
  }

  private setButtonsEnabled(enabled: boolean): void {
    Object.values(this.buttons).forEach((b) => (b.disabled = !enabled));
  }

  showTrial(trial: TrialPayload, onAnswer: (answer: Answer) => void): void {
    this.statusEl.textContent = "";
    this.retryBtn.hidden = true;
    this.leftImg.src = trial.left_url;
    this.rightImg.src = trial.right_url;
    this.handler = onAnswer;
    this.setButtonsEnabled(true);
  }

  updateCountdown(remainingMs: number): void {
    this.countdownEl.textContent = (remainingMs / 1000).toFixed(1) + "s";
  }

  showProgress(completedTrials: number): void {
    this.handler = null;
    this.setButtonsEnabled(false);
    this.progressEl.textContent = `${completedTrials} answered`;
  }

  showComplete(completedTrials: number): void {
    this.handler = null;
    this.setButtonsEnabled(false);
    this.statusEl.textContent = `Study complete — thank you! You answered ${completedTrials} rounds.`;
    this.countdownEl.textContent = "";
  }

  showError(message: string, retry: () => void): void {
    this.statusEl.textContent = `Connection trouble (${message}). Your current round is not lost.`;
    this.retryBtn.hidden = false;
    this.retryBtn.onclick = () => {
      this.retryBtn.hidden = true;
      retry();
    };
  }
}
