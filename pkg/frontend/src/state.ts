// Trial state machine. Exactly these five states exist, and once a trial is
// submitted the machine can never show that same trial again.

export type TrialState = "loading" | "showing" | "submitted" | "complete" | "error";

const ALLOWED: Record<TrialState, TrialState[]> = {
  loading: ["showing", "complete", "error"],
  showing: ["submitted", "error"],
  submitted: ["loading", "complete", "error"],
  complete: [],
  // retry paths: refetch (loading) or re-render the still-pending trial
  error: ["loading", "showing", "submitted"],
};

export class TrialStateMachine {
  state: TrialState = "loading";
  currentTrialId: string | null = null;
  private submittedTrials = new Set<string>();

  transition(to: TrialState, trialId?: string): void {
    if (!ALLOWED[this.state].includes(to)) {
      throw new Error(`illegal transition ${this.state} -> ${to}`);
    }
    if (to === "showing") {
      if (trialId === undefined) {
        throw new Error("showing needs a trial id");
      }
      if (this.submittedTrials.has(trialId)) {
        throw new Error(`trial ${trialId} was already submitted`);
      }
      this.currentTrialId = trialId;
    }
    if (to === "submitted") {
      if (this.currentTrialId === null) {
        throw new Error("no trial to submit");
      }
      this.submittedTrials.add(this.currentTrialId);
    }
    this.state = to;
  }

  hasSubmitted(trialId: string): boolean {
    return this.submittedTrials.has(trialId);
  }
}
