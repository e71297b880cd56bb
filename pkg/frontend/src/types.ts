export type Answer = "left" | "right" | "dont_know";

export interface TrialPayload {
  trial_id: string;
  left_url: string;
  right_url: string;
  deadline_ms: number;
}

export type NextTrialResponse =
  | TrialPayload
  | { complete: true };

export interface SubmitResponse {
  trial_id: string;
  answer: string;
  score: number;
}

export function isComplete(r: NextTrialResponse): r is { complete: true } {
  return (r as { complete?: boolean }).complete === true;
}
