import { Answer, NextTrialResponse, SubmitResponse, TrialPayload } from "./types.js";

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface StudyApiLike {
  ping(): Promise<void>;
  createSession(participant: string): Promise<string>;
  nextTrial(sessionId: string): Promise<NextTrialResponse>;
  submitAnswer(sessionId: string, trialId: string, answer: Answer): Promise<SubmitResponse>;
}

// Thin client over the study service HTTP API. A fetch implementation is
// injectable so tests can run fully in-process.
export class StudyApi implements StudyApiLike {
  constructor(
    private base: string = "",
    private fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async json<T>(url: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + url, init);
    if (!resp.ok) {
      const body = await resp.json().catch(() => ({}));
      // a lost next-trial response leaves the trial pending server-side; the
      // 409 echoes it so the client can resume without burning the trial
      if (resp.status === 409 && (body as { pending?: TrialPayload }).pending) {
        const p = (body as { pending: TrialPayload & { left?: string; right?: string } }).pending;
        return {
          trial_id: p.trial_id,
          left_url: (p as { left?: string }).left ?? p.left_url,
          right_url: (p as { right?: string }).right ?? p.right_url,
          deadline_ms: p.deadline_ms,
        } as T;
      }
      throw new Error(`${resp.status}: ${JSON.stringify(body)}`);
    }
    return (await resp.json()) as T;
  }

  // readiness ping before asking for a trial, so connection setup does not
  // eat into the 5-second window that starts at server-side issuance
  async ping(): Promise<void> {
    await this.fetchImpl(this.base + "/results", { method: "GET" });
  }

  async createSession(participant: string): Promise<string> {
    const r = await this.json<{ session_id: string }>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ participant }),
    });
    return r.session_id;
  }

  nextTrial(sessionId: string): Promise<NextTrialResponse> {
    return this.json<NextTrialResponse>(`/sessions/${sessionId}/next`);
  }

  submitAnswer(sessionId: string, trialId: string, answer: Answer): Promise<SubmitResponse> {
    return this.json<SubmitResponse>(`/sessions/${sessionId}/answers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ trial_id: trialId, answer }),
    });
  }
}
