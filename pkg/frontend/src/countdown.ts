// Display-side countdown. remaining_ms only ever decreases and is never sent
// anywhere; the server's own clock is authoritative for scoring.

export class Countdown {
  private timer: ReturnType<typeof setInterval> | null = null;
  private endAt = 0;
  private lastShown = Infinity;

  constructor(
    private onTick: (remainingMs: number) => void,
    private onExpire: () => void,
    private now: () => number = () => Date.now(),
    private tickMs: number = 100,
  ) {}

  start(durationMs: number): void {
    this.stop();
    this.endAt = this.now() + durationMs;
    this.lastShown = Infinity;
    this.emit();
    this.timer = setInterval(() => this.emit(), this.tickMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private emit(): void {
    const remaining = Math.max(0, this.endAt - this.now());
    const shown = Math.min(remaining, this.lastShown); // monotone display
    this.lastShown = shown;
    this.onTick(shown);
    if (remaining <= 0) {
      this.stop();
      this.onExpire();
    }
  }
}
