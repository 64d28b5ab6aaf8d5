/**
 * Exponential reconnect backoff: 250 ms, 500 ms, 1 s, ... capped at 5 s.
 * Reset on a successful connection so a stable link retries quickly.
 */

export class Backoff {
  private attempt = 0;

  constructor(
    readonly baseMs = 250,
    readonly factor = 2,
    readonly capMs = 5000,
  ) {}

  next(): number {
    const delay = Math.min(this.capMs, this.baseMs * this.factor ** this.attempt);
    this.attempt += 1;
    return delay;
  }

  reset(): void {
    this.attempt = 0;
  }
}
