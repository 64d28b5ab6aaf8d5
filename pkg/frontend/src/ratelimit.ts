/**
 * Setpoint rate limiting for continuous controls.
 *
 * Dragging a slider fires events far faster than the service needs.
 * Because every command is an absolute setpoint, intermediate values are
 * disposable: send immediately when the channel is idle, otherwise keep
 * only the newest value and flush it once per interval.
 */

export interface Timer {
  set(fn: () => void, ms: number): unknown;
  clear(handle: unknown): void;
  now(): number;
}

export const realTimer: Timer = {
  set: (fn, ms) => setTimeout(fn, ms),
  clear: (handle) => clearTimeout(handle as ReturnType<typeof setTimeout>),
  now: () => Date.now(),
};

export class SetpointLimiter<T> {
  private lastSentAt = Number.NEGATIVE_INFINITY;
  private queued: { value: T } | null = null;
  private handle: unknown = null;

  constructor(
    private readonly intervalMs: number,
    private readonly send: (value: T) => void,
    private readonly timer: Timer = realTimer,
  ) {}

  submit(value: T): void {
    const now = this.timer.now();
    if (this.handle === null && now - this.lastSentAt >= this.intervalMs) {
      this.lastSentAt = now;
      this.send(value);
      return;
    }
    this.queued = { value };
    if (this.handle === null) {
      const wait = Math.max(0, this.intervalMs - (now - this.lastSentAt));
      this.handle = this.timer.set(() => this.flush(), wait);
    }
  }

  private flush(): void {
    this.handle = null;
    if (this.queued === null) {
      return;
    }
    const { value } = this.queued;
    this.queued = null;
    this.lastSentAt = this.timer.now();
    this.send(value);
  }

  /** Drop any queued value and cancel the trailing send. */
  cancel(): void {
    if (this.handle !== null) {
      this.timer.clear(this.handle);
      this.handle = null;
    }
    this.queued = null;
  }
}
