/**
 * Console session state.
 *
 * Everything the dashboard shows is traceable to a server message: view
 * state comes from `state` and `ack` payloads, imagery from `frame`
 * payloads.  Slider moves and button presses never mutate this state
 * directly — they only enqueue commands, which show as pending until the
 * server acknowledges and its next state/ack message carries the truth.
 */

import type {
  AckPayload,
  Envelope,
  ErrorPayload,
  FramePayload,
  OverlayDict,
  StatePayload,
  StatsDict,
  ViewStateDict,
} from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "closed";

export interface FrameRecord {
  payload: FramePayload;
  receivedAt: number;
}

export interface PendingCommand {
  seq: number;
  name: string;
  sentAt: number;
}

export interface CommandFailure {
  seq: number | null;
  message: string;
  at: number;
}

/** A frame older than this counts as stale on screen. */
export const STALE_AFTER_MS = 1000;

export class ConsoleSession {
  connection: ConnectionState = "connecting";
  viewState: ViewStateDict | null = null;
  overlay: OverlayDict | null = null;
  stats: StatsDict | null = null;
  lastStateAt = 0;
  lastFailure: CommandFailure | null = null;

  /** Latest frame per view name ("topview", "camera-1", ...). */
  readonly frames = new Map<string, FrameRecord>();
  /** Commands sent but not yet acknowledged, keyed by envelope seq. */
  readonly pending = new Map<number, PendingCommand>();

  onOpen(): void {
    this.connection = "open";
  }

  /** Connection dropped: in-flight commands will never be answered. */
  onClose(now: number): void {
    this.connection = "closed";
    if (this.pending.size > 0) {
      this.pending.clear();
      this.lastFailure = { seq: null, message: "connection lost", at: now };
    }
  }

  notePending(seq: number, name: string, now: number): void {
    this.pending.set(seq, { seq, name, sentAt: now });
  }

  onMessage(env: Envelope, now: number): void {
    switch (env.type) {
      case "state": {
        const p = env.payload as unknown as StatePayload;
        this.viewState = p.view_state;
        this.overlay = p.overlay;
        this.stats = p.stats;
        this.lastStateAt = now;
        break;
      }
      case "frame": {
        const p = env.payload as unknown as FramePayload;
        this.frames.set(p.view, { payload: p, receivedAt: now });
        break;
      }
      case "ack": {
        const p = env.payload as unknown as AckPayload;
        this.pending.delete(p.ack_seq);
        this.viewState = p.view_state;
        break;
      }
      case "error": {
        const p = env.payload as unknown as ErrorPayload;
        const seq = p.ack_seq ?? null;
        if (seq !== null) {
          this.pending.delete(seq);
        }
        this.lastFailure = { seq, message: p.message, at: now };
        break;
      }
      default:
        // command envelopes never travel server -> client; ignore
        break;
    }
  }

  /** True once there is enough truth to draw the full dashboard. */
  dashboardReady(): boolean {
    return this.viewState !== null && this.frames.size > 0;
  }

  frameFor(view: string): FrameRecord | undefined {
    return this.frames.get(view);
  }

  isStale(view: string, now: number): boolean {
    const rec = this.frames.get(view);
    if (rec === undefined) {
      return true;
    }
    return now - rec.receivedAt > STALE_AFTER_MS;
  }

  hasPending(): boolean {
    return this.pending.size > 0;
  }
}
