/**
 * WebSocket client: connection lifecycle, reconnect, command sequencing.
 *
 * The socket and clock are injected so the whole state machine runs under
 * test with fakes.  All events funnel into the ConsoleSession; a single
 * onChange callback tells the embedding UI to re-render.
 */

import { Backoff } from "./backoff.js";
import {
  CommandPayload,
  decodeEnvelope,
  encodeEnvelope,
  makeEnvelope,
} from "./protocol.js";
import { Timer, realTimer } from "./ratelimit.js";
import { ConsoleSession } from "./session.js";

/** The subset of the browser WebSocket surface the client touches. */
export interface WsLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => WsLike;

export interface ClientOptions {
  url: string;
  socketFactory: SocketFactory;
  timer?: Timer;
  backoff?: Backoff;
  onChange?: () => void;
}

/**
 * Derive the wire endpoint from the page location.  The console is
 * normally served by the same process that speaks the protocol, so the
 * default is the page's own host and port; `?host=` and `?port=` query
 * parameters override it for cross-machine use.
 */
export function wireUrl(loc: {
  protocol: string;
  hostname: string;
  port: string;
  search: string;
}): string {
  const params = new URLSearchParams(loc.search);
  const host = params.get("host") ?? loc.hostname;
  const port = params.get("port") ?? loc.port;
  const scheme = loc.protocol === "https:" ? "wss" : "ws";
  return port ? `${scheme}://${host}:${port}/` : `${scheme}://${host}/`;
}

export class ConsoleClient {
  readonly session = new ConsoleSession();

  private readonly url: string;
  private readonly socketFactory: SocketFactory;
  private readonly timer: Timer;
  private readonly backoff: Backoff;
  private readonly onChange: () => void;

  private socket: WsLike | null = null;
  private reconnectHandle: unknown = null;
  private seq = 0;
  private disposed = false;

  constructor(opts: ClientOptions) {
    this.url = opts.url;
    this.socketFactory = opts.socketFactory;
    this.timer = opts.timer ?? realTimer;
    this.backoff = opts.backoff ?? new Backoff();
    this.onChange = opts.onChange ?? (() => {});
  }

  connect(): void {
    if (this.disposed) {
      return;
    }
    this.session.connection = "connecting";
    const sock = this.socketFactory(this.url);
    this.socket = sock;
    sock.onopen = () => {
      this.backoff.reset();
      this.session.onOpen();
      this.onChange();
    };
    sock.onmessage = (ev) => {
      if (typeof ev.data !== "string") {
        return;
      }
      try {
        const env = decodeEnvelope(ev.data);
        this.session.onMessage(env, this.timer.now());
      } catch {
        return; // a malformed broadcast is dropped, not fatal
      }
      this.onChange();
    };
    sock.onclose = () => this.handleClose(sock);
    sock.onerror = () => this.handleClose(sock);
    this.onChange();
  }

  private handleClose(sock: WsLike): void {
    if (this.socket !== sock) {
      return; // an already-replaced socket closing late
    }
    this.socket = null;
    this.session.onClose(this.timer.now());
    this.onChange();
    if (this.disposed || this.reconnectHandle !== null) {
      return;
    }
    const delay = this.backoff.next();
    this.reconnectHandle = this.timer.set(() => {
      this.reconnectHandle = null;
      this.connect();
    }, delay);
  }

  /**
   * Send one command; returns its seq, or null when not connected
   * (controls are disabled while disconnected, so this is best-effort).
   */
  sendCommand(payload: CommandPayload): number | null {
    if (this.socket === null || this.session.connection !== "open") {
      return null;
    }
    this.seq += 1;
    const env = makeEnvelope("command", payload, this.seq, this.timer.now());
    this.session.notePending(this.seq, payload.name, this.timer.now());
    this.socket.send(encodeEnvelope(env));
    this.onChange();
    return this.seq;
  }

  dispose(): void {
    this.disposed = true;
    if (this.reconnectHandle !== null) {
      this.timer.clear(this.reconnectHandle);
      this.reconnectHandle = null;
    }
    if (this.socket !== null) {
      this.socket.close();
      this.socket = null;
    }
  }
}
