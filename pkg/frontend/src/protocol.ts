/**
 * Wire envelopes and payload shapes.
 *
 * Mirrors the server's validation rules: every message is a JSON object
 * `{v: 1, type, seq, timestamp_ms, payload}` with payload an object.
 * Unknown extra fields are preserved; missing seq/payload get defaults.
 */

export type EnvelopeType = "frame" | "state" | "command" | "ack" | "error";

const ENVELOPE_TYPES: ReadonlySet<string> = new Set([
  "frame",
  "state",
  "command",
  "ack",
  "error",
]);

export interface Envelope {
  v: 1;
  type: EnvelopeType;
  seq: number;
  timestamp_ms: number;
  payload: Record<string, unknown>;
}

export class ProtocolError extends Error {}

function isPlainObject(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

/** Parse and validate one incoming message. */
export function decodeEnvelope(text: string): Envelope {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("message is not valid JSON");
  }
  if (!isPlainObject(raw)) {
    throw new ProtocolError("envelope must be a JSON object");
  }
  if (raw.v !== 1) {
    throw new ProtocolError(`unsupported protocol version ${String(raw.v)}`);
  }
  if (typeof raw.type !== "string" || !ENVELOPE_TYPES.has(raw.type)) {
    throw new ProtocolError(`unknown envelope type ${String(raw.type)}`);
  }
  const payload = raw.payload ?? {};
  if (!isPlainObject(payload)) {
    throw new ProtocolError("payload must be an object");
  }
  return {
    ...raw,
    v: 1,
    type: raw.type as EnvelopeType,
    seq: typeof raw.seq === "number" ? raw.seq : 0,
    timestamp_ms: typeof raw.timestamp_ms === "number" ? raw.timestamp_ms : 0,
    payload,
  };
}

export function makeEnvelope(
  type: EnvelopeType,
  payload: Record<string, unknown>,
  seq: number,
  timestampMs: number = Date.now(),
): Envelope {
  if (!ENVELOPE_TYPES.has(type)) {
    throw new ProtocolError(`unknown envelope type ${type}`);
  }
  return { v: 1, type, seq, timestamp_ms: timestampMs, payload };
}

export function encodeEnvelope(env: Envelope): string {
  return JSON.stringify(env);
}

// ---------------------------------------------------------------------------
// Payload shapes, as the server sends them.

export interface JointsDict {
  boom_deg: number;
  arm_deg: number;
  bucket_deg: number;
  timestamp_ms: number;
}

export interface AttitudeDict {
  roll_deg: number;
  pitch_deg: number;
  yaw_deg: number;
  timestamp_ms: number;
}

export interface PoseDict {
  boom_tip: [number, number];
  arm_tip: [number, number];
  bucket_tip: [number, number];
  ground_distance: number;
  slew_radius: number;
}

export interface ViewStateDict {
  active_view: string;
  overlay_on: boolean;
  calibration_on: boolean;
  joints: JointsDict;
  attitude: AttitudeDict;
  pose: PoseDict;
}

export interface OverlayDict {
  segments: [number, number][][];
  radius_m: number;
  ground_distance_m: number;
  slew_offset: number;
  pivot_height: number;
  readout_radius_m: number;
  readout_ground_distance_m: number;
}

export interface CadenceDict {
  mean_ms: number;
  min_ms: number;
  max_ms: number;
  samples: number;
}

export interface StatsDict {
  fps: number;
  dropped_frames: number;
  frames_published: number;
  frame_latency_ms?: number;
  info_cadence?: CadenceDict;
  attitude_cadence?: CadenceDict;
  unpaced?: boolean;
}

export interface StatePayload {
  view_state: ViewStateDict;
  overlay: OverlayDict;
  stats: StatsDict;
}

export interface FramePayload {
  view: string;
  frame_seq: number;
  telemetry_seq: number;
  width: number;
  height: number;
  png_b64: string;
}

export interface AckPayload {
  ack_seq: number;
  view_state: ViewStateDict;
}

export interface ErrorPayload {
  ack_seq?: number | null;
  message: string;
}

// ---------------------------------------------------------------------------
// Command payload builders.  Controls always send absolute setpoints so a
// retried or reordered command cannot compound.

export type CommandPayload = Record<string, unknown> & { name: string };

export function setJoints(
  fields: Partial<Pick<JointsDict, "boom_deg" | "arm_deg" | "bucket_deg">>,
): CommandPayload {
  return { name: "set_joints", ...fields };
}

export function setAttitude(
  fields: Partial<Pick<AttitudeDict, "roll_deg" | "pitch_deg" | "yaw_deg">>,
): CommandPayload {
  return { name: "set_attitude", ...fields };
}

export function selectView(view: string): CommandPayload {
  return { name: "select_view", view };
}

export function toggleOverlay(on?: boolean): CommandPayload {
  return on === undefined ? { name: "toggle_overlay" } : { name: "toggle_overlay", on };
}

export function toggleCalibration(on?: boolean): CommandPayload {
  return on === undefined
    ? { name: "toggle_calibration" }
    : { name: "toggle_calibration", on };
}

export function snapshot(): CommandPayload {
  return { name: "snapshot" };
}
