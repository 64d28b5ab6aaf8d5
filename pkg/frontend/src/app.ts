/**
 * Dashboard wiring: one rendering context, every fact on screen read
 * back from the session on each change.  Network events and the
 * staleness ticker both funnel through the same render() pass, so there
 * is no state owned by the DOM.
 */

import { ConsoleClient, WsLike, wireUrl } from "./client.js";
import { cameraLabel, fmtAttitude, fmtMeters, fpsBadge } from "./format.js";
import {
  selectView,
  setAttitude,
  setJoints,
  snapshot,
  toggleCalibration,
  toggleOverlay,
} from "./protocol.js";
import { SetpointLimiter } from "./ratelimit.js";

/** Adapt a browser WebSocket to the narrow surface the client uses. */
function browserSocket(url: string): WsLike {
  const ws = new WebSocket(url);
  const like: WsLike = {
    send: (data) => ws.send(data),
    close: () => ws.close(),
    onopen: null,
    onmessage: null,
    onclose: null,
    onerror: null,
  };
  ws.onopen = () => like.onopen?.();
  ws.onmessage = (ev) => like.onmessage?.({ data: ev.data });
  ws.onclose = () => like.onclose?.();
  ws.onerror = () => like.onerror?.();
  return like;
}

const CAMERA_AZIMUTHS = ["front", "left", "right", "rear"] as const;
const TOPVIEW = "topview";
const SEND_INTERVAL_MS = 100; // 10 Hz ceiling for continuous controls
const FAILURE_TOAST_MS = 4000;

interface SliderSpec {
  id: string;
  label: string;
  min: number;
  max: number;
  command: (value: number) => ReturnType<typeof setJoints>;
}

const SLIDERS: SliderSpec[] = [
  { id: "boom", label: "boom", min: -20, max: 80, command: (v) => setJoints({ boom_deg: v }) },
  { id: "arm", label: "arm", min: -160, max: 0, command: (v) => setJoints({ arm_deg: v }) },
  { id: "bucket", label: "bucket", min: -90, max: 90, command: (v) => setJoints({ bucket_deg: v }) },
  { id: "roll", label: "roll", min: -30, max: 30, command: (v) => setAttitude({ roll_deg: v }) },
  { id: "pitch", label: "pitch", min: -30, max: 30, command: (v) => setAttitude({ pitch_deg: v }) },
  { id: "yaw", label: "yaw", min: -180, max: 180, command: (v) => setAttitude({ yaw_deg: v }) },
];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) {
    throw new Error(`missing #${id}`);
  }
  return node as T;
}

function pngUri(b64: string): string {
  return `data:image/png;base64,${b64}`;
}

export function startConsole(): void {
  const client = new ConsoleClient({
    url: wireUrl(window.location),
    socketFactory: browserSocket,
    onChange: () => render(),
  });
  const session = client.session;

  const banner = el<HTMLDivElement>("banner");
  const mainImg = el<HTMLImageElement>("main-view");
  const mainCaption = el<HTMLDivElement>("main-caption");
  const mainStale = el<HTMLDivElement>("main-stale");
  const thumbsBox = el<HTMLDivElement>("thumbs");
  const fps = el<HTMLSpanElement>("fps");
  const pendingDot = el<HTMLSpanElement>("pending");
  const toast = el<HTMLDivElement>("toast");
  const readoutGround = el<HTMLSpanElement>("readout-ground");
  const readoutRadius = el<HTMLSpanElement>("readout-radius");
  const readoutAttitude = el<HTMLSpanElement>("readout-attitude");
  const overlayBtn = el<HTMLButtonElement>("btn-overlay");
  const calibrationBtn = el<HTMLButtonElement>("btn-calibration");
  const snapshotBtn = el<HTMLButtonElement>("btn-snapshot");

  // --- thumbnails -------------------------------------------------------
  const thumbs = CAMERA_AZIMUTHS.map((azimuth, i) => {
    const view = `camera-${i + 1}`;
    const button = document.createElement("button");
    button.className = "thumb";
    button.title = `magnify the ${azimuth} camera`;
    const img = document.createElement("img");
    img.alt = `${azimuth} camera`;
    const label = document.createElement("span");
    label.textContent = cameraLabel(i, azimuth);
    const stale = document.createElement("span");
    stale.className = "stale-tag";
    button.append(img, label, stale);
    button.addEventListener("click", () => client.sendCommand(selectView(view)));
    thumbsBox.append(button);
    return { view, button, img, stale };
  });

  // --- sliders ----------------------------------------------------------
  const slidersBox = el<HTMLDivElement>("sliders");
  const sliderInputs: { input: HTMLInputElement; value: HTMLSpanElement }[] = [];
  for (const spec of SLIDERS) {
    const row = document.createElement("label");
    row.className = "slider-row";
    const name = document.createElement("span");
    name.textContent = spec.label;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(spec.min);
    input.max = String(spec.max);
    input.step = "0.5";
    input.value = "0";
    const value = document.createElement("span");
    value.className = "slider-value";
    const limiter = new SetpointLimiter<number>(SEND_INTERVAL_MS, (v) =>
      client.sendCommand(spec.command(v)),
    );
    input.addEventListener("input", () => {
      // the range input already confines the value; clamp again so a
      // programmatic set can never smuggle an out-of-range setpoint
      const v = Math.min(spec.max, Math.max(spec.min, Number(input.value)));
      value.textContent = `${v.toFixed(1)}°`;
      limiter.submit(v);
    });
    row.append(name, input, value);
    slidersBox.append(row);
    sliderInputs.push({ input, value });
  }

  // --- buttons ----------------------------------------------------------
  overlayBtn.addEventListener("click", () => client.sendCommand(toggleOverlay()));
  calibrationBtn.addEventListener("click", () => client.sendCommand(toggleCalibration()));
  snapshotBtn.addEventListener("click", () => client.sendCommand(snapshot()));

  // a magnified camera view is dismissed by clicking it or pressing Esc
  mainImg.addEventListener("click", () => {
    if ((session.viewState?.active_view ?? TOPVIEW) !== TOPVIEW) {
      client.sendCommand(selectView(TOPVIEW));
    }
  });
  window.addEventListener("keydown", (ev) => {
    if (ev.key === "Escape") {
      client.sendCommand(selectView(TOPVIEW));
    }
  });

  // --- render -----------------------------------------------------------
  function render(): void {
    const now = Date.now();
    const connected = session.connection === "open";
    banner.hidden = connected;
    banner.textContent =
      session.connection === "connecting" ? "connecting…" : "disconnected — retrying";

    const vs = session.viewState;
    const active = vs?.active_view ?? TOPVIEW;

    const mainRec = session.frameFor(active);
    if (mainRec !== undefined) {
      const uri = pngUri(mainRec.payload.png_b64);
      if (mainImg.src !== uri) {
        mainImg.src = uri;
      }
    }
    mainCaption.textContent =
      active === TOPVIEW ? "top view" : `${active} (click to dismiss)`;
    mainImg.classList.toggle("magnified", active !== TOPVIEW);
    mainStale.hidden = !(mainRec !== undefined && session.isStale(active, now));

    for (const t of thumbs) {
      const rec = session.frameFor(t.view);
      if (rec !== undefined && t.img.dataset.seq !== String(rec.payload.frame_seq)) {
        t.img.src = pngUri(rec.payload.png_b64);
        t.img.dataset.seq = String(rec.payload.frame_seq);
      }
      t.button.classList.toggle("active", active === t.view);
      t.button.classList.toggle("no-signal", rec === undefined);
      t.stale.textContent =
        rec === undefined ? "no signal" : session.isStale(t.view, now) ? "stale" : "";
    }

    if (vs !== null) {
      readoutAttitude.textContent = fmtAttitude(
        vs.attitude.roll_deg,
        vs.attitude.pitch_deg,
        vs.attitude.yaw_deg,
      );
      overlayBtn.textContent = `overlay: ${vs.overlay_on ? "on" : "off"}`;
      calibrationBtn.textContent = `calibration: ${vs.calibration_on ? "on" : "off"}`;
      // sliders follow acknowledged truth unless the user is mid-drag
      const values = [
        vs.joints.boom_deg,
        vs.joints.arm_deg,
        vs.joints.bucket_deg,
        vs.attitude.roll_deg,
        vs.attitude.pitch_deg,
        vs.attitude.yaw_deg,
      ];
      sliderInputs.forEach((s, i) => {
        if (document.activeElement !== s.input && !session.hasPending()) {
          s.input.value = String(values[i]);
          s.value.textContent = `${values[i]!.toFixed(1)}°`;
        }
      });
    }
    const overlay = session.overlay;
    if (overlay !== null) {
      readoutGround.textContent = fmtMeters(overlay.readout_ground_distance_m);
      readoutRadius.textContent = fmtMeters(overlay.readout_radius_m);
    }
    fps.textContent = fpsBadge(session.stats);
    pendingDot.hidden = !session.hasPending();

    const failure = session.lastFailure;
    const showToast = failure !== null && now - failure.at < FAILURE_TOAST_MS;
    toast.hidden = !showToast;
    if (showToast && failure !== null) {
      toast.textContent = failure.message;
    }

    for (const node of [overlayBtn, calibrationBtn, snapshotBtn, ...sliderInputs.map((s) => s.input)]) {
      (node as HTMLButtonElement | HTMLInputElement).disabled = !connected;
    }
  }

  // staleness and toast expiry depend on the clock, not on messages
  window.setInterval(render, 250);

  client.connect();
  render();
}

startConsole();
