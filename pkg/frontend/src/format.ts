/**
 * Readout formatting: tiny pure helpers kept out of the DOM layer so the
 * exact strings are unit-testable.
 */

import type { StatsDict } from "./protocol.js";

export function fmtMeters(value: number): string {
  return `${value.toFixed(2)} m`;
}

export function fmtDegrees(value: number): string {
  return `${value.toFixed(1)}°`;
}

export function fmtAttitude(roll: number, pitch: number, yaw: number): string {
  return `R ${fmtDegrees(roll)}  P ${fmtDegrees(pitch)}  Y ${fmtDegrees(yaw)}`;
}

export function fpsBadge(stats: StatsDict | null): string {
  if (stats === null) {
    return "-- fps";
  }
  if (stats.unpaced) {
    return `${stats.frames_published} frames (replay)`;
  }
  return `${stats.fps.toFixed(1)} fps`;
}

/** Label under a thumbnail: camera number plus its compass direction. */
export function cameraLabel(index: number, azimuth: string): string {
  return `${index + 1} · ${azimuth}`;
}
