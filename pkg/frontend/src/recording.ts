/** Pointer-session recording and protocol derivation.
 *
 * A session captures timestamped pointer samples over a wall-clock play
 * interval, maps that interval linearly onto the chosen protocol duration
 * T, and resamples piecewise-linearly onto N = round(T / time_per_step)
 * uniformly spaced step times (endpoints clamped — gaps before the first
 * or after the last sample hold the nearest value).  The first step is
 * pinned to the problem's starting tweezer position.
 */

import type { ProtocolDoc, ProtocolStep } from "./types.js";

export interface InputSample {
  /** Seconds since session start; strictly increasing within a session. */
  t: number;
  /** Pointer-mapped tweezer position. */
  x: number;
  /** Tweezer amplitude; defaults to the maximum when untouched. */
  amp: number;
}

export interface SessionRecording {
  duration: number;
  samples: InputSample[];
}

export interface ProblemShape {
  x_start: number;
  amp_max: number;
  time_per_step: number;
}

export function stepsForDuration(duration: number, timePerStep: number): number {
  return Math.round(duration / timePerStep);
}

/** Piecewise-linear interpolation with endpoint clamping (the same rule the
 * toolkit's resample applies). */
export function interpolate(
  ts: number[],
  vs: number[],
  t: number,
): number {
  const n = ts.length;
  const first = ts[0]!;
  const last = ts[n - 1]!;
  if (t <= first) return vs[0]!;
  if (t >= last) return vs[n - 1]!;
  let hi = 1;
  while (ts[hi]! < t) hi += 1;
  const lo = hi - 1;
  const span = ts[hi]! - ts[lo]!;
  const w = span > 0 ? (t - ts[lo]!) / span : 0;
  return vs[lo]! + w * (vs[hi]! - vs[lo]!);
}

export class SessionRecorder {
  readonly samples: InputSample[] = [];

  constructor(
    readonly duration: number,
    readonly problem: ProblemShape,
  ) {
    if (duration <= 0) throw new Error("session duration must be positive");
  }

  /** Record one pointer sample; out-of-order timestamps are rejected so a
   * stored session always satisfies the strictly-increasing invariant. */
  add(t: number, x: number, amp?: number): void {
    const lastSample = this.samples[this.samples.length - 1];
    if (lastSample !== undefined && t <= lastSample.t) return;
    this.samples.push({ t, x, amp: amp ?? this.problem.amp_max });
  }

  recording(): SessionRecording {
    return { duration: this.duration, samples: [...this.samples] };
  }
}

/** Derive the scoreable protocol from a recording.
 *
 * Throws on an empty session (the UI discards it with a message).  A single
 * sample yields a constant protocol at that value.
 */
export function deriveProtocol(
  recording: SessionRecording,
  problem: ProblemShape,
): ProtocolDoc {
  const { samples, duration } = recording;
  if (samples.length === 0) {
    throw new Error("empty session: no pointer samples recorded");
  }
  const n = stepsForDuration(duration, problem.time_per_step);
  if (n < 1) throw new Error("duration shorter than one step");

  // map wall-clock sample times linearly onto [0, 1]
  const t0 = samples[0]!.t;
  const span = samples[samples.length - 1]!.t - t0;
  const ts = samples.map((s) => (span > 0 ? (s.t - t0) / span : 0));
  const xs = samples.map((s) => s.x);
  const amps = samples.map((s) => s.amp);

  const steps: ProtocolStep[] = [];
  for (let k = 0; k < n; k += 1) {
    const u = n > 1 ? k / (n - 1) : 0;
    steps.push({
      x: interpolate(ts, xs, u),
      amp: interpolate(ts, amps, u),
    });
  }
  steps[0] = { x: problem.x_start, amp: problem.amp_max };
  return { duration, steps };
}

/** Canonical JSON for a protocol: fixed key order, no whitespace, numbers
 * via JSON.stringify.  Replaying a stored recording therefore produces a
 * byte-identical document. */
export function protocolJson(protocol: ProtocolDoc): string {
  const steps = protocol.steps
    .map((s) => `{"x":${JSON.stringify(s.x)},"amp":${JSON.stringify(s.amp)}}`)
    .join(",");
  return `{"duration":${JSON.stringify(protocol.duration)},"steps":[${steps}]}`;
}
