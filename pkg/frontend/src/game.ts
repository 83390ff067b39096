/** Game controller: session lifecycle, scoring round trip, playback.
 *
 * Rendering is delegated to small pure-ish draw functions so the
 * controller's state machine (idle -> recording -> scoring -> done) stays
 * testable without a real canvas.  At most one score request is in flight
 * at a time; a failed request keeps the recording so the player can retry.
 */

import { ApiError, Client } from "./api.js";
import {
  SessionRecorder,
  deriveProtocol,
  type SessionRecording,
} from "./recording.js";
import type { Frame, Problem, ProtocolDoc, ScoreResult } from "./types.js";

export type Phase = "idle" | "recording" | "scoring" | "done" | "error";

export interface GameView {
  setPhase(phase: Phase): void;
  setStatus(message: string): void;
  showResult(result: ScoreResult, protocol: ProtocolDoc): void;
  drawFrame(problem: Problem, frame: Frame, tweezer: { x: number; amp: number }): void;
}

export class GameController {
  phase: Phase = "idle";
  private recorder: SessionRecorder | null = null;
  private lastRecording: SessionRecording | null = null;
  lastProtocol: ProtocolDoc | null = null;
  lastResult: ScoreResult | null = null;
  private inFlight = false;
  private sessionStart = 0;
  private playSeconds = 0;

  constructor(
    private readonly client: Client,
    readonly problem: Problem,
    private readonly view: GameView,
  ) {}

  /** Begin a session; `playSeconds` of wall clock map onto `duration`. */
  start(duration: number, playSeconds: number, now: number): void {
    const [lo, hi] = this.problem.duration_range;
    if (duration < lo || duration > hi) {
      this.view.setStatus(`duration must be in [${lo}, ${hi}]`);
      return;
    }
    this.recorder = new SessionRecorder(duration, this.problem);
    this.sessionStart = now;
    this.playSeconds = playSeconds;
    this.phase = "recording";
    this.view.setPhase(this.phase);
  }

  /** Feed a pointer sample (already mapped to problem coordinates). */
  pointer(now: number, x: number, amp?: number): void {
    if (this.phase !== "recording" || !this.recorder) return;
    const t = (now - this.sessionStart) / 1000;
    this.recorder.add(t, clamp(x, this.problem.domain[0], this.problem.domain[1]),
      amp === undefined
        ? undefined
        : clamp(amp, this.problem.amp_min, this.problem.amp_max));
  }

  /** Fraction of the play interval elapsed, for the progress display. */
  progress(now: number): number {
    if (this.phase !== "recording") return 0;
    return clamp((now - this.sessionStart) / 1000 / this.playSeconds, 0, 1);
  }

  /** End the session and submit for scoring. */
  async finish(): Promise<void> {
    if (this.phase !== "recording" || !this.recorder) return;
    const recording = this.recorder.recording();
    this.recorder = null;
    if (recording.samples.length === 0) {
      this.phase = "idle";
      this.view.setPhase(this.phase);
      this.view.setStatus("session discarded: no input recorded");
      return;
    }
    this.lastRecording = recording;
    await this.scoreRecording(recording);
  }

  /** Retry after a network failure; the recording was preserved. */
  async retry(): Promise<void> {
    if (this.lastRecording) await this.scoreRecording(this.lastRecording);
  }

  private async scoreRecording(recording: SessionRecording): Promise<void> {
    if (this.inFlight) return;
    let protocol: ProtocolDoc;
    try {
      protocol = deriveProtocol(recording, this.problem);
    } catch (err) {
      this.phase = "idle";
      this.view.setPhase(this.phase);
      this.view.setStatus(String(err instanceof Error ? err.message : err));
      return;
    }
    this.inFlight = true;
    this.phase = "scoring";
    this.view.setPhase(this.phase);
    try {
      const stride = Math.max(1, Math.floor(protocol.steps.length / 60));
      const result = await this.client.score(protocol, {
        frames: true,
        frame_stride: stride,
      });
      this.lastProtocol = protocol;
      this.lastResult = result;
      this.phase = "done";
      this.view.setPhase(this.phase);
      this.view.showResult(result, protocol);
    } catch (err) {
      this.phase = "error";
      this.view.setPhase(this.phase);
      if (err instanceof ApiError && err.status === 400) {
        // validation problem: surface the field error verbatim, drop the
        // recording (retrying the same bytes cannot succeed)
        this.lastRecording = null;
        this.view.setStatus(err.message);
      } else {
        this.view.setStatus("scoring failed — recording kept, retry available");
      }
    } finally {
      this.inFlight = false;
    }
  }

  /** Submit the scored protocol to the leaderboard. */
  async submitScore(name: string): Promise<void> {
    if (!this.lastProtocol) return;
    try {
      const entry = await this.client.submit(this.lastProtocol, {
        name,
        source: "human",
      });
      this.view.setStatus(`on the leaderboard at ${entry.fidelity.toFixed(4)}`);
    } catch (err) {
      this.view.setStatus(
        err instanceof ApiError ? err.message : "submission failed",
      );
    }
  }

  /** Animate the server-streamed frames; `schedule` abstracts rAF. */
  playback(schedule: (cb: () => void) => void): void {
    const result = this.lastResult;
    const protocol = this.lastProtocol;
    if (!result?.frames || !protocol) return;
    const frames = result.frames;
    let i = 0;
    const tick = () => {
      const frame = frames[i];
      if (!frame) return;
      const stepIndex = Math.min(frame.step, protocol.steps.length - 1);
      const step = protocol.steps[stepIndex]!;
      this.view.drawFrame(this.problem, frame, { x: step.x, amp: step.amp });
      i += 1;
      if (i < frames.length) schedule(tick);
    };
    schedule(tick);
  }
}

export function clamp(v: number, lo: number, hi: number): number {
  return Math.min(hi, Math.max(lo, v));
}

/** Map a pointer event position inside the canvas to problem coordinates:
 * horizontal axis -> tweezer position, vertical axis -> amplitude (top =
 * max). */
export function mapPointer(
  problem: Problem,
  rect: { left: number; top: number; width: number; height: number },
  clientX: number,
  clientY: number,
): { x: number; amp: number } {
  const u = clamp((clientX - rect.left) / rect.width, 0, 1);
  const v = clamp((clientY - rect.top) / rect.height, 0, 1);
  const [lo, hi] = problem.domain;
  return {
    x: lo + u * (hi - lo),
    amp: problem.amp_max - v * (problem.amp_max - problem.amp_min),
  };
}
