/** Wire types for the tweezerlab scoring service. */

export interface ProtocolStep {
  x: number;
  amp: number;
}

export interface ProtocolDoc {
  duration: number;
  steps: ProtocolStep[];
}

export interface Problem {
  mass: number;
  fixed_amplitude: number;
  sigma: number;
  x_start: number;
  x_end: number;
  amp_min: number;
  amp_max: number;
  domain: [number, number];
  time_per_step: number;
  duration_range: [number, number];
  max_steps: number;
  render_grid: number;
  fixed_potential: number[];
  qsl_threshold: number;
}

export interface Frame {
  step: number;
  density: number[];
}

export interface ScoreResult {
  fidelity: number;
  qsl_pass: boolean;
  frames?: Frame[];
  excitation?: number[][];
}

export interface SubmitResult {
  entry_id: string;
  fidelity: number;
  qsl_pass: boolean;
}

export type LeaderboardSource = "human" | "sa" | "grape" | "krotov" | "cd-file";

export interface LeaderboardEntry {
  entry_id: string;
  name: string;
  source: string;
  duration: number;
  fidelity: number;
}
