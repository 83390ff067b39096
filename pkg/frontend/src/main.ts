/** Browser entry point: wires the controller to the DOM and canvas. */

import { Client } from "./api.js";
import { GameController, mapPointer, type Phase } from "./game.js";
import type { Frame, Problem, ProtocolDoc, ScoreResult } from "./types.js";

const API_BASE = (window as { TWEEZERLAB_API?: string }).TWEEZERLAB_API ?? "";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function drawScene(
  ctx: CanvasRenderingContext2D,
  problem: Problem,
  density: number[] | null,
  tweezer: { x: number; amp: number } | null,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  const [lo, hi] = problem.domain;
  const toPx = (x: number) => ((x - lo) / (hi - lo)) * width;

  // potential landscape: fixed well plus (optionally) the control tweezer
  const grid = problem.fixed_potential.length;
  const depth = problem.fixed_amplitude + problem.amp_max;
  ctx.beginPath();
  for (let i = 0; i < grid; i += 1) {
    const x = lo + ((hi - lo) * i) / (grid - 1);
    let v = problem.fixed_potential[i]!;
    if (tweezer) {
      const d = x - tweezer.x;
      v -= tweezer.amp * Math.exp(-(d * d) / (2 * problem.sigma ** 2));
    }
    const y = height * (0.15 - v / depth) * 0.8;
    if (i === 0) ctx.moveTo(toPx(x), y);
    else ctx.lineTo(toPx(x), y);
  }
  ctx.strokeStyle = "#888";
  ctx.stroke();

  if (density) {
    const peak = Math.max(...density, 1e-12);
    ctx.beginPath();
    for (let i = 0; i < density.length; i += 1) {
      const x = lo + ((hi - lo) * i) / (density.length - 1);
      const y = height - (density[i]! / peak) * height * 0.5 - 4;
      if (i === 0) ctx.moveTo(toPx(x), y);
      else ctx.lineTo(toPx(x), y);
    }
    ctx.strokeStyle = "#2b7de9";
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.lineWidth = 1;
  }
}

async function boot(): Promise<void> {
  const client = new Client(API_BASE);
  const problem = await client.problem();

  const canvas = el<HTMLCanvasElement>("scene");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("canvas 2d context unavailable");
  const status = el<HTMLElement>("status");
  const result = el<HTMLElement>("result");
  const durationInput = el<HTMLInputElement>("duration");
  const [dLo, dHi] = problem.duration_range;
  durationInput.min = String(dLo);
  durationInput.max = String(dHi);

  const view = {
    setPhase(phase: Phase) {
      document.body.dataset.phase = phase;
      el<HTMLButtonElement>("retry").hidden = phase !== "error";
      el<HTMLButtonElement>("submit").hidden = phase !== "done";
    },
    setStatus(message: string) {
      status.textContent = message;
    },
    showResult(score: ScoreResult, protocol: ProtocolDoc) {
      const verdict = score.qsl_pass ? "past the quantum speed limit!" : "";
      result.textContent =
        `fidelity ${score.fidelity.toFixed(4)} at T=${protocol.duration} ${verdict}`;
      controller.playback((cb) => requestAnimationFrame(cb));
    },
    drawFrame(p: Problem, frame: Frame, tweezer: { x: number; amp: number }) {
      drawScene(ctx, p, frame.density, tweezer);
    },
  };

  const controller = new GameController(client, problem, view);
  drawScene(ctx, problem, null, { x: problem.x_start, amp: problem.amp_max });

  let timer = 0;
  el<HTMLButtonElement>("start").addEventListener("click", () => {
    const duration = Number(durationInput.value);
    const playSeconds = 5;
    controller.start(duration, playSeconds, performance.now());
    status.textContent = "drag the tweezer — carry the atom home";
    window.clearTimeout(timer);
    timer = window.setTimeout(() => void controller.finish(), playSeconds * 1000);
  });
  el<HTMLButtonElement>("retry").addEventListener("click", () => {
    void controller.retry();
  });
  el<HTMLButtonElement>("submit").addEventListener("click", () => {
    const name = el<HTMLInputElement>("player").value || "anonymous";
    void controller.submitScore(name).then(refreshLeaderboard);
  });

  const onPointer = (ev: PointerEvent) => {
    const rect = canvas.getBoundingClientRect();
    const mapped = mapPointer(problem, rect, ev.clientX, ev.clientY);
    controller.pointer(performance.now(), mapped.x, mapped.amp);
    if (controller.phase === "recording") {
      drawScene(ctx, problem, null, mapped);
    }
  };
  canvas.addEventListener("pointermove", onPointer);
  canvas.addEventListener("pointerdown", onPointer);

  const board = el<HTMLElement>("leaderboard");
  async function refreshLeaderboard(): Promise<void> {
    const entries = await client.leaderboard();
    board.innerHTML = "";
    for (const entry of entries) {
      const row = document.createElement("li");
      row.textContent =
        `${entry.fidelity.toFixed(4)}  ${entry.name} (${entry.source}, T=${entry.duration})`;
      board.appendChild(row);
    }
  }
  await refreshLeaderboard();
}

void boot().catch((err) => {
  const status = document.getElementById("status");
  if (status) status.textContent = `failed to reach the scoring service: ${err}`;
});
