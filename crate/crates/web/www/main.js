import init, { solve_wavefield, sweep_snapshots, rank_map } from "./pkg/polarized_traces_web.js";

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };
let source = [0.5, 0.25];
let snaps = null;

function params() {
  return {
    size: Number($("size").value),
    freq: Number($("freq").value),
    model: $("model").value,
    layers: Number($("layers").value),
    cells: Number($("cells").value),
  };
}

function paint(canvas, size, rgba) {
  canvas.width = size;
  canvas.height = size;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(rgba), size, size), 0, 0);
}

// Yield to the browser so the status line repaints before a long solve.
const later = (fn) => new Promise((ok) => setTimeout(() => ok(fn()), 20));

async function solve() {
  const p = params();
  status("Solving…");
  try {
    const w = await later(() => solve_wavefield(p.size, p.freq, p.model, p.layers, p.cells, source[0], source[1]));
    paint($("field"), w.size(), w.rgba());
    status(`${w.iterations()} GMRES iterations, relative residual ${w.residual().toExponential(2)}`);
    w.free();
  } catch (e) {
    status(`Error: ${e.message ?? e}`);
  }
}

function showFrame(k) {
  if (!snaps) return;
  paint($("snapshots"), snaps.size(), snaps.rgba(k));
  const last = snaps.count() - 1;
  const label = k === 0 ? "local solves only" : k === last ? "converged" : `iteration ${k}`;
  $("frame-info").textContent = `${label}, distance to converged ${snaps.distance(k).toExponential(2)}`;
}

async function snapshots() {
  const p = params();
  status("Computing snapshots…");
  try {
    if (snaps) snaps.free();
    snaps = await later(() => sweep_snapshots(p.size, p.freq, p.model, p.layers, source[0], source[1]));
    $("frame").max = snaps.count() - 1;
    $("frame").value = 0;
    $("frame").disabled = false;
    showFrame(0);
    status(`${snaps.count()} snapshots`);
  } catch (e) {
    status(`Error: ${e.message ?? e}`);
  }
}

async function ranks() {
  const p = params();
  status("Compressing…");
  try {
    const m = await later(() => rank_map(p.size, p.freq, p.model, Number($("eps").value)));
    const canvas = $("rankmap");
    const scale = Math.max(1, Math.floor(384 / m.dim()));
    canvas.width = canvas.height = m.dim() * scale;
    canvas.style.width = canvas.style.height = `${m.dim() * scale}px`;
    const ctx = canvas.getContext("2d");
    const leaves = m.leaves();
    for (let i = 0; i < leaves.length; i += 5) {
      const [r, c, rows, cols, rank] = leaves.slice(i, i + 5);
      const fill = rank / Math.min(rows, cols);
      const shade = Math.round(255 * (1 - fill));
      ctx.fillStyle = `rgb(255, ${shade}, ${shade})`;
      ctx.fillRect(c * scale, r * scale, cols * scale, rows * scale);
      ctx.strokeStyle = "#333";
      ctx.strokeRect(c * scale + 0.5, r * scale + 0.5, cols * scale - 1, rows * scale - 1);
      if (rows * scale > 14 && cols * scale > 14) {
        ctx.fillStyle = "#000";
        ctx.fillText(String(rank), c * scale + 3, r * scale + 12);
      }
    }
    $("rank-info").textContent =
      `${m.dim()}×${m.dim()}, stored ${(100 * m.ratio()).toFixed(1)}% of dense, max rank ${m.max_rank()}`;
    status("Done");
    m.free();
  } catch (e) {
    status(`Error: ${e.message ?? e}`);
  }
}

$("field").addEventListener("click", (ev) => {
  const r = ev.target.getBoundingClientRect();
  source = [(ev.clientX - r.left) / r.width, (ev.clientY - r.top) / r.height];
  solve();
});
$("frame").addEventListener("input", (ev) => showFrame(Number(ev.target.value)));
$("snap").addEventListener("click", snapshots);
$("ranks").addEventListener("click", ranks);
for (const id of ["size", "freq", "model", "layers", "cells"]) $(id).addEventListener("change", solve);

await init();
solve();
