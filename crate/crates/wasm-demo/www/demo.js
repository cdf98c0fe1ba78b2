import init, { effect_curve, weight_profile, confounding_sweep } from "./pkg/targeting_wasm.js";

const COLORS = { risk: "#1f77b4", treatment_effect: "#d62728", random: "#2ca02c", truth: "#999" };
const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function extent(values) {
  let lo = Infinity, hi = -Infinity;
  for (const v of values) { if (v < lo) lo = v; if (v > hi) hi = v; }
  if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
  return [lo, hi];
}

// Draws series {x, y, lo?, hi?, color, dash?} with shared axes.
function plot(canvas, series, xLabel, yLabel) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height, L = 60, R = 20, T = 15, B = 40;
  ctx.clearRect(0, 0, W, H);
  const xs = extent(series.flatMap((s) => s.x));
  const ys = extent(series.flatMap((s) => [...s.y, ...(s.lo || []), ...(s.hi || [])]));
  const sx = (x) => L + ((x - xs[0]) / (xs[1] - xs[0])) * (W - L - R);
  const sy = (y) => T + (1 - (y - ys[0]) / (ys[1] - ys[0])) * (H - T - B);

  ctx.strokeStyle = "#000"; ctx.lineWidth = 1; ctx.setLineDash([]);
  ctx.strokeRect(L, T, W - L - R, H - T - B);
  if (ys[0] < 0 && ys[1] > 0) {
    ctx.setLineDash([4, 3]); ctx.strokeStyle = "#777";
    ctx.beginPath(); ctx.moveTo(L, sy(0)); ctx.lineTo(W - R, sy(0)); ctx.stroke();
    ctx.setLineDash([]);
  }
  ctx.fillStyle = "#000"; ctx.font = "12px sans-serif";
  ctx.fillText(xLabel, W / 2 - 30, H - 8);
  ctx.fillText(xs[0].toFixed(2), L, H - B + 14);
  ctx.fillText(xs[1].toFixed(2), W - R - 30, H - B + 14);
  ctx.fillText(ys[1].toFixed(2), 5, T + 10);
  ctx.fillText(ys[0].toFixed(2), 5, H - B);
  ctx.save(); ctx.translate(14, H / 2 + 30); ctx.rotate(-Math.PI / 2); ctx.fillText(yLabel, 0, 0); ctx.restore();

  for (const s of series) {
    if (s.lo) {
      ctx.globalAlpha = 0.18; ctx.fillStyle = s.color; ctx.beginPath();
      s.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.hi[i])) : ctx.moveTo(sx(x), sy(s.hi[i]))));
      for (let i = s.x.length - 1; i >= 0; i--) ctx.lineTo(sx(s.x[i]), sy(s.lo[i]));
      ctx.closePath(); ctx.fill(); ctx.globalAlpha = 1;
    }
    ctx.strokeStyle = s.color; ctx.lineWidth = s.width || 2; ctx.setLineDash(s.dash || []);
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(s.y[i])) : ctx.moveTo(sx(x), sy(s.y[i]))));
    ctx.stroke();
  }
  ctx.setLineDash([]);
}

function timed(statusId, f) {
  $(statusId).textContent = "running...";
  setTimeout(() => {
    const t0 = performance.now();
    try {
      f();
      $(statusId).textContent = `${((performance.now() - t0) / 1000).toFixed(2)} s`;
    } catch (e) {
      $(statusId).textContent = `error: ${e}`;
    }
  }, 10);
}

function runCurve() {
  timed("c-status", () => {
    const r = JSON.parse(effect_curve(num("c-n"), num("c-rho"), num("c-win"), BigInt(num("c-seed"))));
    plot($("c-plot"), [
      { x: r.b, y: r.true_tau, color: COLORS.truth, width: 1, dash: [2, 2] },
      { x: r.b, y: r.tau_hat, lo: r.ci_lo, hi: r.ci_hi, color: COLORS.treatment_effect },
    ], "baseline risk", "treatment effect");
  });
}

function runWeights() {
  const alpha = num("w-alpha");
  $("w-alpha-v").textContent = alpha.toFixed(2);
  const r = JSON.parse(weight_profile(alpha));
  $("w-ratio").textContent = `w75 / w25 = ${r.ratio_75_25.toFixed(3)}`;
  plot($("w-plot"), [{ x: r.p, y: r.w, color: COLORS.risk }], "risk percentile", "weight");
}

function runSweep() {
  timed("s-status", () => {
    const r = JSON.parse(confounding_sweep(num("s-n"), num("s-rho"), num("s-budget"), num("s-reps"), BigInt(num("s-seed"))));
    const k = r.k.map((v) => 100 * v);
    const series = ["risk", "treatment_effect", "random"].map((p) => ({
      x: k,
      y: r[p].map((c) => c.value),
      lo: r[p].map((c) => c.lo),
      hi: r[p].map((c) => c.hi),
      color: COLORS[p],
    }));
    plot($("s-plot"), series, "data removed, k (%)", "policy value");
  });
}

await init();
$("c-rho").addEventListener("input", () => ($("c-rho-v").textContent = $("c-rho").value));
$("c-run").addEventListener("click", runCurve);
$("w-alpha").addEventListener("input", runWeights);
$("s-run").addEventListener("click", runSweep);
runWeights();
runCurve();
