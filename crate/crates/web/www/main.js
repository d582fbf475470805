import init, { burgersProfile, burgersShockTime, heatmap2d, heatmapShockTime, Tasep } from "./pkg/eqpert_web.js";

const $ = (id) => document.getElementById(id);

function plotLines(canvas, series, range) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  ctx.clearRect(0, 0, w, h);
  const y = (v) => h / 2 - (v / range) * (h / 2 - 8);
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(0, y(0));
  ctx.lineTo(w, y(0));
  ctx.stroke();
  for (const { values, color, steps } of series) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    const dx = w / values.length;
    values.forEach((v, i) => {
      const x0 = steps ? i * dx : (i + 0.5) * dx;
      if (i === 0) ctx.moveTo(x0, y(v));
      else ctx.lineTo(x0, y(v));
      if (steps) ctx.lineTo(x0 + dx, y(v));
    });
    ctx.stroke();
  }
}

function burgersView() {
  const amp = +$("b-amp").value;
  const shock = burgersShockTime(amp);
  const s = +$("b-time").value * shock;
  $("b-amp-v").value = amp.toFixed(2);
  $("b-time-v").value = `s = ${s.toFixed(3)} (shock at ${shock.toFixed(3)})`;
  const values = burgersProfile(amp, s, 512);
  plotLines($("b-canvas"), [{ values, color: "#333" }], 0.55);
}

let tasep = null;
let running = false;
const CELLS = 32;

function tasepReset() {
  tasep?.free();
  tasep = new Tasep(+$("t-n").value, 0.5, 0.25, 0.2, 1.0, BigInt($("t-seed").value || 0));
  running = false;
  $("t-start").textContent = "start";
  tasepDraw();
}

function tasepDraw() {
  $("t-time").value = `t = ${tasep.time().toFixed(4)} of ${tasep.shockHorizon().toFixed(4)}`;
  plotLines($("t-canvas"), [
    { values: tasep.fluctuation(CELLS), color: "#1f77b4", steps: true },
    { values: tasep.prediction(CELLS), color: "#d62728" },
  ], 2.0);
}

function tasepLoop() {
  if (!running) return;
  const horizon = tasep.shockHorizon();
  const dt = horizon / 400;
  if (tasep.time() + dt >= 0.98 * horizon) {
    running = false;
    $("t-start").textContent = "start";
    return;
  }
  tasep.step(dt);
  tasepDraw();
  requestAnimationFrame(tasepLoop);
}

function heatmapView() {
  const drift = +$("h-drift").value;
  const shock = heatmapShockTime(0.3, drift);
  const s = +$("h-time").value * (Number.isFinite(shock) ? shock : 1);
  $("h-drift-v").value = drift.toFixed(2);
  $("h-time-v").value = `s = ${s.toFixed(3)}`;
  const side = 80;
  const values = heatmap2d(0.3, drift, s, side);
  const canvas = $("h-canvas");
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(side, side);
  values.forEach((v, k) => {
    // Row j of the grid is u_2 = j / side; draw it bottom-up.
    const i = k % side, j = Math.floor(k / side);
    const p = 4 * ((side - 1 - j) * side + i);
    const t = Math.max(-1, Math.min(1, v / 0.3));
    img.data[p] = t > 0 ? 255 : Math.round(255 * (1 + t));
    img.data[p + 1] = Math.round(255 * (1 - Math.abs(t)));
    img.data[p + 2] = t < 0 ? 255 : Math.round(255 * (1 - t));
    img.data[p + 3] = 255;
  });
  const tmp = new OffscreenCanvas(side, side);
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

await init();
for (const id of ["b-amp", "b-time"]) $(id).addEventListener("input", burgersView);
for (const id of ["h-drift", "h-time"]) $(id).addEventListener("input", heatmapView);
$("t-reset").addEventListener("click", tasepReset);
$("t-n").addEventListener("change", tasepReset);
$("t-start").addEventListener("click", () => {
  running = !running;
  $("t-start").textContent = running ? "pause" : "start";
  tasepLoop();
});
burgersView();
heatmapView();
tasepReset();
