import init, { Demo } from "./pkg/magpack_demo.js";

const ROW = 7;
const N = 160;
const $ = (id) => document.getElementById(id);

const defaults = {
  sine_field_2d: '{"a": 0.2, "torsional": 1.0}',
  constant_b_2d: '{"b": 1.0, "omega": [1.0, 1.0]}',
  combo_2d: '{"a": 0.3, "omega": [1.0, 0.5], "delta": 0.2, "freq": 2.0}',
};

let demo = null;
let rows = null;

function status(msg) {
  $("status").textContent = msg || "";
}

function num(id) {
  return parseFloat($(id).value);
}

// Sequential colour map from white to dark blue.
function shade(v) {
  const s = Math.max(0, Math.min(1, v));
  return [255 - 220 * s, 255 - 180 * s, 255 - 60 * s];
}

function heatmap(canvas, values, n) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(n, n);
  let max = 0;
  for (let i = 0; i < n * n; i++) max = Math.max(max, values[i]);
  for (let i = 0; i < n * n; i++) {
    const [r, g, b] = shade(max > 0 ? values[i] / max : 0);
    img.data.set([r, g, b, 255], 4 * i);
  }
  const off = new OffscreenCanvas(n, n);
  off.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function drawTrajectory(t) {
  const c = $("traj");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const span = 3;
  const px = (x) => ((x + span) / (2 * span)) * c.width;
  const py = (y) => ((span - y) / (2 * span)) * c.height;
  ctx.strokeStyle = "#ddd";
  ctx.beginPath();
  ctx.moveTo(px(0), 0); ctx.lineTo(px(0), c.height);
  ctx.moveTo(0, py(0)); ctx.lineTo(c.width, py(0));
  ctx.stroke();
  ctx.strokeStyle = "#1f4e9c";
  ctx.beginPath();
  let marker = null;
  for (let k = 0; k < rows.length / ROW; k++) {
    const r = rows.subarray(k * ROW, (k + 1) * ROW);
    const x = px(r[1]), y = py(r[2]);
    if (k === 0) ctx.moveTo(x, y); else ctx.lineTo(x, y);
    if (marker === null && r[0] >= t) marker = [x, y];
  }
  ctx.stroke();
  if (marker) {
    ctx.fillStyle = "#c33";
    ctx.beginPath();
    ctx.arc(marker[0], marker[1], 4, 0, 2 * Math.PI);
    ctx.fill();
  }
}

function snapshot() {
  if (!demo) return;
  const t = num("t") * num("tfinal");
  $("tval").textContent = t.toFixed(2);
  try {
    drawTrajectory(t);
    heatmap($("dens"), demo.density(t, N, 3.0), N);
    const eps = num("eps");
    const w = demo.wigner(t, parseInt($("axis").value, 10), N, 6 * Math.sqrt(eps));
    heatmap($("wig"), w, N);
    const b = w.subarray(N * N);
    const last = rows.subarray(rows.length - ROW);
    const drift = Math.abs(last[6] - rows[6]);
    $("readout").textContent =
      `q ∈ [${b[0].toFixed(2)}, ${b[1].toFixed(2)}], p ∈ [${b[2].toFixed(2)}, ${b[3].toFixed(2)}]; ` +
      `energy drift over [0, T]: ${drift.toExponential(2)}`;
    status("");
  } catch (e) {
    status(String(e));
  }
}

function rebuild() {
  try {
    demo = new Demo($("field").value, $("params").value, num("eps"),
      num("q1"), num("q2"), num("p1"), num("p2"));
    rows = demo.trajectory(num("tfinal"), 400);
    snapshot();
  } catch (e) {
    demo = null;
    status(String(e));
  }
}

await init();
$("field").addEventListener("change", () => {
  $("params").value = defaults[$("field").value];
  rebuild();
});
for (const id of ["params", "eps", "q1", "q2", "p1", "p2", "tfinal"]) {
  $(id).addEventListener("change", rebuild);
}
$("t").addEventListener("input", snapshot);
$("axis").addEventListener("change", snapshot);
rebuild();
