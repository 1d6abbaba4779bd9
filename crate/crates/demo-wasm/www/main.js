import init, { beam_pattern_for_sector, localize, zc_correlation } from "./pkg/papir_demo_wasm.js";

const $ = (id) => document.getElementById(id);

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const { width, height } = canvas;
  ctx.clearRect(0, 0, width, height);
  const xs = series.flatMap((s) => s.x);
  const ys = series.flatMap((s) => s.y);
  const xmin = opts.xmin ?? Math.min(...xs);
  const xmax = opts.xmax ?? Math.max(...xs);
  const ymin = Math.min(...ys);
  const ymax = Math.max(...ys);
  const px = (x) => 40 + ((x - xmin) / (xmax - xmin || 1)) * (width - 50);
  const py = (y) => height - 20 - ((y - ymin) / (ymax - ymin || 1)) * (height - 30);

  ctx.strokeStyle = "#999";
  ctx.strokeRect(40, 10, width - 50, height - 30);
  ctx.fillStyle = "#333";
  ctx.font = "11px sans-serif";
  ctx.fillText(xmin.toFixed(0), 40, height - 5);
  ctx.fillText(xmax.toFixed(0), width - 30, height - 5);
  if (opts.ylabel) ctx.fillText(opts.ylabel, 2, 20);

  const colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
  series.forEach((s, k) => {
    ctx.strokeStyle = s.color ?? colors[k % colors.length];
    ctx.beginPath();
    s.x.forEach((x, i) => (i ? ctx.lineTo(px(x), py(s.y[i])) : ctx.moveTo(px(x), py(s.y[i]))));
    ctx.stroke();
  });
  (opts.markers ?? []).forEach((m) => {
    ctx.strokeStyle = m.color;
    ctx.beginPath();
    ctx.moveTo(px(m.x), 10);
    ctx.lineTo(px(m.x), height - 20);
    ctx.stroke();
  });
}

const db = (v) => 10 * Math.log10(Math.max(v, 1e-30));

function runPattern() {
  const gain = beam_pattern_for_sector(+$("bp-lo").value, +$("bp-hi").value, +$("bp-n").value, 1);
  const x = Array.from(gain, (_, i) => i);
  const peak = Math.max(...gain);
  const y = Array.from(gain, (g) => Math.max(db(g / peak), -40));
  plot($("bp-canvas"), [{ x, y }], {
    xmin: 0,
    xmax: 359,
    ylabel: "dB",
    markers: [
      { x: +$("bp-lo").value, color: "#aaa" },
      { x: +$("bp-hi").value, color: "#aaa" },
    ],
  });
}

function runLocalize() {
  const az = +$("loc-az").value;
  const res = JSON.parse(localize(az, +$("loc-d").value, +$("loc-n").value, +$("loc-seed").value));
  const last = res.iterations[res.iterations.length - 1];
  const series = last.spectra
    .filter((s) => s)
    .map((s) => ({ x: s.grid, y: s.values.map(db) }));
  plot($("loc-canvas"), series, {
    ylabel: "dB",
    markers: [
      { x: az, color: "#000" },
      { x: res.theta_hat, color: "#d62728" },
    ],
  });
  $("loc-out").textContent =
    res.iterations
      .map((it) => `iter ${it.iteration}: area [${it.area.map((a) => a.toFixed(2)).join(", ")}]  θ̂ = ${it.theta_hat.toFixed(4)}°`)
      .join("\n") +
    `\nestimate: θ̂ = ${res.theta_hat.toFixed(4)}°, d̂ = ${res.d_hat.toFixed(3)} m, error ${res.error_m.toFixed(3)} m, converged ${res.converged}`;
}

function runZc() {
  const u = +$("zc-u").value;
  const mag = zc_correlation(+$("zc-l").value, +$("zc-delay").value, u);
  const x = Array.from(mag, (_, i) => i / u);
  plot($("zc-canvas"), [{ x, y: Array.from(mag) }], { markers: [{ x: +$("zc-delay").value, color: "#d62728" }] });
}

function guard(f) {
  return () => {
    try {
      f();
    } catch (e) {
      alert(e);
    }
  };
}

await init();
$("bp-run").onclick = guard(runPattern);
$("loc-run").onclick = guard(runLocalize);
$("zc-run").onclick = guard(runZc);
guard(runPattern)();
guard(runZc)();
