import init, { intervals, coverage_sweep, exact_laws } from "./pkg/conformal_ope_demo.js";

const COLORS = { pinball: "#1f77b4", double_quantile: "#d62728", shifted_values: "#2ca02c",
  qis_bootstrap: "#9467bd", standard_cp: "#ff7f0e", truth: "#000000" };
const PAD = 44;

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

function params() {
  const n = Number($("num").value);
  return JSON.stringify({
    capacity: Number($("capacity").value),
    horizon: Number($("horizon").value),
    epsilon: Number($("epsilon").value),
    epsilon_b: Number($("epsilon_b").value),
    alpha: Number($("alpha").value),
    num_train: n,
    num_cal: n,
    seed: Number($("seed").value),
    estimator: $("estimator").value,
  });
}

function legend(id, names) {
  $(id).innerHTML = names.map((n) => `<span style="color:${COLORS[n]}">■ ${n}</span>`).join("");
}

function frame(canvas, xmin, xmax, ymin, ymax, xlabel, ylabel) {
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height;
  ctx.clearRect(0, 0, w, h);
  if (ymax - ymin < 1e-9) { ymin -= 0.5; ymax += 0.5; }
  if (xmax - xmin < 1e-9) { xmin -= 0.5; xmax += 0.5; }
  const px = (x) => PAD + (x - xmin) / (xmax - xmin) * (w - 2 * PAD);
  const py = (y) => h - PAD - (y - ymin) / (ymax - ymin) * (h - 2 * PAD);
  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(PAD, PAD); ctx.lineTo(PAD, h - PAD); ctx.lineTo(w - PAD, h - PAD);
  ctx.stroke();
  ctx.fillStyle = "#000";
  ctx.font = "11px sans-serif";
  for (let i = 0; i <= 4; i++) {
    const fx = xmin + (xmax - xmin) * i / 4, fy = ymin + (ymax - ymin) * i / 4;
    ctx.fillText(fx.toFixed(2), px(fx) - 12, h - PAD + 14);
    ctx.fillText(fy.toFixed(2), 2, py(fy) + 4);
  }
  ctx.fillText(xlabel, w / 2 - 30, h - 8);
  ctx.fillText(ylabel, 2, PAD - 12);
  return { ctx, px, py };
}

function drawIntervals(rows) {
  const methods = [...new Set(rows.map((r) => r.method))];
  const states = [...new Set(rows.map((r) => r.state))];
  const ys = rows.flatMap((r) => [r.lower, r.upper, r.target_lo, r.target_hi]).filter((v) => v !== null);
  const { ctx, px, py } = frame($("intervals"), -0.5, states.length - 0.5,
    Math.min(...ys), Math.max(...ys), "start state", "return");
  const k = methods.length + 1;
  const slot = 0.8 / k;
  for (const r of rows) {
    const i = methods.indexOf(r.method);
    const x = px(r.state - 0.4 + slot * (i + 0.5));
    if (r.lower !== null) bar(ctx, x, py(r.lower), py(r.upper), COLORS[r.method]);
    if (i === 0) {
      const xt = px(r.state - 0.4 + slot * (k - 0.5));
      bar(ctx, xt, py(r.target_lo), py(r.target_hi), COLORS.truth);
    }
  }
  legend("legend-intervals", [...methods, "truth"]);
}

function bar(ctx, x, top, bottom, color) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(x, top); ctx.lineTo(x, bottom);
  ctx.moveTo(x - 4, top); ctx.lineTo(x + 4, top);
  ctx.moveTo(x - 4, bottom); ctx.lineTo(x + 4, bottom);
  ctx.stroke();
}

function drawSweep(points, alpha) {
  const methods = [...new Set(points.map((p) => p.method))];
  const xs = points.map((p) => p.epsilon);
  const ys = points.map((p) => p.coverage).concat([1 - alpha, 1]);
  const { ctx, px, py } = frame($("sweep"), Math.min(...xs), Math.max(...xs),
    Math.min(...ys) - 0.02, 1.0, "target ε", "coverage");
  ctx.setLineDash([6, 4]);
  ctx.strokeStyle = "#000";
  ctx.beginPath();
  ctx.moveTo(PAD, py(1 - alpha)); ctx.lineTo($("sweep").width - PAD, py(1 - alpha));
  ctx.stroke();
  ctx.setLineDash([]);
  for (const m of methods) {
    const pts = points.filter((p) => p.method === m).sort((a, b) => a.epsilon - b.epsilon);
    ctx.strokeStyle = COLORS[m];
    ctx.lineWidth = 2;
    ctx.beginPath();
    pts.forEach((p, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, px(p.epsilon), py(p.coverage)));
    ctx.stroke();
  }
  legend("legend-sweep", methods);
}

function drawLaws(laws) {
  const { support, behavior, target } = laws;
  const ymax = Math.max(...behavior, ...target);
  const { ctx, px, py } = frame($("laws"), support[0] - 1, support[support.length - 1] + 1,
    0, ymax, "return", "probability");
  const half = Math.max(1, (px(support[0] + 1) - px(support[0])) * 0.35);
  support.forEach((y, i) => {
    ctx.fillStyle = COLORS.double_quantile;
    ctx.fillRect(px(y) - half, py(behavior[i]), half, py(0) - py(behavior[i]));
    ctx.fillStyle = COLORS.pinball;
    ctx.fillRect(px(y), py(target[i]), half, py(0) - py(target[i]));
  });
  $("legend-laws").innerHTML =
    `<span style="color:${COLORS.double_quantile}">■ behavior</span><span style="color:${COLORS.pinball}">■ target</span>`;
}

function guarded(fn) {
  return () => {
    status("running…");
    setTimeout(() => {
      const t0 = performance.now();
      try {
        fn();
        status(`done in ${((performance.now() - t0) / 1000).toFixed(2)} s`);
      } catch (e) {
        status(`error: ${e}`);
      }
    }, 10);
  };
}

await init();
$("run-intervals").onclick = guarded(() => drawIntervals(JSON.parse(intervals(params()))));
$("run-sweep").onclick = guarded(() => drawSweep(JSON.parse(coverage_sweep(params())), Number($("alpha").value)));
$("run-laws").onclick = guarded(() => drawLaws(JSON.parse(exact_laws(params(), Number($("state").value)))));
status("ready");
