import init, { planar_arm, legibility, cluster } from "./pkg/demo_gauge_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => parseFloat($(id).value);
const GOAL_COLOURS = ["#1f77b4", "#2ca02c", "#d62728"];

function bind(ids, draw) {
  const update = () => {
    for (const id of ids) $(`${id}-v`).textContent = $(id).value;
    try {
      draw();
    } catch (e) {
      $("status").textContent = String(e);
      $("status").className = "error";
    }
  };
  for (const id of ids) $(id).addEventListener("input", update);
  update();
}

function clear(ctx) {
  ctx.setTransform(1, 0, 0, 1, 0, 0);
  ctx.clearRect(0, 0, ctx.canvas.width, ctx.canvas.height);
}

/// Maps data coordinates onto the canvas with a margin.
function frame(ctx, xmin, xmax, ymin, ymax) {
  const m = 24;
  const w = ctx.canvas.width - 2 * m;
  const h = ctx.canvas.height - 2 * m;
  return ([x, y]) => [m + ((x - xmin) / (xmax - xmin)) * w, m + h - ((y - ymin) / (ymax - ymin)) * h];
}

function polyline(ctx, pts, colour, width = 1.5) {
  ctx.strokeStyle = colour;
  ctx.lineWidth = width;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
  ctx.stroke();
}

function dot(ctx, [x, y], r, colour) {
  ctx.fillStyle = colour;
  ctx.beginPath();
  ctx.arc(x, y, r, 0, 2 * Math.PI);
  ctx.fill();
}

function drawArm() {
  const v = JSON.parse(planar_arm(num("l1"), num("l2"), num("q1"), num("q2")));
  const ctx = $("arm").getContext("2d");
  clear(ctx);
  const reach = num("l1") + num("l2");
  const to = frame(ctx, -reach, reach, -reach, reach);
  polyline(ctx, [to([-reach, 0]), to([reach, 0])], "#ddd", 1);
  polyline(ctx, [to([0, -reach]), to([0, reach])], "#ddd", 1);
  polyline(ctx, v.joints.map(to), "#333", 4);
  v.joints.forEach((p) => dot(ctx, to(p), 4, "#333"));

  const tip = v.joints[2];
  const scale = 0.5;
  const ring = [];
  for (let k = 0; k <= 64; k++) {
    const t = (2 * Math.PI * k) / 64;
    const a = scale * v.ellipse.major * Math.cos(t);
    const b = scale * v.ellipse.minor * Math.sin(t);
    const c = Math.cos(v.ellipse.angle);
    const s = Math.sin(v.ellipse.angle);
    ring.push(to([tip[0] + c * a - s * b, tip[1] + s * a + c * b]));
  }
  polyline(ctx, ring, "#d62728");

  const cc = $("arm-curve").getContext("2d");
  clear(cc);
  const wmax = Math.max(...v.curve_w, 1e-9);
  const toc = frame(cc, -Math.PI, Math.PI, 0, wmax * 1.05);
  polyline(cc, v.curve_q2.map((q, i) => toc([q, v.curve_w[i]])), "#1f77b4");
  dot(cc, toc([num("q2"), v.manipulability]), 4, "#d62728");

  $("arm-out").textContent =
    `manipulability ${v.manipulability.toFixed(4)}\n` +
    `ellipse axes   ${v.ellipse.major.toFixed(3)} / ${v.ellipse.minor.toFixed(3)}`;
}

function drawLegibility() {
  const v = JSON.parse(legibility(num("spread"), num("bend"), num("early")));
  const ctx = $("leg").getContext("2d");
  clear(ctx);
  const to = frame(ctx, -1, 1, -0.2, 1.2);
  polyline(ctx, v.path.map(to), "#333", 2);
  v.goals.forEach((g, i) => dot(ctx, to(g), i === v.actual ? 8 : 6, GOAL_COLOURS[i]));

  const cc = $("leg-curve").getContext("2d");
  clear(cc);
  const toc = frame(cc, 0, v.posterior.length - 1, 0, 1);
  v.goals.forEach((_, g) => polyline(cc, v.posterior.map((p, i) => toc([i, p[g]])), GOAL_COLOURS[g]));
  polyline(cc, v.entropy.map((h, i) => toc([i, h / Math.log(3)])), "#999", 1);

  $("leg-out").textContent =
    `mean entropy   ${v.metric.toFixed(4)} nats\n` +
    `final P(goal)  ${v.posterior[v.posterior.length - 1][v.actual].toFixed(3)}`;
}

function drawClusters() {
  const v = JSON.parse(cluster(num("sc"), num("si"), Math.round(num("users")), BigInt(Math.round(num("seed")))));
  const ctx = $("cl").getContext("2d");
  clear(ctx);
  const xs = v.points.map((p) => p.pc[0]);
  const ys = v.points.map((p) => p.pc[1]);
  const pad = (lo, hi) => [lo - 0.1 * (hi - lo + 1e-9), hi + 0.1 * (hi - lo + 1e-9)];
  const [x0, x1] = pad(Math.min(...xs), Math.max(...xs));
  const [y0, y1] = pad(Math.min(...ys), Math.max(...ys));
  const to = frame(ctx, x0, x1, y0, y1);
  for (const p of v.points) {
    const colour = p.consistent_label ? "#2ca02c" : "#d62728";
    dot(ctx, to(p.pc), 6, colour);
    if (p.consistent_label !== p.consistent_truth) {
      ctx.strokeStyle = "#000";
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      const [x, y] = to(p.pc);
      ctx.arc(x, y, 9, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
  $("cl-out").textContent =
    `label accuracy ${(100 * v.accuracy).toFixed(1)}%\n` +
    `PC1/PC2 share  ${(100 * v.explained[0]).toFixed(0)}% / ${(100 * v.explained[1]).toFixed(0)}%\n` +
    `green = labelled consistent\nringed = disagrees with generator`;
}

await init();
$("status").textContent = "Drag the sliders; everything is computed by the Rust core compiled to WebAssembly.";
bind(["l1", "l2", "q1", "q2"], drawArm);
bind(["spread", "bend", "early"], drawLegibility);
bind(["sc", "si", "users", "seed"], drawClusters);
