import init, { frameView, discrepancyCurve, deltaSweep } from "./pkg/tsdetect_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
const fmt = (v) => (v === null || v === undefined ? "nan" : v.toFixed(4));

function guard(fn) {
  try {
    $("error").textContent = "";
    fn();
  } catch (e) {
    $("error").textContent = e.message ?? String(e);
  }
}

function strokeBox(ctx, s, c, color, width) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.strokeRect(c[0] * s, c[1] * s, (c[2] - c[0]) * s, (c[3] - c[1]) * s);
}

function drawFrame() {
  const req = {
    seed: num("f-seed"), rho: num("f-rho"), n_candidates: num("f-n"),
    theta: num("f-theta"), delta: num("f-delta"), nms_iou: num("f-nms"),
  };
  const v = JSON.parse(frameView(JSON.stringify(req)));
  const canvas = $("f-canvas");
  const ctx = canvas.getContext("2d");
  const s = canvas.width / v.width;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  v.candidates.forEach((c) => strokeBox(ctx, s, c.corners, "#999", 1));
  strokeBox(ctx, s, v.gt, "#2a2", 3);
  if (v.nms_kept.length) strokeBox(ctx, s, v.candidates[v.nms_kept[0]].corners, "#c22", 2);
  if (v.pac_kept.length) strokeBox(ctx, s, v.candidates[v.pac_kept[0]].corners, "#22c", 2);
  $("f-summary").textContent =
    `top-1 IoU: NMS ${fmt(v.nms_top_iou)}, PAC ${fmt(v.pac_top_iou)}`;
  const rows = v.candidates.map((c, i) =>
    `<tr><td>${i}</td><td>${fmt(c.iou_gt)}</td><td>${fmt(c.score)}</td><td>${fmt(c.enhancement)}</td>` +
    `<td>${fmt(c.suppression)}</td><td>${fmt(c.corrected)}</td></tr>`);
  $("f-table").innerHTML =
    "<tr><th>box</th><th>IoU</th><th>score</th><th>E</th><th>S</th><th>corrected</th></tr>" + rows.join("");
}

function drawCurve() {
  const pts = JSON.parse(discrepancyCurve(JSON.stringify({ n_frames: num("c-frames"), seed: num("c-seed") })));
  const canvas = $("c-canvas");
  const ctx = canvas.getContext("2d");
  const w = canvas.width, h = canvas.height, pad = 40;
  const ys = pts.flatMap((p) => [p.pac_top1_iou, p.nms_top1_iou]);
  const lo = Math.min(...ys) - 0.02, hi = Math.max(...ys) + 0.02;
  const x = (rho) => pad + ((rho + 1) / 2) * (w - 2 * pad);
  const y = (v) => h - pad - ((v - lo) / (hi - lo)) * (h - 2 * pad);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#000";
  ctx.lineWidth = 1;
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#000";
  ctx.fillText("rho -1", pad, h - pad + 15);
  ctx.fillText("rho 1", w - pad - 25, h - pad + 15);
  ctx.fillText(hi.toFixed(3), 2, pad + 4);
  ctx.fillText(lo.toFixed(3), 2, h - pad);
  for (const [key, color] of [["nms_top1_iou", "#c22"], ["pac_top1_iou", "#22c"]]) {
    ctx.strokeStyle = color;
    ctx.lineWidth = 2;
    ctx.beginPath();
    pts.forEach((p, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, x(p.rho), y(p[key])));
    ctx.stroke();
  }
}

function drawSweep() {
  const rows = JSON.parse(deltaSweep(JSON.stringify({ n_frames: num("s-frames"), rho: num("s-rho") })));
  const body = rows.map((r) =>
    `<tr><td>${r.delta === null ? "NMS" : r.delta.toFixed(2)}</td><td>${fmt(r.ap_subrange)}</td>` +
    `<td>${fmt(r.ap50)}</td><td>${fmt(r.ap75)}</td><td>${fmt(r.ap_medium)}</td><td>${fmt(r.ap_large)}</td></tr>`);
  $("s-table").innerHTML =
    "<tr><th>delta</th><th>AP 0.5-0.75</th><th>AP 0.5</th><th>AP 0.75</th><th>AP m</th><th>AP l</th></tr>" +
    body.join("");
}

await init();
for (const id of ["f-seed", "f-rho", "f-n", "f-theta", "f-delta", "f-nms"]) {
  $(id).addEventListener("input", () => guard(drawFrame));
}
$("c-run").addEventListener("click", () => guard(drawCurve));
$("s-run").addEventListener("click", () => guard(drawSweep));
guard(drawFrame);
guard(drawCurve);
guard(drawSweep);
