import init, { mollifier_curves, shape_mesh, fit } from "./pkg/lsrecon_web.js";

const $ = (id) => document.getElementById(id);

function axes(ctx, w, h) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#ccc";
  ctx.lineWidth = 1;
  ctx.strokeRect(0.5, 0.5, w - 1, h - 1);
}

// Polyline of (x, y) pairs mapped from the given data box.
function plot(ctx, pts, box, w, h, color) {
  const [x0, x1, y0, y1] = box;
  const pad = 20;
  const sx = (x) => pad + ((x - x0) / (x1 - x0)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(sx(x), sy(y)) : ctx.moveTo(sx(x), sy(y))));
  ctx.stroke();
}

function drawCurves() {
  const eps = parseFloat($("eps").value);
  $("eps-val").textContent = eps.toFixed(2);
  const s = mollifier_curves(eps, 201);
  const delta = [], heav = [];
  for (let i = 0; i < s.length; i += 3) {
    delta.push([s[i], s[i + 1]]);
    heav.push([s[i], s[i + 2]]);
  }
  const c = $("curves"), ctx = c.getContext("2d");
  axes(ctx, c.width, c.height);
  const peak = 1 / eps;
  plot(ctx, delta, [-2 * eps, 2 * eps, 0, peak], c.width, c.height, "#c33");
  plot(ctx, heav, [-2 * eps, 2 * eps, 0, 1], c.width, c.height, "#36c");
  ctx.fillStyle = "#333";
  ctx.fillText(`delta (red, peak ${peak.toFixed(2)})   H (blue, 0..1)   x in [-2eps, 2eps]`, 24, 14);
}

// Flat-shaded triangle soup, painter's algorithm, drag to rotate.
class MeshView {
  constructor(canvas) {
    this.canvas = canvas;
    this.ctx = canvas.getContext("2d");
    this.soup = new Float32Array();
    this.yaw = 0.6;
    this.pitch = -0.4;
    let last = null;
    canvas.addEventListener("pointerdown", (e) => { last = [e.clientX, e.clientY]; canvas.setPointerCapture(e.pointerId); });
    canvas.addEventListener("pointerup", () => { last = null; });
    canvas.addEventListener("pointermove", (e) => {
      if (!last) return;
      this.yaw += (e.clientX - last[0]) * 0.01;
      this.pitch += (e.clientY - last[1]) * 0.01;
      last = [e.clientX, e.clientY];
      this.draw();
    });
  }

  set(soup) {
    this.soup = soup;
    this.draw();
  }

  draw() {
    const { ctx, canvas, soup } = this;
    const w = canvas.width, h = canvas.height, scale = 0.45 * Math.min(w, h);
    ctx.clearRect(0, 0, w, h);
    const cy = Math.cos(this.yaw), sy = Math.sin(this.yaw);
    const cp = Math.cos(this.pitch), sp = Math.sin(this.pitch);
    const rot = (x, y, z) => {
      const x1 = cy * x + sy * z, z1 = -sy * x + cy * z;
      return [x1, cp * y - sp * z1, sp * y + cp * z1];
    };
    const tris = [];
    for (let i = 0; i < soup.length; i += 9) {
      const a = rot(soup[i], soup[i + 1], soup[i + 2]);
      const b = rot(soup[i + 3], soup[i + 4], soup[i + 5]);
      const c = rot(soup[i + 6], soup[i + 7], soup[i + 8]);
      const u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
      const v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
      const n = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
      const len = Math.hypot(n[0], n[1], n[2]) || 1;
      const shade = Math.abs(n[2] / len) * 0.8 + 0.2;
      tris.push([a, b, c, (a[2] + b[2] + c[2]) / 3, shade]);
    }
    tris.sort((p, q) => p[3] - q[3]);
    for (const [a, b, c, , shade] of tris) {
      const g = Math.round(255 * shade);
      ctx.fillStyle = ctx.strokeStyle = `rgb(${Math.round(g * 0.55)},${Math.round(g * 0.75)},${g})`;
      ctx.beginPath();
      ctx.moveTo(w / 2 + scale * a[0], h / 2 - scale * a[1]);
      ctx.lineTo(w / 2 + scale * b[0], h / 2 - scale * b[1]);
      ctx.lineTo(w / 2 + scale * c[0], h / 2 - scale * c[1]);
      ctx.closePath();
      ctx.fill();
      ctx.stroke();
    }
  }
}

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.classList.add("error");
}

function clearError(el, text) {
  el.textContent = text;
  el.classList.remove("error");
}

function extract(view) {
  const iso = parseFloat($("mc-iso").value);
  $("mc-iso-val").textContent = iso.toFixed(2);
  try {
    const soup = shape_mesh($("mc-shape").value, parseInt($("mc-res").value, 10), iso);
    clearError($("mc-status"), `${soup.length / 9} triangles`);
    view.set(soup);
  } catch (e) {
    showError($("mc-status"), e);
  }
}

function drawSlice(canvas, res, values) {
  const ctx = canvas.getContext("2d");
  const img = ctx.createImageData(res, res);
  const m = Math.max(...values.map(Math.abs)) || 1;
  for (let j = 0; j < res; j++) {
    for (let i = 0; i < res; i++) {
      const v = values[j * res + i] / m;
      const o = 4 * ((res - 1 - j) * res + i);
      // Inside (positive) red, outside blue, the zero set dark.
      const t = Math.min(1, Math.abs(v) * 4);
      img.data[o] = v > 0 ? 255 : Math.round(255 * (1 - t));
      img.data[o + 1] = Math.round(255 * (1 - t) * 0.9 + 20);
      img.data[o + 2] = v > 0 ? Math.round(255 * (1 - t)) : 255;
      img.data[o + 3] = 255;
    }
  }
  const tmp = document.createElement("canvas");
  tmp.width = tmp.height = res;
  tmp.getContext("2d").putImageData(img, 0, 0);
  ctx.imageSmoothingEnabled = false;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function runFit(view) {
  const status = $("fit-status");
  clearError(status, "fitting...");
  // Let the status repaint before the blocking call.
  setTimeout(() => {
    try {
      const r = fit(
        $("fit-shape").value,
        parseInt($("fit-res").value, 10),
        parseInt($("fit-iters").value, 10),
        parseInt($("fit-points").value, 10),
        parseFloat($("fit-a3").value),
        parseFloat($("fit-a4").value),
        0n,
      );
      const hist = r.history();
      const pts = [];
      for (let i = 0; i < hist.length; i += 2) pts.push([hist[i], hist[i + 1]]);
      const totals = pts.map((p) => p[1]);
      const c = $("fit-loss"), ctx = c.getContext("2d");
      axes(ctx, c.width, c.height);
      plot(ctx, pts, [0, Math.max(1, pts[pts.length - 1][0]), Math.min(...totals), Math.max(...totals)], c.width, c.height, "#333");
      ctx.fillStyle = "#333";
      ctx.fillText(`total loss ${totals[0].toFixed(4)} -> ${totals[totals.length - 1].toFixed(4)}`, 24, 14);
      drawSlice($("fit-slice"), r.res, Array.from(r.slice()));
      view.set(r.mesh());
      clearError(status, `${r.iterations} iterations, stopped: ${r.stop}`);
      r.free();
    } catch (e) {
      showError(status, e);
    }
  }, 10);
}

await init();
drawCurves();
$("eps").addEventListener("input", drawCurves);

const mcView = new MeshView($("mc-view"));
for (const id of ["mc-shape", "mc-res", "mc-iso"]) $(id).addEventListener("input", () => extract(mcView));
extract(mcView);

const fitView = new MeshView($("fit-view"));
$("fit-run").addEventListener("click", () => runFit(fitView));
