import init, { solve_springs, ResponseExplorer, TrackingDemo } from "../pkg/dpt_browser.js";

const $ = (id) => document.getElementById(id);

function putRgba(canvas, rgba, width, height, scale = 2) {
  const src = document.createElement("canvas");
  src.width = width;
  src.height = height;
  src.getContext("2d").putImageData(new ImageData(new Uint8ClampedArray(rgba), width, height), 0, 0);
  canvas.width = width * scale;
  canvas.height = height * scale;
  const ctx = canvas.getContext("2d");
  ctx.imageSmoothingEnabled = false;
  ctx.drawImage(src, 0, 0, canvas.width, canvas.height);
  return ctx;
}

function strokeBox(ctx, b, color, scale = 2) {
  ctx.strokeStyle = color;
  ctx.lineWidth = 2;
  ctx.strokeRect(b[0] * scale, b[1] * scale, b[2] * scale, b[3] * scale);
}

function drawSprings(s) {
  const canvas = $("sp-layout");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const groups = [s.nodes(), s.anchors(), s.ida_positions(), s.cgd_positions()];
  const all = groups.flatMap((g) => Array.from(g));
  const xs = all.filter((_, i) => i % 2 === 0);
  const ys = all.filter((_, i) => i % 2 === 1);
  const lo = [Math.min(...xs), Math.min(...ys)];
  const span = Math.max(Math.max(...xs) - lo[0], Math.max(...ys) - lo[1], 1e-9);
  const px = (p, i) => [20 + ((p[2 * i] - lo[0]) / span) * 280, 20 + ((p[2 * i + 1] - lo[1]) / span) * 280];
  const links = s.links();
  const ida = s.ida_positions();
  ctx.strokeStyle = "#bbb";
  for (let k = 0; k < links.length; k += 2) {
    const a = px(ida, links[k]);
    const b = px(ida, links[k + 1]);
    ctx.beginPath();
    ctx.moveTo(...a);
    ctx.lineTo(...b);
    ctx.stroke();
  }
  const dots = [
    [s.anchors(), "#888", 3],
    [s.nodes(), "#c33", 3],
    [s.cgd_positions(), "#36c", 5],
    [ida, "#093", 3],
  ];
  for (const [pts, color, r] of dots) {
    ctx.fillStyle = color;
    for (let i = 0; i < pts.length / 2; i++) {
      ctx.beginPath();
      ctx.arc(...px(pts, i), r, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}

function drawTraces(traces) {
  const canvas = $("sp-trace");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const logs = traces.map(([t]) => Array.from(t, (e) => Math.log10(Math.max(e, 1e-12))));
  const flat = logs.flat();
  const lo = Math.min(...flat);
  const hi = Math.max(...flat);
  const n = Math.max(...logs.map((l) => l.length)) - 1 || 1;
  logs.forEach((l, j) => {
    ctx.strokeStyle = traces[j][1];
    ctx.beginPath();
    l.forEach((v, i) => {
      const x = 10 + (i / n) * 460;
      const y = 310 - ((v - lo) / (hi - lo || 1)) * 300;
      i ? ctx.lineTo(x, y) : ctx.moveTo(x, y);
    });
    ctx.stroke();
  });
}

function runSprings() {
  try {
    const s = solve_springs(+$("sp-size").value, +$("sp-seed").value, +$("sp-tol").value);
    const ida = s.ida_trace();
    const cgd = s.cgd_trace();
    drawSprings(s);
    drawTraces([[ida, "#093"], [cgd, "#36c"]]);
    $("sp-out").textContent =
      `IDA  ${ida.length - 1} iterations, energy ${ida[ida.length - 1].toExponential(4)}\n` +
      `CGD  ${cgd.length - 1} iterations, energy ${cgd[cgd.length - 1].toExponential(4)}`;
  } catch (e) {
    $("sp-out").textContent = String(e);
  }
}

let explorer;

function runResponse() {
  const dx = +$("cf-dx").value;
  const dy = +$("cf-dy").value;
  const r = explorer.respond(dx, dy);
  const ctx = putRgba($("cf-frame"), r.image(), explorer.width(), explorer.height());
  const t = explorer.target();
  strokeBox(ctx, t, "#0f0");
  strokeBox(ctx, [t[0] + r.peak_dx(), t[1] + r.peak_dy(), t[2], t[3]], "#ff0");

  const values = r.values();
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const rgba = new Uint8Array(values.length * 4);
  values.forEach((v, i) => {
    const g = Math.round((255 * (v - lo)) / (hi - lo || 1));
    rgba.set([g, g, g, 255], 4 * i);
  });
  putRgba($("cf-map"), rgba, r.cols(), r.rows(), 8);
  $("cf-out").textContent =
    `shift (${dx}, ${dy})  estimated (${r.peak_dx().toFixed(2)}, ${r.peak_dy().toFixed(2)})`;
}

let demo;
let timer;

function drawTracking() {
  const ctx = putRgba($("tr-frame"), demo.frame(), demo.width(), demo.height());
  strokeBox(ctx, demo.ground_truth(), "#fff");
  const parts = demo.parts();
  for (let i = 0; i < parts.length; i += 5) {
    strokeBox(ctx, parts.slice(i, i + 4), parts[i + 4] ? "#ff0" : "#f00");
  }
  strokeBox(ctx, demo.bbox(), "#0f0");
  $("tr-out").textContent =
    `frame ${demo.index() + 1}/${demo.frame_count()}  ` +
    `average overlap ${demo.average_overlap().toFixed(3)}  color weight ${demo.alpha_col().toFixed(2)}`;
}

function startTracking() {
  clearInterval(timer);
  try {
    demo = new TrackingDemo(+$("tr-seed").value, +$("tr-def").value, $("tr-occ").checked, $("tr-mode").value);
  } catch (e) {
    $("tr-out").textContent = String(e);
    return;
  }
  drawTracking();
  timer = setInterval(() => {
    if (!demo.step()) {
      clearInterval(timer);
      return;
    }
    drawTracking();
  }, 60);
}

await init();
explorer = new ResponseExplorer(2);
$("sp-run").onclick = runSprings;
$("cf-dx").oninput = runResponse;
$("cf-dy").oninput = runResponse;
$("tr-start").onclick = startTracking;
$("tr-pause").onclick = () => clearInterval(timer);
runSprings();
runResponse();
