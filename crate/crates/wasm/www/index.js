// Build the bindings into ./pkg first (see the README).
import init, { filter_response, scene_spectrogram, fuse_scores } from "./pkg/fdms_wasm.js";

const $ = (id) => document.getElementById(id);
const MODALITIES = ["acoustic", "vibration", "thermal"];
const CLASSES = "normal,material_runout";

function report(e) {
  $("error").textContent = e ? String(e.message ?? e) : "";
}

function plotFilter() {
  const rate = Number($("rate").value);
  let pts;
  try {
    pts = filter_response(rate, 400);
    report();
  } catch (e) {
    report(e);
    return;
  }
  const cv = $("filter");
  const g = cv.getContext("2d");
  g.clearRect(0, 0, cv.width, cv.height);
  const fMin = Math.log10(pts[0]);
  const fMax = Math.log10(pts[pts.length - 2]);
  const x = (f) => ((Math.log10(f) - fMin) / (fMax - fMin)) * (cv.width - 40) + 30;
  const y = (db) => (Math.max(-60, Math.min(0, db)) / -60) * (cv.height - 20) + 10;
  g.strokeStyle = "#ddd";
  g.fillStyle = "#666";
  for (const db of [0, -3, -20, -40, -60]) {
    g.beginPath();
    g.moveTo(30, y(db));
    g.lineTo(cv.width - 10, y(db));
    g.stroke();
    g.fillText(`${db}`, 2, y(db) + 4);
  }
  for (const f of [10, 100, 1000, 10000]) {
    if (Math.log10(f) > fMax) continue;
    g.beginPath();
    g.moveTo(x(f), 10);
    g.lineTo(x(f), cv.height - 10);
    g.stroke();
    g.fillText(`${f} Hz`, x(f) + 2, cv.height - 12);
  }
  g.strokeStyle = "#c33";
  g.beginPath();
  for (let i = 0; i < pts.length; i += 2) {
    const [px, py] = [x(pts[i]), y(pts[i + 1])];
    if (i === 0) g.moveTo(px, py);
    else g.lineTo(px, py);
  }
  g.stroke();
}

function renderSpectrogram() {
  const snr = $("snr").value.trim();
  let img;
  try {
    img = scene_spectrogram($("fault").value, BigInt($("seed").value || 0), snr === "" ? NaN : Number(snr), $("filtered").checked);
    report();
  } catch (e) {
    report(e);
    return;
  }
  const [w, h] = [img.width, img.height];
  const gray = img.pixels();
  const cv = $("spectrogram");
  cv.width = w;
  cv.height = h;
  cv.style.width = `${w * 4}px`;
  cv.style.height = `${h * 1.5}px`;
  const data = new ImageData(w, h);
  for (let i = 0; i < gray.length; i++) {
    data.data.set([gray[i], gray[i], gray[i], 255], i * 4);
  }
  cv.getContext("2d").putImageData(data, 0, 0);
  $("spec-info").textContent = `${w} frames x ${h} bins, ${img.bin_hz.toFixed(2)} Hz per bin`;
  img.free();
}

function updateFusion() {
  const vectors = MODALITIES.map((m) => {
    if (!$(`use-${m}`).checked) return new Float64Array();
    const p = Number($(`p-${m}`).value);
    $(`v-${m}`).textContent = p.toFixed(2);
    return new Float64Array([1 - p, p]);
  });
  let result;
  try {
    result = fuse_scores(CLASSES, ...vectors, Number($("threshold").value));
    report();
  } catch (e) {
    report(e);
    return;
  }
  const probs = result.probs();
  $("fused").innerHTML = "<tr><th>class</th><th>fused</th></tr>" +
    CLASSES.split(",").map((c, i) => `<tr><td>${c}</td><td>${probs[i].toFixed(3)}</td></tr>`).join("");
  $("flag").textContent = result.flagged ? `flagged: ${result.flagged}` : "nothing flagged";
  result.free();
}

function buildSliders() {
  const box = $("sliders");
  for (const [i, m] of MODALITIES.entries()) {
    const row = document.createElement("div");
    row.innerHTML = `<label><input id="use-${m}" type="checkbox" checked> ${m}</label>
      <input id="p-${m}" type="range" min="0" max="1" step="0.01" value="${[0.9, 0.2, 0.85][i]}">
      <span id="v-${m}"></span>`;
    box.append(row);
  }
  box.addEventListener("input", updateFusion);
  $("threshold").addEventListener("input", updateFusion);
}

await init();
$("plot-filter").addEventListener("click", plotFilter);
$("render").addEventListener("click", renderSpectrogram);
buildSliders();
plotFilter();
renderSpectrogram();
updateFusion();
