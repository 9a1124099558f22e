import init, { trainSynthetic, sweepAmplification, ndcgCurve } from "./pkg/ifenet_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(target, e) {
  target.innerHTML = "";
  const p = document.createElement("p");
  p.className = "err";
  p.textContent = String(e.message ?? e);
  target.appendChild(p);
}

// Defer heavy work one frame so the button state repaints first.
function busy(button, work) {
  button.disabled = true;
  requestAnimationFrame(() =>
    setTimeout(() => {
      try {
        work();
      } finally {
        button.disabled = false;
      }
    }, 0),
  );
}

function barRow(label, value, width, className = "") {
  const row = document.createElement("div");
  const name = document.createElement("span");
  name.className = "name";
  name.textContent = label;
  const bar = document.createElement("span");
  bar.className = `bar ${className}`;
  bar.style.width = `${Math.max(1, width)}px`;
  const val = document.createElement("span");
  val.className = "val";
  val.textContent = value;
  row.append(name, bar, val);
  return row;
}

function ndcgTable(rows) {
  const t = document.createElement("table");
  t.innerHTML = "<tr><th>K</th><th>NDCG@K</th></tr>";
  for (const [k, v] of rows) {
    const tr = document.createElement("tr");
    tr.innerHTML = `<td>${k}</td><td>${v.toFixed(4)}</td>`;
    t.appendChild(tr);
  }
  return t;
}

function runTrain() {
  const k = num("t-k");
  const out = JSON.parse(
    trainSynthetic(num("t-n"), num("t-d"), k, num("t-noise"), num("t-r"), num("t-seed"), $("t-ablation").checked),
  );
  $("t-summary").textContent =
    `${out.arch}: test accuracy ${out.test_accuracy.toFixed(3)}, best epoch ${out.best_epoch} of ${out.epochs}`;
  const bars = $("t-bars");
  bars.innerHTML = "";
  if (out.bars.length === 0) {
    $("t-ndcg").textContent = "The plain network has no importance scores.";
    return;
  }
  const sorted = [...out.bars].sort((a, b) => a.rank - b.rank);
  const max = sorted[0].score;
  for (const b of sorted) {
    const planted = b.planted_group < k;
    bars.appendChild(barRow(b.feature, b.score.toFixed(4), (300 * b.score) / max, planted ? "" : "noise"));
  }
  const at = (K) => out.ndcg.find(([k2]) => k2 === K)?.[1];
  $("t-ndcg").textContent = `planted order ${out.truth}; NDCG@${k} = ${at(k).toFixed(4)} (blue bars are informative features)`;
}

function runSweep() {
  const rows = JSON.parse(sweepAmplification(1000, 12, 3, num("s-noise"), num("s-seed"), $("s-r").value));
  const out = $("s-out");
  out.innerHTML = "";
  for (const row of rows) {
    // Scale from 0.5 accuracy so differences stay visible.
    const width = Math.max(0, row.test_accuracy - 0.5) * 600;
    out.appendChild(barRow(`r=${row.r}`, row.test_accuracy.toFixed(3), width));
  }
}

function runNdcg() {
  const res = JSON.parse(ndcgCurve($("n-rank").value, $("n-truth").value));
  const out = $("n-out");
  out.innerHTML = "";
  out.appendChild(ndcgTable(res.ndcg));
  if (res.spearman !== null) {
    const p = document.createElement("p");
    p.textContent = `Spearman rho ${res.spearman.toFixed(4)}`;
    out.appendChild(p);
  }
}

function wire(buttonId, outputId, fn) {
  $(buttonId).addEventListener("click", () =>
    busy($(buttonId), () => {
      try {
        fn();
      } catch (e) {
        fail($(outputId), e);
      }
    }),
  );
}

await init();
wire("t-run", "t-bars", runTrain);
wire("s-run", "s-out", runSweep);
wire("n-run", "n-out", runNdcg);
runNdcg();
