import init, { ndcg, train_demo, bin_demo } from "./pkg/lookalike_wasm.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function fail(el, e) {
  el.innerHTML = `<p class="err">${e}</p>`;
}

// ranking explorer
const relevance = [5, 3.4, 3.1, 1.8, 1.2, 0.5];
let order = [3, 0, 5, 1, 4, 2];

function renderOrder() {
  const list = $("order");
  list.innerHTML = "";
  order.forEach((c, pos) => {
    const li = document.createElement("li");
    li.draggable = true;
    li.textContent = `candidate ${String.fromCharCode(65 + c)}  (relevance ${relevance[c]})`;
    li.addEventListener("dragstart", (e) => e.dataTransfer.setData("text/plain", String(pos)));
    li.addEventListener("dragover", (e) => e.preventDefault());
    li.addEventListener("drop", (e) => {
      e.preventDefault();
      const from = Number(e.dataTransfer.getData("text/plain"));
      const [moved] = order.splice(from, 1);
      order.splice(pos, 0, moved);
      renderOrder();
    });
    list.appendChild(li);
  });
  try {
    $("ndcg-out").textContent = ndcg(new Float64Array(relevance), new Uint32Array(order)).toFixed(4);
  } catch (e) {
    $("ndcg-out").textContent = e;
  }
}

function drawLoss(loss) {
  const c = $("t-loss");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  if (loss.length < 2) return;
  const hi = Math.max(...loss), lo = Math.min(...loss);
  g.beginPath();
  loss.forEach((l, i) => {
    const x = (i / (loss.length - 1)) * (c.width - 10) + 5;
    const y = c.height - 5 - ((l - lo) / (hi - lo || 1)) * (c.height - 10);
    i ? g.lineTo(x, y) : g.moveTo(x, y);
  });
  g.stroke();
}

function runTrain() {
  const out = $("t-out");
  out.textContent = "training…";
  // let the status paint before the blocking call
  setTimeout(() => {
    try {
      const r = JSON.parse(train_demo(num("t-seed"), num("t-epochs"), num("t-noise"), num("t-lr")));
      drawLoss(r.loss);
      const row = (name, s) =>
        `<tr><th>${name}</th><td>${s.hard.toFixed(3)}</td><td>${s.easy.toFixed(3)}</td><td>${s.ndcg.toFixed(3)}</td></tr>`;
      out.innerHTML =
        `<p>${r.train_triplets} training triplets, ${r.test_triplets} held-out</p>` +
        `<table><tr><th></th><th>hard acc.</th><th>easy acc.</th><th>NDCG</th></tr>` +
        row("base", r.identity) + row("trained", r.trained) + `</table>`;
    } catch (e) {
      fail(out, e);
    }
  }, 10);
}

function runBins() {
  const out = $("b-out");
  try {
    const r = JSON.parse(bin_demo(num("b-seed"), num("b-bins"), num("b-cell"), num("b-noise"), num("b-thr")));
    const n = r.counts.length;
    let html = `<p>row bin judged closer than column bin; triangle accuracy ${
      r.triangle_accuracy === null ? "n/a" : r.triangle_accuracy.toFixed(3)
    }</p><table><tr><th></th>`;
    for (let j = 0; j < n; j++) html += `<th>${j}</th>`;
    html += "</tr>";
    for (let i = 0; i < n; i++) {
      html += `<tr><th>${i} [${r.edges[i].toFixed(2)}, ${r.edges[i + 1].toFixed(2)})</th>`;
      for (let j = 0; j < n; j++) html += `<td>${i === j ? "" : r.counts[i][j]}</td>`;
      html += "</tr>";
    }
    out.innerHTML = html + "</table>";
  } catch (e) {
    fail(out, e);
  }
}

init().then(() => {
  $("status").textContent = "";
  renderOrder();
  $("t-run").addEventListener("click", runTrain);
  $("b-run").addEventListener("click", runBins);
  runBins();
}, (e) => fail($("status"), `could not load wasm: ${e}`));
