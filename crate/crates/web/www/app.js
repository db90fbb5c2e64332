import init, { concessionCurves, fitSeries, simulateSession, aircraftScenario } from "./pkg/negotiate_web.js";

const $ = (id) => document.getElementById(id);
const SVG = "http://www.w3.org/2000/svg";

function el(tag, attrs = {}, text) {
  const node = document.createElementNS(SVG, tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text !== undefined) node.textContent = text;
  return node;
}

// Draws polylines and point sets on a 0..xMax by 0..100 grid.
function plot(svg, xMax, series) {
  svg.replaceChildren();
  const W = 600, H = 260, pad = 30;
  const sx = (x) => pad + (x / xMax) * (W - 2 * pad);
  const sy = (y) => H - pad - (y / 100) * (H - 2 * pad);
  for (const y of [0, 25, 50, 75, 100]) {
    svg.append(el("line", { x1: pad, x2: W - pad, y1: sy(y), y2: sy(y), stroke: "#e4e4e4" }));
    svg.append(el("text", { x: 4, y: sy(y) + 4, "font-size": 10, fill: "#777" }, y));
  }
  svg.append(el("text", { x: W - pad, y: H - 8, "font-size": 10, fill: "#777", "text-anchor": "end" }, xMax.toFixed(0)));
  for (const s of series) {
    if (s.points) {
      for (const [x, y] of s.points) svg.append(el("circle", { cx: sx(x), cy: sy(y), r: 3.5, fill: s.color }));
    }
    if (s.line) {
      const d = s.line.map(([x, y], i) => `${i ? "L" : "M"}${sx(x).toFixed(1)},${sy(Math.max(0, Math.min(100, y))).toFixed(1)}`).join("");
      svg.append(el("path", { d, fill: "none", stroke: s.color, "stroke-width": 2, "stroke-dasharray": s.dash || "" }));
    }
    if (s.vline !== undefined) {
      svg.append(el("line", { x1: sx(s.vline), x2: sx(s.vline), y1: pad, y2: H - pad, stroke: s.color, "stroke-dasharray": "4 3" }));
    }
  }
}

function guard(errorId, fn) {
  $(errorId).textContent = "";
  try {
    fn();
  } catch (e) {
    $(errorId).textContent = String(e);
  }
}

function drawCurves() {
  guard("c-error", () => {
    const deadline = Number($("c-deadline").value);
    const pts = JSON.parse(concessionCurves(Number($("c-k").value), Number($("c-beta").value), deadline, Number($("c-res").value)));
    plot($("c-plot"), deadline, [
      { line: pts.map((p) => [p.round, p.time]), color: "#1f77b4" },
      { line: pts.map((p) => [p.round, p.resource]), color: "#d62728", dash: "5 3" },
    ]);
  });
}

function evalFit(f, t) {
  switch (f.family) {
    case "linear": return f.a + f.b * t;
    case "power": return f.a * Math.pow(t, f.b);
    default: return (f.a * t + f.b) * t + f.c;
  }
}

function runFit() {
  guard("f-error", () => {
    const deadline = Number($("f-deadline").value);
    const reservation = Number($("f-res").value);
    const report = JSON.parse(fitSeries($("f-points").value, reservation, deadline));
    const points = $("f-points").value.trim().split("\n").filter((l) => l.trim()).map((l) => l.trim().split(/[\s,]+/).map(Number));
    const colors = { linear: "#2ca02c", power: "#9467bd", quadratic: "#ff7f0e" };
    const series = [{ points, color: "#333" }, { line: [[0, reservation], [deadline, reservation]], color: "#aaa", dash: "2 3" }];
    for (const line of report.fits) {
      if (!line.fit) continue;
      const xs = Array.from({ length: 101 }, (_, i) => (i / 100) * deadline);
      series.push({ line: xs.map((t) => [t, evalFit(line.fit, t)]), color: colors[line.family], dash: report.selected?.family === line.family ? "" : "4 4" });
    }
    if (report.crossing !== null) series.push({ vline: report.crossing, color: "#d62728" });
    plot($("f-plot"), deadline, series);

    const rows = report.fits.map((l) => {
      const chosen = report.selected?.family === l.family ? " (selected)" : "";
      const body = l.fit ? `a=${l.fit.a.toFixed(3)} b=${l.fit.b.toFixed(3)}${l.family === "quadratic" ? ` c=${l.fit.c.toFixed(3)}` : ""}, SSE ${l.fit.sse.toExponential(2)}` : l.error;
      return `<tr><td style="color:${colors[l.family]}">${l.family}${chosen}</td><td>${body}</td></tr>`;
    });
    const verdict = report.crossing === null
      ? "Forecast: the opponent will not reach your reservation before the deadline; stop early."
      : `Forecast: the opponent reaches ${reservation} at round ${report.crossing.toFixed(2)}.`;
    $("f-out").innerHTML = `<table>${rows.join("")}</table><p>${verdict}</p>`;
  });
}

function escape(s) {
  return String(s).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function traceTable(issues, trace) {
  const head = `<tr><th>round</th><th>actor</th><th>action</th>${issues.map((i) => `<th>${escape(i)}</th>`).join("")}<th>own utility</th><th>target</th></tr>`;
  const body = trace.rows.map((r) => {
    const cells = issues.map((i) => `<td>${r.offer ? escape(r.offer.choices[i]) : ""}</td>`).join("");
    const u = r.utility_self == null ? "" : r.utility_self.toFixed(1);
    const t = r.target == null ? "" : r.target.toFixed(1);
    return `<tr><td>${r.round}</td><td>${escape(r.actor)}</td><td>${escape(r.action)}</td>${cells}<td>${u}</td><td>${t}</td></tr>`;
  });
  return `<table>${head}${body.join("")}</table>`;
}

function describe(result) {
  return escape(JSON.stringify(result));
}

function runSession() {
  guard("s-error", () => {
    const out = JSON.parse(simulateSession($("s-text").value, BigInt($("s-seed").value || 0)));
    if (out.report) {
      $("s-out").innerHTML = `<p>Outcome: ${describe(out.report.outcome)}</p>${traceTable(out.issues, out.report.trace)}`;
    } else {
      const r = out.one_to_many;
      const threads = r.threads.map((t) => `<h3>${escape(t.supplier)}</h3>${traceTable(out.issues, t.report.trace)}`);
      $("s-out").innerHTML = `<p>Decision: ${describe(r.choice)}</p>${threads.join("")}`;
    }
  });
}

await init();
$("s-text").value = aircraftScenario();
for (const id of ["c-k", "c-beta", "c-deadline", "c-res"]) $(id).addEventListener("input", drawCurves);
$("f-run").addEventListener("click", runFit);
$("s-run").addEventListener("click", runSession);
drawCurves();
runFit();
