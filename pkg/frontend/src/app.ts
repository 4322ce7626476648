/** DOM wiring: bundle loading, input form, gauges, and error banners.
 *
 * All computation is client-side; the bundle is the only input and no
 * network call is made beyond fetching it. Invalid bundles show a banner
 * and render no numbers at all.
 */

import { parseBundle, HORIZONS, type Horizon, type ModelBundle } from "./bundle.js";
import { computeRisk } from "./risk.js";
import { renderGauge } from "./gauge.js";

const $ = (id: string): HTMLElement => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el;
};

let bundle: ModelBundle | null = null;
let frame = 0;

function showBanner(messages: string[]): void {
  const banner = $("banner");
  banner.hidden = false;
  banner.textContent = "";
  for (const msg of messages) {
    const line = document.createElement("div");
    line.textContent = msg;
    banner.appendChild(line);
  }
  $("calculator").hidden = true;
  $("nomograms").hidden = true;
}

function clearBanner(): void {
  $("banner").hidden = true;
  $("calculator").hidden = false;
}

function readPatient(): Record<string, number> | null {
  if (!bundle) return null;
  const patient: Record<string, number> = {};
  for (const nm of bundle.feature_names) {
    const input = document.getElementById(`in-${nm}`) as HTMLInputElement | null;
    if (!input) return null;
    const value = Number(input.value);
    if (input.value.trim() === "" || !Number.isFinite(value)) {
      input.classList.add("invalid");
      return null;
    }
    input.classList.remove("invalid");
    patient[nm] = value;
  }
  return patient;
}

function recompute(): void {
  if (!bundle) return;
  const patient = readPatient();
  const gauges = $("gauges");
  const breakdown = $("breakdown");
  const warning = $("clamp-warning");
  if (!patient) {
    gauges.innerHTML = "";
    breakdown.innerHTML = "";
    warning.hidden = true;
    return;
  }
  const risk = computeRisk(bundle, patient);

  gauges.innerHTML = HORIZONS.map((h) =>
    renderGauge(`${h}-day mortality`, risk[h].probability),
  ).join("");

  const clamped = new Set<string>();
  for (const h of HORIZONS) {
    for (const nm of risk[h].clamped) clamped.add(nm);
  }
  warning.hidden = clamped.size === 0;
  warning.textContent =
    clamped.size > 0
      ? `Out of supported range, clamped for points: ${[...clamped].sort().join(", ")}`
      : "";

  const header =
    "<tr><th>feature</th>" +
    HORIZONS.map((h) => `<th>${h}d points</th><th>${h}d attribution</th>`).join("") +
    "</tr>";
  const rows = bundle.feature_names
    .map((nm) => {
      const cells = HORIZONS.map((h) => {
        const pts = (risk[h].points[nm] ?? 0).toFixed(1);
        const attr = (risk[h].attributions[nm] ?? 0).toFixed(3);
        return `<td>${pts}</td><td>${attr}</td>`;
      }).join("");
      return `<tr><td>${nm}</td>${cells}</tr>`;
    })
    .join("");
  const totals =
    "<tr><td>total points</td>" +
    HORIZONS.map((h) => `<td>${risk[h].totalPoints.toFixed(1)}</td><td></td>`).join("") +
    "</tr>";
  breakdown.innerHTML = header + rows + totals;
}

function scheduleRecompute(): void {
  cancelAnimationFrame(frame);
  frame = requestAnimationFrame(recompute);
}

function buildForm(loaded: ModelBundle): void {
  const form = $("inputs");
  form.innerHTML = "";
  for (const nm of loaded.feature_names) {
    const row = document.createElement("label");
    row.className = "input-row";
    const unit = loaded.units[nm] ? ` (${loaded.units[nm]})` : "";
    const caption = document.createElement("span");
    caption.textContent = `${nm}${unit}`;
    const input = document.createElement("input");
    input.type = "number";
    input.step = "any";
    input.id = `in-${nm}`;
    input.value = String(loaded.background_mean[nm]);
    input.addEventListener("input", scheduleRecompute);
    row.appendChild(caption);
    row.appendChild(input);
    form.appendChild(row);
  }
}

function buildNomogramTabs(loaded: ModelBundle): void {
  const tabs = $("nomogram-tabs");
  const view = $("nomogram-view");
  tabs.innerHTML = "";
  const render = (h: Horizon): void => {
    const svg = loaded.horizons[h].svg;
    view.innerHTML = svg ?? "<p>No static nomogram in this bundle.</p>";
  };
  HORIZONS.forEach((h, i) => {
    const button = document.createElement("button");
    button.textContent = `${h} days`;
    button.addEventListener("click", () => render(h));
    tabs.appendChild(button);
    if (i === 0) render(h);
  });
  $("nomograms").hidden = false;
}

function acceptBundleText(text: string): void {
  const result = parseBundle(text);
  if (!result.ok) {
    bundle = null;
    showBanner(result.errors);
    return;
  }
  bundle = result.bundle;
  clearBanner();
  buildForm(bundle);
  buildNomogramTabs(bundle);
  recompute();
}

function wireFilePicker(): void {
  const picker = $("bundle-file") as HTMLInputElement;
  picker.addEventListener("change", () => {
    const file = picker.files?.[0];
    if (!file) return;
    file
      .text()
      .then(acceptBundleText)
      .catch((err: Error) => showBanner([`MalformedBundle: ${err.message}`]));
  });
}

function loadFromQuery(): void {
  const url = new URLSearchParams(window.location.search).get("bundle");
  if (!url) return;
  fetch(url)
    .then((resp) => {
      if (!resp.ok) throw new Error(`fetch failed with status ${resp.status}`);
      return resp.text();
    })
    .then(acceptBundleText)
    .catch((err: Error) => showBanner([`MalformedBundle: ${err.message}`]));
}

wireFilePicker();
loadFromQuery();
