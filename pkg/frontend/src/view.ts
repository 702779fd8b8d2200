/**
 * DOM painting for the play client. Everything on screen derives from the
 * session's view model; no story state lives in the DOM.
 */

import { ViewModel } from "./session.js";

export interface Panels {
  status: HTMLElement;
  scene: HTMLElement;
  meters: HTMLElement;
  chat: HTMLElement;
  debug: HTMLElement;
  debugToggle: HTMLElement;
}

export function paint(view: ViewModel, panels: Panels): void {
  panels.status.textContent = statusLine(view);
  panels.status.dataset.status = view.status;

  panels.scene.innerHTML = "";
  const badge = document.createElement("span");
  badge.className = "scene-badge";
  badge.textContent = view.scene || "—";
  panels.scene.appendChild(badge);
  const history = document.createElement("span");
  history.className = "scene-history";
  history.textContent = view.sceneHistory.join(" → ");
  panels.scene.appendChild(history);

  panels.meters.innerHTML = "";
  for (const [name, value] of Object.entries(view.meters)) {
    const row = document.createElement("div");
    row.className = "meter";
    const label = document.createElement("span");
    label.textContent = name.replace(/_/g, " / ");
    const bar = document.createElement("progress");
    bar.max = 9;
    bar.value = Number(value);
    const reading = document.createElement("b");
    reading.textContent = value;
    row.append(label, bar, reading);
    panels.meters.appendChild(row);
  }

  panels.chat.innerHTML = "";
  for (const entry of view.chat) {
    const line = document.createElement("p");
    line.className = `chat-line action-${entry.action}`;
    line.textContent = `${entry.agent}: ${entry.text}`;
    panels.chat.appendChild(line);
  }
  for (const err of view.errors) {
    const line = document.createElement("p");
    line.className = "chat-line error";
    line.textContent = `! ${err}`;
    panels.chat.appendChild(line);
  }
  panels.chat.scrollTop = panels.chat.scrollHeight;

  panels.debugToggle.textContent = `steering feed (${view.interventions.length})`;
  panels.debug.innerHTML = "";
  for (const iv of view.interventions) {
    const entry = document.createElement("div");
    entry.className = "intervention";
    entry.textContent = `beat ${iv.beat}: ${iv.verdict} → ${iv.effectors} [${iv.writeset}]`;
    panels.debug.appendChild(entry);
  }
}

function statusLine(view: ViewModel): string {
  switch (view.status) {
    case "open":
      return view.finished ? `story finished — ${view.scenario}` : `playing ${view.scenario}`;
    case "retrying":
      return "connection lost, retrying…";
    case "version-mismatch":
      return "protocol version mismatch — please refresh";
    case "connecting":
      return "connecting…";
    case "closed":
      return "disconnected";
    default:
      return "";
  }
}
