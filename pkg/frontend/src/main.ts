import { ClientSession } from "./session.js";
import { Panels, paint } from "./view.js";

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

const panels: Panels = {
  status: el("status"),
  scene: el("scene"),
  meters: el("meters"),
  chat: el("chat"),
  debug: el("debug"),
  debugToggle: el("debug-toggle"),
};

const params = new URLSearchParams(window.location.search);
const sessionId = params.get("session") ?? "default";
const host = params.get("server") ?? window.location.host;
const url = `ws://${host}/sessions/${sessionId}/ws`;

const session = new ClientSession((u) => new WebSocket(u) as never);
session.onchange = () => paint(session.view, panels);
session.connect(url);

const input = el("line") as HTMLInputElement;
el("send").addEventListener("click", () => {
  session.sendPlayerLine(input.value);
  input.value = "";
  input.focus();
});
input.addEventListener("keydown", (event) => {
  if (event.key === "Enter") {
    session.sendPlayerLine(input.value);
    input.value = "";
  }
});

el("debug-toggle").addEventListener("click", () => {
  el("debug").classList.toggle("hidden");
});
