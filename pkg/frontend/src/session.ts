/**
 * Client session: connection management plus a pure view model built only
 * from server frames. The client holds no story logic of its own; reloading
 * and replaying the same frames reproduces the identical view.
 */

import {
  Frame,
  PROTOCOL_VERSION,
  ProtocolError,
  decodeFrame,
  encodeFrame,
  field,
  makeFrame,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((event: { data: string }) => void) | null;
  onclose: (() => void) | null;
  onerror: (() => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export type ConnectionStatus =
  | "idle"
  | "connecting"
  | "open"
  | "closed"
  | "retrying"
  | "version-mismatch";

export interface ChatEntry {
  agent: string;
  action: string;
  text: string;
  beat: number;
}

export interface InterventionEntry {
  beat: number;
  verdict: string;
  effectors: string;
  writeset: string;
}

export interface ViewModel {
  status: ConnectionStatus;
  scenario: string;
  scene: string;
  sceneHistory: string[];
  beat: number;
  played: string[];
  finished: boolean;
  meters: Record<string, string>;
  chat: ChatEntry[];
  interventions: InterventionEntry[];
  errors: string[];
  inputHistory: string[];
}

export function emptyView(): ViewModel {
  return {
    status: "idle",
    scenario: "",
    scene: "",
    sceneHistory: [],
    beat: 0,
    played: [],
    finished: false,
    meters: {},
    chat: [],
    interventions: [],
    errors: [],
    inputHistory: [],
  };
}

export interface SessionOptions {
  maxRetries?: number;
  retryDelayMs?: number;
  schedule?: (fn: () => void, ms: number) => void;
  warn?: (message: string) => void;
}

export class ClientSession {
  view: ViewModel = emptyView();
  frameLog: Frame[] = [];
  onchange: (() => void) | null = null;

  private socket: SocketLike | null = null;
  private url = "";
  private queue: string[] = [];
  private retries = 0;
  private readonly maxRetries: number;
  private readonly retryDelayMs: number;
  private readonly schedule: (fn: () => void, ms: number) => void;
  private readonly warn: (message: string) => void;

  constructor(private factory: SocketFactory, options: SessionOptions = {}) {
    this.maxRetries = options.maxRetries ?? 5;
    this.retryDelayMs = options.retryDelayMs ?? 1000;
    this.schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
    this.warn = options.warn ?? ((m) => console.warn(m));
  }

  connect(url: string): void {
    this.url = url;
    this.view.status = "connecting";
    this.changed();
    const socket = this.factory(url);
    this.socket = socket;
    socket.onopen = () => {
      this.retries = 0;
      this.view.status = "open";
      socket.send(encodeFrame(makeFrame("hello", { version: PROTOCOL_VERSION })));
      for (const line of this.queue.splice(0)) {
        socket.send(line);
      }
      this.changed();
    };
    socket.onmessage = (event) => this.receive(event.data);
    socket.onclose = () => this.handleClosed();
    socket.onerror = () => this.handleClosed();
  }

  private handleClosed(): void {
    if (this.view.status === "version-mismatch") return;
    this.socket = null;
    if (this.view.finished) {
      this.view.status = "closed";
      this.changed();
      return;
    }
    if (this.retries >= this.maxRetries) {
      this.view.status = "closed";
      this.changed();
      return;
    }
    this.retries += 1;
    this.view.status = "retrying";
    this.changed();
    const backoff = this.retryDelayMs * Math.pow(2, this.retries - 1);
    this.schedule(() => {
      // a fresh connection resumes from the server's state frame
      this.view = { ...emptyView(), status: "connecting", inputHistory: this.view.inputHistory };
      this.frameLog = [];
      this.connect(this.url);
    }, backoff);
  }

  sendPlayerLine(text: string): void {
    if (!text.trim()) return; // empty lines never leave the client
    this.view.inputHistory.push(text);
    const line = encodeFrame(makeFrame("input", { text }));
    if (this.socket && this.view.status === "open") {
      this.socket.send(line);
    } else {
      this.queue.push(line); // flushed on reconnect
    }
    this.changed();
  }

  /** Feed one raw line from the server into the view model. */
  receive(raw: string): void {
    let frame: Frame;
    try {
      frame = decodeFrame(raw);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.warn(`ignoring unparseable frame: ${err.message}`);
        return;
      }
      throw err;
    }
    this.frameLog.push(frame);
    this.renderFrame(frame);
    this.changed();
  }

  renderFrame(frame: Frame): void {
    const view = this.view;
    switch (frame.type) {
      case "hello": {
        const version = field(frame, "version") ?? PROTOCOL_VERSION;
        if (version !== PROTOCOL_VERSION) {
          view.status = "version-mismatch";
          view.errors.push(`server speaks protocol ${version}, client speaks ${PROTOCOL_VERSION}`);
          this.socket?.close();
          return;
        }
        view.scenario = field(frame, "scenario") ?? "";
        return;
      }
      case "state": {
        const scene = field(frame, "scene") ?? "";
        if (scene && scene !== view.scene) {
          view.scene = scene;
          if (view.sceneHistory[view.sceneHistory.length - 1] !== scene) {
            view.sceneHistory.push(scene);
          }
        }
        view.beat = Number(field(frame, "beat") ?? view.beat);
        const played = field(frame, "played") ?? "-";
        view.played = played === "-" ? [] : played.split(",");
        view.finished = field(frame, "finished") === "1";
        return;
      }
      case "utterance": {
        view.chat.push({
          agent: field(frame, "agent") ?? "?",
          action: field(frame, "action") ?? "say",
          text: field(frame, "args") ?? "",
          beat: Number(field(frame, "beat") ?? view.beat),
        });
        return;
      }
      case "value": {
        const name = field(frame, "name");
        if (name) view.meters[name] = field(frame, "current") ?? "";
        return;
      }
      case "scene": {
        const id = field(frame, "id") ?? "";
        if (id && id !== "-") {
          view.scene = id;
          if (view.sceneHistory[view.sceneHistory.length - 1] !== id) {
            view.sceneHistory.push(id);
          }
        }
        return;
      }
      case "intervention": {
        view.interventions.push({
          beat: Number(field(frame, "beat") ?? 0),
          verdict: field(frame, "verdict") ?? "",
          effectors: field(frame, "effectors") ?? "",
          writeset: field(frame, "writeset") ?? "",
        });
        return;
      }
      case "error": {
        view.errors.push(field(frame, "reason") ?? "unknown error");
        return;
      }
      default:
        this.warn(`ignoring unhandled frame type ${frame.type}`);
    }
  }

  private changed(): void {
    this.onchange?.();
  }
}

/** Rebuild a view purely from logged frames; used by the statelessness test. */
export function replayView(frames: Frame[]): ViewModel {
  const session = new ClientSession(() => {
    throw new Error("replay never connects");
  });
  for (const frame of frames) {
    session.renderFrame(frame);
  }
  return session.view;
}
