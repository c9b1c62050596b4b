/**
 * Thin WebSocket wrapper: parses inbound frames, tracks connection status,
 * and refuses to send while the socket is not open so interaction code can
 * stay oblivious to connection lifecycle.
 */

import {
  encodeMessage,
  parseFrame,
  type ClientMessage,
  type ServerFrame,
} from "./protocol.js";

export type ClientStatus = "connecting" | "open" | "closed";

export interface ClientHandlers {
  onFrame: (frame: ServerFrame) => void;
  /** A text frame arrived that does not parse as any known frame. */
  onMalformed: (text: string) => void;
  onStatus: (status: ClientStatus) => void;
}

export class SteerClient {
  private ws: WebSocket;
  private _status: ClientStatus = "connecting";
  private handlers: ClientHandlers;

  constructor(url: string, handlers: ClientHandlers) {
    this.handlers = handlers;
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.setStatus("open");
    this.ws.onclose = () => this.setStatus("closed");
    this.ws.onerror = () => this.setStatus("closed");
    this.ws.onmessage = (ev: MessageEvent) => {
      if (typeof ev.data !== "string") return;
      const frame = parseFrame(ev.data);
      if (frame === null) this.handlers.onMalformed(ev.data);
      else this.handlers.onFrame(frame);
    };
  }

  get status(): ClientStatus {
    return this._status;
  }

  private setStatus(s: ClientStatus): void {
    if (this._status === s) return;
    this._status = s;
    this.handlers.onStatus(s);
  }

  /** Send if connected; returns false (and drops the message) otherwise. */
  send(msg: ClientMessage): boolean {
    if (this._status !== "open") return false;
    this.ws.send(encodeMessage(msg));
    return true;
  }

  close(): void {
    this.ws.close();
  }
}
