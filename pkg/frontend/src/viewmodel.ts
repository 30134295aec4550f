// Console state: connection, latest telemetry, trail, pending form.
//
// Pure client logic -- every displayed number originates from a
// StateMessage; nothing here computes physics.

import {
  AckMessage,
  ControlForm,
  ErrorMessage,
  ServerMessage,
  StateMessage,
  decodeServerMessage,
  encodeControl,
  validateForm,
} from "./protocol.js";
import { Trail } from "./trail.js";

export type ConnectionState = "connecting" | "connected" | "disconnected";

export interface SendChannel {
  send(frame: string): void;
}

export class ConsoleViewModel {
  connection: ConnectionState = "disconnected";
  latest: StateMessage | null = null;
  lastAck: AckMessage | null = null;
  lastError: ErrorMessage | null = null;
  readonly trail: Trail;
  form: ControlForm = {};
  formErrors: Map<string, string> = new Map();
  framesSinceControl = -1; // -1: no control in flight

  private channel: SendChannel | null = null;

  constructor(trailSeconds: number = 10) {
    this.trail = new Trail(trailSeconds);
  }

  attach(channel: SendChannel): void {
    this.channel = channel;
    this.connection = "connected";
    this.trail.markGap(); // annotate trail continuity across (re)connects
  }

  detach(): void {
    this.channel = null;
    this.connection = "disconnected";
  }

  connecting(): void {
    this.connection = "connecting";
  }

  /** Handle one raw frame from the socket. */
  onFrame(raw: string): ServerMessage | null {
    const msg = decodeServerMessage(raw);
    if (msg === null) return null;
    if (msg.type === "state") {
      this.latest = msg;
      this.trail.push(msg.t, msg.x, msg.y);
      if (this.framesSinceControl >= 0) this.framesSinceControl += 1;
    } else if (msg.type === "ack") {
      this.lastAck = msg;
      this.lastError = null;
    } else {
      this.lastError = msg;
    }
    return msg;
  }

  /** Update a form field, tracking validation errors for inline display. */
  setFormField<K extends keyof ControlForm>(key: K, value: ControlForm[K]): void {
    this.form = { ...this.form, [key]: value };
    this.formErrors = validateForm(this.form);
  }

  get formValid(): boolean {
    return this.formErrors.size === 0;
  }

  /**
   * Send the pending form as a control message.
   *
   * Returns true when sent; false when validation failed or no connection
   * (nothing goes on the wire in either case).
   */
  sendControl(verbs: { pause?: boolean; resume?: boolean; reset?: boolean } = {}): boolean {
    if (this.channel === null) return false;
    this.formErrors = validateForm(this.form);
    if (!this.formValid) return false;
    const frame = encodeControl(this.form, verbs);
    this.channel.send(frame);
    this.framesSinceControl = 0;
    if (verbs.reset) this.trail.markGap();
    return true;
  }

  /** Numbers for the readout panel, straight from the latest StateMessage. */
  readout(): {
    t: number | null;
    speedMms: number | null;
    deviationDeg: number | null;
    strokePhase: number | null;
  } {
    if (this.latest === null) {
      return { t: null, speedMms: null, deviationDeg: null, strokePhase: null };
    }
    return {
      t: this.latest.t,
      speedMms: this.latest.avg_speed_window * 1e3,
      deviationDeg: this.latest.deviation_deg,
      // Stroke phase indicator: -1 (back stop) .. +1 (front stop).
      strokePhase: this.latest.s / 1.2e-3,
    };
  }
}
