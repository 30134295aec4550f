// Wire protocol shared with the simulation service (see docs/protocol.md).

export const PROTOCOL_VERSION = 1;

export interface StateMessage {
  type: "state";
  protocol_version: number;
  t: number;
  x: number;
  y: number;
  heading: number;
  s: number;
  v_s: number;
  avg_speed_window: number;
  deviation_deg: number | null;
}

export interface AckMessage {
  type: "ack";
  protocol_version: number;
  ok: true;
  applied: Record<string, unknown>;
  t: number;
}

export interface ErrorMessage {
  type: "error";
  protocol_version: number;
  ok: false;
  message: string;
  field: string | null;
}

export type ServerMessage = StateMessage | AckMessage | ErrorMessage;

export type DriveMethod = "one_coil" | "four_coil";
export type DriveDirection = "FR" | "BL" | "FL" | "BR";

export interface ControlForm {
  method?: DriveMethod;
  frequency?: number;
  duty?: number;
  direction?: DriveDirection;
  current?: number;
}

export interface ControlMessage extends ControlForm {
  type: "control";
  protocol_version: number;
  pause?: boolean;
  resume?: boolean;
  reset?: boolean;
}

const METHODS: readonly string[] = ["one_coil", "four_coil"];
const DIRECTIONS: readonly string[] = ["FR", "BL", "FL", "BR"];

/** Field-level validation mirroring the service's DriveCommand ranges. */
export function validateForm(form: ControlForm): Map<string, string> {
  const errors = new Map<string, string>();
  if (form.method !== undefined && !METHODS.includes(form.method)) {
    errors.set("method", `method must be one of ${METHODS.join(", ")}`);
  }
  if (form.direction !== undefined && !DIRECTIONS.includes(form.direction)) {
    errors.set("direction", `direction must be one of ${DIRECTIONS.join(", ")}`);
  }
  if (form.frequency !== undefined) {
    if (!Number.isFinite(form.frequency) || form.frequency <= 0) {
      errors.set("frequency", "frequency must be > 0 Hz");
    }
  }
  if (form.duty !== undefined) {
    if (!Number.isFinite(form.duty) || form.duty <= 0 || form.duty >= 1) {
      errors.set("duty", "duty must be strictly between 0 and 1");
    }
  }
  if (form.current !== undefined) {
    if (!Number.isFinite(form.current) || form.current < 0) {
      errors.set("current", "current must be >= 0 A");
    }
  }
  return errors;
}

/** Encode a validated form (plus verbs) as a control frame. */
export function encodeControl(
  form: ControlForm,
  verbs: { pause?: boolean; resume?: boolean; reset?: boolean } = {},
): string {
  const errors = validateForm(form);
  if (errors.size > 0) {
    const [field, message] = errors.entries().next().value as [string, string];
    throw new Error(`${field}: ${message}`);
  }
  const msg: ControlMessage = {
    type: "control",
    protocol_version: PROTOCOL_VERSION,
    ...form,
    ...verbs,
  };
  return JSON.stringify(msg);
}

/** Parse one server frame; returns null for frames that should be ignored. */
export function decodeServerMessage(raw: string): ServerMessage | null {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof data !== "object" || data === null) return null;
  const msg = data as Record<string, unknown>;
  if (msg.protocol_version !== PROTOCOL_VERSION) return null;
  if (msg.type === "state") {
    for (const key of ["t", "x", "y", "heading", "s", "v_s", "avg_speed_window"]) {
      if (typeof msg[key] !== "number") return null;
    }
    return msg as unknown as StateMessage;
  }
  if (msg.type === "ack" || msg.type === "error") {
    return msg as unknown as ServerMessage;
  }
  return null;
}
