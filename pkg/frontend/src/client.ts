// WebSocket binding with automatic reconnect.

import { ConsoleViewModel } from "./viewmodel.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface LiveBinding {
  close(): void;
}

/**
 * Connect the view model to a session socket.
 *
 * On connection loss the status flips to "disconnected" and a reconnect is
 * scheduled with capped exponential backoff; the trail gets a gap marker on
 * every (re)connect so discontinuities stay visible.
 */
export function connect(
  url: string,
  vm: ConsoleViewModel,
  options: {
    socketFactory?: SocketFactory;
    initialBackoffMs?: number;
    maxBackoffMs?: number;
    schedule?: (fn: () => void, ms: number) => unknown;
  } = {},
): LiveBinding {
  const factory =
    options.socketFactory ??
    ((u: string) => new WebSocket(u) as unknown as SocketLike);
  const schedule = options.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  let backoff = options.initialBackoffMs ?? 1000;
  const maxBackoff = options.maxBackoffMs ?? 8000;
  let closed = false;
  let socket: SocketLike | null = null;

  const open = () => {
    if (closed) return;
    vm.connecting();
    socket = factory(url);
    socket.onopen = () => {
      backoff = options.initialBackoffMs ?? 1000;
      vm.attach({ send: (frame) => socket?.send(frame) });
    };
    socket.onmessage = (ev) => {
      if (typeof ev.data === "string") vm.onFrame(ev.data);
    };
    socket.onerror = () => {
      // onclose follows; reconnect is handled there.
    };
    socket.onclose = () => {
      vm.detach();
      if (!closed) {
        schedule(open, backoff);
        backoff = Math.min(backoff * 2, maxBackoff);
      }
    };
  };

  open();
  return {
    close() {
      closed = true;
      vm.detach();
      socket?.close();
    },
  };
}
