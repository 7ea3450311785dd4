// Wire protocol with the measurement service: JSON commands over one
// WebSocket, replies correlated by id, events pushed with monotone
// sequence numbers.

export type Phase =
  | "uncalibrated"
  | "calibrated"
  | "voice_check"
  | "testing"
  | "recorded"
  | "saved";

export interface StimulusSpec {
  signal_type: "SINE" | "SINES" | "MFND" | "MFNDH";
  fo: number;
  target_fo: number;
  combination_id: number;
  normalization: "PEAK" | "TOTAL_RMS" | "COMPONENT";
  phase_alloc: "SIN" | "COS" | "ALT" | "SCH";
  depth: number;
  duration: number;
  fs: number;
  seed: number;
}

export interface Conditions {
  fo_choices: number[];
  target_fo_choices: number[];
  depth: number;
  combination_ids: number[];
  default_type: string;
  default_normalization: string;
  default_phase: string;
}

export interface ServiceState {
  phase: Phase;
  progress: string;
  activity: string;
  spec: StimulusSpec;
  conditions: Conditions;
  calibration: {
    offset_db: number;
    reference_spl: number;
    measured_dbfs: number;
    bound_at: string;
  } | null;
  last_artifact: string | null;
  has_capture: boolean;
}

export interface AnalysisResult {
  lag: number[];
  stimulation: number[];
  linear: number[];
  random_tv: number[];
  voiced_span: [number, number];
  n_averages: number;
  error?: { kind: string; message: string };
}

export interface Reply {
  id: unknown;
  ok: boolean;
  payload?: Record<string, unknown>;
  error?: { kind: string; message: string };
}

export interface ServiceEvent {
  seq: number;
  type: string;
  [key: string]: unknown;
}

type WebSocketLike = {
  send(data: string): void;
  close(): void;
  onmessage: ((event: { data: unknown }) => void) | null;
  onopen: (() => void) | null;
  onclose: (() => void) | null;
  onerror: ((err: unknown) => void) | null;
};

export type WebSocketFactory = (url: string) => WebSocketLike;

/** Client for the service socket: correlates replies, hands events to a
 * subscriber in sequence order and drops stale or duplicate ones. */
export class ServiceClient {
  private socket: WebSocketLike;
  private nextId = 1;
  private pending = new Map<number, (reply: Reply) => void>();
  private lastSeq = -1;
  onEvent: ((event: ServiceEvent) => void) | null = null;
  onStatusChange: ((connected: boolean) => void) | null = null;

  constructor(url: string, factory?: WebSocketFactory) {
    const make =
      factory ?? ((u: string) => new WebSocket(u) as unknown as WebSocketLike);
    this.socket = make(url);
    this.socket.onopen = () => this.onStatusChange?.(true);
    this.socket.onclose = () => this.onStatusChange?.(false);
    this.socket.onmessage = (event) => this.dispatch(String(event.data));
  }

  private dispatch(raw: string): void {
    const msg = JSON.parse(raw);
    if ("event" in msg) {
      const event = msg.event as ServiceEvent;
      if (event.seq <= this.lastSeq) {
        return; // stale or duplicate
      }
      this.lastSeq = event.seq;
      this.onEvent?.(event);
      return;
    }
    const reply = msg as Reply;
    const resolve = this.pending.get(reply.id as number);
    if (resolve) {
      this.pending.delete(reply.id as number);
      resolve(reply);
    }
  }

  call(cmd: string, params: Record<string, unknown> = {}): Promise<Reply> {
    const id = this.nextId++;
    return new Promise((resolve) => {
      this.pending.set(id, resolve);
      this.socket.send(JSON.stringify({ id, cmd, params }));
    });
  }

  close(): void {
    this.socket.close();
  }
}
