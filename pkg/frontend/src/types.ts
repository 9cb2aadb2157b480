/** Wire shapes exactly as the service's JSON schemas publish them. */

export interface Instance {
  polygon: [number, number][];
  bbox: [number, number, number, number];
  score: number;
  text: string;
}

export interface DocumentResult {
  id: string;
  instances: Instance[];
  label: string;
  label_probs: Record<string, number>;
  timings_ms: Record<string, number>;
}

export interface FrameAck {
  seq: number;
  accepted: boolean;
}

export interface SessionCounters {
  received: number;
  processed: number;
  dropped: number;
  failed?: number;
}

export interface SessionResult {
  seq: number;
  counters: SessionCounters;
  instances: Instance[];
  label: string;
  label_probs: Record<string, number>;
  timings_ms: Record<string, number>;
}

export interface SessionSummary {
  session_id: string;
  received: number;
  processed: number;
  dropped: number;
  failed?: number;
  mean_latency_ms: number;
}
