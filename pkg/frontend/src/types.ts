// Wire documents exactly as the gateway emits them.

export interface AlertRow {
  ts: string;
  symbol: string;
  severity: "inconclusive" | "significant" | "critical";
}

export interface Notification {
  id: number;
  entity: string;
  episode: number;
  decided_at_index: number;
  too_late: boolean;
  timestamp: string;
  alerts: AlertRow[];
}

export interface NotificationBatch {
  notifications: Notification[];
  next: number;
}

export interface EntitySummary {
  id: string;
  status: "normal" | "watch" | "preempted";
  alert_count: number;
  last_ts: string | null;
  decision: string | null;
  escalated: boolean;
}

export interface TimelineView {
  id: string;
  status: "normal" | "watch" | "preempted";
  episode: number;
  escalated: boolean;
  alerts: AlertRow[];
  map_states: string[];
  marginals: number[][];
  decision: string | null;
  decided_at_index: number | null;
}

export interface BlockEntry {
  target: string;
  reason: string;
  ttl_seconds: number;
  created_at: string;
  created_by: string;
  expires_at: string;
  seq: number;
}

export type OperatorAction = "confirm_block" | "dismiss" | "escalate";
