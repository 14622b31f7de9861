// Thin fetch client for the collaboration service. All policy logic lives
// server-side; this module only moves JSON.

import {
  CorrectionResponse,
  CreateSessionResponse,
  MetricsResponse,
  PickResponse,
  SessionEvent,
} from './types';

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const res = await fetch(base + path, {
    headers: { 'content-type': 'application/json' },
    ...init,
  });
  const body = await res.json();
  if (!res.ok) {
    const detail = body?.detail ?? {};
    throw new ApiError(res.status, detail.code ?? 'unknown', detail.message ?? res.statusText);
  }
  return body as T;
}

export interface CreateSessionRequest {
  env: string;
  agent_kind: string;
  checkpoint?: string;
  seed?: number;
  alpha?: number;
  simulated_leader?: boolean;
}

export class ServiceClient {
  constructor(private base: string = '') {}

  createSession(body: CreateSessionRequest): Promise<CreateSessionResponse> {
    return request(this.base, '/v1/sessions', { method: 'POST', body: JSON.stringify(body) });
  }

  submitPick(sessionId: string, objectId: number): Promise<PickResponse> {
    return request(this.base, `/v1/sessions/${sessionId}/pick`, {
      method: 'POST',
      body: JSON.stringify({ object_id: objectId }),
    });
  }

  submitCorrection(sessionId: string, locationId: number): Promise<CorrectionResponse> {
    return request(this.base, `/v1/sessions/${sessionId}/correction`, {
      method: 'POST',
      body: JSON.stringify({ location_id: locationId }),
    });
  }

  getMetrics(sessionId: string): Promise<MetricsResponse> {
    return request(this.base, `/v1/sessions/${sessionId}/metrics`);
  }

  listCheckpoints(): Promise<{ checkpoints: { name: string }[] }> {
    return request(this.base, '/v1/checkpoints');
  }

  getEvents(sessionId: string, since: number): Promise<{ events: SessionEvent[]; next: number }> {
    return request(this.base, `/v1/sessions/${sessionId}/events?since=${since}`);
  }

  /** Server-sent event stream; falls back to polling where EventSource is missing. */
  streamEvents(
    sessionId: string,
    onEvent: (ev: SessionEvent) => void,
    onError?: () => void,
  ): () => void {
    if (typeof EventSource !== 'undefined') {
      const es = new EventSource(`${this.base}/v1/sessions/${sessionId}/stream`);
      const handler = (ev: MessageEvent) => onEvent(JSON.parse(ev.data));
      for (const kind of ['state', 'turn', 'metrics', 'theta']) {
        es.addEventListener(kind, handler as EventListener);
      }
      es.onerror = () => onError?.();
      return () => es.close();
    }
    let cursor = 0;
    let stopped = false;
    const poll = async () => {
      while (!stopped) {
        try {
          const { events, next } = await this.getEvents(sessionId, cursor);
          events.forEach(onEvent);
          cursor = next;
        } catch {
          onError?.();
        }
        await new Promise((r) => setTimeout(r, 250));
      }
    };
    void poll();
    return () => {
      stopped = true;
    };
  }
}
