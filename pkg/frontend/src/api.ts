// Thin typed client for the observation service. The session token
// lives in memory only.

import type {
  CurationRecord,
  FeedbackDoc,
  Project,
  UploadReceipt,
} from './types.js';

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    public readonly detail: string,
  ) {
    super(`[${code}] ${detail}`);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export interface ObservationMetadata {
  media_width: number;
  media_height: number;
  mode?: 'ml_assisted' | 'expert';
  captured_at?: string;
  geo?: { lat: number; lon: number };
  detections?: Array<{
    x_min: number;
    y_min: number;
    x_max: number;
    y_max: number;
    class_id: number;
    confidence?: number;
  }>;
  checksum?: string;
}

export class ServiceClient {
  private token: string | null = null;

  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  setToken(token: string | null): void {
    this.token = token;
  }

  async createAccount(body: {
    method: 'email_password' | 'anonymous';
    email?: string;
    credential?: string;
    role?: 'researcher' | 'participant' | 'curator';
  }): Promise<{ account_id: string }> {
    return this.request('POST', '/accounts', body);
  }

  async login(email: string, credential: string): Promise<string> {
    const result = await this.request<{ token: string }>('POST', '/tokens', {
      email,
      credential,
    });
    this.token = result.token;
    return result.token;
  }

  async loginAnonymous(accountId: string): Promise<string> {
    const result = await this.request<{ token: string }>('POST', '/tokens', {
      account_id: accountId,
    });
    this.token = result.token;
    return result.token;
  }

  async createProject(name: string, labelMap: string[]): Promise<Project> {
    return this.request('POST', '/projects', { name, label_map: labelMap });
  }

  async uploadObservation(
    projectId: string,
    metadata: ObservationMetadata,
    media: Blob,
    idempotencyKey?: string,
  ): Promise<UploadReceipt> {
    const form = new FormData();
    form.set('metadata', JSON.stringify(metadata));
    form.set('media', media, 'media.bin');
    const headers: Record<string, string> = this.authHeaders();
    if (idempotencyKey) {
      headers['Idempotency-Key'] = idempotencyKey;
    }
    const response = await this.fetchImpl(
      `${this.baseUrl}/projects/${projectId}/observations`,
      { method: 'POST', headers, body: form },
    );
    return this.decode(response);
  }

  async curateObservation(
    observationId: string,
    verdict: 'accepted' | 'rejected' | 'corrected',
    options: { correctedBoxes?: unknown[]; feedbackText?: string } = {},
  ): Promise<CurationRecord> {
    return this.request('POST', `/observations/${observationId}/curation`, {
      verdict,
      corrected_boxes: options.correctedBoxes,
      feedback_text: options.feedbackText,
    });
  }

  async retrainingExport(
    projectId: string,
    filter: { since?: string; modes?: string[] } = {},
  ): Promise<unknown> {
    const params = new URLSearchParams();
    if (filter.since) params.set('since', filter.since);
    if (filter.modes?.length) params.set('modes', filter.modes.join(','));
    const query = params.toString();
    return this.request(
      'GET',
      `/projects/${projectId}/retraining-export${query ? `?${query}` : ''}`,
    );
  }

  async getFeedback(observationId: string): Promise<FeedbackDoc> {
    return this.request('GET', `/observations/${observationId}/feedback`);
  }

  private authHeaders(): Record<string, string> {
    return this.token ? { Authorization: `Bearer ${this.token}` } : {};
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = this.authHeaders();
    let payload: string | undefined;
    if (body !== undefined) {
      headers['Content-Type'] = 'application/json';
      payload = JSON.stringify(body);
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: payload,
    });
    return this.decode(response);
  }

  private async decode<T>(response: Response): Promise<T> {
    const text = await response.text();
    const data = text ? JSON.parse(text) : null;
    if (!response.ok) {
      const code = data?.error ?? `HTTP_${response.status}`;
      const detail = data?.detail ?? response.statusText;
      throw new ApiError(response.status, code, detail);
    }
    return data as T;
  }
}
