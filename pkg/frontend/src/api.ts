// Thin fetch client for the control center endpoints. All filtering and
// authorization stay server-side; this only moves bodies.

import type {
  AlertsResponse,
  ApiErrorBody,
  DrillResponse,
  PatchResponse,
  ViewsResponse,
} from './types'

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly body: ApiErrorBody,
  ) {
    super(`${body.error}: ${body.detail}`)
  }
}

export class SessionExpiredError extends ApiError {}

export class SchemaViolationError extends ApiError {
  get param(): string {
    return this.body.param ?? ''
  }
  get reason(): string {
    return this.body.reason ?? this.body.detail
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: BodyInit,
    contentType?: string,
  ): Promise<T> {
    const headers: Record<string, string> = { Authorization: `Bearer ${this.token}` }
    if (contentType) headers['Content-Type'] = contentType
    const response = await this.fetchFn(this.baseUrl + path, { method, headers, body })
    const text = await response.text()
    const parsed = text ? JSON.parse(text) : {}
    if (!response.ok) {
      const errBody = parsed as ApiErrorBody
      if (response.status === 401) throw new SessionExpiredError(401, errBody)
      if (errBody.error === 'SchemaViolation') throw new SchemaViolationError(response.status, errBody)
      throw new ApiError(response.status, errBody)
    }
    return parsed as T
  }

  getViews(project: string, role?: string): Promise<ViewsResponse> {
    const query = role ? `?role=${encodeURIComponent(role)}` : ''
    return this.request('GET', `/projects/${project}/views${query}`)
  }

  getAlerts(project: string, since = 0): Promise<AlertsResponse> {
    return this.request('GET', `/projects/${project}/alerts?since=${since}`)
  }

  drill(project: string, viewId: string, step: string): Promise<DrillResponse> {
    return this.request(
      'GET',
      `/projects/${project}/views/${viewId}/drill?step=${encodeURIComponent(step)}`,
    )
  }

  patchParams(
    project: string,
    instanceId: string,
    params: Record<string, unknown>,
  ): Promise<PatchResponse> {
    return this.request(
      'PATCH',
      `/projects/${project}/catena/functions/${instanceId}`,
      JSON.stringify(params),
      'application/json',
    )
  }

  ingest(project: string, payload: string, contentType: string, source?: string): Promise<unknown> {
    const query = source ? `?source=${encodeURIComponent(source)}` : ''
    return this.request('POST', `/projects/${project}/measurements${query}`, payload, contentType)
  }
}
