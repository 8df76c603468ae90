// Payload shapes as served by the control center API. The dashboard performs
// no control computation: every number shown comes from one of these bodies.

export type Status = 'OK' | 'WARN' | 'VIOLATION' | 'NO_BASELINE'

export interface ParamSpec {
  name: string
  type: string // number | integer | string | boolean | enum | tolerance | baseline | level
  required: boolean
  default?: unknown
  choices?: string[]
  minimum?: number
  maximum?: number
}

export interface ClassifiedPoint {
  step: string
  actual: number
  planned: number | null
  deviation: number | null
  status: Status
}

export interface Panel {
  instance_id: string
  label: string
  technique: string
  kind: string
  status: 'ok' | 'failed' | 'skipped'
  params: Record<string, unknown>
  param_schema: ParamSpec[]
  data: Record<string, unknown> | null
  error: string | null
}

export interface ViewModel {
  view_id: string
  title: string
  mechanism: string
  role: string
  snapshot_version: number
  catena_version: number
  panels: Panel[]
  status_counts?: Record<string, number>
}

export interface ViewsResponse {
  project: string
  snapshot_version: number
  catena_version: number
  views: ViewModel[]
}

export interface Alert {
  alert_id: string
  project: string
  instance: string
  step: string
  status: Status
  first_seen: number
  cleared_at: number | null
  groups: string[]
}

export interface AlertsResponse {
  project: string
  snapshot_version: number
  catena_version: number
  alerts: Alert[]
}

export interface DrillRow {
  step: string
  value: number
  leaf: boolean
  planned?: number | null
  deviation?: number | null
  status?: Status
}

export interface DrillRecord {
  timestamp: string
  subject: string
  value: number
  unit: string
  step: string
}

export interface DrillPanel {
  instance_id: string
  kind: string
  step: string
  parent_value: number
  rows?: DrillRow[]
  records?: DrillRecord[]
}

export interface DrillResponse {
  view_id: string
  title: string
  mechanism: string
  role: string
  step: string
  level: number
  snapshot_version: number
  catena_version: number
  panels: DrillPanel[]
}

export interface PatchResponse {
  project: string
  catena_version: number
}

export interface ApiErrorBody {
  error: string
  detail: string
  param?: string
  reason?: string
}
