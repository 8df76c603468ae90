// Board assembly: turns one views payload plus one alerts payload into the
// render model. Panels from different endpoints may only be shown together
// when they cite the same (snapshot, catena) version pair.

import type {
  AlertsResponse,
  ClassifiedPoint,
  Panel,
  Status,
  ViewsResponse,
} from './types'

export class VersionMismatchError extends Error {
  constructor(
    public readonly expected: [number, number],
    public readonly got: [number, number],
  ) {
    super(`mixed-version render: expected v${expected.join('/')}, got v${got.join('/')}`)
  }
}

export interface StatusCell {
  step: string
  actual: number
  planned: number | null
  deviation: number | null
  status: Status
  cssClass: string
}

export interface SeriesLine {
  label: string
  points: Array<{ x: number | string; y: number }>
}

export interface BoardPanel {
  viewId: string
  viewTitle: string
  mechanism: string
  instanceId: string
  label: string
  technique: string
  kind: string
  status: string
  error: string | null
  cells: StatusCell[]
  series: SeriesLine[]
  summary: Record<string, unknown> | null
  params: Record<string, unknown>
  paramSchema: Panel['param_schema']
}

export interface ViewBoard {
  role: string
  snapshotVersion: number
  catenaVersion: number
  alertBadge: number
  panels: BoardPanel[]
  statusTotals: Record<string, number>
}

const STATUS_CLASSES: Record<Status, string> = {
  OK: 'cell-ok',
  WARN: 'cell-warn',
  VIOLATION: 'cell-violation',
  NO_BASELINE: 'cell-no-baseline',
}

export function statusClass(status: Status): string {
  return STATUS_CLASSES[status] ?? 'cell-unknown'
}

function assertVersionPair(expected: [number, number], got: [number, number]): void {
  if (expected[0] !== got[0] || expected[1] !== got[1]) {
    throw new VersionMismatchError(expected, got)
  }
}

function panelCells(panel: Panel): StatusCell[] {
  const data = panel.data
  if (!data || !Array.isArray(data.points)) return []
  const points = data.points as Array<Record<string, unknown>>
  if (!points.length || points[0].status === undefined) return []
  return (points as unknown as ClassifiedPoint[]).map((p) => ({
    step: p.step,
    actual: p.actual,
    planned: p.planned,
    deviation: p.deviation,
    status: p.status,
    cssClass: statusClass(p.status),
  }))
}

function panelSeries(panel: Panel): SeriesLine[] {
  const data = panel.data
  if (!data) return []
  if (panel.kind === 'forecast-series' && Array.isArray(data.points)) {
    const pts = data.points as Array<{ t: number; value: number }>
    return [{ label: panel.label, points: pts.map((p) => ({ x: p.t, y: p.value })) }]
  }
  if (panel.kind === 'rolled-up-series' && Array.isArray(data.points)) {
    const pts = data.points as Array<{ step: string; value: number }>
    return [{ label: panel.label, points: pts.map((p) => ({ x: p.step, y: p.value })) }]
  }
  return []
}

export function renderBoard(
  role: string,
  views: ViewsResponse,
  alerts: AlertsResponse,
): ViewBoard {
  const pair: [number, number] = [views.snapshot_version, views.catena_version]
  assertVersionPair(pair, [alerts.snapshot_version, alerts.catena_version])

  const panels: BoardPanel[] = []
  const statusTotals: Record<string, number> = {}
  for (const vm of views.views) {
    assertVersionPair(pair, [vm.snapshot_version, vm.catena_version])
    for (const panel of vm.panels) {
      const cells = panelCells(panel)
      for (const cell of cells) {
        statusTotals[cell.status] = (statusTotals[cell.status] ?? 0) + 1
      }
      panels.push({
        viewId: vm.view_id,
        viewTitle: vm.title,
        mechanism: vm.mechanism,
        instanceId: panel.instance_id,
        label: panel.label,
        technique: panel.technique,
        kind: panel.kind,
        status: panel.status,
        error: panel.error,
        cells,
        series: panelSeries(panel),
        summary: panel.kind === 'summary' ? panel.data : null,
        params: panel.params,
        paramSchema: panel.param_schema,
      })
    }
  }
  const alertBadge = alerts.alerts.filter((a) => a.cleared_at === null).length
  return {
    role,
    snapshotVersion: views.snapshot_version,
    catenaVersion: views.catena_version,
    alertBadge,
    panels,
    statusTotals,
  }
}
