// String renderers for the board, drill panels, and editor. DOM-free so the
// render output is directly testable; main.ts assigns the result to
// innerHTML and wires events by data attributes.

import type { BoardPanel, StatusCell, ViewBoard } from './board'
import type { ParameterEditorState } from './editor'
import type { DrillResponse } from './types'

export function escapeHtml(text: unknown): string {
  return String(text)
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
}

function fmt(value: number | null | undefined, digits = 1): string {
  if (value === null || value === undefined) return '–'
  return Number(value).toFixed(digits)
}

function cellHtml(viewId: string, cell: StatusCell): string {
  const deviation = cell.deviation === null ? '' : ` (${(cell.deviation * 100).toFixed(1)}%)`
  return (
    `<tr class="cell ${cell.cssClass}" data-drill-view="${escapeHtml(viewId)}"` +
    ` data-drill-step="${escapeHtml(cell.step)}">` +
    `<td class="step">${escapeHtml(cell.step)}</td>` +
    `<td class="num">${fmt(cell.actual)}</td>` +
    `<td class="num">${fmt(cell.planned)}</td>` +
    `<td class="status">${escapeHtml(cell.status)}${deviation}</td></tr>`
  )
}

function summaryHtml(panel: BoardPanel): string {
  if (!panel.summary) return ''
  const entries = Object.entries(panel.summary)
    .map(([k, v]) => `<span class="stat"><b>${escapeHtml(k)}</b> ${escapeHtml(v)}</span>`)
    .join(' ')
  return `<div class="summary">${entries}</div>`
}

function seriesHtml(panel: BoardPanel): string {
  return panel.series
    .map((line) => {
      const pts = line.points
        .map((p) => `<li>${escapeHtml(p.x)}: ${fmt(p.y)}</li>`)
        .join('')
      return `<ul class="series" data-label="${escapeHtml(line.label)}">${pts}</ul>`
    })
    .join('')
}

function panelHtml(panel: BoardPanel, editable: boolean): string {
  const cells = panel.cells.length
    ? `<table class="status-table"><thead><tr><th>step</th><th>actual</th><th>planned</th><th>status</th></tr></thead>` +
      `<tbody>${panel.cells.map((c) => cellHtml(panel.viewId, c)).join('')}</tbody></table>`
    : ''
  const broken =
    panel.status === 'ok'
      ? ''
      : `<p class="panel-error">${escapeHtml(panel.status)}: ${escapeHtml(panel.error ?? '')}</p>`
  const editButton =
    editable && panel.paramSchema.length
      ? `<button class="edit" data-edit-instance="${escapeHtml(panel.instanceId)}">adjust…</button>`
      : ''
  return (
    `<section class="panel" data-instance="${escapeHtml(panel.instanceId)}">` +
    `<h3>${escapeHtml(panel.label)} <small>${escapeHtml(panel.technique)}</small>${editButton}</h3>` +
    broken +
    cells +
    summaryHtml(panel) +
    seriesHtml(panel) +
    `</section>`
  )
}

export function renderBoardHtml(board: ViewBoard, editable: boolean): string {
  const badge = `<span class="alert-badge" data-count="${board.alertBadge}">${board.alertBadge}</span>`
  const versions = `<span class="versions">snapshot v${board.snapshotVersion} · catena v${board.catenaVersion}</span>`
  const byView = new Map<string, BoardPanel[]>()
  for (const panel of board.panels) {
    const list = byView.get(panel.viewId) ?? []
    list.push(panel)
    byView.set(panel.viewId, list)
  }
  const views = [...byView.entries()]
    .map(
      ([viewId, panels]) =>
        `<article class="view" data-view="${escapeHtml(viewId)}">` +
        `<h2>${escapeHtml(panels[0].viewTitle)}</h2>` +
        panels.map((p) => panelHtml(p, editable)).join('') +
        `</article>`,
    )
    .join('')
  return (
    `<header class="board-header"><h1>${escapeHtml(board.role)} board</h1>${badge}${versions}</header>` +
    `<main class="board">${views}</main>`
  )
}

export function renderDrillHtml(response: DrillResponse, breadcrumb: string[]): string {
  const crumbs = ['/']
    .concat(breadcrumb)
    .map((step) => `<a class="crumb" data-crumb="${escapeHtml(step)}">${escapeHtml(step)}</a>`)
    .join(' › ')
  const panels = response.panels
    .map((panel) => {
      if (panel.records) {
        const rows = panel.records
          .map(
            (r) =>
              `<tr class="record"><td>${escapeHtml(r.timestamp)}</td><td>${escapeHtml(r.subject)}</td>` +
              `<td class="num">${fmt(r.value)} ${escapeHtml(r.unit)}</td></tr>`,
          )
          .join('')
        return (
          `<table class="records"><caption>raw records at ${escapeHtml(panel.step)} ` +
          `(total ${fmt(panel.parent_value)})</caption>` +
          `<tbody>${rows}</tbody></table>`
        )
      }
      const rows = (panel.rows ?? [])
        .map((row) => {
          const drillable = `data-drill-view="${escapeHtml(response.view_id)}" data-drill-step="${escapeHtml(row.step)}"`
          const status = row.status
            ? `<td class="status cell-${row.status.toLowerCase().replace('_', '-')}">${escapeHtml(row.status)}</td>`
            : '<td></td>'
          const marker = row.leaf ? ' <small>(records)</small>' : ''
          return (
            `<tr class="drill-row" ${drillable}><td>${escapeHtml(row.step)}${marker}</td>` +
            `<td class="num">${fmt(row.value)}</td><td class="num">${fmt(row.planned)}</td>${status}</tr>`
          )
        })
        .join('')
      return (
        `<table class="drill"><caption>${escapeHtml(panel.step)} = ${fmt(panel.parent_value)}</caption>` +
        `<tbody>${rows}</tbody></table>`
      )
    })
    .join('')
  return `<nav class="breadcrumb">${crumbs}</nav>${panels}`
}

export function renderEditorHtml(editor: ParameterEditorState): string {
  if (editor.readOnly) return '' // developer sessions get no edit affordance
  const fields = editor.fields
    .map((field) => {
      const error = field.error ? `<span class="field-error">${escapeHtml(field.error)}</span>` : ''
      if (field.spec.type === 'enum') {
        const options = (field.spec.choices ?? [])
          .map(
            (c) =>
              `<option value="${escapeHtml(c)}"${c === field.value ? ' selected' : ''}>${escapeHtml(c)}</option>`,
          )
          .join('')
        return (
          `<label>${escapeHtml(field.name)}` +
          `<select data-field="${escapeHtml(field.name)}">${options}</select>${error}</label>`
        )
      }
      return (
        `<label>${escapeHtml(field.name)}` +
        `<input data-field="${escapeHtml(field.name)}" value="${escapeHtml(field.value)}">${error}</label>`
      )
    })
    .join('')
  const disabled = editor.submitDisabled ? ' disabled' : ''
  const formError = editor.formError
    ? `<p class="field-error">${escapeHtml(editor.formError)}</p>`
    : ''
  const applied =
    editor.appliedVersion !== null
      ? `<p class="applied">applied as catena v${editor.appliedVersion}</p>`
      : ''
  return (
    `<form class="editor" data-editor-instance="${escapeHtml(editor.instanceId)}">` +
    `<h3>parameters of ${escapeHtml(editor.instanceId)}</h3>` +
    fields +
    formError +
    applied +
    `<button type="submit"${disabled}>apply</button></form>`
  )
}
