// Browser bootstrap: polls the API, renders the board for the session's
// role, and wires drill/edit interactions. Connection settings come from the
// query string (?project=...&token=...&role=...) or localStorage.

import { ApiClient, SchemaViolationError, SessionExpiredError } from './api'
import { renderBoard, type ViewBoard } from './board'
import { DrillController } from './drill'
import { ParameterEditorState } from './editor'
import { renderBoardHtml, renderDrillHtml, renderEditorHtml } from './html'

const POLL_MS = 10000

function setting(name: string, fallback = ''): string {
  const fromQuery = new URLSearchParams(window.location.search).get(name)
  if (fromQuery) {
    window.localStorage.setItem(`spcc.${name}`, fromQuery)
    return fromQuery
  }
  return window.localStorage.getItem(`spcc.${name}`) ?? fallback
}

const project = setting('project', 'ukl_course')
const token = setting('token')
const role = setting('role', 'project_manager')
const manager = setting('scope', 'all-groups') === 'all-groups'

const app = document.getElementById('app') as HTMLElement
const overlay = document.getElementById('overlay') as HTMLElement

if (!token) {
  app.innerHTML =
    '<p class="hint">No token. Open with ?project=&lt;id&gt;&amp;token=&lt;bearer&gt;&amp;role=&lt;role&gt;.</p>'
  throw new Error('missing token')
}

const api = new ApiClient(window.location.origin, token)
const drills = new DrillController((viewId, step) => api.drill(project, viewId, step))
let board: ViewBoard | null = null
let editor: ParameterEditorState | null = null

function toast(text: string): void {
  overlay.textContent = text
  overlay.classList.add('visible')
  window.setTimeout(() => overlay.classList.remove('visible'), 4000)
}

async function refresh(): Promise<void> {
  try {
    const [views, alerts] = await Promise.all([
      api.getViews(project, role),
      api.getAlerts(project),
    ])
    board = renderBoard(role, views, alerts)
    app.innerHTML = renderBoardHtml(board, manager)
    if (editor) {
      app.insertAdjacentHTML('beforeend', renderEditorHtml(editor))
    }
  } catch (e) {
    if (e instanceof SessionExpiredError) {
      app.innerHTML = '<p class="hint">Session expired; token no longer valid.</p>'
      return
    }
    // version races between the two fetches resolve on the next poll
    toast(String(e))
  }
}

async function showDrill(viewId: string, step: string): Promise<void> {
  const response = await drills.drill(viewId, step)
  if (!response) return // terminal level; affordance disabled, no request
  app.innerHTML = renderDrillHtml(response, drills.breadcrumb)
}

app.addEventListener('click', (event) => {
  const target = event.target as HTMLElement
  const row = target.closest<HTMLElement>('[data-drill-step]')
  if (row) {
    void showDrill(row.dataset.drillView!, row.dataset.drillStep!).catch((e) => toast(String(e)))
    return
  }
  const crumb = target.closest<HTMLElement>('[data-crumb]')
  if (crumb) {
    if (crumb.dataset.crumb === '/') {
      drills.reset()
      void refresh()
    } else {
      while (drills.breadcrumb.length && drills.current()!.step !== crumb.dataset.crumb) {
        drills.back()
      }
      const current = drills.current()
      if (current) app.innerHTML = renderDrillHtml(current, drills.breadcrumb)
    }
    return
  }
  const edit = target.closest<HTMLElement>('[data-edit-instance]')
  if (edit && board) {
    const instance = edit.dataset.editInstance!
    const panel = board.panels.find((p) => p.instanceId === instance)
    if (panel) {
      editor = new ParameterEditorState(instance, panel.paramSchema, panel.params, !manager)
      app.insertAdjacentHTML('beforeend', renderEditorHtml(editor))
    }
  }
})

app.addEventListener('input', (event) => {
  const field = event.target as HTMLInputElement | HTMLSelectElement
  if (editor && field.dataset.field) {
    editor.setValue(field.dataset.field, field.value)
    const form = app.querySelector('form.editor')
    if (form) form.outerHTML = renderEditorHtml(editor)
  }
})

app.addEventListener('submit', (event) => {
  const form = event.target as HTMLFormElement
  if (!form.dataset.editorInstance || !editor) return
  event.preventDefault()
  if (editor.submitDisabled) return
  api
    .patchParams(project, editor.instanceId, editor.payload())
    .then((result) => {
      editor!.applyServerResult(result.catena_version)
      toast(`applied; catena v${result.catena_version}`)
      return refresh()
    })
    .catch((e) => {
      if (e instanceof SchemaViolationError && editor) {
        editor.applyServerError(e.param, e.reason)
        const current = app.querySelector('form.editor')
        if (current) current.outerHTML = renderEditorHtml(editor)
      } else {
        toast(String(e))
      }
    })
})

void refresh()
window.setInterval(() => {
  if (!drills.breadcrumb.length) void refresh()
}, POLL_MS)
