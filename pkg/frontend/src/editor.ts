// Schema-driven parameter editor state: pending edits are validated against
// the technique's declared schema before submit is enabled; server-side
// rejections land on the offending field without losing input.

import type { ParamSpec } from './types'

export interface FieldState {
  name: string // dotted for tolerance members, e.g. "tolerance.warn"
  spec: ParamSpec
  value: unknown
  error: string | null
}

interface ToleranceValue {
  mode: string
  warn: number
  violation: number
}

function coerce(spec: ParamSpec, raw: unknown): unknown {
  if (typeof raw !== 'string') return raw
  if (spec.type === 'number' || spec.type === 'integer') {
    const n = Number(raw)
    return Number.isNaN(n) ? raw : n
  }
  if (spec.type === 'boolean') return raw === 'true'
  return raw
}

function checkScalar(spec: ParamSpec, value: unknown): string | null {
  switch (spec.type) {
    case 'number':
      if (typeof value !== 'number' || Number.isNaN(value)) return 'expected a number'
      break
    case 'integer':
      if (typeof value !== 'number' || !Number.isInteger(value)) return 'expected an integer'
      break
    case 'string':
    case 'baseline':
      if (typeof value !== 'string' || !value) return 'expected a non-empty string'
      break
    case 'boolean':
      if (typeof value !== 'boolean') return 'expected a boolean'
      break
    case 'enum':
      if (!spec.choices || !spec.choices.includes(String(value))) {
        return `expected one of ${(spec.choices ?? []).join(', ')}`
      }
      break
    default:
      break
  }
  if (typeof value === 'number') {
    if (spec.minimum !== undefined && value < spec.minimum) return `must be >= ${spec.minimum}`
    if (spec.maximum !== undefined && value > spec.maximum) return `must be <= ${spec.maximum}`
  }
  return null
}

export class ParameterEditorState {
  readonly fields: FieldState[] = []
  applied: Record<string, unknown>
  appliedVersion: number | null = null
  formError: string | null = null

  constructor(
    readonly instanceId: string,
    readonly schema: ParamSpec[],
    applied: Record<string, unknown>,
    readonly readOnly = false,
  ) {
    this.applied = { ...applied }
    for (const spec of schema) {
      if (spec.type === 'tolerance') {
        const tol = (applied[spec.name] ?? { mode: 'relative', warn: 0, violation: 0 }) as ToleranceValue
        this.fields.push(
          {
            name: `${spec.name}.mode`,
            spec: { name: 'mode', type: 'enum', required: true, choices: ['relative', 'absolute'] },
            value: tol.mode,
            error: null,
          },
          {
            name: `${spec.name}.warn`,
            spec: { name: 'warn', type: 'number', required: true, minimum: 0 },
            value: tol.warn,
            error: null,
          },
          {
            name: `${spec.name}.violation`,
            spec: { name: 'violation', type: 'number', required: true, minimum: 0 },
            value: tol.violation,
            error: null,
          },
        )
      } else {
        this.fields.push({
          name: spec.name,
          spec,
          value: applied[spec.name] ?? spec.default ?? '',
          error: null,
        })
      }
    }
    this.validate()
  }

  field(name: string): FieldState {
    const field = this.fields.find((f) => f.name === name)
    if (!field) throw new Error(`no field ${name}`)
    return field
  }

  setValue(name: string, raw: unknown): void {
    const field = this.field(name)
    field.value = coerce(field.spec, raw)
    this.formError = null
    this.validate()
  }

  validate(): boolean {
    let ok = true
    for (const field of this.fields) {
      field.error = checkScalar(field.spec, field.value)
      if (field.error) ok = false
    }
    // cross-field rule of the tolerance band: warn must not exceed violation
    for (const spec of this.schema) {
      if (spec.type !== 'tolerance') continue
      const warn = this.fields.find((f) => f.name === `${spec.name}.warn`)
      const violation = this.fields.find((f) => f.name === `${spec.name}.violation`)
      if (
        warn &&
        violation &&
        !warn.error &&
        !violation.error &&
        (warn.value as number) > (violation.value as number)
      ) {
        violation.error = 'warn threshold must not exceed violation threshold'
        ok = false
      }
    }
    return ok
  }

  get dirty(): boolean {
    return JSON.stringify(this.payload()) !== JSON.stringify(this.applied)
  }

  get submitDisabled(): boolean {
    return this.readOnly || !this.validate()
  }

  /** Full params object to PATCH: pending values merged over applied ones. */
  payload(): Record<string, unknown> {
    const out: Record<string, unknown> = { ...this.applied }
    for (const spec of this.schema) {
      if (spec.type === 'tolerance') {
        out[spec.name] = {
          mode: this.field(`${spec.name}.mode`).value,
          warn: this.field(`${spec.name}.warn`).value,
          violation: this.field(`${spec.name}.violation`).value,
        }
      } else {
        out[spec.name] = this.field(spec.name).value
      }
    }
    return out
  }

  /** Server accepted the edit: pending becomes applied. */
  applyServerResult(catenaVersion: number): void {
    this.applied = this.payload()
    this.appliedVersion = catenaVersion
    this.formError = null
  }

  /** Server rejected one parameter: surface it on the field, keep input. */
  applyServerError(param: string, reason: string): void {
    const hit = this.fields.filter((f) => f.name === param || f.name.startsWith(`${param}.`))
    if (hit.length) {
      hit[hit.length - 1].error = reason
    } else {
      this.formError = `${param}: ${reason}`
    }
  }
}
