// Drill navigation: breadcrumb stack with a response cache so stepping back
// never refetches. Raw-record panels are the terminal level; drilling there
// is a no-op with no request.

import type { DrillResponse } from './types'

export type DrillFetcher = (viewId: string, step: string) => Promise<DrillResponse>

export function isTerminal(response: DrillResponse): boolean {
  return response.panels.every((p) => p.records !== undefined)
}

export class DrillController {
  requestCount = 0
  private readonly cache = new Map<string, DrillResponse>()
  private readonly stack: DrillResponse[] = []

  constructor(private readonly fetcher: DrillFetcher) {}

  get breadcrumb(): string[] {
    return this.stack.map((r) => r.step)
  }

  current(): DrillResponse | null {
    return this.stack.length ? this.stack[this.stack.length - 1] : null
  }

  /** Drill one level into `step`; returns null (and issues no request) when
   *  the current panel is already at raw-record granularity. */
  async drill(viewId: string, step: string): Promise<DrillResponse | null> {
    const current = this.current()
    if (current && isTerminal(current)) return null
    const key = `${viewId}|${step}`
    let response = this.cache.get(key)
    if (!response) {
      this.requestCount += 1
      response = await this.fetcher(viewId, step)
      this.cache.set(key, response)
    }
    this.stack.push(response)
    return response
  }

  /** Step back to the previous panel, served from cache without a refetch. */
  back(): DrillResponse | null {
    this.stack.pop()
    return this.current()
  }

  reset(): void {
    this.stack.length = 0
  }
}
