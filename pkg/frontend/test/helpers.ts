/** Test harness: fixture loading and a strict fake network.
 *
 * Every fixture under test/fixtures/ is a captured response from the real
 * service (see scripts/capture_fixtures.py) — nothing is hand-written. The
 * fake fetch refuses any request that was not explicitly routed, which is how
 * the suite proves the UI talks only to documented endpoints and computes no
 * domain values of its own.
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const FIXTURES = join(dirname(fileURLToPath(import.meta.url)), "fixtures");

export function fixture<T = unknown>(name: string): T {
  return JSON.parse(readFileSync(join(FIXTURES, `${name}.json`), "utf8")) as T;
}

export interface RecordedRequest {
  method: string;
  url: string;
  body: unknown;
}

type Responder = (req: RecordedRequest) => { status: number; body: unknown };

/** Minimal Response stand-in covering exactly what the API client touches. */
function asResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: "",
    json: async () => JSON.parse(JSON.stringify(body)),
  } as unknown as Response;
}

export class FakeNetwork {
  readonly requests: RecordedRequest[] = [];
  private routes = new Map<string, Responder[]>();

  /** Queue responses for "METHOD /path". Multiple calls queue in order; the
   * last responder sticks for any further hits. */
  on(method: string, path: string, ...responders: (Responder | { status: number; body: unknown })[]): this {
    const key = `${method.toUpperCase()} ${path}`;
    const queue = this.routes.get(key) ?? [];
    for (const r of responders) {
      queue.push(typeof r === "function" ? r : () => r);
    }
    this.routes.set(key, queue);
    return this;
  }

  ok(method: string, path: string, body: unknown): this {
    return this.on(method, path, { status: method === "POST" ? 201 : 200, body });
  }

  readonly fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const method = (init?.method ?? "GET").toUpperCase();
    const body = typeof init?.body === "string" ? JSON.parse(init.body) : undefined;
    const request: RecordedRequest = { method, url: input, body };
    this.requests.push(request);
    const queue = this.routes.get(`${method} ${input}`);
    if (!queue || queue.length === 0) {
      // un-routed traffic is a test failure: the UI called an endpoint the
      // test did not allow
      throw new Error(`unexpected request: ${method} ${input}`);
    }
    const responder = queue.length > 1 ? queue.shift()! : queue[0]!;
    const { status, body: responseBody } = responder(request);
    return asResponse(status, responseBody);
  };

  calls(method?: string): RecordedRequest[] {
    return method ? this.requests.filter((r) => r.method === method) : [...this.requests];
  }
}

/** Rendered text of the pmid column, top to bottom, for a rendered table. */
export function columnText(root: HTMLElement, selector: string): string[] {
  return [...root.querySelectorAll<HTMLElement>(selector)].map((n) => n.textContent ?? "");
}

export function mount(): HTMLElement {
  const node = document.createElement("div");
  document.body.append(node);
  return node;
}
