/** Controller contracts: stage views map 1:1 to documented endpoints, the
 * navigation guard protects pending edits, and job runs poll at the
 * documented cadence before re-rendering from fresh server state.
 */

import { describe, expect, it } from "vitest";

import { Api, type Job, type Problem } from "../src/api.js";
import { App } from "../src/app.js";
import { POLL_INTERVAL_MS } from "../src/jobs.js";
import { FakeNetwork, fixture, mount } from "./helpers.js";

const PROJECT = "/projects/p0001";

function settle(): Promise<void> {
  return new Promise((r) => setTimeout(r, 0));
}

function fullNetwork(): FakeNetwork {
  return new FakeNetwork()
    .ok("GET", "/projects", fixture("projects"))
    .ok("GET", PROJECT, fixture("project"))
    .ok("GET", `${PROJECT}/queries`, fixture("queries"))
    .ok("GET", `${PROJECT}/studies`, fixture("studies"))
    .ok("GET", `${PROJECT}/matrix`, fixture("matrix"))
    .ok("GET", `${PROJECT}/extraction`, fixture("extraction"))
    .ok("GET", `${PROJECT}/pooled`, fixture("pooled"))
    .ok("GET", `${PROJECT}/effects`, fixture("effects"));
}

describe("App", () => {
  it("walks all four stage views, touching only documented endpoints", async () => {
    const net = fullNetwork();
    const root = mount();
    const app = new App(new Api(net.fetch), root, { confirmDiscard: () => true });
    await app.start();
    await app.openProject("p0001");

    expect(root.querySelector('[data-testid="pipeline-stage"]')?.textContent).toBe(
      "pipeline: done",
    );
    expect(root.querySelector('[data-testid="query-editor"]')).not.toBeNull();

    root.querySelector<HTMLElement>('[data-testid="nav-screen"]')!.click();
    await settle();
    expect(root.querySelector("table.matrix")).not.toBeNull();

    root.querySelector<HTMLElement>('[data-testid="nav-extract"]')!.click();
    await settle();
    expect(root.querySelector("table.extraction")).not.toBeNull();

    root.querySelector<HTMLElement>('[data-testid="nav-synthesize"]')!.click();
    await settle();
    expect(root.querySelector('[data-testid="pooled-summary"]')).not.toBeNull();

    // the complete traffic, in order — every URL a documented endpoint,
    // and nothing outside this list (the fake network throws otherwise)
    expect(net.requests.map((r) => `${r.method} ${r.url}`)).toEqual([
      "GET /projects",
      `GET ${PROJECT}`,
      `GET ${PROJECT}/queries`,
      `GET ${PROJECT}/studies`,
      `GET ${PROJECT}/matrix`,
      `GET ${PROJECT}/extraction`,
      `GET ${PROJECT}`,
      `GET ${PROJECT}/pooled`,
      `GET ${PROJECT}/effects`,
    ]);
  });

  it("blocks navigation while edits are pending until the reviewer confirms", async () => {
    const net = fullNetwork();
    const root = mount();
    let allow = false;
    let asked = 0;
    const app = new App(new Api(net.fetch), root, {
      confirmDiscard: () => {
        asked += 1;
        return allow;
      },
    });
    await app.start();
    await app.openProject("p0001");

    // type an edit into the query editor
    const editor = root.querySelector<HTMLTextAreaElement>('[data-testid="query-editor"]')!;
    editor.value = "draft query";
    editor.dispatchEvent(new Event("input"));
    expect(app.session.hasPendingEdits()).toBe(true);

    // declined confirm: still on search, edit intact, no matrix fetched
    root.querySelector<HTMLElement>('[data-testid="nav-screen"]')!.click();
    await settle();
    expect(asked).toBe(1);
    expect(app.session.stageView).toBe("search");
    expect(app.session.hasPendingEdits()).toBe(true);
    expect(root.querySelector("table.matrix")).toBeNull();
    expect(net.requests.some((r) => r.url.endsWith("/matrix"))).toBe(false);

    // accepted confirm: navigates, edits discarded deliberately
    allow = true;
    root.querySelector<HTMLElement>('[data-testid="nav-screen"]')!.click();
    await settle();
    expect(asked).toBe(2);
    expect(app.session.stageView).toBe("screen");
    expect(app.session.hasPendingEdits()).toBe(false);
    expect(root.querySelector("table.matrix")).not.toBeNull();
  });

  it("runs a job, polling at 2000 ms until terminal, then re-renders from the server", async () => {
    const queued = fixture<Job>("job_queued");
    const running = fixture<Job>("job_running");
    // the queued job, observed later in its terminal state
    const succeeded = { ...fixture<Job>("job_succeeded"), id: queued.id, kind: queued.kind };
    const net = fullNetwork()
      .ok("POST", `${PROJECT}/jobs`, queued)
      .on(
        "GET",
        `/jobs/${queued.id}`,
        { status: 200, body: running },
        { status: 200, body: succeeded },
      );

    const sleeps: number[] = [];
    const root = mount();
    const app = new App(new Api(net.fetch), root, {
      confirmDiscard: () => true,
      sleep: async (ms) => {
        sleeps.push(ms);
      },
    });
    await app.start();
    await app.openProject("p0001");

    await app.runJob("generate_queries");

    expect(sleeps).toEqual([POLL_INTERVAL_MS]);
    expect(sleeps[0]).toBe(2000);
    expect(app.session.watching).toBeNull(); // watch ended with the job
    const status = root.querySelector('[data-testid="job-status"]')?.textContent ?? "";
    expect(status).toContain("generate_queries: succeeded");
    // after success the project state and current view were re-fetched
    const urls = net.requests.map((r) => `${r.method} ${r.url}`);
    expect(urls.filter((u) => u === `GET ${PROJECT}`).length).toBeGreaterThanOrEqual(2);
    expect(urls.filter((u) => u === `GET ${PROJECT}/queries`).length).toBe(2);
  });

  it("surfaces a rejected job submission as the service's problem, verbatim", async () => {
    const problem = fixture<Problem>("problem_illegal_stage");
    const net = fullNetwork().on("POST", `${PROJECT}/jobs`, { status: 409, body: problem });
    const root = mount();
    const app = new App(new Api(net.fetch), root, { confirmDiscard: () => true });
    await app.start();
    await app.openProject("p0001");

    await app.runJob("run_screening");
    const status = root.querySelector('[data-testid="job-status"]');
    expect(status?.querySelector(".problem-code")?.textContent).toBe(problem.code);
    expect(status?.querySelector(".problem-message")?.textContent).toBe(problem.message);
  });

  it("offers the documented job kinds for the active stage view", async () => {
    const net = fullNetwork();
    const root = mount();
    const app = new App(new Api(net.fetch), root, { confirmDiscard: () => true });
    await app.start();
    await app.openProject("p0001");

    const kinds = (): string[] =>
      [...root.querySelectorAll<HTMLElement>(".job-toolbar button")].map(
        (b) => b.dataset["testid"] ?? "",
      );
    expect(kinds()).toEqual(["job-generate_queries", "job-run_search"]);
    root.querySelector<HTMLElement>('[data-testid="nav-screen"]')!.click();
    await settle();
    expect(kinds()).toEqual(["job-generate_criteria", "job-run_screening"]);
    root.querySelector<HTMLElement>('[data-testid="nav-synthesize"]')!.click();
    await settle();
    expect(kinds()).toEqual(["job-run_pooling"]);
  });
});
