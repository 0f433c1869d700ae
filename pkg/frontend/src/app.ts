/** Workbench controller: project chrome, stage navigation, and job running.
 *
 * Stage views are read/adjudicate surfaces; the pipeline only advances
 * through documented job submissions, and the project header always reflects
 * the server's own notion of stage, versions, and staleness.
 */

import type { Api, Job, Pico, ProjectState } from "./api.js";
import { ApiError } from "./api.js";
import { el, clear } from "./dom.js";
import { STAGE_JOBS, watchJob, type Sleep } from "./jobs.js";
import { STAGE_VIEWS, WorkbenchSession, type ConfirmDiscard, type StageView } from "./session.js";
import { problemBox } from "./views/common.js";
import { ExtractView } from "./views/extract.js";
import { ScreenView } from "./views/screen.js";
import { SearchView } from "./views/search.js";
import { SynthesizeView } from "./views/synthesize.js";

const STAGE_LABELS: Record<StageView, string> = {
  search: "Search",
  screen: "Screen",
  extract: "Extract",
  synthesize: "Synthesize",
};

export interface AppOptions {
  confirmDiscard?: ConfirmDiscard;
  sleep?: Sleep;
}

export class App {
  readonly session = new WorkbenchSession();
  private project: ProjectState | null = null;
  private readonly confirmDiscard: ConfirmDiscard;
  private readonly sleep: Sleep | undefined;

  private readonly picker = el("div", { class: "picker", "data-testid": "picker" });
  private readonly projectBar = el("div", { class: "project-bar", "data-testid": "project-bar" });
  private readonly nav = el("nav", { class: "stage-nav", "data-testid": "stage-nav" });
  private readonly toolbar = el("div", { class: "job-toolbar", "data-testid": "job-toolbar" });
  private readonly jobStatus = el("div", { class: "job-status", "data-testid": "job-status" });
  private readonly viewRoot = el("main", { class: "view", "data-testid": "view" });

  constructor(
    private readonly api: Api,
    private readonly root: HTMLElement,
    options: AppOptions = {},
  ) {
    this.confirmDiscard = options.confirmDiscard ?? (() => true);
    this.sleep = options.sleep;
    root.append(
      el("h1", {}, ["evisynth workbench"]),
      this.picker,
      this.projectBar,
      this.nav,
      this.toolbar,
      this.jobStatus,
      this.viewRoot,
    );
  }

  async start(): Promise<void> {
    await this.renderPicker();
  }

  // ---------------------------------------------------------- project picker

  private async renderPicker(): Promise<void> {
    clear(this.picker);
    let projects: string[] = [];
    try {
      projects = (await this.api.listProjects()).projects;
    } catch (error) {
      if (error instanceof ApiError) {
        this.picker.append(problemBox(error));
      }
    }
    const select = el("select", { "data-testid": "project-select", "aria-label": "project" });
    for (const id of projects) {
      select.append(el("option", { value: id }, [id]));
    }
    const open = el("button", { type: "button", "data-testid": "open-project" }, ["Open"]);
    open.addEventListener("click", () => {
      if (select.value) {
        void this.openProject(select.value);
      }
    });
    this.picker.append(select, open, this.newProjectForm());
  }

  private newProjectForm(): HTMLElement {
    const details = el("details", { class: "new-project" });
    details.append(el("summary", {}, ["New review"]));
    const names: (keyof Pico)[] = ["title", "population", "intervention", "comparison", "outcome"];
    const inputs = new Map<keyof Pico, HTMLInputElement>();
    for (const name of names) {
      const input = el("input", { type: "text", "data-testid": `pico-${name}`, placeholder: name });
      inputs.set(name, input);
      details.append(input);
    }
    const create = el("button", { type: "button", "data-testid": "create-project" }, ["Create"]);
    create.addEventListener("click", () => {
      const pico = Object.fromEntries(
        names.map((name) => [name, inputs.get(name)?.value ?? ""]),
      ) as unknown as Pico;
      void this.createProject(pico);
    });
    details.append(create);
    return details;
  }

  private async createProject(pico: Pico): Promise<void> {
    clear(this.jobStatus);
    try {
      const created = await this.api.createProject(pico);
      await this.openProject(created.id);
    } catch (error) {
      if (error instanceof ApiError) {
        this.jobStatus.append(problemBox(error));
        return;
      }
      throw error;
    }
  }

  async openProject(id: string): Promise<void> {
    this.session.openProject(id);
    await this.refreshProject();
    this.renderChrome();
    await this.showStage(this.session.stageView, { force: true });
  }

  private async refreshProject(): Promise<void> {
    if (!this.session.projectId) {
      return;
    }
    this.project = await this.api.getProject(this.session.projectId);
  }

  // ------------------------------------------------------------------ chrome

  private renderChrome(): void {
    clear(this.projectBar);
    clear(this.nav);
    clear(this.toolbar);
    const project = this.project;
    if (!project) {
      return;
    }

    this.projectBar.append(
      el("strong", {}, [project.id]),
      el("span", { class: "meta" }, [` ${project.pico.title}`]),
      el("span", { class: "stage-chip", "data-testid": "pipeline-stage" }, [
        `pipeline: ${project.stage}`,
      ]),
      project.busy ? el("span", { class: "badge badge-busy" }, ["job running"]) : "",
    );
    const artifacts = Object.entries(project.artifacts)
      .map(([name, head]) => `${name} v${head.version}${head.stale ? " (stale)" : ""}`)
      .join(" · ");
    if (artifacts) {
      this.projectBar.append(el("div", { class: "artifact-heads" }, [artifacts]));
    }

    for (const view of STAGE_VIEWS) {
      const button = el(
        "button",
        {
          type: "button",
          class: view === this.session.stageView ? "stage active" : "stage",
          "data-testid": `nav-${view}`,
        },
        [STAGE_LABELS[view]],
      );
      button.addEventListener("click", () => void this.showStage(view));
      this.nav.append(button);
    }

    for (const job of STAGE_JOBS[this.session.stageView] ?? []) {
      const button = el(
        "button",
        { type: "button", class: "job", "data-testid": `job-${job.kind}` },
        [job.label],
      );
      button.addEventListener("click", () => void this.runJob(job.kind));
      this.toolbar.append(button);
    }
  }

  // ------------------------------------------------------------------ stages

  async showStage(view: StageView, options: { force?: boolean } = {}): Promise<void> {
    if (!options.force && !this.session.navigate(view, this.confirmDiscard)) {
      return; // navigation declined; pending edits remain
    }
    this.renderChrome();
    clear(this.viewRoot);
    const projectId = this.session.projectId;
    if (!projectId) {
      return;
    }
    switch (this.session.stageView) {
      case "search":
        await new SearchView(this.api, projectId, this.session, this.viewRoot).load();
        break;
      case "screen":
        await new ScreenView(this.api, projectId, this.viewRoot).load();
        break;
      case "extract":
        await new ExtractView(this.api, projectId, this.session, this.viewRoot).load();
        break;
      case "synthesize":
        await new SynthesizeView(this.api, projectId, this.viewRoot).load();
        break;
    }
  }

  // -------------------------------------------------------------------- jobs

  private setJobStatus(job: Job): void {
    clear(this.jobStatus);
    this.jobStatus.append(
      el("span", { class: `job-state job-${job.status}` }, [
        `${job.kind}: ${job.status}${job.progress === null ? "" : ` — ${Math.round(job.progress * 100)}%`}`,
      ]),
    );
    if (job.error) {
      this.jobStatus.append(problemBox(new ApiError(0, job.error)));
    }
  }

  async runJob(kind: string): Promise<void> {
    const projectId = this.session.projectId;
    if (!projectId) {
      return;
    }
    clear(this.jobStatus);
    let submitted: Job;
    try {
      submitted = await this.api.submitJob(projectId, kind);
    } catch (error) {
      if (error instanceof ApiError) {
        this.jobStatus.append(problemBox(error));
        return;
      }
      throw error;
    }
    this.session.watching = { jobId: submitted.id, kind, status: submitted.status };
    const done = await watchJob(
      this.api,
      submitted.id,
      (job) => {
        this.session.watching = { jobId: job.id, kind, status: job.status };
        this.setJobStatus(job);
      },
      this.sleep,
    );
    this.session.watching = null;
    await this.refreshProject();
    if (done.status === "succeeded") {
      await this.showStage(this.session.stageView, { force: true });
    } else {
      this.renderChrome(); // keep the error on screen, refresh stage/versions
    }
  }
}
