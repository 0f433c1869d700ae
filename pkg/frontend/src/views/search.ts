/** Search stage: queries (with the refinement audit trail) and retrieved
 * studies. Query edits are pending until saved with a PUT; include/exclude
 * flips post set_study_included decisions.
 */

import type { Api, Envelope, QueriesContent, StudiesContent } from "../api.js";
import { ApiError } from "../api.js";
import { el, clear } from "../dom.js";
import type { WorkbenchSession } from "../session.js";
import { problemBox, renderLoadFailure, staleBadge } from "./common.js";

export const QUERIES_EDIT_KEY = "queries";

export class SearchView {
  private queries: Envelope<QueriesContent> | null = null;
  private studies: (Envelope<StudiesContent> & { excluded_pmids: string[] }) | null = null;
  private queriesError: unknown = null;
  private studiesError: unknown = null;
  private postError: ApiError | null = null;

  constructor(
    private readonly api: Api,
    private readonly projectId: string,
    private readonly session: WorkbenchSession,
    private readonly root: HTMLElement,
  ) {}

  async load(): Promise<void> {
    clear(this.root);
    const [queries, studies] = await Promise.allSettled([
      this.api.queries(this.projectId),
      this.api.studies(this.projectId),
    ]);
    this.queries = queries.status === "fulfilled" ? queries.value : null;
    this.queriesError = queries.status === "rejected" ? queries.reason : null;
    this.studies = studies.status === "fulfilled" ? studies.value : null;
    this.studiesError = studies.status === "rejected" ? studies.reason : null;
    this.render();
  }

  private render(): void {
    clear(this.root);
    this.root.append(this.renderQueries(), this.renderStudies());
    if (this.postError) {
      this.root.append(problemBox(this.postError));
    }
  }

  private renderQueries(): HTMLElement {
    const section = el("section", { class: "queries", "data-testid": "queries" });
    section.append(el("h2", {}, ["Queries"]));
    if (this.queriesError) {
      renderLoadFailure(section, this.queriesError, () => void this.load());
      return section;
    }
    const env = this.queries;
    if (!env) {
      return section;
    }
    section.append(
      el("span", { class: "meta" }, [`v${env.version}`]),
      staleBadge(env.stale),
    );

    const pendingInitial = this.session.getEdit(QUERIES_EDIT_KEY);
    const initialBox = el("textarea", {
      class: "query-editor",
      "data-testid": "query-editor",
      rows: "4",
      "aria-label": "search queries, one per line",
    });
    initialBox.value = pendingInitial ? pendingInitial.value : env.content.initial.join("\n");
    initialBox.addEventListener("input", () => {
      this.session.setEdit(QUERIES_EDIT_KEY, initialBox.value);
    });

    const finalBox = el("input", {
      type: "text",
      class: "final-query",
      "data-testid": "final-query",
      "aria-label": "refined query",
    });
    finalBox.value = env.content.final;
    finalBox.addEventListener("input", () => {
      this.session.setEdit(QUERIES_EDIT_KEY, initialBox.value);
    });

    const save = el("button", { type: "button", "data-testid": "save-queries" }, [
      "Save queries",
    ]);
    save.addEventListener("click", () => {
      this.session.setEdit(QUERIES_EDIT_KEY, initialBox.value);
      void this.saveQueries(initialBox.value, finalBox.value);
    });

    section.append(initialBox, finalBox, save);

    const audit = el("details", { class: "query-audit" });
    audit.append(
      el("summary", {}, ["refinement audit"]),
      el("p", {}, [`terms identified: ${env.content.terms_identified.join(", ") || "(none)"}`]),
      el("p", {}, [`terms kept: ${env.content.terms_filtered.join(", ") || "(none)"}`]),
      el("p", {}, [`undeclared terms: ${env.content.added_terms.join(", ") || "(none)"}`]),
      el("p", {}, [`context studies: ${env.content.context_pmids.join(", ") || "(none)"}`]),
    );
    section.append(audit);
    return section;
  }

  private renderStudies(): HTMLElement {
    const section = el("section", { class: "studies", "data-testid": "studies" });
    section.append(el("h2", {}, ["Studies"]));
    if (this.studiesError) {
      renderLoadFailure(section, this.studiesError, () => void this.load());
      return section;
    }
    const env = this.studies;
    if (!env) {
      return section;
    }
    const excluded = new Set(env.excluded_pmids);
    section.append(
      el("span", { class: "meta" }, [
        `v${env.version} · ${env.content.studies.length} studies, ${excluded.size} excluded`,
      ]),
      staleBadge(env.stale),
    );
    const list = el("ul", { class: "study-list" });
    for (const study of env.content.studies) {
      const item = el("li", { "data-pmid": study.pmid });
      const box = el("input", {
        type: "checkbox",
        "data-testid": `include-${study.pmid}`,
        "aria-label": `include study ${study.pmid}`,
      });
      box.checked = !excluded.has(study.pmid);
      box.addEventListener("change", () => {
        void this.setIncluded(study.pmid, box.checked);
      });
      item.append(
        box,
        el("span", { class: "pmid" }, [` ${study.pmid} `]),
        el("span", { class: "title" }, [study.title]),
        study.year === null ? "" : el("span", { class: "year" }, [` (${study.year})`]),
      );
      if (excluded.has(study.pmid)) {
        item.classList.add("excluded");
      }
      list.append(item);
    }
    section.append(list);
    return section;
  }

  private async saveQueries(initialText: string, finalText: string): Promise<void> {
    const env = this.queries;
    if (!env) {
      return;
    }
    const initial = initialText
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
    // reviewer override: replace the query strings, keep the audit trail
    const content: QueriesContent = {
      ...env.content,
      initial,
      final: finalText.trim(),
    };
    this.postError = null;
    try {
      await this.api.putArtifact(this.projectId, "queries", content);
    } catch (error) {
      if (error instanceof ApiError) {
        this.postError = error; // edit stays pending in the session
        this.render();
        return;
      }
      throw error;
    }
    this.session.clearEdit(QUERIES_EDIT_KEY);
    await this.load();
  }

  private async setIncluded(pmid: string, included: boolean): Promise<void> {
    this.postError = null;
    try {
      await this.api.postDecision(this.projectId, {
        kind: "set_study_included",
        pmid,
        included,
      });
    } catch (error) {
      if (error instanceof ApiError) {
        this.postError = error;
        this.render();
        return;
      }
      throw error;
    }
    await this.load();
  }
}
