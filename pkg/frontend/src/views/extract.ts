/** Extraction stage: the adjudication table.
 *
 * Every value shown comes from the extraction artifact; every correction goes
 * through a correct_cell decision and the view re-renders from the re-fetched
 * artifact. "Accept" posts the current value back as a decision too, so the
 * event log records the human sign-off and replaying it reproduces the table.
 * A failed post never discards what the reviewer typed — the edit stays
 * pending in the session until it lands or is explicitly abandoned.
 */

import type {
  Api,
  CellValue,
  DocumentChunks,
  Envelope,
  ExtractedCell,
  ExtractionContent,
  ProjectState,
} from "../api.js";
import { ApiError } from "../api.js";
import { el, clear } from "../dom.js";
import type { WorkbenchSession } from "../session.js";
import { problemBox, renderLoadFailure, staleBadge } from "./common.js";

/** Same shape the server's renderer produces, so accepting a value posts a
 * string that parses back to the identical cell. */
export function renderValue(value: CellValue): string {
  if (value.kind === "missing") {
    return "";
  }
  if (value.kind === "number") {
    const body = value.number === null ? "" : String(value.number);
    return `${body} ${value.unit}`.trim();
  }
  return value.text;
}

function displayValue(value: CellValue): string {
  const rendered = renderValue(value);
  return value.kind === "missing" ? "—" : rendered;
}

export function editKey(pmid: string, field: string): string {
  return `cell:${pmid}:${field}`;
}

interface Selected {
  pmid: string;
  field: string;
}

export class ExtractView {
  private envelope: Envelope<ExtractionContent> | null = null;
  private project: ProjectState | null = null;
  private selected: Selected | null = null;
  private documents = new Map<string, DocumentChunks>();
  private postError: ApiError | null = null;

  constructor(
    private readonly api: Api,
    private readonly projectId: string,
    private readonly session: WorkbenchSession,
    private readonly root: HTMLElement,
  ) {}

  async load(): Promise<void> {
    clear(this.root);
    try {
      const [envelope, project] = await Promise.all([
        this.api.extraction(this.projectId),
        this.api.getProject(this.projectId),
      ]);
      this.envelope = envelope;
      this.project = project;
    } catch (error) {
      this.envelope = null;
      renderLoadFailure(this.root, error, () => void this.load());
      return;
    }
    this.render();
  }

  /** Latest correct_cell decision per (pmid, field) — the provenance record. */
  private corrections(): Map<string, Record<string, unknown>> {
    const out = new Map<string, Record<string, unknown>>();
    for (const event of this.project?.decisions ?? []) {
      if (event.kind === "correct_cell") {
        out.set(editKey(String(event["pmid"]), String(event["field"])), event);
      }
    }
    return out;
  }

  private cellOf(pmid: string, field: string): ExtractedCell | null {
    const row = this.envelope?.content.rows.find((r) => r.pmid === pmid);
    return row?.cells.find((c) => c.field === field) ?? null;
  }

  private render(): void {
    clear(this.root);
    const env = this.envelope;
    if (!env) {
      return;
    }
    const corrections = this.corrections();

    const header = el("div", { class: "view-header" });
    header.append(
      el("h2", {}, ["Extracted fields"]),
      el("span", { class: "meta" }, [`v${env.version}`]),
      staleBadge(env.stale),
    );
    this.root.append(header);

    const fieldNames = env.content.fields.map((f) => f.name);
    const table = el("table", { class: "extraction", "data-testid": "extraction" });
    const head = el("tr");
    head.append(el("th", {}, ["study"]));
    for (const name of fieldNames) {
      head.append(el("th", {}, [name]));
    }
    table.append(head);

    for (const row of env.content.rows) {
      const tr = el("tr", { "data-pmid": row.pmid });
      tr.append(el("td", { class: "pmid" }, [row.pmid]));
      for (const name of fieldNames) {
        const cell = row.cells.find((c) => c.field === name);
        const td = el("td", {
          class: "cell",
          "data-pmid": row.pmid,
          "data-field": name,
          tabindex: "0",
        });
        if (cell) {
          td.append(displayValue(cell.value));
          if (corrections.has(editKey(row.pmid, name))) {
            td.append(
              el("span", { class: "badge badge-reviewer", title: cell.rationale }, ["reviewer"]),
            );
          }
          if (this.session.getEdit(editKey(row.pmid, name))) {
            td.append(el("span", { class: "badge badge-pending" }, ["pending"]));
          }
        } else {
          td.append("—");
        }
        if (this.selected && this.selected.pmid === row.pmid && this.selected.field === name) {
          td.classList.add("selected");
        }
        td.addEventListener("click", () => void this.select(row.pmid, name));
        tr.append(td);
      }
      table.append(tr);
    }

    const scroller = el("div", { class: "table-scroll" });
    scroller.append(table);

    const split = el("div", { class: "adjudication" });
    split.append(scroller);

    const side = el("div", { class: "side-pane" });
    side.append(this.renderPanel(), this.renderDocument());
    split.append(side);
    this.root.append(split);

    // after (re)building the DOM, bring the first cited chunk into view
    if (this.selected) {
      const cell = this.cellOf(this.selected.pmid, this.selected.field);
      const first = cell?.chunk_refs[0];
      if (first) {
        const target = this.root.querySelector<HTMLElement>(`[data-chunk="${first}"]`);
        target?.scrollIntoView?.({ block: "nearest" });
      }
    }
  }

  private renderPanel(): HTMLElement {
    const panel = el("div", { class: "cell-panel", "data-testid": "cell-panel" });
    if (!this.selected) {
      panel.append(el("p", { class: "hint" }, ["Select a cell to adjudicate it."]));
      return panel;
    }
    const { pmid, field } = this.selected;
    const cell = this.cellOf(pmid, field);
    if (!cell) {
      panel.append(el("p", { class: "hint" }, ["No extracted cell here."]));
      return panel;
    }

    panel.append(
      el("h3", {}, [`${pmid} · ${field}`]),
      el("p", { class: "cell-value" }, [displayValue(cell.value)]),
      el("p", { class: "cell-rationale" }, [cell.rationale || "(no rationale recorded)"]),
      el("p", { class: "cell-refs" }, [
        cell.chunk_refs.length ? `cites ${cell.chunk_refs.join(", ")}` : "cites nothing",
      ]),
    );

    const accept = el("button", { type: "button", class: "accept", "data-testid": "accept" }, [
      "Accept",
    ]);
    accept.addEventListener("click", () => void this.post(pmid, field, renderValue(cell.value)));

    const pending = this.session.getEdit(editKey(pmid, field));
    const input = el("input", {
      type: "text",
      class: "correction",
      "data-testid": "correction-input",
      "aria-label": `corrected value for ${field}`,
    });
    input.value = pending ? pending.value : renderValue(cell.value);
    // typing registers a pending edit immediately — nothing is lost on failure
    input.addEventListener("input", () => {
      this.session.setEdit(editKey(pmid, field), input.value);
    });

    const save = el("button", { type: "button", class: "save", "data-testid": "save" }, [
      "Save correction",
    ]);
    save.addEventListener("click", () => {
      this.session.setEdit(editKey(pmid, field), input.value);
      void this.post(pmid, field, input.value);
    });

    const controls = el("div", { class: "controls" });
    controls.append(accept, input, save);
    panel.append(controls);

    if (pending) {
      panel.append(el("p", { class: "pending-note", "data-testid": "pending-note" }, [
        `unsaved edit: ${pending.value}`,
      ]));
    }
    if (this.postError) {
      panel.append(problemBox(this.postError));
    }
    return panel;
  }

  private renderDocument(): HTMLElement {
    const pane = el("div", { class: "document-pane", "data-testid": "document" });
    if (!this.selected) {
      return pane;
    }
    const doc = this.documents.get(this.selected.pmid);
    if (!doc) {
      pane.append(el("p", { class: "hint" }, ["Loading document…"]));
      return pane;
    }
    const cell = this.cellOf(this.selected.pmid, this.selected.field);
    const cited = new Set(cell?.chunk_refs ?? []);
    pane.append(el("h3", {}, [`Source · ${doc.pmid}`]));
    for (const chunk of doc.chunks) {
      const block = el("div", {
        class: cited.has(chunk.id) ? "chunk cited" : "chunk",
        "data-chunk": chunk.id,
      });
      const label = chunk.section_path ? `${chunk.id} · ${chunk.section_path}` : chunk.id;
      block.append(el("span", { class: "chunk-id" }, [label]), el("p", {}, [chunk.text]));
      pane.append(block);
    }
    return pane;
  }

  private async select(pmid: string, field: string): Promise<void> {
    this.selected = { pmid, field };
    this.postError = null;
    if (!this.documents.has(pmid)) {
      this.render(); // show the table + "loading" immediately
      try {
        this.documents.set(pmid, await this.api.document(this.projectId, pmid));
      } catch (error) {
        if (error instanceof ApiError) {
          this.postError = error;
        } else {
          throw error;
        }
      }
    }
    this.render();
  }

  private async post(pmid: string, field: string, value: string): Promise<void> {
    this.postError = null;
    try {
      await this.api.postDecision(this.projectId, {
        kind: "correct_cell",
        pmid,
        field,
        value,
      });
    } catch (error) {
      if (error instanceof ApiError) {
        // the edit stays in the session; re-render shows it still pending
        this.postError = error;
        this.render();
        return;
      }
      throw error;
    }
    this.session.clearEdit(editKey(pmid, field));
    await this.load();
  }
}
