/** Screening stage: the eligibility matrix.
 *
 * Ordering contract: table rows follow the API's ranking entries exactly —
 * the view never sorts, scores, or re-ranks anything itself. Toggling a
 * criterion posts a masked-aggregation decision and re-renders from the
 * re-fetched matrix, so the row order after a toggle is the server's answer,
 * not a local guess.
 */

import type { Api, Envelope, ScreeningContent } from "../api.js";
import { el, clear } from "../dom.js";
import { renderLoadFailure, problemBox, staleBadge } from "./common.js";
import { ApiError } from "../api.js";

const LABEL_CLASS: Record<number, string> = {
  [-1]: "cell-ineligible",
  0: "cell-unclear",
  1: "cell-eligible",
};

const LABEL_GLYPH: Record<number, string> = {
  [-1]: "−", // −
  0: "?",
  1: "+",
};

export class ScreenView {
  private envelope: Envelope<ScreeningContent> | null = null;

  constructor(
    private readonly api: Api,
    private readonly projectId: string,
    private readonly root: HTMLElement,
  ) {}

  async load(): Promise<void> {
    clear(this.root);
    try {
      this.envelope = await this.api.matrix(this.projectId);
    } catch (error) {
      this.envelope = null;
      renderLoadFailure(this.root, error, () => void this.load());
      return;
    }
    this.render();
  }

  private render(): void {
    clear(this.root);
    const env = this.envelope;
    if (!env) {
      return;
    }
    const { matrix, ranking, strategy } = env.content;

    const header = el("div", { class: "view-header" });
    header.append(
      el("h2", {}, ["Eligibility matrix"]),
      el("span", { class: "meta" }, [`v${env.version} · strategy: ${strategy.kind}`]),
      staleBadge(env.stale),
    );
    this.root.append(header);

    const rationaleOut = el("div", { class: "rationale-pane", "data-testid": "rationale" });

    // criterion index by id, study row index by pmid — lookups only
    const critIndex = new Map(matrix.criterion_ids.map((id, j) => [id, j] as const));
    const rowIndex = new Map(matrix.study_ids.map((id, i) => [id, i] as const));
    const excluded = new Set(strategy.kind === "masked" ? strategy.excluded : []);

    const table = el("table", { class: "matrix", "data-testid": "matrix" });
    const head = el("tr");
    head.append(el("th", {}, ["study"]), el("th", {}, ["score"]));
    for (const cid of matrix.criterion_ids) {
      const box = el("input", {
        type: "checkbox",
        "data-criterion": cid,
        "aria-label": `include ${cid} in aggregation`,
      });
      box.checked = !excluded.has(cid);
      box.addEventListener("change", () => void this.toggle(cid, excluded));
      const th = el("th", { class: excluded.has(cid) ? "criterion masked" : "criterion" });
      th.append(box, ` ${cid}`);
      head.append(th);
    }
    table.append(head);

    // one row per ranking entry, in the API's order
    for (const entry of ranking.entries) {
      const i = rowIndex.get(entry.pmid);
      const tr = el("tr", { "data-pmid": entry.pmid });
      tr.append(
        el("td", { class: "pmid" }, [entry.pmid]),
        el("td", { class: "score", "data-testid": `score-${entry.pmid}` }, [String(entry.score)]),
      );
      for (const cid of matrix.criterion_ids) {
        const j = critIndex.get(cid);
        const label = i === undefined || j === undefined ? 0 : (matrix.labels[i]?.[j] ?? 0);
        const td = el(
          "td",
          {
            class: `cell ${LABEL_CLASS[label] ?? "cell-unclear"}${excluded.has(cid) ? " masked" : ""}`,
            "data-pmid": entry.pmid,
            "data-criterion": cid,
            tabindex: "0",
          },
          [LABEL_GLYPH[label] ?? "?"],
        );
        // rationale only on demand — a click, not a permanent column
        td.addEventListener("click", () => {
          const rationale = i === undefined || j === undefined ? "" : (matrix.rationales[i]?.[j] ?? "");
          clear(rationaleOut);
          rationaleOut.append(
            el("strong", {}, [`${entry.pmid} × ${cid}: `]),
            rationale || "(no rationale recorded)",
          );
        });
        tr.append(td);
      }
      table.append(tr);
    }

    const scroller = el("div", { class: "table-scroll" });
    scroller.append(table);
    this.root.append(scroller, rationaleOut);
  }

  /** Flip one criterion in or out of the mask and let the server re-rank. */
  private async toggle(criterionId: string, currentExcluded: Set<string>): Promise<void> {
    const next = new Set(currentExcluded);
    if (next.has(criterionId)) {
      next.delete(criterionId);
    } else {
      next.add(criterionId);
    }
    try {
      await this.api.postDecision(this.projectId, {
        kind: "set_aggregation",
        strategy: { kind: "masked", weights: {}, excluded: [...next].sort() },
      });
    } catch (error) {
      if (error instanceof ApiError) {
        this.root.append(problemBox(error));
        return;
      }
      throw error;
    }
    await this.load(); // the re-fetched ranking is the only ordering authority
  }
}
