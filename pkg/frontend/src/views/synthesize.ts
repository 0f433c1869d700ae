/** Synthesis stage: pooled estimate, per-study effects, and the forest plot.
 *
 * Every number on this page is read straight from the pooled envelope; the
 * forest plot is the server's SVG loaded by URL, never redrawn client-side.
 */

import type { Api, Envelope, PooledContent, ResultsContent } from "../api.js";
import { el, clear } from "../dom.js";
import { renderLoadFailure, staleBadge } from "./common.js";

function fixed(value: number, places = 4): string {
  return value.toFixed(places);
}

export class SynthesizeView {
  private pooled: Envelope<PooledContent> | null = null;
  private effects: Envelope<ResultsContent> | null = null;

  constructor(
    private readonly api: Api,
    private readonly projectId: string,
    private readonly root: HTMLElement,
  ) {}

  async load(): Promise<void> {
    clear(this.root);
    try {
      this.pooled = await this.api.pooled(this.projectId);
    } catch (error) {
      this.pooled = null;
      renderLoadFailure(this.root, error, () => void this.load());
      return;
    }
    try {
      this.effects = await this.api.effects(this.projectId);
    } catch {
      this.effects = null; // effects table is supplementary on this page
    }
    this.render();
  }

  private render(): void {
    clear(this.root);
    const env = this.pooled;
    if (!env) {
      return;
    }
    const pooled = env.content.pooled;

    const header = el("div", { class: "view-header" });
    header.append(
      el("h2", {}, ["Pooled effect"]),
      el("span", { class: "meta" }, [`v${env.version} · ${env.content.method}`]),
      staleBadge(env.stale),
    );
    this.root.append(header);

    const summary = el("dl", { class: "pooled-summary", "data-testid": "pooled-summary" });
    const rows: [string, string][] = [
      ["log effect", `${fixed(pooled.estimate)} [${fixed(pooled.ci_low)}, ${fixed(pooled.ci_high)}]`],
      ["ratio scale", `${fixed(pooled.exp_estimate, 3)} [${fixed(pooled.exp_ci_low, 3)}, ${fixed(pooled.exp_ci_high, 3)}]`],
      ["studies pooled", String(pooled.k)],
      ["heterogeneity", `Q=${fixed(pooled.q, 3)} (df=${pooled.df}), I²=${fixed(pooled.i2, 1)}%, τ²=${fixed(pooled.tau2, 4)}`],
    ];
    for (const [term, detail] of rows) {
      summary.append(el("dt", {}, [term]), el("dd", {}, [detail]));
    }
    this.root.append(summary);

    // server-rendered forest plot — an <img>, not a client-side chart
    const plot = el("img", {
      class: "forest",
      "data-testid": "forest",
      alt: "forest plot",
      src: this.api.forestUrl(this.projectId),
    });
    this.root.append(plot);

    const table = el("table", { class: "estimates", "data-testid": "estimates" });
    const head = el("tr");
    head.append(
      el("th", {}, ["study"]),
      el("th", {}, ["log effect"]),
      el("th", {}, ["SE"]),
      el("th", {}, ["weight"]),
      el("th", {}, ["notes"]),
    );
    table.append(head);
    const weights = new Map(Object.entries(pooled.weights));
    const corrected = new Set(env.content.corrected_pmids);
    for (const estimate of env.content.estimates) {
      const tr = el("tr", { "data-pmid": estimate.pmid });
      const weight = weights.get(estimate.pmid);
      tr.append(
        el("td", { class: "pmid" }, [estimate.pmid]),
        el("td", {}, [fixed(estimate.log_rr)]),
        el("td", {}, [fixed(estimate.se)]),
        el("td", {}, [weight === undefined ? "—" : fixed(weight, 3)]),
        el("td", {}, [
          corrected.has(estimate.pmid)
            ? el("span", { class: "badge badge-corrected" }, ["continuity corrected"])
            : "",
        ]),
      );
      table.append(tr);
    }
    const scroller = el("div", { class: "table-scroll" });
    scroller.append(table);
    this.root.append(scroller);

    if (env.content.excluded.length) {
      this.root.append(
        el("p", { class: "excluded-note" }, [
          `not pooled: ${env.content.excluded.join(", ")}`,
        ]),
      );
    }

    if (this.effects) {
      const detail = el("details", { class: "effects-detail" });
      detail.append(el("summary", {}, ["per-study extraction status"]));
      const list = el("ul");
      for (const row of this.effects.content.rows) {
        list.append(
          el("li", {}, [
            `${row.pmid}: ${row.status}`,
            row.warnings.length ? ` — ${row.warnings.join("; ")}` : "",
          ]),
        );
      }
      detail.append(list);
      this.root.append(detail);
    }
  }
}
