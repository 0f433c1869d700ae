/** Adjudication contracts: cell clicks surface the cited source chunks;
 * accept/correct post documented decisions; a failed post keeps the edit
 * pending; and the adjudicated table equals a fresh render of the replayed
 * (post-decision) state.
 */

import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import {
  Api,
  type DocumentChunks,
  type Envelope,
  type ExtractionContent,
  type Problem,
  type ProjectState,
} from "../src/api.js";
import { WorkbenchSession } from "../src/session.js";
import { editKey, ExtractView, renderValue } from "../src/views/extract.js";
import { FakeNetwork, fixture, mount } from "./helpers.js";

const EXTRACTION = "/projects/p0001/extraction";
const PROJECT = "/projects/p0001";
const DECISIONS = "/projects/p0001/decisions";
const DOCUMENT = "/projects/p0001/documents/1001";

const scrollSpy = vi.fn();

beforeEach(() => {
  // jsdom has no scroll engine; the view calls scrollIntoView optionally
  Object.defineProperty(HTMLElement.prototype, "scrollIntoView", {
    configurable: true,
    writable: true,
    value: scrollSpy,
  });
});

afterEach(() => {
  scrollSpy.mockClear();
});

function settle(): Promise<void> {
  return new Promise((r) => setTimeout(r, 0));
}

function baseNetwork(): FakeNetwork {
  return new FakeNetwork()
    .ok("GET", EXTRACTION, fixture("extraction"))
    .ok("GET", PROJECT, fixture("project"))
    .ok("GET", DOCUMENT, fixture("document_1001"));
}

async function loadView(net: FakeNetwork): Promise<{ root: HTMLElement; session: WorkbenchSession; view: ExtractView }> {
  const root = mount();
  const session = new WorkbenchSession();
  const view = new ExtractView(new Api(net.fetch), "p0001", session, root);
  await view.load();
  return { root, session, view };
}

function cellNode(root: HTMLElement, pmid: string, field: string): HTMLElement {
  const node = root.querySelector<HTMLElement>(
    `td.cell[data-pmid="${pmid}"][data-field="${field}"]`,
  );
  expect(node).not.toBeNull();
  return node!;
}

describe("ExtractView", () => {
  it("renders every extracted value straight from the artifact", async () => {
    const env = fixture<Envelope<ExtractionContent>>("extraction");
    const { root } = await loadView(baseNetwork());
    for (const row of env.content.rows) {
      for (const cell of row.cells) {
        const rendered = cellNode(root, row.pmid, cell.field).textContent ?? "";
        expect(rendered).toContain(renderValue(cell.value) || "—");
      }
    }
    // no adjudications yet, so no provenance badges
    expect(root.querySelectorAll(".badge-reviewer")).toHaveLength(0);
  });

  it("clicking a cell loads the document, highlights and scrolls to cited chunks", async () => {
    const doc = fixture<DocumentChunks>("document_1001");
    const env = fixture<Envelope<ExtractionContent>>("extraction");
    const cited = env.content.rows[0]!.cells.find((c) => c.field === "sample_size")!;
    expect(cited.chunk_refs).toEqual(["c0002"]); // pinned from the capture

    const { root } = await loadView(baseNetwork());
    cellNode(root, "1001", "sample_size").click();
    await settle();

    // all chunks of the document are shown…
    const chunkIds = [...root.querySelectorAll<HTMLElement>("[data-chunk]")].map(
      (n) => n.dataset["chunk"],
    );
    expect(chunkIds).toEqual(doc.chunks.map((c) => c.id));
    // …and exactly the cited ones are highlighted
    const citedNodes = [...root.querySelectorAll<HTMLElement>(".chunk.cited")].map(
      (n) => n.dataset["chunk"],
    );
    expect(citedNodes).toEqual(["c0002"]);
    expect(scrollSpy).toHaveBeenCalled();

    // the panel shows the cell's rationale and citation verbatim
    const panel = root.querySelector('[data-testid="cell-panel"]');
    expect(panel?.textContent).toContain(cited.rationale);
    expect(panel?.textContent).toContain("cites c0002");
  });

  it("accept posts the current value back as a correct_cell decision", async () => {
    const env = fixture<Envelope<ExtractionContent>>("extraction");
    const design = env.content.rows[0]!.cells.find((c) => c.field === "design")!;
    const net = baseNetwork().ok("POST", DECISIONS, {
      seq: 9,
      kind: "correct_cell",
      version: 2,
    });
    const { root } = await loadView(net);

    cellNode(root, "1001", "design").click();
    await settle();
    root.querySelector<HTMLElement>('[data-testid="accept"]')!.click();
    await settle();

    const posted = net.calls("POST");
    expect(posted).toHaveLength(1);
    expect(posted[0]?.body).toEqual({
      kind: "correct_cell",
      pmid: "1001",
      field: "design",
      value: renderValue(design.value), // "randomized phase III trial"
    });
    expect(renderValue(design.value)).toBe("randomized phase III trial");
  });

  it("correcting a cell posts the documented decision and re-renders the corrected value with provenance", async () => {
    const net = new FakeNetwork()
      .on(
        "GET",
        EXTRACTION,
        { status: 200, body: fixture("extraction") },
        { status: 200, body: fixture("extraction_corrected") },
      )
      .on(
        "GET",
        PROJECT,
        { status: 200, body: fixture("project") },
        { status: 200, body: fixture("project_adjudicated") },
      )
      .ok("GET", DOCUMENT, fixture("document_1001"))
      .ok("POST", DECISIONS, { seq: 15, kind: "correct_cell", version: 2 });
    const { root, session } = await loadView(net);

    cellNode(root, "1001", "sample_size").click();
    await settle();
    const input = root.querySelector<HTMLInputElement>('[data-testid="correction-input"]')!;
    expect(input.value).toBe("120"); // pre-filled with the extracted value
    input.value = "121";
    input.dispatchEvent(new Event("input"));
    expect(session.getEdit(editKey("1001", "sample_size"))?.value).toBe("121");

    root.querySelector<HTMLElement>('[data-testid="save"]')!.click();
    await settle();

    // exactly the documented payload — byte-for-byte the captured decision
    const posted = net.calls("POST");
    expect(posted).toHaveLength(1);
    expect(posted[0]?.body).toEqual(fixture("decision_correct_cell"));

    // the corrected value came back from the server and carries provenance
    const corrected = cellNode(root, "1001", "sample_size");
    expect(corrected.textContent).toContain("121");
    const badge = corrected.querySelector<HTMLElement>(".badge-reviewer");
    expect(badge).not.toBeNull();
    expect(badge?.title).toBe("reviewer correction (was '120')");
    // the pending edit was consumed by the successful post
    expect(session.getEdit(editKey("1001", "sample_size"))).toBeUndefined();
  });

  it("a failed post keeps the edit pending and shows the problem verbatim", async () => {
    const problem = fixture<Problem>("problem_illegal_stage");
    const net = baseNetwork().on("POST", DECISIONS, { status: 409, body: problem });
    const { root, session } = await loadView(net);

    cellNode(root, "1001", "sample_size").click();
    await settle();
    const input = root.querySelector<HTMLInputElement>('[data-testid="correction-input"]')!;
    input.value = "999";
    input.dispatchEvent(new Event("input"));
    root.querySelector<HTMLElement>('[data-testid="save"]')!.click();
    await settle();

    // the edit survives the failure…
    expect(session.getEdit(editKey("1001", "sample_size"))?.value).toBe("999");
    // …the panel says so, the input still holds it, and the problem is verbatim
    expect(root.querySelector('[data-testid="pending-note"]')?.textContent).toContain("999");
    expect(
      root.querySelector<HTMLInputElement>('[data-testid="correction-input"]')?.value,
    ).toBe("999");
    expect(root.querySelector(".problem-code")?.textContent).toBe(problem.code);
    expect(root.querySelector(".problem-message")?.textContent).toBe(problem.message);
    // the table flags the cell as pending
    expect(
      cellNode(root, "1001", "sample_size").querySelector(".badge-pending"),
    ).not.toBeNull();
    // and only the extraction artifact was refetched zero times (no reload)
    expect(net.calls("GET").filter((r) => r.url === EXTRACTION)).toHaveLength(1);
  });

  it("replayed decision log reproduces the adjudicated table", async () => {
    // interactive path: render v1, correct a cell, re-render from the server
    const interactiveNet = new FakeNetwork()
      .on(
        "GET",
        EXTRACTION,
        { status: 200, body: fixture("extraction") },
        { status: 200, body: fixture("extraction_corrected") },
      )
      .on(
        "GET",
        PROJECT,
        { status: 200, body: fixture("project") },
        { status: 200, body: fixture("project_adjudicated") },
      )
      .ok("GET", DOCUMENT, fixture("document_1001"))
      .ok("POST", DECISIONS, { seq: 15, kind: "correct_cell", version: 2 });
    const interactive = await loadView(interactiveNet);
    cellNode(interactive.root, "1001", "sample_size").click();
    await settle();
    const input = interactive.root.querySelector<HTMLInputElement>(
      '[data-testid="correction-input"]',
    )!;
    input.value = "121";
    input.dispatchEvent(new Event("input"));
    interactive.root.querySelector<HTMLElement>('[data-testid="save"]')!.click();
    await settle();

    // replayed path: a fresh session rendering the stored post-decision state
    // (the artifacts the decision log deterministically reproduces)
    const replayedNet = new FakeNetwork()
      .ok("GET", EXTRACTION, fixture("extraction_corrected"))
      .ok("GET", PROJECT, fixture("project_adjudicated"));
    const replayed = await loadView(replayedNet);

    const normalize = (root: HTMLElement): string => {
      const table = root.querySelector("table.extraction")!.cloneNode(true) as HTMLElement;
      for (const node of table.querySelectorAll(".selected")) {
        node.classList.remove("selected"); // selection is transient UI state
      }
      return table.outerHTML;
    };
    expect(normalize(interactive.root)).toBe(normalize(replayed.root));

    // belt and braces: both show the corrected value with its provenance
    for (const { root } of [interactive, replayed]) {
      const cell = cellNode(root, "1001", "sample_size");
      expect(cell.textContent).toContain("121");
      expect(cell.querySelector(".badge-reviewer")).not.toBeNull();
    }
  });
});
