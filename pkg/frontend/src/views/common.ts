/** Shared view plumbing: verbatim problem display and the 404 empty state. */

import { ApiError } from "../api.js";
import { el } from "../dom.js";

/** Render a service problem exactly as received — code, message, detail. */
export function problemBox(error: ApiError): HTMLElement {
  const box = el("div", { class: "problem", role: "alert" });
  box.append(
    el("span", { class: "problem-code" }, [error.problem.code]),
    el("span", { class: "problem-message" }, [error.problem.message]),
  );
  if (error.problem.detail !== undefined && error.problem.detail !== null) {
    box.append(el("pre", { class: "problem-detail" }, [JSON.stringify(error.problem.detail, null, 1)]));
  }
  return box;
}

/**
 * Standard failure rendering for a stage view. A 404 means the artifact the
 * view shows does not exist yet: show an empty state with a retry button
 * instead of treating it as a fault. Anything else surfaces the service's
 * problem JSON verbatim.
 */
export function renderLoadFailure(
  container: HTMLElement,
  error: unknown,
  retry: () => void,
): void {
  if (error instanceof ApiError && error.status === 404) {
    const empty = el("div", { class: "empty-state" });
    empty.append(
      el("p", {}, ["Nothing here yet."]),
      problemBox(error),
    );
    const button = el("button", { class: "retry", type: "button" }, ["Retry"]);
    button.addEventListener("click", retry);
    empty.append(button);
    container.append(empty);
    return;
  }
  if (error instanceof ApiError) {
    container.append(problemBox(error));
    return;
  }
  container.append(el("div", { class: "problem", role: "alert" }, [String(error)]));
}

export function staleBadge(stale: boolean): HTMLElement | string {
  return stale ? el("span", { class: "badge badge-stale", title: "an upstream artifact changed since this was computed" }, ["stale"]) : "";
}
