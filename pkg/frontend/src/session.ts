/** Workbench session state: the active project, the stage being viewed, and
 * any edits the reviewer has typed but not yet persisted.
 *
 * The one hard rule here: pending edits are never silently dropped. Stage
 * navigation while an edit is pending goes through a confirm callback, and a
 * declined confirm leaves both the stage and the edit untouched.
 */

export const STAGE_VIEWS = ["search", "screen", "extract", "synthesize"] as const;
export type StageView = (typeof STAGE_VIEWS)[number];

export interface PendingEdit {
  /** Where the edit lives, e.g. "cell:1001:sample_size" or "queries". */
  key: string;
  /** What the reviewer typed; kept verbatim until persisted or discarded. */
  value: string;
}

export type ConfirmDiscard = (edits: PendingEdit[]) => boolean;

export interface JobPollState {
  jobId: string;
  kind: string;
  status: string;
}

export class WorkbenchSession {
  projectId: string | null = null;
  private stage: StageView = "search";
  private edits = new Map<string, PendingEdit>();
  watching: JobPollState | null = null;

  get stageView(): StageView {
    return this.stage;
  }

  get pendingEdits(): PendingEdit[] {
    return [...this.edits.values()];
  }

  hasPendingEdits(): boolean {
    return this.edits.size > 0;
  }

  setEdit(key: string, value: string): void {
    this.edits.set(key, { key, value });
  }

  getEdit(key: string): PendingEdit | undefined {
    return this.edits.get(key);
  }

  /** Called when an edit reaches the server (or the reviewer discards it). */
  clearEdit(key: string): void {
    this.edits.delete(key);
  }

  clearAllEdits(): void {
    this.edits.clear();
  }

  /**
   * Move to another stage view. If edits are pending, `confirm` decides their
   * fate: returning true discards them and navigates; returning false cancels
   * the navigation entirely. Either way nothing is lost without the reviewer
   * saying so.
   */
  navigate(to: StageView, confirm: ConfirmDiscard): boolean {
    if (to === this.stage) {
      return true;
    }
    if (this.edits.size > 0) {
      if (!confirm(this.pendingEdits)) {
        return false;
      }
      this.edits.clear();
    }
    this.stage = to;
    return true;
  }

  openProject(projectId: string): void {
    this.projectId = projectId;
    this.stage = "search";
    this.edits.clear();
    this.watching = null;
  }
}
