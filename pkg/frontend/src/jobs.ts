/** Job polling. The service runs pipeline stages asynchronously; the UI polls
 * the job resource every two seconds until it reaches a terminal state.
 */

import type { Api, Job } from "./api.js";

export const POLL_INTERVAL_MS = 2000;

export const TERMINAL = new Set(["succeeded", "failed"]);

export type Sleep = (ms: number) => Promise<void>;

const realSleep: Sleep = (ms) => new Promise((resolve) => setTimeout(resolve, ms));

/**
 * Poll `jobId` until it settles, reporting each observed state through
 * `onUpdate`. The sleep function is injectable so tests can verify the
 * 2000 ms cadence without waiting on wall-clock time.
 */
export async function watchJob(
  api: Api,
  jobId: string,
  onUpdate: (job: Job) => void,
  sleep: Sleep = realSleep,
): Promise<Job> {
  for (;;) {
    const job = await api.getJob(jobId);
    onUpdate(job);
    if (TERMINAL.has(job.status)) {
      return job;
    }
    await sleep(POLL_INTERVAL_MS);
  }
}

/** The job each stage view offers to run, and the stage it advances to. */
export const STAGE_JOBS: Record<string, { kind: string; label: string }[]> = {
  search: [
    { kind: "generate_queries", label: "Generate queries" },
    { kind: "run_search", label: "Run search" },
  ],
  screen: [
    { kind: "generate_criteria", label: "Generate criteria" },
    { kind: "run_screening", label: "Screen studies" },
  ],
  extract: [
    { kind: "run_extraction", label: "Extract fields" },
    { kind: "run_results", label: "Extract outcomes" },
  ],
  synthesize: [{ kind: "run_pooling", label: "Pool effects" }],
};
