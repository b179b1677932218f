/* Job panel: submits a pipeline, polls its status, wires the pause,
 * resume, and cancel controls, and lists result files for download. */

import { ApiClient, ApiError, Upload } from "./api.js";
import type { JobDetailDoc, PipelineDoc } from "./types.js";
import { TERMINAL_JOB_STATES } from "./types.js";

const POLL_MS = 700;

export class JobPanel {
  jobId: string | null = null;
  detail: JobDetailDoc | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;
  private message: string | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {
    this.root.classList.add("job-panel");
    this.render();
  }

  async submit(pipeline: PipelineDoc, uploads: Upload[]): Promise<void> {
    this.stop();
    this.message = null;
    try {
      this.jobId = await this.api.submitJob(pipeline, uploads);
      this.detail = null;
      this.render();
      await this.poll();
    } catch (error) {
      this.message = describe(error);
      this.render();
    }
  }

  async watch(jobId: string): Promise<void> {
    this.stop();
    this.jobId = jobId;
    this.detail = null;
    this.message = null;
    await this.poll();
  }

  stop(): void {
    if (this.timer) {
      clearTimeout(this.timer);
      this.timer = null;
    }
  }

  async poll(): Promise<void> {
    if (!this.jobId) return;
    try {
      this.detail = await this.api.getJob(this.jobId);
      this.message = null;
    } catch (error) {
      this.message = describe(error);
      this.render();
      return;
    }
    this.render();
    if (TERMINAL_JOB_STATES.includes(this.detail.state)) {
      await this.renderFiles();
      return;
    }
    this.timer = setTimeout(() => {
      this.timer = null;
      void this.poll();
    }, POLL_MS);
  }

  private async control(verb: "pause" | "resume" | "cancel"): Promise<void> {
    if (!this.jobId) return;
    try {
      this.detail = await this.api.control(this.jobId, verb);
      this.message = null;
    } catch (error) {
      this.message = describe(error);
    }
    this.render();
    if (this.detail && TERMINAL_JOB_STATES.includes(this.detail.state)) {
      this.stop();
      await this.renderFiles();
    }
  }

  render(): void {
    this.root.textContent = "";
    const heading = document.createElement("h3");
    heading.textContent = "Job";
    this.root.appendChild(heading);

    if (this.message) {
      const note = el("div", "job-message");
      note.textContent = this.message;
      this.root.appendChild(note);
    }
    if (!this.jobId) {
      const idle = el("p", "job-idle");
      idle.textContent = "no job submitted yet";
      this.root.appendChild(idle);
      return;
    }

    const status = el("div", "job-status");
    status.textContent = this.detail
      ? `${this.jobId}: ${this.detail.state}`
      : `${this.jobId}: submitting`;
    this.root.appendChild(status);

    if (this.detail) {
      const steps = el("ol", "job-steps");
      for (const step of this.detail.steps) {
        const item = document.createElement("li");
        item.className = "job-step";
        item.setAttribute("data-state", step.state);
        let text = `${step.plugin_id}: ${step.state}`;
        if (step.exit_code !== null && step.exit_code !== 0) {
          text += ` (exit ${step.exit_code})`;
        }
        item.textContent = text;
        if (step.stderr_tail) {
          const tail = el("pre", "stderr-tail");
          tail.textContent = step.stderr_tail;
          item.appendChild(tail);
        }
        steps.appendChild(item);
      }
      this.root.appendChild(steps);

      const state = this.detail.state;
      const controls = el("div", "job-controls");
      controls.appendChild(
        this.button("pause", state === "running", () => this.control("pause")),
      );
      controls.appendChild(
        this.button("resume", state === "paused", () => this.control("resume")),
      );
      const cancellable = ["queued", "running", "paused"].includes(state);
      controls.appendChild(
        this.button("cancel", cancellable, () => this.control("cancel")),
      );
      this.root.appendChild(controls);
    }

    const files = el("div", "job-files");
    this.root.appendChild(files);
  }

  private async renderFiles(): Promise<void> {
    if (!this.jobId) return;
    let listing;
    try {
      listing = await this.api.listFiles(this.jobId);
    } catch (error) {
      this.message = describe(error);
      this.render();
      return;
    }
    const box = this.root.querySelector(".job-files");
    if (!box) return;
    box.textContent = "";
    if (!listing.files.length) return;
    const heading = document.createElement("h4");
    heading.textContent = "Files";
    box.appendChild(heading);
    const list = el("ul", "file-list");
    for (const entry of listing.files) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = this.api.fileUrl(this.jobId, entry.path);
      link.textContent = entry.path;
      link.setAttribute("download", "");
      item.appendChild(link);
      item.append(` (${entry.size} bytes)`);
      list.appendChild(item);
    }
    box.appendChild(list);
  }

  private button(
    label: "pause" | "resume" | "cancel",
    enabled: boolean,
    act: () => Promise<void>,
  ): HTMLButtonElement {
    const button = document.createElement("button");
    button.type = "button";
    button.className = `job-${label}`;
    button.textContent = label;
    button.disabled = !enabled;
    button.addEventListener("click", () => void act());
    return button;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) return `${error.code}: ${error.message}`;
  return String(error);
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
