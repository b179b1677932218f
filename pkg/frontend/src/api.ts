/* Thin typed wrapper over the job server's HTTP API. */

import type {
  DescriptorDoc,
  FileListingDoc,
  JobDetailDoc,
  PipelineDoc,
  PluginSummary,
  ResolveResponse,
  SessionDoc,
} from "./types.js";

export interface ResolveBody {
  session: SessionDoc;
  set?: { input: string; value: unknown };
  preset?: string;
}

export interface Upload {
  name: string;
  file: File;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public problems?: string[],
  ) {
    super(message);
  }
}

async function fail(response: Response): Promise<never> {
  let code = "HTTP_" + response.status;
  let message = response.statusText;
  let problems: string[] | undefined;
  try {
    const body = await response.json();
    if (body && typeof body.detail === "object" && body.detail) {
      code = body.detail.code ?? code;
      message = body.detail.message ?? message;
      problems = body.detail.problems;
    }
  } catch {
    /* non-JSON error body, keep the status line */
  }
  throw new ApiError(response.status, code, message, problems);
}

export class ApiClient {
  constructor(public readonly base: string = "") {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await fetch(this.base + path, init);
    if (!response.ok) await fail(response);
    return (await response.json()) as T;
  }

  listPlugins(): Promise<PluginSummary[]> {
    return this.json("/api/plugins");
  }

  getDescriptor(pluginId: string): Promise<DescriptorDoc> {
    return this.json(`/api/plugins/${encodeURIComponent(pluginId)}`);
  }

  resolve(pluginId: string, body: ResolveBody): Promise<ResolveResponse> {
    return this.json(`/api/plugins/${encodeURIComponent(pluginId)}/resolve`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  async submitJob(pipeline: PipelineDoc, uploads: Upload[]): Promise<string> {
    const form = new FormData();
    form.append("pipeline", JSON.stringify(pipeline));
    for (const upload of uploads) {
      form.append("files", upload.file, upload.name);
    }
    const created = await this.json<{ id: string }>("/api/jobs", {
      method: "POST",
      body: form,
    });
    return created.id;
  }

  listJobs(): Promise<JobDetailDoc[]> {
    return this.json("/api/jobs");
  }

  getJob(jobId: string): Promise<JobDetailDoc> {
    return this.json(`/api/jobs/${encodeURIComponent(jobId)}`);
  }

  control(jobId: string, verb: "pause" | "resume" | "cancel"): Promise<JobDetailDoc> {
    return this.json(`/api/jobs/${encodeURIComponent(jobId)}/${verb}`, {
      method: "POST",
    });
  }

  listFiles(jobId: string): Promise<FileListingDoc> {
    return this.json(`/api/jobs/${encodeURIComponent(jobId)}/files`);
  }

  fileUrl(jobId: string, path: string): string {
    return `${this.base}/api/jobs/${encodeURIComponent(jobId)}/files/${path}`;
  }
}
