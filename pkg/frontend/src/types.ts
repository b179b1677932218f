/* Document shapes exchanged with the job server. These mirror the JSON
 * the HTTP API produces and consumes; the client never invents fields. */

export type Scalar = string | number | boolean;

export interface PluginSummary {
  id: string;
  name: string;
  desc: string;
  version: string | null;
  icon: string | null;
  doc_url: string | null;
}

/* Descriptor documents keep inputs as kind-keyed records. */
export type InputRecord = Record<string, unknown>;

export interface OutputRecord {
  id: string;
  file?: string | { rule: string };
  stdout?: boolean;
}

export interface PresetDoc {
  id: string;
  title?: string;
  values: Record<string, unknown>;
}

export interface DescriptorDoc {
  id: string;
  program: string;
  name?: string;
  desc?: string;
  version?: string | null;
  configfile?: boolean;
  valuesep?: string;
  options: InputRecord[];
  outfile?: string | { rule: string };
  outputs?: OutputRecord[];
  presets?: PresetDoc[];
}

export interface SessionDoc {
  plugin_id: string;
  plugin_version: string | null;
  session_name: string;
  active_preset: string | null;
  values: Record<string, unknown>;
}

export interface ResolvedInput {
  visible: boolean;
  enabled: boolean;
  value: Scalar | { file: string } | null;
  provenance: string | null;
  error: string | null;
}

export interface ResolvedDoc {
  inputs: Record<string, ResolvedInput>;
  ready: boolean;
  errors: string[];
  output_names: string[];
  active_preset: string | null;
}

export interface ResolveResponse {
  session: SessionDoc;
  resolved: ResolvedDoc;
  preview: string | null;
}

export type BindingDoc =
  | { source: "upload" }
  | { source: "pipe" }
  | { source: "step_output"; step: number; output: string };

export interface PipelineStepDoc {
  plugin_id: string;
  plugin_version: string | null;
  session: SessionDoc;
  bindings: Record<string, BindingDoc>;
}

export interface PipelineDoc {
  name: string;
  steps: PipelineStepDoc[];
}

export interface StepStatusDoc {
  plugin_id: string;
  state: string;
  exit_code: number | null;
  started: string | null;
  ended: string | null;
  stdout_tail?: string | null;
  stderr_tail?: string | null;
}

export interface JobDetailDoc {
  id: string;
  state: string;
  steps: StepStatusDoc[];
  created: string;
}

export interface JobFileDoc {
  path: string;
  size: number;
}

export interface FileListingDoc {
  files: JobFileDoc[];
}

export const TERMINAL_JOB_STATES = ["done", "failed", "cancelled"];
