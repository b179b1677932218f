/* Shared fetch mock and fixture documents for the client tests. The mock
 * plays the server's part: it owns resolution results, previews, and job
 * state, so the tests prove the client renders what the server says and
 * never invents results of its own. */

import { vi } from "vitest";
import type { ResolveBody } from "../src/api.js";
import type {
  DescriptorDoc,
  PipelineDoc,
  ResolvedInput,
  ResolveResponse,
  SessionDoc,
} from "../src/types.js";

export interface RecordedCall {
  method: string;
  url: string;
  body: unknown;
  form: FormData | null;
}

export interface RouteResult {
  status: number;
  json: unknown;
}

export type RouteHandler = (call: {
  url: string;
  body: unknown;
  form: FormData | null;
  match: RegExpMatchArray;
}) => unknown | Promise<unknown>;

export interface Route {
  method: string;
  pattern: RegExp;
  handler: RouteHandler;
}

export function asStatus(status: number, json: unknown): RouteResult {
  return { status, json };
}

function isRouteResult(value: unknown): value is RouteResult {
  return (
    typeof value === "object" &&
    value !== null &&
    "status" in value &&
    "json" in value
  );
}

export function mockFetch(routes: Route[]) {
  const calls: RecordedCall[] = [];
  const spy = vi.fn(
    async (input: RequestInfo | URL, init?: RequestInit): Promise<Response> => {
      const url = String(input);
      const method = (init?.method ?? "GET").toUpperCase();
      let body: unknown;
      let form: FormData | null = null;
      if (init?.body instanceof FormData) form = init.body;
      else if (typeof init?.body === "string") body = JSON.parse(init.body);
      calls.push({ method, url, body, form });
      for (const route of routes) {
        if (route.method !== method) continue;
        const match = url.match(route.pattern);
        if (!match) continue;
        const produced = await route.handler({ url, body, form, match });
        const result = isRouteResult(produced)
          ? produced
          : { status: 200, json: produced };
        return new Response(JSON.stringify(result.json), {
          status: result.status,
          headers: { "Content-Type": "application/json" },
        });
      }
      return new Response(
        JSON.stringify({
          detail: { code: "UNKNOWN", message: `no route ${method} ${url}` },
        }),
        { status: 404, headers: { "Content-Type": "application/json" } },
      );
    },
  );
  globalThis.fetch = spy as unknown as typeof fetch;
  return { calls, spy };
}

export function resolveCalls(calls: RecordedCall[]): RecordedCall[] {
  return calls.filter((call) => call.url.includes("/resolve"));
}

/* --- fixture descriptors ---------------------------------------------- */

export const FIG1_DOC: DescriptorDoc = {
  id: "remove_gaps",
  program: "remove_gaps.py",
  name: "Gaps remover",
  desc: "Trims gaps-only sites from the input sequence alignment",
  options: [
    { file: "", id: "file", required: "Input file missing!" },
    { checkbox: "--count", id: "count", title: "Count sequences" },
  ],
  outputs: [{ id: "outfile", file: "output.fa" }],
};

export const GATED_DOC: DescriptorDoc = {
  id: "site_models",
  program: "fit_models.py",
  name: "Site models",
  options: [
    { checkbox: "", id: "advanced", title: "Advanced options" },
    {
      group: "Model choices",
      id: "models",
      visible: "advanced == true",
      items: [
        { checkbox: "", id: "m0", title: "M0", desc: "Fit the M0 model" },
        { checkbox: "", id: "m1", title: "M1" },
      ],
    },
  ],
  outputs: [{ id: "mlc", file: "mlc.txt" }],
  presets: [
    { id: "neutral", title: "Neutral", values: { advanced: true, m0: true } },
  ],
};

export const PRODUCE_DOC: DescriptorDoc = {
  id: "produce_lines",
  program: "produce_lines.py",
  name: "Line producer",
  options: [
    { number: "-n", id: "count", title: "Line count", integer: true, default: 10 },
    { text: "--prefix", id: "prefix", title: "Prefix" },
    {
      select: "--mode",
      id: "mode",
      title: "Mode",
      options: [
        { label: "plain", value: "plain" },
        { label: "fancy", value: "fancy" },
      ],
    },
  ],
  outputs: [{ id: "lines", file: "lines.txt", stdout: true }],
};

export const MARK_DOC: DescriptorDoc = {
  id: "mark_lines",
  program: "mark_lines.py",
  name: "Line marker",
  options: [
    { file: "", id: "source", required: "Input lines missing!" },
    { hidden: "--machine", id: "machine", default: true },
  ],
  outputs: [{ id: "marked", file: "marked.txt", stdout: true }],
};

export const DESCRIPTORS: Record<string, DescriptorDoc> = {
  remove_gaps: FIG1_DOC,
  site_models: GATED_DOC,
  produce_lines: PRODUCE_DOC,
  mark_lines: MARK_DOC,
};

export function session(
  doc: DescriptorDoc,
  values: Record<string, unknown> = {},
): SessionDoc {
  return {
    plugin_id: doc.id,
    plugin_version: doc.version ?? null,
    session_name: "",
    active_preset: null,
    values,
  };
}

export const FOUR_STEP_PIPELINE: PipelineDoc = {
  name: "mapping",
  steps: [
    {
      plugin_id: "produce_lines",
      plugin_version: null,
      session: session(PRODUCE_DOC, { count: 100 }),
      bindings: {},
    },
    {
      plugin_id: "mark_lines",
      plugin_version: null,
      session: session(MARK_DOC),
      bindings: { source: { source: "pipe" } },
    },
    {
      plugin_id: "mark_lines",
      plugin_version: null,
      session: session(MARK_DOC),
      bindings: { source: { source: "step_output", step: 1, output: "marked" } },
    },
    {
      plugin_id: "remove_gaps",
      plugin_version: null,
      session: session(FIG1_DOC, { file: { file: "mapped.fa" } }),
      bindings: { file: { source: "upload" } },
    },
  ],
};

/* --- fixture resolvers -------------------------------------------------
 * Small stand-ins for the server's resolve endpoint. They apply a `set`
 * or `preset` onto the posted session and answer with visibility and a
 * preview, the same contract the real server honours. */

function applied(body: ResolveBody): SessionDoc {
  const next = structuredClone(body.session) as SessionDoc;
  if (body.preset !== undefined) {
    next.active_preset = body.preset;
  }
  if (body.set) {
    if (body.set.value === null) delete next.values[body.set.input];
    else next.values[body.set.input] = body.set.value;
  }
  return next;
}

function view(
  visible: boolean,
  value: ResolvedInput["value"],
  error: string | null = null,
): ResolvedInput {
  return {
    visible,
    enabled: true,
    value,
    provenance: value === null ? null : "user",
    error,
  };
}

export function gapsResolve(body: ResolveBody): ResolveResponse {
  const next = applied(body);
  const file = next.values.file as { file: string } | undefined;
  const count = next.values.count === true;
  const ready = Boolean(file);
  return {
    session: next,
    resolved: {
      inputs: {
        file: view(true, file ?? null, ready ? null : "Input file missing!"),
        count: view(true, count),
      },
      ready,
      errors: ready ? [] : ["Input file missing!"],
      output_names: ["output.fa"],
      active_preset: next.active_preset,
    },
    preview: ready
      ? `remove_gaps.py ${file!.file}${count ? " --count" : ""}`
      : null,
  };
}

export function gatedResolve(body: ResolveBody): ResolveResponse {
  const next = applied(body);
  const preset = GATED_DOC.presets![0];
  let layered: Record<string, unknown> = { ...next.values };
  if (next.active_preset === preset.id) {
    layered = { ...preset.values, ...next.values };
    if (body.set) {
      const covered = preset.values[body.set.input];
      if (covered !== undefined && body.set.value !== covered) {
        next.active_preset = null;
        layered = { ...next.values };
      }
    }
  }
  const advanced = layered.advanced === true;
  return {
    session: next,
    resolved: {
      inputs: {
        advanced: view(true, advanced),
        models: view(advanced, null),
        m0: view(advanced, layered.m0 === true),
        m1: view(advanced, layered.m1 === true),
      },
      ready: true,
      errors: [],
      output_names: ["mlc.txt"],
      active_preset: next.active_preset,
    },
    preview: "fit_models.py",
  };
}

/* every input visible, values echoed, defaults filled for numbers */
export function genericResolve(
  doc: DescriptorDoc,
  body: ResolveBody,
): ResolveResponse {
  const next = applied(body);
  const inputs: Record<string, ResolvedInput> = {};
  const errors: string[] = [];
  for (const record of doc.options) {
    const id = record.id as string;
    let value = next.values[id] ?? null;
    if (value === null && typeof record.default === "number") {
      value = record.default;
    }
    let error: string | null = null;
    if (typeof record.required === "string" && value === null) {
      error = record.required;
      errors.push(error);
    }
    inputs[id] = view(true, value as ResolvedInput["value"], error);
  }
  return {
    session: next,
    resolved: {
      inputs,
      ready: errors.length === 0,
      errors,
      output_names: (doc.outputs ?? []).map((output) =>
        typeof output.file === "string" ? output.file : output.id,
      ),
      active_preset: next.active_preset,
    },
    preview: errors.length ? null : doc.program,
  };
}

/* routes serving every fixture descriptor and its resolver */
export function fixtureRoutes(base = ""): Route[] {
  return [
    {
      method: "GET",
      pattern: new RegExp(`^${base}/api/plugins/(\\w+)$`),
      handler: ({ match }) => {
        const doc = DESCRIPTORS[match[1]];
        return doc
          ? doc
          : asStatus(404, {
              detail: { code: "UNKNOWN_PLUGIN", message: "no plugin" },
            });
      },
    },
    {
      method: "POST",
      pattern: new RegExp(`^${base}/api/plugins/(\\w+)/resolve$`),
      handler: ({ match, body }) => {
        const resolveBody = body as ResolveBody;
        if (match[1] === "remove_gaps") return gapsResolve(resolveBody);
        if (match[1] === "site_models") return gatedResolve(resolveBody);
        const doc = DESCRIPTORS[match[1]];
        if (!doc) {
          return asStatus(404, {
            detail: { code: "UNKNOWN_PLUGIN", message: "no plugin" },
          });
        }
        return genericResolve(doc, resolveBody);
      },
    },
  ];
}
