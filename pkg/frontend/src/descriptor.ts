/* Normalize kind-keyed descriptor records into a shape that is easy to
 * render. The server's canonical form always includes explicit ids. */

import type { DescriptorDoc, InputRecord, Scalar } from "./types.js";

export type InputKind =
  | "text"
  | "number"
  | "checkbox"
  | "select"
  | "file"
  | "hidden"
  | "group";

const VALUE_KINDS: InputKind[] = [
  "text",
  "number",
  "checkbox",
  "select",
  "file",
  "hidden",
];

export interface SelectChoice {
  label: string;
  value: Scalar;
}

export interface ClientInput {
  id: string;
  kind: InputKind;
  title: string;
  desc: string;
  required: boolean;
  integer: boolean;
  min: number | null;
  max: number | null;
  options: SelectChoice[];
  children: ClientInput[];
}

export function parseInput(record: InputRecord): ClientInput {
  let kind: InputKind | null = record.group !== undefined ? "group" : null;
  if (kind === null) {
    for (const candidate of VALUE_KINDS) {
      if (record[candidate] !== undefined) {
        kind = candidate;
        break;
      }
    }
  }
  if (kind === null || typeof record.id !== "string") {
    throw new Error("malformed input record: " + JSON.stringify(record));
  }
  const options: SelectChoice[] = [];
  if (Array.isArray(record.options)) {
    for (const raw of record.options as Array<Record<string, unknown>>) {
      options.push({
        label: String(raw.label),
        value: raw.value as Scalar,
      });
    }
  }
  const children: ClientInput[] = [];
  if (Array.isArray(record.items)) {
    for (const item of record.items as InputRecord[]) {
      children.push(parseInput(item));
    }
  }
  return {
    id: record.id,
    kind,
    title:
      kind === "group"
        ? String(record.group ?? "")
        : String(record.title ?? record.id),
    desc: typeof record.desc === "string" ? record.desc : "",
    required: typeof record.required === "string",
    integer: record.integer === true,
    min: typeof record.min === "number" ? record.min : null,
    max: typeof record.max === "number" ? record.max : null,
    options,
    children,
  };
}

export function parseInputs(doc: DescriptorDoc): ClientInput[] {
  return doc.options.map(parseInput);
}

/* Depth-first list of non-group inputs, in declaration order. */
export function flatInputs(inputs: ClientInput[]): ClientInput[] {
  const flat: ClientInput[] = [];
  const walk = (list: ClientInput[]) => {
    for (const input of list) {
      if (input.kind === "group") walk(input.children);
      else flat.push(input);
    }
  };
  walk(inputs);
  return flat;
}

export function fileInputIds(doc: DescriptorDoc): string[] {
  return flatInputs(parseInputs(doc))
    .filter((input) => input.kind === "file")
    .map((input) => input.id);
}

export function outputIds(doc: DescriptorDoc): string[] {
  if (doc.outputs) return doc.outputs.map((output) => output.id);
  if (doc.outfile !== undefined) return ["outfile"];
  return [];
}

export function displayName(doc: DescriptorDoc): string {
  return doc.name || doc.id;
}
