/* Pipeline builder: a stack of numbered collapsible sections, one per
 * step. Steps keep their linear order; there is no reordering, only
 * adding at the end and removing. Each file input of a step is bound to
 * `upload`, `pipe`, or a named output of an earlier step. */

import { ApiClient, Upload } from "./api.js";
import { displayName, fileInputIds, outputIds } from "./descriptor.js";
import { PluginForm } from "./form.js";
import type {
  BindingDoc,
  DescriptorDoc,
  PipelineDoc,
  PipelineStepDoc,
  SessionDoc,
} from "./types.js";

export interface BuilderOptions {
  onChange?: () => void;
}

export class StepCard {
  readonly details: HTMLDetailsElement;
  readonly form: PluginForm;
  readonly bindings = new Map<string, BindingDoc>();
  private readonly numberBadge: HTMLElement;
  private readonly bindingBox: HTMLElement;

  constructor(
    private readonly builder: PipelineBuilder,
    readonly doc: DescriptorDoc,
    api: ApiClient,
  ) {
    this.details = document.createElement("details");
    this.details.className = "step";

    const summary = document.createElement("summary");
    this.numberBadge = el("span", "step-number");
    summary.appendChild(this.numberBadge);
    const title = el("span", "step-title");
    title.textContent = displayName(doc);
    summary.appendChild(title);
    const remove = document.createElement("button");
    remove.type = "button";
    remove.className = "step-remove";
    remove.textContent = "remove";
    remove.addEventListener("click", (event) => {
      event.preventDefault();
      event.stopPropagation();
      this.builder.removeStep(this);
    });
    summary.appendChild(remove);
    this.details.appendChild(summary);

    const body = el("div", "step-body");
    this.bindingBox = el("div", "bindings");
    body.appendChild(this.bindingBox);
    const formMount = el("div", "step-form");
    body.appendChild(formMount);
    this.details.appendChild(body);

    this.form = new PluginForm(api, doc, formMount, {
      onResolved: () => this.decorateBoundInputs(),
    });
    for (const inputId of fileInputIds(doc)) {
      this.bindings.set(inputId, { source: "upload" });
    }
  }

  index(): number {
    return this.builder.steps.indexOf(this);
  }

  setNumber(position: number): void {
    this.numberBadge.textContent = position + ".";
  }

  setBindings(bindings: Record<string, BindingDoc>): void {
    for (const [inputId, binding] of Object.entries(bindings)) {
      if (this.bindings.has(inputId)) this.bindings.set(inputId, binding);
    }
  }

  /* one select per file input: upload, pipe, or an earlier step's output */
  renderBindings(): void {
    this.bindingBox.textContent = "";
    const position = this.index();
    for (const [inputId, current] of this.bindings) {
      const row = el("label", "binding");
      row.setAttribute("data-binding-input", inputId);
      row.append(inputId + " from ");
      const pick = document.createElement("select");
      pick.className = "binding-pick";
      addOption(pick, "upload", "upload");
      if (position > 0) {
        addOption(pick, "pipe", "previous step (pipe)");
        for (let step = 0; step < position; step += 1) {
          const producer = this.builder.steps[step];
          for (const output of outputIds(producer.doc)) {
            addOption(
              pick,
              `step:${step}:${output}`,
              `step ${step + 1} ${output}`,
            );
          }
        }
      }
      pick.value = encodeBinding(current);
      pick.addEventListener("change", () => {
        this.bindings.set(inputId, decodeBinding(pick.value));
        this.decorateBoundInputs();
        this.builder.changed();
      });
      row.appendChild(pick);
      this.bindingBox.appendChild(row);
    }
  }

  /* a bound file input is fed by the pipeline, not by the user */
  decorateBoundInputs(): void {
    for (const [inputId, binding] of this.bindings) {
      const widget = this.details.querySelector<HTMLElement>(
        `.widget[data-input="${inputId}"]`,
      );
      if (!widget) continue;
      const bound = binding.source !== "upload";
      const wasBound = widget.classList.contains("bound");
      widget.classList.toggle("bound", bound);
      for (const control of widget.querySelectorAll<HTMLInputElement>(
        "input, button",
      )) {
        if (bound) control.disabled = true;
        else if (wasBound) control.disabled = false;
      }
      let note = widget.querySelector<HTMLElement>(".bound-note");
      if (bound) {
        if (!note) {
          note = el("span", "bound-note");
          widget.appendChild(note);
        }
        note.textContent =
          binding.source === "pipe"
            ? "piped from the previous step"
            : `from step ${(binding as { step: number }).step + 1}`;
      } else if (note) {
        note.remove();
      }
    }
  }

  toDocument(): PipelineStepDoc {
    return {
      plugin_id: this.doc.id,
      plugin_version: this.doc.version ?? null,
      session: this.form.session,
      bindings: Object.fromEntries(this.bindings),
    };
  }
}

export class PipelineBuilder {
  readonly steps: StepCard[] = [];
  name = "";
  private readonly list: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
    private readonly opts: BuilderOptions = {},
  ) {
    this.root.classList.add("pipeline");
    this.list = el("div", "steps-list");
    this.root.appendChild(this.list);
  }

  changed(): void {
    this.opts.onChange?.();
  }

  async addStep(
    pluginId: string,
    session?: SessionDoc,
    bindings?: Record<string, BindingDoc>,
    open = true,
  ): Promise<StepCard> {
    const doc = await this.api.getDescriptor(pluginId);
    const card = new StepCard(this, doc, this.api);
    this.steps.push(card);
    this.list.appendChild(card.details);
    if (bindings) card.setBindings(bindings);
    card.details.open = open;
    this.renumber();
    await card.form.init(session);
    card.renderBindings();
    card.decorateBoundInputs();
    this.changed();
    return card;
  }

  removeStep(card: StepCard): void {
    const removed = card.index();
    if (removed < 0) return;
    this.steps.splice(removed, 1);
    card.details.remove();
    for (const later of this.steps) {
      for (const [inputId, binding] of later.bindings) {
        if (binding.source !== "step_output") continue;
        if (binding.step === removed) {
          later.bindings.set(inputId, { source: "upload" });
        } else if (binding.step > removed) {
          later.bindings.set(inputId, { ...binding, step: binding.step - 1 });
        }
      }
    }
    /* the first step has no upstream left to pipe from */
    const first = this.steps[0];
    if (first) {
      for (const [inputId, binding] of first.bindings) {
        if (binding.source !== "upload") {
          first.bindings.set(inputId, { source: "upload" });
        }
      }
    }
    this.renumber();
    this.changed();
  }

  renumber(): void {
    this.steps.forEach((card, index) => {
      card.setNumber(index + 1);
      card.renderBindings();
      card.decorateBoundInputs();
    });
  }

  exportDocument(): PipelineDoc {
    return {
      name: this.name,
      steps: this.steps.map((card) => card.toDocument()),
    };
  }

  async importDocument(doc: PipelineDoc): Promise<void> {
    this.steps.splice(0, this.steps.length);
    this.list.textContent = "";
    this.name = doc.name ?? "";
    for (const step of doc.steps) {
      await this.addStep(step.plugin_id, step.session, step.bindings, false);
    }
    /* the first section starts expanded, the rest stay collapsed */
    this.steps.forEach((card, index) => {
      card.details.open = index === 0;
    });
    this.changed();
  }

  collectUploads(): Upload[] {
    const uploads: Upload[] = [];
    const seen = new Set<string>();
    for (const card of this.steps) {
      for (const upload of card.form.uploads()) {
        const binding = card.bindings.get(findInputForFile(card, upload.name));
        if (binding && binding.source !== "upload") continue;
        if (seen.has(upload.name)) continue;
        seen.add(upload.name);
        uploads.push(upload);
      }
    }
    return uploads;
  }
}

function findInputForFile(card: StepCard, fileName: string): string {
  for (const [inputId, file] of card.form.files) {
    if (file.name === fileName) return inputId;
  }
  return "";
}

function encodeBinding(binding: BindingDoc): string {
  if (binding.source === "upload") return "upload";
  if (binding.source === "pipe") return "pipe";
  return `step:${binding.step}:${binding.output}`;
}

function decodeBinding(value: string): BindingDoc {
  if (value === "upload") return { source: "upload" };
  if (value === "pipe") return { source: "pipe" };
  const [, step, output] = value.split(":");
  return { source: "step_output", step: Number(step), output };
}

function addOption(pick: HTMLSelectElement, value: string, label: string): void {
  const option = document.createElement("option");
  option.value = value;
  option.textContent = label;
  pick.appendChild(option);
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
