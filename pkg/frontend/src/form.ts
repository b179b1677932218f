/* Live form for one plugin. Rendering is a pure function of the
 * descriptor and the latest resolved document; every change round-trips
 * through POST /resolve and the DOM is rebuilt from the response. The
 * client never computes visibility, defaults, or command text itself. */

import { ApiClient, ApiError, ResolveBody, Upload } from "./api.js";
import {
  ClientInput,
  displayName,
  parseInputs,
} from "./descriptor.js";
import type {
  DescriptorDoc,
  ResolvedDoc,
  ResolveResponse,
  Scalar,
  SessionDoc,
} from "./types.js";

export interface FormOptions {
  /* fires after each applied resolve round trip */
  onResolved?: (response: ResolveResponse) => void;
  debounceMs?: number;
  /* header carries the session name field and the preset picker */
  showHeader?: boolean;
}

type Change =
  | { kind: "set"; input: string; value: unknown }
  | { kind: "preset"; preset: string }
  | { kind: "refresh" };

export function emptySession(doc: DescriptorDoc): SessionDoc {
  return {
    plugin_id: doc.id,
    plugin_version: doc.version ?? null,
    session_name: "",
    active_preset: null,
    values: {},
  };
}

export class PluginForm {
  readonly doc: DescriptorDoc;
  readonly inputs: ClientInput[];
  session: SessionDoc;
  resolved: ResolvedDoc | null = null;
  preview: string | null = null;
  /* File objects picked for file inputs, keyed by input id */
  readonly files = new Map<string, File>();

  private readonly debounceMs: number;
  private debounceTimer: ReturnType<typeof setTimeout> | null = null;
  private debounced: Change | null = null;
  private inflight = false;
  private pending: Change[] = [];
  private banner: string | null = null;
  private waiters: Array<() => void> = [];

  constructor(
    private readonly api: ApiClient,
    doc: DescriptorDoc,
    private readonly root: HTMLElement,
    private readonly opts: FormOptions = {},
  ) {
    this.doc = doc;
    this.inputs = parseInputs(doc);
    this.session = emptySession(doc);
    this.debounceMs = opts.debounceMs ?? 200;
  }

  /* First resolve; renders the form once the server answers. */
  async init(session?: SessionDoc): Promise<void> {
    if (session) this.session = session;
    this.enqueue({ kind: "refresh" }, true);
    await this.settled();
  }

  /* Resolves once no request is in flight and nothing is queued. */
  settled(): Promise<void> {
    if (this.idle()) return Promise.resolve();
    return new Promise((done) => this.waiters.push(done));
  }

  private idle(): boolean {
    return !this.inflight && !this.pending.length && !this.debounceTimer;
  }

  private notifyIfIdle(): void {
    if (!this.idle()) return;
    const ready = this.waiters;
    this.waiters = [];
    for (const done of ready) done();
  }

  setFile(inputId: string, file: File): void {
    this.files.set(inputId, file);
    this.enqueue({ kind: "set", input: inputId, value: { file: file.name } }, true);
  }

  clearFile(inputId: string): void {
    this.files.delete(inputId);
    this.enqueue({ kind: "set", input: inputId, value: null }, true);
  }

  applyPreset(presetId: string): void {
    this.enqueue({ kind: "preset", preset: presetId }, true);
  }

  setValue(inputId: string, value: unknown, immediate: boolean): void {
    this.enqueue({ kind: "set", input: inputId, value }, immediate);
  }

  uploads(): Upload[] {
    const list: Upload[] = [];
    for (const [inputId, file] of this.files) {
      const current = this.session.values[inputId];
      if (
        current &&
        typeof current === "object" &&
        (current as { file?: string }).file === file.name
      ) {
        list.push({ name: file.name, file });
      }
    }
    return list;
  }

  /* --- resolve loop ---------------------------------------------------- */

  private enqueue(change: Change, immediate: boolean): void {
    if (!immediate) {
      /* typing: collapse into one trailing-edge request */
      this.debounced = change;
      if (this.debounceTimer) clearTimeout(this.debounceTimer);
      this.debounceTimer = setTimeout(() => {
        this.debounceTimer = null;
        const held = this.debounced;
        this.debounced = null;
        if (held) this.queueNow(held);
      }, this.debounceMs);
      return;
    }
    if (this.debounceTimer) {
      clearTimeout(this.debounceTimer);
      this.debounceTimer = null;
      const held = this.debounced;
      this.debounced = null;
      if (held) this.queueNow(held);
    }
    this.queueNow(change);
  }

  private queueNow(change: Change): void {
    if (change.kind === "set") {
      /* a newer value for the same input supersedes the queued one */
      const last = this.pending[this.pending.length - 1];
      if (last && last.kind === "set" && last.input === change.input) {
        this.pending[this.pending.length - 1] = change;
      } else {
        this.pending.push(change);
      }
    } else {
      this.pending.push(change);
    }
    if (!this.inflight) this.fireNext();
  }

  private fireNext(): void {
    const change = this.pending.shift();
    if (!change) return;
    const body: ResolveBody = { session: this.session };
    if (change.kind === "set") {
      body.set = { input: change.input, value: change.value };
    } else if (change.kind === "preset") {
      body.preset = change.preset;
    }
    this.inflight = true;
    this.api.resolve(this.doc.id, body).then(
      (response) => {
        this.inflight = false;
        this.session = response.session;
        this.banner = null;
        if (this.pending.length) {
          /* a newer change is queued: this view is stale, skip the render */
          this.fireNext();
          return;
        }
        this.resolved = response.resolved;
        this.preview = response.preview;
        this.render();
        this.opts.onResolved?.(response);
        this.notifyIfIdle();
      },
      (error) => {
        this.inflight = false;
        this.banner =
          error instanceof ApiError
            ? `${error.code}: ${error.message}`
            : String(error);
        if (this.pending.length) {
          this.fireNext();
          return;
        }
        this.render();
        this.notifyIfIdle();
      },
    );
  }

  /* --- rendering ------------------------------------------------------- */

  render(): void {
    const resolved = this.resolved;
    if (!resolved) return;
    const focused = document.activeElement as HTMLElement | null;
    const focusId = focused?.closest?.(".widget")?.getAttribute("data-input");

    this.root.textContent = "";
    this.root.classList.add("plugin-form");
    if (this.opts.showHeader !== false) {
      this.root.appendChild(this.buildHeader(resolved));
    }
    if (this.banner) {
      const note = el("div", "form-banner");
      note.textContent = this.banner;
      this.root.appendChild(note);
    }
    if (resolved.errors.length) {
      const list = el("ul", "form-errors");
      for (const message of resolved.errors) {
        const item = document.createElement("li");
        item.textContent = message;
        list.appendChild(item);
      }
      this.root.appendChild(list);
    }
    const widgets = el("div", "widgets");
    for (const input of this.inputs) {
      const node = this.buildInput(input, resolved);
      if (node) widgets.appendChild(node);
    }
    this.root.appendChild(widgets);
    this.root.appendChild(this.buildFooter(resolved));

    if (focusId) {
      const again = this.root.querySelector<HTMLElement>(
        `.widget[data-input="${focusId}"] input, .widget[data-input="${focusId}"] select`,
      );
      again?.focus();
    }
  }

  private buildHeader(resolved: ResolvedDoc): HTMLElement {
    const header = el("header", "form-header");
    const title = document.createElement("h3");
    title.textContent = displayName(this.doc);
    header.appendChild(title);
    if (this.doc.desc) {
      const desc = el("p", "plugin-desc");
      desc.textContent = this.doc.desc;
      header.appendChild(desc);
    }

    const nameLabel = el("label", "session-name-label");
    nameLabel.append("Session name ");
    const nameInput = document.createElement("input");
    nameInput.className = "session-name";
    nameInput.value = this.session.session_name;
    nameInput.addEventListener("input", () => {
      /* the name travels with the session document; no resolve needed */
      this.session = { ...this.session, session_name: nameInput.value };
    });
    nameLabel.appendChild(nameInput);
    header.appendChild(nameLabel);

    const presets = this.doc.presets ?? [];
    if (presets.length) {
      const presetLabel = el("label", "preset-label");
      presetLabel.append("Preset ");
      const pick = document.createElement("select");
      pick.className = "preset-pick";
      const blank = document.createElement("option");
      blank.value = "";
      blank.textContent = "(none)";
      pick.appendChild(blank);
      for (const preset of presets) {
        const option = document.createElement("option");
        option.value = preset.id;
        option.textContent = preset.title || preset.id;
        pick.appendChild(option);
      }
      pick.value = resolved.active_preset ?? "";
      pick.addEventListener("change", () => {
        if (pick.value) this.applyPreset(pick.value);
      });
      presetLabel.appendChild(pick);
      header.appendChild(presetLabel);
    }
    return header;
  }

  private buildFooter(resolved: ResolvedDoc): HTMLElement {
    const footer = el("div", "form-footer");
    if (resolved.output_names.length) {
      const outputs = el("div", "outputs");
      outputs.textContent = "output: " + resolved.output_names.join(", ");
      footer.appendChild(outputs);
    }
    const preview = el("pre", "preview");
    /* preview text comes from the server alone */
    preview.textContent = this.preview ?? "";
    footer.appendChild(preview);
    return footer;
  }

  private buildInput(
    input: ClientInput,
    resolved: ResolvedDoc,
  ): HTMLElement | null {
    const view = resolved.inputs[input.id];
    if (!view || !view.visible) return null;
    if (input.kind === "hidden") return null;
    if (input.kind === "group") {
      const group = document.createElement("fieldset");
      group.className = "group";
      group.setAttribute("data-group", input.id);
      const legend = document.createElement("legend");
      legend.textContent = input.title;
      group.appendChild(legend);
      for (const child of input.children) {
        const node = this.buildInput(child, resolved);
        if (node) group.appendChild(node);
      }
      return group;
    }

    const widget = el("div", "widget");
    widget.setAttribute("data-input", input.id);
    widget.setAttribute("data-kind", input.kind);
    const label = document.createElement("label");
    label.textContent = input.title;
    if (input.desc) {
      label.title = input.desc;
      const info = el("span", "info");
      info.textContent = "ⓘ";
      info.title = input.desc;
      label.appendChild(info);
    }
    widget.appendChild(label);
    widget.appendChild(this.buildControl(input, view.value, view.enabled));
    if (view.error) {
      const error = el("span", "inline-error");
      error.textContent = view.error;
      widget.appendChild(error);
    }
    return widget;
  }

  private buildControl(
    input: ClientInput,
    value: Scalar | { file: string } | null,
    enabled: boolean,
  ): HTMLElement {
    switch (input.kind) {
      case "checkbox": {
        const box = document.createElement("input");
        box.type = "checkbox";
        box.checked = value === true;
        box.disabled = !enabled;
        box.addEventListener("change", () => {
          this.setValue(input.id, box.checked, true);
        });
        return box;
      }
      case "select": {
        const pick = document.createElement("select");
        pick.disabled = !enabled;
        const blank = document.createElement("option");
        blank.value = "";
        blank.textContent = "";
        pick.appendChild(blank);
        input.options.forEach((choice, index) => {
          const option = document.createElement("option");
          option.value = String(index);
          option.textContent = choice.label;
          pick.appendChild(option);
        });
        const picked = input.options.findIndex(
          (choice) => value !== null && choice.value === value,
        );
        pick.value = picked >= 0 ? String(picked) : "";
        pick.addEventListener("change", () => {
          const choice = input.options[Number(pick.value)];
          this.setValue(input.id, choice ? choice.value : null, true);
        });
        return pick;
      }
      case "number": {
        const field = document.createElement("input");
        field.type = "number";
        if (input.min !== null) field.min = String(input.min);
        if (input.max !== null) field.max = String(input.max);
        if (input.integer) field.step = "1";
        field.value = value === null ? "" : String(value);
        field.disabled = !enabled;
        field.addEventListener("input", () => {
          if (field.value === "") {
            this.setValue(input.id, null, false);
            return;
          }
          const parsed = Number(field.value);
          if (!Number.isNaN(parsed)) this.setValue(input.id, parsed, false);
        });
        return field;
      }
      case "file": {
        const zone = el("div", "file-drop");
        const name =
          value && typeof value === "object" ? (value as { file: string }).file : null;
        const hint = el("span", "file-name");
        hint.textContent = name ?? "drop a file or click to choose";
        zone.appendChild(hint);
        const chooser = document.createElement("input");
        chooser.type = "file";
        chooser.className = "file-chooser";
        chooser.disabled = !enabled;
        chooser.addEventListener("change", () => {
          const file = chooser.files && chooser.files[0];
          if (file) this.setFile(input.id, file);
        });
        zone.appendChild(chooser);
        if (name) {
          const clear = document.createElement("button");
          clear.type = "button";
          clear.className = "file-clear";
          clear.textContent = "×";
          clear.disabled = !enabled;
          clear.addEventListener("click", () => this.clearFile(input.id));
          zone.appendChild(clear);
        }
        zone.addEventListener("dragover", (event) => event.preventDefault());
        zone.addEventListener("drop", (event) => {
          event.preventDefault();
          const file = (event as DragEvent).dataTransfer?.files?.[0];
          if (file && enabled) this.setFile(input.id, file);
        });
        return zone;
      }
      default: {
        const field = document.createElement("input");
        field.type = "text";
        field.value = value === null ? "" : String(value);
        field.disabled = !enabled;
        field.addEventListener("input", () => {
          this.setValue(input.id, field.value === "" ? null : field.value, false);
        });
        return field;
      }
    }
  }
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
