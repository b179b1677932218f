/* Full-page application: plugin catalogue, pipeline builder, job panel,
 * and pipeline import/export. */

import { ApiClient, ApiError } from "./api.js";
import { JobPanel } from "./jobs.js";
import { PipelineBuilder } from "./pipeline.js";
import type { PipelineDoc, PluginSummary } from "./types.js";

export class App {
  readonly builder: PipelineBuilder;
  readonly jobs: JobPanel;
  private plugins: PluginSummary[] = [];
  private catalogue!: HTMLElement;
  private runButton!: HTMLButtonElement;
  private nameInput!: HTMLInputElement;
  private notice!: HTMLElement;

  constructor(
    private readonly api: ApiClient,
    private readonly root: HTMLElement,
  ) {
    this.root.classList.add("app");
    const { aside, main, jobMount } = this.buildShell();
    this.catalogue = aside;
    this.builder = new PipelineBuilder(api, main, {
      onChange: () => this.refreshRunState(),
    });
    this.jobs = new JobPanel(api, jobMount);
  }

  async init(): Promise<void> {
    try {
      this.plugins = await this.api.listPlugins();
    } catch (error) {
      this.say(describe(error));
      return;
    }
    this.renderCatalogue();
    this.refreshRunState();
  }

  private buildShell(): {
    aside: HTMLElement;
    main: HTMLElement;
    jobMount: HTMLElement;
  } {
    const bar = el("header", "topbar");
    const title = document.createElement("h1");
    title.textContent = "toolform";
    bar.appendChild(title);

    const nameLabel = el("label", "pipeline-name-label");
    nameLabel.append("Pipeline ");
    this.nameInput = document.createElement("input");
    this.nameInput.className = "pipeline-name";
    this.nameInput.placeholder = "unnamed pipeline";
    this.nameInput.addEventListener("input", () => {
      this.builder.name = this.nameInput.value;
    });
    nameLabel.appendChild(this.nameInput);
    bar.appendChild(nameLabel);

    const importButton = button("import", "import-pipeline");
    const importInput = document.createElement("input");
    importInput.type = "file";
    importInput.accept = "application/json,.json";
    importInput.className = "import-file";
    importInput.hidden = true;
    importButton.addEventListener("click", () => importInput.click());
    importInput.addEventListener("change", () => {
      const file = importInput.files && importInput.files[0];
      if (file) void this.importFile(file);
      importInput.value = "";
    });

    const exportButton = button("export", "export-pipeline");
    exportButton.addEventListener("click", () => this.exportFile());

    this.runButton = button("run", "run-pipeline");
    this.runButton.addEventListener("click", () => void this.run());

    bar.append(importButton, importInput, exportButton, this.runButton);
    this.notice = el("div", "notice");
    bar.appendChild(this.notice);
    this.root.appendChild(bar);

    const columns = el("div", "columns");
    const aside = el("aside", "catalogue");
    const main = el("main", "workbench");
    const jobMount = el("section", "job-mount");
    columns.append(aside, main, jobMount);
    this.root.appendChild(columns);
    return { aside, main, jobMount };
  }

  private renderCatalogue(): void {
    this.catalogue.textContent = "";
    const heading = document.createElement("h2");
    heading.textContent = "Programs";
    this.catalogue.appendChild(heading);
    const list = el("ul", "plugin-list");
    for (const plugin of this.plugins) {
      const item = document.createElement("li");
      item.className = "plugin-entry";
      const add = button(plugin.name || plugin.id, "plugin-add");
      add.title = plugin.desc;
      add.setAttribute("data-plugin", plugin.id);
      add.addEventListener("click", () => {
        void this.builder.addStep(plugin.id).catch((error) => {
          this.say(describe(error));
        });
      });
      item.appendChild(add);
      if (plugin.version) {
        const version = el("span", "plugin-version");
        version.textContent = plugin.version;
        item.appendChild(version);
      }
      list.appendChild(item);
    }
    this.catalogue.appendChild(list);
  }

  private refreshRunState(): void {
    this.runButton.disabled = this.builder.steps.length === 0;
    this.nameInput.value = this.builder.name;
  }

  private async importFile(file: File): Promise<void> {
    try {
      const doc = JSON.parse(await file.text()) as PipelineDoc;
      await this.builder.importDocument(doc);
      this.say(`imported ${doc.steps.length} step(s)`);
    } catch (error) {
      this.say(describe(error));
    }
  }

  private exportFile(): void {
    const doc = this.builder.exportDocument();
    const blob = new Blob([JSON.stringify(doc, null, 2) + "\n"], {
      type: "application/json",
    });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = (doc.name || "pipeline") + ".json";
    link.click();
    URL.revokeObjectURL(link.href);
  }

  private async run(): Promise<void> {
    this.say("");
    await this.jobs.submit(
      this.builder.exportDocument(),
      this.builder.collectUploads(),
    );
  }

  say(message: string): void {
    this.notice.textContent = message;
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    const extra = error.problems?.length ? " " + error.problems.join("; ") : "";
    return `${error.code}: ${error.message}${extra}`;
  }
  return String(error);
}

function button(label: string, className: string): HTMLButtonElement {
  const node = document.createElement("button");
  node.type = "button";
  node.className = className;
  node.textContent = label;
  return node;
}

function el(tag: string, className: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  return node;
}
