/* Two-call embedding API: register a server once, then render any of its
 * plugins into a container element. */

import { ApiClient } from "./api.js";
import { PluginForm } from "./form.js";

let registered: ApiClient | null = null;

export function register(base: string): void {
  registered = new ApiClient(base.replace(/\/$/, ""));
}

export async function render(
  pluginId: string,
  container: HTMLElement,
): Promise<PluginForm> {
  if (!registered) {
    throw new Error("register(serverUrl) must be called before render()");
  }
  const doc = await registered.getDescriptor(pluginId);
  const form = new PluginForm(registered, doc, container);
  await form.init();
  return form;
}

export function client(): ApiClient {
  if (!registered) throw new Error("no server registered");
  return registered;
}
