import { ApiClient } from "./api.js";
import { App } from "./app.js";
import { client, register, render } from "./embed.js";

declare global {
  interface Window {
    toolform: { register: typeof register; render: typeof render; client: typeof client };
  }
}

window.toolform = { register, render, client };

const mount = document.getElementById("app");
if (mount) {
  const app = new App(new ApiClient(""), mount);
  void app.init();
}
