/** Browser entry point. The SPA is served under /ui by the API process, so
 * same-origin relative URLs reach the service directly.
 */

import { Api } from "./api.js";
import { App } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const api = new Api((input, init) => window.fetch(input, init), "");
  const app = new App(api, root, {
    confirmDiscard: (edits) =>
      window.confirm(
        `You have ${edits.length} unsaved edit(s):\n` +
          edits.map((e) => `  ${e.key}`).join("\n") +
          "\nDiscard them?",
      ),
  });
  void app.start();
}
