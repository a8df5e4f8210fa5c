import { defaultApi } from "./api.js";
import { mountChatApp } from "./app.js";

const HEALTH_POLL_MS = 10_000;

document.addEventListener("DOMContentLoaded", () => {
  const root = document.getElementById("app");
  if (!root) throw new Error("missing #app element");
  const app = mountChatApp(root, defaultApi());
  void app.init();
  setInterval(() => void app.refreshHealth(), HEALTH_POLL_MS);
});
