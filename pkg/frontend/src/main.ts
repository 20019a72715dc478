import { ChatApp } from "./app.js";

const root = document.getElementById("app");
if (root) {
  const baseUrl = (window as { CONVRECO_BASE_URL?: string }).CONVRECO_BASE_URL ?? "";
  const app = new ChatApp(root, { baseUrl });
  void app.start();
}
