import { renderApp } from "./form";

const params = new URLSearchParams(window.location.search);
const apiBase = (params.get("api") || "http://127.0.0.1:8766").replace(/\/+$/, "");

const root = document.getElementById("app");
if (root) {
  void renderApp(root, { apiBase });
}
