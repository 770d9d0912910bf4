import { mountApp } from "./app.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("service") ?? "http://127.0.0.1:8520";

const root = document.getElementById("root");
if (root) {
  mountApp(root, baseUrl);
}
