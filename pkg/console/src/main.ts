import { startConsole } from "./map.js";
import type { Metric } from "./types.js";

declare global {
  interface Window {
    API_BASE?: string;
  }
}

const params = new URLSearchParams(window.location.search);
const apiBase = params.get("api") ?? window.API_BASE ?? "http://127.0.0.1:8080";
const metric = (params.get("metric") === "emd" ? "emd" : "cosine") as Metric;

void startConsole(apiBase, metric);
