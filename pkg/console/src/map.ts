/**
 * Leaflet wiring: draws the cluster features, toggles hover styles and
 * opens per-cluster popups. All display values come from the view model;
 * this module only moves them into the DOM.
 */

import type * as LTypes from "leaflet";
import { ApiClient, ApiError } from "./api.js";
import type { ClusterFeature, Metric } from "./types.js";
import {
  clusterStyle,
  estimatePopupHtml,
  estimatePopupModel,
  modelPopupHtml,
  modelPopupModel,
  TimeOption,
  timeOptions,
} from "./viewModel.js";

// Leaflet is loaded as a plain script tag (no bundler); the global L
// carries the full typed surface.
declare const L: typeof LTypes;

export interface ConsoleApp {
  map: LTypes.Map;
  refresh(): Promise<void>;
}

export function showBanner(message: string): void {
  const el = document.getElementById("banner");
  if (!el) return;
  el.textContent = message;
  el.style.display = "block";
}

export function hideBanner(): void {
  const el = document.getElementById("banner");
  if (el) el.style.display = "none";
}

export async function startConsole(apiBase: string, metric: Metric = "cosine"): Promise<ConsoleApp> {
  const api = new ApiClient(apiBase);
  const map = L.map("map");
  L.tileLayer("https://tile.openstreetmap.org/{z}/{x}/{y}.png", {
    attribution: "&copy; OpenStreetMap contributors",
  }).addTo(map);

  let times: TimeOption[] = [];
  const inflight = new Map<string, AbortController>();

  async function openEstimatePopup(
    feature: ClusterFeature,
    layer: LTypes.Layer,
    selectedTime: string,
  ): Promise<void> {
    const apiId = feature.properties.api_id;
    inflight.get(apiId)?.abort();
    const controller = new AbortController();
    inflight.set(apiId, controller);
    try {
      const payload = await api.estimates(apiId, selectedTime, metric, controller.signal);
      const model = estimatePopupModel(payload, times, selectedTime);
      const popup = layer.getPopup() ?? layer.bindPopup("").getPopup()!;
      popup.setContent(() => {
        const div = document.createElement("div");
        div.innerHTML = estimatePopupHtml(model);
        const select = div.querySelector<HTMLSelectElement>(".time-select");
        select?.addEventListener("change", () => {
          void openEstimatePopup(feature, layer, select.value);
        });
        return div;
      });
      if (!popup.isOpen()) layer.openPopup();
      else popup.update();
    } catch (err) {
      if ((err as Error).name === "AbortError") return;
      showBanner(`estimates unavailable: ${(err as ApiError).message}`);
    }
  }

  async function openModelPopup(feature: ClusterFeature, layer: LTypes.Layer): Promise<void> {
    try {
      const payload = await api.models();
      const html = modelPopupHtml(modelPopupModel(payload, feature.properties.cluster_id));
      layer.bindPopup(html).openPopup();
    } catch (err) {
      showBanner(`models unavailable: ${(err as ApiError).message}`);
    }
  }

  async function refresh(): Promise<void> {
    hideBanner();
    const [health, clusters] = await Promise.all([api.health(), api.clusters()]);
    times = timeOptions(health);
    const layerGroup = L.geoJSON(clusters as never, {
      style: (feature) => clusterStyle((feature as ClusterFeature).properties.group, false),
      onEachFeature: (feature, layer) => {
        const f = feature as ClusterFeature;
        const path = layer as LTypes.Path;
        layer.on("mouseover", () => path.setStyle(clusterStyle(f.properties.group, true)));
        layer.on("mouseout", () => path.setStyle(clusterStyle(f.properties.group, false)));
        layer.on("click", () => {
          if (f.properties.group === "without_data") {
            void openEstimatePopup(f, layer, times[0]?.value ?? "");
          } else {
            void openModelPopup(f, layer);
          }
        });
      },
    }).addTo(map);
    const bounds = layerGroup.getBounds();
    if (bounds.isValid()) map.fitBounds(bounds.pad(0.1));
  }

  try {
    await refresh();
  } catch (err) {
    showBanner(`API unreachable at ${apiBase}: ${(err as Error).message}`);
  }
  return { map, refresh };
}
