/**
 * Pure presentation logic. Everything here maps API payloads to display
 * values ready for the DOM; the console does no numerical work of its own,
 * so every rendered number is traceable to a response field (similarity is
 * displayed rounded to two decimals, intervals come as integer percents).
 */

import type {
  EstimatesPayload,
  Group,
  HealthPayload,
  ModelsPayload,
} from "./types.js";

export const COLORS = {
  monitoredBase: "#f2b8b5", // light red
  monitoredHover: "#b3261e", // dark red
  unmonitoredBase: "#b7d4f0", // light blue
  unmonitoredHover: "#1a5fb4", // dark blue
} as const;

export interface ClusterStyle {
  color: string;
  fillColor: string;
  weight: number;
  fillOpacity: number;
}

/** Style is a function of the group and hover state alone. */
export function clusterStyle(group: Group, hovered: boolean): ClusterStyle {
  const monitored = group === "with_data";
  const fill = monitored
    ? hovered
      ? COLORS.monitoredHover
      : COLORS.monitoredBase
    : hovered
      ? COLORS.unmonitoredHover
      : COLORS.unmonitoredBase;
  return {
    color: monitored ? COLORS.monitoredHover : COLORS.unmonitoredHover,
    fillColor: fill,
    weight: hovered ? 2 : 1,
    fillOpacity: hovered ? 0.75 : 0.45,
  };
}

export function formatSimilarity(value: number): string {
  return value.toFixed(2);
}

export function formatInterval(lo: number, hi: number): string {
  return `${lo}%–${hi}%`;
}

export function formatIntersection(eii: { lo: number; hi: number } | null): string {
  return eii === null ? "∅" : formatInterval(eii.lo, eii.hi);
}

export interface EstimateRowView {
  sourceLabel: string;
  similarity: string;
  interval: string;
  intersection: string;
}

export interface EstimatePopupModel {
  title: string;
  metric: string;
  times: TimeOption[];
  selectedTime: string; // ISO timestamp
  rows: EstimateRowView[];
}

export interface TimeOption {
  label: string; // "HH:MM"
  value: string; // ISO timestamp for the t= query parameter
}

/** The drop-down offers exactly the times the service is configured with. */
export function timeOptions(health: HealthPayload): TimeOption[] {
  return health.estimate_times.map((hhmm) => ({
    label: hhmm,
    value: `${health.estimate_date}T${hhmm}`,
  }));
}

export function estimatePopupModel(
  payload: EstimatesPayload,
  times: TimeOption[],
  selectedTime: string,
): EstimatePopupModel {
  return {
    title: `Cluster without data ${payload.target_cluster}`,
    metric: payload.metric,
    times,
    selectedTime,
    rows: payload.rows.map((row) => ({
      sourceLabel: `cluster ${row.source_id}`,
      similarity: formatSimilarity(row.similarity),
      interval: formatInterval(row.lo, row.hi),
      intersection: formatIntersection(row.eii),
    })),
  };
}

export interface ModelPopupModel {
  title: string;
  rows: { label: string; value: string }[];
}

/** Monitored clusters show their model summary instead of estimates. */
export function modelPopupModel(
  payload: ModelsPayload,
  clusterId: number,
): ModelPopupModel {
  const model = payload.models.find((m) => m.cluster_id === clusterId);
  if (!model) {
    return {
      title: `Cluster with data ${clusterId}`,
      rows: [{ label: "model", value: "not trained yet" }],
    };
  }
  return {
    title: `Cluster with data ${clusterId}`,
    rows: [
      { label: "learner", value: model.learner },
      { label: "cv RMSE", value: `${model.cv_rmse_pct.toFixed(2)}%` },
      { label: "trained with", value: payload.datapoints + " datapoints" },
    ],
  };
}

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function estimatePopupHtml(model: EstimatePopupModel): string {
  const options = model.times
    .map((t) => {
      const sel = t.value === model.selectedTime ? " selected" : "";
      return `<option value="${escapeHtml(t.value)}"${sel}>${escapeHtml(t.label)}</option>`;
    })
    .join("");
  const rows = model.rows
    .map(
      (r) =>
        `<tr><td>${escapeHtml(r.sourceLabel)}</td><td>${r.similarity}</td>` +
        `<td>${r.interval}</td><td>${r.intersection}</td></tr>`,
    )
    .join("");
  return (
    `<div class="popup"><h3>${escapeHtml(model.title)}</h3>` +
    `<label>time <select class="time-select">${options}</select></label>` +
    `<table><thead><tr><th>source</th><th>similarity (${escapeHtml(model.metric)})</th>` +
    `<th>interval</th><th>intersection</th></tr></thead>` +
    `<tbody>${rows}</tbody></table></div>`
  );
}

export function modelPopupHtml(model: ModelPopupModel): string {
  const rows = model.rows
    .map((r) => `<tr><td>${escapeHtml(r.label)}</td><td>${escapeHtml(r.value)}</td></tr>`)
    .join("");
  return (
    `<div class="popup"><h3>${escapeHtml(model.title)}</h3>` +
    `<table><tbody>${rows}</tbody></table></div>`
  );
}
