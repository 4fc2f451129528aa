/**
 * Render model for the localization error heatmap.
 *
 * Input is an evaluation report file picked by the operator, so parsing is
 * defensive: anything malformed turns into an error panel, never a throw
 * that escapes to the page. Marker size and hue both grow with error, with
 * a zero-error fix drawn as the smallest, greenest circle.
 */

import type { Point2, ReportDoc, ReportHeatmapPoint } from "./types.js";

export const MIN_RADIUS_PX = 3;
export const MAX_RADIUS_PX = 18;
export const TRUTH_RADIUS_PX = 4;
export const TRUTH_COLOR = "#555555";
export const UNLOCATED_COLOR = "#999999";

export class ReportFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "ReportFormatError";
  }
}

function isPair(v: unknown): v is Point2 {
  return (
    Array.isArray(v) &&
    v.length === 2 &&
    typeof v[0] === "number" &&
    typeof v[1] === "number"
  );
}

function checkPoint(entry: unknown, at: number): ReportHeatmapPoint {
  if (typeof entry !== "object" || entry === null) {
    throw new ReportFormatError(`heatmap entry ${at} is not an object`);
  }
  const e = entry as Record<string, unknown>;
  if (typeof e.index !== "number") {
    throw new ReportFormatError(`heatmap entry ${at} has no numeric index`);
  }
  if (!isPair(e.gt)) {
    throw new ReportFormatError(`heatmap entry ${at} has no ground-truth point`);
  }
  if (e.est !== null && !isPair(e.est)) {
    throw new ReportFormatError(`heatmap entry ${at} has a malformed estimate`);
  }
  if (e.error_ft !== null && typeof e.error_ft !== "number") {
    throw new ReportFormatError(`heatmap entry ${at} has a malformed error`);
  }
  return entry as unknown as ReportHeatmapPoint;
}

/** Validate a parsed JSON value as a report, with a reason on rejection. */
export function parseReport(value: unknown): ReportDoc {
  if (typeof value !== "object" || value === null || Array.isArray(value)) {
    throw new ReportFormatError("report is not a JSON object");
  }
  const doc = value as Record<string, unknown>;
  if (doc.format !== "floornav-report") {
    throw new ReportFormatError(
      `not an evaluation report (format is ${JSON.stringify(doc.format)})`,
    );
  }
  if (doc.format_version !== 1) {
    throw new ReportFormatError(
      `unsupported report version ${JSON.stringify(doc.format_version)}`,
    );
  }
  if (!Array.isArray(doc.heatmap)) {
    throw new ReportFormatError("report has no heatmap list");
  }
  doc.heatmap.forEach(checkPoint);
  const tables = doc.tables as Record<string, unknown> | undefined;
  for (const key of ["location_by_alpha", "location_by_beta", "direction_by_rate"]) {
    if (typeof tables !== "object" || tables === null || !(key in tables)) {
      throw new ReportFormatError(`report is missing the ${key} table`);
    }
  }
  return value as ReportDoc;
}

export function radiusForError(errorFt: number, maxErrorFt: number): number {
  if (errorFt <= 0 || maxErrorFt <= 0) {
    return MIN_RADIUS_PX;
  }
  const t = Math.min(errorFt / maxErrorFt, 1);
  return MIN_RADIUS_PX + (MAX_RADIUS_PX - MIN_RADIUS_PX) * t;
}

/** Green at zero error, sliding to red at the worst error on the plot. */
export function colorForError(errorFt: number, maxErrorFt: number): string {
  const t =
    maxErrorFt <= 0 ? 0 : Math.min(Math.max(errorFt / maxErrorFt, 0), 1);
  const r = Math.round(255 * t);
  const g = Math.round(255 * (1 - t));
  return `rgb(${r}, ${g}, 0)`;
}

export interface Marker {
  index: number;
  kind: "estimate" | "truth" | "unlocated";
  center: Point2;
  radiusPx: number;
  color: string;
  filled: boolean;
}

export interface HeatmapModel {
  kind: "heatmap";
  markers: Marker[];
  maxErrorFt: number;
  scaleFtPerPx: number;
}

export interface ErrorPanel {
  kind: "error";
  message: string;
}

/**
 * Build the marker list for one report. Each query contributes an open
 * circle at its true spot; located queries add a filled circle at the
 * estimate, unlocated ones a hollow gray ring at the truth instead.
 */
export function heatmapView(value: unknown): HeatmapModel | ErrorPanel {
  let doc: ReportDoc;
  try {
    doc = parseReport(value);
  } catch (err) {
    if (err instanceof ReportFormatError) {
      return { kind: "error", message: err.message };
    }
    throw err;
  }
  const errors = doc.heatmap
    .map((p) => p.error_ft)
    .filter((e): e is number => e !== null);
  const maxErrorFt = errors.length === 0 ? 0 : Math.max(...errors);
  const markers: Marker[] = [];
  for (const p of doc.heatmap) {
    markers.push({
      index: p.index,
      kind: "truth",
      center: p.gt,
      radiusPx: TRUTH_RADIUS_PX,
      color: TRUTH_COLOR,
      filled: false,
    });
    if (p.est === null || p.error_ft === null) {
      markers.push({
        index: p.index,
        kind: "unlocated",
        center: p.gt,
        radiusPx: MIN_RADIUS_PX,
        color: UNLOCATED_COLOR,
        filled: false,
      });
      continue;
    }
    markers.push({
      index: p.index,
      kind: "estimate",
      center: p.est,
      radiusPx: radiusForError(p.error_ft, maxErrorFt),
      color: colorForError(p.error_ft, maxErrorFt),
      filled: true,
    });
  }
  return {
    kind: "heatmap",
    markers,
    maxErrorFt,
    scaleFtPerPx: doc.scale_ft_per_px,
  };
}
