// Wire types for the /v1 API and the evaluation report file.
// Field names mirror the JSON exactly; do not rename.

export type Point2 = [number, number];
export type Point3 = [number, number, number];

export interface MapListing {
  id: string;
  name: string;
  version: number;
}

export interface MapImage {
  id: number;
  location: Point2;
  direction: number | null;
  origin: "mapped" | "evolved";
}

export interface MapLandmark {
  id: number;
  floor_position: Point2 | null;
}

export interface MapBoundary {
  id: number;
  a: Point2;
  b: Point2;
  source: "manual" | "extracted";
}

export interface MapDestination {
  name: string;
  reference_image_id: number;
}

export interface MapDetail {
  id: string;
  name: string;
  version: number;
  scale_ft_per_px: number;
  global_dim: number;
  local_dim: number;
  transform: number[][] | null;
  image_count: number;
  images: MapImage[];
  landmarks: MapLandmark[];
  boundaries: MapBoundary[];
  destinations: MapDestination[];
}

export interface CorrespondencePair {
  reconstruction_point: Point3;
  floor_point: Point2;
}

export interface AlignResponse {
  version: number;
  transform: number[][];
  residuals: number[];
  rms: number;
}

export interface BoundarySpec {
  a: Point2;
  b: Point2;
  source?: "manual" | "extracted";
}

export interface BoundaryEditResponse {
  version: number;
  boundaries: MapBoundary[];
}

export interface DestinationResponse {
  version: number;
  destinations: MapDestination[];
}

export interface ReportHeatmapPoint {
  index: number;
  gt: Point2;
  est: Point2 | null;
  error_ft: number | null;
}

export interface ReportTable {
  unit: string;
  rows: Array<number | string>;
  cols: Array<number | string>;
  cells: Array<Array<number | null>>;
}

export interface ReportDoc {
  format: "floornav-report";
  format_version: 1;
  scale_ft_per_px: number;
  alphas: number[];
  betas: number[];
  heatmap: ReportHeatmapPoint[];
  tables: {
    location_by_alpha: ReportTable;
    location_by_beta: ReportTable;
    direction_by_rate: ReportTable;
  };
}
