export * from "./types.js";
export * from "./api.js";
export * from "./aligner.js";
export * from "./overlay.js";
export * from "./editor.js";
export * from "./heatmap.js";
