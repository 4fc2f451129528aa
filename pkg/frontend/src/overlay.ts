/**
 * Pure reducer behind the boundary overlay.
 *
 * The editor keeps its committed truth on the server, but undo and redo are
 * reasoned about here, on a plain value type, where the inverse laws can be
 * property-tested without any I/O. Draft ids count up and are never reused,
 * matching how the server assigns them.
 */

import type { Point2 } from "./types.js";

export interface DraftSegment {
  id: number;
  a: Point2;
  b: Point2;
}

export type OverlayEdit =
  | { kind: "draw"; a: Point2; b: Point2 }
  | { kind: "erase"; id: number };

interface Snapshot {
  segments: DraftSegment[];
  nextId: number;
}

export interface OverlayState {
  segments: DraftSegment[];
  nextId: number;
  past: Snapshot[];
  future: Snapshot[];
}

export function overlayFrom(
  segments: DraftSegment[],
  nextId?: number,
): OverlayState {
  const floor = segments.reduce((m, s) => Math.max(m, s.id + 1), 0);
  return {
    segments: segments.slice(),
    nextId: nextId === undefined ? floor : nextId,
    past: [],
    future: [],
  };
}

function snap(state: OverlayState): Snapshot {
  return { segments: state.segments, nextId: state.nextId };
}

/**
 * Apply one edit. Drawing assigns the next id; erasing an id that is not
 * present leaves the overlay as it was but still records a history step, so
 * the caller does not need to pre-validate.
 */
export function applyEdit(state: OverlayState, edit: OverlayEdit): OverlayState {
  let segments: DraftSegment[];
  let nextId = state.nextId;
  if (edit.kind === "draw") {
    segments = [...state.segments, { id: nextId, a: edit.a, b: edit.b }];
    nextId += 1;
  } else {
    segments = state.segments.filter((s) => s.id !== edit.id);
  }
  return {
    segments,
    nextId,
    past: [...state.past, snap(state)],
    future: [],
  };
}

export function canUndo(state: OverlayState): boolean {
  return state.past.length > 0;
}

export function canRedo(state: OverlayState): boolean {
  return state.future.length > 0;
}

export function undo(state: OverlayState): OverlayState {
  if (!canUndo(state)) {
    return state;
  }
  const prev = state.past[state.past.length - 1];
  return {
    segments: prev.segments,
    nextId: prev.nextId,
    past: state.past.slice(0, -1),
    future: [...state.future, snap(state)],
  };
}

export function redo(state: OverlayState): OverlayState {
  if (!canRedo(state)) {
    return state;
  }
  const next = state.future[state.future.length - 1];
  return {
    segments: next.segments,
    nextId: next.nextId,
    past: [...state.past, snap(state)],
    future: state.future.slice(0, -1),
  };
}
