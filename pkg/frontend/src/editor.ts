/**
 * Server-backed boundary and destination editor.
 *
 * Every stroke commits immediately. The list in each reply is authoritative,
 * so the local overlay is always replaced wholesale rather than patched.
 * Undo works by committing the inverse edit; after an undo the server holds
 * exactly the earlier overlay, which is what a page reload will show.
 *
 * A stale-version reply means someone else changed the map under us. In that
 * case the editor reloads, raises a conflict banner, and drops its history,
 * because the recorded inverses no longer describe the authoritative state.
 */

import { ApiError, FloornavClient, nearestWithin } from "./api.js";
import type { MapBoundary, MapDestination, Point2 } from "./types.js";

/** Clicks snap to a reference dot within this many pixels. */
export const DOT_SNAP_PX = 6;

export type BoundaryEdit =
  | { kind: "draw"; a: Point2; b: Point2 }
  | { kind: "erase"; id: number };

interface HistoryEntry {
  forward: BoundaryEdit;
  backward: BoundaryEdit;
}

export interface ReferenceDot {
  imageId: number;
  at: Point2;
}

let keySeq = 0;

function freshKey(): string {
  keySeq += 1;
  return `edit-${Date.now()}-${keySeq}-${Math.floor(Math.random() * 1e9)}`;
}

export class BoundaryEditor {
  private readonly client: FloornavClient;
  readonly mapId: string;

  version: number;
  boundaries: MapBoundary[];
  destinations: MapDestination[];
  conflict: string | null = null;
  notice: string | null = null;

  private past: HistoryEntry[] = [];
  private future: BoundaryEdit[] = [];

  constructor(
    client: FloornavClient,
    mapId: string,
    version: number,
    boundaries: MapBoundary[],
    destinations: MapDestination[],
  ) {
    this.client = client;
    this.mapId = mapId;
    this.version = version;
    this.boundaries = boundaries;
    this.destinations = destinations;
  }

  static async load(client: FloornavClient, mapId: string): Promise<BoundaryEditor> {
    const detail = await client.getMap(mapId);
    return new BoundaryEditor(
      client,
      mapId,
      detail.version,
      detail.boundaries,
      detail.destinations,
    );
  }

  async reload(): Promise<void> {
    const detail = await this.client.getMap(this.mapId);
    this.version = detail.version;
    this.boundaries = detail.boundaries;
    this.destinations = detail.destinations;
  }

  canUndo(): boolean {
    return this.past.length > 0;
  }

  canRedo(): boolean {
    return this.future.length > 0;
  }

  async draw(a: Point2, b: Point2): Promise<void> {
    const edit: BoundaryEdit = { kind: "draw", a, b };
    const backward = await this.perform(edit);
    if (backward !== null) {
      this.past.push({ forward: edit, backward });
      this.future = [];
    }
  }

  async erase(id: number): Promise<void> {
    const edit: BoundaryEdit = { kind: "erase", id };
    const backward = await this.perform(edit);
    if (backward !== null) {
      this.past.push({ forward: edit, backward });
      this.future = [];
    }
  }

  /**
   * Commit the inverse of the most recent edit. A segment restored by undo
   * gets a fresh id from the server, so the redo entry is rebased onto the
   * inverse the restore reported, not onto the id that no longer exists.
   */
  async undoLast(): Promise<void> {
    const entry = this.past.pop();
    if (entry === undefined) {
      return;
    }
    const rebasedForward = await this.perform(entry.backward);
    if (rebasedForward !== null) {
      this.future.push(rebasedForward);
    }
  }

  async redoLast(): Promise<void> {
    const edit = this.future.pop();
    if (edit === undefined) {
      return;
    }
    const backward = await this.perform(edit);
    if (backward !== null) {
      this.past.push({ forward: edit, backward });
    }
  }

  /**
   * Commit one edit and return its inverse, or null when the commit was
   * rejected. The inverse of a draw names the id the server just assigned,
   * found by diffing the authoritative list against the ids we held before.
   */
  private async perform(edit: BoundaryEdit): Promise<BoundaryEdit | null> {
    const knownIds = new Set(this.boundaries.map((s) => s.id));
    const erased =
      edit.kind === "erase"
        ? this.boundaries.find((s) => s.id === edit.id)
        : undefined;
    if (edit.kind === "erase" && erased === undefined) {
      this.notice = `no boundary with id ${edit.id}`;
      return null;
    }
    let reply;
    try {
      reply = await this.client.editBoundaries(this.mapId, {
        baseVersion: this.version,
        add:
          edit.kind === "draw"
            ? [{ a: edit.a, b: edit.b, source: "manual" }]
            : [],
        remove: edit.kind === "erase" ? [edit.id] : [],
        idempotencyKey: freshKey(),
      });
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        this.conflict = err.message;
        this.past = [];
        this.future = [];
        await this.reload();
        return null;
      }
      if (err instanceof ApiError) {
        this.notice = err.message;
        return null;
      }
      throw err;
    }
    this.version = reply.version;
    this.boundaries = reply.boundaries;
    this.notice = null;
    if (edit.kind === "erase") {
      const gone = erased as MapBoundary;
      return { kind: "draw", a: gone.a, b: gone.b };
    }
    const added = reply.boundaries.find((s) => !knownIds.has(s.id));
    if (added === undefined) {
      throw new Error("server reply is missing the boundary it just accepted");
    }
    return { kind: "erase", id: added.id };
  }

  dismissConflict(): void {
    this.conflict = null;
  }

  /** Reference dot under a click, or null when nothing is close enough. */
  resolveDot(p: Point2, dots: ReferenceDot[]): ReferenceDot | null {
    return nearestWithin(p, dots, (d) => d.at, DOT_SNAP_PX);
  }

  /**
   * Name a destination at a clicked dot. Returns true on success. A miss or
   * a duplicate name leaves the map untouched and sets the notice text.
   */
  async nameDestination(
    p: Point2,
    dots: ReferenceDot[],
    name: string,
  ): Promise<boolean> {
    const dot = this.resolveDot(p, dots);
    if (dot === null) {
      this.notice = `no reference dot within ${DOT_SNAP_PX} px of that click`;
      return false;
    }
    try {
      const reply = await this.client.addDestination(
        this.mapId,
        this.version,
        dot.imageId,
        name,
      );
      this.version = reply.version;
      this.destinations = reply.destinations;
      this.notice = null;
      return true;
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        if (err.code === "version_skew") {
          this.conflict = err.message;
          this.past = [];
          this.future = [];
          await this.reload();
        } else {
          this.notice = err.message;
        }
        return false;
      }
      if (err instanceof ApiError) {
        this.notice = err.message;
        return false;
      }
      throw err;
    }
  }
}
