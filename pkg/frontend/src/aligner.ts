/**
 * State model for the alignment workflow.
 *
 * The operator sees a reconstruction frame on the left and the floor plan on
 * the right. Each correspondence is built in two clicks: one on the frame,
 * which snaps to the nearest detected feature, and one on the floor plan.
 * Once three pairs exist every committed pair triggers a refit, and the
 * current residuals and RMS come back from the server with the new placement.
 */

import { ApiError, FloornavClient, nearestWithin } from "./api.js";
import type { AlignResponse, Point2, Point3 } from "./types.js";

/** A frame click further than this from every feature is rejected. */
export const FEATURE_SNAP_PX = 6;

/** Pairs needed before a fit is attempted. */
export const MIN_PAIRS = 3;

export interface FrameFeature {
  id: number;
  pixel: Point2;
  reconstruction_point: Point3;
}

export interface AlignerFrame {
  width: number;
  height: number;
  features: FrameFeature[];
}

export interface FloorPlanSize {
  width: number;
  height: number;
}

export interface CommittedPair {
  feature: FrameFeature;
  floor: Point2;
}

function inBounds(p: Point2, size: { width: number; height: number }): boolean {
  return p[0] >= 0 && p[0] <= size.width && p[1] >= 0 && p[1] <= size.height;
}

export class Aligner {
  private readonly client: FloornavClient;
  private readonly mapId: string;
  private readonly frame: AlignerFrame;
  private readonly floor: FloorPlanSize;

  mapVersion: number;
  pendingFeature: FrameFeature | null = null;
  pendingFloor: Point2 | null = null;
  pairs: CommittedPair[] = [];
  lastFit: AlignResponse | null = null;
  notice: string | null = null;

  constructor(
    client: FloornavClient,
    mapId: string,
    mapVersion: number,
    frame: AlignerFrame,
    floor: FloorPlanSize,
  ) {
    this.client = client;
    this.mapId = mapId;
    this.mapVersion = mapVersion;
    this.frame = frame;
    this.floor = floor;
  }

  /** Click on the reconstruction frame. Snaps to a feature or complains. */
  async clickFrame(p: Point2): Promise<void> {
    if (!inBounds(p, this.frame)) {
      this.notice = "click landed outside the frame";
      return;
    }
    const hit = nearestWithin(
      p,
      this.frame.features,
      (f) => f.pixel,
      FEATURE_SNAP_PX,
    );
    if (hit === null) {
      this.notice = `no feature within ${FEATURE_SNAP_PX} px of that click`;
      return;
    }
    this.notice = null;
    this.pendingFeature = hit;
    await this.commitIfComplete();
  }

  /** Click on the floor plan. */
  async clickFloor(p: Point2): Promise<void> {
    if (!inBounds(p, this.floor)) {
      this.notice = "click landed outside the floor plan";
      return;
    }
    this.notice = null;
    this.pendingFloor = p;
    await this.commitIfComplete();
  }

  private async commitIfComplete(): Promise<void> {
    if (this.pendingFeature === null || this.pendingFloor === null) {
      return;
    }
    this.pairs.push({ feature: this.pendingFeature, floor: this.pendingFloor });
    this.pendingFeature = null;
    this.pendingFloor = null;
    if (this.pairs.length >= MIN_PAIRS) {
      await this.refit();
    }
  }

  private async refit(): Promise<void> {
    try {
      const fit = await this.client.align(
        this.mapId,
        this.mapVersion,
        this.pairs.map((p) => ({
          reconstruction_point: p.feature.reconstruction_point,
          floor_point: p.floor,
        })),
      );
      this.lastFit = fit;
      this.mapVersion = fit.version;
    } catch (err) {
      if (err instanceof ApiError) {
        this.lastFit = null;
        this.notice = err.message;
        return;
      }
      throw err;
    }
  }

  /** Drop the most recent pair and refit if enough remain. */
  async removeLastPair(): Promise<void> {
    if (this.pairs.length === 0) {
      return;
    }
    this.pairs.pop();
    if (this.pairs.length >= MIN_PAIRS) {
      await this.refit();
    } else {
      this.lastFit = null;
    }
  }

  /** Guidance line shown while the fit is not yet possible. */
  hint(): string | null {
    const missing = MIN_PAIRS - this.pairs.length;
    if (missing <= 0) {
      return null;
    }
    const noun = missing === 1 ? "correspondence" : "correspondences";
    return `add ${missing} more ${noun} to place the map`;
  }

  /** RMS residual as shown next to the overlay, three decimals. */
  rmsDisplay(): string | null {
    return this.lastFit === null ? null : this.lastFit.rms.toFixed(3);
  }

  /** Per-pair residuals with the same formatting as the RMS readout. */
  residualDisplays(): string[] {
    if (this.lastFit === null) {
      return [];
    }
    return this.lastFit.residuals.map((r) => r.toFixed(3));
  }
}
