/**
 * Release gates for the map-maker UI. Each test prints one verdict line so
 * the run log reads as a checklist. The alignment gate replays the recorded
 * server exchange, so the displayed RMS is checked against a number the
 * real service produced, not against this codebase's own arithmetic.
 */

import { describe, expect, it } from "vitest";

import { FloornavClient, type Transport } from "../src/api.js";
import { Aligner } from "../src/aligner.js";
import { BoundaryEditor } from "../src/editor.js";
import type { MapDetail, Point2, Point3 } from "../src/types.js";
import { FakeServer, loadFixture } from "./fake_server.js";

interface AlignFixture {
  request: {
    correspondences: Array<{
      reconstruction_point: Point3;
      floor_point: Point2;
    }>;
  };
  response: {
    version: number;
    transform: number[][];
    residuals: number[];
    rms: number;
  };
  rms_display: string;
  residual_displays: string[];
}

const DETAIL = loadFixture<MapDetail>("map_detail.json");
const RECORDED = loadFixture<AlignFixture>("align_round_trip.json");

function gate(ok: boolean, label: string): void {
  console.log(`${ok ? "[PASS]" : "[FAIL]"} ${label}`);
  expect(ok).toBe(true);
}

describe("release gates", () => {
  it("alignment workflow shows the server's RMS at three decimals", async () => {
    // The replay transport hands back the recorded reply once the operator
    // has entered all five recorded pairs; earlier refits go to the fake.
    const server = new FakeServer(DETAIL);
    const inner = server.transport();
    const wanted = JSON.stringify(RECORDED.request.correspondences);
    const transport: Transport = async (req) => {
      const body = req.body as { correspondences?: unknown } | undefined;
      if (
        req.path.endsWith("/align") &&
        JSON.stringify(body?.correspondences) === wanted
      ) {
        return { status: 200, body: structuredClone(RECORDED.response) };
      }
      return inner(req);
    };

    const pixels: Point2[] = [
      [100, 100],
      [300, 120],
      [200, 260],
      [420, 300],
      [520, 180],
    ];
    const aligner = new Aligner(
      new FloornavClient(transport),
      DETAIL.id,
      DETAIL.version,
      {
        width: 640,
        height: 360,
        features: RECORDED.request.correspondences.map((c, i) => ({
          id: i,
          pixel: pixels[i],
          reconstruction_point: c.reconstruction_point,
        })),
      },
      { width: 20, height: 15 },
    );
    for (let i = 0; i < 5; i += 1) {
      await aligner.clickFrame(pixels[i]);
      await aligner.clickFloor(RECORDED.request.correspondences[i].floor_point);
    }

    const shown = aligner.rmsDisplay();
    const residualsMatch =
      JSON.stringify(aligner.residualDisplays()) ===
      JSON.stringify(RECORDED.residual_displays);
    gate(
      shown === RECORDED.rms_display && residualsMatch,
      `alignment display: rms reads ${shown}, server recorded ${RECORDED.rms_display}`,
    );
  });

  it("boundary edit, undo, reload lands on the original overlay", async () => {
    const server = new FakeServer(DETAIL);
    const client = new FloornavClient(server.transport());

    const editor = await BoundaryEditor.load(client, DETAIL.id);
    await editor.draw([3.0, 4.0], [12.0, 4.0]);
    const grew =
      editor.boundaries.length === DETAIL.boundaries.length + 1;
    await editor.undoLast();

    const reloaded = await BoundaryEditor.load(client, DETAIL.id);
    const same =
      JSON.stringify(reloaded.boundaries) === JSON.stringify(DETAIL.boundaries);
    gate(
      grew && same,
      `boundary undo round trip: ${reloaded.boundaries.length} segments match the original overlay`,
    );
    expect(reloaded.destinations).toEqual(DETAIL.destinations);
  });
});
