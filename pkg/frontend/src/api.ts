/**
 * Typed client for the map service.
 *
 * All requests go through a Transport function so that tests can swap in a
 * fake server and the browser build can swap in fetch. The client never
 * retries on its own; boundary edits carry an idempotency key instead, so a
 * caller that resends after a network timeout gets the stored reply rather
 * than a second mutation.
 */

import type {
  AlignResponse,
  BoundaryEditResponse,
  BoundarySpec,
  CorrespondencePair,
  DestinationResponse,
  MapDetail,
  MapListing,
  Point2,
} from "./types.js";

export interface TransportRequest {
  method: "GET" | "POST" | "DELETE";
  path: string;
  body?: unknown;
  headers?: Record<string, string>;
}

export interface TransportReply {
  status: number;
  body: unknown;
}

export type Transport = (req: TransportRequest) => Promise<TransportReply>;

/** Error reply from the service, carrying its machine-readable code. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

/** Transport backed by fetch, for use against a live server. */
export function fetchTransport(
  baseUrl: string,
  fetchImpl: typeof fetch = fetch,
): Transport {
  const root = baseUrl.replace(/\/$/, "");
  return async (req) => {
    const res = await fetchImpl(root + req.path, {
      method: req.method,
      headers: { "content-type": "application/json", ...req.headers },
      body: req.body === undefined ? undefined : JSON.stringify(req.body),
    });
    const text = await res.text();
    return { status: res.status, body: text === "" ? null : JSON.parse(text) };
  };
}

function errorFrom(reply: TransportReply): ApiError {
  const body = reply.body as { code?: string; message?: string } | null;
  const code = body?.code ?? "unknown";
  const message = body?.message ?? `request failed with status ${reply.status}`;
  return new ApiError(reply.status, code, message);
}

export class FloornavClient {
  private readonly send: Transport;

  constructor(send: Transport) {
    this.send = send;
  }

  private async request<T>(req: TransportRequest): Promise<T> {
    const reply = await this.send(req);
    if (reply.status < 200 || reply.status >= 300) {
      throw errorFrom(reply);
    }
    return reply.body as T;
  }

  health(): Promise<{ status: string; version: string }> {
    return this.request({ method: "GET", path: "/v1/health" });
  }

  async listMaps(): Promise<MapListing[]> {
    const reply = await this.request<{ maps: MapListing[] }>({
      method: "GET",
      path: "/v1/maps",
    });
    return reply.maps;
  }

  getMap(mapId: string): Promise<MapDetail> {
    return this.request({ method: "GET", path: `/v1/maps/${mapId}` });
  }

  /**
   * Submit reconstruction-to-floor correspondences and refit the placement.
   * Needs at least three pairs that do not sit on one line.
   */
  align(
    mapId: string,
    baseVersion: number,
    correspondences: CorrespondencePair[],
  ): Promise<AlignResponse> {
    return this.request({
      method: "POST",
      path: `/v1/maps/${mapId}/align`,
      body: { base_version: baseVersion, correspondences },
    });
  }

  editBoundaries(
    mapId: string,
    edit: {
      baseVersion: number;
      add?: BoundarySpec[];
      remove?: number[];
      idempotencyKey?: string;
    },
  ): Promise<BoundaryEditResponse> {
    const headers = edit.idempotencyKey
      ? { "Idempotency-Key": edit.idempotencyKey }
      : undefined;
    return this.request({
      method: "POST",
      path: `/v1/maps/${mapId}/boundaries`,
      body: {
        base_version: edit.baseVersion,
        add: edit.add ?? [],
        delete: edit.remove ?? [],
      },
      headers,
    });
  }

  addDestination(
    mapId: string,
    baseVersion: number,
    referenceImageId: number,
    name: string,
  ): Promise<DestinationResponse> {
    return this.request({
      method: "POST",
      path: `/v1/maps/${mapId}/destinations`,
      body: {
        base_version: baseVersion,
        reference_image_id: referenceImageId,
        name,
      },
    });
  }
}

/** Nearest item to `p` within `radius`, ties broken toward the earlier item. */
export function nearestWithin<T>(
  p: Point2,
  items: T[],
  position: (item: T) => Point2,
  radius: number,
): T | null {
  let best: T | null = null;
  let bestDist = Infinity;
  for (const item of items) {
    const [x, y] = position(item);
    const d = Math.hypot(x - p[0], y - p[1]);
    if (d <= radius && d < bestDist) {
      best = item;
      bestDist = d;
    }
  }
  return best;
}
