/**
 * Viewer state and its URL-query representation.
 *
 * The whole view is reconstructible from the query string, so any state the
 * user reaches is a deep link. Parsing is defensive: alpha is clamped to
 * [0, 1], unknown enum values fall back to defaults, and the target exam is
 * never also a source.
 */

export type OverlayMode = "none" | "landmarks";
export type Method = "angle" | "lsq";

export interface ViewerState {
  patient: string | null;
  target: string | null;
  sources: string[];
  alpha: number;
  overlay: OverlayMode;
  method: Method;
}

export const DEFAULT_STATE: ViewerState = {
  patient: null,
  target: null,
  sources: [],
  alpha: 0.5,
  overlay: "none",
  method: "angle",
};

export function clampAlpha(value: number): number {
  if (!Number.isFinite(value)) return DEFAULT_STATE.alpha;
  return Math.min(1, Math.max(0, value));
}

/** Enforce the state invariants (target not in sources, alpha in range). */
export function normalize(state: ViewerState): ViewerState {
  const sources = state.sources.filter(
    (id, i) => id !== state.target && state.sources.indexOf(id) === i,
  );
  return { ...state, sources, alpha: clampAlpha(state.alpha) };
}

export function stateToQuery(state: ViewerState): string {
  const s = normalize(state);
  const q = new URLSearchParams();
  if (s.patient) q.set("patient", s.patient);
  if (s.target) q.set("target", s.target);
  if (s.sources.length) q.set("sources", s.sources.join(","));
  q.set("alpha", s.alpha.toString());
  q.set("overlay", s.overlay);
  q.set("method", s.method);
  return q.toString();
}

export function stateFromQuery(query: string): ViewerState {
  const q = new URLSearchParams(query.startsWith("?") ? query.slice(1) : query);
  const overlay = q.get("overlay");
  const method = q.get("method");
  const sources = (q.get("sources") ?? "").split(",").filter((s) => s.length > 0);
  return normalize({
    patient: q.get("patient"),
    target: q.get("target"),
    sources,
    alpha: q.has("alpha") ? clampAlpha(Number(q.get("alpha"))) : DEFAULT_STATE.alpha,
    overlay: overlay === "landmarks" ? "landmarks" : "none",
    method: method === "lsq" ? "lsq" : "angle",
  });
}

/** Degrees for physicians; the wire format stays radians. */
export function radiansToDisplayDegrees(radians: number): string {
  return ((radians * 180) / Math.PI).toFixed(1);
}
