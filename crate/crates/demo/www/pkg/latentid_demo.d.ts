/* tslint:disable */
/* eslint-disable */

/**
 * Block orientation field estimated from [`ridge_image`], as JSON.
 */
export function orientation_field(size: number, angle_deg: number, wavelength: number, curvature: number, block_size: number): string;

/**
 * Grayscale pixels (row-major, `size × size`) of a sinusoidal ridge pattern.
 */
export function ridge_image(size: number, angle_deg: number, wavelength: number, curvature: number): Uint8Array;

/**
 * Samples the truncated sigmoid on `[0, v_max]`.
 */
export function sigmoid_curve(mu: number, tau: number, t: number, v_max: number, samples: number): Float64Array;

/**
 * Generates a subject, degrades a latent from it, matches the two and
 * returns everything needed to draw the result, as JSON.
 */
export function synthetic_match(seed: number, n_minutiae: number, rotation_deg: number, tx: number, ty: number, occlusion: number, jitter: number, spurious: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly orientation_field: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly ridge_image: (a: number, b: number, c: number, d: number) => [number, number];
    readonly sigmoid_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
    readonly synthetic_match: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
