/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const orientation_field: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const ridge_image: (a: number, b: number, c: number, d: number) => [number, number];
export const sigmoid_curve: (a: number, b: number, c: number, d: number, e: number) => [number, number];
export const synthetic_match: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
