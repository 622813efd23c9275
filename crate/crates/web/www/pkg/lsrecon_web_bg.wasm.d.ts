/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_fitresult_free: (a: number, b: number) => void;
export const fit: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
export const fitresult_history: (a: number) => [number, number];
export const fitresult_iterations: (a: number) => number;
export const fitresult_mesh: (a: number) => [number, number];
export const fitresult_res: (a: number) => number;
export const fitresult_slice: (a: number) => [number, number];
export const fitresult_stop: (a: number) => [number, number];
export const mollifier_curves: (a: number, b: number) => [number, number, number, number];
export const shape_mesh: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
