/* tslint:disable */
/* eslint-disable */

export class FitResult {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Flat `iteration, total` pairs.
     */
    history(): Float64Array;
    mesh(): Float32Array;
    slice(): Float64Array;
    readonly iterations: number;
    readonly res: number;
    readonly stop: string;
}

export function fit(shape: string, res: number, iters: number, points: number, alpha3: number, alpha4: number, seed: bigint): FitResult;

export function mollifier_curves(epsilon: number, samples: number): Float64Array;

export function shape_mesh(shape: string, res: number, iso: number): Float32Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_fitresult_free: (a: number, b: number) => void;
    readonly fit: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: bigint) => [number, number, number];
    readonly fitresult_history: (a: number) => [number, number];
    readonly fitresult_iterations: (a: number) => number;
    readonly fitresult_mesh: (a: number) => [number, number];
    readonly fitresult_res: (a: number) => number;
    readonly fitresult_slice: (a: number) => [number, number];
    readonly fitresult_stop: (a: number) => [number, number];
    readonly mollifier_curves: (a: number, b: number) => [number, number, number, number];
    readonly shape_mesh: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
