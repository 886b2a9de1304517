/* tslint:disable */
/* eslint-disable */

/**
 * Pair-of-pairs experiment on synthetic faces with simulated voters that
 * judge by base distance plus Gaussian noise.
 */
export function bin_demo(seed: number, n_bins: number, per_cell: number, noise: number, threshold: number): string;

/**
 * NDCG of a model ordering.
 *
 * `relevance[i]` is the graded relevance of candidate `i`; `order` lists
 * candidate indices, nearest first.
 */
export function ndcg(relevance: Float64Array, order: Uint32Array): number;

/**
 * Builds a small synthetic benchmark, trains a head on it and reports
 * held-out accuracy before and after training.
 */
export function train_demo(seed: number, epochs: number, noise: number, learning_rate: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bin_demo: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly ndcg: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly train_demo: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
