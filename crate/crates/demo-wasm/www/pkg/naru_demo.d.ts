/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Estimates `query` with the learned model, uniform-region sampling
     * over the model, independence, and a full scan.
     */
    compare(query: string, samples: number): string;
    /**
     * Estimates at growing sample counts for both samplers.
     */
    convergence(query: string): string;
    /**
     * Column names, domain sizes and decoded values, for building the form.
     */
    info(): string;
    /**
     * `kind` is `correlated` (8 columns with a functional dependency and
     * strong correlations) or `skewed` (6 columns with one hot tuple).
     */
    constructor(kind: string, rows: number, seed: bigint);
    /**
     * A random query in the text grammar, drawn like benchmark workloads.
     */
    random_query(seed: bigint): string;
    /**
     * Runs one more epoch and returns every epoch so far. Each call starts
     * a fresh optimizer state, which keeps the page responsive between
     * epochs at a small cost in convergence speed.
     */
    train_epoch(): string;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_compare: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demo_convergence: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_info: (a: number) => [number, number];
    readonly demo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly demo_random_query: (a: number, b: bigint) => [number, number, number, number];
    readonly demo_train_epoch: (a: number) => [number, number, number, number];
    readonly __externref_table_alloc: () => number;
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
