/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_compare: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demo_convergence: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_info: (a: number) => [number, number];
export const demo_new: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const demo_random_query: (a: number, b: bigint) => [number, number, number, number];
export const demo_train_epoch: (a: number) => [number, number, number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
