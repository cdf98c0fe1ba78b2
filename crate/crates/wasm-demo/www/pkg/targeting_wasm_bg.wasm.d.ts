/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const confounding_sweep: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const effect_curve: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
export const weight_profile: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
