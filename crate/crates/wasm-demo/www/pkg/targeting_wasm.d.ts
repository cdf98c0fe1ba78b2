/* tslint:disable */
/* eslint-disable */

/**
 * Utilitarian policy values across removal fractions, oracle effect scores.
 *
 * Returns `{k, risk, treatment_effect, random}` with `{value, lo, hi}` per k.
 */
export function confounding_sweep(n: number, rho: number, budget: number, reps: number, seed: bigint): string;

/**
 * Smoothed effect against baseline risk for a synthetic trial, with linear nuisances.
 *
 * Returns `{b, tau_hat, ci_lo, ci_hi, true_tau}`; `true_tau` is aligned with `b`.
 */
export function effect_curve(n: number, rho: number, window: number, seed: bigint): string;

/**
 * Normalised weights on a 101-point percentile grid, plus the w75 / w25 ratio.
 */
export function weight_profile(alpha: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly confounding_sweep: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly effect_curve: (a: number, b: number, c: number, d: bigint) => [number, number, number, number];
    readonly weight_profile: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
