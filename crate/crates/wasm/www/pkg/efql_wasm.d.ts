/* tslint:disable */
/* eslint-disable */

/**
 * Gaussian memberships of `count` evenly spaced sets over `[lo, hi]`,
 * sampled at `samples` points. Layout: the x grid, then one row per set.
 */
export function membership_curves(lo: number, hi: number, count: number, samples: number): Float64Array;

/**
 * Per-episode returns of `agent` trained for `episodes` episodes on
 * `env` ("cartpole" or "chain").
 */
export function train(agent: string, env: string, episodes: number, seed: bigint, alpha: number): Float64Array;

/**
 * Runs the operator property checks; returns a JSON array of
 * `{name, passed, detail}`.
 */
export function verify(tol: number, seed: bigint): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly membership_curves: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly train: (a: number, b: number, c: number, d: number, e: number, f: bigint, g: number) => [number, number, number, number];
    readonly verify: (a: number, b: bigint) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
