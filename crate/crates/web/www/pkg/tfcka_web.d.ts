/* tslint:disable */
/* eslint-disable */

/**
 * Click probability and error rates at one operating point, as JSON.
 */
export function channel_stats(n: number, m: number, q: number, loss_db: number, misalign: number, pd: number): string;

/**
 * `[log10 L, finite rate]` pairs for `L = 10^6 .. 10^max_log10_rounds`,
 * followed by the asymptotic rate as the last element.
 */
export function finite_curve(n: number, loss_db: number, eps_tot: number, max_log10_rounds: number, misalign: number, pd: number): Float64Array;

/**
 * `[loss_db, rate, bound]` triples for `steps` losses from 0 to `max_loss_db`.
 * The rate uses the optimal `q`; a bound of `-1` stands for infinity.
 */
export function rate_curve(n: number, m: number, max_loss_db: number, steps: number, misalign: number, pd: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly channel_stats: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly finite_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
    readonly rate_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number];
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
