/* tslint:disable */
/* eslint-disable */

export class RankMap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Side length of the compressed block.
     */
    dim(): number;
    /**
     * Leaves as `(row, col, rows, cols, rank)` quintuples; dense leaves carry
     * rank `min(rows, cols)` and zero leaves rank 0.
     */
    leaves(): Uint32Array;
    max_rank(): number;
    ratio(): number;
}

export class Snapshots {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    count(): number;
    /**
     * Relative distance of frame `k` to the converged field.
     */
    distance(k: number): number;
    rgba(k: number): Uint8Array;
    size(): number;
}

export class Wavefield {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    iterations(): number;
    residual(): number;
    rgba(): Uint8Array;
    size(): number;
}

/**
 * Partitioned low-rank layout of the interface-to-interface Green's block of the top layer.
 */
export function rank_map(size: number, f_hz: number, model: string, eps: number): RankMap;

/**
 * Solves with a point source at fractional position `(src_x, src_y)`.
 */
export function solve_wavefield(size: number, f_hz: number, model: string, layers: number, cells: number, src_x: number, src_y: number): Wavefield;

/**
 * Volume fields after each outer iteration, starting from local solves only.
 */
export function sweep_snapshots(size: number, f_hz: number, model: string, layers: number, src_x: number, src_y: number): Snapshots;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_rankmap_free: (a: number, b: number) => void;
    readonly __wbg_snapshots_free: (a: number, b: number) => void;
    readonly __wbg_wavefield_free: (a: number, b: number) => void;
    readonly rank_map: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly rankmap_dim: (a: number) => number;
    readonly rankmap_leaves: (a: number) => [number, number];
    readonly rankmap_max_rank: (a: number) => number;
    readonly rankmap_ratio: (a: number) => number;
    readonly snapshots_count: (a: number) => number;
    readonly snapshots_distance: (a: number, b: number) => number;
    readonly snapshots_rgba: (a: number, b: number) => [number, number];
    readonly snapshots_size: (a: number) => number;
    readonly solve_wavefield: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
    readonly sweep_snapshots: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly wavefield_iterations: (a: number) => number;
    readonly wavefield_residual: (a: number) => number;
    readonly wavefield_rgba: (a: number) => [number, number];
    readonly wavefield_size: (a: number) => number;
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
