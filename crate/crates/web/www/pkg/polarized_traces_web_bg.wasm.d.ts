/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_rankmap_free: (a: number, b: number) => void;
export const __wbg_snapshots_free: (a: number, b: number) => void;
export const __wbg_wavefield_free: (a: number, b: number) => void;
export const rank_map: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const rankmap_dim: (a: number) => number;
export const rankmap_leaves: (a: number) => [number, number];
export const rankmap_max_rank: (a: number) => number;
export const rankmap_ratio: (a: number) => number;
export const snapshots_count: (a: number) => number;
export const snapshots_distance: (a: number, b: number) => number;
export const snapshots_rgba: (a: number, b: number) => [number, number];
export const snapshots_size: (a: number) => number;
export const solve_wavefield: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number) => [number, number, number];
export const sweep_snapshots: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const wavefield_iterations: (a: number) => number;
export const wavefield_residual: (a: number) => number;
export const wavefield_rgba: (a: number) => [number, number];
export const wavefield_size: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
