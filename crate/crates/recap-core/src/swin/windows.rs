//! Token-grid bookkeeping for windowed attention.
//!
//! Grids live in tensors as `[side², channels]` rows in raster order, so
//! window partitioning, cyclic shifts, and 2×2 merge gathering are all row
//! permutations. They are precomputed here as index tables and applied on
//! the tape as row gathers (differentiable for free). Convention for every
//! table: `out[i] = in[perm[i]]`.

/// Raster order → window-major order: windows in raster order over the
/// window grid, tokens in raster order within each window.
pub fn partition_perm(grid: usize, m: usize) -> Vec<usize> {
    debug_assert_eq!(grid % m, 0, "grid {grid} not tiled by window {m}");
    let per_side = grid / m;
    let mut perm = Vec::with_capacity(grid * grid);
    for wr in 0..per_side {
        for wc in 0..per_side {
            for i in 0..m {
                for j in 0..m {
                    perm.push((wr * m + i) * grid + (wc * m + j));
                }
            }
        }
    }
    perm
}

/// Inverse of a permutation table: `inverse_perm(p)[p[i]] == i`.
pub fn inverse_perm(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (dst, &src) in perm.iter().enumerate() {
        debug_assert!(src < perm.len());
        inv[src] = dst;
    }
    inv
}

/// Torus roll of the grid by (−shift, −shift): output position (r, c)
/// reads input position ((r+shift) mod grid, (c+shift) mod grid). The
/// inverse roll is `shift_perm(grid, (grid - shift) % grid)`.
pub fn shift_perm(grid: usize, shift: usize) -> Vec<usize> {
    let mut perm = Vec::with_capacity(grid * grid);
    for r in 0..grid {
        for c in 0..grid {
            perm.push(((r + shift) % grid) * grid + (c + shift) % grid);
        }
    }
    perm
}

/// Fuses two gathers into one: `gather(gather(x, first), second)` equals
/// `gather(x, compose(first, second))`.
pub fn compose(first: &[usize], second: &[usize]) -> Vec<usize> {
    second.iter().map(|&i| first[i]).collect()
}

/// Blocked-pair table for the shifted case, `[windows, m², m²]` with
/// `true` = may not attend. After the roll, the windows along the bottom
/// and right edges contain tokens carried across the torus seam; a pair is
/// blocked exactly when one token wrapped and the other did not (per axis),
/// i.e. when the pair was not contiguous in the unrolled grid. Encoded as
/// the usual per-axis region ids: 0 strictly above the seam band, 1 in the
/// band but unwrapped, 2 wrapped.
pub fn attention_mask(grid: usize, m: usize, shift: usize) -> Vec<bool> {
    debug_assert!(shift < m && m <= grid);
    let region = |x: usize| -> usize {
        if x < grid - m {
            0
        } else if x < grid - shift {
            1
        } else {
            2
        }
    };
    let per_side = grid / m;
    let tokens = m * m;
    let mut mask = Vec::with_capacity(per_side * per_side * tokens * tokens);
    let mut ids = vec![0usize; tokens];
    for wr in 0..per_side {
        for wc in 0..per_side {
            for (t, id) in ids.iter_mut().enumerate() {
                *id = 3 * region(wr * m + t / m) + region(wc * m + t % m);
            }
            for &a in &ids {
                for &b in &ids {
                    mask.push(a != b);
                }
            }
        }
    }
    mask
}

/// Gather order for the 2×2 merge: consecutive groups of four rows hold
/// top-left, top-right, bottom-left, bottom-right of one output token, so a
/// reshape to `[side²/4, 4·channels]` concatenates the quartet.
pub fn merge_perm(grid: usize) -> Vec<usize> {
    debug_assert_eq!(grid % 2, 0, "merge needs even extents, got {grid}");
    let half = grid / 2;
    let mut perm = Vec::with_capacity(grid * grid);
    for r in 0..half {
        for c in 0..half {
            let (tr, tc) = (2 * r, 2 * c);
            perm.push(tr * grid + tc);
            perm.push(tr * grid + tc + 1);
            perm.push((tr + 1) * grid + tc);
            perm.push((tr + 1) * grid + tc + 1);
        }
    }
    perm
}

/// Rows in a relative-position bias table for window side `m`: offsets
/// along each axis span `2m−1` values.
pub fn bias_table_rows(m: usize) -> usize {
    (2 * m - 1) * (2 * m - 1)
}

/// `[m², m²]` lookup mapping a (query, key) token pair to its row in the
/// bias table, keyed by the pair's relative offset.
pub fn relative_bias_map(m: usize) -> Vec<usize> {
    let span = 2 * m - 1;
    let mut map = Vec::with_capacity(m * m * m * m);
    for a in 0..m * m {
        for b in 0..m * m {
            let dr = a / m + (m - 1) - b / m;
            let dc = a % m + (m - 1) - b % m;
            map.push(dr * span + dc);
        }
    }
    map
}
