//! Kernel features over sparse bag-of-words sentence vectors.
//!
//! All nine statistics treat the vectors as dense over the vocabulary
//! dimension but are computed from the sparse entries, with the block of
//! coordinates that are zero in both vectors folded in analytically. That
//! keeps every feature O(m²) in the nonzero-support size m instead of the
//! vocabulary size.

use super::sparse::SparseVec;

pub const KERNEL_FEATURE_COUNT: usize = 9;

/// Merged view of two sparse vectors over the union of their supports.
fn union_entries(x: &SparseVec, y: &SparseVec) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(x.entries.len() + y.entries.len());
    let (mut i, mut j) = (0, 0);
    while i < x.entries.len() || j < y.entries.len() {
        match (x.entries.get(i), y.entries.get(j)) {
            (Some(&(xi, xv)), Some(&(yi, yv))) => {
                if xi == yi {
                    out.push((xv, yv));
                    i += 1;
                    j += 1;
                } else if xi < yi {
                    out.push((xv, 0.0));
                    i += 1;
                } else {
                    out.push((0.0, yv));
                    j += 1;
                }
            }
            (Some(&(_, xv)), None) => {
                out.push((xv, 0.0));
                i += 1;
            }
            (None, Some(&(_, yv))) => {
                out.push((0.0, yv));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Average 1-based rank of each distinct value in a vector that holds the
/// given nonzero values plus `zeros` implicit zeros. Returns the sorted
/// distinct values with their average ranks.
fn average_ranks(nonzero: &[f64], zeros: usize) -> Vec<(f64, f64)> {
    let mut groups: Vec<(f64, usize)> = Vec::new();
    let mut vals: Vec<f64> = nonzero.to_vec();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for v in vals {
        match groups.last_mut() {
            Some((gv, c)) if *gv == v => *c += 1,
            _ => groups.push((v, 1)),
        }
    }
    if zeros > 0 {
        let pos = groups
            .binary_search_by(|(v, _)| v.partial_cmp(&0.0).unwrap())
            .map(|i| {
                groups[i].1 += zeros;
                None
            })
            .unwrap_or_else(|i| Some(i));
        if let Some(i) = pos {
            groups.insert(i, (0.0, zeros));
        }
    }
    let mut out = Vec::with_capacity(groups.len());
    let mut below = 0usize;
    for (v, c) in groups {
        out.push((v, below as f64 + (c as f64 + 1.0) / 2.0));
        below += c;
    }
    out
}

fn rank_of(ranks: &[(f64, f64)], v: f64) -> f64 {
    ranks
        .iter()
        .find(|(g, _)| *g == v)
        .map(|(_, r)| *r)
        .expect("value present in rank table")
}

/// Pearson correlation of two conceptually dense vectors given their shared
/// support `pairs`, the count `rest` of coordinates equal to `(x0, y0)`
/// outside it, and the total length `n`.
fn pearson_with_rest(pairs: &[(f64, f64)], rest: f64, x0: f64, y0: f64, n: f64) -> f64 {
    if n <= 1.0 {
        return 0.0;
    }
    let sx: f64 = pairs.iter().map(|p| p.0).sum::<f64>() + rest * x0;
    let sy: f64 = pairs.iter().map(|p| p.1).sum::<f64>() + rest * y0;
    let mx = sx / n;
    let my = sy / n;
    let mut cov = rest * (x0 - mx) * (y0 - my);
    let mut vx = rest * (x0 - mx) * (x0 - mx);
    let mut vy = rest * (y0 - my) * (y0 - my);
    for &(a, b) in pairs {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx <= 0.0 || vy <= 0.0 {
        return 0.0; // constant vector
    }
    cov / (vx * vy).sqrt()
}

fn kendall_tau_b(pairs: &[(f64, f64)], zeros: usize, n: usize) -> f64 {
    if n < 2 {
        return 0.0;
    }
    let z = zeros as i128;
    let mut concordant: i128 = 0;
    let mut discordant: i128 = 0;
    // union entry vs the (0,0) block
    for &(x, y) in pairs {
        let s = x * y; // sign of (x-0)(y-0)
        if s > 0.0 {
            concordant += z;
        } else if s < 0.0 {
            discordant += z;
        }
    }
    // union entry vs union entry
    for i in 0..pairs.len() {
        for j in (i + 1)..pairs.len() {
            let dx = pairs[i].0 - pairs[j].0;
            let dy = pairs[i].1 - pairs[j].1;
            let s = dx * dy;
            if s > 0.0 {
                concordant += 1;
            } else if s < 0.0 {
                discordant += 1;
            }
        }
    }
    let tie_pairs = |values: Vec<f64>, zeros: usize| -> i128 {
        let groups = average_ranks(&values, zeros);
        let mut total: i128 = 0;
        let mut counted: usize = 0;
        for (v, _) in &groups {
            let c = values.iter().filter(|&&x| x == *v).count()
                + if *v == 0.0 { zeros } else { 0 };
            counted += c;
            let c = c as i128;
            total += c * (c - 1) / 2;
        }
        debug_assert_eq!(counted, values.len() + zeros);
        total
    };
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let n1 = tie_pairs(xs, zeros);
    let n2 = tie_pairs(ys, zeros);
    let n0 = (n as i128) * (n as i128 - 1) / 2;
    let dx = (n0 - n1) as f64;
    let dy = (n0 - n2) as f64;
    if dx <= 0.0 || dy <= 0.0 {
        return 0.0; // constant vector
    }
    (concordant - discordant) as f64 / (dx * dy).sqrt()
}

/// The nine kernel features, in order: cosine, manhattan, euclidean,
/// Pearson, Spearman, Kendall tau-b, sigmoid, RBF, laplacian. The kernel
/// bandwidth is `1 / dimension`; correlations of a constant vector are
/// defined as 0.
pub fn kernel_features(x: &SparseVec, y: &SparseVec) -> [f64; KERNEL_FEATURE_COUNT] {
    assert_eq!(x.dim, y.dim, "kernel features need a shared indexing space");
    let n = x.dim;
    let pairs = union_entries(x, y);
    let zeros = n - pairs.len();

    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    let mut manhattan = 0.0;
    let mut sq = 0.0;
    for &(a, b) in &pairs {
        dot += a * b;
        nx += a * a;
        ny += b * b;
        manhattan += (a - b).abs();
        sq += (a - b) * (a - b);
    }
    let cosine = if nx > 0.0 && ny > 0.0 {
        dot / (nx.sqrt() * ny.sqrt())
    } else {
        0.0
    };
    let euclidean = sq.sqrt();

    let pearson = pearson_with_rest(&pairs, zeros as f64, 0.0, 0.0, n as f64);

    // Spearman: Pearson over average ranks.
    let spearman = {
        let zx = zeros + pairs.iter().filter(|p| p.0 == 0.0).count();
        let zy = zeros + pairs.iter().filter(|p| p.1 == 0.0).count();
        let xr = average_ranks(
            &pairs.iter().map(|p| p.0).filter(|&v| v != 0.0).collect::<Vec<_>>(),
            zx,
        );
        let yr = average_ranks(
            &pairs.iter().map(|p| p.1).filter(|&v| v != 0.0).collect::<Vec<_>>(),
            zy,
        );
        let rank_pairs: Vec<(f64, f64)> = pairs
            .iter()
            .map(|&(a, b)| (rank_of(&xr, a), rank_of(&yr, b)))
            .collect();
        let r0x = rank_of(&xr, 0.0);
        let r0y = rank_of(&yr, 0.0);
        pearson_with_rest(&rank_pairs, zeros as f64, r0x, r0y, n as f64)
    };

    let kendall = kendall_tau_b(&pairs, zeros, n);

    let gamma = 1.0 / (n.max(1) as f64);
    let sigmoid = (gamma * dot).tanh();
    let rbf = (-gamma * sq).exp();
    let laplacian = (-gamma * manhattan).exp();

    [
        cosine, manhattan, euclidean, pearson, spearman, kendall, sigmoid, rbf, laplacian,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(dim: usize, entries: &[(u32, f64)]) -> SparseVec {
        SparseVec {
            dim,
            entries: entries.to_vec(),
        }
    }

    // Dense reference implementations, straight from the definitions.
    mod oracle {
        pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
            let n = x.len() as f64;
            let mx = x.iter().sum::<f64>() / n;
            let my = y.iter().sum::<f64>() / n;
            let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
            let vx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
            let vy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
            if vx <= 0.0 || vy <= 0.0 {
                0.0
            } else {
                cov / (vx * vy).sqrt()
            }
        }

        pub fn ranks(x: &[f64]) -> Vec<f64> {
            let n = x.len();
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
            let mut out = vec![0.0; n];
            let mut i = 0;
            while i < n {
                let mut j = i;
                while j < n && x[idx[j]] == x[idx[i]] {
                    j += 1;
                }
                let avg = (i + 1..=j).map(|r| r as f64).sum::<f64>() / (j - i) as f64;
                for &k in &idx[i..j] {
                    out[k] = avg;
                }
                i = j;
            }
            out
        }

        pub fn kendall(x: &[f64], y: &[f64]) -> f64 {
            let n = x.len();
            let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = x[i] - x[j];
                    let dy = y[i] - y[j];
                    if dx == 0.0 {
                        tx += 1;
                    }
                    if dy == 0.0 {
                        ty += 1;
                    }
                    let s = dx * dy;
                    if s > 0.0 {
                        c += 1;
                    } else if s < 0.0 {
                        d += 1;
                    }
                }
            }
            let n0 = (n * (n - 1) / 2) as f64;
            let den = ((n0 - tx as f64) * (n0 - ty as f64)).sqrt();
            if den <= 0.0 {
                0.0
            } else {
                (c - d) as f64 / den
            }
        }
    }

    fn all_dense(x: &[f64], y: &[f64]) -> [f64; 9] {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let nx: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
        let man: f64 = x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum();
        let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let gamma = 1.0 / x.len() as f64;
        [
            if nx > 0.0 && ny > 0.0 { dot / (nx * ny) } else { 0.0 },
            man,
            sq.sqrt(),
            oracle::pearson(x, y),
            oracle::pearson(&oracle::ranks(x), &oracle::ranks(y)),
            oracle::kendall(x, y),
            (gamma * dot).tanh(),
            (-gamma * sq).exp(),
            (-gamma * man).exp(),
        ]
    }

    #[test]
    fn identical_vectors() {
        let x = sv(6, &[(1, 0.5), (4, 1.5)]);
        let f = kernel_features(&x, &x);
        assert!((f[0] - 1.0).abs() < 1e-12, "cosine");
        assert_eq!(f[1], 0.0, "manhattan");
        assert_eq!(f[2], 0.0, "euclidean");
        assert!((f[3] - 1.0).abs() < 1e-12, "pearson");
        assert!((f[4] - 1.0).abs() < 1e-12, "spearman");
        assert!((f[5] - 1.0).abs() < 1e-12, "kendall");
        assert!((f[7] - 1.0).abs() < 1e-12, "rbf");
        assert!((f[8] - 1.0).abs() < 1e-12, "laplacian");
    }

    #[test]
    fn orthogonal_vectors_have_zero_cosine() {
        let x = sv(5, &[(0, 2.0)]);
        let y = sv(5, &[(3, 1.0)]);
        assert_eq!(kernel_features(&x, &y)[0], 0.0);
    }

    #[test]
    fn constant_vector_correlations_are_zero() {
        let x = sv(4, &[]);
        let y = sv(4, &[(0, 1.0), (2, 2.0)]);
        let f = kernel_features(&x, &y);
        assert_eq!(f[3], 0.0);
        assert_eq!(f[4], 0.0);
        assert_eq!(f[5], 0.0);
    }

    #[test]
    fn four_dim_pair_matches_dense_oracle() {
        let x = sv(4, &[(0, 1.0), (2, 3.0)]);
        let y = sv(4, &[(0, 2.0), (1, -1.0)]);
        let got = kernel_features(&x, &y);
        let want = all_dense(&x.dense(), &y.dense());
        for (i, (g, w)) in got.iter().zip(&want).enumerate() {
            assert!((g - w).abs() < 1e-12, "feature {i}: {g} vs {w}");
        }
    }

    #[test]
    fn larger_sparse_pairs_match_dense_oracle() {
        let cases = [
            (
                sv(12, &[(0, 0.7), (3, 2.0), (7, 0.7), (11, -1.0)]),
                sv(12, &[(1, 1.0), (3, 2.0), (7, -0.5)]),
            ),
            (sv(9, &[(8, 1.0)]), sv(9, &[(0, 1.0)])),
            (
                sv(30, &[(2, 3.5), (5, 1.0)]),
                sv(30, &[(5, 1.0), (6, 4.0), (29, 2.0)]),
            ),
        ];
        for (x, y) in &cases {
            let got = kernel_features(x, y);
            let want = all_dense(&x.dense(), &y.dense());
            for (i, (g, w)) in got.iter().zip(&want).enumerate() {
                assert!((g - w).abs() < 1e-10, "feature {i}: {g} vs {w}");
            }
            // symmetry
            let swapped = kernel_features(y, x);
            for (a, b) in got.iter().zip(&swapped) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

}
