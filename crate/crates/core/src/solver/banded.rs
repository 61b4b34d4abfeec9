//! Band LU factorization with partial pivoting behind a reverse Cuthill-McKee
//! reordering. The scheme operator is assembled once per run, so one
//! factorization serves every step as an exact GMRES preconditioner.

use std::collections::VecDeque;

use super::sparse::SparseOperator;
use crate::error::{Error, Result};

/// Reverse Cuthill-McKee ordering of the symmetrized sparsity graph.
///
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &SparseOperator) -> Vec<usize> {
    let n = a.dim();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in a.row(i).0 {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }

    let bfs_last = |start: usize, visited: &[bool]| -> (usize, usize) {
        // (farthest node, eccentricity) within the component of `start`
        let mut depth = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        depth[start] = 0;
        let mut last = start;
        while let Some(u) = q.pop_front() {
            last = u;
            for &v in &adj[u] {
                if depth[v] == usize::MAX && !visited[v] {
                    depth[v] = depth[u] + 1;
                    q.push_back(v);
                }
            }
        }
        (last, depth[last])
    };

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start node
        let mut start = seed;
        let (mut far, mut ecc) = bfs_last(start, &visited);
        for _ in 0..4 {
            let (far2, ecc2) = bfs_last(far, &visited);
            if ecc2 <= ecc {
                break;
            }
            start = far;
            far = far2;
            ecc = ecc2;
        }

        let mut q = VecDeque::from([start]);
        visited[start] = true;
        while let Some(u) = q.pop_front() {
            order.push(u);
            let mut next: Vec<usize> = adj[u].iter().copied().filter(|&v| !visited[v]).collect();
            next.sort_by_key(|&v| adj[v].len());
            for v in next {
                visited[v] = true;
                q.push_back(v);
            }
        }
    }
    order.reverse();
    order
}

/// `P A P^T = L U` in band storage.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band: row `i` holds columns `i - kl ..= i + kl + ku`.
    band: Vec<f64>,
    pivots: Vec<usize>,
    /// `perm[new] = old`
    perm: Vec<usize>,
    inv_perm: Vec<usize>,
}

impl BandedLu {
    pub fn factor(a: &SparseOperator) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm)
    }

    pub fn factor_with_ordering(a: &SparseOperator, perm: Vec<usize>) -> Result<Self> {
        let n = a.dim();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
        }
        let mut inv_perm = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv_perm[old] = new;
        }
        let (mut kl, mut ku) = (0usize, 0usize);
        for old_i in 0..n {
            let i = inv_perm[old_i];
            for &old_j in a.row(old_i).0 {
                let j = inv_perm[old_j];
                if i > j {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            band: vec![0.0; n * width],
            pivots: vec![0; n],
            perm,
            inv_perm,
        };
        for old_i in 0..n {
            let i = lu.inv_perm[old_i];
            let (cols, vals) = a.row(old_i);
            for (&old_j, &v) in cols.iter().zip(vals) {
                let j = lu.inv_perm[old_j];
                let idx = lu.index(i, j);
                lu.band[idx] += v;
            }
        }
        lu.eliminate()?;
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Lower and upper bandwidth of the reordered matrix.
    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width() + (j + self.kl - i)
    }

    fn eliminate(&mut self) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = self.width();
        let scale = self.band.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.band[self.index(k, k)].abs();
            for r in k + 1..=last_row {
                let v = self.band[self.index(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= scale * 1e-300 {
                return Err(Error::Singular(k));
            }
            self.pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    let (ik, ip) = (self.index(k, c), self.index(p, c));
                    self.band.swap(ik, ip);
                }
            }
            let pivot = self.band[self.index(k, k)];
            let krow = k * w;
            for r in k + 1..=last_row {
                let irk = self.index(r, k);
                let l = self.band[irk] / pivot;
                self.band[irk] = l;
                if l == 0.0 {
                    continue;
                }
                let rrow = r * w;
                // column c lives at krow + c + kl - k and rrow + c + kl - r
                for c in k + 1..=last_col {
                    let src = self.band[krow + c + kl - k];
                    self.band[rrow + c + kl - r] -= l * src;
                }
            }
        }
        Ok(())
    }

    /// Solves `A x = b` for the original (unpermuted) operator.
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let mut y: Vec<f64> = self.perm.iter().map(|&old| b[old]).collect();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                y.swap(k, p);
            }
            let yk = y[k];
            if yk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    y[r] -= self.band[self.index(r, k)] * yk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = y[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= self.band[self.index(k, c)] * y[c];
            }
            y[k] = s / self.band[self.index(k, k)];
        }
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::dense::dense_solve;
    use crate::solver::sparse::{LinearOperator, TripletBuilder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sparse(n: usize, seed: u64) -> SparseOperator {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            // weak diagonal forces pivoting
            b.push(i, i, rng.random_range(-0.1..0.1));
            for _ in 0..3 {
                let j = rng.random_range(0..n);
                b.push(i, j, rng.random_range(-1.0..1.0));
                b.push(j, i, rng.random_range(-1.0..1.0));
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn matches_dense_oracle() {
        for seed in 0..5 {
            let a = random_sparse(40, seed);
            let lu = BandedLu::factor(&a).unwrap();
            let rhs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
            let mut x = vec![0.0; 40];
            lu.solve(&rhs, &mut x);
            let oracle = dense_solve(&a.to_dense(), &rhs).unwrap();
            for (p, q) in x.iter().zip(&oracle) {
                assert!((p - q).abs() <= 1e-9 * (1.0 + q.abs()), "{p} vs {q}");
            }
            let mut ax = vec![0.0; 40];
            a.apply(&x, &mut ax);
            let r = ax.iter().zip(&rhs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(r < 1e-10);
        }
    }

    #[test]
    fn rcm_is_a_permutation_and_shrinks_band() {
        // 2D grid Laplacian numbered column-major with a scrambled labeling
        let n = 12;
        let label = |i: usize, j: usize| ((i * n + j) * 7) % (n * n);
        let mut b = TripletBuilder::new(n * n);
        for i in 0..n {
            for j in 0..n {
                b.push(label(i, j), label(i, j), 4.0);
                if i + 1 < n {
                    b.push(label(i, j), label(i + 1, j), -1.0);
                    b.push(label(i + 1, j), label(i, j), -1.0);
                }
                if j + 1 < n {
                    b.push(label(i, j), label(i, j + 1), -1.0);
                    b.push(label(i, j + 1), label(i, j), -1.0);
                }
            }
        }
        let a = b.build().unwrap();
        let perm = reverse_cuthill_mckee(&a);
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n * n).collect::<Vec<_>>());
        let lu = BandedLu::factor(&a).unwrap();
        let (kl, ku) = lu.bandwidths();
        assert!(kl <= 2 * n && ku <= 2 * n, "bandwidths {kl} {ku}");
    }

    #[test]
    fn singular_detected() {
        let mut b = TripletBuilder::new(3);
        b.push(0, 0, 1.0);
        b.push(1, 1, 1.0);
        b.push(2, 0, 1.0);
        assert!(BandedLu::factor(&b.build().unwrap()).is_err());
    }
}
