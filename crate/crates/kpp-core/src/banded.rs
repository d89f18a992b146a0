//! Banded linear algebra: storage, mat-vec, and LU with partial pivoting.
//!
//! Row pivoting on a band matrix with `kl` subdiagonals and `ku`
//! superdiagonals produces fill in `kl` extra superdiagonals, so the
//! factorization workspace holds `2*kl + ku + 1` diagonals (the classical
//! LAPACK `gbtrf` layout). All loops are written out explicitly; the
//! bandwidths here are tiny (`kl = ku = m <= 5`) and the matrices long, so
//! the factorization is O(n * m^2).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BandedError {
    #[error("matrix is numerically singular at column {col}")]
    Singular { col: usize },
    #[error("dimension mismatch: matrix is {n}x{n}, vector has {len}")]
    Dimension { n: usize, len: usize },
}

/// Square band matrix. Entry (r, c) is stored iff `c - ku <= r <= c + kl`.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    // column-major, `kl+ku+1` rows per column; (r, c) at ab[c*(kl+ku+1) + ku + r - c]
    ab: Vec<f64>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        assert!(n > 0 && kl < n && ku < n);
        Banded {
            n,
            kl,
            ku,
            ab: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kl(&self) -> usize {
        self.kl
    }

    pub fn ku(&self) -> usize {
        self.ku
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(self.in_band(r, c), "entry ({r},{c}) outside band");
        c * (self.kl + self.ku + 1) + self.ku + r - c
    }

    #[inline]
    pub fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && c + self.kl >= r && r + self.ku >= c
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        let i = self.idx(r, c);
        self.ab[i] = v;
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        let i = self.idx(r, c);
        self.ab[i] += v;
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.ab[self.idx(r, c)]
        } else {
            0.0
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let c0 = r.saturating_sub(self.kl);
            let c1 = (r + self.ku).min(self.n - 1);
            let mut acc = 0.0;
            for c in c0..=c1 {
                acc += self.ab[self.idx(r, c)] * x[c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let c0 = r.saturating_sub(self.kl);
            let c1 = (r + self.ku).min(self.n - 1);
            for c in c0..=c1 {
                y[c] += self.ab[self.idx(r, c)] * x[r];
            }
        }
        y
    }

    /// LU factorization with partial pivoting (`gbtrf` layout).
    pub fn factor(&self) -> Result<BandedLu, BandedError> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let kv = kl + ku; // superdiagonals in the workspace
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; n * ldab];
        // load A at offset kl below the workspace top: (r, c) -> ab[c*ldab + kv + r - c]
        for c in 0..n {
            let r0 = c.saturating_sub(ku);
            let r1 = (c + kl).min(n - 1);
            for r in r0..=r1 {
                ab[c * ldab + kv + r - c] = self.ab[self.idx(r, c)];
            }
        }
        let at = |r: usize, c: usize| c * ldab + kv + r - c;
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j); // active subdiagonal rows
            let mut jp = j;
            let mut best = ab[at(j, j)].abs();
            for i in 1..=km {
                let v = ab[at(j + i, j)].abs();
                if v > best {
                    best = v;
                    jp = j + i;
                }
            }
            ipiv[j] = jp;
            if ab[at(jp, j)] == 0.0 {
                return Err(BandedError::Singular { col: j });
            }
            // widest possible fill extent; unused slots hold zeros, so the
            // extra swap/update columns are numerical no-ops
            let ju = (j + kv).min(n - 1);
            if jp != j {
                for c in j..=ju {
                    ab.swap(at(j, c), at(jp, c));
                }
            }
            if km > 0 {
                let piv = ab[at(j, j)];
                for i in 1..=km {
                    ab[at(j + i, j)] /= piv;
                }
                for c in (j + 1)..=ju {
                    let ujc = ab[at(j, c)];
                    if ujc != 0.0 {
                        for i in 1..=km {
                            ab[at(j + i, c)] -= ab[at(j + i, j)] * ujc;
                        }
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            kv,
            ldab,
            ab,
            ipiv,
        })
    }

    /// Factor and solve a single right-hand side.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>, BandedError> {
        if rhs.len() != self.n {
            return Err(BandedError::Dimension {
                n: self.n,
                len: rhs.len(),
            });
        }
        let lu = self.factor()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        Ok(x)
    }
}

/// Factored form; solves share the factorization (used by the IMEX stepper
/// which reuses one matrix for many steps).
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let at = |r: usize, c: usize| c * self.ldab + self.kv + r - c;
        // forward: apply P and L
        for j in 0..self.n {
            let jp = self.ipiv[j];
            if jp != j {
                b.swap(j, jp);
            }
            let km = self.kl.min(self.n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for i in 1..=km {
                    b[j + i] -= self.ab[at(j + i, j)] * bj;
                }
            }
        }
        // backward: U x = y
        for j in (0..self.n).rev() {
            b[j] /= self.ab[at(j, j)];
            let bj = b[j];
            if bj != 0.0 {
                let r0 = j.saturating_sub(self.kv);
                for r in r0..j {
                    b[r] -= self.ab[at(r, j)] * bj;
                }
            }
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // small deterministic generator; avoids pulling a dependency for tests
    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
    }

    fn dense_solve(a: &mut Vec<Vec<f64>>, b: &mut [f64]) {
        let n = b.len();
        for j in 0..n {
            let mut p = j;
            for r in j + 1..n {
                if a[r][j].abs() > a[p][j].abs() {
                    p = r;
                }
            }
            a.swap(j, p);
            b.swap(j, p);
            for r in j + 1..n {
                let f = a[r][j] / a[j][j];
                for c in j..n {
                    a[r][c] -= f * a[j][c];
                }
                b[r] -= f * b[j];
            }
        }
        for j in (0..n).rev() {
            for c in j + 1..n {
                b[j] -= a[j][c] * b[c];
            }
            b[j] /= a[j][j];
        }
    }

    #[test]
    fn matches_dense_elimination() {
        let mut seed = 42u64;
        for &(n, kl, ku) in &[(12usize, 2usize, 2usize), (25, 3, 1), (40, 4, 4), (9, 1, 3)] {
            let mut bm = Banded::zeros(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for r in 0..n {
                for c in 0..n {
                    if bm.in_band(r, c) {
                        let v = lcg(&mut seed) + if r == c { 3.0 } else { 0.0 };
                        bm.set(r, c, v);
                        dense[r][c] = v;
                    }
                }
            }
            let rhs: Vec<f64> = (0..n).map(|_| lcg(&mut seed)).collect();
            let x = bm.solve(&rhs).unwrap();
            let mut xd = rhs.clone();
            dense_solve(&mut dense.clone(), &mut xd);
            for (a, b) in x.iter().zip(&xd) {
                assert!((a - b).abs() < 1e-10, "{a} vs {b}");
            }
            // residual check through matvec
            let ax = bm.matvec(&x);
            for (ai, bi) in ax.iter().zip(&rhs) {
                assert!((ai - bi).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        // [[0, 1], [1, 0]] needs the row swap
        let mut bm = Banded::zeros(2, 1, 1);
        bm.set(0, 1, 1.0);
        bm.set(1, 0, 1.0);
        let x = bm.solve(&[2.0, 3.0]).unwrap();
        assert!((x[0] - 3.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn singular_reported() {
        let mut bm = Banded::zeros(3, 1, 1);
        bm.set(0, 0, 1.0);
        bm.set(1, 1, 1.0);
        // row 2 left zero
        assert_eq!(
            bm.solve(&[1.0, 1.0, 1.0]).unwrap_err(),
            BandedError::Singular { col: 2 }
        );
    }

    #[test]
    fn reused_factorization_solves_multiple_rhs() {
        let mut bm = Banded::zeros(6, 2, 2);
        let mut seed = 7u64;
        for r in 0..6 {
            for c in 0..6 {
                if bm.in_band(r, c) {
                    bm.set(r, c, lcg(&mut seed) + if r == c { 4.0 } else { 0.0 });
                }
            }
        }
        let lu = bm.factor().unwrap();
        for k in 0..3 {
            let rhs: Vec<f64> = (0..6).map(|i| (i + k) as f64).collect();
            let x = lu.solve(&rhs);
            let ax = bm.matvec(&x);
            for (ai, bi) in ax.iter().zip(&rhs) {
                assert!((ai - bi).abs() < 1e-11);
            }
        }
    }
}
