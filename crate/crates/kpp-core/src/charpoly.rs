//! Characteristic polynomials of the linearizations about the rest states.
//!
//! Linearizing the traveling-wave equation about f = 0 (ahead of the front)
//! or f = 1 (behind it) and substituting f ~ e^{mu y} gives
//!
//!   P(mu) = (-1)^{m+1} mu^{2m} + lambda mu + sigma,
//!
//! with sigma = +1 about 0 and sigma = -1 about 1 (from f(1-f): the
//! derivative of the reaction term is +1 at f=0 and -1 at f=1). The sign
//! table is frozen here together with this derivation; instances for
//! specific m are generated from it, never hand-copied.
//!
//! The split of the 2m roots into decaying/growing bundles at each end is
//! what makes the connection problem well- or over-determined, so the
//! classification here is side-aware: "stable" always means "decays toward
//! the equilibrium", i.e. Re mu < 0 at the zero side (y -> +inf) but
//! Re mu > 0 at the one side (y -> -inf).

use crate::model::EquilibriumSide;
use num_complex::Complex;
use thiserror::Error;

pub type C64 = Complex<f64>;

#[derive(Debug, Error, PartialEq)]
pub enum CharPolyError {
    #[error("root polishing failed to reach |P| <= {tol} for m={m}, lambda={lambda}")]
    Polish { m: usize, lambda: f64, tol: f64 },
    #[error("small-lambda expansion valid only for |lambda| <= 0.5, got {0}")]
    LambdaTooLarge(f64),
}

/// Monic characteristic polynomial; only mu^{2m}, mu^1, mu^0 are nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    pub m: usize,
    pub lambda: f64,
    pub side: EquilibriumSide,
    /// coeffs[i] multiplies mu^i; length 2m+1, coeffs[2m] = 1.
    pub coeffs: Vec<f64>,
}

impl CharPoly {
    pub fn degree(&self) -> usize {
        2 * self.m
    }

    pub fn eval(&self, mu: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            acc = acc * mu + C64::new(c, 0.0);
        }
        acc
    }

    pub fn eval_deriv(&self, mu: C64) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * mu + C64::new(i as f64 * c, 0.0);
        }
        acc
    }
}

/// All 2m roots of a [`CharPoly`] with multiplicities.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub roots: Vec<(C64, usize)>,
    pub side: EquilibriumSide,
    pub lambda: f64,
    pub m: usize,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|(_, k)| k).sum()
    }

    /// The decaying root closest to the imaginary axis (the one that
    /// dominates the tail of a genuine profile), if any decaying root exists.
    pub fn slowest_stable(&self, margin_tol: f64) -> Option<C64> {
        let want_negative = matches!(self.side, EquilibriumSide::Zero);
        self.roots
            .iter()
            .map(|&(mu, _)| mu)
            .filter(|mu| {
                if want_negative {
                    mu.re < -margin_tol
                } else {
                    mu.re > margin_tol
                }
            })
            .min_by(|a, b| a.re.abs().partial_cmp(&b.re.abs()).unwrap())
    }
}

/// Bundle dimensions under the side-dependent sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BundleDims {
    pub stable: usize,
    pub unstable: usize,
    pub marginal: usize,
}

/// A parameter value where the polynomial acquires a double root.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleRootLocus {
    pub mu: C64,
    pub lambda: f64,
}

fn sigma(side: EquilibriumSide) -> f64 {
    match side {
        EquilibriumSide::Zero => 1.0,
        EquilibriumSide::One => -1.0,
    }
}

/// `(-1)^{m+1}` as a float.
fn op_sign(m: usize) -> f64 {
    if m % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Build `P(mu) = (-1)^{m+1} mu^{2m} + lambda mu + sigma`, normalized monic
/// (multiply through by `(-1)^{m+1}`).
pub fn build_charpoly(m: usize, lambda: f64, side: EquilibriumSide) -> CharPoly {
    assert!(m >= 1, "order parameter m must be >= 1");
    let s = op_sign(m);
    let mut coeffs = vec![0.0; 2 * m + 1];
    coeffs[2 * m] = 1.0;
    coeffs[1] = s * lambda;
    coeffs[0] = s * sigma(side);
    CharPoly {
        m,
        lambda,
        side,
        coeffs,
    }
}

/// Durand-Kerner simultaneous iteration followed by Newton polishing.
///
/// Polished roots closer than `10 * tol^{1/2}` are merged into one root of
/// higher multiplicity (both iterations stall at ~sqrt(eps) distance on a
/// double root, so the merge radius must sit above that stall, not above
/// tol). The start configuration is the usual deterministic spiral scaled
/// to the Cauchy bound; its angles are incommensurate with the root
/// symmetries of `mu^{2m} = const`, which keeps the iteration off the
/// symmetric fixed-point traps.
pub fn find_roots(p: &CharPoly, tol: f64) -> Result<RootSet, CharPolyError> {
    let n = p.degree();
    let bound = 1.0 + p.coeffs[..n].iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let spiral = C64::new(0.4, 0.9);
    let mut z = Vec::with_capacity(n);
    let mut w = C64::new(bound, 0.0);
    for _ in 0..n {
        w *= spiral;
        z.push(w);
    }
    for _ in 0..200 {
        let mut delta = 0.0f64;
        for k in 0..n {
            let mut q = C64::new(1.0, 0.0);
            for j in 0..n {
                if j != k {
                    q *= z[k] - z[j];
                }
            }
            if q.norm() < 1e-290 {
                // collided approximants: split them apart deterministically
                let scale = 1.0 + z[k].norm();
                z[k] += C64::new(1e-6, 1e-6) * scale;
                delta = f64::INFINITY;
                continue;
            }
            let step = p.eval(z[k]) / q;
            z[k] -= step;
            delta = delta.max(step.norm());
        }
        if delta <= 1e-15 * bound {
            break;
        }
    }

    let mut polished = Vec::with_capacity(n);
    for &e in z.iter() {
        let mut mu = e;
        for _ in 0..50 {
            let f = p.eval(mu);
            if f.norm() <= tol {
                break;
            }
            let d = p.eval_deriv(mu);
            if d.norm() < 1e-14 {
                break; // multiple root: keep the simultaneous-iteration value
            }
            let step = f / d;
            mu -= step;
            if step.norm() <= 1e-16 * (1.0 + mu.norm()) {
                break;
            }
        }
        if p.eval(mu).norm() > tol.max(1e-10) {
            return Err(CharPolyError::Polish {
                m: p.m,
                lambda: p.lambda,
                tol,
            });
        }
        polished.push(mu);
    }

    // kill spurious imaginary dust on real roots, then merge clusters
    let thr = 10.0 * tol.sqrt();
    for mu in polished.iter_mut() {
        if mu.im.abs() <= thr {
            mu.im = 0.0;
        }
    }
    let mut roots: Vec<(C64, usize)> = Vec::new();
    for mu in polished {
        match roots.iter_mut().find(|(r, _)| (*r - mu).norm() <= thr) {
            Some((r, k)) => {
                // running mean keeps the representative centered
                *r = (*r * (*k as f64) + mu) / (*k as f64 + 1.0);
                *k += 1;
            }
            None => roots.push((mu, 1)),
        }
    }
    roots.sort_by(|a, b| {
        (a.0.re, a.0.im)
            .partial_cmp(&(b.0.re, b.0.im))
            .unwrap()
    });
    Ok(RootSet {
        roots,
        side: p.side,
        lambda: p.lambda,
        m: p.m,
    })
}

/// Count roots by the side-dependent convention: at side=zero decay means
/// Re mu < 0, at side=one it means Re mu > 0. Roots with |Re mu| <=
/// margin_tol are counted as marginal rather than misclassified.
pub fn classify_bundles(r: &RootSet, margin_tol: f64) -> BundleDims {
    let mut stable = 0;
    let mut unstable = 0;
    let mut marginal = 0;
    let flip = match r.side {
        EquilibriumSide::Zero => 1.0,
        EquilibriumSide::One => -1.0,
    };
    for &(mu, k) in &r.roots {
        let x = flip * mu.re;
        if x.abs() <= margin_tol {
            marginal += k;
        } else if x < 0.0 {
            stable += k;
        } else {
            unstable += k;
        }
    }
    BundleDims {
        stable,
        unstable,
        marginal,
    }
}

/// All real-lambda double roots, by analytic elimination.
///
/// P' = 0 gives lambda = (-1)^m 2m mu^{2m-1}; substituting into P = 0 leaves
/// the monomial equation mu^{2m} = (-1)^{m+1} sigma / (2m-1). Real solutions
/// exist iff the right side is positive: side=zero needs m odd, side=one
/// needs m even. Then mu = +-(2m-1)^{-1/(2m)} and each mu carries its own
/// lambda. Sorted by descending lambda.
pub fn double_root_loci(m: usize, side: EquilibriumSide) -> Vec<DoubleRootLocus> {
    assert!(m >= 1);
    let rhs = op_sign(m) * sigma(side);
    if rhs <= 0.0 {
        return Vec::new();
    }
    let deg = 2 * m as i32;
    let mag = (2.0 * m as f64 - 1.0).powf(-1.0 / deg as f64);
    let mut out: Vec<DoubleRootLocus> = [mag, -mag]
        .iter()
        .map(|&mu| DoubleRootLocus {
            mu: C64::new(mu, 0.0),
            lambda: -op_sign(m) * 2.0 * m as f64 * mu.powi(deg - 1),
        })
        .collect();
    out.sort_by(|a, b| b.lambda.partial_cmp(&a.lambda).unwrap());
    out
}

/// Small-lambda closed forms for the four roots of the m=2, zero-side
/// polynomial mu^4 - lambda mu - 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallLambdaRoots {
    pub mu1: f64,
    pub mu2: f64,
    pub mu_plus: C64,
    pub mu_minus: C64,
}

/// mu1 ~ -1 + lambda/(4+lambda), mu2 ~ 1 + lambda/(4-lambda), and the
/// complex pair Re mu_+- ~ -4 lambda/(lambda^2+16),
/// Im mu_+- ~ +-(1 - lambda^2/(lambda^2+16)). Errors are O(lambda^2).
pub fn asymptotic_roots_small_lambda(lambda: f64) -> Result<SmallLambdaRoots, CharPolyError> {
    if !(lambda.abs() <= 0.5) {
        return Err(CharPolyError::LambdaTooLarge(lambda));
    }
    let re = -4.0 * lambda / (lambda * lambda + 16.0);
    let im = 1.0 - lambda * lambda / (lambda * lambda + 16.0);
    Ok(SmallLambdaRoots {
        mu1: -1.0 + lambda / (4.0 + lambda),
        mu2: 1.0 + lambda / (4.0 - lambda),
        mu_plus: C64::new(re, im),
        mu_minus: C64::new(re, -im),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    fn has_root(rs: &RootSet, re: f64, im: f64, mult: usize) -> bool {
        rs.roots
            .iter()
            .any(|&(mu, k)| (mu - C64::new(re, im)).norm() < 1e-8 && k == mult)
    }

    #[test]
    fn frozen_instances() {
        let p = build_charpoly(2, 1.5, EquilibriumSide::Zero);
        assert_eq!(p.coeffs, vec![-1.0, -1.5, 0.0, 0.0, 1.0]); // mu^4 - 1.5 mu - 1
        let p = build_charpoly(2, 1.5, EquilibriumSide::One);
        assert_eq!(p.coeffs, vec![1.0, -1.5, 0.0, 0.0, 1.0]); // mu^4 - 1.5 mu + 1
        let p = build_charpoly(3, 0.7, EquilibriumSide::Zero);
        assert_eq!(p.coeffs, vec![1.0, 0.7, 0.0, 0.0, 0.0, 0.0, 1.0]); // mu^6 + 0.7 mu + 1
        let p = build_charpoly(3, 0.7, EquilibriumSide::One);
        assert_eq!(p.coeffs, vec![-1.0, 0.7, 0.0, 0.0, 0.0, 0.0, 1.0]); // mu^6 + 0.7 mu - 1
        let p = build_charpoly(1, 2.0, EquilibriumSide::Zero);
        assert_eq!(p.coeffs, vec![1.0, 2.0, 1.0]); // (mu + 1)^2
    }

    #[test]
    fn quartic_roots_at_lambda_zero() {
        let rs = find_roots(&build_charpoly(2, 0.0, EquilibriumSide::Zero), TOL).unwrap();
        assert!(has_root(&rs, 1.0, 0.0, 1));
        assert!(has_root(&rs, -1.0, 0.0, 1));
        assert!(has_root(&rs, 0.0, 1.0, 1));
        assert!(has_root(&rs, 0.0, -1.0, 1));

        let rs = find_roots(&build_charpoly(2, 0.0, EquilibriumSide::One), TOL).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for (re, im) in [(s, s), (s, -s), (-s, s), (-s, -s)] {
            assert!(has_root(&rs, re, im, 1));
        }
    }

    #[test]
    fn double_root_detected_and_merged() {
        let rs = find_roots(&build_charpoly(1, 2.0, EquilibriumSide::Zero), TOL).unwrap();
        assert_eq!(rs.roots.len(), 1);
        assert!(has_root(&rs, -1.0, 0.0, 2));
        assert_eq!(rs.total_multiplicity(), 2);
    }

    #[test]
    fn bundle_counts_quartic() {
        let margin = 1e-9;
        let rs = find_roots(&build_charpoly(2, 0.1, EquilibriumSide::Zero), TOL).unwrap();
        let b = classify_bundles(&rs, margin);
        assert_eq!((b.stable, b.unstable, b.marginal), (3, 1, 0));

        let rs = find_roots(&build_charpoly(2, -0.1, EquilibriumSide::Zero), TOL).unwrap();
        let b = classify_bundles(&rs, margin);
        assert_eq!((b.stable, b.unstable, b.marginal), (1, 3, 0));

        let rs = find_roots(&build_charpoly(2, 0.1, EquilibriumSide::One), TOL).unwrap();
        let b = classify_bundles(&rs, margin);
        assert_eq!((b.stable, b.unstable, b.marginal), (2, 2, 0));

        // lambda = 0 at the zero side: the complex pair sits on the axis
        let rs = find_roots(&build_charpoly(2, 0.0, EquilibriumSide::Zero), TOL).unwrap();
        let b = classify_bundles(&rs, margin);
        assert_eq!((b.stable, b.unstable, b.marginal), (1, 1, 2));
    }

    #[test]
    fn double_root_loci_closed_forms() {
        // existence pattern: zero side for odd m, one side for even m
        assert!(double_root_loci(2, EquilibriumSide::Zero).is_empty());
        assert!(double_root_loci(3, EquilibriumSide::One).is_empty());
        assert!(double_root_loci(1, EquilibriumSide::One).is_empty());

        let l = double_root_loci(1, EquilibriumSide::Zero);
        assert_eq!(l.len(), 2);
        assert_relative_eq!(l[0].lambda, 2.0, max_relative = 1e-14);
        assert_relative_eq!(l[0].mu.re, -1.0, max_relative = 1e-14);

        let l = double_root_loci(2, EquilibriumSide::One);
        assert_relative_eq!(l[0].mu.re, 3f64.powf(-0.25), max_relative = 1e-14);
        assert_relative_eq!(l[0].lambda, 4.0 * 3f64.powf(-0.75), max_relative = 1e-14);
        assert_relative_eq!(l[0].mu.re, 0.759_835_685_651_593, max_relative = 1e-12);
        assert_relative_eq!(l[0].lambda, 1.754_765_350_603_323, max_relative = 1e-12);

        let l = double_root_loci(3, EquilibriumSide::Zero);
        assert_relative_eq!(l[0].mu.re, -(5f64.powf(-1.0 / 6.0)), max_relative = 1e-14);
        assert_relative_eq!(l[0].lambda, 1.569_192_583_214_196_7, max_relative = 1e-12);

        // every returned pair kills P and P'
        for m in 1..=5 {
            for side in [EquilibriumSide::Zero, EquilibriumSide::One] {
                for loc in double_root_loci(m, side) {
                    let p = build_charpoly(m, loc.lambda, side);
                    assert!(p.eval(loc.mu).norm() <= 1e-10, "m={m} {side:?}");
                    assert!(p.eval_deriv(loc.mu).norm() <= 1e-10, "m={m} {side:?}");
                }
            }
        }
    }

    #[test]
    fn small_lambda_expansion_accuracy() {
        let a = asymptotic_roots_small_lambda(0.0).unwrap();
        assert_eq!((a.mu1, a.mu2), (-1.0, 1.0));
        assert_eq!(a.mu_plus, C64::new(0.0, 1.0));

        let lam = 0.1;
        let a = asymptotic_roots_small_lambda(lam).unwrap();
        assert_relative_eq!(a.mu1, -0.975_609_76, max_relative = 1e-6);
        let rs = find_roots(&build_charpoly(2, lam, EquilibriumSide::Zero), TOL).unwrap();
        let exact_mu1 = rs
            .roots
            .iter()
            .map(|r| r.0)
            .filter(|mu| mu.im == 0.0 && mu.re < 0.0)
            .next()
            .unwrap();
        let exact_pair = rs
            .roots
            .iter()
            .map(|r| r.0)
            .find(|mu| mu.im > 0.5)
            .unwrap();
        assert!((a.mu1 - exact_mu1.re).abs() <= 0.01);
        assert!((a.mu_plus.re - exact_pair.re).abs() <= 0.01);
        assert!((a.mu_plus.im - exact_pair.im).abs() <= 0.01);
        assert_relative_eq!(a.mu_plus.re, -0.024_984, max_relative = 1e-3);

        assert!(asymptotic_roots_small_lambda(0.6).is_err());
    }

    proptest! {
        // Vieta: no mu^{2m-1} term so the roots sum to zero; the product
        // equals the constant coefficient (monic, even degree). Conjugate
        // closure comes free with real coefficients.
        #[test]
        fn vieta_and_conjugacy(m in 1usize..=5, lam in -3.0f64..3.0, one_side in any::<bool>()) {
            let side = if one_side { EquilibriumSide::One } else { EquilibriumSide::Zero };
            let p = build_charpoly(m, lam, side);
            let rs = find_roots(&p, 1e-12).unwrap();
            prop_assert_eq!(rs.total_multiplicity(), 2 * m);

            let mut sum = C64::new(0.0, 0.0);
            let mut prod = C64::new(1.0, 0.0);
            for &(mu, k) in &rs.roots {
                for _ in 0..k {
                    sum += mu;
                    prod *= mu;
                }
                prop_assert!(p.eval(mu).norm() <= 1e-8);
                if mu.im.abs() > 1e-8 {
                    let conj_ok = rs.roots.iter().any(|&(nu, kk)| (nu - mu.conj()).norm() < 1e-7 && kk == k);
                    prop_assert!(conj_ok, "missing conjugate of {mu}");
                }
            }
            // sum of roots = -(coefficient of mu^{2m-1}); nonzero only at m=1
            let expected_sum = -p.coeffs[2 * m - 1];
            prop_assert!((sum - C64::new(expected_sum, 0.0)).norm() <= 1e-7, "root sum {sum}");
            prop_assert!((prod - C64::new(p.coeffs[0], 0.0)).norm() <= 1e-7, "root product {prod} vs {}", p.coeffs[0]);

            let b = classify_bundles(&rs, 1e-9);
            prop_assert_eq!(b.stable + b.unstable + b.marginal, 2 * m);
        }
    }
}
