//! Finite-difference weights.
//!
//! Interior discretizations use the classical centered stencils: the 2m-th
//! derivative on 2m+1 points (signed binomial weights) and the first
//! derivative on 3 points, both second-order accurate. Boundary rows and
//! one-off stencils come from the Fornberg recurrence, which yields the
//! weights of derivatives 0..=order at an arbitrary point from arbitrary
//! nodes.

/// Fornberg weights: `w[k][j]` multiplies the sample at `nodes[j]` in the
/// approximation of the k-th derivative at `z`. Exact for polynomials of
/// degree `< nodes.len()`.
pub fn fd_weights(z: f64, nodes: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    assert!(n > order, "need at least order+1 nodes");
    let mut c = vec![vec![0.0; n]; order + 1];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Centered weights for the 2m-th derivative on the 2m+1 nodes
/// `y_{i-m}, ..., y_{i+m}` of a uniform grid with spacing `h`:
/// `w_j = (-1)^j C(2m, j) / h^{2m}`.
pub fn central_even_derivative(m: usize, h: f64) -> Vec<f64> {
    let order = 2 * m;
    let scale = h.powi(order as i32);
    (0..=order)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(order, j) / scale
        })
        .collect()
}

/// Centered first-derivative weights on 3 nodes: `(-1, 0, 1) / (2h)`.
pub fn central_first_derivative(h: f64) -> [f64; 3] {
    [-0.5 / h, 0.0, 0.5 / h]
}

/// One-sided weights for the j-th derivative at the first (left end) of
/// `npts` uniformly spaced nodes. Second-order accurate when `npts = j + 2`.
pub fn one_sided_derivative(j: usize, npts: usize, h: f64, at_left: bool) -> Vec<f64> {
    let nodes: Vec<f64> = (0..npts).map(|i| i as f64 * h).collect();
    let z = if at_left { 0.0 } else { nodes[npts - 1] };
    fd_weights(z, &nodes, j).swap_remove(j)
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fornberg_matches_binomial_for_even_derivatives() {
        for m in 1..=5 {
            let h = 0.1;
            let nodes: Vec<f64> = (0..=2 * m).map(|i| (i as f64 - m as f64) * h).collect();
            let w_f = fd_weights(0.0, &nodes, 2 * m).swap_remove(2 * m);
            let w_b = central_even_derivative(m, h);
            for (a, b) in w_f.iter().zip(&w_b) {
                assert_relative_eq!(a, b, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn one_sided_first_derivative_is_exact_on_quadratics() {
        // f(y) = y^2, f'(0) = 0, f'(2h) = 4h with h = 0.5
        let h = 0.5;
        let w = one_sided_derivative(1, 3, h, true);
        let samples = [0.0, h * h, 4.0 * h * h];
        let d: f64 = w.iter().zip(&samples).map(|(wi, fi)| wi * fi).sum();
        assert_relative_eq!(d, 0.0, epsilon = 1e-12);

        let w = one_sided_derivative(1, 3, h, false);
        let d: f64 = w.iter().zip(&samples).map(|(wi, fi)| wi * fi).sum();
        assert_relative_eq!(d, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn high_derivative_annihilates_low_polynomials() {
        let h = 0.2;
        let w = central_even_derivative(3, h); // f^(6) on 7 points
        for p in 0..6 {
            let s: f64 = w
                .iter()
                .enumerate()
                .map(|(j, wj)| wj * ((j as f64 - 3.0) * h).powi(p))
                .sum();
            assert!(s.abs() < 1e-6 / h.powi(6) * 1e-9, "degree {p}: {s}");
        }
        // and reproduces 6! on y^6
        let s: f64 = w
            .iter()
            .enumerate()
            .map(|(j, wj)| wj * ((j as f64 - 3.0) * h).powi(6))
            .sum();
        assert_relative_eq!(s, 720.0, max_relative = 1e-8);
    }
}
