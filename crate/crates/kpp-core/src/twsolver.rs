//! Traveling-wave boundary-value solver.
//!
//! The profile equation on the truncated interval,
//!
//!   (-1)^{m+1} f^{(2m)} + lambda f' + f(1 - f) = 0,
//!   f(left) = 1,  f(right) = 0,  f^{(j)}(both ends) = 0 for j = 1..m-1,
//!
//! is collocated with centered second-order stencils and solved by damped
//! Newton iteration on the banded system. On top of the single solve sit
//! branch continuation in lambda and a bisection scan for the largest
//! lambda at which the discrete problem still admits a valid solution.
//!
//! A practical note on convergence: whenever the decaying roots nearest
//! the imaginary axis are complex (every m >= 2, and m = 1 with lambda < 2)
//! the tails oscillate and the clamped ends lock the front's phase, so
//! Newton converges in a handful of steps. In the monotone-tail regime
//! (m = 1, lambda >= 2) the truncated problem is exponentially flat along
//! translations and the iteration drifts the front off toward a boundary
//! layer instead of settling; step-like seeds do not reach that part of
//! the branch.

use crate::banded::{Banded, BandedError};
use crate::grid::Grid;
use crate::model::{EquilibriumSide, ModelError, ModelSpec, TWProfile, RESIDUAL_GATE};
use crate::stencil;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TwError {
    #[error("grid must have at least {needed} nodes for m={m}, got {got}")]
    GridTooSmall {
        m: usize,
        needed: usize,
        got: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Banded(#[from] BandedError),
    #[error("lambda list passed to continue_branch must be strictly monotone")]
    NotMonotone,
    #[error("scan precondition violated: solve at {end} end (lambda={lambda}) must be {expected}")]
    ScanPrecondition {
        end: &'static str,
        lambda: f64,
        expected: &'static str,
    },
    #[error("existence predicate non-monotone in [{lo}, {hi}]; samples (lambda, valid): {samples:?}")]
    NonMonotone {
        lo: f64,
        hi: f64,
        samples: Vec<(f64, bool)>,
    },
    #[error("profiles not comparable: {0}")]
    Compare(String),
}

/// Initial iterate for the Newton solve.
#[derive(Debug, Clone)]
pub enum Guess {
    /// Step data 1_{y<0} (value 1/2 exactly at y = 0).
    Heaviside,
    /// Ramp (1 - tanh(y/width)) / 2.
    Smoothed(f64),
    /// Interpolate an existing profile onto the grid.
    Profile(TWProfile),
}

#[derive(Debug, Clone)]
pub struct BvpOptions {
    pub grid: Grid,
    pub newton_tol: f64,
    pub max_iter: usize,
    /// Line-search budget: the step is halved until the residual decreases,
    /// at most this many times per iteration.
    pub max_halvings: usize,
    pub guess: Guess,
}

impl BvpOptions {
    /// Solver defaults for a given (m, lambda): the grid from
    /// [`default_grid`], tol 1e-10, a step seed, and budgets that cover
    /// every phase-locked case with a wide margin.
    pub fn defaults_for(m: usize, lambda: f64) -> Self {
        BvpOptions {
            grid: default_grid(m, lambda),
            newton_tol: 1e-10,
            max_iter: 200,
            max_halvings: 30,
            guess: Guess::Heaviside,
        }
    }
}

/// Truncation interval and spacing used when the caller does not override
/// them. The right end grows as lambda shrinks because the zero-side decay
/// rate Re mu ~ lambda does; the spacing grows with m because the round-off
/// floor of the width-(2m+1) stencil is ~ eps 2^{2m} / h^{2m} and must stay
/// below the 1e-6 residual gate.
pub fn default_grid(m: usize, lambda: f64) -> Grid {
    let right = if lambda >= 0.1 {
        400.0
    } else if lambda >= 0.02 {
        1500.0
    } else {
        6000.0
    };
    Grid::with_spacing(-100.0, right, recommended_h(m)).unwrap()
}

/// Default spacing per order: round-off floor eps 2^{2m} / h^{2m} at least
/// ~5x below the residual gate.
pub fn recommended_h(m: usize) -> f64 {
    match m {
        1 | 2 => 0.05,
        3 => 0.1,
        4 => 0.15,
        5 => 0.25,
        _ => {
            let h = 2.2 * (2e-9f64).powf(1.0 / (2 * m) as f64);
            (h / 0.05).ceil() * 0.05
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Converged,
    Diverged,
    Trivial,
    Invalid,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub status: Status,
    pub profile: Option<TWProfile>,
    pub iterations: usize,
    /// Max-norm residual after each accepted Newton step (first entry is
    /// the seed's residual).
    pub residual_history: Vec<f64>,
}

impl SolveOutcome {
    pub fn is_converged(&self) -> bool {
        self.status == Status::Converged
    }
}

#[derive(Debug, Clone)]
pub struct LambdaScan {
    pub m: usize,
    pub samples: Vec<(f64, Status)>,
    pub bracket: (f64, f64),
    pub width: f64,
}

fn seed_values(grid: &Grid, guess: &Guess) -> Vec<f64> {
    match guess {
        Guess::Heaviside => grid
            .nodes()
            .map(|y| {
                if y < 0.0 {
                    1.0
                } else if y == 0.0 {
                    0.5
                } else {
                    0.0
                }
            })
            .collect(),
        Guess::Smoothed(w) => grid.nodes().map(|y| 0.5 * (1.0 - (y / w).tanh())).collect(),
        Guess::Profile(p) => grid.nodes().map(|y| p.value_at(y)).collect(),
    }
}

fn check_grid(m: usize, grid: &Grid) -> Result<(), TwError> {
    let needed = 4 * m + 1;
    if grid.n() < needed {
        return Err(TwError::GridTooSmall {
            m,
            needed,
            got: grid.n(),
        });
    }
    Ok(())
}

/// Interior collocation residual plus the 2m boundary rows.
///
/// Row layout: rows 0..m are the left-end conditions (Dirichlet f=1, then
/// f^{(j)}=0 for j=1..m-1), rows m..n-m collocate the ODE at their node,
/// rows n-m..n mirror the left end with f=0. All rows fit in a band with
/// kl = ku = m.
fn residual_only(spec: ModelSpec, f: &[f64], grid: &Grid) -> Vec<f64> {
    let n = grid.n();
    let h = grid.h();
    let m = spec.m;
    let s = spec.operator_sign();
    let w2m = stencil::central_even_derivative(m, h);
    let inv2h = 0.5 / h;
    let mut res = vec![0.0; n];

    res[0] = f[0] - 1.0;
    res[n - 1] = f[n - 1];
    for j in 1..m {
        let w = stencil::one_sided_derivative(j, j + 2, h, true);
        res[j] = w.iter().zip(&f[..j + 2]).map(|(a, b)| a * b).sum();
        let w = stencil::one_sided_derivative(j, j + 2, h, false);
        res[n - 1 - j] = w.iter().zip(&f[n - j - 2..]).map(|(a, b)| a * b).sum();
    }
    for i in m..n - m {
        let mut d2m = 0.0;
        for (k, wk) in w2m.iter().enumerate() {
            d2m += wk * f[i - m + k];
        }
        res[i] = s * d2m + spec.lambda * (f[i + 1] - f[i - 1]) * inv2h + f[i] * (1.0 - f[i]);
    }
    res
}

pub(crate) fn jacobian(spec: ModelSpec, f: &[f64], grid: &Grid) -> Banded {
    let n = grid.n();
    let h = grid.h();
    let m = spec.m;
    let s = spec.operator_sign();
    let w2m = stencil::central_even_derivative(m, h);
    let inv2h = 0.5 / h;
    let mut jac = Banded::zeros(n, m, m);

    jac.set(0, 0, 1.0);
    jac.set(n - 1, n - 1, 1.0);
    for j in 1..m {
        let w = stencil::one_sided_derivative(j, j + 2, h, true);
        for (c, wc) in w.iter().enumerate() {
            jac.set(j, c, *wc);
        }
        let w = stencil::one_sided_derivative(j, j + 2, h, false);
        for (c, wc) in w.iter().enumerate() {
            jac.set(n - 1 - j, n - j - 2 + c, *wc);
        }
    }
    for i in m..n - m {
        for (k, wk) in w2m.iter().enumerate() {
            jac.add(i, i - m + k, s * wk);
        }
        jac.add(i, i - 1, -spec.lambda * inv2h);
        jac.add(i, i + 1, spec.lambda * inv2h);
        jac.add(i, i, 1.0 - 2.0 * f[i]);
    }
    jac
}

/// Residual vector and banded Jacobian of the discrete system at `f`.
pub fn assemble_system(
    spec: ModelSpec,
    f: &[f64],
    opts: &BvpOptions,
) -> Result<(Vec<f64>, Banded), TwError> {
    check_grid(spec.m, &opts.grid)?;
    assert_eq!(f.len(), opts.grid.n());
    Ok((
        residual_only(spec, f, &opts.grid),
        jacobian(spec, f, &opts.grid),
    ))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

enum NewtonEnd {
    Reached,
    Stalled,
    Singular,
}

fn newton(
    spec: ModelSpec,
    grid: &Grid,
    mut f: Vec<f64>,
    opts: &BvpOptions,
) -> (Vec<f64>, NewtonEnd, usize, Vec<f64>) {
    let mut res = residual_only(spec, &f, grid);
    let mut rn = max_abs(&res);
    let mut history = vec![rn];
    for it in 0..opts.max_iter {
        if rn <= opts.newton_tol {
            return (f, NewtonEnd::Reached, it, history);
        }
        let jac = jacobian(spec, &f, grid);
        let lu = match jac.factor() {
            Ok(lu) => lu,
            Err(_) => return (f, NewtonEnd::Singular, it, history),
        };
        let mut rhs: Vec<f64> = res.iter().map(|r| -r).collect();
        lu.solve_in_place(&mut rhs);
        let df = rhs;

        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = f.iter().zip(&df).map(|(a, b)| a + step * b).collect();
            let tres = residual_only(spec, &trial, grid);
            let trn = max_abs(&tres);
            if trn.is_finite() && trn < rn {
                f = trial;
                res = tres;
                rn = trn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return (f, NewtonEnd::Stalled, it, history);
        }
        history.push(rn);
    }
    (f, NewtonEnd::Stalled, opts.max_iter, history)
}

fn interior_residual_norm(spec: ModelSpec, f: &[f64], grid: &Grid) -> f64 {
    let res = residual_only(spec, f, grid);
    max_abs(&res[spec.m..grid.n() - spec.m])
}

/// Interpolated location of the front: the right-most downward crossing of
/// 1/2 such that f stays above 1/2 on the 5 length units to its left (tail
/// oscillations can graze the level; the look-back window rejects them).
pub(crate) fn front_position(grid: &Grid, f: &[f64]) -> Option<f64> {
    let n = grid.n();
    let lookback = (5.0 / grid.h()).ceil() as usize;
    'outer: for i in (0..n - 1).rev() {
        if f[i] >= 0.5 && f[i + 1] < 0.5 {
            for k in i.saturating_sub(lookback)..i {
                if f[k] <= 0.5 {
                    continue 'outer;
                }
            }
            let x = grid.node(i) + grid.h() * (f[i] - 0.5) / (f[i] - f[i + 1]);
            return Some(x);
        }
    }
    None
}

/// True when the iterate is a rest state away from the forced boundary
/// layers (the clamps always hold a defect layer at one end, so constancy
/// is judged on the core of the interval).
fn near_constant(grid: &Grid, f: &[f64], value: f64) -> bool {
    let margin = 10.0;
    let mut seen = false;
    for (i, y) in grid.nodes().enumerate() {
        if y >= grid.left() + margin && y <= grid.right() - margin {
            seen = true;
            if (f[i] - value).abs() > 1e-2 {
                return false;
            }
        }
    }
    seen
}

fn outcome_from_iterate(
    spec: ModelSpec,
    grid: &Grid,
    f: Vec<f64>,
    end: NewtonEnd,
    iterations: usize,
    history: Vec<f64>,
) -> Result<SolveOutcome, TwError> {
    let rn_full = history.last().copied().unwrap_or(f64::INFINITY);
    let solved = match end {
        NewtonEnd::Reached => true,
        // the iteration can stall at the stencil's round-off floor,
        // which sits below the validity gate for the default spacings
        NewtonEnd::Stalled => rn_full <= RESIDUAL_GATE,
        NewtonEnd::Singular => false,
    };
    if !solved || f.iter().any(|v| !v.is_finite()) {
        return Ok(SolveOutcome {
            status: Status::Diverged,
            profile: None,
            iterations,
            residual_history: history,
        });
    }
    let rn = interior_residual_norm(spec, &f, grid);
    if near_constant(grid, &f, 0.0) || near_constant(grid, &f, 1.0) {
        let profile = TWProfile::new(*grid, f, spec.lambda, spec.m, rn, false)?;
        return Ok(SolveOutcome {
            status: Status::Trivial,
            profile: Some(profile),
            iterations,
            residual_history: history,
        });
    }
    let (status, profile) = match front_position(grid, &f) {
        Some(x) => {
            let aligned = grid.translated(-x);
            let profile = TWProfile::new(aligned, f, spec.lambda, spec.m, rn, true)?;
            if profile.is_valid() {
                (Status::Converged, profile)
            } else {
                (Status::Invalid, profile)
            }
        }
        None => {
            let profile = TWProfile::new(*grid, f, spec.lambda, spec.m, rn, false)?;
            (Status::Invalid, profile)
        }
    };
    Ok(SolveOutcome {
        status,
        profile: Some(profile),
        iterations,
        residual_history: history,
    })
}

/// Solve the truncated profile problem for one (m, lambda).
///
/// The outcome is `Converged` only if Newton reached tolerance (or the
/// round-off floor) *and* the profile passes the validity gate; the profile
/// is then aligned so the 1/2-crossing sits at y = 0.
pub fn solve_tw(spec: ModelSpec, opts: &BvpOptions) -> Result<SolveOutcome, TwError> {
    check_grid(spec.m, &opts.grid)?;
    let f0 = seed_values(&opts.grid, &opts.guess);
    let (f, end, iterations, history) = newton(spec, &opts.grid, f0, opts);
    outcome_from_iterate(spec, &opts.grid, f, end, iterations, history)
}

/// Solve along a monotone lambda list, seeding each solve from the last
/// converged iterate. Per-lambda failures are recorded, not propagated.
pub fn continue_branch(
    m: usize,
    lambdas: &[f64],
    opts: &BvpOptions,
) -> Result<Vec<SolveOutcome>, TwError> {
    check_grid(m, &opts.grid)?;
    if lambdas.len() > 1 {
        let ascending = lambdas.windows(2).all(|w| w[1] > w[0]);
        let descending = lambdas.windows(2).all(|w| w[1] < w[0]);
        if !ascending && !descending {
            return Err(TwError::NotMonotone);
        }
    }
    let mut out = Vec::with_capacity(lambdas.len());
    let mut seed: Option<Vec<f64>> = None;
    for &lambda in lambdas {
        let spec = ModelSpec::new(m, lambda)?;
        let f0 = match &seed {
            Some(v) => v.clone(),
            None => seed_values(&opts.grid, &opts.guess),
        };
        let (f, end, iterations, history) = newton(spec, &opts.grid, f0, opts);
        let keep = matches!(end, NewtonEnd::Reached)
            || history.last().is_some_and(|&r| r <= RESIDUAL_GATE);
        let outcome = outcome_from_iterate(spec, &opts.grid, f.clone(), end, iterations, history)?;
        if keep && outcome.status == Status::Converged {
            seed = Some(f);
        }
        out.push(outcome);
    }
    Ok(out)
}

/// Bracket the largest lambda at which the existence predicate
/// ("solve from a branch-continued seed converges and passes the validity
/// gate") still holds, by marching then bisecting. Reports a bracket,
/// never a point value: the predicate is a numerical surrogate for
/// existence, not existence itself.
pub fn scan_lambda_max(
    m: usize,
    lo: f64,
    hi: f64,
    width_tol: f64,
    opts: &BvpOptions,
) -> Result<LambdaScan, TwError> {
    assert!(lo < hi && width_tol > 0.0);
    check_grid(m, &opts.grid)?;
    let mut samples: Vec<(f64, Status)> = Vec::new();

    let probe = |lambda: f64,
                     seed: &Option<Vec<f64>>,
                     samples: &mut Vec<(f64, Status)>|
     -> Result<(bool, Option<Vec<f64>>), TwError> {
        let spec = ModelSpec::new(m, lambda)?;
        let f0 = match seed {
            Some(v) => v.clone(),
            None => seed_values(&opts.grid, &opts.guess),
        };
        let (f, end, _, history) = newton(spec, &opts.grid, f0, opts);
        let keep = matches!(end, NewtonEnd::Reached)
            || history.last().is_some_and(|&r| r <= RESIDUAL_GATE);
        let outcome = outcome_from_iterate(spec, &opts.grid, f.clone(), end, 0, history)?;
        samples.push((lambda, outcome.status));
        let ok = keep && outcome.status == Status::Converged;
        Ok((ok, if ok { Some(f) } else { None }))
    };

    let mut best: Option<Vec<f64>> = None;
    let (ok, vals) = probe(lo, &best, &mut samples)?;
    if !ok {
        return Err(TwError::ScanPrecondition {
            end: "lower",
            lambda: lo,
            expected: "converged and valid",
        });
    }
    best = vals;

    // march toward hi on a coarse ladder to carry the seed near the edge
    let step = ((hi - lo) / 16.0).max(width_tol);
    let mut bracket_lo = lo;
    let mut bracket_hi = hi;
    let mut lambda = lo + step;
    let mut marched_to_hi = true;
    while lambda < hi - 1e-12 {
        let (ok, vals) = probe(lambda, &best, &mut samples)?;
        if ok {
            best = vals;
            bracket_lo = lambda;
            lambda += step;
        } else {
            bracket_hi = lambda;
            marched_to_hi = false;
            break;
        }
    }
    if marched_to_hi {
        let (ok, _) = probe(hi, &best, &mut samples)?;
        if ok {
            return Err(TwError::ScanPrecondition {
                end: "upper",
                lambda: hi,
                expected: "diverged or invalid",
            });
        }
        bracket_hi = hi;
    }

    while bracket_hi - bracket_lo > width_tol {
        let mid = 0.5 * (bracket_lo + bracket_hi);
        let (ok, vals) = probe(mid, &best, &mut samples)?;
        if ok {
            best = vals;
            bracket_lo = mid;
        } else {
            bracket_hi = mid;
        }
    }

    // confirmation probe above the bracket: a valid solve there would mean
    // the predicate is not monotone on [lo, hi]
    let above = bracket_hi + 2.0 * width_tol;
    if above < hi {
        let (ok, _) = probe(above, &best, &mut samples)?;
        if ok {
            let log: Vec<(f64, bool)> = samples
                .iter()
                .map(|&(l, s)| (l, s == Status::Converged))
                .collect();
            return Err(TwError::NonMonotone {
                lo,
                hi,
                samples: log,
            });
        }
    }

    Ok(LambdaScan {
        m,
        samples,
        bracket: (bracket_lo, bracket_hi),
        width: bracket_hi - bracket_lo,
    })
}

/// Count sign changes of f minus the rest state beyond the first crossing,
/// walking away from the front (rightward for the zero side, leftward for
/// the one side). Excursions smaller than `threshold` are ignored, which
/// suppresses round-off chatter in the far tail.
pub fn count_oscillations(
    profile: &TWProfile,
    side: EquilibriumSide,
    threshold: f64,
) -> usize {
    let eq = side.equilibrium_value();
    let n = profile.grid.n();
    let start = profile.grid.bracket(0.0);
    let indices: Box<dyn Iterator<Item = usize>> = match side {
        EquilibriumSide::Zero => Box::new(start..n),
        EquilibriumSide::One => Box::new((0..=start).rev()),
    };
    let mut changes = 0usize;
    let mut last = 0i8;
    for i in indices {
        let g = profile.values[i] - eq;
        if g.abs() <= threshold {
            continue;
        }
        let s = if g > 0.0 { 1 } else { -1 };
        if last != 0 && s != last {
            changes += 1;
        }
        last = s;
    }
    changes.saturating_sub(1)
}

/// Sup-norm difference of two aligned profiles over the overlap of their
/// grids (interpolated on the finer spacing), as a fraction of the front
/// height 1.
pub fn compare_orders(p1: &TWProfile, p2: &TWProfile) -> Result<f64, TwError> {
    if !p1.aligned || !p2.aligned {
        return Err(TwError::Compare("both profiles must be aligned".into()));
    }
    if (p1.lambda - p2.lambda).abs() > 1e-12 {
        return Err(TwError::Compare(format!(
            "wave speeds differ: {} vs {}",
            p1.lambda, p2.lambda
        )));
    }
    let lo = p1.grid.left().max(p2.grid.left());
    let hi = p1.grid.right().min(p2.grid.right());
    if hi <= lo {
        return Err(TwError::Compare("grids do not overlap".into()));
    }
    let h = p1.grid.h().min(p2.grid.h());
    let steps = ((hi - lo) / h).floor() as usize;
    let mut sup = 0.0f64;
    for k in 0..=steps {
        let y = lo + k as f64 * h;
        sup = sup.max((p1.value_at(y) - p2.value_at(y)).abs());
    }
    Ok(sup)
}
