//! Command implementations. Each `run_*` executes the mapped module
//! operations, writes its CSV outputs under the run directory, records
//! per-task status in the manifest, and reports a [`Verdict`].

use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use kpp_core::cauchy::{
    self, CauchyConfig, FrontHistory, InitialData, SelfsimilarReport, Snapshot,
};
use kpp_core::charpoly::{self, C64};
use kpp_core::grid::Grid;
use kpp_core::linearized;
use kpp_core::model::{momentum_identity, EquilibriumSide, ModelSpec, TWProfile};
use kpp_core::stencil;
use kpp_core::twsolver::{
    count_oscillations, scan_lambda_max, solve_tw, BvpOptions, Guess, Status,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::config::{
    EvolveParams, FitShiftParams, InitKind, RootsParams, RunConfig, ScanMaxParams, SweepParams,
    TwParams, VerifyParams,
};
use crate::manifest::RunManifest;
use crate::plotdata;

/// How the run ended, scientifically. `Nonexistence` covers outcomes that
/// are expected negatives (a scan bracketing the end of the branch, a
/// profile the solver rightly refuses, finite-time blow-up); the process
/// exit code keeps them apart from genuine tool failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Success,
    Nonexistence,
    Error,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Success => 0,
            Verdict::Nonexistence => 2,
            Verdict::Error => 1,
        }
    }

    fn worse(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Error, _) | (_, Error) => Error,
            (Nonexistence, _) | (_, Nonexistence) => Nonexistence,
            _ => Success,
        }
    }
}

/// Compact decimal token for file names and summary rows: `{:.6}` with
/// trailing zeros trimmed, so 0.30000000000000004 from range arithmetic
/// prints as `0.3`.
pub fn num_token(x: f64) -> String {
    let mut s = format!("{x:.6}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// Shortest-roundtrip decimal, switching to scientific notation for tiny
/// magnitudes so far-tail values do not print as 25 zeros.
pub fn fmt_val(v: f64) -> String {
    if v != 0.0 && v.abs() < 1e-4 {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

fn write_file(root: &Path, rel: &str, text: &str, man: &mut RunManifest) -> Result<()> {
    let full = root.join(rel);
    if let Some(parent) = full.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&full, text).with_context(|| format!("writing {}", full.display()))?;
    man.add_output(root, rel)?;
    Ok(())
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Converged => "converged",
        Status::Diverged => "diverged",
        Status::Trivial => "trivial",
        Status::Invalid => "invalid",
    }
}

fn guess_from(kind: &Option<InitKind>) -> Guess {
    match kind {
        None | Some(InitKind::Heaviside) => Guess::Heaviside,
        Some(InitKind::Smoothed(w)) => Guess::Smoothed(*w),
    }
}

/// Solve once with the configured seed. A step seed occasionally misses the
/// Newton basin at an interior lambda even though the profile exists, so
/// when the seed was defaulted (not chosen by the user) a non-converged
/// outcome is retried from smoother ramps before being reported.
fn solve_tw_retrying(
    spec: ModelSpec,
    opts: &BvpOptions,
    seed_was_default: bool,
) -> std::result::Result<kpp_core::twsolver::SolveOutcome, kpp_core::twsolver::TwError> {
    let first = solve_tw(spec, opts)?;
    if first.status == Status::Converged || !seed_was_default {
        return Ok(first);
    }
    for w in [2.0, 4.0] {
        let mut retry = opts.clone();
        retry.guess = Guess::Smoothed(w);
        let out = solve_tw(spec, &retry)?;
        if out.status == Status::Converged {
            return Ok(out);
        }
    }
    Ok(first)
}

/// Solver options from the defaults with per-run grid overrides applied.
fn bvp_options(
    m: usize,
    lambda: f64,
    h: Option<f64>,
    left: Option<f64>,
    right: Option<f64>,
    newton_tol: Option<f64>,
    guess: Guess,
) -> Result<BvpOptions> {
    let mut opts = BvpOptions::defaults_for(m, lambda);
    let base = &opts.grid;
    let grid = Grid::with_spacing(
        left.unwrap_or_else(|| base.left()),
        right.unwrap_or_else(|| base.right()),
        h.unwrap_or_else(|| base.h()),
    )
    .map_err(|e| anyhow!("grid: {e}"))?;
    opts.grid = grid;
    if let Some(t) = newton_tol {
        opts.newton_tol = t;
    }
    opts.guess = guess;
    Ok(opts)
}

fn profile_csv(p: &TWProfile, status: Status) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "# m={} lambda={} status={} residual={:e}\n",
        p.m,
        p.lambda,
        status_word(status),
        p.residual_norm
    ));
    s.push_str("y,f\n");
    for (i, y) in p.grid.nodes().enumerate() {
        s.push_str(&format!("{},{}\n", y, fmt_val(p.values[i])));
    }
    s
}

pub fn run_roots(cfg: &RunConfig, p: &RootsParams, man: &mut RunManifest) -> Result<Verdict> {
    let sides: &[EquilibriumSide] = match p.side.as_str() {
        "zero" => &[EquilibriumSide::Zero],
        "one" => &[EquilibriumSide::One],
        _ => &[EquilibriumSide::Zero, EquilibriumSide::One],
    };
    let mut csv = String::from("side,re,im,multiplicity\n");
    let mut bundles = String::from("side,stable,unstable,marginal\n");
    for &side in sides {
        let poly = charpoly::build_charpoly(p.m, p.lambda, side);
        let roots = charpoly::find_roots(&poly, p.tol)
            .map_err(|e| anyhow!("root finding failed: {e}"))?;
        let name = match side {
            EquilibriumSide::Zero => "zero",
            EquilibriumSide::One => "one",
        };
        for &(mu, k) in &roots.roots {
            csv.push_str(&format!("{},{},{},{}\n", name, mu.re, mu.im, k));
        }
        let dims = charpoly::classify_bundles(&roots, 1e-9);
        bundles.push_str(&format!(
            "{},{},{},{}\n",
            name, dims.stable, dims.unstable, dims.marginal
        ));
        man.task(
            format!("roots-{name}"),
            "ok",
            format!("{} distinct roots", roots.roots.len()),
        );
    }
    write_file(&cfg.out_dir, "roots.csv", &csv, man)?;
    write_file(&cfg.out_dir, "bundles.csv", &bundles, man)?;
    Ok(Verdict::Success)
}

pub fn run_tw(cfg: &RunConfig, p: &TwParams, man: &mut RunManifest) -> Result<Verdict> {
    let mut verdict = Verdict::Success;
    let mut solved: Vec<(f64, Option<TWProfile>, Status)> = Vec::new();
    for &lambda in &p.lambdas {
        let opts = bvp_options(
            p.m,
            lambda,
            p.h,
            p.left,
            p.right,
            p.newton_tol,
            guess_from(&p.guess),
        )?;
        let spec = match ModelSpec::new(p.m, lambda) {
            Ok(s) => s,
            Err(e) => {
                man.task(format!("tw-lambda{}", num_token(lambda)), "error", e.to_string());
                verdict = verdict.worse(Verdict::Error);
                continue;
            }
        };
        match solve_tw_retrying(spec, &opts, p.guess.is_none()) {
            Ok(out) => {
                let name = format!("tw-lambda{}", num_token(lambda));
                if out.status == Status::Converged {
                    let profile = out.profile.expect("converged outcome carries a profile");
                    let rel = format!("profile_m{}_lambda{}.csv", p.m, num_token(lambda));
                    write_file(&cfg.out_dir, &rel, &profile_csv(&profile, out.status), man)?;
                    man.task(
                        name,
                        "ok",
                        format!(
                            "converged in {} iterations, momentum {:.6}",
                            out.iterations, profile.momentum
                        ),
                    );
                    solved.push((lambda, Some(profile), out.status));
                } else {
                    man.task(
                        name,
                        "nonexistent",
                        format!("solver outcome: {}", status_word(out.status)),
                    );
                    verdict = verdict.worse(Verdict::Nonexistence);
                    solved.push((lambda, None, out.status));
                }
            }
            Err(e) => {
                man.task(
                    format!("tw-lambda{}", num_token(lambda)),
                    "error",
                    e.to_string(),
                );
                verdict = verdict.worse(Verdict::Error);
            }
        }
    }
    if let Some(kind) = &p.plotdata {
        let written = plotdata::emit(cfg, kind, &solved, man)?;
        if written == 0 {
            println!("plotdata: nothing to emit (no converged profiles)");
        }
    }
    Ok(verdict)
}

pub fn run_scan_max(cfg: &RunConfig, p: &ScanMaxParams, man: &mut RunManifest) -> Result<Verdict> {
    let opts = bvp_options(p.m, p.lo, p.h, p.left, p.right, None, Guess::Heaviside)?;
    match scan_lambda_max(p.m, p.lo, p.hi, p.width_tol, &opts) {
        Ok(scan) => {
            let mut csv = String::from("lambda,status\n");
            for &(l, s) in &scan.samples {
                csv.push_str(&format!("{},{}\n", l, status_word(s)));
            }
            write_file(&cfg.out_dir, "scan_samples.csv", &csv, man)?;
            let bracket = format!(
                "m,bracket_lo,bracket_hi,width\n{},{},{},{}\n",
                scan.m, scan.bracket.0, scan.bracket.1, scan.width
            );
            write_file(&cfg.out_dir, "scan_bracket.csv", &bracket, man)?;
            man.task(
                "scan-max",
                "nonexistent",
                format!(
                    "existence predicate fails beyond [{:.6}, {:.6}]",
                    scan.bracket.0, scan.bracket.1
                ),
            );
            println!(
                "scan-max m={}: bracket [{:.6}, {:.6}] (width {:.2e})",
                p.m, scan.bracket.0, scan.bracket.1, scan.width
            );
            // a bracket is the expected "branch ends here" outcome
            Ok(Verdict::Nonexistence)
        }
        Err(e) => {
            man.task("scan-max", "error", e.to_string());
            eprintln!("scan-max failed: {e}");
            Ok(Verdict::Error)
        }
    }
}

pub fn run_sweep(cfg: &RunConfig, p: &SweepParams, man: &mut RunManifest) -> Result<Verdict> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .context("building worker pool")?;
    let results: Vec<Result<(f64, Option<TWProfile>, Status, f64, usize), String>> =
        pool.install(|| {
            use rayon::prelude::*;
            p.lambdas
                .par_iter()
                .map(|&lambda| {
                    let opts = bvp_options(p.m, lambda, p.h, p.left, p.right, None, Guess::Heaviside)
                        .map_err(|e| e.to_string())?;
                    let spec = ModelSpec::new(p.m, lambda).map_err(|e| e.to_string())?;
                    let out = solve_tw_retrying(spec, &opts, true).map_err(|e| e.to_string())?;
                    match out.profile {
                        Some(profile) if out.status == Status::Converged => {
                            let osc =
                                count_oscillations(&profile, EquilibriumSide::Zero, 1e-9);
                            Ok((lambda, Some(profile), out.status, 0.0, osc))
                        }
                        _ => Ok((lambda, None, out.status, f64::NAN, 0)),
                    }
                })
                .collect()
        });

    let mut verdict = Verdict::Success;
    let mut summary = String::from("lambda,status,momentum,oscillations\n");
    let mut solved: Vec<(f64, Option<TWProfile>, Status)> = Vec::new();
    for res in results {
        match res {
            Ok((lambda, Some(profile), status, _, osc)) => {
                let rel = format!("profile_m{}_lambda{}.csv", p.m, num_token(lambda));
                write_file(&cfg.out_dir, &rel, &profile_csv(&profile, status), man)?;
                summary.push_str(&format!(
                    "{},{},{:.12e},{}\n",
                    num_token(lambda),
                    status_word(status),
                    profile.momentum,
                    osc
                ));
                man.task(
                    format!("sweep-lambda{}", num_token(lambda)),
                    "ok",
                    String::new(),
                );
                solved.push((lambda, Some(profile), status));
            }
            Ok((lambda, None, status, _, _)) => {
                summary.push_str(&format!(
                    "{},{},nan,0\n",
                    num_token(lambda),
                    status_word(status)
                ));
                man.task(
                    format!("sweep-lambda{}", num_token(lambda)),
                    "nonexistent",
                    format!("solver outcome: {}", status_word(status)),
                );
                verdict = verdict.worse(Verdict::Nonexistence);
                solved.push((lambda, None, status));
            }
            Err(e) => {
                man.task("sweep", "error", e.clone());
                eprintln!("sweep task failed: {e}");
                verdict = verdict.worse(Verdict::Error);
            }
        }
    }
    write_file(&cfg.out_dir, "summary.csv", &summary, man)?;
    if let Some(kind) = &p.plotdata {
        let written = plotdata::emit(cfg, kind, &solved, man)?;
        if written == 0 {
            println!("plotdata: nothing to emit (empty sweep)");
            man.task("plotdata", "ok", "no files: empty sweep".to_string());
        }
    }
    Ok(verdict)
}

fn initial_data(kind: &InitKind) -> InitialData {
    match kind {
        InitKind::Heaviside => InitialData::Heaviside,
        InitKind::Smoothed(w) => InitialData::Smoothed(*w),
    }
}

fn snapshot_csv(s: &Snapshot) -> String {
    let mut text = format!("# t={}\n", s.t);
    text.push_str("x,u\n");
    for (i, x) in s.grid.nodes().enumerate() {
        text.push_str(&format!("{},{}\n", x, fmt_val(s.u[i])));
    }
    text
}

pub fn run_evolve(cfg: &RunConfig, p: &EvolveParams, man: &mut RunManifest) -> Result<Verdict> {
    let mut cc = CauchyConfig::defaults(p.m, p.t_final);
    if let Some(v) = p.h {
        cc.h = v;
    }
    if let Some(v) = p.window_a {
        cc.window_a = v;
    }
    if let Some(v) = p.window_b {
        cc.window_b = v;
    }
    if let Some(v) = p.dt_init {
        cc.dt_init = v;
    }
    if let Some(v) = p.dt_max {
        cc.dt_max = v;
    }
    if let Some(v) = p.step_tol {
        cc.step_tol = v;
    }
    if let Some(v) = p.output_dt {
        cc.output_dt = v;
    }
    cc.snapshot_times = p.snapshots.clone();
    cc.u0 = initial_data(&p.u0);

    match cauchy::evolve(&cc) {
        Ok((history, snapshots, blowup)) => {
            let mut front = String::from("t,xf,umin,umax\n");
            for i in 0..history.times.len() {
                front.push_str(&format!(
                    "{},{},{},{}\n",
                    history.times[i],
                    history.xf[i],
                    fmt_val(history.umin[i]),
                    fmt_val(history.umax[i])
                ));
            }
            write_file(&cfg.out_dir, "front.csv", &front, man)?;
            for s in &snapshots {
                let rel = format!("snapshot_t{}.csv", num_token(s.t));
                write_file(&cfg.out_dir, &rel, &snapshot_csv(s), man)?;
            }
            if blowup.detected {
                man.task(
                    "evolve",
                    "blowup",
                    format!(
                        "sup-norm {:.3e} at t={:.6}",
                        blowup.sup_norm_at_detect, blowup.t_detect
                    ),
                );
                println!(
                    "evolve m={}: blow-up detected at t={:.6}",
                    p.m, blowup.t_detect
                );
                Ok(Verdict::Nonexistence)
            } else {
                man.task(
                    "evolve",
                    "ok",
                    format!("reached t={} with {} outputs", p.t_final, history.times.len()),
                );
                Ok(Verdict::Success)
            }
        }
        Err(e) => {
            man.task("evolve", "error", e.to_string());
            eprintln!("evolve failed: {e}");
            Ok(Verdict::Error)
        }
    }
}

/// Read a front-history CSV: `#` lines skipped, first non-comment line must
/// be a header containing `t` and `xf` columns; extra columns are ignored.
fn read_front_csv(path: &Path) -> Result<FrontHistory> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut it = text.lines().filter(|l| !l.trim_start().starts_with('#'));
    let header = it.next().ok_or_else(|| anyhow!("empty input file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let t_col = cols
        .iter()
        .position(|&c| c == "t")
        .ok_or_else(|| anyhow!("input needs a `t` column"))?;
    let x_col = cols
        .iter()
        .position(|&c| c == "xf")
        .ok_or_else(|| anyhow!("input needs an `xf` column"))?;
    let mut hist = FrontHistory::default();
    for (i, line) in it.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let need = t_col.max(x_col);
        if fields.len() <= need {
            return Err(anyhow!("row {} has too few columns", i + 2));
        }
        let t: f64 = fields[t_col]
            .trim()
            .parse()
            .map_err(|_| anyhow!("bad t value on row {}", i + 2))?;
        let x: f64 = fields[x_col]
            .trim()
            .parse()
            .map_err(|_| anyhow!("bad xf value on row {}", i + 2))?;
        hist.times.push(t);
        hist.xf.push(x);
        hist.umin.push(0.0);
        hist.umax.push(1.0);
    }
    Ok(hist)
}

pub fn run_fit_shift(cfg: &RunConfig, p: &FitShiftParams, man: &mut RunManifest) -> Result<Verdict> {
    let hist = match read_front_csv(&p.input) {
        Ok(h) => h,
        Err(e) => {
            man.task("fit-shift", "error", e.to_string());
            eprintln!("fit-shift: {e}");
            return Ok(Verdict::Error);
        }
    };
    match cauchy::fit_shift(&hist, p.window) {
        Ok(fit) => {
            let csv = format!(
                "lambda0,k,c,residual_rms,window_lo,window_hi\n{},{},{},{},{},{}\n",
                fit.lambda0, fit.k, fit.c, fit.residual_rms, fit.window.0, fit.window.1
            );
            write_file(&cfg.out_dir, "fit.csv", &csv, man)?;
            man.task(
                "fit-shift",
                "ok",
                format!("lambda0={:.6} k={:.4}", fit.lambda0, fit.k),
            );
            println!(
                "fit-shift: x_f(t) = {:.6} t - {:.4} log t + {:.4}  (rms {:.3e})",
                fit.lambda0, fit.k, fit.c, fit.residual_rms
            );
            Ok(Verdict::Success)
        }
        Err(e) => {
            man.task("fit-shift", "error", e.to_string());
            eprintln!("fit-shift failed: {e}");
            Ok(Verdict::Error)
        }
    }
}

// ---------------------------------------------------------------------------
// verify

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Check {
    Check { name, pass, detail }
}

fn momentum_check() -> Check {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for (m, lambda) in [(1, 0.5), (1, 1.0), (2, 0.5), (2, 1.0), (3, 0.5), (3, 1.0)] {
        let opts = BvpOptions::defaults_for(m, lambda);
        let spec = match ModelSpec::new(m, lambda) {
            Ok(s) => s,
            Err(e) => return check("momentum-identity", false, e.to_string()),
        };
        match solve_tw(spec, &opts) {
            Ok(out) if out.status == Status::Converged => {
                let p = out.profile.unwrap();
                let err = (momentum_identity(&p) - 1.0 / 6.0).abs();
                worst = worst.max(err);
            }
            Ok(out) => {
                return check(
                    "momentum-identity",
                    false,
                    format!("m={m} lambda={lambda}: {}", status_word(out.status)),
                )
            }
            Err(e) => return check("momentum-identity", false, e.to_string()),
        }
    }
    detail.push_str(&format!("max |lambda int (f')^2 - 1/6| = {worst:.3e}"));
    check("momentum-identity", worst <= 1e-2, detail)
}

fn blowup_check() -> Check {
    let y0 = 5.0;
    // analytic residual vanishes identically
    let mut analytic = 0.0f64;
    for i in 0..50 {
        let y = -40.0 + i as f64;
        analytic = analytic.max(kpp_core::model::blowup_analytic_residual(y0, y).abs());
    }
    if analytic != 0.0 {
        return check(
            "blowup-residual",
            false,
            format!("analytic residual {analytic:.3e} != 0"),
        );
    }
    // discrete residual of f'''' + f^2 decays at second order
    let resid = |h: f64| -> f64 {
        let grid = Grid::with_spacing(-40.0, -10.0, h).unwrap();
        let f = kpp_core::model::blowup_profile(y0, &grid).unwrap();
        let w = stencil::central_even_derivative(2, h);
        let mut sup = 0.0f64;
        for i in 2..grid.n() - 2 {
            let mut d4 = 0.0;
            for (k, wk) in w.iter().enumerate() {
                d4 += wk * f[i + k - 2];
            }
            sup = sup.max((d4 + f[i] * f[i]).abs());
        }
        sup
    };
    let r1 = resid(0.05);
    let r2 = resid(0.025);
    let order = (r1 / r2).log2();
    check(
        "blowup-residual",
        order >= 1.9,
        format!("discrete residual order {order:.3} (res {r1:.3e} -> {r2:.3e})"),
    )
}

fn double_root_check() -> Check {
    let one = charpoly::double_root_loci(2, EquilibriumSide::One);
    let mu_star = 3f64.powf(-0.25);
    let lam_star = 4.0 * 3f64.powf(-0.75);
    let mut worst = 0.0f64;
    if one.len() != 2 {
        return check(
            "double-root-loci",
            false,
            format!("expected 2 one-side loci for m=2; found {}", one.len()),
        );
    }
    for locus in &one {
        worst = worst.max((locus.mu.re.abs() - mu_star).abs());
        worst = worst.max(locus.mu.im.abs());
        worst = worst.max((locus.lambda.abs() - lam_star).abs());
        let p = charpoly::build_charpoly(2, locus.lambda, EquilibriumSide::One);
        worst = worst.max(p.eval(locus.mu).norm());
        worst = worst.max(p.eval_deriv(locus.mu).norm());
    }
    let zero = charpoly::double_root_loci(2, EquilibriumSide::Zero);
    if !zero.is_empty() {
        return check(
            "double-root-loci",
            false,
            "m=2 zero-side locus should be empty".to_string(),
        );
    }
    let m3 = charpoly::double_root_loci(3, EquilibriumSide::Zero);
    let mu3 = 5f64.powf(-1.0 / 6.0);
    for locus in &m3 {
        worst = worst.max((locus.mu.re.abs() - mu3).abs());
    }
    if m3.is_empty() {
        return check("double-root-loci", false, "no m=3 zero-side loci".into());
    }
    check(
        "double-root-loci",
        worst <= 1e-10,
        format!("max defect {worst:.3e}"),
    )
}

fn erfc_check() -> Check {
    let grid = linearized::selfsimilar_default_grid(1);
    match linearized::selfsimilar_profile(1, grid) {
        Ok(v) => {
            let mut sup = 0.0f64;
            for (i, z) in v.grid.nodes().enumerate() {
                let exact = 0.5 * libm::erfc(z / 2.0);
                sup = sup.max((v.values[i] - exact).abs());
            }
            check("erfc-oracle", sup <= 1e-3, format!("sup error {sup:.3e}"))
        }
        Err(e) => check("erfc-oracle", false, e.to_string()),
    }
}

fn roots_exact_check() -> Check {
    let want_zero = [
        C64::new(1.0, 0.0),
        C64::new(-1.0, 0.0),
        C64::new(0.0, 1.0),
        C64::new(0.0, -1.0),
    ];
    let r = 0.5f64.sqrt();
    let want_one = [
        C64::new(r, r),
        C64::new(r, -r),
        C64::new(-r, r),
        C64::new(-r, -r),
    ];
    let mut worst = 0.0f64;
    for (side, want) in [
        (EquilibriumSide::Zero, want_zero),
        (EquilibriumSide::One, want_one),
    ] {
        let p = charpoly::build_charpoly(2, 0.0, side);
        let rs = match charpoly::find_roots(&p, 1e-13) {
            Ok(rs) => rs,
            Err(e) => return check("roots-at-lambda0", false, e.to_string()),
        };
        for w in want {
            let best = rs
                .roots
                .iter()
                .map(|&(mu, _)| (mu - w).norm())
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(best);
        }
    }
    check(
        "roots-at-lambda0",
        worst <= 1e-12,
        format!("max root distance {worst:.3e}"),
    )
}

fn fit_exact_check(seed: u64) -> Check {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let lambda0: f64 = rng.gen_range(0.5..3.0);
        let k: f64 = rng.gen_range(-2.0..2.0);
        let c: f64 = rng.gen_range(-5.0..5.0);
        let mut hist = FrontHistory::default();
        for i in 1..=400 {
            let t = i as f64;
            hist.times.push(t);
            hist.xf.push(lambda0 * t - k * t.ln() + c);
            hist.umin.push(0.0);
            hist.umax.push(1.0);
        }
        match cauchy::fit_shift(&hist, (50.0, 400.0)) {
            Ok(fit) => {
                worst = worst.max((fit.lambda0 - lambda0).abs() / lambda0.abs().max(1.0));
                worst = worst.max((fit.k - k).abs() / k.abs().max(1.0));
                worst = worst.max((fit.c - c).abs() / c.abs().max(1.0));
            }
            Err(e) => return check("fit-shift-exact", false, e.to_string()),
        }
    }
    check(
        "fit-shift-exact",
        worst <= 1e-10,
        format!("max relative recovery error {worst:.3e} over seeded trials"),
    )
}

pub fn run_verify(cfg: &RunConfig, p: &VerifyParams, man: &mut RunManifest) -> Result<Verdict> {
    let mut rows: Vec<Check> = Vec::new();

    if let Some(path) = &p.manifest {
        match RunManifest::load(path) {
            Ok(old) => {
                let root = path.parent().unwrap_or_else(|| Path::new("."));
                let mut all_ok = true;
                let mut n = 0usize;
                for (file, ok, detail) in old.revalidate(root) {
                    if !ok {
                        all_ok = false;
                        rows.push(Check {
                            name: "manifest-digest",
                            pass: false,
                            detail: format!("{file}: {detail}"),
                        });
                    }
                    n += 1;
                }
                if all_ok {
                    rows.push(check(
                        "manifest-digest",
                        true,
                        format!("{n} outputs re-validated"),
                    ));
                }
            }
            Err(e) => rows.push(check("manifest-digest", false, e.to_string())),
        }
    }

    rows.push(roots_exact_check());
    rows.push(double_root_check());
    rows.push(blowup_check());
    rows.push(erfc_check());
    rows.push(fit_exact_check(cfg.seed));
    rows.push(momentum_check());

    let mut csv = String::from("check,status,detail\n");
    let mut all = true;
    let out = std::io::stdout();
    let mut outl = out.lock();
    for r in &rows {
        all &= r.pass;
        let word = if r.pass { "pass" } else { "fail" };
        writeln!(outl, "verify {}: {} ({})", r.name, word, r.detail)?;
        csv.push_str(&format!(
            "{},{},{}\n",
            r.name,
            word,
            r.detail.replace(',', ";")
        ));
        man.task(r.name, if r.pass { "ok" } else { "error" }, r.detail.clone());
    }
    drop(outl);
    write_file(&cfg.out_dir, "verify.csv", &csv, man)?;
    Ok(if all { Verdict::Success } else { Verdict::Error })
}

/// Large-time self-similar report helper shared by tests; thin wrapper so
/// the CLI layer has no numerics of its own.
#[allow(dead_code)]
pub fn selfsimilar_report(
    snapshot: &Snapshot,
    t: f64,
    v: &linearized::SelfsimilarProfile,
) -> Result<SelfsimilarReport> {
    cauchy::selfsimilar_domain_check(snapshot, t, v).map_err(|e| anyhow!(e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn num_token_trims() {
        assert_eq!(num_token(0.30000000000000004), "0.3");
        assert_eq!(num_token(1.0), "1");
        assert_eq!(num_token(-0.25), "-0.25");
        assert_eq!(num_token(10.0), "10");
    }

    #[test]
    fn verdict_ordering() {
        assert_eq!(Verdict::Success.worse(Verdict::Nonexistence), Verdict::Nonexistence);
        assert_eq!(Verdict::Nonexistence.worse(Verdict::Error), Verdict::Error);
        assert_eq!(Verdict::Success.worse(Verdict::Success), Verdict::Success);
    }

    #[test]
    fn front_csv_reader_handles_extra_columns() {
        let dir = std::env::temp_dir().join(format!("kpp-fit-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("front.csv");
        fs::write(&path, "# comment\nt,xf,umin,umax\n1,2,0,1\n2,4.5,0,1\n").unwrap();
        let h = read_front_csv(&path).unwrap();
        assert_eq!(h.times, vec![1.0, 2.0]);
        assert_eq!(h.xf, vec![2.0, 4.5]);
        fs::remove_dir_all(&dir).ok();
    }
}
