//! Plot-ready bundles: per-figure CSV files plus a small gnuplot script
//! alongside, so emitted data can be eyeballed without any plotting code
//! in this crate.

use anyhow::{anyhow, Result};
use kpp_core::model::TWProfile;
use kpp_core::twsolver::Status;

use crate::config::RunConfig;
use crate::manifest::RunManifest;
use crate::tasks::num_token;

/// Emit the requested bundle from the profiles a run just produced.
/// Returns the number of files written (0 when there is nothing to plot).
pub fn emit(
    cfg: &RunConfig,
    kind: &str,
    solved: &[(f64, Option<TWProfile>, Status)],
    man: &mut RunManifest,
) -> Result<usize> {
    let converged: Vec<(f64, &TWProfile)> = solved
        .iter()
        .filter_map(|(l, p, _)| p.as_ref().map(|p| (*l, p)))
        .collect();
    match kind {
        "profiles" => emit_profiles(cfg, &converged, man),
        "tail" => emit_tail(cfg, &converged, man),
        other => Err(anyhow!("unknown plotdata kind `{other}`")),
    }
}

/// Overlaid profiles, one column per wave speed, sampled on the overlap of
/// the aligned grids.
fn emit_profiles(
    cfg: &RunConfig,
    profiles: &[(f64, &TWProfile)],
    man: &mut RunManifest,
) -> Result<usize> {
    if profiles.is_empty() {
        return Ok(0);
    }
    let lo = profiles
        .iter()
        .map(|(_, p)| p.grid.left())
        .fold(f64::NEG_INFINITY, f64::max);
    let hi = profiles
        .iter()
        .map(|(_, p)| p.grid.right())
        .fold(f64::INFINITY, f64::min);
    let h = profiles
        .iter()
        .map(|(_, p)| p.grid.h())
        .fold(f64::INFINITY, f64::min);
    if hi <= lo {
        return Err(anyhow!("profile grids do not overlap"));
    }
    let mut csv = String::from("y");
    for (l, _) in profiles {
        csv.push_str(&format!(",lambda={}", num_token(*l)));
    }
    csv.push('\n');
    let steps = ((hi - lo) / h).floor() as usize;
    for k in 0..=steps {
        let y = lo + k as f64 * h;
        csv.push_str(&num_token_precise(y));
        for (_, p) in profiles {
            csv.push_str(&format!(",{}", crate::tasks::fmt_val(p.value_at(y))));
        }
        csv.push('\n');
    }
    write(cfg, "fig_profiles.csv", &csv, man)?;

    let script = format!(
        "# gnuplot script: gnuplot -p plot_profiles.gp\n\
         set datafile separator ','\n\
         set key autotitle columnheader\n\
         set xlabel 'y'\n\
         set ylabel 'f'\n\
         set xrange [-20:40]\n\
         plot for [i=2:{}] 'fig_profiles.csv' using 1:i with lines\n",
        profiles.len() + 1
    );
    write(cfg, "plot_profiles.gp", &script, man)?;
    man.task("plotdata-profiles", "ok", format!("{} profiles", profiles.len()));
    Ok(2)
}

/// The oscillatory foot of the m=2, lambda=0.1 profile on (0, 300) and
/// (0, 600); needs a window that actually reaches 600.
fn emit_tail(
    cfg: &RunConfig,
    profiles: &[(f64, &TWProfile)],
    man: &mut RunManifest,
) -> Result<usize> {
    let Some((_, p)) = profiles
        .iter()
        .find(|(l, p)| (*l - 0.1).abs() <= 1e-9 && p.m == 2)
    else {
        return Err(anyhow!(
            "tail bundle needs a converged m=2, lambda=0.1 profile among the results"
        ));
    };
    if p.grid.right() < 600.0 {
        return Err(anyhow!(
            "tail bundle needs the window to reach y=600 (right end is {}); \
             rerun with right=650",
            p.grid.right()
        ));
    }
    for (name, cut) in [("fig_tail_300.csv", 300.0), ("fig_tail_600.csv", 600.0)] {
        let mut csv = String::from("y,f\n");
        for (i, y) in p.grid.nodes().enumerate() {
            if y > 0.0 && y <= cut {
                csv.push_str(&format!("{},{}\n", y, crate::tasks::fmt_val(p.values[i])));
            }
        }
        write(cfg, name, &csv, man)?;
    }
    let script = "# gnuplot script: gnuplot -p plot_tail.gp\n\
         set datafile separator ','\n\
         set xlabel 'y'\n\
         set ylabel 'f'\n\
         plot 'fig_tail_600.csv' using 1:2 with lines title 'tail on (0,600)', \\\n\
              'fig_tail_300.csv' using 1:2 with lines title 'tail on (0,300)'\n";
    write(cfg, "plot_tail.gp", script, man)?;
    man.task("plotdata-tail", "ok", "tail bundle on (0,300) and (0,600)");
    Ok(3)
}

fn write(cfg: &RunConfig, rel: &str, text: &str, man: &mut RunManifest) -> Result<()> {
    let full = cfg.out_dir.join(rel);
    if let Some(parent) = full.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(&full, text)?;
    man.add_output(&cfg.out_dir, rel)?;
    Ok(())
}

/// Grid coordinates carry binary noise after repeated addition; print with
/// enough digits to round-trip typical spacings without clutter.
fn num_token_precise(x: f64) -> String {
    let mut s = format!("{x:.10}");
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
