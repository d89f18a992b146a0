//! Run configuration: a flat `key = value` text format with `[section]`
//! headers, plus the typed per-command parameter structs it parses into.
//!
//! The format is deliberately tiny so manifests stay diff-friendly:
//!
//! ```text
//! [run]
//! command = tw
//! out = results
//!
//! [tw]
//! m = 2
//! lambda = 0.5
//! ```
//!
//! Keys live in the section named after their command (`[run]` holds the
//! command selection and global knobs). Unknown keys are rejected, with the
//! line they came from, rather than silently ignored.

use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum ConfigError {
    /// Text that does not scan: `line`/`column` are 1-based.
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    UnknownKey {
        key: String,
        line: usize,
    },
    /// A key that scanned but does not validate (bad number, missing
    /// required key, value out of range).
    Invalid {
        key: String,
        message: String,
    },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse {
                line,
                column,
                message,
            } => write!(f, "config parse error at line {line}, column {column}: {message}"),
            ConfigError::UnknownKey { key, line } => {
                if *line == 0 {
                    // line 0 marks entries injected from the command line
                    write!(f, "unknown config key `{key}` (from the command line)")
                } else {
                    write!(f, "unknown config key `{key}` at line {line}")
                }
            }
            ConfigError::Invalid { key, message } => {
                write!(f, "invalid value for `{key}`: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Roots,
    Tw,
    ScanMax,
    Sweep,
    Evolve,
    FitShift,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Roots => "roots",
            Command::Tw => "tw",
            Command::ScanMax => "scan-max",
            Command::Sweep => "sweep",
            Command::Evolve => "evolve",
            Command::FitShift => "fit-shift",
            Command::Verify => "verify",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        match s {
            "roots" => Some(Command::Roots),
            "tw" => Some(Command::Tw),
            "scan-max" => Some(Command::ScanMax),
            "sweep" => Some(Command::Sweep),
            "evolve" => Some(Command::Evolve),
            "fit-shift" => Some(Command::FitShift),
            "verify" => Some(Command::Verify),
            _ => None,
        }
    }
}

/// One `key = value` occurrence with provenance for error messages.
#[derive(Debug, Clone)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Scan the text into sectioned entries. No key knowledge here; that lives
/// in the per-command validators.
pub fn scan_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut entries = Vec::new();
    let mut section = String::from("run");
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::Parse {
                    line: lineno,
                    column: raw.len(),
                    message: "section header missing closing `]`".into(),
                });
            };
            section = name.trim().to_string();
            if section.is_empty() {
                return Err(ConfigError::Parse {
                    line: lineno,
                    column: 2,
                    message: "empty section name".into(),
                });
            }
            continue;
        }
        let Some(eq) = line.find('=') else {
            let col = raw.find(|c: char| !c.is_whitespace()).unwrap_or(0) + 1;
            return Err(ConfigError::Parse {
                line: lineno,
                column: col,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = line[..eq].trim().to_string();
        // strip trailing comments so `m = 2  # order` works
        let mut value = line[eq + 1..].trim().to_string();
        if let Some(hash) = value.find('#') {
            value.truncate(hash);
            value = value.trim().to_string();
        }
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: lineno,
                column: 1,
                message: "empty key before `=`".into(),
            });
        }
        entries.push(Entry {
            section: section.clone(),
            key,
            value,
            line: lineno,
        });
    }
    Ok(entries)
}

/// Initial-data selection for `evolve`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitKind {
    Heaviside,
    Smoothed(f64),
}

#[derive(Debug, Clone)]
pub struct RootsParams {
    pub m: usize,
    pub lambda: f64,
    /// "zero", "one", or "both".
    pub side: String,
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct TwParams {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub h: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub newton_tol: Option<f64>,
    pub guess: Option<InitKind>,
    pub plotdata: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScanMaxParams {
    pub m: usize,
    pub lo: f64,
    pub hi: f64,
    pub width_tol: f64,
    pub h: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub h: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub plotdata: Option<String>,
}

#[derive(Debug, Clone)]
pub struct EvolveParams {
    pub m: usize,
    pub t_final: f64,
    pub h: Option<f64>,
    pub window_a: Option<f64>,
    pub window_b: Option<f64>,
    pub dt_init: Option<f64>,
    pub dt_max: Option<f64>,
    pub step_tol: Option<f64>,
    pub output_dt: Option<f64>,
    pub snapshots: Vec<f64>,
    pub u0: InitKind,
}

#[derive(Debug, Clone)]
pub struct FitShiftParams {
    /// CSV with a `t,xf` header (extra columns are ignored).
    pub input: PathBuf,
    pub window: (f64, f64),
}

#[derive(Debug, Clone, Default)]
pub struct VerifyParams {
    /// Optional manifest whose output digests are re-validated.
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum Params {
    Roots(RootsParams),
    Tw(TwParams),
    ScanMax(ScanMaxParams),
    Sweep(SweepParams),
    Evolve(EvolveParams),
    FitShift(FitShiftParams),
    Verify(VerifyParams),
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub seed: u64,
    pub params: Params,
    /// Normalized `section.key = value` pairs, echoed into the manifest.
    pub echo: Vec<(String, String)>,
    /// Accepted-but-suspicious values (printed to stderr, recorded).
    pub warnings: Vec<String>,
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.into(),
        message: message.into(),
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| bad(key, format!("`{v}` is not a number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| bad(key, format!("`{v}` is not a non-negative integer")))
}

/// Comma list (`0.2,0.3`) or range (`0.1:0.1:1.2`, inclusive of the stop
/// value up to half a step of slack).
pub fn parse_lambda_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.contains(':') {
        let parts: Vec<&str> = v.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(key, format!("range must be start:step:stop, got `{v}`")));
        }
        let start = parse_f64(key, parts[0])?;
        let step = parse_f64(key, parts[1])?;
        let stop = parse_f64(key, parts[2])?;
        if step <= 0.0 || stop < start {
            return Err(bad(key, "range needs step > 0 and stop >= start"));
        }
        let count = ((stop - start) / step + 0.5).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    let mut out = Vec::new();
    for tok in v.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        out.push(parse_f64(key, tok)?);
    }
    if out.is_empty() {
        return Err(bad(key, "empty list"));
    }
    Ok(out)
}

fn parse_init(key: &str, v: &str) -> Result<InitKind, ConfigError> {
    if v == "heaviside" {
        return Ok(InitKind::Heaviside);
    }
    if let Some(w) = v.strip_prefix("smoothed:") {
        let w = parse_f64(key, w)?;
        if w <= 0.0 {
            return Err(bad(key, "ramp width must be positive"));
        }
        return Ok(InitKind::Smoothed(w));
    }
    Err(bad(
        key,
        format!("`{v}` is not `heaviside` or `smoothed:<width>`"),
    ))
}

/// A small typed view over the entries of one section.
struct Section<'a> {
    name: &'a str,
    entries: Vec<&'a Entry>,
    used: Vec<bool>,
}

impl<'a> Section<'a> {
    fn new(name: &'a str, all: &'a [Entry]) -> Self {
        let entries: Vec<&Entry> = all.iter().filter(|e| e.section == name).collect();
        let used = vec![false; entries.len()];
        Section {
            name,
            entries,
            used,
        }
    }

    /// Last occurrence wins, so inline overrides can simply be appended.
    fn get(&mut self, key: &str) -> Option<&'a str> {
        let mut found = None;
        for (i, e) in self.entries.iter().enumerate() {
            if e.key == key {
                self.used[i] = true;
                found = Some(e.value.as_str());
            }
        }
        found
    }

    fn require(&mut self, key: &str) -> Result<&'a str, ConfigError> {
        self.get(key).ok_or_else(|| {
            bad(
                key,
                format!("required key missing from section [{}]", self.name),
            )
        })
    }

    fn reject_unused(&self) -> Result<(), ConfigError> {
        for (i, e) in self.entries.iter().enumerate() {
            if !self.used[i] {
                return Err(ConfigError::UnknownKey {
                    key: format!("{}.{}", e.section, e.key),
                    line: e.line,
                });
            }
        }
        Ok(())
    }
}

fn opt_f64(sec: &mut Section, key: &str) -> Result<Option<f64>, ConfigError> {
    sec.get(key).map(|v| parse_f64(key, v)).transpose()
}

/// Default scan window per order, bracketing the fold the truncated-window
/// predicate actually exhibits.
fn default_scan_window(m: usize) -> (f64, f64) {
    match m {
        1 => (1.5, 2.5),
        2 => (1.5, 2.5),
        3 => (2.5, 3.5),
        4 => (3.3, 4.3),
        5 => (4.2, 5.2),
        _ => (0.5, m as f64 + 1.5),
    }
}

/// Validate entries (config file plus inline overrides already appended)
/// against the command's key set.
pub fn build_config(
    command: Command,
    entries: &[Entry],
    cli_out: Option<PathBuf>,
    cli_jobs: Option<usize>,
    cli_seed: Option<u64>,
) -> Result<RunConfig, ConfigError> {
    let mut warnings = Vec::new();

    let mut run = Section::new("run", entries);
    if let Some(c) = run.get("command") {
        let named = Command::from_name(c)
            .ok_or_else(|| bad("command", format!("`{c}` is not a known command")))?;
        if named != command {
            return Err(bad(
                "command",
                format!(
                    "config says `{}` but the command line says `{}`",
                    named.name(),
                    command.name()
                ),
            ));
        }
    }
    let out_dir = cli_out
        .or_else(|| std::env::var_os("KPP_OUT").map(PathBuf::from))
        .or_else(|| run.get("out").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("kpp-out"));
    let jobs = match cli_jobs {
        Some(j) => j,
        None => run.get("jobs").map(|v| parse_usize("jobs", v)).transpose()?.unwrap_or(1),
    };
    let jobs = jobs.max(1);
    let seed = match cli_seed {
        Some(s) => s,
        None => run
            .get("seed")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| bad("seed", format!("`{v}` is not a u64")))
            })
            .transpose()?
            .unwrap_or(0),
    };
    run.reject_unused()?;

    let mut sec = Section::new(command.name(), entries);
    let params = match command {
        Command::Roots => {
            let m = parse_usize("m", sec.require("m")?)?;
            let lambda = parse_f64("lambda", sec.require("lambda")?)?;
            let side = sec.get("side").unwrap_or("both").to_string();
            if !matches!(side.as_str(), "zero" | "one" | "both") {
                return Err(bad("side", format!("`{side}` is not zero|one|both")));
            }
            let tol = opt_f64(&mut sec, "tol")?.unwrap_or(1e-12);
            Params::Roots(RootsParams {
                m,
                lambda,
                side,
                tol,
            })
        }
        Command::Tw | Command::Sweep => {
            let m = parse_usize("m", sec.require("m")?)?;
            let key = if command == Command::Tw { "lambda" } else { "lambdas" };
            let raw = match sec.get(key) {
                Some(v) => v,
                // accept either spelling; the canonical one is per command
                None => sec.require(if command == Command::Tw { "lambdas" } else { "lambda" })?,
            };
            let lambdas = parse_lambda_list(key, raw)?;
            for &l in &lambdas {
                if l <= 0.0 {
                    warnings.push(format!(
                        "lambda = {l} requested: genuine wave speeds are positive, \
                         expect a non-converged outcome"
                    ));
                }
            }
            let h = opt_f64(&mut sec, "h")?;
            let left = opt_f64(&mut sec, "left")?;
            let right = opt_f64(&mut sec, "right")?;
            let plotdata = sec.get("plotdata").map(str::to_string);
            if let Some(p) = &plotdata {
                if !matches!(p.as_str(), "profiles" | "tail") {
                    return Err(bad("plotdata", format!("`{p}` is not profiles|tail")));
                }
            }
            if command == Command::Tw {
                let newton_tol = opt_f64(&mut sec, "tol")?;
                let guess = sec.get("guess").map(|v| parse_init("guess", v)).transpose()?;
                Params::Tw(TwParams {
                    m,
                    lambdas,
                    h,
                    left,
                    right,
                    newton_tol,
                    guess,
                    plotdata,
                })
            } else {
                Params::Sweep(SweepParams {
                    m,
                    lambdas,
                    h,
                    left,
                    right,
                    plotdata,
                })
            }
        }
        Command::ScanMax => {
            let m = parse_usize("m", sec.require("m")?)?;
            let (dlo, dhi) = default_scan_window(m);
            let lo = opt_f64(&mut sec, "lo")?.unwrap_or(dlo);
            let hi = opt_f64(&mut sec, "hi")?.unwrap_or(dhi);
            if !(lo < hi) {
                return Err(bad("lo", "scan needs lo < hi"));
            }
            let width_tol = opt_f64(&mut sec, "width_tol")?.unwrap_or(1e-3);
            if width_tol <= 0.0 {
                return Err(bad("width_tol", "must be positive"));
            }
            let h = opt_f64(&mut sec, "h")?;
            let left = opt_f64(&mut sec, "left")?;
            let right = opt_f64(&mut sec, "right")?;
            Params::ScanMax(ScanMaxParams {
                m,
                lo,
                hi,
                width_tol,
                h,
                left,
                right,
            })
        }
        Command::Evolve => {
            let m = parse_usize("m", sec.require("m")?)?;
            let t_final = opt_f64(&mut sec, "t_final")?.unwrap_or(100.0);
            if t_final <= 0.0 {
                return Err(bad("t_final", "must be positive"));
            }
            let snapshots = match sec.get("snapshots") {
                Some(v) => parse_lambda_list("snapshots", v)?,
                None => Vec::new(),
            };
            let u0 = match sec.get("u0") {
                Some(v) => parse_init("u0", v)?,
                None => InitKind::Heaviside,
            };
            Params::Evolve(EvolveParams {
                m,
                t_final,
                h: opt_f64(&mut sec, "h")?,
                window_a: opt_f64(&mut sec, "window_a")?,
                window_b: opt_f64(&mut sec, "window_b")?,
                dt_init: opt_f64(&mut sec, "dt_init")?,
                dt_max: opt_f64(&mut sec, "dt_max")?,
                step_tol: opt_f64(&mut sec, "step_tol")?,
                output_dt: opt_f64(&mut sec, "output_dt")?,
                snapshots,
                u0,
            })
        }
        Command::FitShift => {
            let input = PathBuf::from(sec.require("input")?);
            let window = match sec.get("window") {
                Some(v) => {
                    let parts: Vec<&str> = v.split(':').collect();
                    if parts.len() != 2 {
                        return Err(bad("window", format!("expected lo:hi, got `{v}`")));
                    }
                    (parse_f64("window", parts[0])?, parse_f64("window", parts[1])?)
                }
                None => (50.0, 500.0),
            };
            if !(window.0 < window.1) {
                return Err(bad("window", "needs lo < hi"));
            }
            Params::FitShift(FitShiftParams { input, window })
        }
        Command::Verify => {
            let manifest = sec.get("manifest").map(PathBuf::from);
            Params::Verify(VerifyParams { manifest })
        }
    };
    sec.reject_unused()?;

    // reject entries in sections that belong to neither [run] nor the command
    for e in entries {
        if e.section != "run" && e.section != command.name() {
            return Err(ConfigError::UnknownKey {
                key: format!("{}.{}", e.section, e.key),
                line: e.line,
            });
        }
    }

    let mut echo: Vec<(String, String)> = entries
        .iter()
        .map(|e| (format!("{}.{}", e.section, e.key), e.value.clone()))
        .collect();
    echo.push(("run.out".into(), out_dir.display().to_string()));
    echo.push(("run.jobs".into(), jobs.to_string()));
    echo.push(("run.seed".into(), seed.to_string()));
    echo.dedup();

    Ok(RunConfig {
        command,
        out_dir,
        jobs,
        seed,
        params,
        echo,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scans_sections_and_comments() {
        let text = "# header\n[run]\ncommand = tw\n\n[tw]\nm = 2\nlambda = 0.5 # speed\n";
        let e = scan_entries(text).unwrap();
        assert_eq!(e.len(), 3);
        assert_eq!(e[2].section, "tw");
        assert_eq!(e[2].value, "0.5");
        assert_eq!(e[2].line, 7);
    }

    #[test]
    fn parse_error_carries_line_and_column() {
        let err = scan_entries("[run]\ncommand = tw\n  what\n").unwrap_err();
        match err {
            ConfigError::Parse { line, column, .. } => {
                assert_eq!(line, 3);
                assert_eq!(column, 3);
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let e = scan_entries("[tw]\nm = 2\nlambda = 0.5\nbogus = 1\n").unwrap();
        let err = build_config(Command::Tw, &e, None, None, None).unwrap_err();
        match err {
            ConfigError::UnknownKey { key, line } => {
                assert_eq!(key, "tw.bogus");
                assert_eq!(line, 4);
            }
            other => panic!("wrong error: {other:?}"),
        }
    }

    #[test]
    fn lambda_range_expands_inclusively() {
        let l = parse_lambda_list("lambdas", "0.1:0.1:1.2").unwrap();
        assert_eq!(l.len(), 12);
        assert!((l[0] - 0.1).abs() < 1e-12);
        assert!((l[11] - 1.2).abs() < 1e-12);
    }

    #[test]
    fn negative_lambda_accepted_with_warning() {
        let e = scan_entries("[tw]\nm = 2\nlambda = -1\n").unwrap();
        let cfg = build_config(Command::Tw, &e, None, None, None).unwrap();
        assert_eq!(cfg.warnings.len(), 1);
    }

    #[test]
    fn command_mismatch_is_invalid() {
        let e = scan_entries("[run]\ncommand = roots\n[tw]\nm = 2\nlambda = 0.5\n").unwrap();
        assert!(build_config(Command::Tw, &e, None, None, None).is_err());
    }

    #[test]
    fn malformed_numeric_is_invalid() {
        let e = scan_entries("[tw]\nm = 2\nlambda = fast\n").unwrap();
        let err = build_config(Command::Tw, &e, None, None, None).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid { .. }));
    }
}
