//! Config-driven experiment runner.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::coefficients::{builtin_fields, manufacture_from_field, MatrixField, BUILTIN_COEFFICIENTS};
use crate::doubling::{boundary_vanishing_check, doubling_report, growth_parameter, vanishing_order_estimate};
use crate::error::{Error, Result};
use crate::flatten::{transform_solution, C11Domain, FlatteningMap};
use crate::frequency::{
    build_profile, check_aux_inequalities, check_h_derivative, check_monotonicity, check_second_variation,
    check_trace_inequality, FrequencyConfig, InequalityLedger,
};
use crate::linalg::{self, central_diff};
use crate::quadrature::QuadratureCounts;
use crate::solutions::{analytic_solution, solve_robin_fem, Mesh, Provenance, Solution, ANALYTIC_CATALOGUE};

/// Configurations shipped with the binary.
pub const BUILTIN_CONFIGS: &[(&str, &str)] = &[
    ("fem-coshcos", include_str!("../../configs/fem-coshcos.toml")),
    ("homogeneous-k2", include_str!("../../configs/homogeneous-k2.toml")),
    ("robin-cosexp-k1", include_str!("../../configs/robin-cosexp-k1.toml")),
    ("robin-exponential-4", include_str!("../../configs/robin-exponential-4.toml")),
];

/// Checks performed by a run.
pub const CHECKS: &[(&str, &str)] = &[
    ("H-derivative", "H' against (2 alpha + d)/r H + I/((alpha + 1) r)"),
    ("I1-bound", "I1 <= 2 I + C (M r^2 + alpha r + M_eta^2 r) H"),
    ("Ntilde-monotone", "corrected frequency nondecreasing on the grid"),
    ("almost-monotonicity", "N' >= -C eps~/r N - C eps~/r (M r + alpha + M_eta^2)"),
    ("boundary-doubling", "ratios of boundary masses over r and 2r"),
    ("corollary-bound", "N(r) bounded by N(1), M, M_eta and the Dini integral"),
    ("doubling", "half-ball mass ratios over rho and kappa rho"),
    ("majorant-V", "|I2| majorant <= C M r^2 H / lambda"),
    ("majorant-eta", "|I3| majorant plus the D_T eta term"),
    ("poincare", "weighted Poincare inequality"),
    ("sandwich-lower", "(tau^2 - rho^2)^alpha h~(rho) <= H(tau)"),
    ("sandwich-upper", "H(rho) <= rho^(2 alpha) h~(rho)"),
    ("second-variation", "lower bound for I'"),
    ("trace", "boundary trace bound over a delta sweep"),
    ("vanishing-order", "slope of log mass against log r"),
];

/// `alpha = 2.0` or `alpha = "auto"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaSpec {
    Value(f64),
    Auto,
}

impl<'de> Deserialize<'de> for AlphaSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Value(f64),
            Word(String),
        }
        match Raw::deserialize(d)? {
            Raw::Value(v) => Ok(AlphaSpec::Value(v)),
            Raw::Word(w) if w == "auto" => Ok(AlphaSpec::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!("expected a number or \"auto\", got \"{w}\""))),
        }
    }
}

fn default_alpha() -> AlphaSpec {
    AlphaSpec::Value(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    Linear,
    Geometric,
}

/// An explicit list or `{ start, stop, count, spacing }`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    List(Vec<f64>),
    Range {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default = "default_spacing")]
        spacing: Spacing,
    },
}

fn default_spacing() -> Spacing {
    Spacing::Linear
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::List(ref v) => Ok(v.clone()),
            GridSpec::Range {
                start,
                stop,
                count,
                spacing,
            } => {
                if count == 0 {
                    return Ok(Vec::new());
                }
                if count == 1 {
                    return Ok(vec![start]);
                }
                if spacing == Spacing::Geometric && !(start > 0.0 && stop > 0.0) {
                    return Err(Error::Config("geometric grid needs positive end points".into()));
                }
                Ok((0..count)
                    .map(|k| {
                        let s = k as f64 / (count - 1) as f64;
                        match spacing {
                            Spacing::Linear => start + (stop - start) * s,
                            Spacing::Geometric => start * (stop / start).powf(s),
                        }
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    #[default]
    Analytic,
    Fem,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default)]
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub name: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

/// Curved chart `x₂ > curvature · x₁²` on which the solution is posed
/// before being flattened.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlattenSpec {
    pub curvature: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub solution: SolutionSpec,
    pub coefficients: Option<CoefficientSpec>,
    pub flatten: Option<FlattenSpec>,
    #[serde(default = "default_alpha")]
    pub alpha: AlphaSpec,
    pub r_grid: GridSpec,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub quadrature: QuadratureCounts,
    /// Refinement level of the half-disk mesh for FEM solutions.
    #[serde(default = "default_level")]
    pub fem_level: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Seeds the sample points of the gradient check.
    #[serde(default)]
    pub seed: u64,
}

fn default_kappa() -> f64 {
    4.0
}

fn default_level() -> usize {
    4
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Parse TOML; errors name the offending key path.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().trim().to_string();
            if path == "." {
                Error::Config(msg)
            } else {
                Error::Config(format!("{path}: {msg}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn builtin(name: &str) -> Result<Self> {
        let (_, text) = BUILTIN_CONFIGS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::UnknownName(name.to_string()))?;
        Self::from_toml(text)
    }

    pub fn validate(&self) -> Result<()> {
        let grid = self.r_grid.points()?;
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if let AlphaSpec::Value(a) = self.alpha {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(Error::Config(format!("alpha: must be at least 1, got {a}")));
            }
        }
        if !(self.kappa > 2.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!("kappa: must exceed 2, got {}", self.kappa)));
        }
        let q = self.quadrature;
        if q.n_rad == 0 || q.n_ang == 0 || q.n_rad > 1024 || q.n_ang > 4096 {
            return Err(Error::Config(format!("quadrature: counts out of range: {q:?}")));
        }
        if self.fem_level > 9 {
            return Err(Error::Config(format!("fem_level: must be at most 9, got {}", self.fem_level)));
        }
        if self.solution.source == Source::Analytic && self.coefficients.is_some() && self.flatten.is_none() {
            return Err(Error::Config(
                "coefficients: analytic solutions carry their own coefficients".into(),
            ));
        }
        if self.flatten.is_some() && self.solution.source == Source::Fem {
            return Err(Error::Config("flatten: only analytic fields can be flattened".into()));
        }
        FrequencyConfig::new(1.0, grid).validate()
    }
}

/// Build the solution described by the config.
pub fn build_solution(cfg: &ExperimentConfig) -> Result<Solution<2>> {
    let base = analytic_solution(&cfg.solution.name, &cfg.solution.params)?;
    let coefficients = |fallback: &Solution<2>| match &cfg.coefficients {
        Some(c) => builtin_fields::<2>(&c.name, &c.params),
        None => Ok(fallback.coefficients.clone()),
    };
    if let Some(fl) = &cfg.flatten {
        let dom = C11Domain::parabola(fl.curvature, fl.radius)?;
        let a = match &cfg.coefficients {
            Some(c) => builtin_fields::<2>(&c.name, &c.params)?.a_field().clone(),
            None => MatrixField::identity(),
        };
        let cs = manufacture_from_field(
            format!("{}-on-chart", base.name),
            base.field().clone(),
            a,
            dom.region(),
            None,
        )?;
        let curved = Solution::new(base.name.clone(), base.field().clone(), Provenance::Analytic, cs)
            .with_measured_residual(cfg.quadrature)?;
        let map = FlatteningMap::new(&dom, &curved.coefficients)?;
        log::info!("flattening map: c0 = {}, C0 = {}", map.c0, map.big_c0);
        return transform_solution(&curved, &map);
    }
    match cfg.solution.source {
        Source::Analytic => Ok(base),
        Source::Fem => {
            let cs = coefficients(&base)?;
            let mesh = Mesh::half_disk(1.0, cfg.fem_level)?;
            solve_robin_fem(&cs, &mesh, |x| base.value_grad(x).0)
        }
    }
}

/// Everything a run produces, held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub profile_csv: String,
    pub ledger_csv: String,
    pub doubling_csv: String,
    pub vanishing_csv: String,
    pub summary: String,
    pub violations: Vec<String>,
}

pub const TRACE_DELTAS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];

/// Profile, ledger, doubling and vanishing-order reports for one solution.
pub fn analyse(sol: &Solution<2>, cfg: &ExperimentConfig) -> Result<RunReport> {
    let counts = cfg.quadrature;
    let cs = &sol.coefficients;
    let r_max = cs.region.r_max();
    let grid = cfg.r_grid.points()?;
    if let Some(&r) = grid.iter().find(|&&r| r > r_max) {
        return Err(Error::Config(format!("r_grid: radius {r} exceeds the domain radius {r_max}")));
    }
    let alpha = match cfg.alpha {
        AlphaSpec::Value(a) => a,
        AlphaSpec::Auto => growth_parameter(sol, counts)?,
    };
    log::info!("{}: alpha = {alpha}", sol.name);
    let fc = FrequencyConfig::new(alpha, grid.clone()).with_counts(counts);
    let profile = build_profile(sol, &fc)?;

    let mut ledger = InequalityLedger::default();
    let (h_entry, h_gap) = check_h_derivative(&profile, cs);
    ledger.push(h_entry);
    ledger.extend(check_aux_inequalities(&profile, cs));
    ledger.push(check_trace_inequality(&profile, &TRACE_DELTAS));
    let mono = check_monotonicity(&profile, cs)?;
    ledger.push(mono.entry.clone());
    ledger.push(mono.corollary.clone());
    let (sv_entry, sv_gap) = check_second_variation(&profile, cs);
    ledger.push(sv_entry);

    let rho_grid: Vec<f64> = grid.iter().copied().filter(|r| cfg.kappa * r <= r_max).collect();
    let doubling = if rho_grid.is_empty() {
        None
    } else {
        let rep = doubling_report(sol, &rho_grid, cfg.kappa, counts)?;
        ledger.push(rep.sandwich_upper.clone());
        ledger.push(rep.sandwich_lower.clone());
        Some(rep)
    };
    let top = r_max.min(1.0);
    let vgrid: Vec<f64> = (0..9).map(|k| top * 0.01f64.powf(1.0 - k as f64 / 8.0)).collect();
    let vanishing = vanishing_order_estimate(sol, &vgrid, counts).ok();
    let bgrid: Vec<f64> = grid.iter().copied().filter(|r| 2.0 * r <= r_max).collect();
    let boundary = if bgrid.is_empty() {
        None
    } else {
        boundary_vanishing_check(sol, &bgrid, None, counts).ok()
    };

    let mut violations: Vec<String> = ledger
        .entries
        .iter()
        .filter(|e| !e.holds())
        .map(|e| e.name.clone())
        .collect();
    if !mono.monotone {
        violations.push("Ntilde-monotone".into());
    }
    if let Some(rep) = &doubling {
        if !rep.sandwich_holds() && !violations.iter().any(|v| v.starts_with("sandwich")) {
            violations.push("sandwich".into());
        }
    }

    let mut s = String::new();
    let _ = writeln!(s, "solution = {}", sol.name);
    let _ = writeln!(s, "provenance = {:?}", sol.provenance);
    let _ = writeln!(s, "coefficients = {}", cs.name);
    let _ = writeln!(s, "residual = {:?}", sol.residual);
    let _ = writeln!(s, "alpha = {alpha:?}");
    let _ = writeln!(s, "N(1) = {:?}", profile.n_at_one);
    let _ = writeln!(s, "H_derivative_max_relative_residual = {h_gap:e}");
    let _ = writeln!(s, "second_variation_max_relative_gap = {sv_gap:e}");
    let _ = writeln!(s, "C_monotonicity = {:?}", mono.c);
    let _ = writeln!(s, "C_corollary = {:?}", mono.corollary_c);
    let _ = writeln!(s, "Ntilde_monotone = {}", mono.monotone);
    for e in &ledger.entries {
        let _ = writeln!(s, "C[{}] = {:?} (violations: {})", e.name, e.min_c, e.violations.len());
    }
    match &doubling {
        Some(rep) => {
            let _ = writeln!(s, "alpha_star = {:?}", rep.alpha_star);
            let _ = writeln!(s, "doubling_exponent = {:?}", rep.exponent);
            let _ = writeln!(s, "doubling_prefactor = {:?}", rep.prefactor);
        }
        None => {
            let _ = writeln!(s, "doubling = skipped (kappa * rho exceeds the domain for every grid radius)");
        }
    }
    match &vanishing {
        Some(v) => {
            let _ = writeln!(s, "vanishing_order = {:?}", v.order);
            let _ = writeln!(s, "vanishing_fit_residual = {:?}", v.fit_residual);
        }
        None => {
            let _ = writeln!(s, "vanishing_order = unavailable");
        }
    }
    if let Some(b) = &boundary {
        let _ = writeln!(s, "boundary_doubling_exponent = {:?}", b.exponent);
    }
    if violations.is_empty() {
        let _ = writeln!(s, "status = ok");
    } else {
        let _ = writeln!(s, "status = violations: {}", violations.join(", "));
    }

    Ok(RunReport {
        profile_csv: profile.to_csv(),
        ledger_csv: ledger.to_csv(),
        doubling_csv: doubling.map(|d| d.to_csv()).unwrap_or_default(),
        vanishing_csv: vanishing.map(|v| v.to_csv()).unwrap_or_default(),
        summary: s,
        violations,
    })
}

const PLOT_SCRIPT: &str = "set datafile separator ','
set key autotitle columnhead
set xlabel 'r'
set terminal pngcairo size 900,600
set output 'frequency.png'
plot 'profile.csv' using 1:14 with linespoints title 'N', \\
     '' using 1:18 with linespoints title 'Ntilde'
set output 'height.png'
set logscale y
plot 'profile.csv' using 1:3 with linespoints title 'H'
";

/// Write every report file into `dir`.
pub fn write_report(report: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("profile.csv"), &report.profile_csv)?;
    std::fs::write(dir.join("ledger.csv"), &report.ledger_csv)?;
    std::fs::write(dir.join("doubling.csv"), &report.doubling_csv)?;
    std::fs::write(dir.join("vanishing.csv"), &report.vanishing_csv)?;
    std::fs::write(dir.join("summary.txt"), &report.summary)?;
    std::fs::write(dir.join("plot.gp"), PLOT_SCRIPT)?;
    Ok(())
}

/// Largest relative gap between `Du` and central differences of `u` at
/// seeded random points of the domain.
pub fn gradient_consistency(sol: &Solution<2>, seed: u64, count: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_max = sol.coefficients.region.r_max().min(1.0);
    let mut worst: f64 = 0.0;
    let mut taken = 0;
    while taken < count {
        let x = [rng.gen_range(-r_max..r_max), rng.gen_range(0.0..r_max)];
        let h = 1e-4;
        let inside = |p: &[f64; 2]| sol.coefficients.region.contains(p) && p[1] - 2.0 * h >= 0.0;
        if linalg::norm(&x) > r_max * (1.0 - 1e-3) || !inside(&x) {
            continue;
        }
        taken += 1;
        let (_, du) = sol.value_grad(&x);
        let u = |p: &[f64; 2]| sol.value_grad(p).0;
        let fd = [central_diff(&u, &x, 0, h), central_diff(&u, &x, 1, h)];
        let scale = linalg::norm(&du).max(1e-12);
        worst = worst.max(linalg::norm(&[fd[0] - du[0], fd[1] - du[1]]) / scale);
    }
    worst
}

/// Outcome of a run, before it is mapped to an exit code.
#[derive(Debug)]
pub enum Outcome {
    Clean,
    Violations(Vec<String>),
}

/// Run one experiment and write its reports unless `check_only`.
pub fn run_experiment(cfg: &ExperimentConfig, output_dir: Option<&Path>, check_only: bool) -> Result<Outcome> {
    let dir = output_dir.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone());
    let result = build_solution(cfg).and_then(|sol| {
        sol.require_solution()?;
        let report = analyse(&sol, cfg)?;
        Ok((sol, report))
    });
    let (sol, report) = match result {
        Ok(v) => v,
        Err(e) => {
            if !check_only && !is_validation(&e) {
                std::fs::create_dir_all(&dir)?;
                std::fs::write(dir.join("summary.txt"), format!("status = failed: {e}\n"))?;
            }
            return Err(e);
        }
    };
    if check_only {
        let mut violations = report.violations.clone();
        if sol.provenance == Provenance::Analytic {
            let gap = gradient_consistency(&sol, cfg.seed, 64);
            println!("gradient_consistency = {gap:e}");
            if gap > 1e-5 {
                violations.push("gradient-consistency".into());
            }
        }
        print!("{}", report.summary);
        return Ok(if violations.is_empty() {
            Outcome::Clean
        } else {
            Outcome::Violations(violations)
        });
    }
    write_report(&report, &dir)?;
    log::info!("reports written to {}", dir.display());
    Ok(if report.violations.is_empty() {
        Outcome::Clean
    } else {
        Outcome::Violations(report.violations)
    })
}

fn is_validation(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::EmptyGrid | Error::InvalidParameter(_) | Error::UnknownName(_)
    )
}

/// Exit status for a finished run.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(Outcome::Clean) => 0,
        Ok(Outcome::Violations(_)) => 3,
        Err(e) if is_validation(e) => 1,
        Err(_) => 2,
    }
}

/// Alphabetized listing of solutions, coefficient sets, checks and configs.
pub fn list_catalogue(machine: bool) -> String {
    let sections: [(&str, Vec<(&str, &str)>); 4] = [
        ("solutions", ANALYTIC_CATALOGUE.to_vec()),
        ("coefficients", BUILTIN_COEFFICIENTS.to_vec()),
        ("checks", CHECKS.to_vec()),
        ("configs", BUILTIN_CONFIGS.iter().map(|(n, _)| (*n, "")).collect()),
    ];
    let mut s = String::new();
    for (title, mut items) in sections {
        items.sort_by(|a, b| a.0.cmp(b.0));
        if !machine {
            let _ = writeln!(s, "{title}:");
        }
        for (name, desc) in items {
            if machine {
                let _ = writeln!(s, "{name}");
            } else if desc.is_empty() {
                let _ = writeln!(s, "  {name}");
            } else {
                let _ = writeln!(s, "  {name:<22} {desc}");
            }
        }
    }
    s
}

#[derive(Debug, Parser)]
#[command(name = "robin-ucp", version, about = "Frequency-function and doubling experiments for Robin problems")]
pub struct Args {
    /// TOML experiment file.
    #[arg(short, long, conflicts_with = "builtin")]
    pub config: Option<PathBuf>,
    /// Name of a shipped configuration (see --list-catalogue).
    #[arg(short, long)]
    pub builtin: Option<String>,
    /// Overrides `output_dir` from the config.
    #[arg(short, long)]
    pub output_dir: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(short, long)]
    pub workers: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[arg(long)]
    pub list_catalogue: bool,
    /// One name per line for --list-catalogue.
    #[arg(long, requires = "list_catalogue")]
    pub machine: bool,
    /// Run the checks and print the summary without writing reports.
    #[arg(long)]
    pub check_only: bool,
}

/// Entry point of the binary; returns the process exit code.
pub fn main_entry() -> i32 {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if args.list_catalogue {
        print!("{}", list_catalogue(args.machine));
        return 0;
    }
    if let Some(n) = args.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return 2;
        }
    }
    let cfg = match (&args.config, &args.builtin) {
        (Some(path), _) => std::fs::read_to_string(path)
            .map_err(Error::from)
            .and_then(|text| ExperimentConfig::from_toml(&text)),
        (None, Some(name)) => ExperimentConfig::builtin(name),
        (None, None) => Err(Error::Config("pass --config FILE or --builtin NAME".into())),
    };
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let result = run_experiment(&cfg, args.output_dir.as_deref(), args.check_only);
    match &result {
        Err(e) => eprintln!("error: {e}"),
        Ok(Outcome::Violations(v)) => eprintln!("inequality violations: {}", v.join(", ")),
        Ok(Outcome::Clean) => {}
    }
    exit_code(&result)
}
