use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use cel_core::canonical::{
    canonical_image, delta_lip_bound, gram_delta, interval_delta_closed_form,
    interval_delta_comparison, kappa_gram_comparison, lambda_lip_distance, snowflake_lift_lip,
    sphere_metrics_with,
};
use cel_core::counterexample::{
    build_counterexample, counterexample_suite, kal_doubling_profile, mass_scaling_dimension,
    GridRule,
};
use cel_core::embed::{
    embed_pipeline, project_search, quadruple_inequalities, schoenberg_test, sob1_best_l, Method,
    PipelineOptions, PointConfiguration,
};
use cel_core::gauge::{near_isometry_report, openness_transfer, perturb_to_target, wd_distance};
use cel_core::metric::validate_metric;
use cel_core::random::symmetric_noise;
use cel_core::separation::{canonical_constants, conjecture_hypotheses, separation_profile};
use cel_core::{fixtures, MetricMatrix, MetricMeasureSpace};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::error::CliError;
use crate::io::{self, Format};
use crate::report::{derive_seed, to_value, AnalysisReport};

#[derive(Debug, Parser)]
#[command(name = "cel", version, about = "Canonical embeddings of finite metric-measure spaces")]
pub struct Cli {
    /// Master seed; every randomized component derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Leave the timing block out of the report.
    #[arg(long, global = true)]
    pub no_timestamp: bool,

    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Directory for csv side tables.
    #[arg(long, global = true)]
    pub csv_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Space file (json or csv).
    #[arg(long, conflicts_with = "fixture", required_unless_present = "fixture")]
    pub input: Option<PathBuf>,

    /// Overrides the format implied by the file extension.
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Built-in space: p2, p3, t4, interval:N or a2:N_MAX.
    #[arg(long)]
    pub fixture: Option<FixtureSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FixtureSpec {
    P2,
    P3,
    T4,
    Interval(usize),
    A2(u32),
}

impl FromStr for FixtureSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let lower = s.to_ascii_lowercase();
        let (name, arg) = match lower.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (lower.as_str(), None),
        };
        let num = |what: &str| -> Result<usize, String> {
            arg.ok_or_else(|| format!("`{name}` needs {what}, e.g. `{name}:8`"))?
                .parse()
                .map_err(|_| format!("`{s}`: {what} must be a nonnegative integer"))
        };
        match name {
            "p2" => Ok(FixtureSpec::P2),
            "p3" => Ok(FixtureSpec::P3),
            "t4" => Ok(FixtureSpec::T4),
            "interval" => Ok(FixtureSpec::Interval(num("a point count")?)),
            "a2" => Ok(FixtureSpec::A2(num("a bump level")? as u32)),
            _ => Err(format!("unknown fixture `{s}` (expected p2, p3, t4, interval:N, a2:N)")),
        }
    }
}

impl FixtureSpec {
    fn build(&self) -> Result<MetricMeasureSpace, CliError> {
        Ok(match *self {
            FixtureSpec::P2 => fixtures::p2(),
            FixtureSpec::P3 => fixtures::p3(),
            FixtureSpec::T4 => fixtures::t4(),
            FixtureSpec::Interval(n) => cel_core::metric::build_interval_grid(n)?,
            FixtureSpec::A2(n) => {
                build_counterexample(n, cel_core::counterexample::dyadic_grid(n), 2.0)?.space
            }
        })
    }

    fn describe(&self) -> String {
        match self {
            FixtureSpec::P2 => "p2".into(),
            FixtureSpec::P3 => "p3".into(),
            FixtureSpec::T4 => "t4".into(),
            FixtureSpec::Interval(n) => format!("interval:{n}"),
            FixtureSpec::A2(n) => format!("a2:{n}"),
        }
    }
}

impl InputArgs {
    fn describe(&self) -> Value {
        match (&self.input, &self.fixture) {
            (_, Some(f)) => json!({ "fixture": f.describe() }),
            (Some(p), None) => json!({ "input": p.display().to_string() }),
            (None, None) => Value::Null,
        }
    }

    fn load_unchecked(&self) -> Result<MetricMeasureSpace, CliError> {
        match (&self.input, &self.fixture) {
            (_, Some(f)) => f.build(),
            (Some(p), None) => io::parse_space_unchecked(p, self.format),
            (None, None) => Err(CliError::usage("one of --input or --fixture is required")),
        }
    }

    fn load(&self) -> Result<MetricMeasureSpace, CliError> {
        match &self.fixture {
            Some(f) => f.build(),
            None => io::check_axioms(self.load_unchecked()?),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Metric axiom scan.
    Validate(InputArgs),
    /// Canonical image, ρ/θ/κ, the kernel Δ and Lipschitz-norm audits.
    Canonical {
        #[command(flatten)]
        input: InputArgs,
        /// Snowflake exponents in (0, 1) for the lift audit.
        #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,0.75")]
        s: Vec<f64>,
    },
    /// Separation profile, certificates and canonical constants.
    Separation(InputArgs),
    /// W_d, openness transfer and near-isometry diagnostics.
    Gauge {
        #[command(flatten)]
        input: InputArgs,
        /// Metric σ (space file; only distances are used). Defaults to the base metric.
        #[arg(long)]
        sigma: Option<PathBuf>,
        /// Metric φ to compare against σ.
        #[arg(long, conflicts_with = "target")]
        phi: Option<PathBuf>,
        /// Build φ as a seeded perturbation of σ with W_d(σ, φ) near this value.
        #[arg(long)]
        target: Option<f64>,
        /// Radius for the near-isometry threshold check.
        #[arg(long)]
        r_d: Option<f64>,
    },
    /// Classical scaling test and the embedding pipeline.
    Embed {
        #[command(flatten)]
        input: InputArgs,
        /// Target dimension N.
        #[arg(long)]
        dim: usize,
        #[arg(long, value_enum, default_value = "gaussian")]
        method: MethodArg,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Go through x ↦ Δ(d)(x, ·) instead of the canonical image.
        #[arg(long)]
        delta: bool,
    },
    /// Grid kernel on [0, 1] against its closed form.
    IntervalDelta {
        #[arg(long, default_value_t = 1000)]
        n: usize,
    },
    /// Suite over the mixed grid/bump space.
    Counterexample {
        #[arg(long, default_value_t = 2)]
        n_min: u32,
        #[arg(long, default_value_t = 4)]
        n_max: u32,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        /// `dyadic` (2^{n_max+1} + 1) or a fixed grid size.
        #[arg(long, default_value = "dyadic")]
        grid: GridArg,
        /// Exponent for the r^p·C(r) table.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Also project the deepest space's canonical image into this dimension.
        #[arg(long)]
        embed_dim: Option<usize>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Quadruple inequalities.
    Quadruple {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_delimiter = ',', default_value = "1.5,2,3")]
        p: Vec<f64>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Gaussian,
    Pca,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Gaussian => Method::Gaussian,
            MethodArg::Pca => Method::Pca,
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GridArg(pub GridRule);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("dyadic") {
            return Ok(GridArg(GridRule::Dyadic));
        }
        s.parse()
            .map(|g| GridArg(GridRule::Fixed(g)))
            .map_err(|_| format!("`{s}` is neither `dyadic` nor a grid size"))
    }
}

/// Where side tables go, if anywhere.
struct Tables<'a>(Option<&'a Path>);

impl Tables<'_> {
    fn write(&self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
        match self.0 {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
                io::write_table(&dir.join(name), header, &rows)
            }
            None => Ok(()),
        }
    }
}

fn num(v: f64) -> String {
    v.to_string()
}

/// Outcome of a command: the report, and a nonzero exit code for checks
/// that ran to completion but failed.
pub struct Outcome {
    pub report: AnalysisReport,
    pub exit_code: i32,
}

impl Outcome {
    fn ok(report: AnalysisReport) -> Self {
        Outcome { report, exit_code: 0 }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let tables = Tables(cli.csv_dir.as_deref());
    let mut outcome = match &cli.command {
        Command::Validate(input) => validate(input, cli.seed)?,
        Command::Canonical { input, s } => canonical(input, s, &tables)?,
        Command::Separation(input) => separation(input, &tables)?,
        Command::Gauge {
            input,
            sigma,
            phi,
            target,
            r_d,
        } => gauge(input, sigma.as_deref(), phi.as_deref(), *target, *r_d, cli.seed)?,
        Command::Embed {
            input,
            dim,
            method,
            trials,
            delta,
        } => embed(input, *dim, (*method).into(), *trials, *delta, cli.seed, &tables)?,
        Command::IntervalDelta { n } => interval_delta(*n)?,
        Command::Counterexample {
            n_min,
            n_max,
            m,
            grid,
            p,
            embed_dim,
            trials,
        } => counterexample(*n_min, *n_max, *m, grid.0, *p, *embed_dim, *trials, cli.seed, &tables)?,
        Command::Quadruple { input, p } => quadruple(input, p, cli.seed)?,
    };
    let params = outcome.report.parameters.as_object_mut().expect("parameters are an object");
    params.insert("seed".into(), json!(cli.seed));
    if !cli.no_timestamp {
        outcome.report.stamp(started);
    }
    Ok(outcome)
}

fn with_input(input: &InputArgs, extra: Value) -> Value {
    let mut p = input.describe();
    if let (Some(obj), Value::Object(more)) = (p.as_object_mut(), extra) {
        obj.extend(more);
    }
    p
}

fn validate(input: &InputArgs, seed: u64) -> Result<Outcome, CliError> {
    let space = input.load_unchecked()?;
    let mode = io::validation_mode(space.n(), derive_seed(seed, "validate"));
    let report = validate_metric(space.distances(), mode);
    let exit_code = if report.passed { 0 } else { 2 };
    let results = json!({
        "n": space.n(),
        "total_mass": space.total_mass(),
        "validation": to_value(&report),
    });
    Ok(Outcome {
        report: AnalysisReport::new("validate", with_input(input, json!({})), results),
        exit_code,
    })
}

fn canonical(input: &InputArgs, s_values: &[f64], tables: &Tables) -> Result<Outcome, CliError> {
    let space = input.load()?;
    let n = space.n();
    let image = canonical_image(&space);
    let kernel = gram_delta(&space);
    let sphere = sphere_metrics_with(&space, &kernel)?;

    // ‖λ_d(x) − λ_d(y)‖_Lip against max{2, d(x, y)}
    let mut lambda_max_error = 0.0_f64;
    let mut lambda_worst = (0, 0);
    for x in 0..n {
        for y in x + 1..n {
            let err = (lambda_lip_distance(&space, x, y)? - space.d(x, y).max(2.0)).abs();
            if err > lambda_max_error {
                lambda_max_error = err;
                lambda_worst = (x, y);
            }
        }
    }
    let lifts = s_values
        .iter()
        .map(|&s| Ok(json!({ "s": s, "lift": to_value(&snowflake_lift_lip(&space, s)?) })))
        .collect::<Result<Vec<_>, CliError>>()?;
    let delta_bound = if n >= 2 { Some(to_value(&delta_lip_bound(&space)?)) } else { None };
    let kappa_gram = if n >= 3 { Some(to_value(&kappa_gram_comparison(&space)?)) } else { None };

    let mut rows = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            rows.push(vec![
                x.to_string(),
                y.to_string(),
                num(space.d(x, y)),
                num(sphere.rho.get(x, y)),
                num(sphere.theta.get(x, y)),
                num(sphere.kappa.get(x, y)),
                num(kernel.gram.get(x, y)),
            ]);
        }
    }
    tables.write("canonical_pairs.csv", &["x", "y", "d", "rho", "theta", "kappa", "delta"], rows)?;

    let results = json!({
        "n": n,
        "labels": space.labels(),
        "s": kernel.s_min,
        "s_pair": kernel.s_min_pair,
        "norms": image.norms,
        "coords": to_value(&image.coords),
        "delta": to_value(&kernel.gram),
        "rho": to_value(&sphere.rho),
        "theta": to_value(&sphere.theta),
        "kappa": to_value(&sphere.kappa),
        "sandwich": to_value(&sphere.sandwich),
        "lambda_identity": { "max_error": lambda_max_error, "worst_pair": lambda_worst },
        "snowflake_lifts": lifts,
        "delta_lip_bound": delta_bound,
        "kappa_gram": kappa_gram,
    });
    let params = with_input(input, json!({ "s": s_values }));
    Ok(Outcome::ok(AnalysisReport::new("canonical", params, results)))
}

fn separation(input: &InputArgs, tables: &Tables) -> Result<Outcome, CliError> {
    let space = input.load()?;
    let profile = separation_profile(&space)?;
    let constants = canonical_constants(&space)?;
    let conjecture = conjecture_hypotheses(&space)?;
    let ell_sq = constants.iota_d.lower * constants.iota_d.lower;
    let bridge_ok = profile.breakpoints.iter().all(|b| ell_sq >= b.merit() - 1e-12);
    tables.write(
        "separation_profile.csv",
        &["epsilon", "c", "merit", "x", "y"],
        profile
            .breakpoints
            .iter()
            .map(|b| {
                vec![
                    num(b.epsilon),
                    num(b.c),
                    num(b.merit()),
                    b.witness_pair.0.to_string(),
                    b.witness_pair.1.to_string(),
                ]
            })
            .collect(),
    )?;
    let results = json!({
        "profile": to_value(&profile),
        "best_certificate": to_value(&profile.best.certificate()),
        "best_merit": profile.best.merit(),
        "canonical_constants": to_value(&constants),
        "ell_squared": ell_sq,
        "bridge_holds": bridge_ok,
        "conjecture_hypotheses": to_value(&conjecture),
    });
    Ok(Outcome::ok(AnalysisReport::new("separation", with_input(input, json!({})), results)))
}

fn load_metric(path: &Path, n: usize, what: &str) -> Result<MetricMatrix, CliError> {
    let other = io::parse_space(path, None)?;
    if other.n() != n {
        return Err(CliError::input(format!(
            "{what} has {} points but the base space has {n}",
            other.n()
        )));
    }
    Ok(other.distances().clone())
}

fn gauge(
    input: &InputArgs,
    sigma_path: Option<&Path>,
    phi_path: Option<&Path>,
    target: Option<f64>,
    r_d: Option<f64>,
    seed: u64,
) -> Result<Outcome, CliError> {
    let space = input.load()?;
    let n = space.n();
    let d = space.distances();
    let sigma = match sigma_path {
        Some(p) => load_metric(p, n, "sigma")?,
        None => d.clone(),
    };
    let mut perturbation = Value::Null;
    let phi = match (phi_path, target) {
        (Some(p), _) => Some(load_metric(p, n, "phi")?),
        (None, Some(t)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "gauge"));
            let noise = symmetric_noise(n, &mut rng, |r| r.random_range(-1.0..=1.0));
            let p = perturb_to_target(d, &sigma, &noise, t, 0.95)?;
            perturbation = json!({ "alpha": p.alpha, "wd": p.wd });
            Some(p.phi)
        }
        (None, None) => None,
    };
    let sigma_space = space.with_distances(sigma.clone())?;
    let cert = separation_profile(&sigma_space)?.best.certificate();
    let mut results = json!({
        "sigma_certificate": to_value(&cert),
        "near_isometry": to_value(&near_isometry_report(&space, r_d)?),
        "perturbation": perturbation,
    });
    if let Some(phi) = &phi {
        let wd = wd_distance(d, &sigma, phi)?;
        results["wd"] = json!({ "value": wd.value, "witness": wd.witness });
        results["openness"] = match openness_transfer(&space, &sigma, &cert, phi) {
            Ok(t) => json!({ "accepted": true, "transfer": to_value(&t) }),
            Err(cel_core::Error::OutsideRadius { measured, required }) => {
                json!({ "accepted": false, "measured": measured, "required": required })
            }
            Err(e) => return Err(e.into()),
        };
    }
    let params = with_input(
        input,
        json!({
            "sigma": sigma_path.map(|p| p.display().to_string()),
            "phi": phi_path.map(|p| p.display().to_string()),
            "target": target,
            "r_d": r_d,
        }),
    );
    Ok(Outcome::ok(AnalysisReport::new("gauge", params, results)))
}

fn embed(
    input: &InputArgs,
    dim: usize,
    method: Method,
    trials: usize,
    through_delta: bool,
    seed: u64,
    tables: &Tables,
) -> Result<Outcome, CliError> {
    let space = input.load()?;
    let spectrum = schoenberg_test(space.distances());
    let opts = PipelineOptions {
        method,
        trials,
        seed: derive_seed(seed, "embed"),
        through_delta,
    };
    let pipeline = embed_pipeline(&space, dim, opts)?;
    tables.write(
        "embed_history.csv",
        &["trial", "best_distortion"],
        pipeline
            .projection_stage
            .history
            .iter()
            .enumerate()
            .map(|(t, v)| vec![t.to_string(), num(*v)])
            .collect(),
    )?;
    let results = json!({
        "schoenberg": to_value(&spectrum),
        "pipeline": to_value(&pipeline),
    });
    let params = with_input(
        input,
        json!({
            "dim": dim,
            "method": to_value(&method),
            "trials": trials,
            "delta": through_delta,
            "projection_seed": opts.seed,
        }),
    );
    Ok(Outcome::ok(AnalysisReport::new("embed", params, results)))
}

fn interval_delta(n: usize) -> Result<Outcome, CliError> {
    let cmp = interval_delta_comparison(n)?;
    let spots = [(1.0, 0.0), (0.0, 0.0), (0.5, 0.5)]
        .iter()
        .map(|&(x, y)| Ok(json!({ "x": x, "y": y, "closed_form": interval_delta_closed_form(x, y)? })))
        .collect::<Result<Vec<_>, CliError>>()?;
    let results = json!({ "comparison": to_value(&cmp), "spot_values": spots });
    let exit_code = if cmp.holds { 0 } else { 3 };
    Ok(Outcome {
        report: AnalysisReport::new("interval-delta", json!({ "n": n }), results),
        exit_code,
    })
}

#[allow(clippy::too_many_arguments)]
fn counterexample(
    n_min: u32,
    n_max: u32,
    m: f64,
    grid: GridRule,
    p: f64,
    embed_dim: Option<usize>,
    trials: usize,
    seed: u64,
    tables: &Tables,
) -> Result<Outcome, CliError> {
    if n_min == 0 || n_min > n_max {
        return Err(CliError::usage(format!("need 1 ≤ n-min ≤ n-max, got {n_min}..{n_max}")));
    }
    let levels: Vec<u32> = (n_min..=n_max).collect();
    let suite = counterexample_suite(&levels, grid, m)?;
    let deepest = build_counterexample(n_max, grid.size(n_max), m)?;
    let kal = kal_doubling_profile(&deepest.space, p, n_max as usize + 2)?;
    let mass = mass_scaling_dimension(&deepest.space, deepest.zero_index())?;
    let projection = match embed_dim {
        Some(k) => {
            let points = PointConfiguration::canonical(&deepest.space);
            let proj = project_search(&points, k, trials, derive_seed(seed, "counterexample"), Method::Gaussian)?;
            to_value(&proj.report)
        }
        None => Value::Null,
    };

    let mut suite_rows = Vec::new();
    let mut packing_rows = Vec::new();
    for row in &suite.rows {
        suite_rows.push(vec![
            row.n_max.to_string(),
            row.grid.to_string(),
            row.points.to_string(),
            num(row.iota_d.lower),
            num(row.iota_d.upper),
            num(row.inftwo.min_ratio),
            num(row.inftwo.max_ratio),
        ]);
        for e in &row.packing {
            packing_rows.push(vec![
                "a2".into(),
                row.n_max.to_string(),
                e.level.to_string(),
                num(e.radius),
                e.packing_lower.to_string(),
                e.greedy_cover.to_string(),
            ]);
        }
    }
    for e in &suite.control.packing {
        packing_rows.push(vec![
            "interval".into(),
            String::new(),
            e.level.to_string(),
            num(e.radius),
            e.packing_lower.to_string(),
            e.greedy_cover.to_string(),
        ]);
    }
    tables.write(
        "counterexample_suite.csv",
        &["n_max", "grid", "points", "ell", "lip", "inftwo_min", "inftwo_max"],
        suite_rows,
    )?;
    tables.write(
        "counterexample_packing.csv",
        &["space", "n_max", "level", "radius", "packing_lower", "greedy_cover"],
        packing_rows,
    )?;
    tables.write(
        "kal_doubling.csv",
        &["radius", "cover", "worst_center", "scaled"],
        kal.iter()
            .map(|r| vec![num(r.radius), r.cover.to_string(), r.worst_center.to_string(), num(r.scaled)])
            .collect(),
    )?;

    let results = json!({
        "suite": to_value(&suite),
        "kal_doubling": to_value(&kal),
        "mass_scaling_at_zero": to_value(&mass),
        "projection": projection,
    });
    let params = json!({
        "n_min": n_min,
        "n_max": n_max,
        "m": m,
        "grid": to_value(&grid),
        "p": p,
        "embed_dim": embed_dim,
        "trials": trials,
    });
    Ok(Outcome::ok(AnalysisReport::new("counterexample", params, results)))
}

fn quadruple(input: &InputArgs, ps: &[f64], seed: u64) -> Result<Outcome, CliError> {
    let space = input.load()?;
    let sampling = derive_seed(seed, "quadruple");
    let sob2 = ps
        .iter()
        .map(|&p| Ok(to_value(&quadruple_inequalities(space.distances(), p, Some(sampling))?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let sob1 = sob1_best_l(&PointConfiguration::canonical(&space), Some(sampling))?;
    let results = json!({ "sob2": sob2, "sob1_canonical": to_value(&sob1) });
    let params = with_input(input, json!({ "p": ps }));
    Ok(Outcome::ok(AnalysisReport::new("quadruple", params, results)))
}
