mod presets;
mod report;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cyclescope::continuation::{continue_cycle, saddle_node_threshold, ContinuationError};
use cyclescope::cycles::{find_cycles_with, partition, CycleKind, CycleOptions, CyclesError, HYPERBOLIC_TOL};
use cyclescope::equation::{EquationError, ModelFile, PiecewiseEquation};
use cyclescope::field::FieldError;
use cyclescope::models::ModelError;
use cyclescope::poincare::{jet, knots};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use presets::Preset;
use report::{cycles_csv, route_check, sweep_csv, AnalysisReport, SweepRow, Verification};

/// Bad input: exit code 2.
#[derive(Debug)]
pub struct Invalid(pub String);

/// Routes or theorem bounds disagree: exit code 3.
#[derive(Debug)]
pub struct Alarm(pub String);

/// Nothing could be checked: exit code 4.
#[derive(Debug)]
pub struct Inconclusive(pub String);

macro_rules! marker {
    ($($t:ident),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }
        impl std::error::Error for $t {}
    )*};
}
marker!(Invalid, Alarm, Inconclusive);

#[derive(Parser)]
#[command(name = "cyclescope", version, about = "Limit cycles of piecewise-autonomous periodic scalar equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Relative tolerance for route agreement checks.
    #[arg(long, default_value_t = 1e-5, global = true)]
    tol: f64,
    /// Starting scan grid per region.
    #[arg(long, default_value_t = cyclescope::cycles::DEFAULT_GRID, global = true)]
    grid: usize,
    /// Worker threads for sweeps and sampling.
    #[arg(long, default_value_t = 1, global = true)]
    jobs: usize,
    #[arg(long, value_enum, global = true)]
    format: Option<Format>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `|P' - 1|` below which a cycle counts as non-hyperbolic.
    #[arg(long, default_value_t = HYPERBOLIC_TOL, global = true)]
    tol_hyperbolic: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone)]
struct Source {
    /// Model file (JSON).
    model: Option<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "model")]
    preset: Option<Preset>,
    /// Preset parameter override, `key=value`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Args, Clone)]
struct PresetSource {
    #[arg(long, value_enum)]
    preset: Preset,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a preset's model file and thresholds.
    Model {
        #[command(flatten)]
        src: PresetSource,
        #[command(flatten)]
        common: Common,
    },
    /// Validate, partition, locate and classify cycles.
    Analyze {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        common: Common,
    },
    /// Cycle table only.
    Cycles {
        #[command(flatten)]
        src: Source,
        #[command(flatten)]
        common: Common,
    },
    /// Knots and derivatives of the return map at one initial value.
    Poincare {
        #[command(flatten)]
        src: Source,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, default_value_t = 3)]
        order: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Fold of the preset's rotated family by count bisection.
    Threshold {
        #[command(flatten)]
        src: PresetSource,
        #[arg(long, allow_hyphen_values = true)]
        lo: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        hi: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Follow the cycle nearest `--x0` as the family parameter moves to `--to`.
    Branch {
        #[command(flatten)]
        src: PresetSource,
        #[arg(long, allow_hyphen_values = true)]
        x0: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 20)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Cycle counts over a parameter range.
    Sweep {
        #[command(flatten)]
        src: PresetSource,
        /// Swept parameter; the preset's family parameter by default.
        #[arg(long)]
        parameter: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        from: f64,
        #[arg(long, allow_hyphen_values = true)]
        to: f64,
        #[arg(long, default_value_t = 10)]
        steps: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-route derivative check at random initial values.
    Verify {
        #[command(flatten)]
        src: Source,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[command(flatten)]
        common: Common,
    },
}

/// The output of `model`: a model file plus its thresholds block.
#[derive(Deserialize)]
struct Wrapped {
    model: ModelFile,
    thresholds: Option<Value>,
}

struct Loaded {
    equation: PiecewiseEquation,
    thresholds: Option<Value>,
}

fn load(src: &Source) -> Result<Loaded> {
    if let Some(p) = src.preset {
        let built = p.build(&p.params(&src.params)?)?;
        return Ok(Loaded { equation: built.equation, thresholds: Some(built.thresholds) });
    }
    let Some(path) = &src.model else {
        bail!(Invalid("give a model file or --preset".into()));
    };
    if !src.params.is_empty() {
        bail!(Invalid("--param applies to presets only".into()));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let wrapped = serde_json::from_str::<Value>(&text).map(|v| v.get("model").is_some()).unwrap_or(false);
    let (model, thresholds) = if wrapped {
        let w: Wrapped = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        (w.model, w.thresholds)
    } else {
        let m: ModelFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        (m, None)
    };
    let equation = model.build().with_context(|| format!("validating {}", path.display()))?;
    Ok(Loaded { equation, thresholds })
}

fn options(c: &Common) -> CycleOptions {
    CycleOptions { grid: c.grid, hyperbolic_tol: c.tol_hyperbolic, ..Default::default() }
}

fn pool(c: &Common) -> Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(c.jobs.max(1)).build()?)
}

fn emit(c: &Common, text: &str) -> Result<()> {
    match &c.out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_file(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn seed() -> u64 {
    std::env::var("CYCLESCOPE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(0)
}

fn verify_samples(eq: &PiecewiseEquation, samples: usize, c: &Common) -> Result<Verification> {
    let n = eq.normalized();
    let (lo, hi) = n.window();
    let mut rng = ChaCha8Rng::seed_from_u64(seed());
    let xs: Vec<f64> = (0..samples).map(|_| rng.gen_range(lo..=hi)).collect();
    let checks: Vec<Option<(f64, f64)>> = pool(c)?.install(|| xs.par_iter().map(|&x| route_check(n, x)).collect());
    let mut v = Verification { samples, ..Default::default() };
    for (worst, offset) in checks.into_iter().flatten() {
        v.checked += 1;
        v.max_disagreement = v.max_disagreement.max(worst);
        v.max_multiplier_offset = v.max_multiplier_offset.max(offset);
    }
    v.escaped = samples - v.checked;
    v.escaped_fraction = if samples == 0 { 0.0 } else { v.escaped as f64 / samples as f64 };
    Ok(v)
}

fn analyze(src: &Source, c: &Common) -> Result<AnalysisReport> {
    let Loaded { equation, thresholds } = load(src)?;
    let n = equation.normalized();
    let (annulus, part, cycles) = match partition(n) {
        Err(CyclesError::Annulus) => (true, None, Vec::new()),
        Err(e) => return Err(e.into()),
        Ok(p) => (false, Some(p), find_cycles_with(n, &options(c))?),
    };
    let mut verification = Verification::default();
    for cyc in cycles.iter().filter(|k| k.kind == CycleKind::NonConstant) {
        verification.samples += 1;
        if let Some((worst, _)) = route_check(n, cyc.x0) {
            verification.checked += 1;
            verification.max_disagreement = verification.max_disagreement.max(worst);
        }
    }
    Ok(AnalysisReport { equation: equation.to_model(), annulus, partition: part, cycles, thresholds, verification })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Model { src, common } => {
            if common.format == Some(Format::Csv) {
                bail!(Invalid("model output is JSON only".into()));
            }
            let built = src.preset.build(&src.preset.params(&src.params)?)?;
            emit(&common, &to_json(&json!({ "model": built.equation.to_model(), "thresholds": built.thresholds }))?)
        }
        Command::Analyze { src, common } => {
            let r = analyze(&src, &common)?;
            match common.format {
                Some(Format::Csv) => emit(&common, &cycles_csv(&r.cycles)?),
                _ => emit(&common, &to_json(&r)?),
            }
        }
        Command::Cycles { src, common } => {
            let eq = load(&src)?.equation;
            let cycles = find_cycles_with(eq.normalized(), &options(&common))?;
            match common.format {
                Some(Format::Csv) => emit(&common, &cycles_csv(&cycles)?),
                _ => emit(&common, &to_json(&cycles)?),
            }
        }
        Command::Poincare { src, x0, order, common } => {
            let eq = load(&src)?.equation;
            let n = eq.normalized();
            let k = knots(n, x0)?;
            let j = jet(n, x0, order)?;
            match common.format {
                Some(Format::Csv) => {
                    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                    let text = format!(
                        "x0,value,d1,d2,d3,route,in_v\n{x0},{},{},{},{},{},{}\n",
                        j.value,
                        j.d1,
                        opt(j.d2),
                        opt(j.d3),
                        report::json_tag(&j.route)?,
                        k.in_v
                    );
                    emit(&common, &text)
                }
                _ => emit(&common, &to_json(&json!({ "x0": x0, "knots": k, "jet": j }))?),
            }
        }
        Command::Threshold { src, lo, hi, common } => {
            let (family, bracket) = src.preset.family(&src.preset.params(&src.params)?)?;
            let bracket = (lo.unwrap_or(bracket.0), hi.unwrap_or(bracket.1));
            let th = saddle_node_threshold(&family, bracket, &options(&common))?;
            emit(&common, &to_json(&json!({ "parameter": src.preset.default_parameter(), "threshold": th }))?)
        }
        Command::Branch { src, x0, to, steps, common } => {
            let params = src.preset.params(&src.params)?;
            let (family, _) = src.preset.family(&params)?;
            let alpha0 = params[src.preset.default_parameter()];
            let eq = family.normalized(alpha0)?;
            let cycles = find_cycles_with(&eq, &options(&common))?;
            let seed = cycles
                .iter()
                .filter(|k| k.kind == CycleKind::NonConstant)
                .min_by(|a, b| (a.x0 - x0).abs().total_cmp(&(b.x0 - x0).abs()))
                .ok_or_else(|| Invalid(format!("no non-constant cycle at {alpha0}")))?;
            let steps = steps.max(1);
            let path: Vec<f64> = (1..=steps).map(|k| alpha0 + (to - alpha0) * k as f64 / steps as f64).collect();
            let branch = continue_cycle(&family, seed, alpha0, &path)?;
            emit(&common, &to_json(&json!({ "parameter": src.preset.default_parameter(), "seed": seed, "branch": branch }))?)
        }
        Command::Sweep { src, parameter, from, to, steps, common } => {
            let base = src.preset.params(&src.params)?;
            let name = parameter.unwrap_or_else(|| src.preset.default_parameter().to_string());
            if !base.contains_key(&name) {
                bail!(Invalid(format!("unknown sweep parameter `{name}`")));
            }
            let alphas: Vec<f64> = if steps <= 1 || from == to {
                vec![from]
            } else {
                (0..steps).map(|k| from + (to - from) * k as f64 / (steps - 1) as f64).collect()
            };
            let opts = options(&common);
            let rows: Vec<SweepRow> = pool(&common)?.install(|| {
                alphas
                    .par_iter()
                    .map(|&alpha| {
                        let mut p = base.clone();
                        p.insert(name.clone(), alpha);
                        let found = src
                            .preset
                            .build(&p)
                            .and_then(|b| Ok(find_cycles_with(b.equation.normalized(), &opts)?));
                        match found {
                            Ok(cycles) => {
                                let nc: Vec<_> = cycles.iter().filter(|k| k.kind == CycleKind::NonConstant).collect();
                                SweepRow {
                                    alpha,
                                    status: "ok".into(),
                                    count: Some(nc.iter().map(|k| k.multiplicity).sum()),
                                    x0: nc.iter().map(|k| k.x0).collect(),
                                }
                            }
                            Err(e) => SweepRow { alpha, status: format!("failed: {e}"), count: None, x0: Vec::new() },
                        }
                    })
                    .collect()
            });
            match common.format {
                Some(Format::Json) => emit(&common, &to_json(&rows)?),
                _ => emit(&common, &sweep_csv(&rows)?),
            }
        }
        Command::Verify { src, samples, common } => {
            let eq = load(&src)?.equation;
            let v = verify_samples(&eq, samples, &common)?;
            emit(&common, &to_json(&v)?)?;
            if v.checked == 0 {
                bail!(Inconclusive(format!("all {samples} samples left the domain")));
            }
            if v.max_disagreement > common.tol {
                bail!(Alarm(format!("routes disagree by {:e} > {:e}", v.max_disagreement, common.tol)));
            }
            Ok(())
        }
    }
}

fn is_alarm(e: &(dyn std::error::Error + 'static)) -> bool {
    matches!(e.downcast_ref::<CyclesError>(), Some(CyclesError::ConsistencyAlarm { .. }))
        || matches!(e.downcast_ref::<ModelError>(), Some(ModelError::Cycles(CyclesError::ConsistencyAlarm { .. })))
        || matches!(
            e.downcast_ref::<ContinuationError>(),
            Some(ContinuationError::Cycles(CyclesError::ConsistencyAlarm { .. }))
        )
        || e.is::<Alarm>()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(is_alarm) {
        return 3;
    }
    if err.chain().any(|e| e.is::<Inconclusive>()) {
        return 4;
    }
    let invalid = err.chain().any(|e| {
        e.is::<Invalid>()
            || e.is::<EquationError>()
            || e.is::<FieldError>()
            || e.is::<serde_json::Error>()
            || e.is::<std::io::Error>()
            || matches!(
                e.downcast_ref::<CyclesError>(),
                Some(CyclesError::GridTooSmall(_) | CyclesError::NotTwoPiece(_) | CyclesError::Precondition(_))
            )
            || matches!(
                e.downcast_ref::<ModelError>(),
                Some(
                    ModelError::Hypothesis(_)
                        | ModelError::WrongStrategy(_)
                        | ModelError::Degenerate(_)
                        | ModelError::BadParameter(_)
                        | ModelError::Equation(_)
                        | ModelError::Field(_)
                )
            )
    });
    if invalid {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
