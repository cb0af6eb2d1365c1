use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pgd_core::bench::{self, BenchStats};
use pgd_core::problem::format::{parse_problem, ProblemSpec};
use pgd_core::projection::{kkt_report, linearize_constraints, project_linearized};
use pgd_core::topo::{cycle_csv, field_dump, run_continuation, DemoConfig};
use pgd_core::{
    optimize, DecompositionScope, HResetMode, InertiaScale, OptimizerConfig, PgdError, PostGammaFeasibility,
};

const DEFAULTS: &str = "\
Defaults:
  mu = 0.95            broken-constraint relaxation
  beta-hat = 0.2       inertia weight
  zeta = 0.5           step relaxation when the active set is too large
  gamma-cap = 10       upper bound on gamma/alpha
  epsilon = 2% of a    constraint tolerance (demo: tolerance_fraction = 0.02)
  h-mode = decrement, decomp-scope = active-set-only, post-gamma = clip,
  inertia-scale = lagrangian-gradient

Exit codes: 0 success, 1 solver failure, 2 input error.";

#[derive(Parser, Debug)]
#[command(name = "pgd", version, about = "Inertial projected gradient descent with an active-set projection")]
#[command(after_help = DEFAULTS)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Output file (directory for `demo`); stdout when absent
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Master seed for `bench`
    #[arg(long, global = true, default_value_t = 2024)]
    seed: u64,
    /// Broken-constraint relaxation mu [default: 0.95]
    #[arg(long, global = true)]
    mu: Option<f64>,
    /// Inertia weight beta-hat [default: 0.2]
    #[arg(long, global = true)]
    beta_hat: Option<f64>,
    /// Step relaxation factor zeta [default: 0.5]
    #[arg(long, global = true)]
    zeta: Option<f64>,
    /// Upper bound on gamma/alpha [default: 10]
    #[arg(long, global = true)]
    gamma_cap: Option<f64>,
    /// Recovery of the broken counter h [default: decrement]
    #[arg(long, global = true, value_enum)]
    h_mode: Option<HMode>,
    /// Gradients spanning the parallel step [default: active-set-only]
    #[arg(long, global = true, value_enum)]
    decomp_scope: Option<Scope>,
    /// Bound restoration after the gamma update [default: clip]
    #[arg(long, global = true, value_enum)]
    post_gamma: Option<PostGamma>,
    /// Norm that sizes the inertial term [default: lagrangian-gradient]
    #[arg(long, global = true, value_enum)]
    inertia_scale: Option<Inertia>,
    /// More log output (repeat for more)
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum HMode {
    Decrement,
    Reset,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Scope {
    ActiveSetOnly,
    AllConstraints,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PostGamma {
    Clip,
    Reproject,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Inertia {
    CostGradient,
    LagrangianGradient,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Project one step onto linearized constraints
    Project {
        /// Input file with `dimension`, constraints, `phi` and `delta`
        input: PathBuf,
    },
    /// Run the optimizer and write one CSV row per iteration
    Optimize {
        /// Problem file with a `cost` line
        input: PathBuf,
        #[arg(long, default_value_t = 1000)]
        max_iterations: usize,
        /// Relative cost-change stopping tolerance
        #[arg(long, default_value_t = 1e-6)]
        cost_tol: f64,
        /// Stop when |dphi|/alpha falls below this value
        #[arg(long)]
        pg_tol: Option<f64>,
    },
    /// Random appendix problems: iteration and fallback statistics
    Bench {
        /// Design variable counts
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20])]
        k: Vec<usize>,
        /// Linear constraint counts
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 20])]
        m: Vec<usize>,
        #[arg(long, default_value_t = bench::DEFAULT_TRIALS)]
        trials: usize,
        /// Print text tables instead of CSV
        #[arg(long)]
        table: bool,
    },
    /// Heat-conduction topology demo with the continuation schedule
    Demo {
        /// TOML configuration; built-in 32x32 volume-only setup when absent
        config: Option<PathBuf>,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<PgdError> for Failure {
    fn from(e: PgdError) -> Self {
        let code = match e {
            PgdError::DimensionMismatch { .. }
            | PgdError::NonFinite { .. }
            | PgdError::InvalidParameter { .. }
            | PgdError::InfeasibleProblem(_)
            | PgdError::Parse { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn input_error(message: String) -> Failure {
    Failure { code: 2, message }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| input_error(format!("{}: {e}", path.display())))
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, text).map_err(|e| input_error(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn apply_overrides(c: &mut OptimizerConfig, o: &Common) {
    if let Some(v) = o.mu {
        c.mu = v;
    }
    if let Some(v) = o.beta_hat {
        c.beta_hat = v;
    }
    if let Some(v) = o.zeta {
        c.projection.zeta = v;
    }
    if let Some(v) = o.gamma_cap {
        c.gamma_cap = v;
    }
    if let Some(v) = o.h_mode {
        c.h_reset_mode = match v {
            HMode::Decrement => HResetMode::Decrement,
            HMode::Reset => HResetMode::Reset,
        };
    }
    if let Some(v) = o.decomp_scope {
        c.decomposition_scope = match v {
            Scope::ActiveSetOnly => DecompositionScope::ActiveSetOnly,
            Scope::AllConstraints => DecompositionScope::AllConstraints,
        };
    }
    if let Some(v) = o.post_gamma {
        c.post_gamma_feasibility = match v {
            PostGamma::Clip => PostGammaFeasibility::Clip,
            PostGamma::Reproject => PostGammaFeasibility::Reproject,
        };
    }
    if let Some(v) = o.inertia_scale {
        c.inertia_scale = match v {
            Inertia::CostGradient => InertiaScale::CostGradient,
            Inertia::LagrangianGradient => InertiaScale::LagrangianGradient,
        };
    }
}

fn load_spec(path: &Path) -> Result<ProblemSpec, Failure> {
    let text = read(path)?;
    Ok(parse_problem(&text, path.parent())?)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(" ")
}

fn cmd_project(input: &Path, common: &Common) -> Result<(), Failure> {
    let spec = load_spec(input)?;
    let phi = spec
        .phi
        .clone()
        .unwrap_or_else(|| vec![0.0; spec.dimension]);
    let delta = spec
        .delta
        .clone()
        .ok_or_else(|| input_error(format!("{}: missing `delta` line", input.display())))?;
    let model = spec.constraint_model()?;
    let mut config = OptimizerConfig::default();
    apply_overrides(&mut config, common);
    config.validate()?;
    let lin = linearize_constraints(&phi, &model)?;
    let result = project_linearized(&delta, &phi, &model, &lin, &config.projection)?;
    let kkt = kkt_report(&delta, &phi, &model, &lin, &result);

    let projected: Vec<f64> = phi.iter().zip(result.delta_phi.iter()).map(|(p, d)| p - d).collect();
    let mut out = String::new();
    let _ = writeln!(out, "delta_phi {}", join(&result.delta_phi));
    let _ = writeln!(out, "projected {}", join(&projected));
    let active: Vec<String> = result.active_set.ids().map(|id| id.to_string()).collect();
    let _ = writeln!(out, "active_set {}", active.join(" "));
    let multipliers: Vec<String> = result
        .multipliers
        .iter()
        .map(|(id, y)| format!("{id}={y:.17e}"))
        .collect();
    let _ = writeln!(out, "multipliers {}", multipliers.join(" "));
    let _ = writeln!(out, "step_scale {}", result.step_scale);
    let _ = writeln!(out, "outer_iterations {}", result.outer_iterations);
    let _ = writeln!(out, "solves {}", result.solves);
    let _ = writeln!(out, "fallback_6 {}", result.fallback_6_count);
    let _ = writeln!(out, "fallback_6c {}", result.fallback_6c_count);
    let _ = writeln!(out, "kkt_stationarity {:e}", kkt.stationarity);
    let _ = writeln!(out, "kkt_primal {:e}", kkt.primal);
    let _ = writeln!(out, "kkt_min_multiplier {:e}", kkt.min_multiplier);
    let _ = writeln!(out, "kkt_complementarity {:e}", kkt.complementarity);
    emit(&common.output, &out)
}

fn cmd_optimize(
    input: &Path,
    max_iterations: usize,
    cost_tol: f64,
    pg_tol: Option<f64>,
    common: &Common,
) -> Result<(), Failure> {
    let spec = load_spec(input)?;
    let problem = spec.build_problem()?;
    let start = spec.start.clone().unwrap_or_else(|| vec![0.0; spec.dimension]);
    let mut config = OptimizerConfig {
        max_iterations,
        cost_rel_tol: Some(cost_tol),
        pg_tol,
        ..OptimizerConfig::default()
    };
    apply_overrides(&mut config, common);
    let history = optimize(&problem, &start, &config)?;

    let m = problem.constraints().n_globals();
    let mut out = String::from("iteration,cost");
    for j in 0..m {
        let _ = write!(out, ",f{j}");
    }
    out.push_str(",h,alpha,beta,gamma,active_set_size\n");
    for r in &history.records {
        let _ = write!(out, "{},{:.17e}", r.iteration, r.cost);
        for v in &r.constraint_values {
            let _ = write!(out, ",{v:.17e}");
        }
        let _ = writeln!(
            out,
            ",{},{:.17e},{:.17e},{:.17e},{}",
            r.h, r.alpha, r.beta, r.gamma, r.active_set_size
        );
    }
    log::info!("stopped: {:?}; final cost {:.10e}", history.stop, history.cost);
    log::info!("final point: {}", join(&history.phi));
    emit(&common.output, &out)
}

fn cmd_bench(ks: &[usize], ms: &[usize], trials: usize, table: bool, common: &Common) -> Result<(), Failure> {
    let mut config = bench::bench_optimizer_config();
    apply_overrides(&mut config, common);
    config.validate()?;
    let mut stats: Vec<BenchStats> = Vec::new();
    for &m in ms {
        for &k in ks {
            let s = bench::run_batch(k, m, trials, common.seed, &config)?;
            for e in &s.errors {
                log::warn!("k={k} m={m} trial {}: {}", e.trial, e.message);
            }
            stats.push(s);
        }
    }
    let text = if table {
        bench::emit_table(&stats)
    } else {
        bench::emit_csv(&stats)
    };
    emit(&common.output, &text)
}

fn cmd_demo(config: Option<&Path>, common: &Common) -> Result<(), Failure> {
    let mut demo = match config {
        Some(p) => DemoConfig::from_toml(&read(p)?)?,
        None => DemoConfig::default(),
    };
    apply_overrides(&mut demo.optimizer, common);
    let result = run_continuation(&demo)?;

    let csv = cycle_csv(&result.records);
    let field = field_dump(&result.grid, &result.phi_bar);
    match &common.output {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| input_error(format!("{}: {e}", dir.display())))?;
            let write = |name: &str, text: &str| {
                let p = dir.join(name);
                fs::write(&p, text).map_err(|e| input_error(format!("{}: {e}", p.display())))
            };
            write("cycles.csv", &csv)?;
            write("phi_bar.txt", &field)?;
        }
        None => print!("{csv}"),
    }
    let mut summary = String::new();
    for (i, s) in result.stages.iter().enumerate() {
        let _ = writeln!(
            summary,
            "stage {i}: b={} lambda={} cycles={} stop={} cost={:.6e} volume={:.6} overhang={:.6e}",
            s.b, s.lambda, s.cycles, s.stop, s.cost, s.volume, s.overhang
        );
    }
    let _ = writeln!(
        summary,
        "uniform_cost={:.6e} final_cost={:.6e} ratio={:.4} final_volume={:.6} (limit {} + {})",
        result.uniform_cost,
        result.final_cost,
        result.final_cost / result.uniform_cost,
        result.final_volume,
        result.volume_limit.0,
        result.volume_limit.1
    );
    if let Some((a1, eps1)) = result.overhang_limit {
        let _ = writeln!(
            summary,
            "final_overhang={:.6e} (limit {a1:.6e} + {eps1:.6e})",
            result.final_overhang
        );
    }
    eprint!("{summary}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let common = &cli.common;
    let outcome = match &cli.command {
        Command::Project { input } => cmd_project(input, common),
        Command::Optimize {
            input,
            max_iterations,
            cost_tol,
            pg_tol,
        } => cmd_optimize(input, *max_iterations, *cost_tol, *pg_tol, common),
        Command::Bench { k, m, trials, table } => cmd_bench(k, m, *trials, *table, common),
        Command::Demo { config } => cmd_demo(config.as_deref(), common),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
