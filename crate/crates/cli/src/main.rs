use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use fold_saddle::atlas::{
    classify_case, render_diagram, render_portrait, representatives, sweep, topo_signature,
    verify_all, verify_params, AtlasConfig, CaseGrid, DiagramOptions, PortraitOptions,
    Representative,
};
use fold_saddle::{FoldSaddleParams, Tau};

/// Fold–saddle atlas: case labels, phase portraits, parameter sweeps and
/// numerical cross-checks.
#[derive(Debug, Parser)]
#[command(name = "fold-saddle", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the case label and the topological signature of one parameter point.
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Write the SVG phase portrait of one parameter point.
    Portrait {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        numerics: NumericArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Classify an n×n grid of one (tau, mu) slice and write it as CSV.
    Sweep {
        #[arg(long)]
        tau: Tau,
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        parallel: ParallelArgs,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Compare closed forms with numerics. Exits 1 if any check fails.
    Verify {
        /// Run the fixed parameter battery instead of a single point.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        numerics: NumericArgs,
    },
    /// Write the six case diagrams and one portrait per behaviour class.
    Atlas {
        /// Restrict to one fold type.
        #[arg(long)]
        tau: Option<Tau>,
        #[arg(long, default_value_t = 64)]
        grid: usize,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        parallel: ParallelArgs,
        #[command(flatten)]
        numerics: NumericArgs,
    },
}

#[derive(Debug, Args)]
struct ParamArgs {
    /// Upper fold type: i (invisible) or v (visible).
    #[arg(long)]
    tau: Option<Tau>,
    #[arg(long, allow_negative_numbers = true)]
    mu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,
    /// JSON file {"tau", "lambda", "beta", "mu"}; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: PathBuf,
    /// Overwrite an existing output path.
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ParallelArgs {
    /// Worker threads (default: available parallelism). Output does not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
}

/// Numerical settings; defaults are the library defaults.
#[derive(Debug, Args)]
struct NumericArgs {
    /// |X.f| or |Y.f| below this counts as a fold.
    #[arg(long)]
    tol_tangency: Option<f64>,
    /// Bracket width at which root bisection stops.
    #[arg(long)]
    tol_root: Option<f64>,
    /// Folds closer than this are merged into one double fold.
    #[arg(long)]
    tol_coincide: Option<f64>,
    /// Accuracy of switching-line hits.
    #[arg(long)]
    tol_event: Option<f64>,
    /// Relative tolerance of the integrator.
    #[arg(long)]
    tol_rel: Option<f64>,
    /// Absolute tolerance of the integrator.
    #[arg(long)]
    tol_abs: Option<f64>,
    /// Time budget of one trajectory.
    #[arg(long)]
    tol_t_max: Option<f64>,
    /// Equality tolerance for case boundaries.
    #[arg(long)]
    tol_eq: Option<f64>,
}

enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<ExitCode, Failure>;

impl NumericArgs {
    fn config(&self) -> Result<AtlasConfig, Failure> {
        let mut cfg = AtlasConfig::default();
        let settings = [
            (
                "--tol-tangency",
                self.tol_tangency,
                &mut cfg.flow.sigma.tangency,
            ),
            ("--tol-root", self.tol_root, &mut cfg.flow.sigma.root),
            (
                "--tol-coincide",
                self.tol_coincide,
                &mut cfg.flow.sigma.coincide,
            ),
            ("--tol-event", self.tol_event, &mut cfg.flow.tol_event),
            ("--tol-rel", self.tol_rel, &mut cfg.flow.rtol),
            ("--tol-abs", self.tol_abs, &mut cfg.flow.atol),
            ("--tol-t-max", self.tol_t_max, &mut cfg.flow.t_max),
            ("--tol-eq", self.tol_eq, &mut cfg.tol_eq),
        ];
        for (flag, value, slot) in settings {
            if let Some(v) = value {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Failure::Usage(format!(
                        "{flag} must be a positive number, got {v}"
                    )));
                }
                *slot = v;
            }
        }
        Ok(cfg)
    }
}

impl ParamArgs {
    fn resolve(&self) -> Result<FoldSaddleParams, Failure> {
        let base: Option<FoldSaddleParams> = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                Some(serde_json::from_str(&text).map_err(|e| {
                    Failure::Usage(format!("malformed parameter file {}: {e}", path.display()))
                })?)
            }
            None => None,
        };
        let missing = |name: &str| Failure::Usage(format!("missing --{name} (or --config)"));
        let params = FoldSaddleParams {
            tau: self
                .tau
                .or(base.map(|b| b.tau))
                .ok_or_else(|| missing("tau"))?,
            lambda: self
                .lambda
                .or(base.map(|b| b.lambda))
                .ok_or_else(|| missing("lambda"))?,
            beta: self
                .beta
                .or(base.map(|b| b.beta))
                .ok_or_else(|| missing("beta"))?,
            mu: self
                .mu
                .or(base.map(|b| b.mu))
                .ok_or_else(|| missing("mu"))?,
        };
        params
            .validate()
            .map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(params)
    }

    fn is_empty(&self) -> bool {
        self.tau.is_none()
            && self.mu.is_none()
            && self.lambda.is_none()
            && self.beta.is_none()
            && self.config.is_none()
    }
}

fn check_output(out: &OutputArgs) -> Result<(), Failure> {
    if out.out.exists() && !out.force {
        return Err(Failure::Usage(format!(
            "{} already exists (use --force to overwrite)",
            out.out.display()
        )));
    }
    Ok(())
}

fn check_mu(mu: f64) -> Result<(), Failure> {
    FoldSaddleParams {
        tau: Tau::Invisible,
        lambda: 0.0,
        beta: 0.0,
        mu,
    }
    .validate()
    .map_err(|e| Failure::Usage(e.to_string()))
}

fn check_grid(grid: usize) -> Result<(), Failure> {
    if grid == 0 {
        return Err(Failure::Usage("--grid must be at least 1".to_string()));
    }
    Ok(())
}

/// Writes to standard output; a closed pipe (as with `| head`) is not an error.
fn emit(text: &str) -> Result<(), Failure> {
    let mut stdout = io::stdout().lock();
    match stdout
        .write_all(text.as_bytes())
        .and_then(|_| stdout.flush())
    {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &[u8]) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn pool(parallel: &ParallelArgs) -> Result<rayon::ThreadPool, Failure> {
    if parallel.jobs == Some(0) {
        return Err(Failure::Usage("--jobs must be at least 1".to_string()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = parallel.jobs {
        builder = builder.num_threads(jobs);
    }
    builder
        .build()
        .map_err(|e| Failure::Runtime(anyhow::anyhow!("thread pool: {e}")))
}

fn classify(params: &ParamArgs, numerics: &NumericArgs) -> Outcome {
    let p = params.resolve()?;
    let cfg = numerics.config()?;
    let case = classify_case(&p, cfg.tol_eq).map_err(|e| Failure::Usage(e.to_string()))?;
    emit(&format!("{case}\n{}\n", topo_signature(&p, &cfg).summary()))?;
    Ok(ExitCode::SUCCESS)
}

fn portrait(params: &ParamArgs, numerics: &NumericArgs, output: &OutputArgs) -> Outcome {
    let p = params.resolve()?;
    let cfg = numerics.config()?;
    check_output(output)?;
    let case = classify_case(&p, cfg.tol_eq).map_err(|e| Failure::Usage(e.to_string()))?;
    let options = PortraitOptions {
        title: Some(format!(
            "case {case}: tau={} mu={} lambda={} beta={}",
            p.tau, p.mu, p.lambda, p.beta
        )),
        ..PortraitOptions::default()
    };
    write_file(&output.out, render_portrait(&p, &options, &cfg).as_bytes())?;
    Ok(ExitCode::SUCCESS)
}

fn grid_csv(grid: &CaseGrid) -> Vec<u8> {
    let mut buf = Vec::new();
    fold_saddle::atlas::write_grid_csv(grid, &mut buf).expect("writing to memory");
    buf
}

fn run_sweep(
    tau: Tau,
    mu: f64,
    n: usize,
    output: &OutputArgs,
    parallel: &ParallelArgs,
    numerics: &NumericArgs,
) -> Outcome {
    check_mu(mu)?;
    check_grid(n)?;
    let cfg = numerics.config()?;
    check_output(output)?;
    let grid = pool(parallel)?
        .install(|| sweep(tau, mu, n, &cfg))
        .map_err(|e| Failure::Usage(e.to_string()))?;
    write_file(&output.out, &grid_csv(&grid))?;
    eprintln!(
        "{} samples, {} case labels, {} signatures",
        grid.samples().count(),
        grid.distinct_cases().len(),
        grid.distinct_signatures().len()
    );
    Ok(ExitCode::SUCCESS)
}

fn verify(all: bool, params: &ParamArgs, numerics: &NumericArgs) -> Outcome {
    let cfg = numerics.config()?;
    let report = if all {
        if !params.is_empty() {
            return Err(Failure::Usage("--all takes no parameter flags".to_string()));
        }
        verify_all(&cfg)
    } else {
        verify_params(&params.resolve()?, &cfg)
    };
    emit(&report.to_string())?;
    if report.has_failures() {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

/// μ slices drawn by the atlas: 0 and ±0.1.
const ATLAS_MU: [f64; 3] = [0.0, 0.1, -0.1];

fn mu_label(mu: f64) -> String {
    if mu == 0.0 {
        "0".to_string()
    } else {
        format!("{mu:+}")
    }
}

fn atlas(
    tau: Option<Tau>,
    n: usize,
    output: &OutputArgs,
    parallel: &ParallelArgs,
    numerics: &NumericArgs,
) -> Outcome {
    check_grid(n)?;
    let cfg = numerics.config()?;
    check_output(output)?;
    let dir = &output.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let pool = pool(parallel)?;
    let taus = match tau {
        Some(t) => vec![t],
        None => vec![Tau::Invisible, Tau::Visible],
    };

    for tau in taus {
        let mut grids = Vec::new();
        for mu in ATLAS_MU {
            let grid = pool
                .install(|| sweep(tau, mu, n, &cfg))
                .map_err(|e| Failure::Runtime(e.into()))?;
            let stem = format!("{tau}_mu{}", mu_label(mu));
            write_file(&dir.join(format!("grid_{stem}.csv")), &grid_csv(&grid))?;
            let options = DiagramOptions {
                title: Some(format!("tau={tau}, mu={}", mu_label(mu))),
                ..DiagramOptions::default()
            };
            write_file(
                &dir.join(format!("diagram_{stem}.svg")),
                render_diagram(&grid, &options).as_bytes(),
            )?;
            grids.push(grid);
        }

        let reps = representatives(&grids);
        let portraits = dir.join(format!("portraits_{tau}"));
        fs::create_dir_all(&portraits)
            .with_context(|| format!("creating {}", portraits.display()))?;
        let svgs: Vec<String> = pool.install(|| {
            use rayon::prelude::*;
            reps.par_iter()
                .map(|r| representative_svg(r, &cfg))
                .collect()
        });
        let mut index = String::from("case_id,topo_hash,lambda,beta,mu,file\n");
        for (r, svg) in reps.iter().zip(&svgs) {
            let file = format!("{}_{}.svg", r.case, r.topo_hash);
            write_file(&portraits.join(&file), svg.as_bytes())?;
            index.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{file}\n",
                r.case, r.topo_hash, r.params.lambda, r.params.beta, r.params.mu
            ));
        }
        write_file(&dir.join(format!("classes_{tau}.csv")), index.as_bytes())?;
        eprintln!("tau={tau}: {} behaviour classes", reps.len());
    }
    Ok(ExitCode::SUCCESS)
}

fn representative_svg(r: &Representative, cfg: &AtlasConfig) -> String {
    let p = &r.params;
    let options = PortraitOptions {
        title: Some(format!(
            "case {} (class {}): lambda={} beta={} mu={}",
            r.case, r.topo_hash, p.lambda, p.beta, p.mu
        )),
        ..PortraitOptions::default()
    };
    render_portrait(p, &options, cfg)
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Classify { params, numerics } => classify(params, numerics),
        Command::Portrait {
            params,
            numerics,
            output,
        } => portrait(params, numerics, output),
        Command::Sweep {
            tau,
            mu,
            grid,
            output,
            parallel,
            numerics,
        } => run_sweep(*tau, *mu, *grid, output, parallel, numerics),
        Command::Verify {
            all,
            params,
            numerics,
        } => verify(*all, params, numerics),
        Command::Atlas {
            tau,
            grid,
            output,
            parallel,
            numerics,
        } => atlas(*tau, *grid, output, parallel, numerics),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
