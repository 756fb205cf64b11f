use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lsd_core::asymptotics::{bias_curves, if_first_order, if_second_order, BaseLaw, BiasCurve};
use lsd_core::estimation::empirical_frequencies;
use lsd_core::family::density_vector;
use lsd_core::sim::{
    render_report, run_simulation, ReportFormat, SimulationConfig, SimulationKind,
};
use lsd_core::testing::{one_sample_test, two_sample_statistic, TestConfig};
use lsd_core::{
    gsd, lsd, minimize_lsd, LsdError, Poisson, SearchConfig, TiltParams, DEFAULT_EPS_TAIL,
};

/// Logarithmic super divergence for the Poisson model: divergences,
/// robust estimates, influence functions, tests and simulation studies.
#[derive(Parser)]
#[command(name = "lsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// LSD between two Poisson laws, or between a sample and a Poisson law.
    Divergence(DivergenceArgs),
    /// Minimum-LSD estimate of the Poisson mean.
    Estimate(EstimateArgs),
    /// First- and second-order influence functions at the model.
    Influence(InfluenceArgs),
    /// First- and second-order bias approximations under point contamination.
    BiasApprox(BiasArgs),
    /// One- or two-sample LSD test.
    Test(TestArgs),
    /// Replicated simulation over a (beta, gamma) grid.
    Simulate(SimulateArgs),
}

#[derive(Args, Clone, Copy)]
struct TiltArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    beta: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    gamma: f64,
}

impl TiltArgs {
    fn params(self) -> lsd_core::Result<TiltParams> {
        TiltParams::new(self.beta, self.gamma)
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    /// Comma-separated counts.
    #[arg(long, value_delimiter = ',', conflicts_with = "sample_file")]
    sample: Option<Vec<i64>>,
    /// File of counts separated by whitespace or commas.
    #[arg(long)]
    sample_file: Option<PathBuf>,
}

impl SampleArgs {
    fn load(&self) -> lsd_core::Result<Option<Vec<i64>>> {
        match (&self.sample, &self.sample_file) {
            (Some(s), _) => Ok(Some(s.clone())),
            (None, Some(path)) => read_counts(path).map(Some),
            (None, None) => Ok(None),
        }
    }

    fn require(&self) -> lsd_core::Result<Vec<i64>> {
        self.load()?.ok_or_else(|| {
            LsdError::Usage("a sample is required (--sample or --sample-file)".into())
        })
    }
}

#[derive(Args)]
struct DivergenceArgs {
    #[command(flatten)]
    tilt: TiltArgs,
    /// Mean of the first argument g; ignored when a sample is given.
    #[arg(long, default_value_t = 2.0)]
    theta_g: f64,
    /// Mean of the model f.
    #[arg(long, default_value_t = 3.0)]
    theta_f: f64,
    #[command(flatten)]
    sample: SampleArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    tilt: TiltArgs,
    #[command(flatten)]
    sample: SampleArgs,
    /// Search interval for theta.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    bracket: Option<Vec<f64>>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct InfluenceArgs {
    #[command(flatten)]
    tilt: TiltArgs,
    #[arg(long, default_value_t = 4.0)]
    theta: f64,
    /// Largest evaluation point; the curve runs over 0..=y-max.
    #[arg(long, default_value_t = 30)]
    y_max: i64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BiasArgs {
    #[command(flatten)]
    tilt: TiltArgs,
    #[arg(long, default_value_t = 4.0)]
    theta: f64,
    /// Contamination point.
    #[arg(long, default_value_t = 12)]
    y: i64,
    #[arg(long, default_value_t = 0.2)]
    eps_max: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_step: f64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    tilt: TiltArgs,
    /// Null value; required for the one-sample test.
    #[arg(long)]
    theta0: Option<f64>,
    #[command(flatten)]
    sample: SampleArgs,
    /// Second sample, for the two-sample test.
    #[arg(long, value_delimiter = ',')]
    sample2: Option<Vec<i64>>,
    /// Seed of the Monte-Carlo p-value when the null law has several weights.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with SimulationConfig fields; flags below override it.
    /// Without a file, `--kind` starts from that kind's standard design.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Contamination proportion.
    #[arg(long)]
    eps: Option<f64>,
    /// Restrict the grid to a single beta.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    /// Restrict the grid to a single gamma.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    EstimationBias,
    TestingLevel,
    TestingPower,
    IfCurve,
    BiasApprox,
}

impl From<Kind> for SimulationKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::EstimationBias => SimulationKind::EstimationBias,
            Kind::TestingLevel => SimulationKind::TestingLevel,
            Kind::TestingPower => SimulationKind::TestingPower,
            Kind::IfCurve => SimulationKind::IfCurve,
            Kind::BiasApprox => SimulationKind::BiasApprox,
        }
    }
}

fn read_counts(path: &Path) -> lsd_core::Result<Vec<i64>> {
    let text = std::fs::read_to_string(path).map_err(|source| LsdError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    text.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<i64>()
                .map_err(|_| LsdError::Usage(format!("{}: not a count: {t:?}", path.display())))
        })
        .collect()
}

fn emit(text: &str, out: Option<&Path>) -> lsd_core::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| LsdError::Io {
            path: path.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> lsd_core::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn key_value_csv(rows: &[(&str, String)]) -> String {
    let mut s = String::from("key,value\n");
    for (k, v) in rows {
        s.push_str(&format!("{k},{v}\n"));
    }
    s
}

#[derive(Serialize)]
struct DivergenceOut {
    beta: f64,
    gamma: f64,
    exp_a: f64,
    exp_b: f64,
    lsd: f64,
    gsd: f64,
}

fn divergence(args: DivergenceArgs) -> lsd_core::Result<()> {
    let p = args.tilt.params()?;
    let g = match args.sample.load()? {
        Some(s) => empirical_frequencies(&s)?,
        None => density_vector(&Poisson, args.theta_g, DEFAULT_EPS_TAIL)?,
    };
    let f = density_vector(&Poisson, args.theta_f, DEFAULT_EPS_TAIL)?;
    let out = DivergenceOut {
        beta: p.beta(),
        gamma: p.gamma(),
        exp_a: p.exp_a(),
        exp_b: p.exp_b(),
        lsd: lsd(&g, &f, &p)?,
        gsd: gsd(&g, &f, &p)?,
    };
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&out)?,
        Format::Csv => key_value_csv(&[
            ("beta", out.beta.to_string()),
            ("gamma", out.gamma.to_string()),
            ("exp_a", out.exp_a.to_string()),
            ("exp_b", out.exp_b.to_string()),
            ("lsd", out.lsd.to_string()),
            ("gsd", out.gsd.to_string()),
        ]),
    };
    emit(&text, args.output.out.as_deref())
}

fn estimate(args: EstimateArgs) -> lsd_core::Result<()> {
    let p = args.tilt.params()?;
    let r = empirical_frequencies(&args.sample.require()?)?;
    let config = SearchConfig {
        bracket: args.bracket.map(|b| (b[0], b[1])),
        ..SearchConfig::default()
    };
    let fit = minimize_lsd(&r, &Poisson, &p, &config)?;
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&fit)?,
        Format::Csv => key_value_csv(&[
            ("theta_hat", fit.theta_hat.to_string()),
            ("objective", fit.objective.to_string()),
            ("residual", fit.residual.to_string()),
            ("iterations", fit.iterations.to_string()),
            ("converged", fit.converged.to_string()),
        ]),
    };
    emit(&text, args.output.out.as_deref())
}

#[derive(Serialize)]
struct InfluencePoint {
    y: i64,
    if1: f64,
    if2: f64,
}

fn influence(args: InfluenceArgs) -> lsd_core::Result<()> {
    let p = args.tilt.params()?;
    if args.y_max < 0 {
        return Err(LsdError::Usage("y-max must be >= 0".into()));
    }
    let points = (0..=args.y_max)
        .map(|y| {
            Ok(InfluencePoint {
                y,
                if1: if_first_order(
                    y,
                    BaseLaw::Model,
                    &Poisson,
                    args.theta,
                    &p,
                    DEFAULT_EPS_TAIL,
                )?,
                if2: if_second_order(y, &Poisson, args.theta, &p, DEFAULT_EPS_TAIL)?,
            })
        })
        .collect::<lsd_core::Result<Vec<_>>>()?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&points)?,
        Format::Csv => {
            let mut s = String::from("y,if1,if2\n");
            for pt in &points {
                s.push_str(&format!("{},{},{}\n", pt.y, pt.if1, pt.if2));
            }
            s
        }
    };
    emit(&text, args.output.out.as_deref())
}

fn bias_approx(args: BiasArgs) -> lsd_core::Result<()> {
    let p = args.tilt.params()?;
    if args.eps_step.is_nan() || args.eps_step <= 0.0 {
        return Err(LsdError::Usage("eps-step must be positive".into()));
    }
    let steps = (args.eps_max / args.eps_step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64 * args.eps_step).collect();
    let curve: BiasCurve = bias_curves(args.y, &Poisson, args.theta, &p, &grid, DEFAULT_EPS_TAIL)?;
    let text = match args.output.format.unwrap_or(Format::Csv) {
        Format::Json => to_json(&curve)?,
        Format::Csv => curve.to_csv(),
    };
    emit(&text, args.output.out.as_deref())
}

fn test(args: TestArgs) -> lsd_core::Result<()> {
    let p = args.tilt.params()?;
    let sample = args.sample.require()?;
    let mut config = TestConfig::default();
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let result = match (&args.sample2, args.theta0) {
        (Some(second), _) => two_sample_statistic(&sample, second, &Poisson, &p, &config)?,
        (None, Some(theta0)) => one_sample_test(&sample, &Poisson, theta0, &p, &config)?,
        (None, None) => return Err(LsdError::Usage("give --theta0 or --sample2".into())),
    };
    let text = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&result)?,
        Format::Csv => {
            let mut rows = vec![
                ("statistic", result.statistic.to_string()),
                ("p_value", result.p_value.to_string()),
                ("rank", result.rank.to_string()),
            ];
            for (level, reject) in &result.reject_at {
                rows.push(("reject_at", format!("{level}:{reject}")));
            }
            key_value_csv(&rows)
        }
    };
    emit(&text, args.output.out.as_deref())
}

fn simulation_config(args: &SimulateArgs) -> lsd_core::Result<SimulationConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| LsdError::Io {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text)?
        }
        None => match args.kind.map(SimulationKind::from) {
            Some(SimulationKind::TestingLevel) => SimulationConfig::testing_level(50, false),
            Some(SimulationKind::TestingPower) => SimulationConfig::testing_power(50, false),
            _ => SimulationConfig::default(),
        },
    };
    if let Some(kind) = args.kind {
        config.kind = kind.into();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(r) = args.replications {
        config.replications = r;
    }
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(eps) = args.eps {
        config.contamination.eps = eps;
    }
    if let Some(b) = args.beta {
        config.grid_beta = Some(vec![b]);
    }
    if let Some(g) = args.gamma {
        config.grid_gamma = Some(vec![g]);
    }
    config.validate()?;
    Ok(config)
}

fn simulate(args: SimulateArgs) -> lsd_core::Result<()> {
    let config = simulation_config(&args)?;
    let started = Instant::now();
    let report = run_simulation(&config)?;
    let format = args.output.format.unwrap_or(Format::Csv);
    emit(
        &render_report(&report, format.into())?,
        args.output.out.as_deref(),
    )?;
    eprintln!("wall time: {:.3}s", started.elapsed().as_secs_f64());
    Ok(())
}

#[derive(Serialize)]
struct ErrorOut<'a> {
    error: &'a str,
    message: String,
}

fn fail(kind: &str, message: String) -> ExitCode {
    let body = serde_json::to_string(&ErrorOut {
        error: kind,
        message,
    })
    .unwrap_or_default();
    let _ = writeln!(std::io::stderr(), "{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            return fail(
                "usage",
                text.trim().trim_start_matches("error: ").to_string(),
            );
        }
    };
    let outcome = match cli.command {
        Command::Divergence(a) => divergence(a),
        Command::Estimate(a) => estimate(a),
        Command::Influence(a) => influence(a),
        Command::BiasApprox(a) => bias_approx(a),
        Command::Test(a) => test(a),
        Command::Simulate(a) => simulate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), e.to_string()),
    }
}
