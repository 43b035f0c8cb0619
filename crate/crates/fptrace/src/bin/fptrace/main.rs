//! Command-line front end: scheme parameters, capacity tables, Monte Carlo
//! simulation, and score-histogram export.

mod output;

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use fptrace::channels::Attack;
use fptrace::model::BiasDistribution;
use fptrace::params::{
    asymptotic_length, catch_all_params, deterministic_joint_params, joint_params, simple_params,
    universal_design,
};
use fptrace::probability::{
    deterministic_balance_bias, mutual_info_joint, mutual_info_simple, optimal_bias, Mode,
    PositionModel,
};
use fptrace::sim::{
    estimate_errors, score_histogram, AttackSpec, Decoder, ErrorEstimate, ExperimentConfig,
    Normalization,
};
use fptrace::stats::SampleMoments;

#[derive(Parser)]
#[command(
    name = "fptrace",
    about = "Fingerprinting codes and group testing with log-likelihood decoders",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct OutputArgs {
    /// Output format.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Write output to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Compute code length and threshold for given error budgets.
    Params(ParamsArgs),
    /// Sweep the per-position information over the bias and report its peak.
    Capacity(CapacityArgs),
    /// Run Monte Carlo trials and estimate error rates.
    Simulate(SimulateArgs),
    /// Export binned densities of normalized innocent scores.
    Histogram(HistogramArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Calculator {
    /// Pick by decoder and mode.
    Auto,
    /// Catch-one bound, per-user scores.
    Simple,
    /// All-innocent-tuple bound, per-tuple scores.
    Joint,
    /// Certain catch for deterministic channels at the balance bias.
    Deterministic,
    /// Attack-agnostic: interleaving-sized length, normalized threshold.
    Universal,
    /// Catch-all heuristic split.
    CatchAll,
}

#[derive(Args)]
struct ParamsArgs {
    /// Attack name: interleaving | all1 | majority | minority | coinflip |
    /// additive:<r> | dilution:<r>.
    #[arg(long)]
    attack: Attack,
    #[arg(long)]
    c: usize,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    eps1: f64,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long, default_value = "simple")]
    mode: Mode,
    /// Bias to evaluate the moment function at; defaults to the
    /// information-optimal bias for the attack and mode.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    calculator: Calculator,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    attack: Attack,
    #[arg(long)]
    c: usize,
    #[arg(long, default_value = "simple")]
    mode: Mode,
    /// Number of grid points for the bias sweep.
    #[arg(long, default_value_t = 99)]
    points: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with an experiment description; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    attack: Option<Attack>,
    #[arg(long)]
    c: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// llr | interleaving-g | oosterwijk-h | emi-m | joint-llr |
    /// joint-interleaving.
    #[arg(long)]
    decoder: Option<Decoder>,
    /// fixed:<p> | arcsine[:<delta>]. Defaults: arcsine for universal runs,
    /// the optimal (or balance) bias otherwise.
    #[arg(long)]
    bias: Option<BiasDistribution>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    ell: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Error budgets used to derive (ell, eta) when not given explicitly.
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long, value_enum, default_value = "auto")]
    calculator: Calculator,
    /// none | exact | sample; defaults to sample for universal decoders.
    #[arg(long)]
    normalize: Option<NormalizeArg>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reuse one code across trials (variance-reduction studies).
    #[arg(long)]
    reuse_code: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizeArg {
    None,
    Exact,
    Sample,
}

impl From<NormalizeArg> for Normalization {
    fn from(n: NormalizeArg) -> Self {
        match n {
            NormalizeArg::None => Normalization::None,
            NormalizeArg::Exact => Normalization::Exact,
            NormalizeArg::Sample => Normalization::Sample,
        }
    }
}

#[derive(Args)]
struct HistogramArgs {
    /// Comma-separated attack list; one density column per attack.
    #[arg(long, value_delimiter = ',', required = true)]
    attack: Vec<Attack>,
    #[arg(long)]
    c: usize,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    ell: u64,
    #[arg(long, default_value = "interleaving-g")]
    decoder: Decoder,
    #[arg(long, default_value = "arcsine")]
    bias: BiasDistribution,
    /// Trials per attack; each pools (n - c) innocent scores.
    #[arg(long)]
    trials: u64,
    #[arg(long, default_value_t = 60)]
    bins: usize,
    #[arg(long, value_enum, default_value = "exact")]
    normalize: NormalizeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Params(args) => cmd_params(args),
        Command::Capacity(args) => cmd_capacity(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Histogram(args) => cmd_histogram(args),
    };
    if let Err(err) = result {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn emit(output: &OutputArgs, text: String) -> anyhow::Result<()> {
    match &output.out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct ParamsOutput {
    attack: String,
    mode: String,
    calculator: String,
    c: usize,
    n: u64,
    eps1: f64,
    eps2: f64,
    p: f64,
    ell: u64,
    eta: f64,
    /// Scale eta lives on: raw per-user (or per-tuple) totals, or normalized
    /// scores.
    eta_scale: String,
    gamma: f64,
    asymptotic_length: f64,
    /// ell divided by the leading-order asymptotic length.
    length_ratio: f64,
    notes: Vec<String>,
}

fn cmd_params(args: ParamsArgs) -> anyhow::Result<()> {
    let channel = args.attack.channel(args.c)?;
    let calculator = match args.calculator {
        Calculator::Auto => match args.mode {
            Mode::Simple => Calculator::Simple,
            Mode::Joint => Calculator::Joint,
        },
        other => other,
    };
    let mut notes = Vec::new();
    let eps2 = match (args.eps2, matches!(calculator, Calculator::Deterministic)) {
        (Some(e), _) => e,
        (None, true) => 0.0,
        (None, false) => bail!("--eps2 is required except with --calculator deterministic"),
    };

    let (label, model_mode) = match calculator {
        Calculator::Simple => ("simple", Mode::Simple),
        Calculator::Joint => ("joint", Mode::Joint),
        Calculator::Deterministic => ("deterministic-joint", Mode::Joint),
        Calculator::Universal => ("universal", Mode::Simple),
        Calculator::CatchAll => ("catch-all", Mode::Simple),
        Calculator::Auto => unreachable!(),
    };
    let p = match (args.p, calculator) {
        (Some(p), _) => p,
        (None, Calculator::Deterministic) => deterministic_balance_bias(&channel)?,
        (None, Calculator::Universal) => 0.5,
        (None, _) => optimal_bias(&channel, model_mode),
    };
    let model = PositionModel::new(&channel, p)?;

    let (params, eta_scale) = match calculator {
        Calculator::Simple => (simple_params(args.n, args.eps1, eps2, &model)?, "raw-score"),
        Calculator::Joint => (joint_params(args.n, args.eps1, eps2, &model)?, "raw-score"),
        Calculator::Deterministic => {
            if !channel.is_deterministic() {
                bail!("--calculator deterministic needs a deterministic channel");
            }
            notes.push(
                "certain catch: the all-guilty tuple always scores ell*ln2; eps2 = 0".into(),
            );
            (
                deterministic_joint_params(args.c, args.n, args.eps1)?,
                "raw-score",
            )
        }
        Calculator::Universal => {
            notes.push(
                "length sized for the interleaving attack, conjectured worst case \
                 for this decoder"
                    .into(),
            );
            notes.push(
                "moment function evaluated at the fixed central bias p = 1/2; the \
                 arcsine encoder draws varying biases"
                    .into(),
            );
            notes.push("eta is the normalized-score threshold Phi^-1(1 - eps1/n)".into());
            (
                universal_design(args.c, args.n, args.eps1, eps2)?,
                "normalized-score",
            )
        }
        Calculator::CatchAll => {
            notes.push(
                "catch-all split is a heuristic: colluder scores are treated as \
                 independent, which the shared output does not guarantee"
                    .into(),
            );
            (
                catch_all_params(args.n, args.eps1, eps2, &model)?,
                "raw-score",
            )
        }
        Calculator::Auto => unreachable!(),
    };

    let asymptotic = asymptotic_length(args.attack, args.c, args.n, args.mode)?;
    let out = ParamsOutput {
        attack: args.attack.to_string(),
        mode: args.mode.to_string(),
        calculator: label.into(),
        c: args.c,
        n: args.n,
        eps1: args.eps1,
        eps2,
        p,
        ell: params.ell,
        eta: params.eta,
        eta_scale: eta_scale.into(),
        gamma: params.gamma,
        asymptotic_length: asymptotic,
        length_ratio: params.ell as f64 / asymptotic,
        notes,
    };
    let text = match args.output.format {
        Format::Json => output::to_json(&out)?,
        Format::Csv => output::to_flat_csv(&out)?,
    };
    emit(&args.output, text)
}

#[derive(Serialize)]
struct CapacityPoint {
    p: f64,
    info_bits: f64,
}

#[derive(Serialize)]
struct CapacityOutput {
    attack: String,
    mode: String,
    c: usize,
    optimal_p: f64,
    optimal_info_bits: f64,
    /// In joint mode the rate is info/c; reported for convenience.
    optimal_rate_bits: f64,
    grid: Vec<CapacityPoint>,
}

fn cmd_capacity(args: CapacityArgs) -> anyhow::Result<()> {
    if args.points < 1 {
        bail!("--points must be >= 1");
    }
    let channel = args.attack.channel(args.c)?;
    let info = |p: f64| -> anyhow::Result<f64> {
        let model = PositionModel::new(&channel, p)?;
        Ok(match args.mode {
            Mode::Simple => mutual_info_simple(&model),
            Mode::Joint => mutual_info_joint(&model),
        })
    };
    let grid: Vec<CapacityPoint> = (1..=args.points)
        .map(|k| {
            let p = k as f64 / (args.points + 1) as f64;
            Ok(CapacityPoint {
                p,
                info_bits: info(p)?,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    let optimal_p = optimal_bias(&channel, args.mode);
    let optimal_info = info(optimal_p)?;
    let out = CapacityOutput {
        attack: args.attack.to_string(),
        mode: args.mode.to_string(),
        c: args.c,
        optimal_p,
        optimal_info_bits: optimal_info,
        optimal_rate_bits: match args.mode {
            Mode::Simple => optimal_info,
            Mode::Joint => optimal_info / args.c as f64,
        },
        grid,
    };
    let text = match args.output.format {
        Format::Json => output::to_json(&out)?,
        Format::Csv => {
            let mut csv = String::from("p,info_bits\n");
            for point in &out.grid {
                csv.push_str(&format!(
                    "{},{}\n",
                    output::sig12(point.p),
                    output::sig12(point.info_bits)
                ));
            }
            csv
        }
    };
    emit(&args.output, text)
}

/// The subset of [`ExperimentConfig`] a config file may specify.
#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    n: Option<usize>,
    c: Option<usize>,
    attack: Option<AttackSpec>,
    bias: Option<BiasDistribution>,
    decoder: Option<Decoder>,
    mode: Option<Mode>,
    ell: Option<u64>,
    eta: Option<f64>,
    eps1: Option<f64>,
    eps2: Option<f64>,
    normalization: Option<Normalization>,
    trials: Option<u64>,
    seed: Option<u64>,
    reuse_code: Option<bool>,
}

#[derive(Serialize)]
struct SimulateOutput {
    config: ExperimentConfig,
    errors: ErrorEstimate,
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let file: PartialConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PartialConfig::default(),
    };

    // Flags override the config file.
    let attack = match (args.attack, file.attack) {
        (Some(a), _) => AttackSpec::Named(a),
        (None, Some(spec)) => spec,
        (None, None) => bail!("--attack is required (or provide it in --config)"),
    };
    let c = args.c.or(file.c).context("--c is required")?;
    let n = args.n.or(file.n).context("--n is required")?;
    let decoder = args.decoder.or(file.decoder).context("--decoder is required")?;
    let trials = args.trials.or(file.trials).context("--trials is required")?;
    if trials == 0 {
        bail!("--trials must be >= 1");
    }
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let mode = args.mode.or(file.mode).unwrap_or(if decoder.is_joint() {
        Mode::Joint
    } else {
        Mode::Simple
    });
    let channel = attack.channel(c)?;

    let calculator = match args.calculator {
        Calculator::Auto => match (decoder, mode) {
            (Decoder::InterleavingG | Decoder::OosterwijkH, Mode::Simple) => Calculator::Universal,
            (_, Mode::Simple) => Calculator::Simple,
            (_, Mode::Joint) => Calculator::Joint,
        },
        other => other,
    };

    let bias = match (args.bias, file.bias) {
        (Some(b), _) => b,
        (None, Some(b)) => b,
        (None, None) => match calculator {
            Calculator::Universal => BiasDistribution::arcsine(0.0)?,
            Calculator::Deterministic => {
                BiasDistribution::fixed(deterministic_balance_bias(&channel)?)?
            }
            _ => BiasDistribution::fixed(optimal_bias(
                &channel,
                match mode {
                    Mode::Simple => Mode::Simple,
                    Mode::Joint => Mode::Joint,
                },
            ))?,
        },
    };

    // (ell, eta): explicit values win; anything missing is derived from the
    // error budgets with the selected calculator.
    let explicit = (args.ell.or(file.ell), args.eta.or(file.eta));
    let (ell, eta) = match explicit {
        (Some(ell), Some(eta)) => (ell, eta),
        (ell_flag, eta_flag) => {
            let eps1 = args.eps1.or(file.eps1).context(
                "--eps1/--eps2 are required when --ell/--eta are not both given",
            )?;
            let eps2 = args.eps2.or(file.eps2);
            let derived = match calculator {
                Calculator::Universal => {
                    universal_design(c, n as u64, eps1, eps2.context("--eps2 is required")?)?
                }
                Calculator::Deterministic => deterministic_joint_params(c, n as u64, eps1)?,
                Calculator::Simple | Calculator::CatchAll | Calculator::Joint => {
                    let p = match bias {
                        BiasDistribution::FixedP(p) => p,
                        BiasDistribution::Arcsine { .. } => bail!(
                            "deriving informed parameters needs a fixed bias; \
                             pass --bias fixed:<p> or give --ell/--eta explicitly"
                        ),
                    };
                    let model = PositionModel::new(&channel, p)?;
                    let eps2 = eps2.context("--eps2 is required")?;
                    match calculator {
                        Calculator::Simple => simple_params(n as u64, eps1, eps2, &model)?,
                        Calculator::CatchAll => catch_all_params(n as u64, eps1, eps2, &model)?,
                        _ => joint_params(n as u64, eps1, eps2, &model)?,
                    }
                }
                Calculator::Auto => unreachable!(),
            };
            (ell_flag.unwrap_or(derived.ell), eta_flag.unwrap_or(derived.eta))
        }
    };

    let normalization = args
        .normalize
        .map(Normalization::from)
        .or(file.normalization)
        .unwrap_or(match calculator {
            Calculator::Universal => Normalization::Sample,
            _ => Normalization::None,
        });

    let config = ExperimentConfig {
        n,
        c,
        attack,
        bias,
        decoder,
        mode,
        ell,
        eta,
        normalization,
        trials,
        seed,
        reuse_code: args.reuse_code || file.reuse_code.unwrap_or(false),
    };
    let errors = estimate_errors(&config)?;
    let out = SimulateOutput { config, errors };
    let text = match args.output.format {
        Format::Json => output::to_json(&out)?,
        Format::Csv => output::to_flat_csv(&out)?,
    };
    emit(&args.output, text)
}

#[derive(Serialize)]
struct HistogramAttack {
    attack: String,
    density: Vec<f64>,
    tail_mass: f64,
    moments: SampleMoments,
}

#[derive(Serialize)]
struct HistogramOutput {
    decoder: String,
    c: usize,
    n: usize,
    ell: u64,
    trials: u64,
    bins: usize,
    pooled_per_attack: usize,
    bin_centers: Vec<f64>,
    attacks: Vec<HistogramAttack>,
    normal_reference: Vec<f64>,
}

fn cmd_histogram(args: HistogramArgs) -> anyhow::Result<()> {
    if args.decoder.is_joint() {
        bail!("histograms are defined for simple decoders");
    }
    let mut centers = None;
    let mut reference = None;
    let mut attacks = Vec::new();
    let mut pooled = 0;
    for &attack in &args.attack {
        let config = ExperimentConfig {
            n: args.n,
            c: args.c,
            attack: attack.into(),
            bias: args.bias,
            decoder: args.decoder,
            mode: Mode::Simple,
            ell: args.ell,
            // Accusation is not exercised here; keep the threshold out of
            // reach so the outcome flags stay quiet.
            eta: f64::MAX,
            normalization: args.normalize.into(),
            trials: args.trials,
            seed: args.seed,
            reuse_code: false,
        };
        let hist = score_histogram(&config, args.bins)?;
        pooled = hist.pooled;
        centers.get_or_insert(hist.bin_centers);
        reference.get_or_insert(hist.reference);
        attacks.push(HistogramAttack {
            attack: attack.to_string(),
            density: hist.density,
            tail_mass: hist.tail_mass,
            moments: hist.moments,
        });
    }
    let out = HistogramOutput {
        decoder: args.decoder.to_string(),
        c: args.c,
        n: args.n,
        ell: args.ell,
        trials: args.trials,
        bins: args.bins,
        pooled_per_attack: pooled,
        bin_centers: centers.unwrap_or_default(),
        attacks,
        normal_reference: reference.unwrap_or_default(),
    };
    let text = match args.output.format {
        Format::Json => output::to_json(&out)?,
        Format::Csv => {
            let mut header = String::from("bin");
            for a in &out.attacks {
                header.push(',');
                header.push_str(&a.attack);
            }
            header.push_str(",normal_ref\n");
            let mut csv = header;
            for (i, &center) in out.bin_centers.iter().enumerate() {
                csv.push_str(&output::sig12(center));
                for a in &out.attacks {
                    csv.push(',');
                    csv.push_str(&output::sig12(a.density[i]));
                }
                csv.push(',');
                csv.push_str(&output::sig12(out.normal_reference[i]));
                csv.push('\n');
            }
            csv
        }
    };
    emit(&args.output, text)
}
