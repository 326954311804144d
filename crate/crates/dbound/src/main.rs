use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dbound::experiments::{
    emit_figure_data, fmt_p, optimize, tradeoff_chart, Figure, FigureParams, OptimizeRequest,
    OursCurve, TradeoffParams,
};
use dbound::io::{append_result, events_json, load_config, load_document, ResultRecord};
use dbound::simkit::{estimate_availability, estimate_security, Engine, ExperimentConfig};
use dbound_core::adversaries::Strategy;
use dbound_core::analytics;
use dbound_core::baselines::ProtocolId;
use dbound_core::bits::Bits;
use dbound_core::noise::switched_rounds;
use dbound_core::scenario::{NoiseLegs, RegisterSource};

#[derive(Parser)]
#[command(
    name = "dbound",
    version,
    about = "Distance-bounding protocol analysis and simulation"
)]
struct Cli {
    /// Worker threads for Monte Carlo runs (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print an analytic curve as CSV `n,p`.
    Analyze(AnalyzeArgs),
    /// Monte Carlo estimate of one configuration, as JSON.
    Simulate(SimulateArgs),
    /// Run the switch detector on a mismatch vector.
    Detect(DetectArgs),
    /// Protocol trade-off chart as CSV.
    Tradeoff(TradeoffArgs),
    /// Grid search for the tolerance and pattern threshold.
    Optimize(OptimizeArgs),
    /// Data behind the figures, as CSV.
    Figures(FiguresArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    Mafia,
    Distance,
    MafiaStrategy,
    DistanceStrategy,
    HkMafia,
    HkDistance,
    HkFrr,
    HkAcceptance,
    Naive,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(value_enum)]
    curve: Curve,
    /// Largest round count.
    #[arg(default_value_t = 64)]
    n: usize,
    /// Tolerance for the noisy curves (capped at each row's n).
    #[arg(long, default_value_t = 0)]
    x: usize,
    #[arg(long, default_value_t = 0.0)]
    pf: f64,
    #[arg(long, default_value_t = 0.0)]
    pb: f64,
}

#[derive(Args)]
struct SeedArgs {
    /// Master seed; drawn from the OS and reported on stderr when absent.
    #[arg(long, env = "DBOUND_SEED")]
    seed: Option<u64>,
}

impl SeedArgs {
    fn resolve(&self, fallback: Option<u64>) -> u64 {
        self.seed.or(fallback).unwrap_or_else(|| {
            let s = rand::random::<u64>();
            eprintln!("seed: {s}");
            s
        })
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// TOML or JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<ProtocolId>,
    /// `honest` measures the false rejection ratio; a strategy id measures attack success.
    #[arg(long, default_value = "mafia-preask")]
    role: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    pf: Option<f64>,
    #[arg(long)]
    pb: Option<f64>,
    #[arg(long)]
    x: Option<usize>,
    #[arg(long)]
    dl: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[command(flatten)]
    seed: SeedArgs,
    /// Noisy links during relay attacks: `both` or `verifier`.
    #[arg(long)]
    legs: Option<NoiseLegs>,
    /// Register material: `ideal` or `hmac`.
    #[arg(long)]
    registers: Option<RegisterSource>,
    /// Append the result to this JSON-lines log.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Mismatch vector as a 0/1 string.
    d: Bits,
    /// The `Q` register as a 0/1 string.
    q: Bits,
    #[arg(long)]
    dl: usize,
}

#[derive(Args)]
struct TradeoffArgs {
    #[arg(long, default_value_t = 64)]
    a_max: u32,
    #[arg(long, default_value_t = 64)]
    b_max: u32,
    #[arg(long = "n", alias = "n-max", default_value_t = 64)]
    n: usize,
    /// Memory cap in bits per round.
    #[arg(long)]
    memory_cap: Option<u128>,
    #[arg(long, default_value_t = OursCurve::Recursion)]
    curve: OursCurve,
    #[arg(long, value_delimiter = ',', default_values_t = [ProtocolId::Ours, ProtocolId::Hk, ProtocolId::AT_FULL, ProtocolId::AT3])]
    protocols: Vec<ProtocolId>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OptimizeArgs {
    /// TOML or JSON optimize request; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<ProtocolId>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    pf: Option<f64>,
    #[arg(long)]
    pb: Option<f64>,
    /// Availability bound on the false rejection ratio.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[command(flatten)]
    seed: SeedArgs,
    #[arg(long)]
    legs: Option<NoiseLegs>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FiguresArgs {
    /// A figure id (fig2a, fig2b, fig3a, fig3b, fig5a, fig5b) or `all`.
    which: String,
    #[arg(long, default_value_t = 64)]
    n_max: usize,
    #[arg(long, default_value_t = 48)]
    n_noisy: usize,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value_t = OursCurve::Recursion)]
    curve: OursCurve,
    #[command(flatten)]
    seed: SeedArgs,
    /// Output file, or a directory when `which` is `all`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, body: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<String> {
    if a.n == 0 {
        bail!("--n must be at least 1");
    }
    let mut out = String::from("n,p\n");
    let mafia = analytics::mafia_table(a.n)?;
    let distance = analytics::distance_table(a.n)?;
    for n in 1..=a.n {
        let x = a.x.min(n);
        let p = match a.curve {
            Curve::Mafia => mafia[n - 1].p_m,
            Curve::Distance => distance[n - 1].p_d,
            Curve::MafiaStrategy => analytics::mafia_strategy_success(n)?,
            Curve::DistanceStrategy => analytics::distance_strategy_success(n)?,
            Curve::HkMafia => analytics::hk_mafia(n),
            Curve::HkDistance => analytics::hk_distance(n),
            Curve::HkFrr => analytics::hk_frr(n, x, a.pf, a.pb)?,
            Curve::HkAcceptance => analytics::hk_acceptance(n, x, a.pf, a.pb)?,
            Curve::Naive => analytics::naive_bound(n),
        };
        out.push_str(&format!("{n},{}\n", fmt_p(p)));
    }
    Ok(out)
}

fn simulate(s: &SimulateArgs, engine: &Engine) -> Result<String> {
    let mut cfg = match &s.config {
        Some(path) => load_config(path)?,
        None => {
            let (Some(p), Some(n)) = (s.protocol, s.n) else {
                bail!("--protocol and --n are required without --config");
            };
            ExperimentConfig::new(p, n)
        }
    };
    if let Some(p) = s.protocol {
        cfg.protocol = p;
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),*) => {$( if let Some(v) = s.$flag { cfg.$field = v; } )*};
    }
    set!(n <- n, p_f <- pf, p_b <- pb, x <- x, dl <- dl, trials <- trials, legs <- legs, registers <- registers);
    cfg.master_seed = s.seed.resolve(s.config.as_ref().map(|_| cfg.master_seed));
    let (measure, estimate) = if s.role == "honest" {
        ("availability", estimate_availability(&cfg, engine)?)
    } else {
        cfg.adversary = s.role.parse::<Strategy>()?;
        ("security", estimate_security(&cfg, engine)?)
    };
    let record = ResultRecord::new(&cfg, measure, &estimate);
    if let Some(log) = &s.out {
        append_result(log, &record)?;
    }
    Ok(serde_json::to_string_pretty(&record)? + "\n")
}

fn run_optimize(o: &OptimizeArgs, engine: &Engine) -> Result<String> {
    let mut req = match &o.config {
        Some(path) => load_document::<OptimizeRequest>(path)?,
        None => {
            let (Some(p), Some(n)) = (o.protocol, o.n) else {
                bail!("--protocol and --n are required without --config");
            };
            let noise =
                dbound_core::noise::NoiseModel::new(o.pf.unwrap_or(0.0), o.pb.unwrap_or(0.0))?;
            OptimizeRequest::new(p, n, noise, 0.05, 100_000, 0)
        }
    };
    if let Some(p) = o.protocol {
        req.protocol = p;
    }
    macro_rules! set {
        ($($field:ident <- $flag:ident),*) => {$( if let Some(v) = o.$flag { req.$field = v; } )*};
    }
    set!(n <- n, p_f <- pf, p_b <- pb, delta <- delta, trials <- trials, legs <- legs);
    req.master_seed = o.seed.resolve(o.config.as_ref().map(|_| req.master_seed));
    let res = optimize(&req, engine)?;
    let body = serde_json::to_string_pretty(&res)? + "\n";
    if let Some(p) = &o.out {
        fs::write(p, &body).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(body)
}

fn figures(f: &FiguresArgs, engine: &Engine) -> Result<()> {
    let params = FigureParams {
        n_max: f.n_max,
        n_noisy: f.n_noisy,
        trials: f.trials,
        master_seed: 0,
        delta: f.delta,
        ours: f.curve,
    };
    let needs_seed = |figs: &[Figure]| {
        figs.iter()
            .any(|f| matches!(f, Figure::Fig5a | Figure::Fig5b))
    };
    if f.which == "all" {
        let Some(dir) = &f.out else {
            bail!("`figures all` needs --out <directory>");
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let params = FigureParams {
            master_seed: if needs_seed(&Figure::ALL) {
                f.seed.resolve(None)
            } else {
                0
            },
            ..params
        };
        for fig in Figure::ALL {
            let body = emit_figure_data(fig, &params, engine)?;
            let path = dir.join(format!("{fig}.csv"));
            fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        }
        return Ok(());
    }
    let fig: Figure = f.which.parse()?;
    let params = FigureParams {
        master_seed: if needs_seed(&[fig]) {
            f.seed.resolve(None)
        } else {
            0
        },
        ..params
    };
    emit(f.out.as_deref(), &emit_figure_data(fig, &params, engine)?)
}

fn run(cli: Cli) -> Result<()> {
    let engine = || Engine::new(cli.workers);
    match &cli.command {
        Command::Analyze(a) => emit(None, &analyze(a)?),
        Command::Simulate(s) => emit(None, &simulate(s, &engine()?)?),
        Command::Detect(d) => {
            let events = switched_rounds(&d.d, &d.q, d.dl)?;
            emit(None, &(events_json(&events) + "\n"))
        }
        Command::Tradeoff(t) => {
            let params = TradeoffParams {
                protocols: t.protocols.clone(),
                a_max: t.a_max,
                b_max: t.b_max,
                n_max: t.n,
                memory_cap_per_round: t.memory_cap,
                ours: t.curve,
            };
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["a", "b", "winner", "rounds", "memory_bits"])?;
            for c in tradeoff_chart(&params)? {
                w.serialize((
                    c.a,
                    c.b,
                    c.winner.map(|p| p.to_string()),
                    c.rounds_needed,
                    c.memory_bits.map(|m| m.to_string()),
                ))?;
            }
            emit(t.out.as_deref(), &String::from_utf8(w.into_inner()?)?)
        }
        Command::Optimize(o) => emit(None, &run_optimize(o, &engine()?)?),
        Command::Figures(f) => figures(f, &engine()?),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
