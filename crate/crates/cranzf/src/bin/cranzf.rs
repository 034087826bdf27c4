//! Command-line front end: closed-form bound evaluation, single Monte Carlo
//! runs, full sweeps from a spec file, and the built-in validation suite.

use clap::{Args, Parser, Subcommand, ValueEnum};
use cranzf::bounds::{
    lower_bound_report, paq_gap_leading_term, standard_gap_leading_term, BoundParams, BoundScheme,
    SpreadSubscript,
};
use cranzf::channel::{db_to_linear, ClusterConfig};
use cranzf::harness::spec::ExperimentSpec;
use cranzf::harness::{emit_outputs, run_experiment, validate::run_validation};
use cranzf::rates::{ergodic_rate_mc, McOptions, PowerPolicy, Scheme};
use cranzf::rvq::RvqMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "cranzf",
    version,
    about = "Joint zero-forcing over a transmitter cluster with rate-limited CSI sharing: \
             Monte Carlo rates and closed-form bounds"
)]
struct Cli {
    /// Worker threads for Monte Carlo trials (default: all cores).  Results
    /// are identical for any worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed-form rate-gap bound at one parameter point.
    Bound(BoundArgs),
    /// One Monte Carlo rate estimate at a fixed parameter point.
    Simulate(SimulateArgs),
    /// Run a full experiment from a TOML spec file and emit table + plots.
    Sweep(SweepArgs),
    /// Run the built-in property suites and report PASS/FAIL per check.
    Validate {
        /// Trim sample counts for a faster smoke test.
        #[arg(long)]
        quick: bool,
    },
    /// Print a template spec file to stdout.
    SpecTemplate {
        /// Which template to print.
        #[arg(value_enum, default_value_t = TemplateKind::Symmetric)]
        kind: TemplateKind,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateKind {
    Symmetric,
    RandomPlacement,
}

#[derive(Args)]
struct ClusterArgs {
    /// Number of S-RRHs (M).
    #[arg(short = 'm', long, default_value_t = 4)]
    m: usize,
    /// Number of MSs (Q).
    #[arg(short = 'q', long, default_value_t = 8)]
    q: usize,
    /// Antennas per S-RRH (N_t).
    #[arg(long, default_value_t = 8)]
    nt: usize,
    /// Total feedback bits per S-RRH per direction (B).
    #[arg(short = 'b', long)]
    b: u32,
    /// Per-S-RRH power constraint, dB over unit noise.
    #[arg(long)]
    pmax_db: f64,
    /// MSs discarded per S-RRH (PaQ only).
    #[arg(long, default_value_t = 0)]
    qbar: usize,
}

#[derive(Args)]
struct BoundArgs {
    #[command(flatten)]
    cluster: ClusterArgs,
    /// Full rate-gap bound: 1 = standard scheme, 2 = PaQ (symmetric policy).
    #[arg(long, conflicts_with = "corollary")]
    theorem: Option<u8>,
    /// Closed forms: 1 = standard leading term, 2 = PaQ symmetric-policy
    /// bound, 3 = PaQ leading term.
    #[arg(long)]
    corollary: Option<u8>,
    /// Spread subscript used by the PaQ leading term.
    #[arg(long, value_enum, default_value_t = SubscriptArg::Printed)]
    subscript: SubscriptArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SubscriptArg {
    /// Full cluster size, as the closed form is usually written.
    Printed,
    /// Per-MS serving count (the asymptotically exact choice).
    Serving,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cluster: ClusterArgs,
    /// Feedback scheme.
    #[arg(long, value_enum, default_value_t = SchemeArg::Standard)]
    scheme: SchemeArg,
    /// Channel realizations.
    #[arg(long, default_value_t = 300)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Quantizer implementation.
    #[arg(long, value_enum, default_value_t = ModeArg::Surrogate)]
    rvq: ModeArg,
    /// Apply the equal power-backoff strategy instead of the plain
    /// P_max/Q split.
    #[arg(long)]
    backoff: bool,
    /// Print each MS's rate instead of the throughput only.
    #[arg(long)]
    per_ms: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Standard,
    Paq,
    Perfect,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Surrogate,
    Explicit,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec file (TOML).
    spec: PathBuf,
    /// Output directory (overrides the spec's `out_dir`; default `out/<name>`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the spec's rng seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: could not configure {n} workers: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Bound(args) => run_bound(args),
        Command::Simulate(args) => run_simulate(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Validate { quick } => run_validate(quick),
        Command::SpecTemplate { kind } => {
            let spec = match kind {
                TemplateKind::Symmetric => ExperimentSpec::default_symmetric(),
                TemplateKind::RandomPlacement => ExperimentSpec::default_random_placement(),
            };
            println!("{}", spec.to_toml().map_err(|e| e.to_string())?);
            Ok(())
        }
    }
}

fn bound_params(c: &ClusterArgs) -> BoundParams {
    BoundParams {
        m_srrh: c.m,
        q_ms: c.q,
        n_t: c.nt,
        q_bar: c.qbar,
        bits_total: c.b as f64,
        p_max: db_to_linear(c.pmax_db),
    }
}

fn run_bound(args: BoundArgs) -> Result<(), String> {
    let params = bound_params(&args.cluster);
    let selector = match (args.theorem, args.corollary) {
        (Some(t), None) => ("theorem", t),
        (None, Some(c)) => ("corollary", c),
        (None, None) => ("theorem", 1),
        (Some(_), Some(_)) => unreachable!("clap enforces the conflict"),
    };
    match selector {
        ("theorem", 1) => {
            let r =
                lower_bound_report(BoundScheme::Standard, &params).map_err(|e| e.to_string())?;
            println!(
                "standard-scheme rate-gap bound at B = {}",
                params.bits_total
            );
            print_report(&r);
        }
        ("theorem", 2) => {
            let r = lower_bound_report(BoundScheme::PaqSymmetric, &params)
                .map_err(|e| e.to_string())?;
            println!(
                "PaQ rate-gap bound (symmetric policy, Q-bar = {}) at B = {}",
                params.q_bar, params.bits_total
            );
            print_report(&r);
        }
        ("corollary", 1) => {
            let v = standard_gap_leading_term(&params).map_err(|e| e.to_string())?;
            println!("standard-scheme leading-order gap: {v:.6} bits/s/Hz");
        }
        ("corollary", 2) => {
            let r = lower_bound_report(BoundScheme::PaqSymmetric, &params)
                .map_err(|e| e.to_string())?;
            println!(
                "PaQ symmetric-policy bound (Q-bar = {}) at B = {}",
                params.q_bar, params.bits_total
            );
            print_report(&r);
        }
        ("corollary", 3) => {
            let subscript = match args.subscript {
                SubscriptArg::Printed => SpreadSubscript::AsPrinted,
                SubscriptArg::Serving => SpreadSubscript::ServingCount,
            };
            let v = paq_gap_leading_term(&params, subscript).map_err(|e| e.to_string())?;
            println!(
                "PaQ leading-order gap (Q-bar = {}): {v:.6} bits/s/Hz",
                params.q_bar
            );
        }
        (kind, n) => {
            return Err(format!(
                "no {kind} {n}; use --theorem 1|2 or --corollary 1|2|3"
            ))
        }
    }
    Ok(())
}

fn print_report(r: &cranzf::bounds::BoundReport) {
    println!("  delta_r1      = {:.6}", r.delta_r1);
    println!("  delta_r2      = {:.6}", r.delta_r2);
    if r.delta_r_ag != 0.0 {
        println!("  delta_r_ag    = {:.6}", r.delta_r_ag);
    }
    println!("  phi (perfect) = {:.6}", r.r_star);
    println!(
        "  lower bound   = {:.6}  (raw {:.6})",
        r.lower_bound, r.raw_lower_bound
    );
}

fn run_simulate(args: SimulateArgs) -> Result<(), String> {
    let c = &args.cluster;
    let cfg = ClusterConfig::symmetric(c.m, c.q, c.nt, c.pmax_db);
    let scheme = match args.scheme {
        SchemeArg::Standard => Scheme::Standard,
        SchemeArg::Paq => Scheme::Paq { q_bar: c.qbar },
        SchemeArg::Perfect => Scheme::Perfect,
    };
    let mut opts = McOptions::new(scheme, c.b, args.trials, args.seed);
    opts.mode = match args.rvq {
        ModeArg::Surrogate => RvqMode::Surrogate,
        ModeArg::Explicit => RvqMode::Explicit,
    };
    if args.backoff {
        opts.power = PowerPolicy::Backoff;
    }
    let mc = ergodic_rate_mc(&cfg, &opts).map_err(|e| e.to_string())?;
    if args.per_ms {
        for (q, est) in mc.per_ms.iter().enumerate() {
            println!("MS {q}: {:.4} +- {:.4} bits/s/Hz", est.mean, est.std_error);
        }
    }
    println!(
        "throughput: {:.4} +- {:.4} bits/s/Hz over {} trials ({} degenerate resamples)",
        mc.throughput(),
        mc.throughput_se(),
        args.trials,
        mc.degenerate_resamples
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), String> {
    let mut spec = ExperimentSpec::from_file(&args.spec).map_err(|e| e.to_string())?;
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    let out_dir = args
        .out
        .or_else(|| spec.out_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&spec.name));
    let output = run_experiment(&spec).map_err(|e| e.to_string())?;
    for w in &output.warnings {
        eprintln!("note: {w}");
    }
    let paths = emit_outputs(&output, &out_dir).map_err(|e| e.to_string())?;
    println!("results: {}", paths.results_csv.display());
    println!("candidates: {}", paths.candidates_csv.display());
    println!("resolved spec: {}", paths.resolved_spec.display());
    println!("plot: {}", paths.plot_svg.display());
    Ok(())
}

fn run_validate(quick: bool) -> Result<(), String> {
    let outcomes = run_validation(quick);
    let mut failures = 0;
    for o in &outcomes {
        let tag = if o.passed { "PASS" } else { "FAIL" };
        println!("{tag} {:<34} {}", o.name, o.detail);
        if !o.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        Err(format!("{failures} of {} checks failed", outcomes.len()))
    } else {
        println!("all {} checks passed", outcomes.len());
        Ok(())
    }
}
