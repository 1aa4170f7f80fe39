//! Command-line front end: experiments, named scenarios, stream dumps, and
//! plan validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use duochirp::channel::write_stream;
use duochirp::harness::scenarios::{self, ScenarioCurves, PER_TARGET};
use duochirp::harness::{
    emit_csv, parse_config, parse_plan, run_experiment, synthesize_trial, SimConfig,
};
use duochirp::preamble::validate_assignment;
use duochirp::{Error, Result};

#[derive(Parser)]
#[command(
    name = "duochirp",
    about = "Double-chirp preamble detection simulator for LoRa-style uplinks"
)]
struct Cli {
    /// Experiment configuration file (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the trial count per SNR point.
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Output path (CSV for experiments, binary for stream dumps).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker thread count (defaults to the available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment over the configured SNR grid.
    Run,
    /// Run a named reproduction: fig4, fig8, fig9, fig10, fig11, example1,
    /// example2, or self-resemblance.
    Scenario { name: String },
    /// Synthesize one trial's reception stream and write the binary dump.
    DumpStream {
        /// SNR in dB for the synthesized stream.
        #[arg(long, default_value_t = 0.0)]
        snr_db: f64,
        /// Trial index selecting the seeded draw.
        #[arg(long, default_value_t = 0)]
        trial_index: u64,
    },
    /// Check an assignment plan file against the pairing constraints.
    ValidatePlan { plan: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(cli: &Cli) -> Result<SimConfig> {
    let mut config = match &cli.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    config.validate()?;
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run => {
            let config = load_config(cli)?;
            let result = run_experiment(&config)?;
            match &cli.out {
                Some(path) => emit_csv(&result, path)?,
                None => print!("{}", duochirp::harness::csv_text(&result)),
            }
            Ok(())
        }
        Command::Scenario { name } => run_scenario(cli, name),
        Command::DumpStream {
            snr_db,
            trial_index,
        } => {
            let config = load_config(cli)?;
            let out = cli
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("dump-stream requires --out".into()))?;
            let plan = duochirp::preamble::assign_preambles(
                config.n_users,
                config.m(),
                config.policy,
                config.master_seed,
            )?;
            let mut plan = plan;
            plan.n_preamble = config.n_preamble;
            let (stream, toas) = synthesize_trial(&config, &plan, *snr_db, *trial_index)?;
            write_stream(&stream, config.m(), out)?;
            println!(
                "wrote {} antennas x {} samples to {} (arrivals at {:?})",
                stream.antennas(),
                stream.t,
                out.display(),
                toas
            );
            Ok(())
        }
        Command::ValidatePlan { plan } => {
            let plan = parse_plan(&std::fs::read_to_string(plan)?)?;
            let report = validate_assignment(&plan);
            if report.is_valid() {
                println!(
                    "plan valid: {} devices, all pairwise deltas distinct and nonzero",
                    plan.assignments.len()
                );
                Ok(())
            } else {
                println!("{report}");
                Err(Error::Config(format!(
                    "plan has {} violation(s)",
                    report.violations.len()
                )))
            }
        }
    }
}

fn scenario_trials(cli: &Cli) -> usize {
    cli.trials.unwrap_or(scenarios::DEFAULT_TRIALS)
}

fn scenario_seed(cli: &Cli) -> u64 {
    cli.seed.unwrap_or(1)
}

fn run_scenario(cli: &Cli, name: &str) -> Result<()> {
    let trials = scenario_trials(cli);
    let seed = scenario_seed(cli);
    match name {
        "fig9" => {
            let set = scenarios::fig9(&[1, 5, 10, 15], trials, seed)?;
            print_curves(&set, cli.out.as_deref())?;
            print_gap(&set, "users1", "users15");
            Ok(())
        }
        "fig10" => {
            let set = scenarios::fig10(trials, seed)?;
            print_curves(&set, cli.out.as_deref())?;
            print_gap(&set, "l64", "l32");
            Ok(())
        }
        "fig11" => {
            let set = scenarios::fig11(trials, seed)?;
            print_curves(&set, cli.out.as_deref())?;
            print_gap(&set, "n8", "n6");
            print_gap(&set, "n10", "n8");
            Ok(())
        }
        "fig8" => {
            let points = scenarios::fig8(trials, seed)?;
            for p in &points {
                println!(
                    "n_thr {}: missed {:.6} ± {:.6}, wrong {:.6} ± {:.6} at {:+.1} dB ({} draws)",
                    p.n_thr, p.missed, p.missed_ci, p.wrong, p.wrong_ci, p.snr_db, p.draws
                );
            }
            Ok(())
        }
        "fig4" => {
            let set = scenarios::fig4(trials, seed)?;
            print_curves(&set, cli.out.as_deref())?;
            let hi_unique = last_per(&set, "unique-delta");
            let hi_dup = last_per(&set, "duplicate-delta");
            println!(
                "high-SNR PER: duplicate-delta {hi_dup:.6} vs unique-delta {hi_unique:.6} \
                 (ratio {:.1})",
                hi_dup / hi_unique.max(f64::MIN_POSITIVE)
            );
            Ok(())
        }
        "example1" => {
            let r = scenarios::example1(seed)?;
            println!(
                "ED2 longest aligned run: {} (expected 0); ED3: {} (threshold {}): {}",
                r.ed2_longest_run,
                r.ed3_longest_run,
                r.n_thr,
                verdict(r.passes())
            );
            Ok(())
        }
        "example2" => {
            let r = scenarios::example2(seed)?;
            println!(
                "fired: ED1 {}, ED2 {}, ED3 {}; ED3 joint-peak activity {:.2}: {}",
                r.ed1_fired,
                r.ed2_fired,
                r.ed3_fired,
                r.ed3_peak_activity,
                verdict(r.passes())
            );
            Ok(())
        }
        "self-resemblance" => {
            let r = scenarios::self_resemblance()?;
            println!(
                "{} of {} grid peaks above {:.1} at spacing {}, off-grid max {:.2}: {}",
                r.peak_count,
                r.expected_peaks,
                r.threshold,
                r.spacing,
                r.offgrid_max,
                verdict(r.passes())
            );
            Ok(())
        }
        other => Err(Error::Config(format!(
            "unknown scenario {other:?}; expected fig4, fig8, fig9, fig10, fig11, \
             example1, example2, or self-resemblance"
        ))),
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "ok"
    } else {
        "MISMATCH"
    }
}

fn last_per(set: &ScenarioCurves, label: &str) -> f64 {
    set.curve(label)
        .and_then(|c| c.result.points.last())
        .map(|p| p.per_overall)
        .unwrap_or(f64::NAN)
}

fn curve_path(base: &Path, label: &str) -> PathBuf {
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("curve");
    let ext = base.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    base.with_file_name(format!("{stem}_{label}.{ext}"))
}

fn print_curves(set: &ScenarioCurves, out: Option<&Path>) -> Result<()> {
    for c in &set.curves {
        match c.crossing(PER_TARGET) {
            Some(snr) => println!(
                "{} {}: PER {PER_TARGET:.0e} crossing at {snr:+.2} dB",
                set.name, c.label
            ),
            None => println!(
                "{} {}: no PER {PER_TARGET:.0e} crossing inside the grid",
                set.name, c.label
            ),
        }
        if let Some(base) = out {
            let path = curve_path(base, &c.label);
            emit_csv(&c.result, &path)?;
            println!("  wrote {}", path.display());
        }
    }
    Ok(())
}

fn print_gap(set: &ScenarioCurves, left: &str, right: &str) {
    match set.gap_db(left, right) {
        Some(gap) => println!("gap {left} -> {right}: {gap:+.2} dB"),
        None => println!("gap {left} -> {right}: undefined (missing crossing)"),
    }
}
