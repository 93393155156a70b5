//! Command-line front end; the work happens in `depq::harness`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use depq::harness::{self, exit, Impl, RunLength, Scenario, StressConfig, WorkloadConfig};
use depq::lincheck::{CheckConfig, Verdict};
use depq::{Error, MultiConsumerMode, ReclaimMode};

#[derive(Parser)]
#[command(
    name = "depq",
    version,
    about = "Concurrent double-ended priority queue harness"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a throughput workload and print a report.
    ///
    /// CSV columns: schema, impl, mode, threads_insert, threads_min,
    /// threads_max, seed, wall_ms, inserts, extract_min_ok,
    /// extract_min_empty, extract_max_ok, extract_max_empty,
    /// insert_ops_per_sec, extract_min_ops_per_sec, extract_max_ops_per_sec,
    /// reserve_failures_min, reserve_failures_max, insert_cas_failures,
    /// batches, max_concurrent_combiners, retired, remaining, audit_passed,
    /// accounting_ok, charging_ok.
    ///
    /// Exits 2 on an invalid configuration and 3 if a post-run check fails.
    Bench {
        #[command(flatten)]
        w: WorkloadArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Run short concurrent windows and check each history.
    ///
    /// Exits 4 if any window is not linearizable or cannot be decided.
    Stress {
        #[command(flatten)]
        w: WorkloadArgs,
        #[arg(long, default_value_t = 500)]
        windows: usize,
        /// Operations per window, prefill included.
        #[arg(long, default_value_t = 12)]
        window_ops: usize,
        /// Recorded inserts at the start of each window.
        #[arg(long, default_value_t = 2)]
        window_prefill: usize,
        /// Directory for one window-NNNNN.jsonl history per window.
        #[arg(long)]
        capture: Option<PathBuf>,
    },
    /// Check a JSON-lines history file. Exits 4 if not linearizable.
    Lincheck {
        file: PathBuf,
        /// Maximum completed operations.
        #[arg(long, default_value_t = depq::lincheck::checker::DEFAULT_BOUND)]
        bound: usize,
        /// Maximum search states before giving up.
        #[arg(long, default_value_t = depq::lincheck::checker::DEFAULT_BUDGET)]
        budget: usize,
    },
    /// Force a named interleaving: counterexample, twist, single-item-race.
    ///
    /// Exits 1 if the expectation fails and 5 if the schedule cannot be forced.
    Replay { name: String },
}

#[derive(Copy, Clone, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct WorkloadArgs {
    /// list-depq, dual-heap or dual-list.
    #[arg(long = "impl", default_value = "list-depq")]
    implementation: Impl,
    /// two-locks or combining (dual implementations only).
    #[arg(long, default_value = "combining")]
    mode: MultiConsumerMode,
    #[arg(long, default_value_t = 1)]
    threads_insert: usize,
    #[arg(long, default_value_t = 1)]
    threads_min: usize,
    #[arg(long, default_value_t = 1)]
    threads_max: usize,
    #[arg(long, default_value_t = 0)]
    prefill: usize,
    /// Keys are drawn from 0..KEY_RANGE.
    #[arg(long, default_value_t = 1000)]
    key_range: i64,
    /// Operations per worker thread.
    #[arg(long, conflicts_with = "duration_ms")]
    ops: Option<u64>,
    #[arg(long)]
    duration_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = depq::DEFAULT_BATCH_CAP)]
    batch_cap: usize,
    /// deferred or epoch.
    #[arg(long, default_value = "deferred")]
    reclaim: ReclaimMode,
    #[arg(long, hide = true)]
    inject_ignore_reservation: bool,
}

impl WorkloadArgs {
    fn config(&self) -> WorkloadConfig {
        let length = match (self.ops, self.duration_ms) {
            (_, Some(ms)) => RunLength::DurationMs(ms),
            (Some(n), None) => RunLength::OpsPerThread(n),
            (None, None) => RunLength::OpsPerThread(10_000),
        };
        WorkloadConfig {
            implementation: self.implementation,
            mode: self.mode,
            threads_insert: self.threads_insert,
            threads_min: self.threads_min,
            threads_max: self.threads_max,
            prefill: self.prefill,
            key_range: self.key_range,
            length,
            seed: self.seed,
            batch_cap: self.batch_cap,
            reclaim: self.reclaim,
            ignore_reservation: self.inject_ignore_reservation,
        }
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        Error::ScheduleNotRealized(_) => exit::SCHEDULE_NOT_REALIZED,
        Error::SearchBudgetExceeded(_) | Error::HistoryTooLarge { .. } => exit::NOT_LINEARIZABLE,
        _ => exit::INVALID_CONFIG,
    })
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Bench { w, format } => {
            let r = match harness::run_bench(&w.config()) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            match format {
                Format::Json => println!("{}", r.to_json()),
                Format::Csv => println!("{}\n{}", harness::RunReport::csv_header(), r.csv_row()),
            }
            if r.healthy() {
                ExitCode::SUCCESS
            } else {
                eprintln!("post-run check failed");
                ExitCode::from(exit::AUDIT_FAILED)
            }
        }
        Cmd::Stress {
            w,
            windows,
            window_ops,
            window_prefill,
            capture,
        } => {
            let cfg = StressConfig {
                workload: w.config(),
                windows,
                ops_per_window: window_ops,
                window_prefill,
                capture,
                check: CheckConfig::default(),
            };
            let r = match harness::run_stress(&cfg) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            println!("{} / {} windows linearizable", r.linearizable, r.windows);
            for (label, list) in [
                ("NOT_LINEARIZABLE", &r.violations),
                ("UNDECIDED", &r.undecided),
            ] {
                for o in list {
                    match (&o.path, &o.verdict) {
                        (Some(p), _) => println!("{label}: window {} at {}", o.index, p.display()),
                        (None, Err(e)) => {
                            println!("{label}: window {} ({e})\n{}", o.index, o.history)
                        }
                        (None, Ok(_)) => println!("{label}: window {}\n{}", o.index, o.history),
                    }
                }
            }
            if r.all_linearizable() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(exit::NOT_LINEARIZABLE)
            }
        }
        Cmd::Lincheck {
            file,
            bound,
            budget,
        } => match harness::lincheck_file(&file, CheckConfig { bound, budget }) {
            Ok((_, Verdict::Linearizable(order))) => {
                let order: Vec<String> = order.iter().map(|i| i.to_string()).collect();
                println!("LINEARIZABLE\nwitness: {}", order.join(" "));
                ExitCode::SUCCESS
            }
            Ok((_, Verdict::NotLinearizable)) => {
                println!("NOT_LINEARIZABLE");
                ExitCode::from(exit::NOT_LINEARIZABLE)
            }
            Err(e) => fail(e),
        },
        Cmd::Replay { name } => {
            let scenario: Scenario = match name.parse() {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(exit::INVALID_CONFIG);
                }
            };
            match harness::replay(scenario) {
                Ok(r) => {
                    print!("{r}");
                    if r.passed {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(exit::EXPECTATION_FAILED)
                    }
                }
                Err(e) => fail(e),
            }
        }
    }
}
