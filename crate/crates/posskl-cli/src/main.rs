//! Command-line surface: transforms, single projections, the projection
//! benchmark, synthetic data generation, training, evaluation, and oracle
//! verification.
//!
//! Exit codes: 0 on success, 1 on domain validation failure, 2 on I/O error.
//! Diagnostics go to standard error as single-line JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use posskl::bench::{run_benchmark, write_csv, BenchConfig};
use posskl::oracle;
use posskl::synth::{generate, read_dataset, write_dataset, SynthConfig};
use posskl::train::{
    evaluate, read_checkpoint, train, write_checkpoint, write_history, TrainConfig,
};
use posskl::{
    build_feasible_set, build_feasible_set_custom, embed_on_support, kl_project, poss_to_prob,
    prob_to_poss, restrict_to_support, FeasibleSet, GapPolicy, PossVec, ProbVec,
};

#[derive(Parser)]
#[command(
    name = "posskl",
    version,
    about = "KL projections onto possibility-induced admissible sets"
)]
struct Cli {
    /// Default seed for randomized commands; falls back to POSSKL_SEED, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    /// probability to possibility
    P2pi,
    /// possibility to probability
    Pi2p,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the probability-possibility bijection to a vector file.
    Transform {
        #[arg(long, value_enum)]
        direction: Direction,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// KL-project a prediction onto the admissible set of a possibility vector.
    Project {
        /// JSON file with the prediction over the full class set.
        #[arg(long)]
        q: PathBuf,
        /// JSON file with the (full) possibility vector; zeros drop classes.
        #[arg(long)]
        pi: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1000)]
        max_cycles: usize,
        #[arg(long, default_value_t = 1e-9)]
        eps_cap: f64,
        #[arg(long, default_value_t = 0.0)]
        tie_tol: f64,
        /// JSON file {"delta_lower": [...], "delta_upper": [...]} with
        /// per-rank gap bounds over the support, replacing the eps rule.
        #[arg(long)]
        custom_gaps: Option<PathBuf>,
        /// Also write the constraint set and its linear system as JSON.
        #[arg(long)]
        emit_set: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Random-instance projection benchmark; writes aggregate rows as CSV.
    Bench {
        #[arg(long, default_value_t = 100)]
        n: usize,
        /// Comma-separated tolerance list.
        #[arg(long, value_delimiter = ',', default_value = "1e-2,1e-3,1e-4")]
        tolerances: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        max_cycles: usize,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Generate synthetic train/test datasets from a config file.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Train a linear softmax classifier on a JSONL dataset.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        history: PathBuf,
    },
    /// Top-1 accuracy of a checkpoint on a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
    },
    /// Run the independent oracles against a projection instance.
    Verify {
        /// JSON file {"pi": [...], "q": [...]} with optional "tol",
        /// "max_cycles", "eps_cap".
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

enum Failure {
    Validation(String),
    Io(String),
}

impl From<posskl::Error> for Failure {
    fn from(e: posskl::Error) -> Self {
        Failure::Validation(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn open_reader(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn create_writer(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let reader = open_reader(path)?;
    serde_json::from_reader(reader)
        .map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create_writer(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::Io(e.to_string()))?;
    writeln!(w).map_err(|e| Failure::Io(e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct VectorFile {
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct GapsFile {
    delta_lower: Vec<f64>,
    delta_upper: Vec<f64>,
}

#[derive(Serialize)]
struct ProjectReport {
    p_star: Vec<f64>,
    support: Vec<usize>,
    kl: f64,
    cycles: usize,
    final_violation: f64,
    converged: bool,
    wall_time: f64,
}

#[derive(Deserialize)]
struct InstanceFile {
    pi: Vec<f64>,
    q: Vec<f64>,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_max_cycles")]
    max_cycles: usize,
    #[serde(default = "default_eps_cap")]
    eps_cap: f64,
}

fn default_tol() -> f64 {
    1e-8
}
fn default_max_cycles() -> usize {
    2000
}
fn default_eps_cap() -> f64 {
    1e-9
}

#[derive(Serialize)]
struct Check {
    name: String,
    passed: bool,
    detail: String,
}

#[derive(Serialize)]
struct VerifyReport {
    checks: Vec<Check>,
    all_passed: bool,
}

fn cmd_transform(direction: Direction, input: &Path, output: &Path) -> CliResult<()> {
    let file: VectorFile = read_json(input)?;
    let values = match direction {
        Direction::P2pi => prob_to_poss(&ProbVec::new(file.values)?),
        Direction::Pi2p => poss_to_prob(&PossVec::new(file.values)?)?.into_vec(),
    };
    write_json(output, &VectorFile { values })
}

#[derive(Serialize)]
struct SetExport<'a> {
    set: &'a FeasibleSet,
    linear_system: posskl::LinearSystem,
}

#[allow(clippy::too_many_arguments)]
fn cmd_project(
    q_path: &Path,
    pi_path: &Path,
    tol: f64,
    max_cycles: usize,
    eps_cap: f64,
    tie_tol: f64,
    custom_gaps: Option<&Path>,
    emit_set: Option<&Path>,
    output: &Path,
) -> CliResult<()> {
    let q_file: VectorFile = read_json(q_path)?;
    let pi_file: VectorFile = read_json(pi_path)?;
    let full_len = pi_file.values.len();
    let q_full = ProbVec::new(q_file.values)?;
    let (pi, q, support) = restrict_to_support(&pi_file.values, &q_full)?;
    let fs = match custom_gaps {
        Some(path) => {
            let gaps: GapsFile = read_json(path)?;
            build_feasible_set_custom(&pi, &gaps.delta_lower, &gaps.delta_upper, tie_tol)?
        }
        None => build_feasible_set(&pi, &GapPolicy { eps_cap, tie_tol })?,
    };
    if let Some(path) = emit_set {
        write_json(
            path,
            &SetExport {
                set: &fs,
                linear_system: fs.linear_system(),
            },
        )?;
    }
    let report = kl_project(&q, &fs, tol, max_cycles)?;
    let p_star = embed_on_support(report.p_star.as_slice(), &support, full_len)?;
    write_json(
        output,
        &ProjectReport {
            p_star,
            support,
            kl: report.kl_to_input,
            cycles: report.cycles_used,
            final_violation: report.final_violation,
            converged: report.converged,
            wall_time: report.wall_time,
        },
    )
}

fn cmd_bench(
    n: usize,
    tolerances: Vec<f64>,
    max_cycles: usize,
    runs: usize,
    seed: u64,
    output: &Path,
) -> CliResult<()> {
    let config = BenchConfig {
        n,
        tolerances,
        max_cycles,
        runs,
        seed,
    };
    let rows = run_benchmark(&config)?;
    let w = create_writer(output)?;
    write_csv(w, &config, &rows)?;
    Ok(())
}

fn cmd_synth(config: &Path, train_out: &Path, test_out: &Path, seed: Option<u64>) -> CliResult<()> {
    let mut cfg: SynthConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let (train, test, _) = generate(&cfg)?;
    write_dataset(create_writer(train_out)?, &cfg, &train)?;
    write_dataset(create_writer(test_out)?, &cfg, &test)?;
    println!(
        "{}",
        serde_json::json!({"train_records": train.len(), "test_records": test.len()})
    );
    Ok(())
}

fn cmd_train(
    dataset: &Path,
    config: &Path,
    checkpoint: &Path,
    history: &Path,
    seed: Option<u64>,
) -> CliResult<()> {
    let mut cfg: TrainConfig = read_json(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let (_, records) = read_dataset(open_reader(dataset)?)?;
    let (model, hist) = train(&records, &cfg)?;
    write_checkpoint(create_writer(checkpoint)?, &model, &cfg)?;
    write_history(create_writer(history)?, &hist)?;
    let final_acc = hist.epochs.last().map(|e| e.train_accuracy);
    println!(
        "{}",
        serde_json::json!({
            "epochs": hist.epochs.len(),
            "final_train_accuracy": final_acc,
            "loss_order_violations": hist.loss_order_violations,
        })
    );
    Ok(())
}

fn cmd_eval(checkpoint: &Path, dataset: &Path) -> CliResult<()> {
    let (model, _) = read_checkpoint(open_reader(checkpoint)?)?;
    let (_, records) = read_dataset(open_reader(dataset)?)?;
    let accuracy = evaluate(&model, &records)?;
    println!(
        "{}",
        serde_json::json!({"accuracy": accuracy, "records": records.len()})
    );
    Ok(())
}

fn cmd_verify(instance: &Path, output: Option<&Path>) -> CliResult<()> {
    let inst: InstanceFile = read_json(instance)?;
    let q_full = ProbVec::new(inst.q)?;
    let (pi, q, _) = restrict_to_support(&inst.pi, &q_full)?;
    let fs = build_feasible_set(
        &pi,
        &GapPolicy {
            eps_cap: inst.eps_cap,
            tie_tol: 0.0,
        },
    )?;
    let report = kl_project(&q, &fs, inst.tol, inst.max_cycles)?;
    let n = fs.n();

    let mut checks = Vec::new();
    checks.push(Check {
        name: "projection_converged".into(),
        passed: report.converged,
        detail: format!(
            "violation {:.3e} after {} cycles",
            report.final_violation, report.cycles_used
        ),
    });
    checks.push(Check {
        name: "witness_feasible".into(),
        passed: fs.max_violation(fs.witness())? <= posskl::FEASIBILITY_TOL,
        detail: "antipignistic point satisfies every constraint".into(),
    });
    checks.push(Check {
        name: "shape_preserved".into(),
        passed: fs.shape_check(&report.p_star)?,
        detail: "output ordering matches the possibility ordering".into(),
    });
    let pref_ok = fs.pref_block_violation(&report.p_star)? <= inst.tol;
    let rev_ok = fs.reversed_dominance_holds(&report.p_star, inst.tol)?;
    checks.push(Check {
        name: "reversed_dominance_agrees".into(),
        passed: pref_ok == rev_ok && pref_ok,
        detail: "nested and reversed cumulative encodings agree".into(),
    });
    if n <= 12 {
        checks.push(Check {
            name: "dominance_brute".into(),
            passed: oracle::dominance_brute(&pi, &report.p_star, inst.tol.max(1e-9))?,
            detail: format!("all 2^{n} events bracketed"),
        });
    }
    if n == 3 {
        let step = 1e-3;
        let grid = oracle::grid_kl_oracle(&q, &fs, step)?;
        let grid_kl = posskl::kl_divergence(&grid, &q)?;
        checks.push(Check {
            name: "grid_oracle".into(),
            passed: report.kl_to_input <= grid_kl + 2.0 * step,
            detail: format!("kl {:.6} vs grid {:.6}", report.kl_to_input, grid_kl),
        });
    }
    if n <= 5 {
        let cycles = 2.min(inst.max_cycles);
        let unrolled = oracle::dykstra_unrolled(&q, &fs, cycles)?;
        let incremental = posskl::dykstra::run_trace(&q, &fs, cycles)?;
        let agree = unrolled.iter().zip(&incremental).all(|(a, b)| {
            a.z.as_slice()
                .iter()
                .zip(b.z.as_slice())
                .all(|(x, y)| (x - y).abs() < 1e-10)
                && a.d.iter().zip(&b.d).all(|(x, y)| (x - y).abs() < 1e-10)
                && a.u.iter().zip(&b.u).all(|(x, y)| (x - y).abs() < 1e-10)
        });
        checks.push(Check {
            name: "unrolled_recursion_agrees".into(),
            passed: agree,
            detail: format!("{cycles} cycles compared entrywise at 1e-10"),
        });
    }

    let all_passed = checks.iter().all(|c| c.passed);
    let report = VerifyReport { checks, all_passed };
    match output {
        Some(path) => write_json(path, &report)?,
        None => println!(
            "{}",
            serde_json::to_string_pretty(&report).expect("serializable")
        ),
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::Validation("oracle checks failed".into()))
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let seed = cli.seed.or_else(|| {
        std::env::var("POSSKL_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    });
    match cli.command {
        Command::Transform {
            direction,
            input,
            output,
        } => cmd_transform(direction, &input, &output),
        Command::Project {
            q,
            pi,
            tol,
            max_cycles,
            eps_cap,
            tie_tol,
            custom_gaps,
            emit_set,
            output,
        } => cmd_project(
            &q,
            &pi,
            tol,
            max_cycles,
            eps_cap,
            tie_tol,
            custom_gaps.as_deref(),
            emit_set.as_deref(),
            &output,
        ),
        Command::Bench {
            n,
            tolerances,
            max_cycles,
            runs,
            output,
        } => cmd_bench(n, tolerances, max_cycles, runs, seed.unwrap_or(0), &output),
        Command::Synth {
            config,
            train_out,
            test_out,
        } => cmd_synth(&config, &train_out, &test_out, seed),
        Command::Train {
            dataset,
            config,
            checkpoint,
            history,
        } => cmd_train(&dataset, &config, &checkpoint, &history, seed),
        Command::Eval {
            checkpoint,
            dataset,
        } => cmd_eval(&checkpoint, &dataset),
        Command::Verify { instance, output } => cmd_verify(&instance, output.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": msg, "kind": "validation"})
            );
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("{}", serde_json::json!({"error": msg, "kind": "io"}));
            ExitCode::from(2)
        }
    }
}
