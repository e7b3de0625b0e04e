//! Command-line surface for bounded-treewidth Bayesian network structure
//! learning: score precomputation, the anytime samplers, MILP emission and
//! checking, k-tree code utilities and a benchmark harness.
//!
//! Exit codes: 0 success, 1 infeasible or refused by a guard, 2 input error.

mod bench;
mod document;

use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use document::NetworkDocument;
use twbn::graph::UndirectedGraph;
use twbn::ktree::{self, DandelionCode, KTree};
use twbn::milp::{
    build_learning_model, check_assignment, decode_solution, export_lp_string, parse_solution,
    solve_tiny_with_limit, MilpAssignment, SolveOutcome, SOLVE_TINY_BINARY_LIMIT,
};
use twbn::scoring::{
    build_score_cache, load_csv, read_scores_path, write_scores_path, ScoringConfig,
};
use twbn::search::{learn, Budget, LearnOptions, Method};

#[derive(Parser)]
#[command(name = "twbn", version, about = "Bayesian network structure learning under a hard treewidth bound")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Precompute BDeu local scores from a CSV dataset into a score file.
    Scores(ScoresArgs),
    /// Learn a structure from a score file by sampling k-trees.
    Learn(LearnArgs),
    /// Build, check or exactly solve the MILP formulation.
    Milp {
        #[command(subcommand)]
        sub: MilpCmd,
    },
    /// Dandelion-code utilities: sample, encode, decode, count.
    Ktree {
        #[command(subcommand)]
        sub: KtreeCmd,
    },
    /// Run a benchmark suite of score files, methods and seeds.
    Bench(BenchArgs),
    /// Re-verify a network document against its score file.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ScoresArgs {
    /// CSV dataset with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Output score file.
    #[arg(long)]
    out: PathBuf,
    /// Equivalent sample size.
    #[arg(long, default_value_t = 1.0)]
    ess: f64,
    /// Maximum parent set size.
    #[arg(long, default_value_t = 3)]
    max_parents: usize,
    /// Threshold multi-valued columns at the median of their codes.
    #[arg(long)]
    binarize: bool,
    /// Drop families dominated by one of their subsets.
    #[arg(long)]
    prune: bool,
}

#[derive(Args)]
struct LearnArgs {
    /// Score file produced by `twbn scores`.
    #[arg(long)]
    scores: PathBuf,
    /// Hard treewidth bound.
    #[arg(long)]
    treewidth: usize,
    /// v1 = exact per k-tree, v2 = sampled order plus greedy parents.
    #[arg(long, default_value = "v2")]
    method: String,
    /// Wall-clock budget in seconds.
    #[arg(long, conflicts_with = "iterations")]
    seconds: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    iterations: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Network document output path (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MilpCmd {
    /// Write the learning model as LP text.
    Emit {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        treewidth: usize,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a solver's `name value` solution file against the model.
    Check {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        treewidth: usize,
        #[arg(long)]
        solution: PathBuf,
        /// Write the decoded network document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exactly solve a tiny model by enumeration.
    SolveTiny {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        treewidth: usize,
        #[arg(long, default_value_t = SOLVE_TINY_BINARY_LIMIT)]
        max_binaries: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum KtreeCmd {
    /// Sample a uniform Dandelion code and print it with its edge list.
    Sample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Decode a textual code into a k-tree edge list.
    Decode {
        /// Code text `n k | q1 .. qk | (a,b) ..`; stdin when omitted.
        #[arg(long)]
        code: Option<String>,
    },
    /// Encode a k-tree given as `n k` then one `u v` line per edge.
    Encode {
        /// Edge-list file; stdin when omitted.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Print the exact number of labeled k-trees.
    Count {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Args)]
struct BenchArgs {
    /// Suite description (JSON).
    #[arg(long)]
    suite: PathBuf,
    /// Machine-readable report output (JSON).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    doc: PathBuf,
    /// Score file to re-check local scores against, when given.
    #[arg(long)]
    scores: Option<PathBuf>,
}

/// Failure carrying the process exit code: 1 infeasible/guard, 2 input error.
struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn guard(msg: impl Into<String>) -> Self {
        Failure {
            code: 1,
            msg: msg.into(),
        }
    }

    fn input(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::input(e.to_string())
    }
}

fn main() {
    // dying quietly on a closed pipe beats a panic from println!
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(f) => {
            eprintln!("error: {}", f.msg);
            std::process::exit(f.code);
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Scores(args) => cmd_scores(args),
        Cmd::Learn(args) => cmd_learn(args),
        Cmd::Milp { sub } => cmd_milp(sub),
        Cmd::Ktree { sub } => cmd_ktree(sub),
        Cmd::Bench(args) => cmd_bench(args),
        Cmd::Verify(args) => cmd_verify(args),
    }
}

fn cmd_scores(args: ScoresArgs) -> Result<(), Failure> {
    if args.ess <= 0.0 {
        return Err(Failure::input("--ess must be positive"));
    }
    let data = load_csv(&args.data, args.binarize)
        .map_err(|e| Failure::input(format!("{}: {e}", args.data.display())))?;
    let cfg = ScoringConfig {
        ess: args.ess,
        max_in_degree: args.max_parents,
    };
    let mut cache = build_score_cache(&data, &cfg);
    if args.prune {
        cache = cache.prune_dominated();
    }
    write_scores_path(&cache, &args.out)?;
    let families: usize = (0..cache.n() as u32).map(|i| cache.families(i).len()).sum();
    println!(
        "wrote {}: {} variables, {} families",
        args.out.display(),
        cache.n(),
        families
    );
    Ok(())
}

fn parse_method(name: &str) -> Result<Method, Failure> {
    match name {
        "v1" => Ok(Method::V1),
        "v2" => Ok(Method::V2),
        other => Err(Failure::input(format!(
            "unknown method '{other}' (expected v1 or v2)"
        ))),
    }
}

fn cmd_learn(args: LearnArgs) -> Result<(), Failure> {
    let cache = read_scores_path(&args.scores)
        .map_err(|e| Failure::input(format!("{}: {e}", args.scores.display())))?;
    if args.treewidth < 1 {
        return Err(Failure::input("--treewidth must be at least 1"));
    }
    let method = parse_method(&args.method)?;
    let budget = match (args.iterations, args.seconds) {
        (Some(i), _) => Budget::Iterations(i),
        (None, Some(s)) => Budget::WallClock(std::time::Duration::from_secs_f64(s)),
        (None, None) => Budget::WallClock(std::time::Duration::from_secs(60)),
    };
    if args.treewidth >= cache.n() {
        eprintln!(
            "warning: treewidth {} clamped to {} (number of variables minus one)",
            args.treewidth,
            cache.n() - 1
        );
    }

    // a signal flushes the best-so-far rather than dropping the run
    let stop = Arc::new(AtomicBool::new(false));
    {
        let stop = stop.clone();
        let _ = ctrlc::set_handler(move || {
            stop.store(true, std::sync::atomic::Ordering::Relaxed);
        });
    }

    let opts = LearnOptions {
        seed: args.seed,
        workers: args.workers,
    };
    let result = learn(&cache, args.treewidth, method, budget, &opts, Some(&stop))
        .map_err(|e| Failure::guard(e.to_string()))?;

    let doc = NetworkDocument::from_learn_result(&result, &cache, args.workers);
    if let Some(out) = &args.out {
        doc.write_json(out)?;
    }
    println!(
        "score {} after {} iterations (method {}, treewidth {}, seed {})",
        twbn::scoring::format_score(result.total_score),
        result.iterations_run,
        result.method,
        result.effective_treewidth,
        result.seed
    );
    Ok(())
}

fn cmd_milp(sub: MilpCmd) -> Result<(), Failure> {
    match sub {
        MilpCmd::Emit {
            scores,
            treewidth,
            out,
        } => {
            let cache = read_scores_path(&scores)?;
            let model = build_learning_model(&cache, treewidth)?;
            let text = export_lp_string(&model);
            match out {
                Some(path) => {
                    std::fs::write(&path, text)?;
                    println!(
                        "wrote {}: {} variables ({} binary), {} rows",
                        path.display(),
                        model.vars.len(),
                        model.binary_count(),
                        model.rows.len()
                    );
                }
                None => print!("{text}"),
            }
            Ok(())
        }
        MilpCmd::Check {
            scores,
            treewidth,
            solution,
            out,
        } => {
            let cache = read_scores_path(&scores)?;
            let model = build_learning_model(&cache, treewidth)?;
            let text = std::fs::read_to_string(&solution)?;
            let named = parse_solution(&text)?;
            let assignment = MilpAssignment::from_named(&model, &named)?;
            let report = check_assignment(&model, &assignment)?;
            for fam in &report.families {
                match &fam.first_violation {
                    None => println!("{:<10} {:>6} rows  ok", fam.family, fam.rows),
                    Some(row) => {
                        println!("{:<10} {:>6} rows  VIOLATED at {row}", fam.family, fam.rows)
                    }
                }
            }
            if !report.feasible {
                return Err(Failure::guard(format!(
                    "assignment infeasible; first violation: {}",
                    report.first_violation().unwrap_or("unknown")
                )));
            }
            let (dag, order) = decode_solution(&model, &assignment)?;
            let doc = NetworkDocument::from_dag(&dag, &cache, "milp-check", treewidth, Some(&order));
            println!(
                "feasible; objective {}",
                twbn::scoring::format_score(assignment.objective(&model))
            );
            if let Some(out) = out {
                doc.write_json(&out)?;
            }
            Ok(())
        }
        MilpCmd::SolveTiny {
            scores,
            treewidth,
            max_binaries,
            out,
        } => {
            let cache = read_scores_path(&scores)?;
            let model = build_learning_model(&cache, treewidth)?;
            let outcome = solve_tiny_with_limit(&model, max_binaries)
                .map_err(|e| Failure::guard(e.to_string()))?;
            match outcome {
                SolveOutcome::Infeasible => Err(Failure::guard("model is infeasible")),
                SolveOutcome::Optimal(assignment, objective) => {
                    let (dag, order) = decode_solution(&model, &assignment)?;
                    println!("optimal {}", twbn::scoring::format_score(objective));
                    if let Some(out) = out {
                        let doc = NetworkDocument::from_dag(
                            &dag,
                            &cache,
                            "milp-solve-tiny",
                            treewidth,
                            Some(&order),
                        );
                        doc.write_json(&out)?;
                    }
                    Ok(())
                }
            }
        }
    }
}

fn cmd_ktree(sub: KtreeCmd) -> Result<(), Failure> {
    match sub {
        KtreeCmd::Sample { n, k, seed } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let code = ktree::sample_code(n, k, &mut rng).map_err(|e| Failure::guard(e.to_string()))?;
            let t = ktree::decode(&code)?;
            println!("{}", code.to_text());
            for (u, v) in t.graph.edges() {
                println!("{u} {v}");
            }
            Ok(())
        }
        KtreeCmd::Decode { code } => {
            let text = match code {
                Some(t) => t,
                None => read_stdin()?,
            };
            let code = DandelionCode::from_text(text.trim())?;
            let t = ktree::decode(&code).map_err(|e| Failure::input(e.to_string()))?;
            for (u, v) in t.graph.edges() {
                println!("{u} {v}");
            }
            Ok(())
        }
        KtreeCmd::Encode { edges } => {
            let text = match edges {
                Some(path) => std::fs::read_to_string(path)?,
                None => read_stdin()?,
            };
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let head = lines.next().ok_or_else(|| Failure::input("empty edge list"))?;
            let mut it = head.split_whitespace();
            let n: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Failure::input("first line must be 'n k'"))?;
            let k: usize = it
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Failure::input("first line must be 'n k'"))?;
            let mut g = UndirectedGraph::new(n);
            for line in lines {
                let mut it = line.split_whitespace();
                let (u, v) = match (it.next(), it.next()) {
                    (Some(u), Some(v)) => (u, v),
                    _ => return Err(Failure::input(format!("bad edge line '{line}'"))),
                };
                let u: u32 = u.parse().map_err(|_| Failure::input("bad endpoint"))?;
                let v: u32 = v.parse().map_err(|_| Failure::input("bad endpoint"))?;
                g.add_edge(u, v);
            }
            let t = KTree::new(g, k).map_err(|e| Failure::guard(e.to_string()))?;
            let code = ktree::encode(&t).map_err(|e| Failure::guard(e.to_string()))?;
            println!("{}", code.to_text());
            Ok(())
        }
        KtreeCmd::Count { n, k } => {
            if n < k + 1 || k < 1 {
                return Err(Failure::input(format!("need 1 <= k <= n-1, got ({n}, {k})")));
            }
            println!("{}", ktree::count_ktrees(n, k));
            Ok(())
        }
    }
}

fn read_stdin() -> Result<String, Failure> {
    use std::io::Read;
    let mut buf = String::new();
    std::io::stdin().read_to_string(&mut buf)?;
    Ok(buf)
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let suite = bench::load_suite(&args.suite)
        .map_err(|e| Failure::input(format!("{}: {e}", args.suite.display())))?;
    let report = bench::run_suite(&suite).map_err(|e| Failure::guard(e.to_string()))?;
    print!("{}", bench::render_table(&report));
    if let Some(out) = args.out {
        std::fs::write(&out, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let doc = NetworkDocument::read_json(&args.doc)?;
    doc.verify().map_err(|e| Failure::guard(e.to_string()))?;
    if let Some(scores) = args.scores {
        let cache = read_scores_path(&scores)?;
        let dag = doc.dag().map_err(|e| Failure::input(e.to_string()))?;
        let total = cache
            .dag_score(&dag)
            .ok_or_else(|| Failure::guard("document families missing from score file"))?;
        if (total - doc.total_score).abs() > 1e-6 * total.abs().max(1.0) {
            return Err(Failure::guard(format!(
                "score file total {total} disagrees with document {}",
                doc.total_score
            )));
        }
    }
    println!("document verified");
    Ok(())
}
