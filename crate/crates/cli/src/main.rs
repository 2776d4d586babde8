//! Command-line front end: decompose data into Column Normal Form, expand
//! and compile columnar-dialect queries, run the reference evaluators, and
//! drive the differential-testing harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 counterexample
//! found. Stdout carries only payload (SQL or CSV); diagnostics go to
//! stderr prefixed with `error:`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use colsem::ast::Dialect;
use colsem::bind::bind;
use colsem::csvio::{
    catalog_to_string, emit_csv, emit_database, load_database, relation_to_csv_string, CsvOptions,
};
use colsem::eval::{run_cs, run_query, EvalMode};
use colsem::expand::{compile_to_3vl, expand, simulate_2vl_negation};
use colsem::harness::{
    check_linear_size, run_one_trial, run_trials, CounterExample, GeneratorConfig, PropId,
};
use colsem::normalize::{decompose_db, full_outer_join_group};
use colsem::parse::parse;
use colsem::print::print;
use colsem::relation::Database;

#[derive(Parser)]
#[command(
    name = "colsem",
    about = "Columnar semantics for SQL: normalize, expand, compile, run, check",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct DataArgs {
    /// Catalog file: one `name(attr:type,...)` per line.
    #[arg(long)]
    catalog: PathBuf,
    /// Directory holding one `<name>.csv` per catalog relation.
    #[arg(long)]
    data: PathBuf,
    /// Unquoted field text standing for null (empty by default).
    #[arg(long, default_value = "")]
    null_token: String,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    #[value(name = "3vl")]
    ThreeValued,
    #[value(name = "2vl")]
    TwoValued,
    Cs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PropArg {
    #[value(name = "51")]
    P51,
    #[value(name = "52")]
    P52,
    Size,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose every catalog relation into Column Normal Form.
    Decompose {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory for the normalized CSVs and updated catalog.
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the expanded query set of a columnar-dialect query.
    Expand {
        /// Catalog file the query binds against.
        #[arg(long)]
        catalog: PathBuf,
        /// Apply the two-valued negation rewrite before expanding.
        #[arg(long)]
        simulate_2vl: bool,
        /// Print a line-oriented s-expression AST dump instead of SQL.
        #[arg(long)]
        dump_ast: bool,
        /// The SQL text.
        query: String,
    },
    /// Compile a columnar-dialect query to one standard null-aware query.
    Compile {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        simulate_2vl: bool,
        /// Print a line-oriented s-expression AST dump instead of SQL.
        #[arg(long)]
        dump_ast: bool,
        query: String,
    },
    /// Evaluate a query over CSV data under the chosen semantics.
    Run {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        mode: Mode,
        /// Apply the two-valued negation rewrite (cs mode only).
        #[arg(long)]
        simulate_2vl: bool,
        /// Directory for the per-column output CSVs (cs mode).
        #[arg(long)]
        out: Option<PathBuf>,
        query: String,
    },
    /// Differentially test the equivalence squares and the size bound.
    Check {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "all")]
        prop: PropArg,
        /// Replay a single trial at exactly this seed.
        #[arg(long)]
        replay: Option<u64>,
        /// Directory for counterexample reports.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            // clap's rendering already carries the `error:` prefix
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(data: &DataArgs) -> colsem::Result<(Database, CsvOptions)> {
    let opts = CsvOptions {
        null_token: data.null_token.clone(),
    };
    let db = load_database(&data.catalog, &data.data, &opts)?;
    Ok((db, opts))
}

fn read_catalog(path: &Path) -> colsem::Result<colsem::Catalog> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| colsem::Error::io(format!("reading {}", path.display()), e))?;
    let mut catalog = colsem::Catalog::new();
    for (name, columns) in colsem::csvio::parse_catalog(&text)? {
        catalog.insert(name, columns)?;
    }
    Ok(catalog)
}

fn parse_cs(query: &str, simulate_2vl: bool) -> colsem::Result<colsem::Query> {
    let mut q = parse(query, Dialect::Columnar)?;
    if simulate_2vl {
        q.where_clause = q.where_clause.as_ref().map(simulate_2vl_negation);
    }
    Ok(q)
}

fn dispatch(command: Command) -> colsem::Result<u8> {
    match command {
        Command::Decompose { data, out } => {
            let (db, opts) = load(&data)?;
            let ndb = decompose_db(&db)?;
            emit_database(&ndb.materialize(), &out, &opts)?;
            Ok(0)
        }
        Command::Expand {
            catalog,
            simulate_2vl,
            dump_ast,
            query,
        } => {
            let catalog = read_catalog(&catalog)?;
            let q = parse_cs(&query, simulate_2vl)?;
            let bound = bind(&q, &catalog)?;
            let set = expand(&bound, &catalog)?;
            for (i, member) in set.outputs.iter().enumerate() {
                if i > 0 {
                    println!(";");
                }
                if dump_ast {
                    print!("{}", member.query.to_sexpr());
                } else {
                    println!("{}", print(&member.query));
                }
            }
            Ok(0)
        }
        Command::Compile {
            catalog,
            simulate_2vl,
            dump_ast,
            query,
        } => {
            let catalog = read_catalog(&catalog)?;
            let q = parse_cs(&query, simulate_2vl)?;
            let compiled = compile_to_3vl(&q, &catalog)?;
            if dump_ast {
                print!("{}", compiled.to_sexpr());
            } else {
                println!("{}", print(&compiled));
            }
            Ok(0)
        }
        Command::Run {
            data,
            mode,
            simulate_2vl,
            out,
            query,
        } => {
            let (db, opts) = load(&data)?;
            match mode {
                Mode::ThreeValued | Mode::TwoValued => {
                    let q = parse(&query, Dialect::ThreeValued)?;
                    let bound = bind(&q, &db.catalog())?;
                    let eval_mode = if mode == Mode::ThreeValued {
                        EvalMode::ThreeValued
                    } else {
                        EvalMode::TwoValued
                    };
                    let result = run_query(&bound, &db, eval_mode)?;
                    print!("{}", relation_to_csv_string(&result, &opts));
                }
                Mode::Cs => {
                    let q = parse_cs(&query, simulate_2vl)?;
                    let bound = bind(&q, &db.catalog())?;
                    let ndb = decompose_db(&db)?;
                    let group = run_cs(&bound, &ndb)?;
                    let joined = full_outer_join_group(&group)?;
                    if let Some(dir) = out {
                        std::fs::create_dir_all(&dir).map_err(|e| {
                            colsem::Error::io(format!("creating {}", dir.display()), e)
                        })?;
                        let mut entries: Vec<(String, Vec<colsem::Column>)> = Vec::new();
                        for rel in group.relations() {
                            if entries.iter().any(|(n, _)| *n == rel.name) {
                                return Err(colsem::Error::NameCollision(rel.name));
                            }
                            emit_csv(&rel, &dir.join(format!("{}.csv", rel.name)), &opts)?;
                            entries.push((rel.name.clone(), rel.columns.clone()));
                        }
                        emit_csv(&joined, &dir.join("output_joined.csv"), &opts)?;
                        std::fs::write(dir.join("catalog.txt"), catalog_to_string(&entries))
                            .map_err(|e| {
                                colsem::Error::io(
                                    format!("writing {}", dir.join("catalog.txt").display()),
                                    e,
                                )
                            })?;
                    }
                    print!("{}", relation_to_csv_string(&joined, &opts));
                }
            }
            Ok(0)
        }
        Command::Check {
            trials,
            seed,
            prop,
            replay,
            out,
        } => check(trials, seed, prop, replay, &out),
    }
}

fn prop_ids(prop: PropArg) -> Vec<PropId> {
    match prop {
        PropArg::P51 => vec![PropId::CnfThenRun],
        PropArg::P52 => vec![PropId::RunThenCnf],
        PropArg::Size => vec![],
        PropArg::All => vec![PropId::CnfThenRun, PropId::RunThenCnf],
    }
}

fn prop_label(prop: PropId) -> &'static str {
    match prop {
        PropId::CnfThenRun => "prop 51",
        PropId::RunThenCnf => "prop 52",
        PropId::NullFreeAgreement => "null-free agreement",
        PropId::TwoValuedSimulation => "2vl simulation",
    }
}

fn check(
    trials: usize,
    seed: u64,
    prop: PropArg,
    replay: Option<u64>,
    out: &Path,
) -> colsem::Result<u8> {
    let cfg = GeneratorConfig {
        seed,
        ..Default::default()
    };
    let mut found = false;

    if let Some(replay_seed) = replay {
        for id in prop_ids(prop) {
            match run_one_trial(id, &cfg.with_seed(replay_seed))? {
                None => println!("{}: seed {replay_seed} PASS", prop_label(id)),
                Some(ce) => {
                    println!("{}: seed {replay_seed} COUNTEREXAMPLE", prop_label(id));
                    write_counterexample(&ce, out)?;
                    found = true;
                }
            }
        }
        return Ok(if found { 3 } else { 0 });
    }

    for id in prop_ids(prop) {
        let report = run_trials(id, &cfg, trials)?;
        println!(
            "{}: {} trials, {} counterexamples",
            prop_label(id),
            report.trials,
            report.failures.len()
        );
        for ce in &report.failures {
            println!("  counterexample at seed {}", ce.seed);
            write_counterexample(ce, out)?;
            found = true;
        }
    }

    if matches!(prop, PropArg::Size | PropArg::All) {
        let report = check_linear_size(&cfg, trials)?;
        println!(
            "size: {} queries, max ratio {:.3}, bound {}",
            report.checked,
            report.max_ratio,
            if report.all_within_bound {
                "holds"
            } else {
                "EXCEEDED"
            }
        );
        if !report.all_within_bound {
            found = true;
        }
    }

    Ok(if found { 3 } else { 0 })
}

/// Write one counterexample as a directory of CSVs, the query, and a
/// replay manifest.
fn write_counterexample(ce: &CounterExample, out: &Path) -> colsem::Result<()> {
    let dir = out.join(format!("counterexample-{}-{}", ce.prop, ce.seed));
    let opts = CsvOptions::default();
    emit_database(&ce.db, &dir, &opts)?;
    std::fs::write(dir.join("query.sql"), format!("{}\n", print(&ce.query)))
        .map_err(|e| colsem::Error::io("writing query.sql", e))?;
    emit_csv(&ce.left, &dir.join(format!("{}.out.csv", ce.left_label)), &opts)?;
    emit_csv(&ce.right, &dir.join(format!("{}.out.csv", ce.right_label)), &opts)?;
    let manifest = format!(
        "check: {}\nseed: {}\nfirst differing row: {}\nreplay: colsem check --prop {} --replay {}\n",
        ce.prop,
        ce.seed,
        ce.first_diff,
        match ce.prop {
            PropId::CnfThenRun => "51",
            PropId::RunThenCnf => "52",
            _ => "all",
        },
        ce.seed,
    );
    std::fs::write(dir.join("manifest.txt"), manifest)
        .map_err(|e| colsem::Error::io("writing manifest.txt", e))?;
    Ok(())
}
