//! Acceptance suite: one test per gate, each printing a PASS/FAIL line.
//!
//! Run with `cargo test -p colsem --test acceptance` (add
//! `-- --nocapture` to see the lines for passing criteria too).

use std::collections::BTreeSet;
use std::time::Instant;

use colsem::ast::{ColumnRef, CompareOp, Dialect, Expression, Formula, SelectItem};
use colsem::bind::bind;
use colsem::csvio::{relation_from_csv_str, relation_to_csv_string, CsvOptions};
use colsem::eval::{run_cs, run_query, EvalMode};
use colsem::expand::{expand, simulate_2vl_negation};
use colsem::harness::{
    check_linear_size, count_node_kinds, gen_instance, gen_query, run_one_trial, run_trials,
    trial_seed, GeneratorConfig, PropId, QueryFlavor,
};
use colsem::normalize::{decompose, decompose_db, full_outer_join_group, OpaqueId};
use colsem::parse::parse;
use colsem::print::print;
use colsem::relation::{Column, Database, Relation};
use colsem::value::{kleene_and, kleene_not, kleene_or, ColumnType, TruthValue, Value};

fn pass(n: u32, name: &str) {
    println!("acceptance {n:02} {name}: PASS");
}

fn report_fail(n: u32, name: &str, detail: &str) -> ! {
    println!("acceptance {n:02} {name}: FAIL ({detail})");
    panic!("acceptance criterion {n} failed: {detail}");
}

fn s(text: &str) -> Value {
    Value::Str(text.into())
}

/// The three-author relation with two missing values.
fn authors_table() -> Relation {
    let mut rel = Relation::new(
        "R",
        vec![
            Column::new("Author", ColumnType::Str),
            Column::new("Institute", ColumnType::Str),
            Column::new("Address", ColumnType::Str),
        ],
    );
    rel.push_row(vec![s("Codd"), s("IBM"), s("San Jose")]).unwrap();
    rel.push_row(vec![s("Chamberlin"), s("IBM"), Value::Null]).unwrap();
    rel.push_row(vec![s("Boyce"), Value::Null, s("San Jose")]).unwrap();
    rel
}

fn single_int_column_db(values: &[Value]) -> Database {
    let mut rel = Relation::new("R", vec![Column::new("x", ColumnType::Int)]);
    for v in values {
        rel.push_row(vec![v.clone()]).unwrap();
    }
    let mut db = Database::new();
    db.insert(rel).unwrap();
    db
}

#[test]
fn criterion_01_decomposition_fidelity() {
    let t0 = Instant::now();
    let rel = authors_table();
    let group = decompose(&rel);

    if group.keys != vec![OpaqueId(1), OpaqueId(2), OpaqueId(3)] {
        report_fail(1, "decomposition-fidelity", "key relation is not {1,2,3}");
    }
    let pairs = |attr: &str| -> Vec<(u64, Value)> {
        group.entries[attr]
            .iter()
            .map(|(id, v)| (id.0, v.clone()))
            .collect()
    };
    if pairs("Author")
        != vec![(1, s("Codd")), (2, s("Chamberlin")), (3, s("Boyce"))]
    {
        report_fail(1, "decomposition-fidelity", "Author relation differs");
    }
    if pairs("Institute") != vec![(1, s("IBM")), (2, s("IBM"))] {
        report_fail(1, "decomposition-fidelity", "Institute relation differs (id 2 pair must be the last)");
    }
    if pairs("Address") != vec![(1, s("San Jose")), (3, s("San Jose"))] {
        report_fail(1, "decomposition-fidelity", "Address relation differs");
    }
    let names: Vec<String> = group.relations().iter().map(|r| r.name.clone()).collect();
    if names != vec!["R_id", "R_Author", "R_Institute", "R_Address"] {
        report_fail(1, "decomposition-fidelity", "generated relation names differ");
    }

    let restored = full_outer_join_group(&group).unwrap();
    if restored.columns != rel.columns || restored.rows != rel.rows {
        report_fail(1, "decomposition-fidelity", "recomposition does not restore the original table");
    }
    if t0.elapsed().as_secs_f64() >= 1.0 {
        report_fail(1, "decomposition-fidelity", "took one second or more");
    }
    pass(1, "decomposition-fidelity");
}

/// Flatten a conjunction into leaf formulas, orienting equality operands
/// canonically, so that neither predicate order nor equality orientation
/// matters for comparison.
fn normalized_conjuncts(f: &Formula) -> BTreeSet<String> {
    fn flatten<'a>(f: &'a Formula, out: &mut Vec<&'a Formula>) {
        match f {
            Formula::And(l, r) => {
                flatten(l, out);
                flatten(r, out);
            }
            other => out.push(other),
        }
    }
    fn leaf_text(f: &Formula) -> String {
        let wrap = |e: &Expression| {
            let q = colsem::ast::Query {
                select_star: false,
                select_exprs: vec![SelectItem::new(e.clone())],
                select_aggs: vec![],
                from: vec![],
                where_clause: None,
                group_by: vec![],
            };
            print(&q)["SELECT ".len()..].to_string()
        };
        match f {
            Formula::Compare {
                op: CompareOp::Eq,
                lhs,
                rhs,
            } => {
                let (a, b) = (wrap(lhs), wrap(rhs));
                if a <= b {
                    format!("{a} = {b}")
                } else {
                    format!("{b} = {a}")
                }
            }
            other => {
                let q = colsem::ast::Query {
                    select_star: false,
                    select_exprs: vec![SelectItem::new(Expression::int(0))],
                    select_aggs: vec![],
                    from: vec![],
                    where_clause: Some(other.clone()),
                    group_by: vec![],
                };
                print(&q)["SELECT 0 WHERE ".len()..].to_string()
            }
        }
    }
    let mut leaves = Vec::new();
    flatten(f, &mut leaves);
    leaves.into_iter().map(leaf_text).collect()
}

#[test]
fn criterion_02_expansion_fidelity() {
    let db = {
        let mut db = Database::new();
        db.insert(authors_table()).unwrap();
        db
    };
    let catalog = db.catalog();
    let q = parse(
        "SELECT Address FROM R WHERE R.Author = \"Codd\"",
        Dialect::Columnar,
    )
    .unwrap();
    let bound = bind(&q, &catalog).unwrap();
    let set = expand(&bound, &catalog).unwrap();
    if set.outputs.len() != 1 {
        report_fail(2, "expansion-fidelity", "expected a single-member set");
    }
    let member = &set.outputs[0].query;

    // FROM {R_Author, R_Address, R_id}
    let from: Vec<String> = member.from.iter().map(|t| t.name.clone()).collect();
    if from != vec!["R_Author", "R_Address", "R_id"] {
        report_fail(2, "expansion-fidelity", &format!("FROM list is {from:?}"));
    }

    // the member selects the key column plus the renamed output
    let expected_select = vec![
        SelectItem::new(Expression::Column(ColumnRef::new("R_id", "id"))),
        SelectItem::new(Expression::Column(ColumnRef::new("R_Address", "Address"))),
    ];
    if member.select_exprs != expected_select {
        report_fail(2, "expansion-fidelity", "select list differs");
    }

    // WHERE matches the simulated query after normalizing predicate order
    // and equality orientation
    let reference = parse(
        "SELECT R_Address.Address FROM R_Author, R_Address, R_id \
         WHERE R_id.id = R_Author.id AND R_id.id = R_Address.id \
         AND R_Author.Author = \"Codd\"",
        Dialect::Columnar,
    )
    .unwrap();
    let got = normalized_conjuncts(member.where_clause.as_ref().unwrap());
    let want = normalized_conjuncts(reference.where_clause.as_ref().unwrap());
    if got != want {
        report_fail(
            2,
            "expansion-fidelity",
            &format!("WHERE conjuncts {got:?} differ from {want:?}"),
        );
    }

    // and byte-stable printed form
    let printed = print(member);
    if printed
        != "SELECT R_id.id, R_Address.Address FROM R_Author, R_Address, R_id \
            WHERE R_Author.id = R_id.id AND R_Address.id = R_id.id \
            AND R_Author.Author = \"Codd\""
    {
        report_fail(2, "expansion-fidelity", &format!("printed form is {printed}"));
    }
    pass(2, "expansion-fidelity");
}

#[test]
fn criterion_03_reflexive_equality_under_3vl() {
    let db = single_int_column_db(&[Value::Int(1), Value::Null]);
    let q = parse("SELECT * FROM R WHERE R.x = R.x", Dialect::ThreeValued).unwrap();
    let bound = bind(&q, &db.catalog()).unwrap();
    let out = run_query(&bound, &db, EvalMode::ThreeValued).unwrap();
    if out.rows != vec![vec![Value::Int(1)]] {
        report_fail(3, "reflexive-equality-3vl", &format!("rows: {:?}", out.rows));
    }
    pass(3, "reflexive-equality-3vl");
}

#[test]
fn criterion_04_negated_reflexive_equality_triple() {
    let db = single_int_column_db(&[Value::Int(1), Value::Null]);
    let text = "SELECT * FROM R WHERE NOT (R.x = R.x)";

    // two-valued: NOT FALSE is TRUE on the null row
    let q2 = bind(&parse(text, Dialect::ThreeValued).unwrap(), &db.catalog()).unwrap();
    let two = run_query(&q2, &db, EvalMode::TwoValued).unwrap();
    if two.rows != vec![vec![Value::Null]] {
        report_fail(4, "negated-reflexive-triple", &format!("2vl rows: {:?}", two.rows));
    }

    // columnar default: the predicate is never evaluated over a missing
    // value, and the bare negation demands presence
    let qc = bind(&parse(text, Dialect::Columnar).unwrap(), &db.catalog()).unwrap();
    let ndb = decompose_db(&db).unwrap();
    let cs = full_outer_join_group(&run_cs(&qc, &ndb).unwrap()).unwrap();
    if !cs.rows.is_empty() {
        report_fail(4, "negated-reflexive-triple", &format!("cs rows: {:?}", cs.rows));
    }

    // columnar with the two-valued simulation rewrite
    let simulated = colsem::ast::Query {
        where_clause: qc.where_clause.as_ref().map(simulate_2vl_negation),
        ..qc.clone()
    };
    let sim = full_outer_join_group(&run_cs(&simulated, &ndb).unwrap()).unwrap();
    if sim.rows != vec![vec![Value::Null]] {
        report_fail(4, "negated-reflexive-triple", &format!("cs-sim rows: {:?}", sim.rows));
    }
    pass(4, "negated-reflexive-triple");
}

#[test]
fn criterion_05_kleene_tables() {
    use TruthValue::*;
    let and_table = [
        (True, True, True),
        (True, False, False),
        (True, Unknown, Unknown),
        (False, True, False),
        (False, False, False),
        (False, Unknown, False),
        (Unknown, True, Unknown),
        (Unknown, False, False),
        (Unknown, Unknown, Unknown),
    ];
    let or_table = [
        (True, True, True),
        (True, False, True),
        (True, Unknown, True),
        (False, True, True),
        (False, False, False),
        (False, Unknown, Unknown),
        (Unknown, True, True),
        (Unknown, False, Unknown),
        (Unknown, Unknown, Unknown),
    ];
    let not_table = [(True, False), (False, True), (Unknown, Unknown)];
    for (a, b, want) in and_table {
        if kleene_and(a, b) != want {
            report_fail(5, "kleene-tables", &format!("AND({a}, {b})"));
        }
    }
    for (a, b, want) in or_table {
        if kleene_or(a, b) != want {
            report_fail(5, "kleene-tables", &format!("OR({a}, {b})"));
        }
    }
    for (a, want) in not_table {
        if kleene_not(a) != want {
            report_fail(5, "kleene-tables", &format!("NOT({a})"));
        }
    }
    pass(5, "kleene-tables");
}

#[test]
fn criterion_06_null_free_agreement() {
    let t0 = Instant::now();
    let cfg = GeneratorConfig {
        seed: 600,
        ..Default::default()
    };
    let report = run_trials(PropId::NullFreeAgreement, &cfg, 1000).unwrap();
    if !report.failures.is_empty() {
        report_fail(
            6,
            "null-free-agreement",
            &report.failures[0].render(),
        );
    }
    let elapsed = t0.elapsed().as_secs_f64();
    if elapsed >= 60.0 {
        report_fail(6, "null-free-agreement", &format!("took {elapsed:.1}s"));
    }
    println!("acceptance 06 ran 1000 null-free trials in {elapsed:.1}s");
    pass(6, "null-free-agreement");
}

/// Shared driver for the two commuting-square criteria: zero
/// counterexamples pass outright; otherwise every counterexample must
/// replay identically from its seed and is written to a findings file, per
/// the stated pass bar for the unproved propositions.
fn square_criterion(n: u32, name: &str, prop: PropId) {
    let cfg = GeneratorConfig {
        seed: 700 + n as u64,
        null_probability: 0.3,
        ..Default::default()
    };
    let report = run_trials(prop, &cfg, 1000).unwrap();
    if report.failures.is_empty() {
        pass(n, name);
        return;
    }
    // findings path: each counterexample must replay to the same failure
    let mut findings = String::new();
    for ce in &report.failures {
        let replayed = run_one_trial(prop, &cfg.with_seed(ce.seed)).unwrap();
        match replayed {
            Some(again) if again.render() == ce.render() => {
                findings.push_str(&ce.render());
                findings.push('\n');
            }
            _ => report_fail(n, name, &format!("counterexample does not replay: {}", ce.render())),
        }
    }
    let path = std::env::temp_dir().join(format!("colsem-findings-{name}.txt"));
    std::fs::write(&path, &findings).unwrap();
    println!(
        "acceptance {n:02} {name}: PASS with {} replayable documented findings ({})",
        report.failures.len(),
        path.display()
    );
}

#[test]
fn criterion_07_cnf_then_run_square() {
    square_criterion(7, "cnf-then-run-square", PropId::CnfThenRun);
}

#[test]
fn criterion_08_run_then_cnf_square() {
    square_criterion(8, "run-then-cnf-square", PropId::RunThenCnf);
}

#[test]
fn criterion_09_linear_size_bound() {
    let cfg = GeneratorConfig {
        seed: 900,
        ..Default::default()
    };
    let report = check_linear_size(&cfg, 1000).unwrap();
    if !report.all_within_bound {
        report_fail(
            9,
            "linear-size-bound",
            &format!("bound exceeded; worst query: {:?}", report.worst_query),
        );
    }
    println!(
        "acceptance 09 max compiled/source node ratio over {} queries: {:.3}",
        report.checked, report.max_ratio
    );
    pass(9, "linear-size-bound");
}

#[test]
fn criterion_10_round_trips() {
    // parse . print identity on 500 generated queries
    let cfg = GeneratorConfig {
        seed: 1000,
        ..Default::default()
    };
    for t in 0..500 {
        let trial = cfg.with_seed(trial_seed(cfg.seed, t));
        let db = gen_instance(&trial);
        let flavor = if t % 2 == 0 {
            QueryFlavor::ThreeValued
        } else {
            QueryFlavor::Columnar
        };
        let q = gen_query(&trial, &db, flavor);
        let bound = bind(&q, &db.catalog()).unwrap();
        let dialect = match flavor {
            QueryFlavor::Columnar => Dialect::Columnar,
            _ => Dialect::ThreeValued,
        };
        let text = print(&bound);
        match parse(&text, dialect) {
            Ok(reparsed) if reparsed == bound => {}
            Ok(_) => report_fail(10, "round-trips", &format!("parse-print mismatch for {text}")),
            Err(e) => report_fail(10, "round-trips", &format!("printed query fails to parse: {text}: {e}")),
        }
    }

    // CSV emit . load identity on 100 generated nullable relations
    let opts = CsvOptions::default();
    for t in 0..100 {
        let trial = cfg.with_seed(trial_seed(9_000, t));
        let db = gen_instance(&trial);
        for rel in db.iter() {
            let text = relation_to_csv_string(rel, &opts);
            let back = relation_from_csv_str(&text, &rel.name, &rel.columns, &opts).unwrap();
            if back.rows != rel.rows {
                report_fail(10, "round-trips", &format!("CSV round trip differs for {}", rel.name));
            }
        }
    }

    // decompose . recompose identity on 200 relations, including all-null
    // rows forced into the mix
    for t in 0..200 {
        let trial = cfg.with_seed(trial_seed(11_000, t));
        let mut db = gen_instance(&trial);
        let mut with_blank = Vec::new();
        for rel in db.iter() {
            let mut rel = rel.clone();
            let arity = rel.columns.len();
            rel.rows.push(vec![Value::Null; arity]);
            with_blank.push(rel);
        }
        let mut forced = Database::new();
        for rel in with_blank {
            forced.insert(rel).unwrap();
        }
        db = forced;
        for rel in db.iter() {
            let restored = full_outer_join_group(&decompose(rel)).unwrap();
            if !restored.multiset_eq(rel) {
                report_fail(10, "round-trips", &format!("decomposition round trip differs for {}", rel.name));
            }
        }
    }
    pass(10, "round-trips");
}

#[test]
fn generator_corpus_covers_every_construct() {
    // supporting check for the generator contract backing criteria 6-9
    let cfg = GeneratorConfig {
        seed: 1,
        ..Default::default()
    };
    for flavor in [QueryFlavor::ThreeValued, QueryFlavor::Columnar] {
        let mut counts = std::collections::BTreeMap::new();
        for t in 0..1000 {
            let trial = cfg.with_seed(trial_seed(cfg.seed, t));
            let db = gen_instance(&trial);
            let q = gen_query(&trial, &db, flavor);
            count_node_kinds(&q, &mut counts);
        }
        for kind in [
            "constant", "column", "add", "sub", "mul", "div", "concat", "cmp-eq", "cmp-ne",
            "cmp-lt", "cmp-le", "cmp-gt", "cmp-ge", "and", "or", "not", "null-test",
            "count-star", "agg-count", "agg-sum", "agg-min", "agg-max", "agg-avg", "group-by",
            "multi-table", "alias",
        ] {
            let n = counts.get(kind).copied().unwrap_or(0);
            assert!(n >= 20, "{flavor:?} corpus covers `{kind}` only {n} times");
        }
    }
}
