//! The `fieldsearch` binary: exit codes, output formats and replay of
//! structured transcripts.

use std::io::Write;
use std::process::{Command, Output, Stdio};

use fieldsearch::expr::{canonicalize, parse_expr, Expr};
use fieldsearch::physics::{canonical_tem, symmetrize_tem, FieldTheory};
use fieldsearch::rules::{load_rules, successors, RuleSet};
use fieldsearch::search::{search, Goal, SearchBudget};
use serde_json::Value;

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/data");

fn data(file: &str) -> String {
    format!("{DATA}/{file}")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fieldsearch")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn records(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap_or_else(|e| panic!("{l}: {e}"))).collect()
}

/// Checks that consecutive step records under `label` are single rewrites
/// by the named rule at the named position, and returns the last
/// expression.
fn replay_records(records: &[Value], label: &str, rules: &RuleSet) -> Expr {
    let steps: Vec<&Value> = records.iter().filter(|r| r["kind"] == "step" && r["label"] == label).collect();
    assert!(!steps.is_empty(), "no `{label}` records");
    let expr = |r: &Value| canonicalize(&parse_expr(r["expr"].as_str().unwrap()).unwrap());
    assert_eq!(steps[0]["rule"], "canonical");
    assert_eq!(steps[0]["depth"], 0);
    let mut cur = expr(steps[0]);
    for (k, r) in steps.iter().enumerate().skip(1) {
        assert_eq!(r["depth"], k);
        let next = expr(r);
        let ok = successors(&cur, rules).into_iter().any(|(x, step)| {
            x == next && step.rule == r["rule"] && Some(step.position.to_string().as_str()) == r["position"].as_str()
        });
        assert!(ok, "record {k} of `{label}` is not one rewrite of `{cur}`");
        cur = next;
    }
    cur
}

#[test]
fn derive_reports_a_two_line_transcript() {
    let o = run(&["derive", "--rules", &data("seed.rules"), "--goal", "is-zero", "--expr", "d[_mu](F[^mu,^nu])"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines[0], "derivation:");
    assert_eq!(lines.len(), 3, "{lines:?}");
    assert!(lines[2].contains("eom"));
    assert!(lines[2].ends_with(" 0"));
    assert!(stderr(&o).contains("found at depth 1"));
}

#[test]
fn exhausted_search_exits_with_one() {
    let o = run(&["derive", "--rules", &data("toy.rules"), "--goal", "equals d", "--max-depth", "3", "--expr", "a"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o), "derivation: exhausted\n");
    assert!(stderr(&o).contains("exhausted"), "{}", stderr(&o));
    assert!(stderr(&o).contains("states visited: 3"), "{}", stderr(&o));
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    let cases: [&[&str]; 6] = [
        &["derive", "--goal", "is-zero", "--expr", "F[_mu"],
        &["derive", "--expr", "a"],
        &["derive", "--goal", "zero", "--expr", "a"],
        &["tem"],
        &["simplify", "--rules", "/nonexistent/x.rules", "--expr", "a"],
        &["check-conserved", "--expr", "A[^mu]"],
    ];
    for args in cases {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = stderr(&o);
        assert!(!err.is_empty() && !err.contains("panicked"), "{args:?}: {err}");
    }
    let o = run(&["derive", "--goal", "is-zero", "--expr", "F[_mu"]);
    assert!(stderr(&o).contains("byte 5"), "{}", stderr(&o));
}

#[test]
fn input_is_read_from_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_fieldsearch"))
        .arg("simplify")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"F[_mu,_nu]*F[^nu,^mu]\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "canonical: -F[_d0,_d1]*F[^d0,^d1]");
}

#[test]
fn structured_derivation_replays_to_the_found_expression() {
    let text = "-d[_a](F[^a,_b]*d[^nu](A[^b])) + 1/4*d[^nu](F[_a,_b]*F[^a,^b])";
    let o = run(&["derive", "--goal", "is-zero", "--format", "structured", "--expr", text]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rs = RuleSet::seed();
    let last = replay_records(&records(&o), "derivation", &rs);
    assert!(records(&o).len() > 3);
    let start = parse_expr(text).unwrap();
    let d = search(&start, &rs, &Goal::IsZero, &SearchBudget::default());
    assert_eq!(Some(&last), d.found().map(|d| &d.expr));

    let toy = load_rules(&std::fs::read_to_string(data("toy.rules")).unwrap()).unwrap();
    let o = run(&["derive", "--rules", &data("toy.rules"), "--goal", "equals c", "--format", "structured", "--expr", "a"]);
    assert_eq!(replay_records(&records(&o), "derivation", &toy).to_string(), "c");
}

#[test]
fn tem_prints_the_engine_tensors_and_replayable_proofs() {
    let text = std::fs::read_to_string(data("free-em.theory")).unwrap();
    let em = FieldTheory::parse("free-em", &text).unwrap();
    let t = canonical_tem(&em).unwrap();
    let s = symmetrize_tem(&t, &em).unwrap();
    let o = run(&["tem", "--theory", &data("free-em.theory"), "--symmetrize", "--check", "--format", "structured"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rs = records(&o);
    let expr_record = |label: &str| rs.iter().find(|r| r["kind"] == "expr" && r["label"] == label).unwrap()["expr"].clone();
    assert_eq!(expr_record("canonical-tem"), t.tensor.to_string());
    assert_eq!(expr_record("symmetrized-tem"), s.tensor.to_string());
    let rules = em.rules().unwrap();
    for label in ["canonical-conservation", "symmetrized-conservation"] {
        assert!(replay_records(&rs, label, &rules).is_zero(), "{label}");
    }
    assert_eq!(replay_records(&rs, "symmetrization", &rules), canonicalize(&s.derivation.unwrap().expr));
}

#[test]
fn symmetrize_command_prints_only_the_symmetric_tensor() {
    let o = run(&["symmetrize", "--theory", &data("free-em.theory")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.starts_with("symmetrized-tem: ")), "{out}");
    assert!(!out.contains("canonical-tem"));
}

#[test]
fn check_conserved_exit_codes() {
    let o = run(&["check-conserved", "--expr", "eta[^mu,^nu]"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["check-conserved", "--expr", "A[^mu]*A[^nu]", "--max-depth", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("not shown"), "{}", stderr(&o));
    let o = run(&["check-conserved", "--theory", &data("free-scalar.theory")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn expand_prints_one_line_per_component() {
    let o = run(&["expand", "--dimension", "2", "--expr", "F[_mu,_nu]"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = run(&["expand", "--expr", "eta[^mu,_mu]"]);
    assert_eq!(stdout(&o).trim_end().rsplit(' ').next(), Some("4"));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let args = ["tem", "--theory", &data("free-scalar.theory"), "--check"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
}
