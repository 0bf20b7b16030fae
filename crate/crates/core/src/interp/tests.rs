use super::*;
use crate::gmi::{Flavor, INDEX_FILE};
use crate::loader::{SessionConfig, Strategy};
use crate::modulemap::SearchPaths;
use crate::release::{compile_release, load_map, read_modulemaps, write_index, write_pch};

const HEADER: &str = "\
struct Point { x: i32; y: i32; };
struct Rect { a: Point; b: Point; tag: bool; };
struct Node { next: ptr<Node>; v: f64; };
enum Color { Red, Green };
using Coord = Point;
using Loop1 = Loop2;
using Loop2 = Loop1;
struct Bad { inner: Bad; };
struct Opaque;
fn area(ptr<Rect>) -> i64;
";

fn session(strategy: Strategy) -> (tempfile::TempDir, Session) {
    let src = tempfile::tempdir().unwrap();
    std::fs::write(src.path().join("g.dh"), HEADER).unwrap();
    std::fs::write(
        src.path().join("m.modulemap"),
        "module Geo { header \"g.dh\" }",
    )
    .unwrap();
    let out = tempfile::tempdir().unwrap();
    let map = read_modulemaps(&[src.path().join("m.modulemap")]).unwrap();
    compile_release(&map, None, out.path()).unwrap();
    write_pch(out.path()).unwrap();
    write_index(
        out.path(),
        Flavor::Semantic,
        &[],
        &out.path().join(INDEX_FILE),
    )
    .unwrap();
    let config = SessionConfig::new(
        load_map(out.path()).unwrap(),
        SearchPaths::release(out.path()),
        strategy,
    );
    let s = Session::open(config).unwrap();
    (out, s)
}

fn run(s: &mut Session, src: &str) -> Vec<EvalOutcome> {
    run_script(s, src)
        .unwrap()
        .into_iter()
        .map(|r| r.outcome)
        .collect()
}

#[test]
fn sizeof_values() {
    for st in Strategy::ALL {
        let (_dir, mut s) = session(st);
        let got = run(
            &mut s,
            "sizeof(Point); sizeof(Rect); sizeof(Node); sizeof(Color); sizeof(Coord);",
        );
        let want: Vec<EvalOutcome> = [8, 17, 16, 4, 8]
            .into_iter()
            .map(|v| EvalOutcome::Ok(Some(v)))
            .collect();
        assert_eq!(got, want, "{st}");
    }
}

#[test]
fn failures_are_outcomes() {
    let (_dir, mut s) = session(Strategy::SemanticGmi);
    let got = run(
        &mut s,
        "sizeof(Loop1); sizeof(Bad); new Opaque; sizeof(Missing); new area;",
    );
    assert_eq!(
        got,
        [
            EvalOutcome::Fail(FailReason::AliasCycle("Loop1".into())),
            EvalOutcome::Fail(FailReason::InfiniteSize("Bad".into())),
            EvalOutcome::Fail(FailReason::NotFound("Opaque".into())),
            EvalOutcome::Fail(FailReason::NotFound("Missing".into())),
            EvalOutcome::Fail(FailReason::NotFound("area".into())),
        ]
    );
}

#[test]
fn needs_follow_the_statement() {
    let (_dir, mut s) = session(Strategy::SemanticGmi);
    let got = run(
        &mut s,
        "declare p: ptr<Opaque>; declare n: i64; call area; declare r: Rect; declare q: Opaque;",
    );
    assert_eq!(
        got[..4],
        [
            EvalOutcome::Ok(None),
            EvalOutcome::Ok(None),
            EvalOutcome::Ok(None),
            EvalOutcome::Ok(None)
        ]
    );
    assert_eq!(
        got[4],
        EvalOutcome::Fail(FailReason::NotFound("Opaque".into()))
    );
}

#[test]
fn stats_delta_and_directives() {
    let (_dir, mut s) = session(Strategy::SemanticGmi);
    let rs = run_script(
        &mut s,
        "new Point;\nnew Point;\n.strategy\n.loaded\n.quit\nnew Rect;",
    )
    .unwrap();
    assert_eq!(rs.len(), 4);
    assert_eq!(rs[0].stats_delta.modules_loaded, ["Geo"]);
    assert_eq!(rs[0].stats_delta.lookups, 1);
    assert_eq!(rs[1].stats_delta.module_count(), 0);
    assert_eq!(rs[2].outcome, EvalOutcome::Info("semantic-gmi".into()));
    assert_eq!(rs[3].outcome, EvalOutcome::Info("Geo".into()));
    assert_eq!(rs[0].echo, "new Point;");
    assert!(rs[0].to_string().starts_with("new Point;: ok"));
}

#[test]
fn parse_errors_abort_before_evaluation() {
    let (_dir, mut s) = session(Strategy::SemanticGmi);
    match run_script(&mut s, "new Point;\nnew ;") {
        Err(InterpError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(s.stats().lookups, 0);
}

#[test]
fn repl_keeps_going_after_errors() {
    let (_dir, mut s) = session(Strategy::Pch);
    let input = b"new Point;\nbogus\nsizeof(Rect);\n.quit\nnew Point;\n";
    let mut out = Vec::new();
    repl(&mut s, &input[..], &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with(PROMPT));
    assert!(text.contains("new Point;: ok"));
    assert!(text.contains("error:"));
    assert!(text.contains("sizeof(Rect);: 17"));
    // Both `Point` fields of `Rect` are looked up.
    assert_eq!(s.stats().lookups, 4);
}
