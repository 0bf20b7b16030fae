use super::*;
use crate::gmi::Flavor;
use crate::modfile::EntityKind;
use crate::release::{compile_release, load_map, read_modulemaps, write_index, write_pch};

const LEXICAL: &str = "modules.lexical.gmi";

/// Builds a release from `(module, header text)` pairs, one header per
/// module named `<module>.dh`.
fn release(modules: &[(&str, &str)]) -> tempfile::TempDir {
    let src = tempfile::tempdir().unwrap();
    let mut mm = String::new();
    for (name, text) in modules {
        mm.push_str(&format!("module {name} {{ header \"{name}.dh\" }}\n"));
        std::fs::write(src.path().join(format!("{name}.dh")), text).unwrap();
    }
    std::fs::write(src.path().join("lib.modulemap"), mm).unwrap();
    let out = tempfile::tempdir().unwrap();
    let map = read_modulemaps(&[src.path().join("lib.modulemap")]).unwrap();
    compile_release(&map, None, out.path()).unwrap();
    // Merging fails on corpora with ODR violations; those tests skip the pch.
    write_pch(out.path()).ok();
    write_index(
        out.path(),
        Flavor::Semantic,
        &[],
        &out.path().join(INDEX_FILE),
    )
    .unwrap();
    write_index(out.path(), Flavor::Lexical, &[], &out.path().join(LEXICAL)).unwrap();
    out
}

fn config(dir: &Path, strategy: Strategy) -> SessionConfig {
    let mut c = SessionConfig::new(load_map(dir).unwrap(), SearchPaths::release(dir), strategy);
    if strategy == Strategy::LexicalGmi {
        c.index_path = Some(dir.join(LEXICAL));
    }
    c
}

fn open(dir: &Path, strategy: Strategy) -> Session {
    Session::open(config(dir, strategy)).unwrap()
}

fn gpad() -> tempfile::TempDir {
    let mut mods = vec![("M0", "struct Gpad { w: i32; h: i32; };".to_string())];
    for i in 1..6 {
        mods.push((
            ["M1", "M2", "M3", "M4", "M5"][i - 1],
            "struct Gpad;\nstruct Other { p: ptr<Gpad>; };".into(),
        ));
    }
    let mods: Vec<(&str, &str)> = mods.iter().map(|(n, t)| (*n, t.as_str())).collect();
    release(&mods)
}

#[test]
fn strategy_names_round_trip() {
    for s in Strategy::ALL {
        assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
    }
    assert_eq!(
        "SemanticGmi".parse::<Strategy>().unwrap(),
        Strategy::SemanticGmi
    );
    assert!(matches!(
        "eager".parse::<Strategy>(),
        Err(LoadError::UnknownStrategy(_))
    ));
}

#[test]
fn imports_load_before_importers() {
    let dir = release(&[
        ("A", "include \"B.dh\";\nstruct a { b: b; };"),
        ("B", "include \"C.dh\";\nstruct b { c: c; };"),
        ("C", "struct c { v: i32; };"),
    ]);
    let mut s = open(dir.path(), Strategy::SemanticGmi);
    assert!(s.load_module("A").unwrap());
    assert_eq!(s.stats().modules_loaded, ["C", "B", "A"]);
    let before = s.stats();
    assert!(!s.load_module("A").unwrap());
    assert!(!s.load_module("C").unwrap());
    assert_eq!(s.stats(), before);
}

#[test]
fn missing_import_names_the_import() {
    let dir = release(&[
        ("A", "include \"B.dh\";\nstruct a {};"),
        ("B", "struct b {};"),
    ]);
    let cfg = config(dir.path(), Strategy::SemanticGmi);
    std::fs::remove_file(dir.path().join("B.pcm")).unwrap();
    let mut c = cfg;
    c.allow_stale = true;
    let mut s = Session::open(c).unwrap();
    match s.load_module("A") {
        Err(LoadError::ModuleNotFound(m)) => assert_eq!(m, "B"),
        other => panic!("unexpected {other:?}"),
    }
    assert!(!s.is_loaded("A"));
}

#[test]
fn resolutions_are_cached() {
    let dir = gpad();
    let mut s = open(dir.path(), Strategy::LexicalGmi);
    let first = s.resolve("Gpad", Need::Definition).unwrap();
    let after = s.stats();
    let second = s.resolve("Gpad", Need::Definition).unwrap();
    assert_eq!(first, second);
    let d = s.stats().since(&after);
    assert_eq!(d.lookups, 1);
    assert_eq!(
        d,
        LoadStats {
            lookups: 1,
            ..Default::default()
        }
    );
    assert_eq!(s.history().len(), 2);
}

#[test]
fn gpad_semantic_loads_only_the_definer() {
    let dir = gpad();
    let mut s = open(dir.path(), Strategy::SemanticGmi);
    assert_eq!(s.stats().module_count(), 0);
    let r = s.resolve("Gpad", Need::Definition).unwrap();
    let e = r.entity().unwrap();
    assert_eq!(e.kind, EntityKind::Definition);
    assert_eq!(e.defining_module.as_deref(), Some("M0"));
    assert_eq!(s.stats().modules_loaded, ["M0"]);
    assert_eq!(s.stats().false_positive_loads, 0);
}

#[test]
fn gpad_lexical_loads_every_mention() {
    let dir = gpad();
    let mut s = open(dir.path(), Strategy::LexicalGmi);
    let r = s.resolve("Gpad", Need::Definition).unwrap();
    assert_eq!(r.entity().unwrap().defining_module.as_deref(), Some("M0"));
    assert_eq!(s.stats().module_count(), 6);
    assert_eq!(s.stats().false_positive_loads, 5);
    assert_eq!(r.entity().unwrap().contributing_modules.len(), 6);
}

#[test]
fn semantic_forward_only_names() {
    let dir = release(&[
        ("A", "struct Fwd;\nfn f(i32) -> i32;"),
        ("B", "struct Fwd;"),
    ]);
    let mut s = open(dir.path(), Strategy::SemanticGmi);
    let r = s.resolve("Fwd", Need::ForwardOk).unwrap();
    assert_eq!(r.outcome, Outcome::ImplicitForward);
    assert_eq!(
        s.resolve("Fwd", Need::Definition).unwrap().outcome,
        Outcome::NotFound
    );
    assert_eq!(
        s.resolve("f", Need::ForwardOk).unwrap().outcome,
        Outcome::ImplicitForward
    );
    assert_eq!(
        s.resolve("nope", Need::ForwardOk).unwrap().outcome,
        Outcome::NotFound
    );
    assert_eq!(s.stats().module_count(), 0);

    let mut lex = open(dir.path(), Strategy::LexicalGmi);
    let r = lex.resolve("Fwd", Need::ForwardOk).unwrap();
    assert_eq!(r.entity().unwrap().kind, EntityKind::Forward);
    assert_eq!(r.entity().unwrap().credited_module(), "A");
    assert_eq!(lex.stats().false_positive_loads, 1);
    assert_eq!(
        lex.resolve("Fwd", Need::Definition).unwrap().outcome,
        Outcome::NotFound
    );
}

#[test]
fn preload_overhead_scales_with_module_count() {
    let dir = gpad();
    let mut small = config(dir.path(), Strategy::PreloadAll);
    small.cost.per_module_overhead_bytes = 1000;
    let mut big = config(dir.path(), Strategy::PreloadAll);
    big.cost.per_module_overhead_bytes = 1500;
    let a = Session::open(small).unwrap().stats();
    let b = Session::open(big).unwrap().stats();
    assert_eq!(a.module_count(), 6);
    assert_eq!(b.sim_memory_bytes - a.sim_memory_bytes, 6 * 500);
    assert_eq!(a.bytes_read, b.bytes_read);
    assert_eq!(a.decls_deserialized, 11);
}

#[test]
fn preload_and_pch_resolve_without_loading() {
    let dir = gpad();
    for st in [Strategy::PreloadAll, Strategy::Pch] {
        let mut s = open(dir.path(), st);
        let start = s.stats();
        let r = s.resolve("Gpad", Need::Definition).unwrap();
        assert_eq!(r.entity().unwrap().kind, EntityKind::Definition);
        assert_eq!(s.stats().since(&start).module_count(), 0);
    }
    let s = open(dir.path(), Strategy::Pch);
    assert_eq!(s.stats().modules_loaded, [PCH_NAME]);
}

#[test]
fn textual_parses_each_header_once() {
    let dir = release(&[
        ("A", "include \"B.dh\";\nstruct a { b: b; };"),
        ("B", "struct b { v: i32; };\nstruct c { v: b; };"),
    ]);
    let mut s = open(dir.path(), Strategy::Textual);
    assert!(s.stats().bytes_read > 0);
    assert!(s.resolve("a", Need::Definition).unwrap().is_success());
    assert_eq!(s.stats().headers_parsed, 2);
    assert!(s.resolve("c", Need::Definition).unwrap().is_success());
    assert_eq!(s.stats().headers_parsed, 2);
    assert_eq!(
        s.resolve("zz", Need::ForwardOk).unwrap().outcome,
        Outcome::NotFound
    );
    assert_eq!(s.stats().module_count(), 0);
}

#[test]
fn odr_violations_surface_on_lookup() {
    let dir = release(&[
        ("A", "struct X { v: i32; };"),
        ("B", "struct X { v: i64; };"),
    ]);
    for st in [Strategy::PreloadAll, Strategy::LexicalGmi] {
        let mut s = open(dir.path(), st);
        assert!(
            matches!(s.resolve("X", Need::Definition), Err(LoadError::Odr(_))),
            "{st}"
        );
    }
    // Textual lookup sees only the headers reachable from the mapped one.
    let mut s = open(dir.path(), Strategy::Textual);
    let r = s.resolve("X", Need::Definition).unwrap();
    assert_eq!(r.entity().unwrap().decl.origin.path, "A.dh");
}

#[test]
fn missing_artifacts() {
    let dir = gpad();
    std::fs::remove_file(dir.path().join("__pch__.pcm")).unwrap();
    std::fs::remove_file(dir.path().join(ROOTMAP_FILE)).unwrap();
    std::fs::remove_file(dir.path().join(INDEX_FILE)).unwrap();
    assert!(matches!(
        Session::open(config(dir.path(), Strategy::Pch)),
        Err(LoadError::MissingPch(_))
    ));
    assert!(matches!(
        Session::open(config(dir.path(), Strategy::Textual)),
        Err(LoadError::MissingRootmap(_))
    ));
    assert!(matches!(
        Session::open(config(dir.path(), Strategy::SemanticGmi)),
        Err(LoadError::MissingIndex(_))
    ));
}

#[test]
fn semantic_requires_semantic_index() {
    let dir = gpad();
    let mut c = config(dir.path(), Strategy::SemanticGmi);
    c.index_path = Some(dir.path().join(LEXICAL));
    assert!(matches!(
        Session::open(c),
        Err(LoadError::Index(GmiError::WrongFlavor))
    ));
    let mut c = config(dir.path(), Strategy::LexicalGmi);
    c.index_path = Some(dir.path().join(INDEX_FILE));
    assert!(Session::open(c).is_ok());
}

#[test]
fn stale_index_is_refused() {
    let dir = release(&[("A", "struct a {};"), ("B", "struct b {};")]);
    let other = release(&[("A", "struct a {};"), ("B", "struct b { v: i32; };")]);
    std::fs::copy(other.path().join("B.pcm"), dir.path().join("B.pcm")).unwrap();
    match Session::open(config(dir.path(), Strategy::SemanticGmi)) {
        Err(LoadError::IndexStale(m)) => assert_eq!(m, ["B"]),
        other => panic!("unexpected {other:?}"),
    }
    let mut c = config(dir.path(), Strategy::SemanticGmi);
    c.allow_stale = true;
    assert!(Session::open(c).is_ok());
}

#[test]
fn local_modules_shadow_the_release() {
    let dir = release(&[("A", "struct a { v: i32; };"), ("B", "struct b {};")]);
    let local = release(&[
        ("A", "struct a { v: i64; };\nstruct extra {};"),
        ("B", "struct b {};"),
    ]);
    let local_root = tempfile::tempdir().unwrap();
    std::fs::copy(local.path().join("A.pcm"), local_root.path().join("A.pcm")).unwrap();
    let mut c = config(dir.path(), Strategy::SemanticGmi);
    c.paths = SearchPaths::new(
        vec![local_root.path().to_path_buf()],
        dir.path().to_path_buf(),
    )
    .unwrap();
    let mut s = Session::open(c).unwrap();
    assert_eq!(s.direct_modules(), ["A"]);
    assert_eq!(s.module_origin("A"), Some(PathOrigin::Local));
    let r = s.resolve("a", Need::Definition).unwrap();
    assert_eq!(
        r.entity().unwrap().decl.to_string(),
        "struct a { v: i64; };"
    );
    assert!(s.resolve("extra", Need::Definition).unwrap().is_success());
    assert!(s.resolve("b", Need::Definition).unwrap().is_success());
    assert_eq!(s.module_origin("B"), Some(PathOrigin::Release));
}

#[test]
fn equivalence_rules() {
    let dir = gpad();
    let mut sem = open(dir.path(), Strategy::SemanticGmi);
    let mut pch = open(dir.path(), Strategy::Pch);
    for (name, need) in [
        ("Gpad", Need::Definition),
        ("Gpad", Need::ForwardOk),
        ("Other", Need::ForwardOk),
        ("x", Need::Definition),
    ] {
        let a = sem.resolve(name, need).unwrap();
        let b = pch.resolve(name, need).unwrap();
        assert!(a.equivalent(&b), "{a} vs {b}");
    }
    let nf = Resolution {
        identifier: "Gpad".into(),
        need: Need::Definition,
        outcome: Outcome::NotFound,
    };
    assert!(!nf.equivalent(&sem.history()[0]));
}
