use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_cosetkit")).args(args).output().expect("binary runs");
    (out.status.code().expect("exit code"), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cosetkit-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Undirected adjacency parsed from the `a -- b;` lines of a DOT export.
fn dot_adjacency(dot: &str) -> BTreeMap<String, BTreeSet<String>> {
    let mut adj: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for line in dot.lines() {
        if let Some((a, b)) = line.trim().trim_end_matches(';').split_once(" -- ") {
            adj.entry(a.into()).or_default().insert(b.into());
            adj.entry(b.into()).or_default().insert(a.into());
        }
    }
    adj
}

fn edge_count(adj: &BTreeMap<String, BTreeSet<String>>) -> usize {
    adj.values().map(BTreeSet::len).sum::<usize>() / 2
}

fn connected(adj: &BTreeMap<String, BTreeSet<String>>) -> bool {
    let Some(start) = adj.keys().next() else { return true };
    let mut seen = BTreeSet::from([start.clone()]);
    let mut stack = vec![start.clone()];
    while let Some(v) = stack.pop() {
        for w in &adj[&v] {
            if seen.insert(w.clone()) {
                stack.push(w.clone());
            }
        }
    }
    seen.len() == adj.len()
}

#[test]
fn polygon_check_holds() {
    let (code, out, _) = run(&["check", &fixture("ngon5.sys"), "--props", "ft,rc,thin"]);
    assert_eq!(code, 0, "{out}");
    assert!(out.starts_with("# cosetkit report\n# max_cosets=200000 max_word_len=8 samples=2000 seed=20250101\n"));
    assert!(out.ends_with("system=ngon5\nrank=2\nft=holds\nrc=holds\nfirmness=thin\n"), "{out}");
}

#[test]
fn klein_check_fails_with_witness() {
    let (code, out, _) = run(&["check", &fixture("klein-bad.sys"), "--props", "ft"]);
    assert_eq!(code, 1);
    assert!(out.contains("ft=fails\nft_witness=J={1,2} i=3\n"), "{out}");
}

#[test]
fn braid_thinness_is_unknown() {
    let (code, out, _) = run(&["check", &fixture("braid3.sys"), "--props", "thin", "--max-word-len", "6"]);
    assert_eq!(code, 2);
    assert!(out.contains("max_word_len=6"));
    assert!(out.contains("firmness=unknown\n"), "{out}");
}

#[test]
fn worst_outcome_wins_across_files() {
    let (code, _, _) = run(&["check", &fixture("ngon5.sys"), &fixture("braid3.sys"), &fixture("klein-bad.sys"), "--props", "ft,thin"]);
    assert_eq!(code, 1);
}

#[test]
fn report_lists_everything_in_order() {
    let (code, out, _) = run(&["report", &fixture("A3.sys")]);
    assert_eq!(code, 0);
    let keys: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).map(|l| l.split('=').next().unwrap()).collect();
    assert_eq!(keys, ["system", "rank", "ft", "rc", "firmness", "finite", "chambers", "flag_complex", "hypertope"]);
    assert!(out.contains("chambers=24\n") && out.contains("flag_complex=holds\n"));
}

#[test]
fn polygon_export_is_a_cycle() {
    let (code, dot, _) = run(&["export", &fixture("ngon5.sys"), "--format", "dot"]);
    assert_eq!(code, 0);
    let adj = dot_adjacency(&dot);
    assert_eq!(adj.len(), 10);
    assert!(adj.values().all(|n| n.len() == 2));
    assert!(connected(&adj));
}

#[test]
fn bivalent_tree_export_is_a_path() {
    let (code, dot, _) = run(&["export", &fixture("bivalent-tree.sys"), "--limit", "4"]);
    assert_eq!(code, 0);
    let adj = dot_adjacency(&dot);
    assert!(connected(&adj));
    assert_eq!(edge_count(&adj), adj.len() - 1, "connected with |E| = |V| - 1 means acyclic");
    assert!(adj.values().all(|n| n.len() <= 2));
}

#[test]
fn coxeter_complex_facets() {
    let (code, out, _) = run(&["export", &fixture("A3.sys"), "--complex"]);
    assert_eq!(code, 0);
    let facets: BTreeSet<&str> = out.lines().collect();
    assert_eq!(facets.len(), 24);
    assert!(facets.iter().all(|f| f.split_whitespace().count() == 3));
    let vertices: BTreeSet<&str> = facets.iter().flat_map(|f| f.split_whitespace()).collect();
    assert_eq!(vertices.len(), 14);
}

#[test]
fn free_product_build_round_trips() {
    let built = scratch("fp.sys");
    let (code, _, err) = run(&["build", &fixture("free-product.build"), "-o", built.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    let text = std::fs::read_to_string(&built).unwrap();
    assert!(text.contains("backend free-product 2 finite finite"));
    assert!(text.contains("certificate ft holds free product preserves flag-transitivity"));
    let (c1, r1, _) = run(&["report", built.to_str().unwrap()]);
    let (c2, r2, _) = run(&["report", built.to_str().unwrap()]);
    assert_eq!((c1, &r1), (c2, &r2));
    assert!(r1.contains("ft=holds\nft_certificate=free product preserves flag-transitivity\n"), "{r1}");
    assert!(r1.contains("finite=fails"), "{r1}");
    assert!(r1.contains("chambers=infinite"), "{r1}");
}

#[test]
fn twist_build_reports_recognized_diagram() {
    let (code, out, err) = run(&["build", &fixture("twist.build")]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("# after eliminating conjugate generators"));
    assert!(out.contains("#   edge a1 tau 4"), "{out}");
    assert!(out.contains("type {1,4} := a2 a3 tau"), "{out}");
    assert_eq!(run(&["build", &fixture("twist.build")]).1, out, "deterministic output");
}

#[test]
fn errors_exit_three() {
    let (code, _, err) = run(&["build", &fixture("bad-map.build")]);
    assert_eq!(code, 3);
    assert!(err.starts_with("error:"));
    assert_eq!(run(&["check", &fixture("ngon5.sys"), "--props", "bogus"]).0, 3);
    assert_eq!(run(&["check", &fixture("missing.sys")]).0, 3);
    assert_eq!(run(&["export", &fixture("ngon5.sys"), "--format", "svg"]).0, 3);
    assert_eq!(run(&["frobnicate"]).0, 3);
    assert_eq!(run(&["--help"]).0, 0);
}

#[test]
fn fundamental_systems_agree_across_trees() {
    let graph = fixture("graph/triangle.gog");
    let (code, out, err) = run(&["fundamental", &graph]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("type {1,3,4,6} :=") && out.contains("type {2,5} :=") && out.contains("type t :="), "{out}");
    for other in ["e1,e5", "e3,e5"] {
        let (code, out, _) = run(&["fundamental", &graph, "--compare", other]);
        assert_eq!(code, 0, "{out}");
        assert!(out.ends_with("verdict equal\n"));
    }
}
