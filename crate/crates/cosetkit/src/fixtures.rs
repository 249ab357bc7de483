//! Builders for the standard example systems: polygons, Coxeter and Artin diagrams,
//! the Klein four-group systems and the inputs of the worked constructions.
//!
//! Inputs are fixed, so failures here are programming errors and panic.

use crate::finite::FiniteGroup;
use crate::incidence::{make_system, CosetIncidenceSystem, TypeSet};
use crate::presentation::{parse_presentation, shephard_presentation, tietze_eliminate, GeneratorMap, Label, LabeledDiagram, Presentation, Word};
use crate::structured::{GroupHandle, SemiDirectGroup};

/// Coset cap used when enumerating fixture groups.
pub const FIXTURE_CAP: usize = 2_000_000;

/// Diagram on `vertices` with the given loop label and labeled edges; absent edges commute.
pub fn diagram(name: &str, vertices: &[&str], loops: Label, edges: &[(usize, usize, Label)]) -> LabeledDiagram {
    let mut d = LabeledDiagram::new(name, vertices);
    for v in 0..vertices.len() {
        d.set_loop(v, loops);
    }
    for &(a, b, l) in edges {
        d.set_edge(a, b, l);
    }
    d
}

fn f(m: u32) -> Label {
    Label::Finite(m)
}

/// `(G, (⟨gens minus g_i⟩)_i)` with the given type names, finite when `finite` is set.
pub fn standard_system(name: &str, p: &Presentation, types: &[&str], finite: bool) -> CosetIncidenceSystem {
    let n = p.ngens();
    assert_eq!(types.len(), n, "one type per generator");
    let group = if finite {
        GroupHandle::finite(FiniteGroup::from_presentation(p, FIXTURE_CAP).expect("fixture group enumerates"))
    } else {
        GroupHandle::Presented(std::sync::Arc::new(p.clone()))
    };
    let gens = (0..n).map(|i| (0..n).filter(|&j| j != i).map(Word::gen).collect()).collect();
    make_system(name, group, TypeSet::from_atoms(types).expect("distinct types"), gens).expect("valid fixture")
}

/// A finite system from presentation text and parabolic generator words.
pub fn finite_system(name: &str, pres: &str, types: &[&str], gens: &[&[&str]]) -> CosetIncidenceSystem {
    let p = parse_presentation(pres).expect("fixture presentation parses");
    let g = FiniteGroup::from_presentation(&p, FIXTURE_CAP).expect("fixture group enumerates");
    let pg = gens.iter().map(|ws| ws.iter().map(|w| p.word(w).expect("fixture word parses")).collect()).collect();
    make_system(name, GroupHandle::finite(g), TypeSet::from_atoms(types).expect("distinct types"), pg).expect("valid fixture")
}

fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn type_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

fn as_strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// The n-gon: dihedral group of order 2n on two involutions.
pub fn ngon(n: usize) -> CosetIncidenceSystem {
    finite_system(&format!("ngon{n}"), &format!("group D{n}\ngens a1 a2\nrel a1^2\nrel a2^2\nrel (a1 a2)^{n}"), &["1", "2"], &[&["a2"], &["a1"]])
}

/// The n-gon with custom generator and type names.
pub fn ngon_named(n: usize, gens: [&str; 2], types: [&str; 2]) -> CosetIncidenceSystem {
    let [x, y] = gens;
    let pres = format!("group D{n}\ngens {x} {y}\nrel {x}^2\nrel {y}^2\nrel ({x} {y})^{n}");
    finite_system(&format!("ngon{n}"), &pres, &types, &[&[y], &[x]])
}

/// Rank one on a cyclic group of order two, with trivial parabolic.
pub fn rank_one(gen: &str, ty: &str) -> CosetIncidenceSystem {
    finite_system(&format!("C2_{ty}"), &format!("gens {gen}\nrel {gen}^2"), &[ty], &[&[]])
}

/// The Klein four-group with the given parabolic generators.
pub fn klein(gens: &[&[&str]], types: &[&str]) -> CosetIncidenceSystem {
    finite_system("klein", "group V4\ngens x y\nrel x^2\nrel y^2\nrel x y x^-1 y^-1", types, gens)
}

/// Coxeter diagram of type A_n (a path with labels 3).
pub fn coxeter_a_diagram(n: usize) -> LabeledDiagram {
    let names = numbered("a", n);
    let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, f(3))).collect();
    diagram(&format!("A{n}"), &as_strs(&names), f(2), &edges)
}

/// Standard Coxeter system of type A_n on the symmetric group, types `1..n`.
pub fn coxeter_a(n: usize) -> CosetIncidenceSystem {
    let p = shephard_presentation(&coxeter_a_diagram(n));
    standard_system(&format!("A{n}"), &p, &as_strs(&type_names(n)), true)
}

/// Artin diagram of type D_n in the labeling where `a_1` and `a_n` both braid with `a_2`.
pub fn artin_d_diagram(n: usize) -> LabeledDiagram {
    assert!(n >= 4);
    let names = numbered("a", n);
    let mut edges = vec![(0, 1, f(3)), (n - 1, 1, f(3))];
    edges.extend((1..n - 2).map(|i| (i, i + 1, f(3))));
    diagram(&format!("D{n}"), &as_strs(&names), Label::Infinite, &edges)
}

pub fn artin_d(n: usize) -> CosetIncidenceSystem {
    let p = shephard_presentation(&artin_d_diagram(n));
    standard_system(&format!("ArtinD{n}"), &p, &as_strs(&type_names(n)), false)
}

/// Cyclic group of order k on `tau` as a rank-one system with trivial parabolic.
pub fn cyclic_actor(k: usize) -> CosetIncidenceSystem {
    finite_system(&format!("C{k}"), &format!("gens tau\nrel tau^{k}"), &["0"], &[&[]])
}

/// The swap `a_1 <-> a_n` of the D_n Artin diagram.
pub fn d_swap(n: usize) -> GeneratorMap {
    let mut images: Vec<Word> = (0..n).map(Word::gen).collect();
    images.swap(0, n - 1);
    GeneratorMap::on_generators(images)
}

/// Target of the Mikado rewrite: the Shephard diagram `B_n(2,∞)` on `tau, a1..a_{n-1}`.
pub fn shephard_b_target(n: usize) -> Presentation {
    let mut names = vec!["tau".to_string()];
    names.extend(numbered("a", n - 1));
    let mut edges = vec![(0, 1, f(4))];
    edges.extend((1..n - 1).map(|i| (i, i + 1, f(3))));
    let mut d = diagram(&format!("B{n}(2,inf)"), &as_strs(&names), Label::Infinite, &edges);
    d.set_loop(0, f(2));
    shephard_presentation(&d)
}

/// D_n Artin twisted by `C_2`, then `a_n` eliminated through `a_n = tau a_1 tau^-1`.
pub fn mikado_rewrite(n: usize) -> Presentation {
    let alpha = artin_d(n);
    let beta = cyclic_actor(2);
    let sd = SemiDirectGroup::new(alpha.group.clone(), beta.group.clone(), vec![d_swap(n)]).expect("semidirect fixture");
    let p = &sd.presentation;
    let tau = p.gen_index("tau").expect("tau");
    let an = p.gen_index(&format!("a{n}")).expect("a_n");
    let replacement = Word::join(&[&Word::gen(tau), &Word::gen(0), &Word::gen(tau).inverse()]);
    let q = tietze_eliminate(p, an, &replacement).expect("replacement avoids a_n");
    let mut order = vec!["tau".to_string()];
    order.extend(numbered("a", n - 1));
    q.reorder_generators(&order).expect("same generators")
}

/// Artin group of the triple amalgam for the cyclic case at n = 4: `a4`, `a5` are copies of `a1`.
pub fn triple_amalgam_diagram() -> LabeledDiagram {
    let names = numbered("a", 5);
    let edges = [(0, 1, f(3)), (1, 2, f(3)), (3, 1, f(3)), (4, 1, f(3)), (0, 3, Label::Infinite), (0, 4, Label::Infinite), (3, 4, Label::Infinite)];
    diagram("A*3", &as_strs(&names), Label::Infinite, &edges)
}

/// The order-three rotation `a1 -> a4 -> a5 -> a1`.
pub fn triple_rotation() -> GeneratorMap {
    GeneratorMap::on_generators(vec![Word::gen(3), Word::gen(1), Word::gen(2), Word::gen(4), Word::gen(0)])
}

/// The cyclic case at n = 4, rewritten by eliminating `a5 = tau^2 a1 tau^-2` and `a4 = tau a1 tau^-1`.
pub fn triple_rewrite() -> Presentation {
    let p = shephard_presentation(&triple_amalgam_diagram());
    let alpha = standard_system("A*3", &p, &["1", "2", "3", "4", "5"], false);
    let beta = cyclic_actor(3);
    let sd = SemiDirectGroup::new(alpha.group.clone(), beta.group.clone(), vec![triple_rotation()]).expect("semidirect fixture");
    let p = &sd.presentation;
    let tau = Word::gen(p.gen_index("tau").expect("tau"));
    let a5 = Word::join(&[&tau.pow(2), &Word::gen(0), &tau.pow(-2)]);
    let q = tietze_eliminate(p, 4, &a5).expect("replacement avoids a5");
    let tau = Word::gen(q.gen_index("tau").expect("tau"));
    let a4 = Word::join(&[&tau, &Word::gen(0), &tau.inverse()]);
    let q = tietze_eliminate(&q, 3, &a4).expect("replacement avoids a4");
    q.reorder_generators(&["tau".into(), "a1".into(), "a2".into(), "a3".into()]).expect("same generators")
}

/// Target of the cyclic case: `tau` of order 3, free with `a1`, commuting with `a2`, `a3`.
pub fn triple_target() -> Presentation {
    let edges = [(0, 1, Label::Infinite), (1, 2, f(3)), (2, 3, f(3))];
    let mut d = diagram("target", &["tau", "a1", "a2", "a3"], Label::Infinite, &edges);
    d.set_loop(0, f(3));
    shephard_presentation(&d)
}

/// Artin group with four generators, every pair braiding.
pub fn braid_tetrahedron() -> CosetIncidenceSystem {
    let names = numbered("a", 4);
    let edges: Vec<_> = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j, f(3)))).collect();
    let p = shephard_presentation(&diagram("tetra", &as_strs(&names), Label::Infinite, &edges));
    standard_system("tetra", &p, &["1", "2", "3", "4"], false)
}

/// `S_3` on `p23, p34` with types `23`, `34`, and its action swapping `a2 a3` and `a3 a4`.
pub fn tetrahedron_actor() -> (CosetIncidenceSystem, Vec<GeneratorMap>) {
    let p = shephard_presentation(&diagram("S3", &["p23", "p34"], f(2), &[(0, 1, f(3))]));
    let beta = standard_system("S3", &p, &["23", "34"], true);
    let swap = |a: usize, b: usize| {
        let mut v: Vec<Word> = (0..4).map(Word::gen).collect();
        v.swap(a, b);
        GeneratorMap::on_generators(v)
    };
    (beta, vec![swap(1, 2), swap(2, 3)])
}

/// Affine diagram of type Ã3 as a square: 1-2, 1-3, 2-4, 3-4 labeled 3.
pub fn affine_a3_diagram() -> LabeledDiagram {
    let names = numbered("a", 4);
    diagram("A3~", &as_strs(&names), f(2), &[(0, 1, f(3)), (0, 2, f(3)), (1, 3, f(3)), (2, 3, f(3))])
}

/// The dihedral symmetries `(12)(34)` and `(23)` of the square.
pub fn affine_a3_symmetries() -> Vec<GeneratorMap> {
    let perm = |p: [usize; 4]| GeneratorMap::on_generators(p.iter().map(|&i| Word::gen(i)).collect());
    vec![perm([1, 0, 3, 2]), perm([0, 2, 1, 3])]
}

/// `D_4` on `psx, psy` with types `x`, `y`.
pub fn affine_a3_actor() -> CosetIncidenceSystem {
    let p = shephard_presentation(&diagram("D4", &["psx", "psy"], f(2), &[(0, 1, f(4))]));
    standard_system("D4", &p, &["x", "y"], true)
}

/// Ã3 modulo the symmetrized normal closure of `(a3 a4 a1 a2)^(2s)`.
pub fn affine_a3_quotient_presentation(s: usize) -> Presentation {
    let p = shephard_presentation(&affine_a3_diagram());
    let u = p.word(&format!("(a3 a4 a1 a2)^{}", 2 * s)).expect("word parses");
    let orbit = crate::presentation::b_symmetrize(&[u], &affine_a3_symmetries(), &p.generators).expect("small orbit");
    let mut q = crate::presentation::quotient_presentation(&p, &orbit);
    q.name = format!("A3~/u{s}");
    q
}

pub fn affine_a3_quotient(s: usize) -> CosetIncidenceSystem {
    let p = affine_a3_quotient_presentation(s);
    standard_system(&p.name.clone(), &p, &["1", "2", "3", "4"], true)
}

/// The hemicube-type group on `a0..a3` (types `0..3`) and the Coxeter group on `b0 b1 b2 b4`
/// (types `0 1 2 4`). They share a parabolic isomorphic to `S_4` but are not compatible.
pub fn hemicube_pair() -> (CosetIncidenceSystem, CosetIncidenceSystem) {
    let a = parse_presentation(
        "group A\ngens a0 a1 a2 a3\nrel a0^2\nrel a1^2\nrel a2^2\nrel a3^2\nrel (a0 a1)^4\nrel (a1 a2)^3\nrel (a2 a3)^4\n\
         rel (a0 a2)^2\nrel (a0 a3)^2\nrel (a1 a3)^2\nrel (a0 a1 a2)^3",
    )
    .expect("parses");
    let b = parse_presentation(
        "group B\ngens b0 b1 b2 b4\nrel b0^2\nrel b1^2\nrel b2^2\nrel b4^2\nrel (b0 b1)^3\nrel (b1 b2)^3\nrel (b2 b4)^4\n\
         rel (b0 b2)^2\nrel (b0 b4)^2\nrel (b1 b4)^2",
    )
    .expect("parses");
    (standard_system("A", &a, &["0", "1", "2", "3"], true), standard_system("B", &b, &["0", "1", "2", "4"], true))
}

/// An isomorphism `⟨a0,a1,a2⟩ -> ⟨b0,b1,b2⟩` between the parabolics of type `{3}` and `{4}`.
pub fn hemicube_map(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem) -> GeneratorMap {
    let (pa, pb) = (alpha.group.presentation(), beta.group.presentation());
    let w = |p: &Presentation, s: &str| p.word(s).expect("parses");
    GeneratorMap { source: vec![w(pa, "a0"), w(pa, "a1"), w(pa, "a2")], images: vec![w(pb, "b0 b2"), w(pb, "b1"), w(pb, "b2")] }
}

/// The HNN datum on Coxeter A5: `a2 -> a3`, `a3 -> a4`, from `A_{1,4,5}` onto `A_{1,2,5}`.
pub fn a5_hnn_map() -> (u32, u32, GeneratorMap) {
    let source = 0b11001; // types 1, 4, 5
    let target = 0b10011; // types 1, 2, 5
    (source, target, GeneratorMap { source: vec![Word::gen(1), Word::gen(2)], images: vec![Word::gen(2), Word::gen(3)] })
}
