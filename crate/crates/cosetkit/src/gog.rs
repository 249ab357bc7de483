//! Graphs of coset incidence systems and their fundamental systems over a spanning tree.
//!
//! Vertex systems must be presented with standard parabolics (generated by generator subsets)
//! and a trusted generator-set calculus, so every subgroup in play is a set of generator
//! classes. Boundary maps send edge generators to distinct vertex generators.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use thiserror::Error;

use crate::abelian::{abelianize, Abelianization};
use crate::canonical::canonical_text;
use crate::constructions::{fresh_symbol, Partition};
use crate::incidence::{bits, make_system, CosetIncidenceSystem, IncidenceError, TypeLabel, TypeSet};
use crate::presentation::{GeneratorMap, Letter, Presentation, Word};
use crate::structured::{GroupHandle, SpecialSubgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GogError {
    #[error("duplicate id {0}")]
    Duplicate(String),
    #[error("unknown vertex {0}")]
    UnknownVertex(String),
    #[error("unknown edge {0}")]
    UnknownEdge(String),
    #[error("bad reversal at edge {0}")]
    BadReversal(String),
    #[error("edge systems of {0} and {1} differ")]
    EdgeSystemMismatch(String, String),
    #[error("boundary map of edge {edge} is not injective: {detail}")]
    BoundaryNotInjective { edge: String, detail: String },
    #[error("boundary map of edge {edge} is not a homomorphism: {detail}")]
    BoundaryNotHomomorphism { edge: String, detail: String },
    #[error("edge {edge} is not admissible: {witness}")]
    NotAdmissible { edge: String, witness: String },
    #[error("not a spanning tree: {0}")]
    NotSpanning(String),
    #[error("type partitions differ: {0}")]
    TypePartitionMismatch(String),
    #[error("name clash: {0}")]
    NameClash(String),
    #[error("unsupported vertex system {0}: {1}")]
    Unsupported(String, String),
    #[error(transparent)]
    Incidence(#[from] IncidenceError),
}

type Result<T> = std::result::Result<T, GogError>;

#[derive(Clone, Debug)]
pub struct GraphVertex {
    pub id: String,
    pub system: CosetIncidenceSystem,
}

/// An oriented edge with its edge system and boundary map into the origin's group.
#[derive(Clone, Debug)]
pub struct GraphEdge {
    pub id: String,
    pub reverse: String,
    pub from: String,
    pub to: String,
    pub system: CosetIncidenceSystem,
    pub boundary: GeneratorMap,
}

#[derive(Clone, Debug)]
pub struct GraphOfSystems {
    pub name: String,
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<GraphEdge>,
    /// Default spanning tree, as edge ids (either member of a pair may be named).
    pub tree: Vec<String>,
}

/// Admissibility evidence, one line per oriented edge.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidationReport {
    pub lines: Vec<String>,
}

/// A vertex system seen through the generator-set calculus.
struct VertexCalc {
    names: Vec<String>,
    relators: Vec<Word>,
    labels: Vec<TypeLabel>,
    sets: Vec<BTreeSet<usize>>,
}

impl VertexCalc {
    fn new(id: &str, sys: &CosetIncidenceSystem) -> Result<Self> {
        let GroupHandle::Presented(p) = &sys.group else {
            return Err(GogError::Unsupported(id.into(), "group must be given by a presentation".into()));
        };
        if sys.standard_calculus.is_none() {
            return Err(GogError::Unsupported(id.into(), "parabolics are not covered by a generator-set calculus".into()));
        }
        let sets = sys
            .specials
            .as_ref()
            .and_then(|sp| sp.iter().map(|s| if let SpecialSubgroup::Standard(set) = s { Some(set.clone()) } else { None }).collect::<Option<Vec<_>>>())
            .ok_or_else(|| GogError::Unsupported(id.into(), "parabolics must be generated by generators".into()))?;
        Ok(VertexCalc { names: p.generators.clone(), relators: p.relators.clone(), labels: sys.types.labels().to_vec(), sets })
    }

    fn all(&self) -> BTreeSet<usize> {
        (0..self.names.len()).collect()
    }

    fn parabolic(&self, mask: u32) -> BTreeSet<usize> {
        meet(&self.all(), bits(mask).map(|c| &self.sets[c]))
    }

    /// The type set whose parabolic equals `x`, if `x` is a parabolic.
    fn as_parabolic(&self, x: &BTreeSet<usize>) -> Option<u32> {
        let mask = (0..self.sets.len()).filter(|&c| x.is_subset(&self.sets[c])).fold(0u32, |m, c| m | (1 << c));
        (self.parabolic(mask) == *x).then_some(mask)
    }

    fn render(&self, set: &BTreeSet<usize>) -> String {
        format!("<{}>", set.iter().map(|&g| self.names[g].as_str()).join(","))
    }

    fn render_mask(&self, mask: u32) -> String {
        format!("{{{}}}", bits(mask).map(|c| self.labels[c].to_string()).join(","))
    }
}

fn meet<'a>(all: &BTreeSet<usize>, sets: impl Iterator<Item = &'a BTreeSet<usize>>) -> BTreeSet<usize> {
    sets.fold(all.clone(), |acc, s| acc.intersection(s).copied().collect())
}

fn sub_presentation(names: &[String], relators: &[Word], keep: &BTreeSet<usize>) -> Presentation {
    let pos: HashMap<usize, usize> = keep.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let rels = relators.iter().filter(|r| r.generators_used().is_subset(keep)).map(|r| r.map_generators(|g| pos[&g])).collect();
    Presentation::from_parts("sub", keep.iter().map(|&g| names[g].clone()).collect(), rels).expect("generator names come from a valid presentation")
}

impl GraphOfSystems {
    fn vertex_index(&self, id: &str) -> Result<usize> {
        self.vertices.iter().position(|v| v.id == id).ok_or_else(|| GogError::UnknownVertex(id.into()))
    }

    fn edge(&self, id: &str) -> Result<&GraphEdge> {
        self.edges.iter().find(|e| e.id == id).ok_or_else(|| GogError::UnknownEdge(id.into()))
    }

    fn calcs(&self) -> Result<Vec<VertexCalc>> {
        self.vertices.iter().map(|v| VertexCalc::new(&v.id, &v.system)).collect()
    }

    /// Vertex-local generator indices hit by the boundary map of `e`.
    fn boundary_image(&self, e: &GraphEdge, calc: &VertexCalc) -> Result<Vec<usize>> {
        let n = e.system.group.presentation().ngens();
        if e.boundary.images.len() != n {
            return Err(GogError::BoundaryNotInjective { edge: e.id.clone(), detail: format!("{} images for {} generators", e.boundary.images.len(), n) });
        }
        let mut image = Vec::with_capacity(n);
        for (k, w) in e.boundary.images.iter().enumerate() {
            let g = match w.letters() {
                [l] if !l.inv => l.index(),
                _ => {
                    return Err(GogError::BoundaryNotInjective {
                        edge: e.id.clone(),
                        detail: format!("image of generator {} is not a single generator", k + 1),
                    })
                }
            };
            if g >= calc.names.len() {
                return Err(GogError::BoundaryNotInjective { edge: e.id.clone(), detail: format!("generator index {g} out of range") });
            }
            if image.contains(&g) {
                return Err(GogError::BoundaryNotInjective { edge: e.id.clone(), detail: format!("{} is hit twice", calc.names[g]) });
            }
            image.push(g);
        }
        let keep: BTreeSet<usize> = image.iter().copied().collect();
        let edge_rels: Vec<Word> = e.system.group.presentation().relators.iter().map(|r| r.map_generators(|k| image[k])).collect();
        let mapped = canonical_text(&sub_presentation(&calc.names, &edge_rels, &keep));
        let local = canonical_text(&sub_presentation(&calc.names, &calc.relators, &keep));
        if mapped != local {
            return Err(GogError::BoundaryNotHomomorphism {
                edge: e.id.clone(),
                detail: format!("edge relators map to\n{mapped}but {} is presented by\n{local}", calc.render(&keep)),
            });
        }
        Ok(image)
    }

    /// Checks every invariant of the graph and reports each edge's admissibility evidence.
    pub fn validate(&self) -> Result<ValidationReport> {
        let mut seen = BTreeSet::new();
        for id in self.vertices.iter().map(|v| &v.id).chain(self.edges.iter().map(|e| &e.id)) {
            if !seen.insert(id.clone()) {
                return Err(GogError::Duplicate(id.clone()));
            }
        }
        let calcs = self.calcs()?;
        let mut lines = Vec::new();
        for e in &self.edges {
            let rev = self.edge(&e.reverse)?;
            if rev.id == e.id || rev.reverse != e.id || rev.from != e.to || rev.to != e.from {
                return Err(GogError::BadReversal(e.id.clone()));
            }
            if system_fingerprint(&e.system) != system_fingerprint(&rev.system) {
                return Err(GogError::EdgeSystemMismatch(e.id.clone(), rev.id.clone()));
            }
            let (o, t) = (self.vertex_index(&e.from)?, self.vertex_index(&e.to)?);
            let (co, ct) = (&calcs[o], &calcs[t]);
            let x = self.boundary_image(e, co)?;
            let y = self.boundary_image(rev, ct)?;
            let xs: BTreeSet<usize> = x.iter().copied().collect();
            let ys: BTreeSet<usize> = y.iter().copied().collect();
            let not_parabolic = |c: &VertexCalc, s: &BTreeSet<usize>, v: &str| GogError::NotAdmissible {
                edge: e.id.clone(),
                witness: format!("image {} is not a parabolic of {v}", c.render(s)),
            };
            let mx = co.as_parabolic(&xs).ok_or_else(|| not_parabolic(co, &xs, &e.from))?;
            let my = ct.as_parabolic(&ys).ok_or_else(|| not_parabolic(ct, &ys, &e.to))?;
            let gamma: HashMap<usize, usize> = x.iter().copied().zip(y.iter().copied()).collect();
            let mut checked = 0;
            for m in 0..(1u32 << co.sets.len()) {
                let sm = co.parabolic(m);
                if !sm.is_subset(&xs) {
                    continue;
                }
                checked += 1;
                let img: BTreeSet<usize> = sm.iter().map(|g| gamma[g]).collect();
                if ct.as_parabolic(&img).is_none() {
                    return Err(GogError::NotAdmissible {
                        edge: e.id.clone(),
                        witness: format!("{}_{} = {} maps to {}, not a parabolic of {}", e.from, co.render_mask(m), co.render(&sm), ct.render(&img), e.to),
                    });
                }
            }
            lines.push(format!(
                "edge {}: {} -> {}, image {}_{} -> {}_{}, {} parabolics preserved",
                e.id,
                e.from,
                e.to,
                e.from,
                co.render_mask(mx),
                e.to,
                ct.render_mask(my),
                checked
            ));
        }
        Ok(ValidationReport { lines })
    }

    /// Pair keys (smaller id of each pair) for the tree, checked to span.
    fn tree_pairs(&self, tree: &[String]) -> Result<Vec<String>> {
        let mut pairs = BTreeSet::new();
        for id in tree {
            let e = self.edge(id)?;
            pairs.insert(e.id.clone().min(e.reverse.clone()));
        }
        let n = self.vertices.len();
        if pairs.len() + 1 != n {
            return Err(GogError::NotSpanning(format!("{} edge pairs for {} vertices", pairs.len(), n)));
        }
        let mut part = Partition::new(n);
        for key in &pairs {
            let e = self.edge(key)?;
            let (a, b) = (self.vertex_index(&e.from)?, self.vertex_index(&e.to)?);
            if part.find(a) == part.find(b) {
                return Err(GogError::NotSpanning(format!("edge {key} closes a cycle")));
            }
            part.union(a, b);
        }
        Ok(pairs.into_iter().collect())
    }

    /// Amalgamates the vertex systems along the tree (sorted pair ids), then HNN-extends along
    /// every other pair in the chosen orientation (sorted, default: the smaller edge id).
    pub fn fundamental_system(&self, tree: &[String], orientation: &[String]) -> Result<CosetIncidenceSystem> {
        self.validate()?;
        let calcs = self.calcs()?;
        let offsets: Vec<usize> = calcs.iter().scan(0, |acc, c| {
            let o = *acc;
            *acc += c.names.len();
            Some(o)
        })
        .collect();
        let global_names: Vec<String> = calcs.iter().flat_map(|c| c.names.iter().cloned()).collect();
        if let Some(dup) = global_names.iter().duplicates().next() {
            return Err(GogError::NameClash(format!("generator {dup} occurs in two vertex systems")));
        }
        let units: Vec<(usize, usize)> = calcs.iter().enumerate().flat_map(|(v, c)| (0..c.labels.len()).map(move |i| (v, i))).collect();
        if let Some(dup) = units.iter().flat_map(|&(v, i)| calcs[v].labels[i].atoms()).duplicates().next() {
            return Err(GogError::NameClash(format!("type {dup} occurs in two vertex systems")));
        }
        let unit_of = |v: usize, i: usize| units.iter().position(|&u| u == (v, i)).expect("unit exists");

        let tree_keys = self.tree_pairs(tree)?;
        let mut gen_part = Partition::new(global_names.len());
        let mut type_part = Partition::new(units.len());
        for key in &tree_keys {
            let e = self.edge(key)?;
            let rev = self.edge(&e.reverse)?;
            let (o, t) = (self.vertex_index(&e.from)?, self.vertex_index(&e.to)?);
            let x = self.boundary_image(e, &calcs[o])?;
            let y = self.boundary_image(rev, &calcs[t])?;
            for (&a, &b) in x.iter().zip(&y) {
                gen_part.union(offsets[o] + a, offsets[t] + b);
            }
            let gamma: HashMap<usize, usize> = x.iter().copied().zip(y.iter().copied()).collect();
            let xs: BTreeSet<usize> = x.iter().copied().collect();
            let ys: BTreeSet<usize> = y.iter().copied().collect();
            for i1 in (0..calcs[o].sets.len()).filter(|&c| !xs.is_subset(&calcs[o].sets[c])) {
                let img: BTreeSet<usize> = xs.intersection(&calcs[o].sets[i1]).map(|g| gamma[g]).collect();
                for i2 in (0..calcs[t].sets.len()).filter(|&c| !ys.is_subset(&calcs[t].sets[c])) {
                    if img == ys.intersection(&calcs[t].sets[i2]).copied().collect() {
                        type_part.union(unit_of(o, i1), unit_of(t, i2));
                    }
                }
            }
        }

        let gen_blocks = gen_part.blocks();
        let mut class_of = vec![0; global_names.len()];
        for (c, b) in gen_blocks.iter().enumerate() {
            for &g in b {
                class_of[g] = c;
            }
        }
        let mut names: Vec<String> = gen_blocks.iter().map(|b| global_names[b[0]].clone()).collect();
        let mut relators: Vec<Word> = calcs
            .iter()
            .enumerate()
            .flat_map(|(v, c)| c.relators.iter().map(move |r| (v, r)))
            .map(|(v, r)| r.map_generators(|g| class_of[offsets[v] + g]))
            .collect();
        let to_classes = |v: usize, set: &BTreeSet<usize>| -> BTreeSet<usize> { set.iter().map(|g| class_of[offsets[v] + g]).collect() };
        let mut types: Vec<(TypeLabel, BTreeSet<usize>)> = type_part
            .blocks()
            .into_iter()
            .map(|block| {
                let label = match block.as_slice() {
                    [u] => calcs[units[*u].0].labels[units[*u].1].clone(),
                    _ => TypeLabel::Set(block.iter().flat_map(|&u| calcs[units[u].0].labels[units[u].1].atoms()).collect()),
                };
                let gens = (0..calcs.len())
                    .flat_map(|v| {
                        let mask = block.iter().filter(|&&u| units[u].0 == v).fold(0u32, |m, &u| m | (1 << units[u].1));
                        to_classes(v, &calcs[v].parabolic(mask))
                    })
                    .collect();
                (label, gens)
            })
            .collect();

        let mut pending: Vec<String> = Vec::new();
        for e in &self.edges {
            let key = e.id.clone().min(e.reverse.clone());
            if tree_keys.contains(&key) || pending.iter().any(|p| *p == e.id || *p == e.reverse) {
                continue;
            }
            let chosen = if orientation.contains(&e.id) {
                e.id.clone()
            } else if orientation.contains(&e.reverse) {
                e.reverse.clone()
            } else {
                key
            };
            pending.push(chosen);
        }
        pending.sort();

        for id in &pending {
            let e = self.edge(id)?;
            let rev = self.edge(&e.reverse)?;
            let (o, t) = (self.vertex_index(&e.from)?, self.vertex_index(&e.to)?);
            let x: Vec<usize> = self.boundary_image(e, &calcs[o])?.into_iter().map(|g| class_of[offsets[o] + g]).collect();
            let y: Vec<usize> = self.boundary_image(rev, &calcs[t])?.into_iter().map(|g| class_of[offsets[t] + g]).collect();
            let mut gamma: BTreeMap<usize, usize> = BTreeMap::new();
            for (&a, &b) in x.iter().zip(&y) {
                if *gamma.entry(a).or_insert(b) != b {
                    return Err(GogError::NotAdmissible { edge: id.clone(), witness: format!("{} has two images", names[a]) });
                }
            }
            if gamma.values().duplicates().next().is_some() {
                return Err(GogError::NotAdmissible { edge: id.clone(), witness: "identification is not injective on generator classes".into() });
            }
            let all: BTreeSet<usize> = (0..names.len()).collect();
            let xs: BTreeSet<usize> = gamma.keys().copied().collect();
            let ys: BTreeSet<usize> = gamma.values().copied().collect();
            let parabolic = |mask: u32| meet(&all, bits(mask).map(|c| &types[c].1));
            let containing = |s: &BTreeSet<usize>| (0..types.len()).filter(|&c| s.is_subset(&types[c].1)).fold(0u32, |m, c| m | (1 << c));
            let render = |s: &BTreeSet<usize>| format!("<{}>", s.iter().map(|&g| names[g].as_str()).join(","));
            let (source, target) = (containing(&xs), containing(&ys));
            for (s, m) in [(&xs, source), (&ys, target)] {
                if parabolic(m) != *s {
                    return Err(GogError::NotAdmissible { edge: id.clone(), witness: format!("{} is not a parabolic of the amalgamated system", render(s)) });
                }
            }
            for m in 0..(1u32 << types.len()) {
                let sm = parabolic(m);
                if !sm.is_subset(&xs) {
                    continue;
                }
                let img: BTreeSet<usize> = sm.iter().map(|g| gamma[g]).collect();
                if parabolic(containing(&img)) != img {
                    return Err(GogError::NotAdmissible { edge: id.clone(), witness: format!("{} maps to {}, not a parabolic", render(&sm), render(&img)) });
                }
            }
            let rank = types.len();
            let mut part = Partition::new(rank);
            for i1 in (0..rank).filter(|i| source & (1 << i) == 0) {
                let img: BTreeSet<usize> = xs.intersection(&types[i1].1).map(|g| gamma[g]).collect();
                for i2 in (0..rank).filter(|i| target & (1 << i) == 0) {
                    if img == ys.intersection(&types[i2].1).copied().collect() {
                        part.union(i1, i2);
                    }
                }
            }
            let mut taken: BTreeSet<String> = names.iter().cloned().collect();
            taken.extend(types.iter().flat_map(|(l, _)| l.atoms()));
            let stable_name = fresh_symbol(&taken, "t");
            let stable = names.len();
            names.push(stable_name.clone());
            let stable_parabolic = parabolic(source & !target);
            let mut next: Vec<(TypeLabel, BTreeSet<usize>)> = part
                .blocks()
                .into_iter()
                .map(|block| {
                    let label = match block.as_slice() {
                        [single] => types[*single].0.clone(),
                        _ => TypeLabel::Set(block.iter().flat_map(|&i| types[i].0.atoms()).collect()),
                    };
                    let mut gens = meet(&all, block.iter().map(|&i| &types[i].1));
                    gens.insert(stable);
                    (label, gens)
                })
                .collect();
            next.push((TypeLabel::atom(&stable_name), stable_parabolic));
            types = next;
            for (&a, &b) in &gamma {
                relators.push(Word(vec![Letter::neg(stable), Letter::pos(a), Letter::pos(stable), Letter::neg(b)]));
            }
        }

        let tree_text = tree_keys.join(",");
        let name = format!("{}[{}]", self.name, tree_text);
        let pres = Presentation::from_parts(&name, names, relators).map_err(|e| GogError::NameClash(e.to_string()))?;
        let type_set = TypeSet::new(types.iter().map(|(l, _)| l.clone()).collect())?;
        let gens = types.iter().map(|(_, s)| s.iter().map(|&g| Word::gen(g)).collect()).collect();
        Ok(make_system(&name, GroupHandle::Presented(std::sync::Arc::new(pres)), type_set, gens)?)
    }
}

/// Text identifying a system up to equality of presentation, types and parabolic generators.
pub fn system_fingerprint(sys: &CosetIncidenceSystem) -> String {
    let p = sys.group.presentation();
    let mut s = canonical_text(p);
    for (label, ws) in sys.types.labels().iter().zip(&sys.parabolic_gens) {
        s.push_str(&format!("type {label} := {}\n", ws.iter().map(|w| p.render(w)).join(" ")));
    }
    s
}

/// Abelianization invariants of matched parabolics in two fundamental systems.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComparisonRow {
    pub types: String,
    pub left: Abelianization,
    pub right: Abelianization,
}

impl ComparisonReport {
    pub fn equal(&self) -> bool {
        self.rows.iter().all(|r| r.left == r.right)
    }

    pub fn first_divergence(&self) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.left != r.right)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# abelianization invariants of matched parabolics; lattice isomorphism is not decided\n");
        for r in &self.rows {
            let mark = if r.left == r.right { "equal" } else { "DIFFER" };
            s.push_str(&format!("G_{} {} | {} {mark}\n", r.types, r.left, r.right));
        }
        s.push_str(&format!("verdict {}\n", if self.equal() { "equal" } else { "unequal" }));
        if let Some(r) = self.first_divergence() {
            s.push_str(&format!("first_divergence G_{}\n", r.types));
        }
        s
    }
}

fn parabolic_abelianization(sys: &CosetIncidenceSystem, mask: u32) -> Result<Abelianization> {
    let special = sys.parabolic_special(mask);
    let Some(SpecialSubgroup::Standard(set)) = special else {
        return Err(GogError::Unsupported(sys.name.clone(), "parabolics must be generated by generators".into()));
    };
    let p = sys.group.presentation();
    Ok(abelianize(&sub_presentation(&p.generators, &p.relators, &set)))
}

/// Compares abelianizations of every parabolic `G_J`, matching types by label.
pub fn compare_fundamental(a: &CosetIncidenceSystem, b: &CosetIncidenceSystem) -> Result<ComparisonReport> {
    let la: BTreeSet<&TypeLabel> = a.types.labels().iter().collect();
    let lb: BTreeSet<&TypeLabel> = b.types.labels().iter().collect();
    if la != lb {
        return Err(GogError::TypePartitionMismatch(format!("{:?} vs {:?}", a.types.partition(), b.types.partition())));
    }
    let to_b: Vec<usize> = a.types.labels().iter().map(|l| b.types.index_of(l).expect("same labels")).collect();
    let mut rows = Vec::new();
    for mask in crate::incidence::masks_by_size(a.rank()) {
        let mb = bits(mask).fold(0u32, |m, i| m | (1 << to_b[i]));
        rows.push(ComparisonRow { types: a.types.render(mask), left: parabolic_abelianization(a, mask)?, right: parabolic_abelianization(b, mb)? });
    }
    Ok(ComparisonReport { rows })
}

/// The free-group graph of systems on a triangle, with its two-dimensional edge on A–C.
pub fn triangle_example() -> GraphOfSystems {
    use crate::fixtures::standard_system;
    let free = |name: &str, gens: [&str; 2], types: [&str; 2]| {
        let p = Presentation::new(name, &gens, vec![]).expect("valid");
        standard_system(name, &p, &types, false)
    };
    let rank_one = |name: &str, gen: &str, ty: &str| {
        let p = Presentation::new(name, &[gen], vec![]).expect("valid");
        make_system(name, GroupHandle::Presented(std::sync::Arc::new(p)), TypeSet::from_atoms(&[ty]).expect("valid"), vec![vec![]]).expect("valid")
    };
    let a = free("A", ["a1", "a2"], ["1", "2"]);
    let b = free("B", ["b3", "b4"], ["3", "4"]);
    let c = free("C", ["c5", "c6"], ["5", "6"]);
    let d = rank_one("D", "d7", "7");
    let e = free("E", ["e8", "e9"], ["8", "9"]);
    let f = rank_one("F", "f10", "10");
    let vertex = |id: &str, system: CosetIncidenceSystem| GraphVertex { id: id.into(), system };
    let edge = |id: &str, rev: &str, from: &str, to: &str, system: &CosetIncidenceSystem, images: &[usize]| GraphEdge {
        id: id.into(),
        reverse: rev.into(),
        from: from.into(),
        to: to.into(),
        system: system.clone(),
        boundary: GeneratorMap::on_generators(images.iter().map(|&g| Word::gen(g)).collect()),
    };
    GraphOfSystems {
        name: "triangle".into(),
        vertices: vec![vertex("A", a), vertex("B", b), vertex("C", c)],
        edges: vec![
            edge("e1", "e2", "A", "B", &d, &[0]),
            edge("e2", "e1", "B", "A", &d, &[1]),
            edge("e3", "e4", "C", "B", &f, &[1]),
            edge("e4", "e3", "B", "C", &f, &[0]),
            edge("e5", "e6", "C", "A", &e, &[1, 0]),
            edge("e6", "e5", "A", "C", &e, &[0, 1]),
        ],
        tree: vec!["e1".into(), "e3".into()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn partition(sys: &CosetIncidenceSystem) -> Vec<Vec<String>> {
        sys.types.partition()
    }

    fn trees() -> [Vec<String>; 3] {
        [vec!["e1".into(), "e3".into()], vec!["e1".into(), "e5".into()], vec!["e3".into(), "e5".into()]]
    }

    #[test]
    fn triangle_validates() {
        let g = triangle_example();
        let report = g.validate().unwrap();
        assert_eq!(report.lines.len(), 6);
        assert!(report.lines[0].contains("A_{2} -> B_{3}"), "{}", report.lines[0]);
    }

    #[test]
    fn first_tree_matches_hand_computation() {
        let g = triangle_example();
        let sys = g.fundamental_system(&trees()[0], &[]).unwrap();
        let labels: Vec<String> = sys.types.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, ["{1,3,4,6}", "{2,5}", "t"]);
        let p = sys.group.presentation();
        assert_eq!(p.generators, ["a1", "a2", "b3", "c5", "t"]);
        let SpecialSubgroup::Standard(stable_parabolic) = sys.parabolic_special(0b100).unwrap() else { panic!() };
        // G_t is generated by c5 and c6, and c6 was identified with b3.
        assert_eq!(stable_parabolic.iter().map(|&g| p.generators[g].as_str()).collect::<Vec<_>>(), ["b3", "c5"]);
        assert_eq!(sys.parabolic_special(0b011).unwrap(), SpecialSubgroup::Standard([4].into_iter().collect()));
        assert_eq!(abelianize(p).rank, 3);
    }

    #[test]
    fn all_trees_agree() {
        let g = triangle_example();
        let systems: Vec<CosetIncidenceSystem> = trees().iter().map(|t| g.fundamental_system(t, &[]).unwrap()).collect();
        for s in &systems {
            assert_eq!(partition(s), partition(&systems[0]));
        }
        for s in &systems[1..] {
            let report = compare_fundamental(&systems[0], s).unwrap();
            assert!(report.equal(), "{}", report.to_text());
            let ranks: Vec<usize> = report.rows.iter().map(|r| r.left.rank).collect();
            assert_eq!(ranks, [3, 2, 2, 2, 1, 1, 1, 0]);
        }
    }

    #[test]
    fn tree_only_graph_has_no_stable_letter() {
        let mut g = triangle_example();
        g.edges.retain(|e| !["e5", "e6"].contains(&e.id.as_str()));
        let sys = g.fundamental_system(&["e1".into(), "e3".into()], &[]).unwrap();
        assert!(sys.types.labels().iter().all(|l| !l.atoms().contains("t")));
        assert_eq!(abelianize(sys.group.presentation()).rank, 4);
    }

    #[test]
    fn single_vertex_loop_is_an_hnn_datum() {
        let mut g = triangle_example();
        g.vertices.truncate(1);
        let d = g.edges[0].system.clone();
        g.edges = vec![
            GraphEdge { id: "l1".into(), reverse: "l2".into(), from: "A".into(), to: "A".into(), system: d.clone(), boundary: GeneratorMap::on_generators(vec![Word::gen(0)]) },
            GraphEdge { id: "l2".into(), reverse: "l1".into(), from: "A".into(), to: "A".into(), system: d, boundary: GeneratorMap::on_generators(vec![Word::gen(1)]) },
        ];
        assert_eq!(g.validate().unwrap().lines.len(), 2);
        let sys = g.fundamental_system(&[], &[]).unwrap();
        let labels: Vec<String> = sys.types.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, ["{1,2}", "t"]);
        assert_eq!(sys.group.presentation().relators.len(), 1);
    }

    #[test]
    fn validation_errors() {
        let mut g = triangle_example();
        g.edges[1].system = g.edges[4].system.clone();
        g.edges[1].boundary = GeneratorMap::on_generators(vec![Word::gen(1), Word::gen(0)]);
        assert!(matches!(g.validate(), Err(GogError::EdgeSystemMismatch(..))));

        let mut g = triangle_example();
        g.edges[5].boundary = GeneratorMap::on_generators(vec![Word::gen(0), Word::gen(0)]);
        assert!(matches!(g.validate(), Err(GogError::BoundaryNotInjective { .. })));

        let g = triangle_example();
        assert!(matches!(g.fundamental_system(&["e1".into()], &[]), Err(GogError::NotSpanning(_))));
        assert!(matches!(g.fundamental_system(&["e1".into(), "e3".into(), "e5".into()], &[]), Err(GogError::NotSpanning(_))));
    }

    #[test]
    fn perturbed_boundary_changes_invariants() {
        let g = triangle_example();
        let reference = g.fundamental_system(&trees()[0], &[]).unwrap();
        let mut bent = triangle_example();
        // Swap the images of e8 and e9 in A, so c6 is glued to a2 instead of a1.
        bent.edges[5].boundary = GeneratorMap::on_generators(vec![Word::gen(1), Word::gen(0)]);
        let sys = bent.fundamental_system(&trees()[0], &[]).unwrap();
        let err = compare_fundamental(&reference, &sys).unwrap_err();
        assert!(matches!(err, GogError::TypePartitionMismatch(_)), "{err}");
        assert_eq!(partition(&sys), [vec!["1", "4", "5"], vec!["2", "3", "6"], vec!["t"]]);
        assert_eq!(compare_fundamental(&reference, &reference).unwrap().first_divergence(), None);
    }
}
