//! Coset incidence systems, parabolic lattices and the group-theoretic property checks.
//!
//! Finite backends are checked exhaustively. Structured backends get exact answers where the
//! special-subgroup calculus decides them, bounded evidence otherwise, and never a silent guess.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, OnceLock};

use fixedbitset::FixedBitSet;
use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::canonical::recognize_diagram;
use crate::finite::{todd_coxeter, ElementSet, FiniteGroup, DEFAULT_MAX_COSETS};
use crate::presentation::{Label, Letter, Word};
use crate::structured::{GroupHandle, IndexValue, NormalForm, ProductOracle, SpecialSubgroup, StructError, DEFAULT_BALL_CAP};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IncidenceError {
    #[error("invalid generators: {0}")]
    InvalidGenerators(String),
    #[error("invalid type set: {0}")]
    InvalidTypes(String),
    #[error(transparent)]
    Structured(#[from] StructError),
    #[error("system is not flag-transitive, so the residue is not a coset system")]
    NotFlagTransitive,
    #[error("not a flag: {0}")]
    InvalidFlag(String),
    #[error("operation needs an exact finite backend")]
    NeedsFiniteBackend,
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        (Ok(_), Err(_)) => Ordering::Less,
        (Err(_), Ok(_)) => Ordering::Greater,
        _ => a.cmp(b),
    }
}

/// A type: an atom, or a set of atoms standing for a merged class or orbit.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeLabel {
    Atom(String),
    Set(BTreeSet<String>),
}

impl TypeLabel {
    pub fn atom(s: &str) -> Self {
        TypeLabel::Atom(s.to_string())
    }

    pub fn set<I: IntoIterator<Item = S>, S: Into<String>>(atoms: I) -> Self {
        TypeLabel::Set(atoms.into_iter().map(Into::into).collect())
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix('{').and_then(|r| r.strip_suffix('}')) {
            let atoms: BTreeSet<String> = inner.split(',').map(str::trim).filter(|a| !a.is_empty()).map(String::from).collect();
            let valid = atoms.iter().all(|a| !a.contains(|c: char| c.is_whitespace() || "{}".contains(c)));
            return (!atoms.is_empty() && valid).then_some(TypeLabel::Set(atoms));
        }
        let valid = !s.is_empty() && !s.contains(|c: char| c.is_whitespace() || "{},".contains(c));
        valid.then(|| TypeLabel::Atom(s.to_string()))
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        match self {
            TypeLabel::Atom(a) => BTreeSet::from([a.clone()]),
            TypeLabel::Set(s) => s.clone(),
        }
    }

    /// Atoms in natural order (numeric atoms numerically).
    pub fn sorted_atoms(&self) -> Vec<String> {
        let mut v: Vec<String> = self.atoms().into_iter().collect();
        v.sort_by(|a, b| natural_cmp(a, b));
        v
    }
}

impl fmt::Display for TypeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeLabel::Atom(a) => write!(f, "{a}"),
            TypeLabel::Set(_) => write!(f, "{{{}}}", self.sorted_atoms().join(",")),
        }
    }
}

/// Ordered type labels; subsets are bitmasks over label positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeSet {
    labels: Vec<TypeLabel>,
}

impl TypeSet {
    pub fn new(labels: Vec<TypeLabel>) -> Result<Self, IncidenceError> {
        if labels.len() > 16 {
            return Err(IncidenceError::InvalidTypes("rank above 16 is not supported".into()));
        }
        let mut seen: BTreeSet<String> = BTreeSet::new();
        for l in &labels {
            for a in l.atoms() {
                if !seen.insert(a.clone()) {
                    return Err(IncidenceError::InvalidTypes(format!("atom `{a}` occurs in two labels")));
                }
            }
        }
        Ok(TypeSet { labels })
    }

    pub fn from_atoms(names: &[&str]) -> Result<Self, IncidenceError> {
        Self::new(names.iter().map(|n| TypeLabel::atom(n)).collect())
    }

    pub fn rank(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[TypeLabel] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &TypeLabel {
        &self.labels[i]
    }

    pub fn index_of(&self, l: &TypeLabel) -> Option<usize> {
        self.labels.iter().position(|x| x == l)
    }

    pub fn index_of_str(&self, s: &str) -> Option<usize> {
        TypeLabel::parse(s).and_then(|l| self.index_of(&l))
    }

    pub fn full(&self) -> u32 {
        ((1u64 << self.rank()) - 1) as u32
    }

    pub fn mask_of(&self, labels: &[&str]) -> Option<u32> {
        labels.iter().try_fold(0u32, |m, s| self.index_of_str(s).map(|i| m | (1 << i)))
    }

    /// `{a,b}` rendering of a subset in label order.
    pub fn render(&self, mask: u32) -> String {
        format!("{{{}}}", bits(mask).map(|i| self.labels[i].to_string()).join(","))
    }

    /// Union of the atoms of the labels in `mask`.
    pub fn flatten(&self, mask: u32) -> BTreeSet<String> {
        bits(mask).flat_map(|i| self.labels[i].atoms()).collect()
    }

    /// The partition of atoms given by the labels, each block in natural order, blocks sorted.
    pub fn partition(&self) -> Vec<Vec<String>> {
        let mut blocks: Vec<Vec<String>> = self.labels.iter().map(TypeLabel::sorted_atoms).collect();
        blocks.sort_by(|a, b| a.iter().zip(b).map(|(x, y)| natural_cmp(x, y)).find(|o| o.is_ne()).unwrap_or(a.len().cmp(&b.len())));
        blocks
    }
}

pub fn bits(mask: u32) -> impl Iterator<Item = usize> + Clone {
    (0..32).filter(move |i| mask & (1 << i) != 0)
}

/// All subsets of `0..rank`, by size then value.
pub fn masks_by_size(rank: usize) -> Vec<u32> {
    let mut v: Vec<u32> = (0..(1u32 << rank)).collect();
    v.sort_by_key(|m| (m.count_ones(), *m));
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Holds,
    Fails,
    Unknown,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Holds => "holds",
            Outcome::Fails => "fails",
            Outcome::Unknown => "unknown",
        })
    }
}

/// How a verdict was reached.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Basis {
    /// Every relevant element, coset or subset was examined.
    Exhaustive,
    /// Decided by the structured subgroup calculus.
    Exact,
    /// Bounded word evidence only.
    Bounded { radius: usize, samples: usize },
    Theorem(String),
    Unavailable(String),
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Basis::Exhaustive => write!(f, "exhaustive"),
            Basis::Exact => write!(f, "exact"),
            Basis::Bounded { radius, samples } => write!(f, "bounded radius={radius} samples={samples}"),
            Basis::Theorem(t) => write!(f, "theorem: {t}"),
            Basis::Unavailable(why) => write!(f, "unavailable: {why}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    pub basis: Basis,
    pub witness: Option<String>,
}

impl Verdict {
    pub fn holds(basis: Basis) -> Self {
        Verdict { outcome: Outcome::Holds, basis, witness: None }
    }

    pub fn fails(basis: Basis, witness: String) -> Self {
        Verdict { outcome: Outcome::Fails, basis, witness: Some(witness) }
    }

    pub fn unknown(basis: Basis) -> Self {
        Verdict { outcome: Outcome::Unknown, basis, witness: None }
    }

    pub fn is_holds(&self) -> bool {
        self.outcome == Outcome::Holds
    }

    pub fn is_fails(&self) -> bool {
        self.outcome == Outcome::Fails
    }

    fn from_theorem(c: &Certificate) -> Self {
        let basis = Basis::Theorem(c.theorem.clone());
        if c.holds {
            Verdict::holds(basis)
        } else {
            Verdict { outcome: Outcome::Fails, basis, witness: Some(format!("by {}", c.theorem)) }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    FlagTransitive,
    ResiduallyConnected,
    Firm,
    Thin,
    Thick,
    Finite,
    Hypertope,
}

/// A property stamped by a construction theorem whose hypotheses were verified.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub property: Property,
    pub holds: bool,
    pub theorem: String,
}

/// Limits for enumeration and bounded evidence.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_cosets: usize,
    pub max_word_len: usize,
    pub samples: usize,
    pub seed: u64,
    pub ball_cap: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_cosets: DEFAULT_MAX_COSETS, max_word_len: 8, samples: 2000, seed: 20250101, ball_cap: DEFAULT_BALL_CAP }
    }
}

impl Budget {
    fn bounded(&self) -> Basis {
        Basis::Bounded { radius: self.max_word_len, samples: self.samples }
    }
}

/// Equivalent formulations of flag-transitivity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FtMode {
    /// `G_J G_i = ∩_j G_j G_i`.
    Products,
    /// `G_J ∩ G_i G_k ⊆ (G_J ∩ G_i) G_k`.
    Cosets,
    /// Pairwise-incident coset families meet in a coset of `G_J`.
    Families,
    /// Pairwise-incident coset triples have a common element.
    Triples,
    /// `(G_J ∩ G_H)(G_J ∩ G_K) = G_J ∩ G_H G_K`.
    ProductOfIntersections,
    /// `G_J G_H ∩ G_J G_K = G_J (G_H ∩ G_K)`.
    IntersectionOfProducts,
}

impl FtMode {
    pub const ALL: [FtMode; 6] = [
        FtMode::Products,
        FtMode::Cosets,
        FtMode::Families,
        FtMode::Triples,
        FtMode::ProductOfIntersections,
        FtMode::IntersectionOfProducts,
    ];
}

/// Equivalent formulations of residual connectedness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RcMode {
    /// `G_J = <G_{J∪i} : i ∉ J>` when `|I∖J| >= 2`.
    Rc1,
    /// `G_J = <G_{J∪i}, G_{J∪k}>` for distinct `i, k ∉ J`.
    Rc2,
    /// `G_J = G^{I∖J}`.
    BottomUp,
    /// `G^J = G_{I∖J}`.
    UpBottom,
    /// `G^J ∩ G^K = G^{J∩K}`.
    Intersections,
    /// `G_J ⊆ <G_{K_m}>` whenever `∩ K_m ⊆ J`.
    Families,
}

impl RcMode {
    pub const ALL: [RcMode; 6] = [RcMode::Rc1, RcMode::Rc2, RcMode::BottomUp, RcMode::UpBottom, RcMode::Intersections, RcMode::Families];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Firmness {
    NotFirm,
    FirmOnly,
    Thin,
    Thick,
    Unknown,
}

impl fmt::Display for Firmness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Firmness::NotFirm => "not-firm",
            Firmness::FirmOnly => "firm",
            Firmness::Thin => "thin",
            Firmness::Thick => "thick",
            Firmness::Unknown => "unknown",
        })
    }
}

#[derive(Clone, Debug)]
enum Lattice {
    Finite { group: Arc<FiniteGroup>, sets: Vec<ElementSet> },
    Special { sets: Vec<SpecialSubgroup> },
    Opaque(String),
}

/// A group with one maximal parabolic subgroup per type.
#[derive(Clone, Debug)]
pub struct CosetIncidenceSystem {
    pub name: String,
    pub group: GroupHandle,
    pub types: TypeSet,
    pub parabolic_gens: Vec<Vec<Word>>,
    /// Structure-compatible descriptions of the maximal parabolics, when known.
    pub specials: Option<Vec<SpecialSubgroup>>,
    pub certificates: Vec<Certificate>,
    /// Theorem justifying set arithmetic on generator subsets of a presented group.
    pub standard_calculus: Option<String>,
    lattice: OnceLock<Lattice>,
}

/// Kind of diagram group a presentation was recognized as.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiagramKind {
    Coxeter,
    Artin,
    Shephard,
}

pub fn diagram_kind(p: &crate::presentation::Presentation) -> Option<DiagramKind> {
    let d = recognize_diagram(p)?;
    let loops: Vec<Label> = (0..d.vertices.len()).map(|v| d.loop_label(v)).collect();
    Some(if loops.iter().all(|&l| l == Label::Finite(2)) {
        DiagramKind::Coxeter
    } else if loops.iter().all(|&l| l == Label::Infinite) {
        DiagramKind::Artin
    } else {
        DiagramKind::Shephard
    })
}

pub fn make_system(name: &str, group: GroupHandle, types: TypeSet, parabolic_gens: Vec<Vec<Word>>) -> Result<CosetIncidenceSystem, IncidenceError> {
    if types.rank() != parabolic_gens.len() {
        return Err(IncidenceError::InvalidGenerators(format!("{} types but {} parabolics", types.rank(), parabolic_gens.len())));
    }
    let n = group.presentation().ngens();
    for (i, ws) in parabolic_gens.iter().enumerate() {
        if let Some(bad) = ws.iter().flat_map(|w| w.0.iter()).find(|l| l.index() >= n) {
            return Err(IncidenceError::InvalidGenerators(format!("type {}: generator index {} out of range", types.label(i), bad.index())));
        }
    }
    let mut sys = CosetIncidenceSystem {
        name: name.to_string(),
        group,
        types,
        parabolic_gens,
        specials: None,
        certificates: Vec::new(),
        standard_calculus: None,
        lattice: OnceLock::new(),
    };
    if let GroupHandle::Presented(p) = &sys.group {
        let single: Option<Vec<SpecialSubgroup>> = sys
            .parabolic_gens
            .iter()
            .map(|ws| ws.iter().map(|w| w.is_single_generator()).collect::<Option<BTreeSet<usize>>>().map(SpecialSubgroup::Standard))
            .collect();
        if let Some(specials) = single {
            let kind = diagram_kind(p);
            if matches!(kind, Some(DiagramKind::Coxeter) | Some(DiagramKind::Artin)) {
                let name = if kind == Some(DiagramKind::Coxeter) { "Coxeter" } else { "Artin-Tits" };
                sys.standard_calculus = Some(format!("parabolic subgroups of {name} groups intersect as their generator sets"));
                let standard = sys.rank() == n
                    && specials.iter().enumerate().all(|(i, s)| matches!(s, SpecialSubgroup::Standard(set) if set.len() == n - 1 && !set.contains(&i)));
                if standard {
                    let thm = format!("standard {name} coset geometry");
                    sys.certify(Property::FlagTransitive, true, &thm);
                    sys.certify(Property::ResiduallyConnected, true, &thm);
                    if kind == Some(DiagramKind::Coxeter) {
                        sys.certify(Property::Thin, true, &thm);
                    }
                }
            }
            sys.specials = Some(specials);
        }
    }
    Ok(sys)
}

impl CosetIncidenceSystem {
    pub fn rank(&self) -> usize {
        self.types.rank()
    }

    pub fn with_specials(mut self, specials: Vec<SpecialSubgroup>) -> Self {
        self.specials = Some(specials);
        self.lattice = OnceLock::new();
        self
    }

    pub fn certify(&mut self, property: Property, holds: bool, theorem: &str) {
        self.certificates.retain(|c| c.property != property);
        self.certificates.push(Certificate { property, holds, theorem: theorem.to_string() });
    }

    pub fn certificate(&self, property: Property) -> Option<&Certificate> {
        self.certificates.iter().find(|c| c.property == property)
    }

    fn lattice(&self) -> &Lattice {
        self.lattice.get_or_init(|| {
            let rank = self.rank();
            if let Some(g) = self.group.as_finite() {
                let maxes: Vec<ElementSet> = self.parabolic_gens.iter().map(|ws| g.subgroup_from_words(ws)).collect();
                let sets = (0..(1u32 << rank))
                    .map(|m| {
                        bits(m).fold(g.whole(), |mut acc, i| {
                            acc.intersect_with(&maxes[i]);
                            acc
                        })
                    })
                    .collect();
                return Lattice::Finite { group: g, sets };
            }
            let Some(specials) = &self.specials else {
                return Lattice::Opaque("no structured description of the parabolics".into());
            };
            let Some(whole) = self.group.whole_special() else {
                return Lattice::Opaque("group has no special-subgroup calculus".into());
            };
            let mut sets = Vec::with_capacity(1 << rank);
            for m in 0..(1u32 << rank) {
                let mut acc = whole.clone();
                for i in bits(m) {
                    match self.group.intersect(&acc, &specials[i]) {
                        Ok(s) => acc = s,
                        Err(e) => return Lattice::Opaque(e.to_string()),
                    }
                }
                sets.push(acc);
            }
            Lattice::Special { sets }
        })
    }

    /// Exact finite backend: group and `G_J` element sets by mask.
    pub fn finite_view(&self) -> Option<(&Arc<FiniteGroup>, &[ElementSet])> {
        match self.lattice() {
            Lattice::Finite { group, sets } => Some((group, sets)),
            _ => None,
        }
    }

    /// Special-subgroup description of `G_J` by mask.
    pub fn special_view(&self) -> Option<&[SpecialSubgroup]> {
        match self.lattice() {
            Lattice::Special { sets } => Some(sets),
            _ => None,
        }
    }

    /// `G_J` as a special subgroup, matching the finite or structured backend.
    pub fn parabolic_special(&self, mask: u32) -> Option<SpecialSubgroup> {
        match self.lattice() {
            Lattice::Finite { sets, .. } => Some(SpecialSubgroup::Finite(sets[mask as usize].clone())),
            Lattice::Special { sets } => Some(sets[mask as usize].clone()),
            Lattice::Opaque(_) => None,
        }
    }

    /// Generating words for `G_J`.
    pub fn parabolic_words(&self, mask: u32) -> Option<Vec<Word>> {
        match self.lattice() {
            Lattice::Finite { group, sets } => Some(group.generators_of(&sets[mask as usize]).into_iter().map(|x| group.word_of(x)).collect()),
            Lattice::Special { sets } => self.group.special_generators(&sets[mask as usize]),
            Lattice::Opaque(_) => match mask.count_ones() {
                0 => Some((0..self.group.presentation().ngens()).map(Word::gen).collect()),
                1 => Some(self.parabolic_gens[mask.trailing_zeros() as usize].clone()),
                _ => None,
            },
        }
    }

    fn opaque_reason(&self) -> String {
        match self.lattice() {
            Lattice::Opaque(why) => why.clone(),
            _ => String::new(),
        }
    }

    fn finite_ctx(&self) -> Option<FiniteCtx<'_>> {
        self.finite_view().map(|(g, sets)| FiniteCtx::new(g, sets, &self.types))
    }

    pub fn check_flag_transitive(&self, mode: FtMode, budget: &Budget) -> Verdict {
        if let Some(mut ctx) = self.finite_ctx() {
            return match mode {
                FtMode::Products => ctx.ft_products(),
                FtMode::Cosets => ctx.ft_cosets(),
                FtMode::Families => ctx.flag_families(),
                FtMode::Triples => ctx.ft_triples(),
                FtMode::ProductOfIntersections => ctx.ft_product_of_intersections(),
                FtMode::IntersectionOfProducts => ctx.ft_intersection_of_products(),
            };
        }
        let evidence = self.bounded_ft(budget);
        if evidence.is_fails() {
            return evidence;
        }
        if let Some(c) = self.certificate(Property::FlagTransitive) {
            return Verdict::from_theorem(c);
        }
        evidence
    }

    /// Search bounded evidence for a counterexample to the product condition.
    fn bounded_ft(&self, budget: &Budget) -> Verdict {
        let Some(sets) = self.special_view() else {
            return Verdict::unknown(Basis::Unavailable(self.opaque_reason()));
        };
        if !self.group.has_word_problem() || matches!(self.group, GroupHandle::SemiDirect(_)) {
            return Verdict::unknown(Basis::Unavailable("no product-membership oracle".into()));
        }
        let elements = match self.evidence(budget) {
            Ok(e) => e,
            Err(e) => return Verdict::unknown(Basis::Unavailable(e.to_string())),
        };
        let rank = self.rank();
        for j in masks_by_size(rank).into_iter().filter(|m| m.count_ones() >= 2) {
            for i in (0..rank).filter(|i| j & (1 << i) == 0) {
                let build = || -> Result<Option<String>, StructError> {
                    let whole = ProductOracle::new(&self.group, &sets[j as usize], &sets[1 << i])?;
                    let parts: Vec<ProductOracle> = bits(j).map(|k| ProductOracle::new(&self.group, &sets[1 << k], &sets[1 << i])).collect::<Result<_, _>>()?;
                    for g in &elements {
                        let mut all = true;
                        for p in &parts {
                            if !p.contains(g)? {
                                all = false;
                                break;
                            }
                        }
                        if all && !whole.contains(g)? {
                            let w = self.group.word_of(g)?;
                            return Ok(Some(format!("J={} i={} g={}", self.types.render(j), self.types.label(i), render_word(self, &w))));
                        }
                    }
                    Ok(None)
                };
                match build() {
                    Ok(Some(w)) => return Verdict::fails(budget.bounded(), w),
                    Ok(None) => {}
                    Err(e) => return Verdict::unknown(Basis::Unavailable(e.to_string())),
                }
            }
        }
        Verdict::unknown(budget.bounded())
    }

    /// The breadth-first ball (truncated at `samples` elements) plus `samples` seeded random words.
    pub fn evidence(&self, budget: &Budget) -> Result<Vec<NormalForm>, StructError> {
        let mut ball = Vec::new();
        for r in 0..=budget.max_word_len {
            match self.group.ball(r, budget.samples.max(1).min(budget.ball_cap)) {
                Ok(b) => ball = b,
                Err(StructError::BallCapExceeded(_)) => break,
                Err(e) => return Err(e),
            }
        }
        let mut seen: std::collections::HashSet<NormalForm> = ball.iter().cloned().collect();
        let n = self.group.presentation().ngens();
        let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
        if n > 0 {
            for _ in 0..budget.samples {
                let w = Word(
                    (0..budget.max_word_len)
                        .map(|_| {
                            let g = rng.gen_range(0..n);
                            if rng.gen_bool(0.5) {
                                Letter::pos(g)
                            } else {
                                Letter::neg(g)
                            }
                        })
                        .collect(),
                );
                let nf = self.group.normalize(&w)?;
                if seen.insert(nf.clone()) {
                    ball.push(nf);
                }
            }
        }
        Ok(ball)
    }

    pub fn check_residually_connected(&self, mode: RcMode, budget: &Budget) -> Verdict {
        if self.rank() <= 1 {
            return Verdict::holds(Basis::Exhaustive);
        }
        if let Some(mut ctx) = self.finite_ctx() {
            return match mode {
                RcMode::Rc1 => ctx.rc1(),
                RcMode::Rc2 => ctx.rc2(),
                RcMode::BottomUp => ctx.rc_bottom_up(),
                RcMode::UpBottom => ctx.rc_up_bottom(),
                RcMode::Intersections => ctx.rc_intersections(),
                RcMode::Families => ctx.rc_families(),
            };
        }
        let _ = budget;
        let computed = self.structured_rc1();
        if computed.outcome != Outcome::Unknown {
            return computed;
        }
        if let Some(c) = self.certificate(Property::ResiduallyConnected) {
            return Verdict::from_theorem(c);
        }
        computed
    }

    /// RC1 through the special-subgroup calculus: joins compared structurally, then by membership.
    fn structured_rc1(&self) -> Verdict {
        let Some(sets) = self.special_view() else {
            return Verdict::unknown(Basis::Unavailable(self.opaque_reason()));
        };
        let standard = sets.iter().all(|s| matches!(s, SpecialSubgroup::Standard(_)));
        let basis = if standard {
            match &self.standard_calculus {
                Some(t) => Basis::Theorem(t.clone()),
                None => return Verdict::unknown(Basis::Unavailable("generator-subset calculus not justified for this presentation".into())),
            }
        } else {
            Basis::Exact
        };
        let rank = self.rank();
        let full = self.types.full();
        for j in masks_by_size(rank) {
            if (full & !j).count_ones() < 2 {
                continue;
            }
            let mut acc: Option<SpecialSubgroup> = None;
            for i in bits(full & !j) {
                let s = &sets[(j | (1 << i)) as usize];
                acc = Some(match acc {
                    None => s.clone(),
                    Some(a) => match self.group.join(&a, s) {
                        Ok(x) => x,
                        Err(e) => return Verdict::unknown(Basis::Unavailable(e.to_string())),
                    },
                });
            }
            let joined = acc.expect("at least two summands");
            let target = &sets[j as usize];
            if &joined == target {
                continue;
            }
            if standard {
                return Verdict::fails(basis, format!("J={}: generated by {:?}, parabolic {:?}", self.types.render(j), joined, target));
            }
            if !self.group.verify_special(&joined) {
                return Verdict::unknown(Basis::Unavailable(format!("join at J={} is not special", self.types.render(j))));
            }
            let Some(gens) = self.group.special_generators(target) else {
                return Verdict::unknown(Basis::Unavailable("parabolic generators unavailable".into()));
            };
            for w in gens {
                match self.group.member_word(&joined, &w) {
                    Ok(true) => {}
                    Ok(false) => {
                        return Verdict::fails(basis, format!("J={}: {} lies in G_J but not in the generated subgroup", self.types.render(j), render_word(self, &w)))
                    }
                    Err(e) => return Verdict::unknown(Basis::Unavailable(e.to_string())),
                }
            }
        }
        Verdict::holds(basis)
    }

    /// Indices `[G^j : G_I]`, in type order.
    pub fn corank_one_indices(&self) -> Vec<IndexValue> {
        let full = self.types.full();
        (0..self.rank())
            .map(|j| {
                let minimal = full & !(1 << j);
                match self.lattice() {
                    Lattice::Finite { sets, .. } => IndexValue::Finite((sets[minimal as usize].count_ones(..) / sets[full as usize].count_ones(..)) as u64),
                    Lattice::Special { sets } => {
                        let (a, b) = (&sets[minimal as usize], &sets[full as usize]);
                        if matches!(a, SpecialSubgroup::Standard(_)) && self.standard_calculus.is_none() {
                            IndexValue::Unknown
                        } else {
                            self.group.index(a, b)
                        }
                    }
                    Lattice::Opaque(_) => IndexValue::Unknown,
                }
            })
            .collect()
    }

    pub fn check_firm_thin(&self) -> (Firmness, Verdict) {
        let idx = self.corank_one_indices();
        let exact = matches!(self.lattice(), Lattice::Finite { .. });
        let basis = if exact { Basis::Exhaustive } else { Basis::Exact };
        let known: Option<Vec<u64>> = idx
            .iter()
            .map(|v| match v {
                IndexValue::Finite(n) => Some(*n),
                IndexValue::Infinite => Some(u64::MAX),
                IndexValue::Unknown => None,
            })
            .collect();
        if let Some(vals) = known {
            let witness = |pred: &dyn Fn(u64) -> bool| {
                vals.iter().position(|&v| pred(v)).map(|j| {
                    let v = if vals[j] == u64::MAX { "inf".to_string() } else { vals[j].to_string() };
                    format!("j={} index={}", self.types.label(j), v)
                })
            };
            if let Some(w) = witness(&|v| v < 2) {
                return (Firmness::NotFirm, Verdict::fails(basis, w));
            }
            let cls = if vals.iter().all(|&v| v == 2) {
                Firmness::Thin
            } else if vals.iter().all(|&v| v >= 3) {
                Firmness::Thick
            } else {
                Firmness::FirmOnly
            };
            return (cls, Verdict::holds(basis));
        }
        for (p, cls) in [(Property::Thin, Firmness::Thin), (Property::Thick, Firmness::Thick), (Property::Firm, Firmness::FirmOnly)] {
            if let Some(c) = self.certificate(p) {
                if c.holds {
                    return (cls, Verdict::from_theorem(c));
                }
            }
        }
        if let Some(c) = self.certificate(Property::Firm).filter(|c| !c.holds) {
            return (Firmness::NotFirm, Verdict::from_theorem(c));
        }
        (Firmness::Unknown, Verdict::unknown(Basis::Unavailable("corank-one indices not computable".into())))
    }

    /// Finiteness with `[G : G_I]` when the enumeration closes.
    pub fn check_finite(&self, budget: &Budget) -> (Verdict, Option<u64>) {
        if let Lattice::Finite { group, sets } = self.lattice() {
            let idx = (group.order() / sets[self.types.full() as usize].count_ones(..)) as u64;
            return (Verdict::holds(Basis::Exhaustive), Some(idx));
        }
        let Some(borel) = self.parabolic_words(self.types.full()) else {
            return (Verdict::unknown(Basis::Unavailable("Borel generators unavailable".into())), None);
        };
        match todd_coxeter(self.group.presentation(), &borel, budget.max_cosets) {
            Ok(t) => (Verdict::holds(Basis::Exhaustive), Some(t.num_cosets as u64)),
            Err(e) => match self.certificate(Property::Finite) {
                Some(c) => (Verdict::from_theorem(c), None),
                None => (Verdict::unknown(Basis::Unavailable(e.to_string())), None),
            },
        }
    }

    /// Number of chambers: exhaustive on finite backends, `[G : G_I]` for flag-transitive finite structured systems.
    pub fn chambers(&self, budget: &Budget) -> Option<u64> {
        if let Some(mut ctx) = self.finite_ctx() {
            return Some(ctx.count_chambers());
        }
        let (fin, idx) = self.check_finite(budget);
        (fin.is_holds() && self.check_flag_transitive(FtMode::Products, budget).is_holds()).then_some(idx).flatten()
    }

    pub fn is_flag_complex(&self, budget: &Budget) -> Verdict {
        if let Some(mut ctx) = self.finite_ctx() {
            return ctx.flag_families();
        }
        let ft = self.check_flag_transitive(FtMode::Products, budget);
        match ft.outcome {
            Outcome::Unknown => ft,
            _ => Verdict { basis: Basis::Theorem("the coset complex is a flag complex exactly when the action is flag-transitive".into()), ..ft },
        }
    }

    pub fn is_regular_hypertope(&self, budget: &Budget) -> Verdict {
        let ft = self.check_flag_transitive(FtMode::Products, budget);
        let rc = self.check_residually_connected(RcMode::Rc1, budget);
        let (cls, firm) = self.check_firm_thin();
        if ft.is_fails() {
            return Verdict::fails(ft.basis, format!("ft: {}", ft.witness.unwrap_or_default()));
        }
        if rc.is_fails() {
            return Verdict::fails(rc.basis, format!("rc: {}", rc.witness.unwrap_or_default()));
        }
        if firm.outcome != Outcome::Unknown && cls != Firmness::Thin {
            return Verdict::fails(firm.basis, format!("firmness={cls}"));
        }
        if ft.is_holds() && rc.is_holds() && cls == Firmness::Thin {
            let all_exhaustive = [&ft.basis, &rc.basis, &firm.basis].iter().all(|b| matches!(b, Basis::Exhaustive));
            return Verdict::holds(if all_exhaustive { Basis::Exhaustive } else { Basis::Exact });
        }
        if let Some(c) = self.certificate(Property::Hypertope) {
            return Verdict::from_theorem(c);
        }
        Verdict::unknown(Basis::Unavailable("some component verdict is unknown".into()))
    }

    /// Residue of a flag given as (type index, coset index) pairs, as a coset system on `G_J`.
    pub fn residue(&self, flag: &[(usize, usize)]) -> Result<CosetIncidenceSystem, IncidenceError> {
        let Some(mut ctx) = self.finite_ctx() else { return Err(IncidenceError::NeedsFiniteBackend) };
        let mut mask = 0u32;
        for &(t, c) in flag {
            if t >= self.rank() || mask & (1 << t) != 0 {
                return Err(IncidenceError::InvalidFlag(format!("type index {t} repeated or out of range")));
            }
            if c >= ctx.cosets(1 << t).sets.len() {
                return Err(IncidenceError::InvalidFlag(format!("coset {c} of type {} does not exist", self.types.label(t))));
            }
            mask |= 1 << t;
        }
        for (&(t, c), &(u, d)) in flag.iter().tuple_combinations() {
            let a = ctx.cosets(1 << t).sets[c].clone();
            if a.is_disjoint(&ctx.cosets(1 << u).sets[d]) {
                return Err(IncidenceError::InvalidFlag(format!("elements of types {} and {} are not incident", self.types.label(t), self.types.label(u))));
            }
        }
        if !ctx.ft_products().is_holds() {
            return Err(IncidenceError::NotFlagTransitive);
        }
        let (g, sets) = self.finite_view().unwrap();
        let sub = &sets[mask as usize];
        let gens = g.generators_of(sub);
        let names: Vec<String> = (1..=gens.len()).map(|k| format!("r{k}")).collect();
        let h = FiniteGroup::from_subgroup(g, sub, &gens, names);
        let elems: Vec<usize> = sub.ones().collect();
        let local = |set: &ElementSet| -> Vec<Word> {
            let mut s = h.empty_set();
            for (k, e) in elems.iter().enumerate() {
                if set.contains(*e) {
                    s.insert(k);
                }
            }
            h.generators_of(&s).into_iter().map(|x| h.word_of(x)).collect()
        };
        let rest: Vec<usize> = (0..self.rank()).filter(|i| mask & (1 << i) == 0).collect();
        let types = TypeSet::new(rest.iter().map(|&i| self.types.label(i).clone()).collect())?;
        let pgens = rest.iter().map(|&i| local(&sets[(mask | (1 << i)) as usize])).collect();
        make_system(&format!("{}/{}", self.name, self.types.render(mask)), GroupHandle::finite(h), types, pgens)
    }

    /// Incidence graph: complete for finite backends, a ball of cosets otherwise.
    pub fn incidence_graph(&self, limit: usize, budget: &Budget) -> Result<IncidenceGraph, IncidenceError> {
        if let Some(mut ctx) = self.finite_ctx() {
            return Ok(ctx.incidence_graph(self));
        }
        let sets = self.special_view().ok_or(IncidenceError::Structured(StructError::Mismatch))?;
        let ball = self.group.ball(limit, budget.ball_cap)?;
        let rank = self.rank();
        let mut nodes = Vec::new();
        let mut node_of: Vec<Vec<usize>> = vec![Vec::new(); ball.len()];
        let mut reps: Vec<Vec<(usize, NormalForm)>> = vec![Vec::new(); rank];
        for (gi, g) in ball.iter().enumerate() {
            let g_inv = self.group.inverse(g)?;
            for t in 0..rank {
                let mut found = None;
                for (c, (_, r)) in reps[t].iter().enumerate() {
                    if self.group.member(&sets[1 << t], &self.group.mul(&g_inv, r)?)? {
                        found = Some(c);
                        break;
                    }
                }
                let c = match found {
                    Some(c) => c,
                    None => {
                        reps[t].push((gi, g.clone()));
                        reps[t].len() - 1
                    }
                };
                node_of[gi].push(c);
            }
        }
        for (t, rs) in reps.iter().enumerate() {
            for (c, (_, g)) in rs.iter().enumerate() {
                nodes.push(Node { type_index: t, coset: c, representative: render_word(self, &self.group.word_of(g)?) });
            }
        }
        let offset: Vec<usize> = reps.iter().scan(0, |acc, r| {
            let o = *acc;
            *acc += r.len();
            Some(o)
        }).collect();
        let mut edges = BTreeSet::new();
        for (t, u) in (0..rank).tuple_combinations() {
            let oracle = ProductOracle::new(&self.group, &sets[1 << t], &sets[1 << u])?;
            for (c, (_, x)) in reps[t].iter().enumerate() {
                let x_inv = self.group.inverse(x)?;
                for (d, (_, y)) in reps[u].iter().enumerate() {
                    if oracle.contains(&self.group.mul(&x_inv, y)?)? {
                        edges.insert((offset[t] + c, offset[u] + d));
                    }
                }
            }
        }
        let facets = node_of.iter().map(|cs| cs.iter().enumerate().map(|(t, &c)| offset[t] + c).collect::<Vec<_>>()).collect::<BTreeSet<_>>();
        Ok(IncidenceGraph { name: self.name.clone(), type_labels: self.types.labels().iter().map(|l| l.to_string()).collect(), nodes, edges: edges.into_iter().collect(), facets: facets.into_iter().collect(), complete: false })
    }
}

/// Render a word over the system's group, `1` for the identity.
pub fn render_word(sys: &CosetIncidenceSystem, w: &Word) -> String {
    if w.is_empty() {
        "1".into()
    } else {
        sys.group.presentation().render(w)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub type_index: usize,
    pub coset: usize,
    pub representative: String,
}

/// Typed incidence graph plus the maximal simplices of the coset complex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IncidenceGraph {
    pub name: String,
    pub type_labels: Vec<String>,
    pub nodes: Vec<Node>,
    pub edges: Vec<(usize, usize)>,
    /// Node-index sets `{g G_i : i}` for group elements `g` seen.
    pub facets: Vec<Vec<usize>>,
    pub complete: bool,
}

impl IncidenceGraph {
    fn node_id(&self, n: usize) -> String {
        format!("t{}_c{}", self.nodes[n].type_index, self.nodes[n].coset)
    }

    pub fn degree(&self, n: usize) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == n || b == n).count()
    }

    pub fn to_dot(&self) -> String {
        let mut s = format!("graph \"{}\" {{\n", self.name.replace('"', "'"));
        for (k, n) in self.nodes.iter().enumerate() {
            s.push_str(&format!("  {} [type=\"{}\", label=\"{}\"];\n", self.node_id(k), self.type_labels[n.type_index], n.representative));
        }
        for &(a, b) in &self.edges {
            s.push_str(&format!("  {} -- {};\n", self.node_id(a), self.node_id(b)));
        }
        s.push_str("}\n");
        s
    }

    /// One facet per line, node ids in sorted order, lines sorted.
    pub fn facets_text(&self) -> String {
        let mut lines: Vec<String> = self
            .facets
            .iter()
            .map(|f| {
                let mut ids: Vec<String> = f.iter().map(|&n| self.node_id(n)).collect();
                ids.sort();
                ids.join(" ")
            })
            .collect();
        lines.sort();
        lines.dedup();
        lines.into_iter().map(|l| l + "\n").collect()
    }

    /// Whether the graph has a cycle (union-find over edges).
    pub fn has_cycle(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.nodes.len()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra == rb {
                return true;
            }
            parent[ra] = rb;
        }
        false
    }
}

/// Left cosets of one subgroup: element -> coset id, and element sets per coset.
struct Cosets {
    ids: Vec<u32>,
    sets: Vec<ElementSet>,
    reps: Vec<u32>,
}

struct FiniteCtx<'a> {
    g: &'a FiniteGroup,
    sets: &'a [ElementSet],
    types: &'a TypeSet,
    rank: usize,
    products: HashMap<(u32, u32), ElementSet>,
    cosets: HashMap<u32, Cosets>,
    up: Option<Vec<ElementSet>>,
}

impl<'a> FiniteCtx<'a> {
    fn new(g: &'a FiniteGroup, sets: &'a [ElementSet], types: &'a TypeSet) -> Self {
        FiniteCtx { g, sets, types, rank: types.rank(), products: HashMap::new(), cosets: HashMap::new(), up: None }
    }

    fn full(&self) -> u32 {
        self.types.full()
    }

    fn set(&self, m: u32) -> &ElementSet {
        &self.sets[m as usize]
    }

    fn product(&mut self, a: u32, b: u32) -> ElementSet {
        if let Some(p) = self.products.get(&(a, b)) {
            return p.clone();
        }
        let p = self.g.product(&self.sets[a as usize], &self.sets[b as usize]);
        self.products.insert((a, b), p.clone());
        p
    }

    fn cosets(&mut self, m: u32) -> &Cosets {
        let g = self.g;
        let h = &self.sets[m as usize];
        self.cosets.entry(m).or_insert_with(|| {
            let (ids, n) = g.left_coset_ids(h);
            let mut sets = vec![g.empty_set(); n];
            let mut reps = vec![u32::MAX; n];
            for (x, &c) in ids.iter().enumerate() {
                sets[c as usize].insert(x);
                if reps[c as usize] == u32::MAX {
                    reps[c as usize] = x as u32;
                }
            }
            Cosets { ids, sets, reps }
        })
    }

    fn elem(&self, x: u32) -> String {
        let w = self.g.word_of(x);
        if w.is_empty() {
            "1".into()
        } else {
            self.g.presentation.render(&w)
        }
    }

    fn coset_name(&mut self, t: usize, c: usize) -> String {
        let rep = self.cosets(1 << t).reps[c];
        let label = self.types.label(t).to_string();
        if rep == 0 {
            format!("G{label}")
        } else {
            format!("{} G{label}", self.elem(rep))
        }
    }

    fn ft_products(&mut self) -> Verdict {
        for j in masks_by_size(self.rank) {
            if j.count_ones() < 2 {
                continue;
            }
            for i in (0..self.rank).filter(|i| j & (1 << i) == 0) {
                let lhs = self.product(j, 1 << i);
                let mut rhs = self.g.whole();
                for k in bits(j) {
                    rhs.intersect_with(&self.product(1 << k, 1 << i));
                }
                if lhs != rhs {
                    return Verdict::fails(Basis::Exhaustive, format!("J={} i={}", self.types.render(j), self.types.label(i)));
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn ft_cosets(&mut self) -> Verdict {
        for j in masks_by_size(self.rank) {
            for (i, k) in (0..self.rank).cartesian_product(0..self.rank) {
                if i == k || j & ((1 << i) | (1 << k)) != 0 {
                    continue;
                }
                let mut lhs = self.product(1 << i, 1 << k);
                lhs.intersect_with(self.set(j));
                let rhs = self.product(j | (1 << i), 1 << k);
                if let Some(g) = lhs.difference(&rhs).next() {
                    return Verdict::fails(
                        Basis::Exhaustive,
                        format!("J={} i={} k={} g={}", self.types.render(j), self.types.label(i), self.types.label(k), self.elem(g as u32)),
                    );
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    /// Depth-first search over pairwise-incident coset tuples of the given types.
    /// `visit` sees the chosen coset ids and their common intersection; returning true stops.
    fn search(&mut self, types: &[usize], fix_first: bool, visit: &mut dyn FnMut(&[usize], &ElementSet) -> bool) -> bool {
        for &t in types {
            self.cosets(1 << t);
        }
        let cos: Vec<&Cosets> = types.iter().map(|&t| &self.cosets[&(1 << t)]).collect();
        let n = self.g.order();
        let mut chosen: Vec<usize> = Vec::new();
        let mut inter: Vec<ElementSet> = vec![self.g.whole()];
        fn rec(
            level: usize,
            cos: &[&Cosets],
            fix_first: bool,
            n: usize,
            chosen: &mut Vec<usize>,
            inter: &mut Vec<ElementSet>,
            visit: &mut dyn FnMut(&[usize], &ElementSet) -> bool,
        ) -> bool {
            if level == cos.len() {
                return visit(chosen, inter.last().unwrap());
            }
            let here = cos[level];
            let mut cand = FixedBitSet::with_capacity(here.sets.len());
            if level == 0 {
                if fix_first {
                    cand.insert(0);
                } else {
                    cand.insert_range(..);
                }
            } else {
                cand.insert_range(..);
                for (l, &c) in chosen.iter().enumerate() {
                    let mut meets = FixedBitSet::with_capacity(here.sets.len());
                    for x in cos[l].sets[c].ones() {
                        meets.insert(here.ids[x] as usize);
                    }
                    cand.intersect_with(&meets);
                }
            }
            let _ = n;
            for c in cand.ones() {
                let mut next = inter.last().unwrap().clone();
                next.intersect_with(&here.sets[c]);
                chosen.push(c);
                inter.push(next);
                let stop = rec(level + 1, cos, fix_first, n, chosen, inter, visit);
                chosen.pop();
                inter.pop();
                if stop {
                    return true;
                }
            }
            false
        }
        rec(0, &cos, fix_first, n, &mut chosen, &mut inter, visit)
    }

    /// Every pairwise-incident family has a common element (the flag-complex condition).
    fn flag_families(&mut self) -> Verdict {
        for j in masks_by_size(self.rank) {
            if j.count_ones() < 3 {
                continue;
            }
            let types: Vec<usize> = bits(j).collect();
            let mut found: Option<Vec<usize>> = None;
            self.search(&types, true, &mut |cs, inter| {
                if inter.count_ones(..) == 0 {
                    found = Some(cs.to_vec());
                    true
                } else {
                    false
                }
            });
            if let Some(cs) = found {
                let names: Vec<String> = types.iter().zip(&cs).map(|(&t, &c)| self.coset_name(t, c)).collect();
                return Verdict::fails(Basis::Exhaustive, format!("{{{}}}", names.join(", ")));
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn count_chambers(&mut self) -> u64 {
        let types: Vec<usize> = (0..self.rank).collect();
        let mut count = 0u64;
        self.search(&types, false, &mut |_, _| {
            count += 1;
            false
        });
        count
    }

    fn ft_triples(&mut self) -> Verdict {
        let nonempty: Vec<u32> = masks_by_size(self.rank).into_iter().filter(|&m| m != 0).collect();
        for &j in &nonempty {
            for (hi, &h) in nonempty.iter().enumerate() {
                for &k in &nonempty[hi..] {
                    let gj = self.set(j).clone();
                    let hits = |ctx: &mut Self, m: u32| -> Vec<usize> {
                        let c = ctx.cosets(m);
                        gj.ones().map(|x| c.ids[x] as usize).collect::<BTreeSet<_>>().into_iter().collect()
                    };
                    let hs = hits(self, h);
                    let ks = hits(self, k);
                    let hsets: Vec<ElementSet> = hs.iter().map(|&c| self.cosets(h).sets[c].clone()).collect();
                    let ksets: Vec<ElementSet> = ks.iter().map(|&c| self.cosets(k).sets[c].clone()).collect();
                    for (a, ha) in hs.iter().zip(&hsets) {
                        for (b, kb) in ks.iter().zip(&ksets) {
                            if ha.is_disjoint(kb) {
                                continue;
                            }
                            let mut t = gj.clone();
                            t.intersect_with(ha);
                            t.intersect_with(kb);
                            if t.count_ones(..) == 0 {
                                let (ra, rb) = (self.cosets(h).reps[*a], self.cosets(k).reps[*b]);
                                return Verdict::fails(
                                    Basis::Exhaustive,
                                    format!("J={} H={} K={} g={} h={}", self.types.render(j), self.types.render(h), self.types.render(k), self.elem(ra), self.elem(rb)),
                                );
                            }
                        }
                    }
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn ft_product_of_intersections(&mut self) -> Verdict {
        let all = masks_by_size(self.rank);
        for &j in &all {
            for (hi, &h) in all.iter().enumerate() {
                for &k in &all[hi..] {
                    let lhs = self.product(j | h, j | k);
                    let mut rhs = self.product(h, k);
                    rhs.intersect_with(self.set(j));
                    let rev = self.product(j | k, j | h);
                    let mut rhs2 = self.product(k, h);
                    rhs2.intersect_with(self.set(j));
                    if lhs != rhs || rev != rhs2 {
                        return Verdict::fails(Basis::Exhaustive, format!("J={} H={} K={}", self.types.render(j), self.types.render(h), self.types.render(k)));
                    }
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn ft_intersection_of_products(&mut self) -> Verdict {
        let all = masks_by_size(self.rank);
        for &j in &all {
            for (hi, &h) in all.iter().enumerate() {
                for &k in &all[hi..] {
                    let mut lhs = self.product(j, h);
                    lhs.intersect_with(&self.product(j, k));
                    let rhs = self.product(j, h | k);
                    if lhs != rhs {
                        return Verdict::fails(Basis::Exhaustive, format!("J={} H={} K={}", self.types.render(j), self.types.render(h), self.types.render(k)));
                    }
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn join(&self, masks: impl IntoIterator<Item = u32>) -> ElementSet {
        let gens: Vec<u32> = masks.into_iter().flat_map(|m| self.sets[m as usize].ones().map(|x| x as u32).collect::<Vec<_>>()).collect();
        self.g.closure_of_set(&gens)
    }

    /// `G^J = <G_I, G^j : j in J>` by mask.
    fn up(&mut self) -> &[ElementSet] {
        if self.up.is_none() {
            let full = self.full();
            let v = (0..(1u32 << self.rank)).map(|m| self.join(std::iter::once(full).chain(bits(m).map(|j| full & !(1 << j))))).collect();
            self.up = Some(v);
        }
        self.up.as_ref().unwrap()
    }

    fn order_note(&self, a: &ElementSet, b: &ElementSet) -> String {
        format!("orders {} vs {}", a.count_ones(..), b.count_ones(..))
    }

    fn rc1(&mut self) -> Verdict {
        let full = self.full();
        for j in masks_by_size(self.rank) {
            if (full & !j).count_ones() < 2 {
                continue;
            }
            let gen = self.join(bits(full & !j).map(|i| j | (1 << i)));
            if &gen != self.set(j) {
                return Verdict::fails(Basis::Exhaustive, format!("J={}: <G_(J+i)> {}", self.types.render(j), self.order_note(&gen, self.set(j))));
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn rc2(&mut self) -> Verdict {
        let full = self.full();
        for j in masks_by_size(self.rank) {
            for (i, k) in bits(full & !j).tuple_combinations() {
                let gen = self.join([j | (1 << i), j | (1 << k)]);
                if &gen != self.set(j) {
                    return Verdict::fails(
                        Basis::Exhaustive,
                        format!("J={} i={} k={}: {}", self.types.render(j), self.types.label(i), self.types.label(k), self.order_note(&gen, self.set(j))),
                    );
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn rc_bottom_up(&mut self) -> Verdict {
        let full = self.full();
        for j in masks_by_size(self.rank) {
            let up = self.up()[(full & !j) as usize].clone();
            if &up != self.set(j) {
                return Verdict::fails(Basis::Exhaustive, format!("J={}: G^(I-J) {}", self.types.render(j), self.order_note(&up, self.set(j))));
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn rc_up_bottom(&mut self) -> Verdict {
        let full = self.full();
        for j in masks_by_size(self.rank) {
            let up = self.up()[j as usize].clone();
            let low = self.set(full & !j);
            if &up != low {
                return Verdict::fails(Basis::Exhaustive, format!("J={}: G^J {}", self.types.render(j), self.order_note(&up, low)));
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn rc_intersections(&mut self) -> Verdict {
        let all = masks_by_size(self.rank);
        let up = self.up().to_vec();
        for &j in &all {
            for &k in &all {
                let mut lhs = up[j as usize].clone();
                lhs.intersect_with(&up[k as usize]);
                if lhs != up[(j & k) as usize] {
                    return Verdict::fails(Basis::Exhaustive, format!("J={} K={}: {}", self.types.render(j), self.types.render(k), self.order_note(&lhs, &up[(j & k) as usize])));
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    /// Families of at most `|I∖J|` pairwise incomparable subsets suffice: any admissible family
    /// contains such a subfamily with a smaller join.
    fn rc_families(&mut self) -> Verdict {
        let full = self.full();
        let all = masks_by_size(self.rank);
        for j in all.iter().copied() {
            let co = (full & !j).count_ones() as usize;
            if co < 2 {
                continue;
            }
            let pool: Vec<u32> = all.iter().copied().filter(|&k| k & !j != 0).collect();
            for size in 1..=co {
                for fam in pool.iter().copied().combinations(size) {
                    if fam.iter().fold(full, |acc, &k| acc & k) & !j != 0 {
                        continue;
                    }
                    if fam.iter().tuple_combinations().any(|(&a, &b)| a & b == a || a & b == b) {
                        continue;
                    }
                    let gen = self.join(fam.iter().copied());
                    if !self.set(j).is_subset(&gen) {
                        let f = fam.iter().map(|&k| self.types.render(k)).join(",");
                        return Verdict::fails(Basis::Exhaustive, format!("J={} family=[{}]", self.types.render(j), f));
                    }
                }
            }
        }
        Verdict::holds(Basis::Exhaustive)
    }

    fn incidence_graph(&mut self, sys: &CosetIncidenceSystem) -> IncidenceGraph {
        let mut nodes = Vec::new();
        let mut offset = Vec::new();
        for t in 0..self.rank {
            offset.push(nodes.len());
            let reps = self.cosets(1 << t).reps.clone();
            for (c, r) in reps.into_iter().enumerate() {
                nodes.push(Node { type_index: t, coset: c, representative: self.elem(r) });
            }
        }
        let mut edges = Vec::new();
        for (t, u) in (0..self.rank).tuple_combinations() {
            self.cosets(1 << u);
            let ct = &self.cosets[&(1 << t)];
            let cu = &self.cosets[&(1 << u)];
            for (c, s) in ct.sets.iter().enumerate() {
                let meets: BTreeSet<usize> = s.ones().map(|x| cu.ids[x] as usize).collect();
                for d in meets {
                    edges.push((offset[t] + c, offset[u] + d));
                }
            }
        }
        edges.sort();
        let mut facets: BTreeSet<Vec<usize>> = BTreeSet::new();
        for t in 0..self.rank {
            self.cosets(1 << t);
        }
        for x in 0..self.g.order() {
            facets.insert((0..self.rank).map(|t| offset[t] + self.cosets[&(1 << t)].ids[x] as usize).collect());
        }
        IncidenceGraph {
            name: sys.name.clone(),
            type_labels: sys.types.labels().iter().map(|l| l.to_string()).collect(),
            nodes,
            edges,
            facets: facets.into_iter().collect(),
            complete: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::{parse_diagram, parse_presentation, shephard_presentation};

    fn finite_system(pres: &str, types: &[&str], gens: &[&[&str]]) -> CosetIncidenceSystem {
        let p = parse_presentation(pres).unwrap();
        let g = FiniteGroup::from_presentation(&p, 100_000).unwrap();
        let pg = gens.iter().map(|ws| ws.iter().map(|w| p.word(w).unwrap()).collect()).collect();
        make_system("test", GroupHandle::finite(g), TypeSet::from_atoms(types).unwrap(), pg).unwrap()
    }

    fn ngon(n: usize) -> CosetIncidenceSystem {
        finite_system(&format!("gens a1 a2\nrel a1^2\nrel a2^2\nrel (a1 a2)^{n}"), &["1", "2"], &[&["a2"], &["a1"]])
    }

    fn klein(gens: &[&[&str]], types: &[&str]) -> CosetIncidenceSystem {
        finite_system("gens x y\nrel x^2\nrel y^2\nrel x y x^-1 y^-1", types, gens)
    }

    #[test]
    fn type_labels_round_trip() {
        let l = TypeLabel::parse("{6,1,4,3}").unwrap();
        assert_eq!(l.to_string(), "{1,3,4,6}");
        assert_eq!(TypeLabel::parse("t"), Some(TypeLabel::atom("t")));
        assert!(TypeLabel::parse("{}").is_none());
        assert!(TypeSet::new(vec![TypeLabel::atom("1"), TypeLabel::set(["1", "2"])]).is_err());
    }

    #[test]
    fn polygon_properties() {
        let b = Budget::default();
        for n in 3..=8 {
            let s = ngon(n);
            for m in FtMode::ALL {
                assert!(s.check_flag_transitive(m, &b).is_holds(), "{m:?}");
            }
            for m in RcMode::ALL {
                assert!(s.check_residually_connected(m, &b).is_holds(), "{m:?}");
            }
            assert_eq!(s.check_firm_thin().0, Firmness::Thin);
            assert_eq!(s.chambers(&b), Some(2 * n as u64));
            let g = s.incidence_graph(0, &b).unwrap();
            assert_eq!(g.nodes.len(), 2 * n);
            assert_eq!(g.edges.len(), 2 * n);
            assert!((0..g.nodes.len()).all(|k| g.degree(k) == 2));
        }
    }

    #[test]
    fn klein_failures() {
        let b = Budget::default();
        let s = klein(&[&["x"], &["y"], &["x y"]], &["1", "2", "3"]);
        let v = s.check_flag_transitive(FtMode::Products, &b);
        assert_eq!(v.witness.as_deref(), Some("J={1,2} i=3"));
        let fc = s.is_flag_complex(&b);
        assert_eq!(fc.witness.as_deref(), Some("{G1, G2, x G3}"));
        let s2 = klein(&[&["x"], &["x"]], &["1", "2"]);
        let rc = s2.check_residually_connected(RcMode::Rc1, &b);
        assert!(rc.is_fails());
        assert!(rc.witness.unwrap().starts_with("J={}"));
    }

    #[test]
    fn a3_standard_system() {
        let d = parse_diagram("vertex a1\nvertex a2\nvertex a3\nedge a1 a2 3\nedge a2 a3 3\n").unwrap();
        let p = shephard_presentation(&d);
        let s = finite_system(&p.to_text(), &["1", "2", "3"], &[&["a2", "a3"], &["a1", "a3"], &["a1", "a2"]]);
        let b = Budget::default();
        assert!(s.check_flag_transitive(FtMode::Products, &b).is_holds());
        assert!(s.is_flag_complex(&b).is_holds());
        assert_eq!(s.chambers(&b), Some(24));
        let g = s.incidence_graph(0, &b).unwrap();
        assert_eq!(g.nodes.len(), 14);
        assert_eq!(g.facets.len(), 24);
        // residue of a vertex: rank-2 triangle system on S3
        let r = s.residue(&[(0, 0)]).unwrap();
        assert_eq!(r.rank(), 2);
        assert_eq!(r.finite_view().unwrap().0.order(), 6);
        assert_eq!(r.check_firm_thin().0, Firmness::Thin);
        assert_eq!(s.residue(&[(0, 0), (1, 0), (2, 0)]).unwrap().rank(), 0);
    }

    #[test]
    fn thick_rank_two_in_s4() {
        let d = parse_diagram("vertex a1\nvertex a2\nvertex a3\nedge a1 a2 3\nedge a2 a3 3\n").unwrap();
        let p = shephard_presentation(&d);
        let s = finite_system(&p.to_text(), &["1", "2"], &[&["a2", "a3"], &["a1", "a2"]]);
        assert_eq!(s.corank_one_indices(), vec![IndexValue::Finite(3), IndexValue::Finite(3)]);
        assert_eq!(s.check_firm_thin().0, Firmness::Thick);
    }

    #[test]
    fn rank_one_conventions() {
        let s = finite_system("gens a\nrel a^2", &["1"], &[&["a"]]);
        let b = Budget::default();
        assert!(s.check_residually_connected(RcMode::Rc1, &b).is_holds());
        assert_eq!(s.check_firm_thin().0, Firmness::NotFirm);
    }

    #[test]
    fn standard_artin_system_is_certified() {
        let d = parse_diagram("vertex a order inf\nvertex b order inf\nvertex c order inf\nedge a b 3\nedge b c 3\n").unwrap();
        let p = shephard_presentation(&d);
        let w = |s: &str| p.word(s).unwrap();
        let s = make_system("braid", GroupHandle::Presented(Arc::new(p.clone())), TypeSet::from_atoms(&["1", "2", "3"]).unwrap(), vec![vec![w("b"), w("c")], vec![w("a"), w("c")], vec![w("a"), w("b")]]).unwrap();
        let b = Budget { max_cosets: 2000, ..Budget::default() };
        assert!(s.check_flag_transitive(FtMode::Products, &b).is_holds());
        assert!(s.check_residually_connected(RcMode::Rc1, &b).is_holds());
        assert_eq!(s.check_firm_thin().0, Firmness::Unknown);
        assert_eq!(s.check_finite(&b).0.outcome, Outcome::Unknown);
    }
}
