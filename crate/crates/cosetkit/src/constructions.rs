//! Free products, amalgams, HNN-extensions, semidirect products and twisting of coset
//! incidence systems.
//!
//! Every precondition is verified on finite data before a system is built. Properties the
//! construction theorems guarantee are stamped as certificates, never as computed verdicts.

use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;
use thiserror::Error;

use crate::canonical::{canonical_text, recognize_diagram};
use crate::finite::{extend_homomorphism, ElementSet, FiniteGroup};
use crate::incidence::{
    bits, make_system, masks_by_size, Budget, CosetIncidenceSystem, Firmness, FtMode, IncidenceError, Outcome, Property, RcMode, TypeLabel,
    TypeSet,
};
use crate::presentation::{tietze_eliminate, GeneratorMap, LabeledDiagram, Presentation, Word};
use crate::structured::{AmalgamGroup, FreeProductGroup, GroupHandle, HnnGroup, IndexValue, SemiDirectGroup, SpecialSubgroup, StructError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConstructionError {
    #[error("type clash: {0}")]
    TypeClash(String),
    #[error("not a homomorphism: {0}")]
    NotHomomorphism(String),
    #[error("not bijective: {0}")]
    NotBijective(String),
    #[error("restriction fails at J={j}: {witness}")]
    RestrictionFailure { j: String, witness: String },
    #[error("not lattice preserving: {0}")]
    NotLatticePreserving(String),
    #[error("not an automorphism: {0}")]
    NotAutomorphism(String),
    #[error("action does not permute the maximal parabolics: {0}")]
    NotParabolicPermuting(String),
    #[error("relator {0} of the acting group does not act trivially")]
    RelatorActionMismatch(String),
    #[error("no type orbit has more than one element")]
    NoBigOrbit,
    #[error("more than one type orbit has more than one element: {0}")]
    MultipleBigOrbits(String),
    #[error("base point {0} is not in the non-trivial orbit")]
    BasePointNotInL(String),
    #[error("IPO fails for M={m}, N={n}: {witness}")]
    IpoFailure { m: String, n: String, witness: String },
    #[error("parabolic {0} is not a special subgroup")]
    NotSpecial(String),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Incidence(#[from] IncidenceError),
    #[error(transparent)]
    Structured(#[from] StructError),
}

type Result<T> = std::result::Result<T, ConstructionError>;

/// The group of a system as seen by its parabolic lattice: finite groups get the finite handle.
fn handle_for(sys: &CosetIncidenceSystem) -> GroupHandle {
    match (&sys.group, sys.finite_view()) {
        (GroupHandle::Finite(_), _) | (_, None) => sys.group.clone(),
        (_, Some((g, _))) => GroupHandle::Finite(g.clone()),
    }
}

fn finite_backend(sys: &CosetIncidenceSystem) -> Result<(Arc<FiniteGroup>, Vec<ElementSet>)> {
    sys.finite_view()
        .map(|(g, sets)| (g.clone(), sets.to_vec()))
        .ok_or(ConstructionError::Incidence(IncidenceError::NeedsFiniteBackend))
}

fn special(sys: &CosetIncidenceSystem, mask: u32) -> Result<SpecialSubgroup> {
    sys.parabolic_special(mask)
        .ok_or_else(|| ConstructionError::Unsupported(format!("system `{}` has no structured parabolics", sys.name)))
}

fn whole(handle: &GroupHandle) -> Result<SpecialSubgroup> {
    handle.whole_special().ok_or_else(|| ConstructionError::Unsupported(format!("group of kind {} has no subgroup calculus", handle.variant_name())))
}

fn type_set(labels: Vec<TypeLabel>) -> Result<TypeSet> {
    TypeSet::new(labels).map_err(|e| ConstructionError::TypeClash(e.to_string()))
}

fn parabolic_gens(group: &GroupHandle, specials: &[SpecialSubgroup]) -> Result<Vec<Vec<Word>>> {
    specials
        .iter()
        .map(|s| group.special_generators(s).ok_or_else(|| ConstructionError::Unsupported("special subgroup has no generators".into())))
        .collect()
}

/// Outcome of a property on an input system, computed with default limits.
fn status(sys: &CosetIncidenceSystem, p: Property) -> Outcome {
    let b = Budget::default();
    let firmness = |want: &dyn Fn(Firmness) -> bool| match sys.check_firm_thin().0 {
        Firmness::Unknown => Outcome::Unknown,
        f if want(f) => Outcome::Holds,
        _ => Outcome::Fails,
    };
    match p {
        Property::FlagTransitive => sys.check_flag_transitive(FtMode::Products, &b).outcome,
        Property::ResiduallyConnected => sys.check_residually_connected(RcMode::Rc1, &b).outcome,
        Property::Firm => firmness(&|f| matches!(f, Firmness::FirmOnly | Firmness::Thin | Firmness::Thick)),
        Property::Thin => firmness(&|f| f == Firmness::Thin),
        Property::Thick => firmness(&|f| f == Firmness::Thick),
        Property::Finite => sys.check_finite(&b).0.outcome,
        Property::Hypertope => sys.is_regular_hypertope(&b).outcome,
    }
}

/// `Some(true)` if both hold, `Some(false)` if either fails, otherwise `None`.
fn iff_both(a: Outcome, b: Outcome) -> Option<bool> {
    match (a, b) {
        (Outcome::Holds, Outcome::Holds) => Some(true),
        (Outcome::Fails, _) | (_, Outcome::Fails) => Some(false),
        _ => None,
    }
}

fn if_both(a: Outcome, b: Outcome) -> Option<bool> {
    (a == Outcome::Holds && b == Outcome::Holds).then_some(true)
}

fn stamp(sys: &mut CosetIncidenceSystem, p: Property, verdict: Option<bool>, theorem: &str) {
    if let Some(holds) = verdict {
        sys.certify(p, holds, theorem);
    }
}

fn both_status(a: &CosetIncidenceSystem, b: &CosetIncidenceSystem, p: Property) -> (Outcome, Outcome) {
    (status(a, p), status(b, p))
}

/// Minimal union-find over type indices.
pub(crate) struct Partition {
    parent: Vec<usize>,
}

impl Partition {
    pub(crate) fn new(n: usize) -> Self {
        Partition { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, x: usize) -> usize {
        let p = self.parent[x];
        if p == x {
            return x;
        }
        let r = self.find(p);
        self.parent[x] = r;
        r
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    /// Blocks with sorted members, ordered by smallest member.
    pub(crate) fn blocks(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let roots: Vec<usize> = (0..n).map(|x| self.find(x)).collect();
        (0..n).filter(|&r| roots[r] == r).map(|r| (0..n).filter(|&x| roots[x] == r).collect()).collect()
    }
}

fn mask_of(indices: &[usize]) -> u32 {
    indices.iter().fold(0, |m, &i| m | (1 << i))
}

/// The label of a merged block of types.
fn merged_label(types: &TypeSet, block: &[usize]) -> TypeLabel {
    if let [single] = block {
        return types.label(*single).clone();
    }
    TypeLabel::Set(block.iter().flat_map(|&i| types.label(i).atoms()).collect())
}

fn image_set(map: &[u32], set: &ElementSet, order: usize) -> ElementSet {
    let mut out = ElementSet::with_capacity(order);
    for x in set.ones() {
        out.insert(map[x] as usize);
    }
    out
}

fn render_mask(types: &TypeSet, mask: u32) -> String {
    types.render(mask)
}

/// A verified isomorphism `A_J -> A_K` (or `C -> D` across two groups) given on words.
fn verified_isomorphism(
    src_group: &FiniteGroup,
    src_set: &ElementSet,
    tgt_group: &FiniteGroup,
    tgt_set: &ElementSet,
    phi: &GeneratorMap,
) -> Result<Vec<u32>> {
    if phi.source.len() != phi.images.len() {
        return Err(ConstructionError::NotHomomorphism("source and image lists differ in length".into()));
    }
    let src: Vec<u32> = phi.source.iter().map(|w| src_group.eval(w)).collect();
    let img: Vec<u32> = phi.images.iter().map(|w| tgt_group.eval(w)).collect();
    if &src_group.closure(&src) != src_set {
        return Err(ConstructionError::NotBijective("source words do not generate the domain parabolic".into()));
    }
    if &tgt_group.closure(&img) != tgt_set {
        return Err(ConstructionError::NotBijective("image words do not generate the target parabolic".into()));
    }
    let forward = extend_homomorphism(src_group, &src, tgt_group, &img).ok_or_else(|| ConstructionError::NotHomomorphism("relations of the domain are not respected".into()))?;
    let backward =
        extend_homomorphism(tgt_group, &img, src_group, &src).ok_or_else(|| ConstructionError::NotHomomorphism("relations of the target are not respected".into()))?;
    if src_set.count_ones(..) != tgt_set.count_ones(..) || src_set.ones().any(|x| backward[forward[x] as usize] != x as u32) {
        return Err(ConstructionError::NotBijective("the map does not invert".into()));
    }
    Ok(forward)
}

// ---------------------------------------------------------------------------------------
// Free product

pub fn free_product_system(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem) -> Result<CosetIncidenceSystem> {
    let types = type_set(alpha.types.labels().iter().chain(beta.types.labels()).cloned().collect())?;
    let left = handle_for(alpha);
    let right = handle_for(beta);
    let group = GroupHandle::FreeProduct(Arc::new(FreeProductGroup::new(left.clone(), right.clone())?));
    let (whole_a, whole_b) = (whole(&left)?, whole(&right)?);
    let mut specials = Vec::new();
    for i in 0..alpha.rank() {
        specials.push(SpecialSubgroup::Free(Box::new(special(alpha, 1 << i)?), Box::new(whole_b.clone())));
    }
    for j in 0..beta.rank() {
        specials.push(SpecialSubgroup::Free(Box::new(whole_a.clone()), Box::new(special(beta, 1 << j)?)));
    }
    let gens = parabolic_gens(&group, &specials)?;
    let mut sys = make_system(&format!("{}*{}", alpha.name, beta.name), group, types, gens)?.with_specials(specials);

    let (ft_a, ft_b) = both_status(alpha, beta, Property::FlagTransitive);
    let trivial_borels = {
        let a = special(alpha, alpha.types.full())?;
        let b = special(beta, beta.types.full())?;
        left.is_trivial(&a) && right.is_trivial(&b)
    };
    let ft = if trivial_borels { iff_both(ft_a, ft_b) } else { if_both(ft_a, ft_b) };
    stamp(&mut sys, Property::FlagTransitive, ft, "free product preserves flag-transitivity");
    if ft == Some(true) {
        let (a, b) = both_status(alpha, beta, Property::ResiduallyConnected);
        stamp(&mut sys, Property::ResiduallyConnected, iff_both(a, b), "free product is residually connected iff both factors are");
        let (a, b) = both_status(alpha, beta, Property::Firm);
        stamp(&mut sys, Property::Firm, iff_both(a, b), "free product is firm iff both factors are");
    }
    let (a, b) = both_status(alpha, beta, Property::Hypertope);
    stamp(&mut sys, Property::Hypertope, iff_both(a, b), "free product is a regular hypertope iff both factors are");
    // With a and b outside the Borels, the powers (a b)^k lie in distinct cosets of the Borel.
    let proper = |h: &GroupHandle, whole: &SpecialSubgroup, sys: &CosetIncidenceSystem| -> Result<bool> {
        let borel = special(sys, sys.types.full())?;
        Ok(match h.index(whole, &borel) {
            IndexValue::Finite(n) => n > 1,
            IndexValue::Infinite => true,
            IndexValue::Unknown => false,
        })
    };
    if proper(&left, &whole_a, alpha)? && proper(&right, &whole_b, beta)? {
        sys.certify(Property::Finite, false, "free product of systems with proper Borels has infinitely many chambers");
    }
    Ok(sys)
}

// ---------------------------------------------------------------------------------------
// Amalgamated product

/// Verified data for amalgamating two systems over their shared types.
#[derive(Clone, Debug)]
pub struct CompatibilityCertificate {
    /// Shared types `L`.
    pub shared: Vec<TypeLabel>,
    /// Isomorphism from `C = A_{I_α∖L}` onto `D = B_{I_β∖L}`, on generating words of `C`.
    pub phi: GeneratorMap,
    /// Mask of `I_α∖L` among the types of α.
    pub alpha_only: u32,
    /// Mask of `I_β∖L` among the types of β.
    pub beta_only: u32,
    /// For each `J ⊆ L`: rendered `J` and the common order of the matched parabolics.
    pub restrictions: Vec<(String, usize)>,
}

pub fn check_compatible(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, shared: &[TypeLabel], phi: &GeneratorMap) -> Result<CompatibilityCertificate> {
    let (ga, sets_a) = finite_backend(alpha)?;
    let (gb, sets_b) = finite_backend(beta)?;
    let actual: BTreeSet<&TypeLabel> = alpha.types.labels().iter().filter(|l| beta.types.index_of(l).is_some()).collect();
    let given: BTreeSet<&TypeLabel> = shared.iter().collect();
    if actual != given {
        return Err(ConstructionError::TypeClash(format!(
            "shared types must be exactly [{}], got [{}]",
            actual.iter().join(", "),
            given.iter().join(", ")
        )));
    }
    // (index in α, index in β) for each shared type
    let pairs: Vec<(usize, usize)> = shared.iter().map(|l| (alpha.types.index_of(l).unwrap(), beta.types.index_of(l).unwrap())).collect();
    let l_a = pairs.iter().fold(0u32, |m, p| m | (1 << p.0));
    let l_b = pairs.iter().fold(0u32, |m, p| m | (1 << p.1));
    let alpha_only = alpha.types.full() & !l_a;
    let beta_only = beta.types.full() & !l_b;
    let forward = verified_isomorphism(&ga, &sets_a[alpha_only as usize], &gb, &sets_b[beta_only as usize], phi)?;

    let subsets: Vec<(u32, u32, u32)> = masks_by_size(pairs.len())
        .into_iter()
        .map(|sub| {
            let (ja, jb) = bits(sub).fold((0u32, 0u32), |(x, y), k| (x | (1 << pairs[k].0), y | (1 << pairs[k].1)));
            (ja, alpha.types.full() & !(l_a & !ja), beta.types.full() & !(l_b & !jb))
        })
        .collect();
    // Orders first: a mismatch rules out any isomorphism, not only this map.
    for &(ja, ma, mb) in &subsets {
        let (oa, ob) = (sets_a[ma as usize].count_ones(..), sets_b[mb as usize].count_ones(..));
        if oa != ob {
            return Err(ConstructionError::RestrictionFailure {
                j: render_mask(&alpha.types, ja),
                witness: format!("|A_{}| = {} ≠ {} = |B_{}|", render_mask(&alpha.types, ma), oa, ob, render_mask(&beta.types, mb)),
            });
        }
    }
    let mut restrictions = Vec::new();
    for &(ja, ma, mb) in &subsets {
        let img = image_set(&forward, &sets_a[ma as usize], gb.order());
        if img != sets_b[mb as usize] {
            return Err(ConstructionError::RestrictionFailure {
                j: render_mask(&alpha.types, ja),
                witness: format!("phi(A_{}) ≠ B_{}", render_mask(&alpha.types, ma), render_mask(&beta.types, mb)),
            });
        }
        restrictions.push((render_mask(&alpha.types, ja), img.count_ones(..)));
    }
    Ok(CompatibilityCertificate { shared: shared.to_vec(), phi: phi.clone(), alpha_only, beta_only, restrictions })
}

pub fn amalgam_system(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, cert: &CompatibilityCertificate) -> Result<CosetIncidenceSystem> {
    let (ga, sets_a) = finite_backend(alpha)?;
    let (gb, sets_b) = finite_backend(beta)?;
    let amalgam = AmalgamGroup::new(ga.clone(), gb.clone(), cert.phi.source.clone(), cert.phi.images.clone()).map_err(ConstructionError::NotHomomorphism)?;
    let group = GroupHandle::Amalgam(Arc::new(amalgam));
    let mut labels: Vec<TypeLabel> = alpha.types.labels().to_vec();
    labels.extend(beta.types.labels().iter().filter(|l| alpha.types.index_of(l).is_none()).cloned());
    let types = type_set(labels)?;
    let mut specials = Vec::new();
    for l in types.labels() {
        let left = alpha.types.index_of(l).map_or_else(|| ga.whole(), |i| sets_a[1 << i].clone());
        let right = beta.types.index_of(l).map_or_else(|| gb.whole(), |i| sets_b[1 << i].clone());
        let s = SpecialSubgroup::Amalgam { left, right };
        if !group.verify_special(&s) {
            return Err(ConstructionError::NotSpecial(l.to_string()));
        }
        specials.push(s);
    }
    let gens = parabolic_gens(&group, &specials)?;
    let mut sys = make_system(&format!("{}*_L{}", alpha.name, beta.name), group, types, gens)?.with_specials(specials);

    let (ft_a, ft_b) = both_status(alpha, beta, Property::FlagTransitive);
    let ft = iff_both(ft_a, ft_b);
    stamp(&mut sys, Property::FlagTransitive, ft, "amalgamated product is flag-transitive iff both factors are");
    if ft == Some(true) {
        for (p, thm) in [
            (Property::ResiduallyConnected, "amalgamated product is residually connected iff both factors are"),
            (Property::Firm, "amalgamated product is firm iff both factors are"),
            (Property::Thin, "amalgamated product is thin iff both factors are"),
            (Property::Thick, "amalgamated product is thick iff both factors are"),
        ] {
            let (a, b) = both_status(alpha, beta, p);
            stamp(&mut sys, p, iff_both(a, b), thm);
        }
    }
    Ok(sys)
}

// ---------------------------------------------------------------------------------------
// HNN-extension

/// Verified data for an HNN-extension of a system along an isomorphism of parabolics.
#[derive(Clone, Debug)]
pub struct HnnTypeClasses {
    /// Types `J` with `C = A_J`.
    pub source: u32,
    /// Types `K` with `D = A_K`.
    pub target: u32,
    pub phi: GeneratorMap,
    /// Classes of the closed relation, members sorted, ordered by smallest member.
    pub classes: Vec<Vec<usize>>,
    /// `F = J∖K`; the stable type gets `G_t = A_F`.
    pub stable_parabolic: u32,
    pub stable: String,
}

/// First of `base`, `base1`, `base2`, ... not used as a generator or type name.
pub fn fresh_symbol(taken: &BTreeSet<String>, base: &str) -> String {
    std::iter::once(base.to_string()).chain((1..).map(|k| format!("{base}{k}"))).find(|s| !taken.contains(s)).expect("unbounded")
}

fn taken_names(sys: &CosetIncidenceSystem) -> BTreeSet<String> {
    let mut taken: BTreeSet<String> = sys.group.presentation().generators.iter().cloned().collect();
    taken.extend(sys.types.labels().iter().flat_map(TypeLabel::atoms));
    taken
}

pub fn check_hnn_admissible(alpha: &CosetIncidenceSystem, source: u32, target: u32, phi: &GeneratorMap) -> Result<HnnTypeClasses> {
    let (g, sets) = finite_backend(alpha)?;
    let forward = verified_isomorphism(&g, &sets[source as usize], &g, &sets[target as usize], phi)?;
    let rank = alpha.rank();
    let contained = |small: &ElementSet, big: &ElementSet| small.is_subset(big);
    for m in masks_by_size(rank) {
        let set = &sets[m as usize];
        if !contained(set, &sets[source as usize]) {
            continue;
        }
        let img = image_set(&forward, set, g.order());
        let found = (0..(1u32 << rank)).any(|n| sets[n as usize] == img && contained(&sets[n as usize], &sets[target as usize]));
        if !found {
            return Err(ConstructionError::NotLatticePreserving(format!(
                "phi(A_{}) is not a standard parabolic inside A_{}",
                render_mask(&alpha.types, m),
                render_mask(&alpha.types, target)
            )));
        }
    }
    let mut part = Partition::new(rank);
    for i1 in (0..rank).filter(|i| source & (1 << i) == 0) {
        let img = image_set(&forward, &sets[(source | (1 << i1)) as usize], g.order());
        for i2 in (0..rank).filter(|i| target & (1 << i) == 0) {
            if img == sets[(target | (1 << i2)) as usize] {
                part.union(i1, i2);
            }
        }
    }
    Ok(HnnTypeClasses {
        source,
        target,
        phi: phi.clone(),
        classes: part.blocks(),
        stable_parabolic: source & !target,
        stable: fresh_symbol(&taken_names(alpha), "t"),
    })
}

pub fn hnn_system(alpha: &CosetIncidenceSystem, classes: &HnnTypeClasses) -> Result<CosetIncidenceSystem> {
    let (g, sets) = finite_backend(alpha)?;
    let hnn = HnnGroup::new(g, classes.phi.source.clone(), classes.phi.images.clone(), &classes.stable).map_err(ConstructionError::NotHomomorphism)?;
    let group = GroupHandle::Hnn(Arc::new(hnn));
    let mut labels: Vec<TypeLabel> = classes.classes.iter().map(|b| merged_label(&alpha.types, b)).collect();
    labels.push(TypeLabel::atom(&classes.stable));
    let types = type_set(labels)?;
    let mut specials: Vec<SpecialSubgroup> =
        classes.classes.iter().map(|b| SpecialSubgroup::Hnn { base: sets[mask_of(b) as usize].clone(), stable: true }).collect();
    specials.push(SpecialSubgroup::Hnn { base: sets[classes.stable_parabolic as usize].clone(), stable: false });
    for (i, s) in specials.iter().enumerate() {
        if !group.verify_special(s) {
            return Err(ConstructionError::NotSpecial(types.label(i).to_string()));
        }
    }
    let gens = parabolic_gens(&group, &specials)?;
    let mut sys = make_system(&format!("{}*phi", alpha.name), group, types, gens)?.with_specials(specials);
    if status(alpha, Property::FlagTransitive) == Outcome::Holds {
        sys.certify(Property::FlagTransitive, true, "HNN-extension along an admissible isomorphism preserves flag-transitivity");
        if status(alpha, Property::ResiduallyConnected) == Outcome::Holds {
            sys.certify(Property::ResiduallyConnected, true, "HNN-extension inherits residual connectedness");
        }
        if status(alpha, Property::Firm) == Outcome::Holds {
            sys.certify(Property::Firm, true, "HNN-extension inherits firmness");
        }
    }
    Ok(sys)
}

// ---------------------------------------------------------------------------------------
// Actions, semidirect products and twisting

/// A verified action of β's group on α's group by parabolic-permuting automorphisms.
#[derive(Clone, Debug)]
pub struct ActionData {
    /// Automorphism of α's group for each generator of β's group.
    pub action: Vec<GeneratorMap>,
    /// Induced permutation of α's types, per generator of β's group.
    pub type_perms: Vec<Vec<usize>>,
    /// Orbits of α's types, members sorted, ordered by smallest member.
    pub orbits: Vec<Vec<usize>>,
}

impl ActionData {
    fn orbit_labels(&self, alpha: &CosetIncidenceSystem) -> Vec<TypeLabel> {
        self.orbits.iter().map(|o| merged_label(&alpha.types, o)).collect()
    }
}

fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        inv[j] = i;
    }
    inv
}

/// Permutation of a word in the acting group: letters applied right to left.
fn word_perm(perms: &[Vec<usize>], w: &Word, n: usize) -> Vec<usize> {
    let mut cur: Vec<usize> = (0..n).collect();
    for l in w.0.iter().rev() {
        let p = if l.inv { invert_perm(&perms[l.index()]) } else { perms[l.index()].clone() };
        cur = cur.iter().map(|&x| p[x]).collect();
    }
    cur
}

fn assign_types(rank: usize, name: &str, matches: impl Fn(usize, usize) -> bool, types: &TypeSet) -> Result<Vec<usize>> {
    let mut perm = Vec::with_capacity(rank);
    let mut used = vec![false; rank];
    for i in 0..rank {
        let j = (0..rank)
            .find(|&j| !used[j] && matches(i, j))
            .ok_or_else(|| ConstructionError::NotParabolicPermuting(format!("{name} maps the parabolic of type {} to no maximal parabolic", types.label(i))))?;
        used[j] = true;
        perm.push(j);
    }
    Ok(perm)
}

pub fn check_action_admissible(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, action: &[GeneratorMap]) -> Result<ActionData> {
    let bp = beta.group.presentation();
    let ap = alpha.group.presentation();
    if action.len() != bp.ngens() {
        return Err(ConstructionError::NotAutomorphism(format!("expected {} maps, got {}", bp.ngens(), action.len())));
    }
    for (b, map) in action.iter().enumerate() {
        if !map.is_generator_map() || map.images.len() != ap.ngens() {
            return Err(ConstructionError::NotAutomorphism(format!("map for {} must give one image per generator", bp.generators[b])));
        }
    }
    let rank = alpha.rank();
    let type_perms: Vec<Vec<usize>> = if let Some((g, sets)) = alpha.finite_view() {
        let gens: Vec<u32> = (0..g.ngens()).map(|i| g.generator(i)).collect();
        let mut autos = Vec::new();
        for (b, map) in action.iter().enumerate() {
            let name = &bp.generators[b];
            let imgs: Vec<u32> = map.images.iter().map(|w| g.eval(w)).collect();
            let aut = extend_homomorphism(g, &gens, g, &imgs).ok_or_else(|| ConstructionError::NotAutomorphism(format!("{name} does not respect the relations")))?;
            if aut.iter().collect::<BTreeSet<_>>().len() != g.order() {
                return Err(ConstructionError::NotAutomorphism(format!("{name} is not bijective")));
            }
            autos.push(aut);
        }
        for r in &bp.relators {
            for &x in &gens {
                let mut y = x;
                for l in r.0.iter().rev() {
                    let aut = &autos[l.index()];
                    y = if l.inv { aut.iter().position(|&v| v == y).unwrap() as u32 } else { aut[y as usize] };
                }
                if y != x {
                    return Err(ConstructionError::RelatorActionMismatch(bp.render(r)));
                }
            }
        }
        let mut perms = Vec::new();
        for (b, aut) in autos.iter().enumerate() {
            let images: Vec<ElementSet> = (0..rank).map(|i| image_set(aut, &sets[1 << i], g.order())).collect();
            perms.push(assign_types(rank, &bp.generators[b], |i, j| images[i] == sets[1 << j], &alpha.types)?);
        }
        perms
    } else if let Some(specials) = alpha.special_view() {
        let standard: Option<Vec<&BTreeSet<usize>>> = (0..rank)
            .map(|i| match &specials[1 << i] {
                SpecialSubgroup::Standard(s) => Some(s),
                _ => None,
            })
            .collect();
        let standard = standard.ok_or_else(|| ConstructionError::Unsupported("action on a structured group".into()))?;
        let mut gen_perms = Vec::new();
        let mut perms = Vec::new();
        for (b, map) in action.iter().enumerate() {
            let name = &bp.generators[b];
            let gp: Option<Vec<usize>> = map.images.iter().map(|w| w.is_single_generator()).collect();
            let gp = gp
                .filter(|p| p.iter().collect::<BTreeSet<_>>().len() == p.len())
                .ok_or_else(|| ConstructionError::NotAutomorphism(format!("{name} must permute the generators of a presented group")))?;
            let mapped = Presentation { relators: ap.relators.iter().map(|r| map.apply(r)).collect(), ..ap.clone() };
            if canonical_text(&mapped) != canonical_text(ap) {
                return Err(ConstructionError::NotAutomorphism(format!("{name} does not preserve the relators")));
            }
            let moved: Vec<BTreeSet<usize>> = standard.iter().map(|s| s.iter().map(|&x| gp[x]).collect()).collect();
            perms.push(assign_types(rank, name, |i, j| &moved[i] == standard[j], &alpha.types)?);
            gen_perms.push(gp);
        }
        for r in &bp.relators {
            let total = word_perm(&gen_perms, r, ap.ngens());
            if total.iter().enumerate().any(|(i, &j)| i != j) {
                return Err(ConstructionError::RelatorActionMismatch(bp.render(r)));
            }
        }
        perms
    } else {
        return Err(ConstructionError::Unsupported("the acted-on system has no parabolic lattice".into()));
    };
    let mut part = Partition::new(rank);
    for p in &type_perms {
        for (i, &j) in p.iter().enumerate() {
            part.union(i, j);
        }
    }
    Ok(ActionData { action: action.to_vec(), type_perms, orbits: part.blocks() })
}

fn semidirect_group(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, data: &ActionData) -> Result<(GroupHandle, GroupHandle, GroupHandle)> {
    let base = handle_for(alpha);
    let actor = handle_for(beta);
    let group = GroupHandle::SemiDirect(Arc::new(SemiDirectGroup::new(base.clone(), actor.clone(), data.action.clone())?));
    Ok((group, base, actor))
}

pub fn semidirect_system(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, data: &ActionData) -> Result<CosetIncidenceSystem> {
    let (group, base, actor) = semidirect_group(alpha, beta, data)?;
    let mut labels: Vec<TypeLabel> = beta.types.labels().to_vec();
    labels.extend(data.orbit_labels(alpha));
    let types = type_set(labels)?;
    let mut specials = Vec::new();
    for i in 0..beta.rank() {
        specials.push(SpecialSubgroup::Pair(Box::new(whole(&base)?), Box::new(special(beta, 1 << i)?)));
    }
    for o in &data.orbits {
        specials.push(SpecialSubgroup::Pair(Box::new(special(alpha, mask_of(o))?), Box::new(whole(&actor)?)));
    }
    let gens = parabolic_gens(&group, &specials)?;
    let mut sys = make_system(&format!("{}x|{}", alpha.name, beta.name), group, types, gens)?.with_specials(specials);
    let (a, b) = both_status(alpha, beta, Property::FlagTransitive);
    if if_both(a, b) == Some(true) {
        sys.certify(Property::FlagTransitive, true, "semidirect product preserves flag-transitivity");
        let (a, b) = both_status(alpha, beta, Property::ResiduallyConnected);
        stamp(&mut sys, Property::ResiduallyConnected, if_both(a, b), "semidirect product preserves residual connectedness");
    }
    Ok(sys)
}

/// Verified twisting data: the unique non-trivial type orbit and its orbit table.
#[derive(Clone, Debug)]
pub struct TwistCertificate {
    pub action: ActionData,
    /// Index in `action.orbits` of the orbit `L`.
    pub big_orbit: usize,
    /// α type index of `F₀`.
    pub base_point: usize,
    /// `O_J` by β type mask: orbit of `F₀` under `B_{I_β∖J}`.
    pub lower: Vec<BTreeSet<usize>>,
    /// `O^J = O_{I_β∖J}`: orbit of `F₀` under `B_J`.
    pub upper: Vec<BTreeSet<usize>>,
    /// Number of `(M, N)` pairs verified.
    pub pairs_checked: usize,
}

impl TwistCertificate {
    pub fn orbit(&self) -> &[usize] {
        &self.action.orbits[self.big_orbit]
    }
}

pub fn check_twist_admissible(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, action: &[GeneratorMap], base_point: &str) -> Result<TwistCertificate> {
    let data = check_action_admissible(alpha, beta, action)?;
    let big: Vec<usize> = (0..data.orbits.len()).filter(|&k| data.orbits[k].len() > 1).collect();
    let big_orbit = match big.as_slice() {
        [] => return Err(ConstructionError::NoBigOrbit),
        [k] => *k,
        _ => return Err(ConstructionError::MultipleBigOrbits(big.iter().map(|&k| merged_label(&alpha.types, &data.orbits[k]).to_string()).join(", "))),
    };
    let f0 = alpha.types.index_of_str(base_point).filter(|i| data.orbits[big_orbit].contains(i)).ok_or_else(|| ConstructionError::BasePointNotInL(base_point.to_string()))?;
    let (gb, sets_b) = finite_backend(beta)?;
    let rank = alpha.rank();
    let element_perm: Vec<Vec<usize>> = (0..gb.order() as u32).map(|x| word_perm(&data.type_perms, &gb.word_of(x), rank)).collect();
    let full = beta.types.full();
    let upper: Vec<BTreeSet<usize>> = (0..=full).map(|m| sets_b[m as usize].ones().map(|x| element_perm[x][f0]).collect()).collect();
    let lower: Vec<BTreeSet<usize>> = (0..=full).map(|m| upper[(full & !m) as usize].clone()).collect();
    let render = |s: &BTreeSet<usize>| format!("{{{}}}", s.iter().map(|&i| alpha.types.label(i).to_string()).join(","));
    let mut pairs_checked = 0;
    for m in 0..=full {
        for n in 0..=full {
            let meet: BTreeSet<usize> = lower[m as usize].intersection(&lower[n as usize]).copied().collect();
            if meet != lower[(m & n) as usize] {
                return Err(ConstructionError::IpoFailure {
                    m: beta.types.render(m),
                    n: beta.types.render(n),
                    witness: format!("O_M ∩ O_N = {} but O_(M∩N) = {}", render(&meet), render(&lower[(m & n) as usize])),
                });
            }
            let up: BTreeSet<usize> = upper[m as usize].intersection(&upper[n as usize]).copied().collect();
            if up != upper[(m | n) as usize] {
                return Err(ConstructionError::IpoFailure {
                    m: beta.types.render(m),
                    n: beta.types.render(n),
                    witness: format!("O^M ∩ O^N = {} but O^(M∪N) = {}", render(&up), render(&upper[(m | n) as usize])),
                });
            }
            pairs_checked += 1;
        }
    }
    Ok(TwistCertificate { action: data, big_orbit, base_point: f0, lower, upper, pairs_checked })
}

pub fn twist_system(alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem, cert: &TwistCertificate) -> Result<CosetIncidenceSystem> {
    let data = &cert.action;
    let (group, _, actor) = semidirect_group(alpha, beta, data)?;
    let mut labels: Vec<TypeLabel> = beta.types.labels().to_vec();
    labels.extend(data.orbit_labels(alpha));
    let types = type_set(labels)?;
    let orbit = mask_of(cert.orbit());
    let mut specials = Vec::new();
    for i in 0..beta.rank() {
        let a_mask = orbit & !mask_of(&cert.upper[1 << i].iter().copied().collect::<Vec<_>>());
        specials.push(SpecialSubgroup::Pair(Box::new(special(alpha, a_mask)?), Box::new(special(beta, 1 << i)?)));
    }
    for o in &data.orbits {
        specials.push(SpecialSubgroup::Pair(Box::new(special(alpha, mask_of(o))?), Box::new(whole(&actor)?)));
    }
    let gens = parabolic_gens(&group, &specials)?;
    let mut sys = make_system(&format!("T({},{})", alpha.name, beta.name), group, types, gens)?.with_specials(specials);
    let (a, b) = both_status(alpha, beta, Property::FlagTransitive);
    if if_both(a, b) == Some(true) {
        sys.certify(Property::FlagTransitive, true, "twisting preserves flag-transitivity");
        let (a, b) = both_status(alpha, beta, Property::Finite);
        stamp(&mut sys, Property::Finite, iff_both(a, b), "twisting is finite iff both inputs are");
        for (p, thm) in [
            (Property::ResiduallyConnected, "twisting preserves residual connectedness"),
            (Property::Firm, "twisting preserves firmness"),
            (Property::Thin, "twisting preserves thinness"),
            (Property::Hypertope, "twisting of regular hypertopes is a regular hypertope"),
        ] {
            let (a, b) = both_status(alpha, beta, p);
            stamp(&mut sys, p, if_both(a, b), thm);
        }
    }
    Ok(sys)
}

/// Eliminates base generators that an actor generator conjugates onto another base generator
/// (`y = b x b^-1`), in generator order, and recognizes the result as a diagram group if possible.
pub fn conjugate_elimination(sd: &SemiDirectGroup) -> (Presentation, Option<LabeledDiagram>) {
    let mut p = sd.presentation.clone();
    let mut gone: BTreeSet<String> = BTreeSet::new();
    for (b, map) in sd.action.iter().enumerate() {
        for x in 0..sd.split {
            let Some(y) = map.images[x].is_single_generator() else { continue };
            let (xn, yn) = (&sd.presentation.generators[x], &sd.presentation.generators[y]);
            if y == x || gone.contains(xn) || gone.contains(yn) {
                continue;
            }
            let idx = |name: &str, p: &Presentation| p.gen_index(name).expect("not yet eliminated");
            let bw = Word::gen(idx(&sd.presentation.generators[sd.split + b], &p));
            let replacement = Word::join(&[&bw, &Word::gen(idx(xn, &p)), &bw.inverse()]);
            if let Ok(q) = tietze_eliminate(&p, idx(yn, &p), &replacement) {
                p = q;
                gone.insert(yn.clone());
            }
        }
    }
    let d = recognize_diagram(&p);
    (p, d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::*;
    use crate::incidence::Basis;
    use crate::presentation::Label;

    fn budget(radius: usize) -> Budget {
        Budget { max_word_len: radius, samples: 300, ..Budget::default() }
    }

    #[test]
    fn bivalent_tree_is_certified() {
        let s = free_product_system(&rank_one("a", "1"), &rank_one("b", "2")).unwrap();
        assert_eq!(s.rank(), 2);
        let b = budget(6);
        let ft = s.check_flag_transitive(FtMode::Products, &b);
        assert!(ft.is_holds(), "{ft:?}");
        assert!(matches!(ft.basis, Basis::Theorem(_)));
        assert!(s.check_residually_connected(RcMode::Rc1, &b).is_holds());
        assert_eq!(s.check_firm_thin().0, Firmness::Thin);
    }

    #[test]
    fn polygon_free_product_has_rank_three() {
        let s = free_product_system(&ngon(4), &rank_one("c", "3")).unwrap();
        assert_eq!(s.rank(), 3);
        assert!(s.certificate(Property::FlagTransitive).unwrap().holds);
        assert!(s.certificate(Property::Hypertope).unwrap().holds);
        assert!(!s.check_flag_transitive(FtMode::Products, &budget(4)).is_fails());
    }

    #[test]
    fn free_product_rejects_shared_types() {
        assert!(matches!(free_product_system(&ngon(3), &ngon(4)), Err(ConstructionError::TypeClash(_))));
    }

    #[test]
    fn non_rc_factor_propagates_failure() {
        let bad = klein(&[&["x"], &["x"]], &["1", "2"]);
        let s = free_product_system(&bad, &rank_one("c", "3")).unwrap();
        let rc = s.check_residually_connected(RcMode::Rc1, &budget(4));
        assert!(rc.is_fails(), "{rc:?}");
    }

    #[test]
    fn dihedral_amalgam_middle_parabolic() {
        let alpha = ngon_named(4, ["a1", "a2"], ["1", "2"]);
        let beta = ngon_named(5, ["b2", "b3"], ["2", "3"]);
        let phi = GeneratorMap { source: vec![Word::gen(1)], images: vec![Word::gen(0)] };
        let cert = check_compatible(&alpha, &beta, &[TypeLabel::atom("2")], &phi).unwrap();
        let s = amalgam_system(&alpha, &beta, &cert).unwrap();
        assert_eq!(s.rank(), 3);
        let mid = s.types.index_of_str("2").unwrap();
        let names: Vec<String> = s.parabolic_gens[mid].iter().map(|w| s.group.presentation().render(w)).collect();
        assert_eq!(names, vec!["a1", "b3"]);
        assert!(s.certificate(Property::FlagTransitive).unwrap().holds);
        assert!(s.check_residually_connected(RcMode::Rc1, &budget(4)).is_holds());
    }

    #[test]
    fn hemicube_is_incompatible() {
        let (alpha, beta) = hemicube_pair();
        let phi = hemicube_map(&alpha, &beta);
        let shared: Vec<TypeLabel> = ["0", "1", "2"].iter().map(|s| TypeLabel::atom(s)).collect();
        match check_compatible(&alpha, &beta, &shared, &phi) {
            Err(ConstructionError::RestrictionFailure { j, witness }) => {
                assert_eq!(j, "{2}");
                assert_eq!(witness, "|A_{2,3}| = 8 ≠ 6 = |B_{2,4}|");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn a5_hnn_classes() {
        let alpha = coxeter_a(5);
        let (j, k, phi) = a5_hnn_map();
        let c = check_hnn_admissible(&alpha, j, k, &phi).unwrap();
        assert_eq!(c.classes, vec![vec![0], vec![1, 2, 3], vec![4]]);
        assert_eq!(c.stable_parabolic, 1 << 3);
        assert_eq!(c.stable, "t");
        let s = hnn_system(&alpha, &c).unwrap();
        assert_eq!(s.rank(), 4);
        let labels: Vec<String> = s.types.labels().iter().map(|l| l.to_string()).collect();
        assert_eq!(labels, vec!["1", "{2,3,4}", "5", "t"]);
        let t = s.types.index_of_str("t").unwrap();
        let gt: Vec<String> = s.parabolic_gens[t].iter().map(|w| s.group.presentation().render(w)).collect();
        let (g, sets) = alpha.finite_view().unwrap();
        assert_eq!(gt.len(), g.generators_of(&sets[1 << 3]).len());
        assert!(s.certificate(Property::FlagTransitive).unwrap().holds);
    }

    #[test]
    fn hnn_map_off_the_lattice() {
        let alpha = coxeter_a(5);
        let (j, k, _) = a5_hnn_map();
        let p = alpha.group.presentation().clone();
        let phi = GeneratorMap { source: vec![Word::gen(1), Word::gen(2)], images: vec![p.word("a3 a4 a3").unwrap(), Word::gen(3)] };
        assert!(matches!(check_hnn_admissible(&alpha, j, k, &phi), Err(ConstructionError::NotLatticePreserving(_))));
        let id = GeneratorMap { source: vec![Word::gen(1), Word::gen(2)], images: vec![Word::gen(1), Word::gen(2)] };
        let c = check_hnn_admissible(&alpha, j, j, &id).unwrap();
        assert_eq!(c.classes.len(), 5);
        assert_eq!(c.stable_parabolic, 0);
    }

    #[test]
    fn tetrahedron_orbits_and_twist() {
        let alpha = braid_tetrahedron();
        let (beta, action) = tetrahedron_actor();
        let data = check_action_admissible(&alpha, &beta, &action).unwrap();
        assert_eq!(data.orbits, vec![vec![0], vec![1, 2, 3]]);
        let cert = check_twist_admissible(&alpha, &beta, &action, "2").unwrap();
        assert_eq!(cert.upper[beta.types.full() as usize], BTreeSet::from([1]));
        let s = twist_system(&alpha, &beta, &cert).unwrap();
        assert_eq!(s.rank(), 4);
        assert!(matches!(check_twist_admissible(&alpha, &beta, &action, "1"), Err(ConstructionError::BasePointNotInL(_))));
    }

    #[test]
    fn trivial_and_double_swap_actions() {
        let alpha = artin_d(4);
        let beta = cyclic_actor(2);
        let trivial = check_action_admissible(&alpha, &beta, &[GeneratorMap::identity(4)]).unwrap();
        assert_eq!(trivial.orbits.len(), 4);
        let path = standard_system(
            "path",
            &crate::presentation::shephard_presentation(&diagram("P4", &["a1", "a2", "a3", "a4"], Label::Infinite, &[(0, 1, Label::Finite(3)), (1, 2, Label::Finite(3)), (2, 3, Label::Finite(3))])),
            &["1", "2", "3", "4"],
            false,
        );
        let flip = GeneratorMap::on_generators(vec![Word::gen(3), Word::gen(2), Word::gen(1), Word::gen(0)]);
        assert!(matches!(check_twist_admissible(&path, &beta, &[flip], "1"), Err(ConstructionError::MultipleBigOrbits(_))));
    }

    #[test]
    fn d_type_twist() {
        let alpha = artin_d(4);
        let beta = cyclic_actor(2);
        let cert = check_twist_admissible(&alpha, &beta, &[d_swap(4)], "1").unwrap();
        assert_eq!(cert.action.orbits, vec![vec![0, 3], vec![1], vec![2]]);
        let s = twist_system(&alpha, &beta, &cert).unwrap();
        let zero = s.types.index_of_str("0").unwrap();
        let g0: Vec<String> = s.parabolic_gens[zero].iter().map(|w| s.group.presentation().render(w)).collect();
        assert_eq!(g0, vec!["a1", "a2", "a3"]);
    }

    #[test]
    fn swap_semidirect_on_klein() {
        let alpha = klein(&[&["y"], &["x"]], &["1", "2"]);
        let beta = finite_system("C2", "gens s\nrel s^2", &["0"], &[&[]]);
        let swap = GeneratorMap::on_generators(vec![Word::gen(1), Word::gen(0)]);
        let data = check_action_admissible(&alpha, &beta, &[swap]).unwrap();
        let s = semidirect_system(&alpha, &beta, &data).unwrap();
        let (g, sets) = s.finite_view().unwrap();
        assert_eq!(g.order(), 8);
        let orbit = s.types.index_of_str("{1,2}").unwrap();
        assert_eq!(sets[1 << orbit].count_ones(..), 2);
        assert_eq!(sets[1].count_ones(..), 4);
        assert_eq!(sets[s.types.full() as usize].count_ones(..), 1);
    }

    #[test]
    fn mikado_and_cyclic_rewrites() {
        for n in [4, 5] {
            assert_eq!(canonical_text(&mikado_rewrite(n)), canonical_text(&shephard_b_target(n)), "n={n}");
        }
        assert_eq!(canonical_text(&triple_rewrite()), canonical_text(&triple_target()));
        let alpha = artin_d(4);
        let beta = cyclic_actor(2);
        let s = twist_system(&alpha, &beta, &check_twist_admissible(&alpha, &beta, &[d_swap(4)], "1").unwrap()).unwrap();
        let GroupHandle::SemiDirect(sd) = &s.group else { panic!("twist is a semidirect product") };
        let (p, d) = conjugate_elimination(sd);
        let d = d.expect("diagram group");
        assert_eq!(canonical_text(&crate::presentation::shephard_presentation(&d)), canonical_text(&p));
        let target = crate::canonical::recognize_diagram(&shephard_b_target(4)).unwrap();
        assert_eq!(d.loops.values().collect::<Vec<_>>(), target.loops.values().collect::<Vec<_>>());
        assert_eq!(d.edges.values().sorted().collect::<Vec<_>>(), target.edges.values().sorted().collect::<Vec<_>>());
        assert_eq!(crate::presentation::parse_diagram(&d.to_text()).unwrap().to_text(), d.to_text());
    }

    #[test]
    fn affine_twist_quotients() {
        let b = Budget::default();
        let beta = affine_a3_actor();
        let alpha = affine_a3_quotient(2);
        let cert = check_twist_admissible(&alpha, &beta, &affine_a3_symmetries(), "1").unwrap();
        assert_eq!(cert.action.orbits, vec![vec![0, 1, 2, 3]]);
        let s = twist_system(&alpha, &beta, &cert).unwrap();
        assert!(s.check_flag_transitive(FtMode::Products, &b).is_holds());
        assert!(s.check_residually_connected(RcMode::Rc1, &b).is_holds());
        assert_eq!(s.check_firm_thin().0, Firmness::Thin);
        let one = affine_a3_quotient(1);
        assert!(one.check_residually_connected(RcMode::Rc1, &b).is_fails());
    }
}
