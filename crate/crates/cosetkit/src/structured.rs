//! Word problem and special-subgroup algebra for constructed groups, via normal forms.

use std::collections::{BTreeSet, HashSet};
use std::sync::{Arc, OnceLock};

use thiserror::Error;

use crate::finite::{ElementSet, FiniteGroup, DEFAULT_MAX_COSETS};
use crate::presentation::{GeneratorMap, Letter, Presentation, Word};

pub const DEFAULT_BALL_CAP: usize = 1_000_000;
const MAX_DEPTH: usize = 3;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructError {
    #[error("unsupported nesting: {0}")]
    UnsupportedNesting(String),
    #[error("no word-problem oracle for presented group `{0}`")]
    NoOracle(String),
    #[error("ball exceeded {0} elements")]
    BallCapExceeded(usize),
    #[error("subgroup data does not match the group variant")]
    Mismatch,
    #[error("componentwise intersection not justified: {0}")]
    IntersectionUndecided(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Canonical element representation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormalForm {
    Finite(u32),
    /// Alternating nontrivial factor elements.
    Free(Vec<(Side, NormalForm)>),
    /// `c k_1 ... k_n` with `c` in the amalgamated subgroup (stored as a left-factor element)
    /// and each `k_i` a minimal right-coset representative outside it.
    Amalgam { c: u32, syllables: Vec<(Side, u32)> },
    /// `a_0 t^e_1 a_1 ... t^e_n a_n` with pinch-free, minimal-representative syllables.
    Hnn { head: u32, syllables: Vec<(i8, u32)> },
    /// Component pair `(a, b)` with product law `(a, b)(a', b') = (a b.a', b b')`.
    Pair(Box<NormalForm>, Box<NormalForm>),
}

impl NormalForm {
    pub fn syllable_length(&self) -> usize {
        match self {
            NormalForm::Finite(_) => 0,
            NormalForm::Free(s) => s.len(),
            NormalForm::Amalgam { syllables, .. } => syllables.len(),
            NormalForm::Hnn { syllables, .. } => syllables.len(),
            NormalForm::Pair(a, b) => a.syllable_length() + b.syllable_length(),
        }
    }
}

#[derive(Debug)]
pub struct FreeProductGroup {
    pub left: GroupHandle,
    pub right: GroupHandle,
    pub presentation: Presentation,
    pub split: usize,
}

#[derive(Debug)]
pub struct AmalgamGroup {
    pub left: Arc<FiniteGroup>,
    pub right: Arc<FiniteGroup>,
    pub c_left_gens: Vec<Word>,
    pub c_right_gens: Vec<Word>,
    pub c_left: ElementSet,
    pub c_right: ElementSet,
    /// Isomorphism C_left -> C_right by element index (u32::MAX off the subgroup).
    pub to_right: Vec<u32>,
    pub to_left: Vec<u32>,
    rep_left: Vec<u32>,
    rep_right: Vec<u32>,
    pub presentation: Presentation,
    pub split: usize,
}

#[derive(Debug)]
pub struct HnnGroup {
    pub base: Arc<FiniteGroup>,
    pub a1_gens: Vec<Word>,
    pub a2_gens: Vec<Word>,
    pub a1: ElementSet,
    pub a2: ElementSet,
    /// `t^-1 a t = phi(a)` for `a` in A1.
    pub phi: Vec<u32>,
    pub phi_inv: Vec<u32>,
    rep_a1: Vec<u32>,
    rep_a2: Vec<u32>,
    pub stable: String,
    pub presentation: Presentation,
}

#[derive(Debug)]
pub struct SemiDirectGroup {
    pub base: GroupHandle,
    pub actor: GroupHandle,
    /// Automorphism of the base for each actor generator: `b x b^-1 = action[b](x)`.
    pub action: Vec<GeneratorMap>,
    pub presentation: Presentation,
    pub split: usize,
    finite: OnceLock<Option<Arc<FiniteGroup>>>,
}

/// A group with whatever oracles its construction provides.
#[derive(Clone, Debug)]
pub enum GroupHandle {
    Finite(Arc<FiniteGroup>),
    FreeProduct(Arc<FreeProductGroup>),
    Amalgam(Arc<AmalgamGroup>),
    Hnn(Arc<HnnGroup>),
    SemiDirect(Arc<SemiDirectGroup>),
    Presented(Arc<Presentation>),
}

/// Subgroup described compatibly with the group's structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SpecialSubgroup {
    Finite(ElementSet),
    Free(Box<SpecialSubgroup>, Box<SpecialSubgroup>),
    Amalgam { left: ElementSet, right: ElementSet },
    Hnn { base: ElementSet, stable: bool },
    Pair(Box<SpecialSubgroup>, Box<SpecialSubgroup>),
    /// Generated by a set of generator classes of a presented group.
    Standard(BTreeSet<usize>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IndexValue {
    Finite(u64),
    Infinite,
    Unknown,
}

fn right_coset_reps(g: &FiniteGroup, h: &ElementSet) -> Vec<u32> {
    let (ids, n) = g.right_coset_ids(h);
    let mut rep = vec![u32::MAX; n];
    for (x, &id) in ids.iter().enumerate() {
        if rep[id as usize] == u32::MAX {
            rep[id as usize] = x as u32;
        }
    }
    ids.iter().map(|&id| rep[id as usize]).collect()
}

fn shift_word(w: &Word, by: usize) -> Word {
    w.map_generators(|g| g + by)
}

impl FreeProductGroup {
    pub fn new(left: GroupHandle, right: GroupHandle) -> Result<Self, StructError> {
        let lp = left.presentation().clone();
        let rp = right.presentation().clone();
        let split = lp.ngens();
        let mut gens = lp.generators.clone();
        gens.extend(rp.generators.iter().cloned());
        let mut rels = lp.relators.clone();
        rels.extend(rp.relators.iter().map(|r| shift_word(r, split)));
        let presentation = Presentation { name: format!("{}*{}", lp.name, rp.name), generators: gens, relators: rels, asserted: Vec::new() };
        let fp = FreeProductGroup { left, right, presentation, split };
        if fp.depth() > MAX_DEPTH {
            return Err(StructError::UnsupportedNesting(format!("depth {} exceeds {MAX_DEPTH}", fp.depth())));
        }
        Ok(fp)
    }

    fn depth(&self) -> usize {
        1 + self.left.depth().max(self.right.depth())
    }

    fn route(&self, l: Letter) -> (Side, Letter) {
        if l.index() < self.split {
            (Side::Left, l)
        } else {
            (Side::Right, Letter { gen: l.gen - self.split as u32, inv: l.inv })
        }
    }

    fn factor(&self, s: Side) -> &GroupHandle {
        match s {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

impl AmalgamGroup {
    /// `iso_images[i]` is the image in `right` of `c_left_gens[i]`.
    pub fn new(
        left: Arc<FiniteGroup>,
        right: Arc<FiniteGroup>,
        c_left_gens: Vec<Word>,
        c_right_gens: Vec<Word>,
    ) -> Result<Self, String> {
        let lg: Vec<u32> = c_left_gens.iter().map(|w| left.eval(w)).collect();
        let rg: Vec<u32> = c_right_gens.iter().map(|w| right.eval(w)).collect();
        let to_right = crate::finite::extend_homomorphism(&left, &lg, &right, &rg).ok_or("amalgamating map is not a homomorphism")?;
        let to_left = crate::finite::extend_homomorphism(&right, &rg, &left, &lg).ok_or("inverse amalgamating map is not a homomorphism")?;
        let c_left = left.closure(&lg);
        let c_right = right.closure(&rg);
        for x in c_left.ones() {
            let y = to_right[x];
            if y == u32::MAX || to_left[y as usize] != x as u32 {
                return Err("amalgamating map is not bijective".into());
            }
        }
        if c_left.count_ones(..) != c_right.count_ones(..) {
            return Err("amalgamating map is not bijective".into());
        }
        let rep_left = right_coset_reps(&left, &c_left);
        let rep_right = right_coset_reps(&right, &c_right);
        let split = left.ngens();
        let mut gens = left.presentation.generators.clone();
        gens.extend(right.presentation.generators.iter().cloned());
        let mut rels = left.presentation.relators.clone();
        rels.extend(right.presentation.relators.iter().map(|r| shift_word(r, split)));
        for (a, b) in c_left_gens.iter().zip(&c_right_gens) {
            rels.push(Word::join(&[a, &shift_word(b, split).inverse()]));
        }
        let presentation = Presentation::from_parts(&format!("{}*_C{}", left.presentation.name, right.presentation.name), gens, rels).map_err(|e| e.to_string())?;
        Ok(AmalgamGroup { left, right, c_left_gens, c_right_gens, c_left, c_right, to_right, to_left, rep_left, rep_right, presentation, split })
    }

    fn factor(&self, s: Side) -> &FiniteGroup {
        match s {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    fn in_c(&self, s: Side, x: u32) -> bool {
        match s {
            Side::Left => self.c_left.contains(x as usize),
            Side::Right => self.c_right.contains(x as usize),
        }
    }

    /// C-element of side `s` as a left-factor element.
    fn c_to_left(&self, s: Side, x: u32) -> u32 {
        match s {
            Side::Left => x,
            Side::Right => self.to_left[x as usize],
        }
    }

    fn c_from_left(&self, s: Side, c: u32) -> u32 {
        match s {
            Side::Left => c,
            Side::Right => self.to_right[c as usize],
        }
    }

    fn rep(&self, s: Side, x: u32) -> u32 {
        match s {
            Side::Left => self.rep_left[x as usize],
            Side::Right => self.rep_right[x as usize],
        }
    }

    fn route(&self, l: Letter) -> (Side, u32) {
        if l.index() < self.split {
            (Side::Left, self.left.mul_letter(0, l))
        } else {
            (Side::Right, self.right.mul_letter(0, Letter { gen: l.gen - self.split as u32, inv: l.inv }))
        }
    }

    /// Multiply a C-element (left form) into the last syllable or the head.
    fn absorb(&self, c: &mut u32, syl: &mut [(Side, u32)], m_left: u32) {
        match syl.last_mut() {
            None => *c = self.left.mul(*c, m_left),
            Some((s, k)) => *k = self.factor(*s).mul(*k, self.c_from_left(*s, m_left)),
        }
    }

    fn push(&self, c: &mut u32, syl: &mut Vec<(Side, u32)>, side: Side, x: u32) {
        let f = self.factor(side);
        match syl.last().copied() {
            None => {
                let e = f.mul(self.c_from_left(side, *c), x);
                if self.in_c(side, e) {
                    *c = self.c_to_left(side, e);
                } else {
                    *c = 0;
                    syl.push((side, e));
                }
            }
            Some((s, k)) if s == side => {
                let k2 = f.mul(k, x);
                if self.in_c(side, k2) {
                    syl.pop();
                    self.absorb(c, syl, self.c_to_left(side, k2));
                } else {
                    syl.last_mut().unwrap().1 = k2;
                }
            }
            Some(_) => {
                if self.in_c(side, x) {
                    self.absorb(c, syl, self.c_to_left(side, x));
                } else {
                    syl.push((side, x));
                }
            }
        }
    }

    fn canonicalize(&self, mut c: u32, mut syl: Vec<(Side, u32)>) -> NormalForm {
        for i in (0..syl.len()).rev() {
            let (s, k) = syl[i];
            let f = self.factor(s);
            let r = self.rep(s, k);
            let m = f.mul(k, f.inv(r));
            syl[i].1 = r;
            let m_left = self.c_to_left(s, m);
            self.absorb(&mut c, &mut syl[..i], m_left);
        }
        NormalForm::Amalgam { c, syllables: syl }
    }

    fn word_of(&self, c: u32, syl: &[(Side, u32)]) -> Word {
        let mut parts = vec![self.left.word_of(c)];
        for &(s, k) in syl {
            match s {
                Side::Left => parts.push(self.left.word_of(k)),
                Side::Right => parts.push(shift_word(&self.right.word_of(k), self.split)),
            }
        }
        Word::join(&parts.iter().collect::<Vec<_>>())
    }
}

impl HnnGroup {
    /// `t^-1 a t = phi(a)` where `a1_gens[i] -> a2_gens[i]`.
    pub fn new(base: Arc<FiniteGroup>, a1_gens: Vec<Word>, a2_gens: Vec<Word>, stable: &str) -> Result<Self, String> {
        let g1: Vec<u32> = a1_gens.iter().map(|w| base.eval(w)).collect();
        let g2: Vec<u32> = a2_gens.iter().map(|w| base.eval(w)).collect();
        let phi = crate::finite::extend_homomorphism(&base, &g1, &base, &g2).ok_or("associated map is not a homomorphism")?;
        let phi_inv = crate::finite::extend_homomorphism(&base, &g2, &base, &g1).ok_or("inverse associated map is not a homomorphism")?;
        let a1 = base.closure(&g1);
        let a2 = base.closure(&g2);
        for x in a1.ones() {
            let y = phi[x];
            if y == u32::MAX || phi_inv[y as usize] != x as u32 {
                return Err("associated map is not bijective".into());
            }
        }
        if a1.count_ones(..) != a2.count_ones(..) {
            return Err("associated map is not bijective".into());
        }
        let rep_a1 = right_coset_reps(&base, &a1);
        let rep_a2 = right_coset_reps(&base, &a2);
        let n = base.ngens();
        let mut gens = base.presentation.generators.clone();
        gens.push(stable.to_string());
        let t = Word::gen(n);
        let mut rels = base.presentation.relators.clone();
        for (a, b) in a1_gens.iter().zip(&a2_gens) {
            rels.push(Word::join(&[&t.inverse(), a, &t, &b.inverse()]));
        }
        let presentation = Presentation::from_parts(&format!("{}*phi", base.presentation.name), gens, rels).map_err(|e| e.to_string())?;
        Ok(HnnGroup { base, a1_gens, a2_gens, a1, a2, phi, phi_inv, rep_a1, rep_a2, stable: stable.to_string(), presentation })
    }

    pub fn stable_index(&self) -> usize {
        self.base.ngens()
    }

    fn mul_last(&self, head: &mut u32, syl: &mut [(i8, u32)], x: u32) {
        match syl.last_mut() {
            None => *head = self.base.mul(*head, x),
            Some((_, a)) => *a = self.base.mul(*a, x),
        }
    }

    fn push_letter(&self, head: &mut u32, syl: &mut Vec<(i8, u32)>, l: Letter) {
        if l.index() < self.base.ngens() {
            let x = self.base.mul_letter(0, l);
            self.mul_last(head, syl, x);
            return;
        }
        let e: i8 = if l.inv { -1 } else { 1 };
        if let Some(&(eps, a)) = syl.last() {
            if eps == -e {
                let image = if eps == -1 && self.a1.contains(a as usize) {
                    Some(self.phi[a as usize])
                } else if eps == 1 && self.a2.contains(a as usize) {
                    Some(self.phi_inv[a as usize])
                } else {
                    None
                };
                if let Some(img) = image {
                    syl.pop();
                    self.mul_last(head, syl, img);
                    return;
                }
            }
        }
        syl.push((e, 0));
    }

    fn canonicalize(&self, mut head: u32, mut syl: Vec<(i8, u32)>) -> NormalForm {
        for i in (0..syl.len()).rev() {
            let (eps, a) = syl[i];
            let (r, moved) = if eps == 1 {
                let r = self.rep_a2[a as usize];
                let m = self.base.mul(a, self.base.inv(r));
                (r, self.phi_inv[m as usize])
            } else {
                let r = self.rep_a1[a as usize];
                let m = self.base.mul(a, self.base.inv(r));
                (r, self.phi[m as usize])
            };
            syl[i].1 = r;
            self.mul_last(&mut head, &mut syl[..i], moved);
        }
        NormalForm::Hnn { head, syllables: syl }
    }

    fn word_of(&self, head: u32, syl: &[(i8, u32)]) -> Word {
        let t = self.stable_index();
        let mut v = self.base.word_of(head).0;
        for &(e, a) in syl {
            v.push(if e == 1 { Letter::pos(t) } else { Letter::neg(t) });
            v.extend(self.base.word_of(a).0);
        }
        Word(v)
    }

    /// Subgroup in which syllables following `t^e` are pinned: A2 for e = +1, A1 for e = -1.
    fn pinned(&self, e: i8) -> &ElementSet {
        if e == 1 {
            &self.a2
        } else {
            &self.a1
        }
    }

    /// The image of a pinned element after moving it across `t^e` to the left.
    fn moved_left(&self, e: i8, m: u32) -> u32 {
        if e == 1 {
            self.phi_inv[m as usize]
        } else {
            self.phi[m as usize]
        }
    }
}

impl SemiDirectGroup {
    pub fn new(base: GroupHandle, actor: GroupHandle, action: Vec<GeneratorMap>) -> Result<Self, StructError> {
        let bp = base.presentation().clone();
        let ap = actor.presentation().clone();
        let split = bp.ngens();
        let mut gens = bp.generators.clone();
        gens.extend(ap.generators.iter().cloned());
        let mut rels = bp.relators.clone();
        rels.extend(ap.relators.iter().map(|r| shift_word(r, split)));
        for (b, map) in action.iter().enumerate() {
            let bw = Word::gen(split + b);
            for x in 0..split {
                let img = map.apply(&Word::gen(x));
                let r = Word::join(&[&bw, &Word::gen(x), &bw.inverse(), &img.inverse()]);
                let r = crate::presentation::free_reduce(&r);
                if !r.is_empty() {
                    rels.push(r);
                }
            }
        }
        let presentation = Presentation { name: format!("{}x|{}", bp.name, ap.name), generators: gens, relators: rels, asserted: Vec::new() };
        let sd = SemiDirectGroup { base, actor, action, presentation, split, finite: OnceLock::new() };
        if 1 + sd.base.depth().max(sd.actor.depth()) > MAX_DEPTH {
            return Err(StructError::UnsupportedNesting("semidirect nesting too deep".into()));
        }
        Ok(sd)
    }

    /// Finite version when both components are finite.
    pub fn finite(&self) -> Option<Arc<FiniteGroup>> {
        self.finite
            .get_or_init(|| {
                let a = self.base.finite_order()?;
                let b = self.actor.finite_order()?;
                let g = FiniteGroup::from_presentation(&self.presentation, DEFAULT_MAX_COSETS.max(a * b + 1)).ok()?;
                (g.order() == a * b).then(|| Arc::new(g))
            })
            .clone()
    }

    /// `phi(b)(w)` for an actor element given as a positive word.
    fn act(&self, b_word: &Word, w: &Word) -> Word {
        let mut cur = w.clone();
        for l in b_word.0.iter().rev() {
            cur = self.action[l.index()].apply(&cur);
        }
        cur
    }
}

impl GroupHandle {
    pub fn finite(g: FiniteGroup) -> Self {
        GroupHandle::Finite(Arc::new(g))
    }

    pub fn presentation(&self) -> &Presentation {
        match self {
            GroupHandle::Finite(g) => &g.presentation,
            GroupHandle::FreeProduct(g) => &g.presentation,
            GroupHandle::Amalgam(g) => &g.presentation,
            GroupHandle::Hnn(g) => &g.presentation,
            GroupHandle::SemiDirect(g) => &g.presentation,
            GroupHandle::Presented(p) => p,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            GroupHandle::Finite(_) | GroupHandle::Presented(_) => 0,
            GroupHandle::FreeProduct(g) => g.depth(),
            GroupHandle::Amalgam(_) | GroupHandle::Hnn(_) => 1,
            GroupHandle::SemiDirect(g) => 1 + g.base.depth().max(g.actor.depth()),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            GroupHandle::Finite(_) => "finite",
            GroupHandle::FreeProduct(_) => "free-product",
            GroupHandle::Amalgam(_) => "amalgam",
            GroupHandle::Hnn(_) => "hnn",
            GroupHandle::SemiDirect(_) => "semidirect",
            GroupHandle::Presented(_) => "presented",
        }
    }

    /// Order when the group is known finite with an exact backend.
    pub fn finite_order(&self) -> Option<usize> {
        self.as_finite().map(|g| g.order())
    }

    /// An exact finite backend for this group, if it has one.
    pub fn as_finite(&self) -> Option<Arc<FiniteGroup>> {
        match self {
            GroupHandle::Finite(g) => Some(g.clone()),
            GroupHandle::SemiDirect(g) => g.finite(),
            _ => None,
        }
    }

    /// Whether normal forms are available.
    pub fn has_word_problem(&self) -> bool {
        match self {
            GroupHandle::Presented(_) => false,
            GroupHandle::FreeProduct(g) => g.left.has_word_problem() && g.right.has_word_problem(),
            GroupHandle::SemiDirect(g) => g.base.has_word_problem() && matches!(g.actor, GroupHandle::Finite(_)),
            _ => true,
        }
    }

    pub fn identity(&self) -> Result<NormalForm, StructError> {
        Ok(match self {
            GroupHandle::Finite(_) => NormalForm::Finite(0),
            GroupHandle::FreeProduct(_) => NormalForm::Free(Vec::new()),
            GroupHandle::Amalgam(_) => NormalForm::Amalgam { c: 0, syllables: Vec::new() },
            GroupHandle::Hnn(_) => NormalForm::Hnn { head: 0, syllables: Vec::new() },
            GroupHandle::SemiDirect(g) => {
                if !matches!(g.actor, GroupHandle::Finite(_)) {
                    return Err(StructError::UnsupportedNesting("semidirect product needs a finite actor for normal forms".into()));
                }
                NormalForm::Pair(Box::new(g.base.identity()?), Box::new(NormalForm::Finite(0)))
            }
            GroupHandle::Presented(p) => return Err(StructError::NoOracle(p.name.clone())),
        })
    }

    /// Append one letter to a normal form.
    pub fn append_letter(&self, nf: &NormalForm, l: Letter) -> Result<NormalForm, StructError> {
        self.append_word(nf, &Word::letter(l))
    }

    pub fn append_word(&self, nf: &NormalForm, w: &Word) -> Result<NormalForm, StructError> {
        match (self, nf) {
            (GroupHandle::Finite(g), NormalForm::Finite(x)) => Ok(NormalForm::Finite(w.0.iter().fold(*x, |y, &l| g.mul_letter(y, l)))),
            (GroupHandle::FreeProduct(g), NormalForm::Free(syl)) => {
                let mut syl = syl.clone();
                for &l in &w.0 {
                    let (side, fl) = g.route(l);
                    let f = g.factor(side);
                    match syl.last() {
                        Some((s, last)) if *s == side => {
                            let n = f.append_letter(last, fl)?;
                            if n == f.identity()? {
                                syl.pop();
                            } else {
                                syl.last_mut().unwrap().1 = n;
                            }
                        }
                        _ => {
                            let n = f.append_letter(&f.identity()?, fl)?;
                            if n != f.identity()? {
                                syl.push((side, n));
                            }
                        }
                    }
                }
                Ok(NormalForm::Free(syl))
            }
            (GroupHandle::Amalgam(g), NormalForm::Amalgam { c, syllables }) => {
                let mut c = *c;
                let mut syl = syllables.clone();
                for &l in &w.0 {
                    let (side, x) = g.route(l);
                    g.push(&mut c, &mut syl, side, x);
                }
                Ok(g.canonicalize(c, syl))
            }
            (GroupHandle::Hnn(g), NormalForm::Hnn { head, syllables }) => {
                let mut head = *head;
                let mut syl = syllables.clone();
                for &l in &w.0 {
                    g.push_letter(&mut head, &mut syl, l);
                }
                Ok(g.canonicalize(head, syl))
            }
            (GroupHandle::SemiDirect(g), NormalForm::Pair(a, b)) => {
                let GroupHandle::Finite(actor) = &g.actor else {
                    return Err(StructError::UnsupportedNesting("semidirect product needs a finite actor for normal forms".into()));
                };
                let NormalForm::Finite(mut bx) = **b else { return Err(StructError::Mismatch) };
                let mut a = (**a).clone();
                for &l in &w.0 {
                    if l.index() < g.split {
                        let moved = g.act(&actor.word_of(bx), &Word::letter(l));
                        a = g.base.append_word(&a, &moved)?;
                    } else {
                        bx = actor.mul_letter(bx, Letter { gen: l.gen - g.split as u32, inv: l.inv });
                    }
                }
                Ok(NormalForm::Pair(Box::new(a), Box::new(NormalForm::Finite(bx))))
            }
            (GroupHandle::Presented(p), _) => Err(StructError::NoOracle(p.name.clone())),
            _ => Err(StructError::Mismatch),
        }
    }

    pub fn normalize(&self, w: &Word) -> Result<NormalForm, StructError> {
        self.append_word(&self.identity()?, w)
    }

    pub fn is_identity(&self, w: &Word) -> Result<bool, StructError> {
        Ok(self.normalize(w)? == self.identity()?)
    }

    /// A word over the group's presentation representing `nf`.
    pub fn word_of(&self, nf: &NormalForm) -> Result<Word, StructError> {
        match (self, nf) {
            (GroupHandle::Finite(g), NormalForm::Finite(x)) => Ok(g.word_of(*x)),
            (GroupHandle::FreeProduct(g), NormalForm::Free(syl)) => {
                let mut v = Vec::new();
                for (s, n) in syl {
                    let w = g.factor(*s).word_of(n)?;
                    v.extend(if *s == Side::Left { w } else { shift_word(&w, g.split) }.0);
                }
                Ok(Word(v))
            }
            (GroupHandle::Amalgam(g), NormalForm::Amalgam { c, syllables }) => Ok(g.word_of(*c, syllables)),
            (GroupHandle::Hnn(g), NormalForm::Hnn { head, syllables }) => Ok(g.word_of(*head, syllables)),
            (GroupHandle::SemiDirect(g), NormalForm::Pair(a, b)) => {
                let wa = g.base.word_of(a)?;
                let wb = g.actor.word_of(b)?;
                Ok(Word::join(&[&wa, &shift_word(&wb, g.split)]))
            }
            _ => Err(StructError::Mismatch),
        }
    }

    pub fn mul(&self, a: &NormalForm, b: &NormalForm) -> Result<NormalForm, StructError> {
        self.append_word(a, &self.word_of(b)?)
    }

    pub fn inverse(&self, a: &NormalForm) -> Result<NormalForm, StructError> {
        self.normalize(&self.word_of(a)?.inverse())
    }

    /// All elements given by words of length at most `radius`, in breadth-first discovery order.
    pub fn ball(&self, radius: usize, cap: usize) -> Result<Vec<NormalForm>, StructError> {
        let id = self.identity()?;
        let n = self.presentation().ngens();
        let letters: Vec<Letter> = (0..n).flat_map(|g| [Letter::pos(g), Letter::neg(g)]).collect();
        let mut seen: HashSet<NormalForm> = HashSet::from([id.clone()]);
        let mut out = vec![id];
        let mut layer_start = 0;
        for _ in 0..radius {
            let layer_end = out.len();
            for i in layer_start..layer_end {
                for &l in &letters {
                    let nf = self.append_letter(&out[i], l)?;
                    if seen.insert(nf.clone()) {
                        if out.len() >= cap {
                            return Err(StructError::BallCapExceeded(cap));
                        }
                        out.push(nf);
                    }
                }
            }
            layer_start = layer_end;
        }
        Ok(out)
    }

    /// The whole group as a special subgroup.
    pub fn whole_special(&self) -> Option<SpecialSubgroup> {
        Some(match self {
            GroupHandle::Finite(g) => SpecialSubgroup::Finite(g.whole()),
            GroupHandle::FreeProduct(g) => SpecialSubgroup::Free(Box::new(g.left.whole_special()?), Box::new(g.right.whole_special()?)),
            GroupHandle::Amalgam(g) => SpecialSubgroup::Amalgam { left: g.left.whole(), right: g.right.whole() },
            GroupHandle::Hnn(g) => SpecialSubgroup::Hnn { base: g.base.whole(), stable: true },
            GroupHandle::SemiDirect(g) => SpecialSubgroup::Pair(Box::new(g.base.whole_special()?), Box::new(g.actor.whole_special()?)),
            GroupHandle::Presented(p) => SpecialSubgroup::Standard((0..p.ngens()).collect()),
        })
    }

    /// Generating words (over this group's presentation) for a special subgroup.
    pub fn special_generators(&self, s: &SpecialSubgroup) -> Option<Vec<Word>> {
        let words_in = |g: &FiniteGroup, set: &ElementSet, shift: usize| -> Vec<Word> {
            g.generators_of(set).into_iter().map(|x| shift_word(&g.word_of(x), shift)).collect()
        };
        Some(match (self, s) {
            (GroupHandle::Finite(g), SpecialSubgroup::Finite(set)) => words_in(g, set, 0),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(l, r)) => {
                let mut v = g.left.special_generators(l)?;
                v.extend(g.right.special_generators(r)?.iter().map(|w| shift_word(w, g.split)));
                v
            }
            (GroupHandle::Amalgam(g), SpecialSubgroup::Amalgam { left, right }) => {
                let mut v = words_in(&g.left, left, 0);
                v.extend(words_in(&g.right, right, g.split));
                v
            }
            (GroupHandle::Hnn(g), SpecialSubgroup::Hnn { base, stable }) => {
                let mut v = words_in(&g.base, base, 0);
                if *stable {
                    v.push(Word::gen(g.stable_index()));
                }
                v
            }
            (GroupHandle::SemiDirect(g), SpecialSubgroup::Pair(a, b)) => {
                let mut v = g.base.special_generators(a)?;
                v.extend(g.actor.special_generators(b)?.iter().map(|w| shift_word(w, g.split)));
                v
            }
            (GroupHandle::Presented(_), SpecialSubgroup::Standard(set)) => set.iter().map(|&c| Word::gen(c)).collect(),
            _ => return None,
        })
    }

    pub fn trivial_special(&self) -> Option<SpecialSubgroup> {
        Some(match self {
            GroupHandle::Finite(g) => SpecialSubgroup::Finite(g.singleton(0)),
            GroupHandle::FreeProduct(g) => SpecialSubgroup::Free(Box::new(g.left.trivial_special()?), Box::new(g.right.trivial_special()?)),
            GroupHandle::Amalgam(g) => SpecialSubgroup::Amalgam { left: g.left.singleton(0), right: g.right.singleton(0) },
            GroupHandle::Hnn(g) => SpecialSubgroup::Hnn { base: g.base.singleton(0), stable: false },
            GroupHandle::SemiDirect(g) => SpecialSubgroup::Pair(Box::new(g.base.trivial_special()?), Box::new(g.actor.trivial_special()?)),
            GroupHandle::Presented(_) => SpecialSubgroup::Standard(BTreeSet::new()),
        })
    }

    /// Whether the structural side conditions of a special subgroup hold.
    pub fn verify_special(&self, s: &SpecialSubgroup) -> bool {
        match (self, s) {
            (GroupHandle::Finite(g), SpecialSubgroup::Finite(x)) => g.is_subgroup(x),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(l, r)) => g.left.verify_special(l) && g.right.verify_special(r),
            (GroupHandle::Amalgam(g), SpecialSubgroup::Amalgam { left, right }) => {
                if !g.left.is_subgroup(left) || !g.right.is_subgroup(right) {
                    return false;
                }
                let mut lc = left.clone();
                lc.intersect_with(&g.c_left);
                let mut rc = right.clone();
                rc.intersect_with(&g.c_right);
                lc.count_ones(..) == rc.count_ones(..) && lc.ones().all(|x| rc.contains(g.to_right[x] as usize))
            }
            (GroupHandle::Hnn(g), SpecialSubgroup::Hnn { base, stable }) => {
                if !g.base.is_subgroup(base) {
                    return false;
                }
                if !stable {
                    return true;
                }
                let mut b1 = base.clone();
                b1.intersect_with(&g.a1);
                let mut b2 = base.clone();
                b2.intersect_with(&g.a2);
                b1.count_ones(..) == b2.count_ones(..) && b1.ones().all(|x| b2.contains(g.phi[x] as usize))
            }
            (GroupHandle::SemiDirect(g), SpecialSubgroup::Pair(a, b)) => g.base.verify_special(a) && g.actor.verify_special(b),
            (GroupHandle::Presented(p), SpecialSubgroup::Standard(set)) => set.iter().all(|&c| c < p.ngens()),
            _ => false,
        }
    }

    pub fn member(&self, s: &SpecialSubgroup, nf: &NormalForm) -> Result<bool, StructError> {
        match (self, s, nf) {
            (GroupHandle::Finite(_), SpecialSubgroup::Finite(set), NormalForm::Finite(x)) => Ok(set.contains(*x as usize)),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(l, r), NormalForm::Free(syl)) => {
                for (side, n) in syl {
                    let ok = match side {
                        Side::Left => g.left.member(l, n)?,
                        Side::Right => g.right.member(r, n)?,
                    };
                    if !ok {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            (GroupHandle::Amalgam(g), SpecialSubgroup::Amalgam { left, right }, NormalForm::Amalgam { c, syllables }) => {
                let mut c = *c;
                let mut syl = syllables.clone();
                while let Some(&(s, k)) = syl.last() {
                    let f = g.factor(s);
                    let d_set = if s == Side::Left { left } else { right };
                    let c_set = if s == Side::Left { &g.c_left } else { &g.c_right };
                    // d in D_s with k d^-1 in C
                    let found = d_set.ones().map(|d| d as u32).find(|&d| c_set.contains(f.mul(k, f.inv(d)) as usize));
                    let Some(d) = found else { return Ok(false) };
                    let m = f.mul(k, f.inv(d));
                    syl.pop();
                    let m_left = g.c_to_left(s, m);
                    g.absorb(&mut c, &mut syl, m_left);
                }
                Ok(left.contains(c as usize))
            }
            (GroupHandle::Hnn(g), SpecialSubgroup::Hnn { base, stable }, NormalForm::Hnn { head, syllables }) => {
                if !stable {
                    return Ok(syllables.is_empty() && base.contains(*head as usize));
                }
                let mut head = *head;
                let mut syl = syllables.clone();
                while let Some(&(e, a)) = syl.last() {
                    let pinned = g.pinned(e);
                    let found = base.ones().map(|x| x as u32).find(|&x| pinned.contains(g.base.mul(a, g.base.inv(x)) as usize));
                    let Some(x) = found else { return Ok(false) };
                    let m = g.base.mul(a, g.base.inv(x));
                    syl.pop();
                    let moved = g.moved_left(e, m);
                    g.mul_last(&mut head, &mut syl, moved);
                }
                Ok(base.contains(head as usize))
            }
            (GroupHandle::SemiDirect(g), SpecialSubgroup::Pair(sa, sb), NormalForm::Pair(a, b)) => Ok(g.base.member(sa, a)? && g.actor.member(sb, b)?),
            (GroupHandle::Presented(p), _, _) => Err(StructError::NoOracle(p.name.clone())),
            _ => Err(StructError::Mismatch),
        }
    }

    pub fn member_word(&self, s: &SpecialSubgroup, w: &Word) -> Result<bool, StructError> {
        let nf = self.normalize(w)?;
        self.member(s, &nf)
    }

    pub fn intersect(&self, s: &SpecialSubgroup, u: &SpecialSubgroup) -> Result<SpecialSubgroup, StructError> {
        let meet = |a: &ElementSet, b: &ElementSet| {
            let mut m = a.clone();
            m.intersect_with(b);
            m
        };
        Ok(match (self, s, u) {
            (_, SpecialSubgroup::Finite(a), SpecialSubgroup::Finite(b)) => SpecialSubgroup::Finite(meet(a, b)),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(a, b), SpecialSubgroup::Free(c, d)) => {
                SpecialSubgroup::Free(Box::new(g.left.intersect(a, c)?), Box::new(g.right.intersect(b, d)?))
            }
            (GroupHandle::Amalgam(g), SpecialSubgroup::Amalgam { left: a, right: b }, SpecialSubgroup::Amalgam { left: c, right: d }) => {
                // Reduced sequences only transfer between the two subgroups when C-cosets meet compatibly:
                // D_A C ∩ E_A C = (D_A ∩ E_A) C in each factor. Without it the meet can be strictly larger.
                let aligned = |grp: &FiniteGroup, x: &ElementSet, y: &ElementSet, core: &ElementSet| {
                    meet(&grp.product(x, core), &grp.product(y, core)) == grp.product(&meet(x, y), core)
                };
                if !aligned(&g.left, a, c, &g.c_left) || !aligned(&g.right, b, d, &g.c_right) {
                    return Err(StructError::IntersectionUndecided("C-cosets of the factors do not align".into()));
                }
                SpecialSubgroup::Amalgam { left: meet(a, c), right: meet(b, d) }
            }
            (_, SpecialSubgroup::Hnn { base: a, stable: x }, SpecialSubgroup::Hnn { base: b, stable: y }) => {
                SpecialSubgroup::Hnn { base: meet(a, b), stable: *x && *y }
            }
            (GroupHandle::SemiDirect(g), SpecialSubgroup::Pair(a, b), SpecialSubgroup::Pair(c, d)) => {
                SpecialSubgroup::Pair(Box::new(g.base.intersect(a, c)?), Box::new(g.actor.intersect(b, d)?))
            }
            (_, SpecialSubgroup::Standard(a), SpecialSubgroup::Standard(b)) => SpecialSubgroup::Standard(a.intersection(b).copied().collect()),
            _ => return Err(StructError::Mismatch),
        })
    }

    pub fn join(&self, s: &SpecialSubgroup, u: &SpecialSubgroup) -> Result<SpecialSubgroup, StructError> {
        Ok(match (self, s, u) {
            (GroupHandle::Finite(g), SpecialSubgroup::Finite(a), SpecialSubgroup::Finite(b)) => SpecialSubgroup::Finite(g.join(a, b)),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(a, b), SpecialSubgroup::Free(c, d)) => {
                SpecialSubgroup::Free(Box::new(g.left.join(a, c)?), Box::new(g.right.join(b, d)?))
            }
            (GroupHandle::Amalgam(g), SpecialSubgroup::Amalgam { left: a, right: b }, SpecialSubgroup::Amalgam { left: c, right: d }) => {
                let mut l = g.left.join(a, c);
                let mut r = g.right.join(b, d);
                loop {
                    let from_r: Vec<u32> = r.ones().filter(|&x| g.c_right.contains(x)).map(|x| g.to_left[x]).collect();
                    let l2 = g.left.closure_of_set(&l.ones().map(|x| x as u32).chain(from_r).collect::<Vec<_>>());
                    let from_l: Vec<u32> = l2.ones().filter(|&x| g.c_left.contains(x)).map(|x| g.to_right[x]).collect();
                    let r2 = g.right.closure_of_set(&r.ones().map(|x| x as u32).chain(from_l).collect::<Vec<_>>());
                    if l2 == l && r2 == r {
                        break;
                    }
                    l = l2;
                    r = r2;
                }
                SpecialSubgroup::Amalgam { left: l, right: r }
            }
            (GroupHandle::Hnn(g), SpecialSubgroup::Hnn { base: a, stable: x }, SpecialSubgroup::Hnn { base: b, stable: y }) => {
                let stable = *x || *y;
                let mut cur = g.base.join(a, b);
                if stable {
                    loop {
                        let extra: Vec<u32> = cur
                            .ones()
                            .flat_map(|e| {
                                let mut v = Vec::new();
                                if g.a1.contains(e) {
                                    v.push(g.phi[e]);
                                }
                                if g.a2.contains(e) {
                                    v.push(g.phi_inv[e]);
                                }
                                v
                            })
                            .collect();
                        let next = g.base.closure_of_set(&cur.ones().map(|e| e as u32).chain(extra).collect::<Vec<_>>());
                        if next == cur {
                            break;
                        }
                        cur = next;
                    }
                }
                SpecialSubgroup::Hnn { base: cur, stable }
            }
            (GroupHandle::SemiDirect(g), SpecialSubgroup::Pair(a, b), SpecialSubgroup::Pair(c, d)) => {
                SpecialSubgroup::Pair(Box::new(g.base.join(a, c)?), Box::new(g.actor.join(b, d)?))
            }
            (GroupHandle::Presented(_), SpecialSubgroup::Standard(a), SpecialSubgroup::Standard(b)) => SpecialSubgroup::Standard(a.union(b).copied().collect()),
            _ => return Err(StructError::Mismatch),
        })
    }

    pub fn is_trivial(&self, s: &SpecialSubgroup) -> bool {
        match s {
            SpecialSubgroup::Finite(a) => a.count_ones(..) == 1,
            SpecialSubgroup::Free(a, b) | SpecialSubgroup::Pair(a, b) => self.is_trivial(a) && self.is_trivial(b),
            SpecialSubgroup::Amalgam { left, right } => left.count_ones(..) == 1 && right.count_ones(..) == 1,
            SpecialSubgroup::Hnn { base, stable } => !stable && base.count_ones(..) == 1,
            SpecialSubgroup::Standard(a) => a.is_empty(),
        }
    }

    /// Index `[big : small]` as far as the structure determines it.
    pub fn index(&self, big: &SpecialSubgroup, small: &SpecialSubgroup) -> IndexValue {
        if big == small {
            return IndexValue::Finite(1);
        }
        let ratio = |a: &ElementSet, b: &ElementSet| {
            if b.is_subset(a) {
                IndexValue::Finite((a.count_ones(..) / b.count_ones(..)) as u64)
            } else {
                IndexValue::Unknown
            }
        };
        match (self, big, small) {
            (_, SpecialSubgroup::Finite(a), SpecialSubgroup::Finite(b)) => ratio(a, b),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(a, b), SpecialSubgroup::Free(c, d)) => {
                if a == c && g.left.is_trivial(a) {
                    g.right.index(b, d)
                } else if b == d && g.right.is_trivial(b) {
                    g.left.index(a, c)
                } else {
                    IndexValue::Infinite
                }
            }
            (GroupHandle::Amalgam(g), SpecialSubgroup::Amalgam { left: a, right: b }, SpecialSubgroup::Amalgam { left: c, right: d }) => {
                let inside_left = |l: &ElementSet, r: &ElementSet| r.ones().all(|x| g.c_right.contains(x) && l.contains(g.to_left[x] as usize));
                let inside_right = |l: &ElementSet, r: &ElementSet| l.ones().all(|x| g.c_left.contains(x) && r.contains(g.to_right[x] as usize));
                if inside_left(a, b) && inside_left(c, d) {
                    ratio(a, c)
                } else if inside_right(a, b) && inside_right(c, d) {
                    ratio(b, d)
                } else {
                    IndexValue::Unknown
                }
            }
            (_, SpecialSubgroup::Hnn { base: a, stable: x }, SpecialSubgroup::Hnn { base: b, stable: y }) => match (x, y) {
                (false, false) => ratio(a, b),
                (true, false) => IndexValue::Infinite,
                _ => IndexValue::Unknown,
            },
            (GroupHandle::SemiDirect(g), SpecialSubgroup::Pair(a, b), SpecialSubgroup::Pair(c, d)) => match (g.base.index(a, c), g.actor.index(b, d)) {
                (IndexValue::Finite(x), IndexValue::Finite(y)) => IndexValue::Finite(x * y),
                (IndexValue::Unknown, _) | (_, IndexValue::Unknown) => IndexValue::Unknown,
                _ => IndexValue::Infinite,
            },
            _ => IndexValue::Unknown,
        }
    }
}

/// Membership oracle for a product `XY` of two special subgroups.
pub struct ProductOracle<'a> {
    group: &'a GroupHandle,
    x: SpecialSubgroup,
    y: SpecialSubgroup,
    finite_set: Option<ElementSet>,
    left: Option<Box<ProductOracle<'a>>>,
    right: Option<Box<ProductOracle<'a>>>,
}

impl<'a> ProductOracle<'a> {
    pub fn new(group: &'a GroupHandle, x: &SpecialSubgroup, y: &SpecialSubgroup) -> Result<Self, StructError> {
        let mut o = ProductOracle { group, x: x.clone(), y: y.clone(), finite_set: None, left: None, right: None };
        match (group, x, y) {
            (GroupHandle::Finite(g), SpecialSubgroup::Finite(a), SpecialSubgroup::Finite(b)) => o.finite_set = Some(g.product(a, b)),
            (GroupHandle::FreeProduct(g), SpecialSubgroup::Free(a, b), SpecialSubgroup::Free(c, d)) => {
                o.left = Some(Box::new(ProductOracle::new(&g.left, a, c)?));
                o.right = Some(Box::new(ProductOracle::new(&g.right, b, d)?));
            }
            (GroupHandle::Amalgam(_), SpecialSubgroup::Amalgam { .. }, SpecialSubgroup::Amalgam { .. }) => {}
            (GroupHandle::Hnn(_), SpecialSubgroup::Hnn { .. }, SpecialSubgroup::Hnn { .. }) => {}
            (GroupHandle::Presented(p), _, _) => return Err(StructError::NoOracle(p.name.clone())),
            (GroupHandle::SemiDirect(_), _, _) => return Err(StructError::UnsupportedNesting("product membership in a semidirect product uses its finite backend".into())),
            _ => return Err(StructError::Mismatch),
        }
        Ok(o)
    }

    pub fn contains(&self, nf: &NormalForm) -> Result<bool, StructError> {
        match (self.group, nf) {
            (GroupHandle::Finite(_), NormalForm::Finite(x)) => Ok(self.finite_set.as_ref().unwrap().contains(*x as usize)),
            (GroupHandle::FreeProduct(g), NormalForm::Free(syl)) => {
                let (SpecialSubgroup::Free(xl, xr), SpecialSubgroup::Free(yl, yr)) = (&self.x, &self.y) else { return Err(StructError::Mismatch) };
                let n = syl.len();
                let in_x: Vec<bool> = syl
                    .iter()
                    .map(|(s, e)| if *s == Side::Left { g.left.member(xl, e) } else { g.right.member(xr, e) })
                    .collect::<Result<_, _>>()?;
                let in_y: Vec<bool> = syl
                    .iter()
                    .map(|(s, e)| if *s == Side::Left { g.left.member(yl, e) } else { g.right.member(yr, e) })
                    .collect::<Result<_, _>>()?;
                // prefix_ok[k]: first k syllables in X; suffix_ok[k]: syllables k.. in Y
                let mut prefix_ok = vec![true; n + 1];
                for k in 1..=n {
                    prefix_ok[k] = prefix_ok[k - 1] && in_x[k - 1];
                }
                let mut suffix_ok = vec![true; n + 1];
                for k in (0..n).rev() {
                    suffix_ok[k] = suffix_ok[k + 1] && in_y[k];
                }
                for k in 0..=n {
                    if prefix_ok[k] && suffix_ok[k] {
                        return Ok(true);
                    }
                }
                for k in 0..n {
                    if prefix_ok[k] && suffix_ok[k + 1] {
                        let (s, e) = &syl[k];
                        let sub = if *s == Side::Left { self.left.as_ref() } else { self.right.as_ref() };
                        if sub.unwrap().contains(e)? {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
            (GroupHandle::Amalgam(g), NormalForm::Amalgam { c, syllables }) => {
                let inv_g = self.group.inverse(nf)?;
                let factor_elems: Vec<(Side, u32)> = (0..g.left.order() as u32)
                    .map(|e| (Side::Left, e))
                    .chain((0..g.right.order() as u32).map(|e| (Side::Right, e)))
                    .collect();
                for k in 0..=syllables.len() {
                    let prefix = g.canonicalize(*c, syllables[..k].to_vec());
                    for &(side, u) in &factor_elems {
                        let NormalForm::Amalgam { c: pc, syllables: ps } = &prefix else { unreachable!() };
                        let mut pc = *pc;
                        let mut ps = ps.clone();
                        g.push(&mut pc, &mut ps, side, u);
                        let x = g.canonicalize(pc, ps);
                        if !self.group.member(&self.x, &x)? {
                            continue;
                        }
                        // x^-1 g in Y  <=>  g^-1 x in Y^-1 = Y
                        let y_inv = self.group.mul(&inv_g, &x)?;
                        if self.group.member(&self.y, &y_inv)? {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
            (GroupHandle::Hnn(g), NormalForm::Hnn { head, syllables }) => {
                let (SpecialSubgroup::Hnn { base: xa, stable: xs }, SpecialSubgroup::Hnn { base: ya, stable: ys }) = (&self.x, &self.y) else {
                    return Err(StructError::Mismatch);
                };
                let b = &g.base;
                let n = syllables.len();
                let elem = |k: usize| if k == 0 { *head } else { syllables[k - 1].1 };
                // W[k] = { u : prefix_k u in X }, prefix_k = a_0 t^e_1 ... a_{k-1} t^e_k
                let mut w_sets: Vec<ElementSet> = vec![xa.clone()];
                for k in 1..=n {
                    let mut wk = b.empty_set();
                    if *xs {
                        let e = syllables[k - 1].0;
                        let prev = &w_sets[k - 1];
                        let a_prev = elem(k - 1);
                        let good: Vec<u32> = g.pinned(e).ones().map(|c| c as u32).filter(|&c| prev.contains(b.mul(a_prev, g.moved_left(e, c)) as usize)).collect();
                        for &c in &good {
                            for x in xa.ones() {
                                wk.insert(b.mul(c, x as u32) as usize);
                            }
                        }
                    }
                    w_sets.push(wk);
                }
                // V[k] = { v : v t^e_{k+1} a_{k+1} ... in Y }
                let mut v_sets: Vec<ElementSet> = vec![b.empty_set(); n + 1];
                v_sets[n] = ya.clone();
                for k in (0..n).rev() {
                    let mut vk = b.empty_set();
                    if *ys {
                        let e = syllables[k].0;
                        let next = &v_sets[k + 1];
                        let a_next = elem(k + 1);
                        // c' t^e = t^e psi(c'): e = +1 uses A1 with phi, e = -1 uses A2 with phi^-1
                        let (src, img): (&ElementSet, &Vec<u32>) = if e == 1 { (&g.a1, &g.phi) } else { (&g.a2, &g.phi_inv) };
                        let good: Vec<u32> = src.ones().map(|c| c as u32).filter(|&c| next.contains(b.mul(img[c as usize], a_next) as usize)).collect();
                        for &c in &good {
                            for y in ya.ones() {
                                vk.insert(b.mul(y as u32, c) as usize);
                            }
                        }
                    }
                    v_sets[k] = vk;
                }
                for k in 0..=n {
                    let a = elem(k);
                    for w in w_sets[k].ones() {
                        if v_sets[k].contains(b.mul(b.inv(w as u32), a) as usize) {
                            return Ok(true);
                        }
                    }
                }
                Ok(false)
            }
            _ => Err(StructError::Mismatch),
        }
    }
}
