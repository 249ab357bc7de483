//! Exact computation in finite groups: coset enumeration, regular representations
//! and element-set algebra.

use std::collections::VecDeque;
use std::sync::Arc;

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::presentation::{Letter, Presentation, Word};

pub const DEFAULT_MAX_COSETS: usize = 200_000;
const CAYLEY_LIMIT: usize = 2048;
const UNDEF: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FiniteError {
    #[error("coset enumeration exceeded {0} live cosets")]
    CapExceeded(usize),
    #[error("element set is not a subgroup")]
    NotASubgroup,
}

#[inline]
fn col(l: Letter) -> usize {
    2 * l.index() + l.inv as usize
}

#[inline]
fn inv_col(c: usize) -> usize {
    c ^ 1
}

/// Complete, standardized coset table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CosetTable {
    pub num_cosets: usize,
    pub ngens: usize,
    /// `action[coset * 2 * ngens + column]`, column = 2*gen + (inverse as usize).
    pub action: Vec<u32>,
    pub subgroup_gens: Vec<Word>,
    pub complete: bool,
}

impl CosetTable {
    pub fn act(&self, coset: usize, l: Letter) -> usize {
        self.action[coset * 2 * self.ngens + col(l)] as usize
    }

    pub fn act_word(&self, coset: usize, w: &Word) -> usize {
        w.0.iter().fold(coset, |c, &l| self.act(c, l))
    }
}

struct Enumerator {
    ncols: usize,
    table: Vec<u32>,
    /// Union-find parent; `forward[c] == c` for live cosets.
    forward: Vec<u32>,
    next: Vec<u32>,
    prev: Vec<u32>,
    last: u32,
    live: usize,
    cap: usize,
    queue: VecDeque<(u32, u32)>,
}

impl Enumerator {
    fn new(ngens: usize, cap: usize) -> Self {
        let ncols = 2 * ngens;
        Enumerator {
            ncols,
            table: vec![UNDEF; ncols],
            forward: vec![0],
            next: vec![UNDEF],
            prev: vec![UNDEF],
            last: 0,
            live: 1,
            cap,
            queue: VecDeque::new(),
        }
    }

    #[inline]
    fn get(&self, c: u32, x: usize) -> u32 {
        self.table[c as usize * self.ncols + x]
    }

    #[inline]
    fn set(&mut self, c: u32, x: usize, v: u32) {
        self.table[c as usize * self.ncols + x] = v;
    }

    fn is_live(&self, c: u32) -> bool {
        self.forward[c as usize] == c
    }

    fn define(&mut self, c: u32, x: usize) -> bool {
        if self.live >= self.cap {
            return false;
        }
        let d = self.forward.len() as u32;
        self.table.extend(std::iter::repeat(UNDEF).take(self.ncols));
        self.forward.push(d);
        self.next.push(UNDEF);
        self.prev.push(self.last);
        self.next[self.last as usize] = d;
        self.last = d;
        self.live += 1;
        self.set(c, x, d);
        self.set(d, inv_col(x), c);
        true
    }

    fn rep(&mut self, c: u32) -> u32 {
        let mut r = c;
        while self.forward[r as usize] != r {
            r = self.forward[r as usize];
        }
        let mut c = c;
        while self.forward[c as usize] != r {
            let n = self.forward[c as usize];
            self.forward[c as usize] = r;
            c = n;
        }
        r
    }

    fn merge(&mut self, a: u32, b: u32) {
        let a = self.rep(a);
        let b = self.rep(b);
        if a == b {
            return;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.forward[hi as usize] = lo;
        // unlink hi
        let p = self.prev[hi as usize];
        let n = self.next[hi as usize];
        if p != UNDEF {
            self.next[p as usize] = n;
        }
        if n != UNDEF {
            self.prev[n as usize] = p;
        } else {
            self.last = p;
        }
        self.live -= 1;
        self.queue.push_back((hi, lo));
    }

    fn coincidence(&mut self, a: u32, b: u32) {
        self.merge(a, b);
        while let Some((dead, _)) = self.queue.pop_front() {
            for x in 0..self.ncols {
                let e = self.get(dead, x);
                if e == UNDEF {
                    continue;
                }
                // remove the back pointer from e
                if self.get(e, inv_col(x)) == dead {
                    self.set(e, inv_col(x), UNDEF);
                }
                let c1 = self.rep(dead);
                let e1 = self.rep(e);
                let cur = self.get(c1, x);
                if cur != UNDEF {
                    self.merge(e1, cur);
                } else {
                    let back = self.get(e1, inv_col(x));
                    if back != UNDEF {
                        self.merge(c1, back);
                    } else {
                        self.set(c1, x, e1);
                        self.set(e1, inv_col(x), c1);
                    }
                }
            }
        }
    }

    /// Scan `w` at `c`, filling deductions; if `define` is set, define missing cosets.
    fn scan(&mut self, c: u32, w: &[usize], define: bool) -> bool {
        if w.is_empty() {
            return true;
        }
        let mut f = c;
        let mut i = 0usize;
        let mut b = c;
        let mut j = w.len();
        loop {
            while i < j {
                let n = self.get(f, w[i]);
                if n == UNDEF {
                    break;
                }
                f = n;
                i += 1;
            }
            if i == j {
                if f != b {
                    self.coincidence(f, b);
                }
                return true;
            }
            while j > i {
                let n = self.get(b, inv_col(w[j - 1]));
                if n == UNDEF {
                    break;
                }
                b = n;
                j -= 1;
            }
            if j < i {
                self.coincidence(f, b);
                return true;
            } else if j == i + 1 {
                self.set(f, w[i], b);
                self.set(b, inv_col(w[i]), f);
                return true;
            } else if j == i {
                if f != b {
                    self.coincidence(f, b);
                }
                return true;
            } else if define {
                if !self.define(f, w[i]) {
                    return false;
                }
            } else {
                return true;
            }
        }
    }

    fn lookahead(&mut self, rels: &[Vec<usize>]) {
        let mut c = 0u32;
        while c != UNDEF {
            for r in rels {
                if !self.is_live(c) {
                    break;
                }
                self.scan(c, r, false);
            }
            c = if self.is_live(c) { self.next[c as usize] } else { self.next_live_after(c) };
        }
    }

    fn next_live_after(&mut self, c: u32) -> u32 {
        let mut d = c + 1;
        while (d as usize) < self.forward.len() {
            if self.is_live(d) {
                return d;
            }
            d += 1;
        }
        UNDEF
    }
}

fn word_cols(w: &Word) -> Vec<usize> {
    w.0.iter().map(|&l| col(l)).collect()
}

/// HLT coset enumeration with lookahead; table standardized breadth-first.
pub fn todd_coxeter(p: &Presentation, sub_gens: &[Word], cap: usize) -> Result<CosetTable, FiniteError> {
    let cap = cap.max(1);
    let ngens = p.ngens();
    let rels: Vec<Vec<usize>> = p.relators.iter().map(word_cols).collect();
    let subs: Vec<Vec<usize>> = sub_gens.iter().map(word_cols).collect();
    let mut e = Enumerator::new(ngens, cap);
    let run = |e: &mut Enumerator, c: u32, w: &[usize]| -> Result<(), FiniteError> {
        if e.scan(c, w, true) {
            return Ok(());
        }
        e.lookahead(&rels);
        if e.live >= e.cap {
            return Err(FiniteError::CapExceeded(cap));
        }
        if e.is_live(c) && !e.scan(c, w, true) {
            return Err(FiniteError::CapExceeded(cap));
        }
        Ok(())
    };
    for s in &subs {
        run(&mut e, 0, s)?;
    }
    let mut c = 0u32;
    while c != UNDEF {
        for r in &rels {
            if !e.is_live(c) {
                break;
            }
            run(&mut e, c, r)?;
        }
        if e.is_live(c) {
            for x in 0..e.ncols {
                if !e.is_live(c) {
                    break;
                }
                if e.get(c, x) == UNDEF {
                    if !e.define(c, x) {
                        e.lookahead(&rels);
                        if e.live >= e.cap {
                            return Err(FiniteError::CapExceeded(cap));
                        }
                        if e.is_live(c) && e.get(c, x) == UNDEF && !e.define(c, x) {
                            return Err(FiniteError::CapExceeded(cap));
                        }
                    }
                }
            }
        }
        c = if e.is_live(c) { e.next[c as usize] } else { e.next_live_after(c) };
    }
    // standardize
    let ncols = e.ncols;
    let mut order: Vec<u32> = Vec::with_capacity(e.live);
    let mut newid = vec![UNDEF; e.forward.len()];
    newid[0] = 0;
    order.push(0);
    let mut k = 0;
    while k < order.len() {
        let c = order[k];
        for x in 0..ncols {
            let d = e.rep(e.get(c, x));
            if newid[d as usize] == UNDEF {
                newid[d as usize] = order.len() as u32;
                order.push(d);
            }
        }
        k += 1;
    }
    let n = order.len();
    let mut action = vec![0u32; n * ncols];
    for (i, &c) in order.iter().enumerate() {
        for x in 0..ncols {
            let d = e.rep(e.get(c, x));
            action[i * ncols + x] = newid[d as usize];
        }
    }
    Ok(CosetTable { num_cosets: n, ngens, action, subgroup_gens: sub_gens.to_vec(), complete: true })
}

/// Element-index set over a finite group.
pub type ElementSet = FixedBitSet;

/// Regular representation of a finite group.
#[derive(Debug)]
pub struct FiniteGroup {
    pub presentation: Presentation,
    order: usize,
    /// Right action of each generator: `perm[g][x] = x * g`.
    perm: Vec<Vec<u32>>,
    perm_inv: Vec<Vec<u32>>,
    /// Positive word (generator indices) per element, breadth-first shortest.
    words: Vec<Vec<u32>>,
    inverse: Vec<u32>,
    cayley: Option<Vec<u32>>,
}

impl FiniteGroup {
    pub fn from_presentation(p: &Presentation, cap: usize) -> Result<FiniteGroup, FiniteError> {
        let t = todd_coxeter(p, &[], cap)?;
        let ng = p.ngens();
        let perm: Vec<Vec<u32>> = (0..ng).map(|g| (0..t.num_cosets).map(|x| t.act(x, Letter::pos(g)) as u32).collect()).collect();
        let perm_inv: Vec<Vec<u32>> = (0..ng).map(|g| (0..t.num_cosets).map(|x| t.act(x, Letter::neg(g)) as u32).collect()).collect();
        Ok(Self::from_permutations(p.clone(), perm, perm_inv))
    }

    fn from_permutations(presentation: Presentation, perm: Vec<Vec<u32>>, perm_inv: Vec<Vec<u32>>) -> FiniteGroup {
        let order = perm.first().map_or(1, |p| p.len());
        let ng = perm.len();
        let mut words: Vec<Option<Vec<u32>>> = vec![None; order];
        words[0] = Some(Vec::new());
        let mut queue = VecDeque::from([0u32]);
        while let Some(x) = queue.pop_front() {
            for g in 0..ng {
                let y = perm[g][x as usize];
                if words[y as usize].is_none() {
                    let mut w = words[x as usize].clone().unwrap();
                    w.push(g as u32);
                    words[y as usize] = Some(w);
                    queue.push_back(y);
                }
            }
        }
        let words: Vec<Vec<u32>> = words.into_iter().map(|w| w.expect("generators act transitively")).collect();
        let mut grp = FiniteGroup { presentation, order, perm, perm_inv, words, inverse: Vec::new(), cayley: None };
        grp.inverse = (0..order)
            .map(|x| grp.words[x].iter().rev().fold(0u32, |acc, &g| grp.perm_inv[g as usize][acc as usize]))
            .collect();
        if order <= CAYLEY_LIMIT {
            let mut table = vec![0u32; order * order];
            for a in 0..order {
                for b in 0..order {
                    table[a * order + b] = grp.walk(a as u32, b as u32);
                }
            }
            grp.cayley = Some(table);
        }
        grp
    }

    /// Abstract group on the elements of a subgroup, generated by `gens` (elements of `parent`).
    pub fn from_subgroup(parent: &FiniteGroup, elements: &ElementSet, gens: &[u32], gen_names: Vec<String>) -> FiniteGroup {
        let elems: Vec<usize> = elements.ones().collect();
        let mut index = vec![u32::MAX; parent.order()];
        for (i, &e) in elems.iter().enumerate() {
            index[e] = i as u32;
        }
        let perm: Vec<Vec<u32>> = gens.iter().map(|&g| elems.iter().map(|&x| index[parent.mul(x as u32, g) as usize]).collect()).collect();
        let perm_inv: Vec<Vec<u32>> = gens.iter().map(|&g| elems.iter().map(|&x| index[parent.mul(x as u32, parent.inv(g)) as usize]).collect()).collect();
        let pres = Presentation { name: "H".into(), generators: gen_names, relators: Vec::new(), asserted: Vec::new() };
        Self::from_permutations(pres, perm, perm_inv)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn ngens(&self) -> usize {
        self.perm.len()
    }

    pub fn identity(&self) -> u32 {
        0
    }

    fn walk(&self, a: u32, b: u32) -> u32 {
        self.words[b as usize].iter().fold(a, |x, &g| self.perm[g as usize][x as usize])
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match &self.cayley {
            Some(t) => t[a as usize * self.order + b as usize],
            None => self.walk(a, b),
        }
    }

    #[inline]
    pub fn inv(&self, a: u32) -> u32 {
        self.inverse[a as usize]
    }

    pub fn mul_letter(&self, a: u32, l: Letter) -> u32 {
        if l.inv {
            self.perm_inv[l.index()][a as usize]
        } else {
            self.perm[l.index()][a as usize]
        }
    }

    pub fn eval(&self, w: &Word) -> u32 {
        w.0.iter().fold(0, |x, &l| self.mul_letter(x, l))
    }

    /// Shortest positive word for an element.
    pub fn word_of(&self, x: u32) -> Word {
        Word(self.words[x as usize].iter().map(|&g| Letter::pos(g as usize)).collect())
    }

    pub fn relators_hold(&self) -> bool {
        self.presentation.relators.iter().all(|r| (0..self.order as u32).all(|x| r.0.iter().fold(x, |y, &l| self.mul_letter(y, l)) == x))
    }

    pub fn empty_set(&self) -> ElementSet {
        FixedBitSet::with_capacity(self.order)
    }

    pub fn whole(&self) -> ElementSet {
        let mut s = self.empty_set();
        s.insert_range(..);
        s
    }

    pub fn singleton(&self, x: u32) -> ElementSet {
        let mut s = self.empty_set();
        s.insert(x as usize);
        s
    }

    /// Subgroup generated by element indices.
    pub fn closure(&self, gens: &[u32]) -> ElementSet {
        let mut s = self.singleton(0);
        let gens: Vec<u32> = gens.iter().copied().filter(|&g| g != 0).collect();
        let mut queue = VecDeque::from([0u32]);
        while let Some(x) = queue.pop_front() {
            for &g in &gens {
                let y = self.mul(x, g);
                if !s.put(y as usize) {
                    queue.push_back(y);
                }
            }
        }
        s
    }

    pub fn subgroup_from_words(&self, words: &[Word]) -> ElementSet {
        let gens: Vec<u32> = words.iter().map(|w| self.eval(w)).collect();
        self.closure(&gens)
    }

    pub fn join(&self, a: &ElementSet, b: &ElementSet) -> ElementSet {
        let gens: Vec<u32> = a.ones().chain(b.ones()).map(|x| x as u32).collect();
        self.closure_of_set(&gens)
    }

    /// Closure of a (possibly large) generating set, adding only new generators.
    pub fn closure_of_set(&self, gens: &[u32]) -> ElementSet {
        let mut s = self.singleton(0);
        let mut used: Vec<u32> = Vec::new();
        for &g in gens {
            if s.contains(g as usize) {
                continue;
            }
            used.push(g);
            // re-close with the enlarged generator list
            let mut queue: VecDeque<u32> = s.ones().map(|x| x as u32).collect();
            while let Some(x) = queue.pop_front() {
                for &h in &used {
                    let y = self.mul(x, h);
                    if !s.put(y as usize) {
                        queue.push_back(y);
                    }
                }
            }
        }
        s
    }

    pub fn is_subgroup(&self, s: &ElementSet) -> bool {
        if !s.contains(0) {
            return false;
        }
        let elems: Vec<u32> = s.ones().map(|x| x as u32).collect();
        elems.iter().all(|&a| elems.iter().all(|&b| s.contains(self.mul(a, b) as usize)))
    }

    /// Left coset ids for a subgroup, numbered by smallest element.
    pub fn left_coset_ids(&self, h: &ElementSet) -> (Vec<u32>, usize) {
        let mut ids = vec![u32::MAX; self.order];
        let hs: Vec<u32> = h.ones().map(|x| x as u32).collect();
        let mut next = 0u32;
        for g in 0..self.order as u32 {
            if ids[g as usize] == u32::MAX {
                for &x in &hs {
                    ids[self.mul(g, x) as usize] = next;
                }
                next += 1;
            }
        }
        (ids, next as usize)
    }

    /// Right coset ids `H g`, numbered by smallest element.
    pub fn right_coset_ids(&self, h: &ElementSet) -> (Vec<u32>, usize) {
        let mut ids = vec![u32::MAX; self.order];
        let hs: Vec<u32> = h.ones().map(|x| x as u32).collect();
        let mut next = 0u32;
        for g in 0..self.order as u32 {
            if ids[g as usize] == u32::MAX {
                for &x in &hs {
                    ids[self.mul(x, g) as usize] = next;
                }
                next += 1;
            }
        }
        (ids, next as usize)
    }

    /// `{xy : x in X, y in Y}`.
    pub fn product(&self, x: &ElementSet, y: &ElementSet) -> ElementSet {
        let mut out = self.empty_set();
        let ys: Vec<u32> = y.ones().map(|e| e as u32).collect();
        let xs: Vec<u32> = x.ones().map(|e| e as u32).collect();
        if xs.len() * ys.len() > 4 * self.order && self.is_subgroup(y) {
            let (ids, n) = self.left_coset_ids(y);
            let mut hit = vec![false; n];
            for &a in &xs {
                hit[ids[a as usize] as usize] = true;
            }
            for g in 0..self.order {
                if hit[ids[g] as usize] {
                    out.insert(g);
                }
            }
            return out;
        }
        for &a in &xs {
            for &b in &ys {
                out.insert(self.mul(a, b) as usize);
            }
        }
        out
    }

    pub fn left_coset(&self, g: u32, h: &ElementSet) -> ElementSet {
        let mut out = self.empty_set();
        for x in h.ones() {
            out.insert(self.mul(g, x as u32) as usize);
        }
        out
    }

    pub fn index(&self, big: &ElementSet, small: &ElementSet) -> Result<usize, FiniteError> {
        if !self.is_subgroup(big) || !self.is_subgroup(small) || !small.is_subset(big) {
            return Err(FiniteError::NotASubgroup);
        }
        Ok(big.count_ones(..) / small.count_ones(..))
    }

    pub fn normal_closure(&self, s: &ElementSet) -> Result<ElementSet, FiniteError> {
        if !s.contains(0) {
            return Err(FiniteError::NotASubgroup);
        }
        let mut cur = self.closure_of_set(&s.ones().map(|x| x as u32).collect::<Vec<_>>());
        loop {
            let mut extra = Vec::new();
            for g in 0..self.ngens() {
                let ge = self.perm[g][0];
                for h in cur.ones() {
                    let c = self.mul(self.mul(self.inv(ge), h as u32), ge);
                    if !cur.contains(c as usize) {
                        extra.push(c);
                    }
                }
            }
            if extra.is_empty() {
                return Ok(cur);
            }
            let gens: Vec<u32> = cur.ones().map(|x| x as u32).chain(extra).collect();
            cur = self.closure_of_set(&gens);
        }
    }

    /// Generator element for each presentation generator.
    pub fn generator(&self, g: usize) -> u32 {
        self.perm[g][0]
    }

    /// A small generating list for a subgroup (greedy).
    pub fn generators_of(&self, s: &ElementSet) -> Vec<u32> {
        let mut gens = Vec::new();
        let mut cur = self.singleton(0);
        for x in s.ones() {
            if !cur.contains(x) {
                gens.push(x as u32);
                cur = self.closure(&gens);
            }
        }
        gens
    }
}

pub type SharedGroup = Arc<FiniteGroup>;

/// Homomorphism from the subgroup generated by `src_gens` to `tgt`, if generator images extend consistently.
/// Returns pairs (element, image) indexed by source element (u32::MAX where undefined).
pub fn extend_homomorphism(src: &FiniteGroup, src_gens: &[u32], tgt: &FiniteGroup, images: &[u32]) -> Option<Vec<u32>> {
    let mut f = vec![u32::MAX; src.order()];
    f[0] = 0;
    let mut queue = VecDeque::from([0u32]);
    while let Some(x) = queue.pop_front() {
        for (k, &g) in src_gens.iter().enumerate() {
            let y = src.mul(x, g);
            let fy = tgt.mul(f[x as usize], images[k]);
            if f[y as usize] == u32::MAX {
                f[y as usize] = fy;
                queue.push_back(y);
            } else if f[y as usize] != fy {
                return None;
            }
        }
    }
    Some(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::{parse_diagram, parse_presentation, shephard_presentation};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn dihedral(n: usize) -> Presentation {
        parse_presentation(&format!("gens a b\nrel a^2\nrel b^2\nrel (a b)^{n}")).unwrap()
    }

    fn a3() -> Presentation {
        shephard_presentation(&parse_diagram("vertex a1\nvertex a2\nvertex a3\nedge a1 a2 3\nedge a2 a3 3\n").unwrap())
    }

    /// Oracle: closure of explicit permutations by brute force.
    fn perm_closure(gens: &[Vec<usize>]) -> usize {
        let n = gens[0].len();
        let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut stack = vec![(0..n).collect::<Vec<_>>()];
        while let Some(p) = stack.pop() {
            if seen.insert(p.clone()) {
                for g in gens {
                    stack.push(p.iter().map(|&i| g[i]).collect());
                }
            }
        }
        seen.len()
    }

    #[test]
    fn enumeration_counts() {
        let c5 = parse_presentation("gens a\nrel a^5").unwrap();
        assert_eq!(todd_coxeter(&c5, &[], 100).unwrap().num_cosets, 5);
        let s4 = perm_closure(&[vec![1, 0, 2, 3], vec![0, 2, 1, 3], vec![0, 1, 3, 2]]);
        assert_eq!(todd_coxeter(&a3(), &[], 1000).unwrap().num_cosets, s4);
        let d3 = dihedral(3);
        let t = todd_coxeter(&d3, &[d3.word("a").unwrap()], 100).unwrap();
        assert_eq!(t.num_cosets, FiniteGroup::from_presentation(&d3, 100).unwrap().order() / 2);
        let free = parse_presentation("gens a b").unwrap();
        assert_eq!(todd_coxeter(&free, &[], 500), Err(FiniteError::CapExceeded(500)));
    }

    #[test]
    fn groups_and_subgroups() {
        for n in 2..9 {
            assert_eq!(FiniteGroup::from_presentation(&dihedral(n), 1000).unwrap().order(), 2 * n);
        }
        let triv = parse_presentation("group T").unwrap();
        assert_eq!(FiniteGroup::from_presentation(&triv, 10).unwrap().order(), 1);
        let g = FiniteGroup::from_presentation(&a3(), 1000).unwrap();
        assert!(g.relators_hold());
        let p = &g.presentation;
        let h = g.subgroup_from_words(&[p.word("a2").unwrap(), p.word("a3").unwrap()]);
        assert_eq!(h.count_ones(..), 6);
        assert_eq!(g.subgroup_from_words(&[]).count_ones(..), 1);
        assert_eq!(g.subgroup_from_words(&[p.word("a1").unwrap(), p.word("a2").unwrap(), p.word("a3").unwrap()]), g.whole());
        assert_eq!(g.index(&g.whole(), &h).unwrap(), 4);
    }

    #[test]
    fn klein_product_inequality() {
        let v = parse_presentation("gens x y z\nrel x^2\nrel y^2\nrel z^-1 x y\nrel x y x^-1 y^-1").unwrap();
        let g = FiniteGroup::from_presentation(&v, 100).unwrap();
        let sx = g.subgroup_from_words(&[v.word("x").unwrap()]);
        let sy = g.subgroup_from_words(&[v.word("y").unwrap()]);
        let sz = g.subgroup_from_words(&[v.word("z").unwrap()]);
        let mut lhs = g.product(&sx, &sz);
        lhs.intersect_with(&g.product(&sy, &sz));
        assert_eq!(lhs, g.whole());
        let mut meet = sx.clone();
        meet.intersect_with(&sy);
        assert_eq!(g.product(&meet, &sz), sz);
    }

    #[test]
    fn index_rejects_non_subgroups() {
        let g = FiniteGroup::from_presentation(&dihedral(3), 100).unwrap();
        let mut s = g.singleton(0);
        s.insert(g.generator(0) as usize);
        s.insert(g.generator(1) as usize);
        assert_eq!(g.index(&g.whole(), &s), Err(FiniteError::NotASubgroup));
        assert_eq!(g.normal_closure(&g.singleton(1)).err(), Some(FiniteError::NotASubgroup));
        let a = g.closure(&[g.generator(0)]);
        assert_eq!(g.normal_closure(&a).unwrap(), g.whole());
    }

    #[test]
    fn deterministic_tables() {
        let p = a3();
        let sub = [p.word("a1 a2").unwrap()];
        assert_eq!(todd_coxeter(&p, &sub, 1000).unwrap(), todd_coxeter(&p, &sub, 1000).unwrap());
    }

    #[test]
    fn product_formula_exhaustive() {
        let b3 = shephard_presentation(&parse_diagram("vertex a\nvertex b\nvertex c\nedge a b 4\nedge b c 3\n").unwrap());
        let g = FiniteGroup::from_presentation(&b3, 1000).unwrap();
        assert_eq!(g.order(), 48);
        let p = &g.presentation;
        let subs: Vec<ElementSet> = ["a", "b", "c", "a b", "b c", "a c", "a b c"]
            .iter()
            .map(|s| {
                let ws: Vec<Word> = s.split(' ').map(|t| p.word(t).unwrap()).collect();
                g.subgroup_from_words(&ws)
            })
            .collect();
        for x in &subs {
            for y in &subs {
                let mut m = x.clone();
                m.intersect_with(y);
                assert_eq!(g.product(x, y).count_ones(..) * m.count_ones(..), x.count_ones(..) * y.count_ones(..));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn dihedral_order_matches_permutations(n in 2usize..12) {
            let g = FiniteGroup::from_presentation(&dihedral(n), 1000).unwrap();
            // reflections of the n-gon: i -> -i and i -> 1 - i
            let r1: Vec<usize> = (0..n).map(|i| (n - i) % n).collect();
            let r2: Vec<usize> = (0..n).map(|i| (n + 1 - i) % n).collect();
            let expect = if n == 2 { 4 } else { perm_closure(&[r1, r2]) };
            prop_assert_eq!(g.order(), expect);
            prop_assert!(g.relators_hold());
            for x in 0..g.order() as u32 {
                prop_assert_eq!(g.mul(x, g.inv(x)), 0);
                prop_assert_eq!(g.eval(&g.word_of(x)), x);
            }
        }
    }
}
