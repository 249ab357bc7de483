//! Independent word-problem oracle for the structured fixture groups.
//!
//! Each fixture group gets seeded random permutation representations: every finite factor acts
//! freely on its own points by right multiplication, and the gluing permutation is a random
//! equivariant bijection between free orbits of the amalgamated (or associated) subgroups. Equal
//! words always have equal images; unequal words are separated with overwhelming probability.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::sync::Arc;

use cosetkit::finite::FiniteGroup;
use cosetkit::presentation::{parse_presentation, Letter, Word};
use cosetkit::structured::{AmalgamGroup, FreeProductGroup, GroupHandle, HnnGroup};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Perm = Vec<u32>;

pub fn finite(text: &str) -> Arc<FiniteGroup> {
    Arc::new(FiniteGroup::from_presentation(&parse_presentation(text).expect("fixture parses"), 100_000).expect("fixture enumerates"))
}

pub const A5_TEXT: &str = "group A5\ngens a1 a2 a3 a4 a5\nrel a1^2\nrel a2^2\nrel a3^2\nrel a4^2\nrel a5^2\nrel (a1 a2)^3\nrel (a2 a3)^3\nrel (a3 a4)^3\nrel (a4 a5)^3\nrel (a1 a3)^2\nrel (a1 a4)^2\nrel (a1 a5)^2\nrel (a2 a4)^2\nrel (a2 a5)^2\nrel (a3 a5)^2";

pub fn c2_free_c2() -> GroupHandle {
    let a = GroupHandle::Finite(finite("group A\ngens a\nrel a^2"));
    let b = GroupHandle::Finite(finite("group B\ngens b\nrel b^2"));
    GroupHandle::FreeProduct(Arc::new(FreeProductGroup::new(a, b).expect("free product")))
}

/// `D_3 *_{C_2} D_4` amalgamated along `a2 = b2`.
pub fn d3_amalgam_d4() -> GroupHandle {
    let a = finite("group D3\ngens a1 a2\nrel a1^2\nrel a2^2\nrel (a1 a2)^3");
    let b = finite("group D4\ngens b2 b3\nrel b2^2\nrel b3^2\nrel (b2 b3)^4");
    let (ca, cb) = (vec![a.presentation.word("a2").unwrap()], vec![b.presentation.word("b2").unwrap()]);
    GroupHandle::Amalgam(Arc::new(AmalgamGroup::new(a, b, ca, cb).expect("amalgam")))
}

/// Coxeter `A_5` extended by `t` with `t^-1 a2 t = a3`, `t^-1 a3 t = a4`.
pub fn a5_hnn() -> GroupHandle {
    let base = finite(A5_TEXT);
    let w = |s: &str| base.presentation.word(s).unwrap();
    GroupHandle::Hnn(Arc::new(HnnGroup::new(base.clone(), vec![w("a2"), w("a3")], vec![w("a3"), w("a4")], "t").expect("hnn")))
}

/// Right regular action of `g` on `copies` disjoint copies of itself, one permutation per generator.
fn regular(g: &FiniteGroup, copies: usize) -> Vec<Perm> {
    let n = g.order();
    (0..g.ngens())
        .map(|s| {
            let e = g.generator(s);
            (0..copies * n).map(|p| ((p / n) * n + g.mul((p % n) as u32, e) as usize) as u32).collect()
        })
        .collect()
}

fn compose_word(gens: &[Perm], w: &Word, points: usize) -> Perm {
    let inverses: Vec<Perm> = gens.iter().map(invert).collect();
    compose_with(gens, &inverses, w, points)
}

fn compose_with(gens: &[Perm], inverses: &[Perm], w: &Word, points: usize) -> Perm {
    let mut img: Perm = (0..points as u32).collect();
    for l in w.letters() {
        let p = if l.inv { &inverses[l.index()] } else { &gens[l.index()] };
        for x in img.iter_mut() {
            *x = p[*x as usize];
        }
    }
    img
}

fn invert(p: &Perm) -> Perm {
    let mut q = vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        q[j as usize] = i as u32;
    }
    q
}

fn orbits(gens: &[Perm], n: usize) -> Vec<Vec<u32>> {
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut orbit = vec![start as u32];
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for g in gens {
                let q = g[p] as usize;
                if !seen[q] {
                    seen[q] = true;
                    orbit.push(q as u32);
                    queue.push_back(q);
                }
            }
        }
        out.push(orbit);
    }
    out
}

/// A random bijection `T` with `T(x . src_i) = T(x) . tgt_i`, both actions free of the same size.
fn equivariant(src: &[Perm], tgt: &[Perm], n: usize, rng: &mut ChaCha8Rng) -> Perm {
    let from = orbits(src, n);
    let mut to = orbits(tgt, n);
    assert_eq!(from.len(), to.len(), "free actions of equal size");
    to.shuffle(rng);
    let mut t = vec![u32::MAX; n];
    for (orbit, target) in from.iter().zip(&to) {
        assert_eq!(orbit.len(), target.len(), "orbits must be free");
        let start = orbit[0] as usize;
        t[start] = target[rng.gen_range(0..target.len())];
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for (s, u) in src.iter().zip(tgt) {
                let (q, image) = (s[p] as usize, u[t[p] as usize]);
                if t[q] == u32::MAX {
                    t[q] = image;
                    queue.push_back(q);
                } else {
                    assert_eq!(t[q], image, "inconsistent equivariant map");
                }
            }
        }
    }
    t
}

/// A permutation representation of a fixture group: one permutation per presentation generator.
pub struct PermRep {
    pub points: usize,
    pub gens: Vec<Perm>,
    inverses: Vec<Perm>,
}

impl PermRep {
    fn new(points: usize, gens: Vec<Perm>) -> Self {
        let inverses = gens.iter().map(invert).collect();
        PermRep { points, gens, inverses }
    }

    pub fn image(&self, w: &Word) -> Perm {
        compose_with(&self.gens, &self.inverses, w, self.points)
    }

    pub fn is_identity(&self, w: &Word) -> bool {
        self.image(w).iter().enumerate().all(|(i, &j)| i as u32 == j)
    }
}

fn eval_words(gens: &[Perm], words: &[Word], n: usize) -> Vec<Perm> {
    words.iter().map(|w| compose_word(gens, w, n)).collect()
}

/// Transport a right action on `X2` to `X1` along `t: X1 -> X2`.
fn transport(gens: &[Perm], t: &Perm) -> Vec<Perm> {
    let back = invert(t);
    gens.iter().map(|g| t.iter().map(|&y| back[g[y as usize] as usize]).collect()).collect()
}

/// Seeded random representation of a free product, amalgam or HNN fixture.
pub fn random_rep(group: &GroupHandle, seed: u64) -> PermRep {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match group {
        GroupHandle::FreeProduct(fp) => {
            let (a, b) = (fp.left.as_finite().unwrap(), fp.right.as_finite().unwrap());
            let n = 64 * a.order() * b.order();
            let left = regular(&a, n / a.order());
            let right = regular(&b, n / b.order());
            let t = equivariant(&[], &[], n, &mut rng);
            let mut gens = left;
            gens.extend(transport(&right, &t));
            PermRep::new(n, gens)
        }
        GroupHandle::Amalgam(am) => {
            let n = 16 * num_integer::lcm(am.left.order(), am.right.order());
            let left = regular(&am.left, n / am.left.order());
            let right = regular(&am.right, n / am.right.order());
            let t = equivariant(&eval_words(&left, &am.c_left_gens, n), &eval_words(&right, &am.c_right_gens, n), n, &mut rng);
            let mut gens = left;
            gens.extend(transport(&right, &t));
            PermRep::new(n, gens)
        }
        GroupHandle::Hnn(h) => {
            let n = h.base.order();
            let base = regular(&h.base, 1);
            let t = equivariant(&eval_words(&base, &h.a1_gens, n), &eval_words(&base, &h.a2_gens, n), n, &mut rng);
            let mut gens = base;
            gens.push(t);
            PermRep::new(n, gens)
        }
        other => panic!("no permutation oracle for {}", other.variant_name()),
    }
}

/// Words that must be trivial: the presentation relators plus the identifications of an amalgam.
pub fn identities(group: &GroupHandle) -> Vec<Word> {
    let p = group.presentation();
    let mut out = p.relators.clone();
    if let GroupHandle::Amalgam(am) = group {
        for (l, r) in am.c_left_gens.iter().zip(&am.c_right_gens) {
            let shifted = Word(r.letters().iter().map(|x| Letter { gen: x.gen + am.split as u32, inv: x.inv }).collect());
            out.push(l.concat(&shifted.inverse()));
        }
    }
    out
}

/// Several independent representations; equality means equal images in all of them.
pub struct Oracle {
    pub reps: Vec<PermRep>,
}

impl Oracle {
    pub fn new(group: &GroupHandle, seed: u64, count: usize) -> Self {
        let reps: Vec<PermRep> = (0..count as u64).map(|k| random_rep(group, seed.wrapping_add(k))).collect();
        for rep in &reps {
            for r in identities(group) {
                assert!(rep.is_identity(&r), "relator {} fails in the permutation oracle", group.presentation().render(&r));
            }
        }
        Oracle { reps }
    }

    pub fn equal(&self, u: &Word, v: &Word) -> bool {
        self.reps.iter().all(|r| r.image(u) == r.image(v))
    }

    pub fn trivial(&self, w: &Word) -> bool {
        self.reps.iter().all(|r| r.is_identity(w))
    }
}

pub fn random_word(rng: &mut ChaCha8Rng, ngens: usize, max_len: usize) -> Word {
    let len = rng.gen_range(0..=max_len);
    Word((0..len).map(|_| Letter { gen: rng.gen_range(0..ngens) as u32, inv: rng.gen_bool(0.5) }).collect())
}

/// `w` with a conjugated identity and a cancelling pair spliced in: equal to `w` by construction.
pub fn disguise(rng: &mut ChaCha8Rng, w: &Word, ids: &[Word], ngens: usize) -> Word {
    let mut letters = w.letters().to_vec();
    let r = ids[rng.gen_range(0..ids.len())].clone();
    let r = if rng.gen_bool(0.5) { r } else { r.inverse() };
    let u = random_word(rng, ngens, 3);
    let inserted = u.concat(&r).concat(&u.inverse());
    let at = rng.gen_range(0..=letters.len());
    letters.splice(at..at, inserted.letters().iter().copied());
    let g = rng.gen_range(0..ngens) as u32;
    let at = rng.gen_range(0..=letters.len());
    letters.splice(at..at, [Letter { gen: g, inv: false }, Letter { gen: g, inv: true }]);
    Word(letters)
}
