//! Deterministic canonical form for relator sets.
//!
//! Pure power relators fix generator orders and commutator relators fix commuting
//! pairs. Every other relator is rewritten in the graph product those define
//! (cyclic vertex groups with partial commutation), brought to a cyclic lex-minimal
//! representative, and the whole list is sorted shortlex. All rewriting is modulo
//! relators already present, so the presented group never changes.

use std::collections::BTreeSet;

use num_integer::Integer;

use crate::presentation::{cyclic_reduce, free_reduce, shephard_presentation, Label, LabeledDiagram, Letter, Presentation, Word};

#[derive(Clone, Debug)]
struct Basis {
    /// 0 means infinite order.
    orders: Vec<u64>,
    commute: Vec<Vec<bool>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Syllable {
    gen: usize,
    exp: i64,
}

fn syllables(w: &Word) -> Vec<Syllable> {
    let mut out: Vec<Syllable> = Vec::new();
    for l in &w.0 {
        let e = if l.inv { -1 } else { 1 };
        match out.last_mut() {
            Some(s) if s.gen == l.index() => s.exp += e,
            _ => out.push(Syllable { gen: l.index(), exp: e }),
        }
    }
    out.retain(|s| s.exp != 0);
    out
}

fn expand(s: &[Syllable]) -> Word {
    let mut v = Vec::new();
    for syl in s {
        let l = Letter { gen: syl.gen as u32, inv: syl.exp < 0 };
        for _ in 0..syl.exp.unsigned_abs() {
            v.push(l);
        }
    }
    Word(v)
}

impl Basis {
    fn reduce_exp(&self, gen: usize, e: i64) -> i64 {
        let m = self.orders[gen] as i64;
        if m == 0 {
            return e;
        }
        let r = e.mod_floor(&m);
        if 2 * r > m {
            r - m
        } else {
            r
        }
    }

    fn commutes(&self, a: usize, b: usize) -> bool {
        a != b && self.commute[a][b]
    }

    /// Shuffle-and-merge normal form in the graph product.
    fn normalize(&self, w: &Word) -> Vec<Syllable> {
        let mut s: Vec<Syllable> = syllables(&free_reduce(w))
            .into_iter()
            .map(|x| Syllable { gen: x.gen, exp: self.reduce_exp(x.gen, x.exp) })
            .filter(|x| x.exp != 0)
            .collect();
        'outer: loop {
            for j in 0..s.len() {
                for i in (0..j).rev() {
                    if s[i].gen == s[j].gen {
                        let e = self.reduce_exp(s[i].gen, s[i].exp + s[j].exp);
                        s.remove(j);
                        if e == 0 {
                            s.remove(i);
                        } else {
                            s[i].exp = e;
                        }
                        continue 'outer;
                    }
                    if !self.commutes(s[i].gen, s[j].gen) {
                        break;
                    }
                }
            }
            break;
        }
        // lex-minimal linearization: repeatedly take the smallest syllable that can move to the front
        let mut out = Vec::with_capacity(s.len());
        while !s.is_empty() {
            let mut best: Option<usize> = None;
            for j in 0..s.len() {
                let movable = (0..j).all(|i| self.commutes(s[i].gen, s[j].gen));
                if movable && best.map_or(true, |b| syl_key(s[j]) < syl_key(s[b])) {
                    best = Some(j);
                }
            }
            let b = best.expect("first syllable is always movable");
            out.push(s.remove(b));
        }
        out
    }

    fn cyclic_canonical(&self, w: &Word) -> Word {
        let start = expand(&self.normalize(w));
        let mut best_len = start.len();
        let mut found: BTreeSet<Word> = BTreeSet::from([start.clone()]);
        let mut frontier = vec![start];
        while let Some(cur) = frontier.pop() {
            if cur.len() > best_len {
                continue;
            }
            let inv = cur.inverse();
            for base in [&cur, &inv] {
                for k in 0..base.len().max(1) {
                    let cand = expand(&self.normalize(&base.rotate(k)));
                    if cand.len() < best_len {
                        best_len = cand.len();
                        found.clear();
                        found.insert(cand.clone());
                        frontier.clear();
                        frontier.push(cand);
                    } else if cand.len() == best_len && found.insert(cand.clone()) {
                        frontier.push(cand);
                    }
                }
            }
        }
        found.into_iter().find(|w| w.len() == best_len).unwrap_or_default()
    }
}

fn syl_key(s: Syllable) -> (usize, bool, u64) {
    (s.gen, s.exp < 0, s.exp.unsigned_abs())
}

/// Commuting pair encoded by a relator `x^a y^b x^-a y^-b` with unit exponents.
fn commuting_pair(b: &Basis, r: &Word) -> Option<(usize, usize)> {
    let s: Vec<Syllable> = syllables(&cyclic_reduce(r))
        .into_iter()
        .map(|x| Syllable { gen: x.gen, exp: b.reduce_exp(x.gen, x.exp) })
        .collect();
    if s.len() != 4 || s[0].gen != s[2].gen || s[1].gen != s[3].gen || s[0].gen == s[1].gen {
        return None;
    }
    let unit = |g: usize, e: i64| e.abs() == 1 || (b.orders[g] == 2 && e == 1);
    if !unit(s[0].gen, s[0].exp) || !unit(s[1].gen, s[1].exp) {
        return None;
    }
    let cancels = |g: usize, e1: i64, e2: i64| b.reduce_exp(g, e1 + e2) == 0;
    if cancels(s[0].gen, s[0].exp, s[2].exp) && cancels(s[1].gen, s[1].exp, s[3].exp) {
        Some((s[0].gen.min(s[1].gen), s[0].gen.max(s[1].gen)))
    } else {
        None
    }
}

fn detect_basis(p: &Presentation) -> Basis {
    let n = p.ngens();
    let mut b = Basis { orders: vec![0; n], commute: vec![vec![false; n]; n] };
    for r in &p.relators {
        let c = cyclic_reduce(r);
        let gens = c.generators_used();
        if gens.len() == 1 {
            let g = *gens.iter().next().unwrap();
            let e: i64 = c.exponent_sums(n)[g];
            if e != 0 && c.len() as u64 == e.unsigned_abs() {
                b.orders[g] = b.orders[g].gcd(&e.unsigned_abs());
            }
        }
    }
    for r in &p.relators {
        if let Some((x, y)) = commuting_pair(&b, r) {
            b.commute[x][y] = true;
            b.commute[y][x] = true;
        }
    }
    b
}

/// Canonical relator list: basis relators, then rewritten remaining relators, sorted.
pub fn canonical_relators(p: &Presentation) -> Vec<Word> {
    let b = detect_basis(p);
    let n = p.ngens();
    let mut out: BTreeSet<Word> = BTreeSet::new();
    for g in 0..n {
        if b.orders[g] == 1 {
            out.insert(Word::gen(g));
        } else if b.orders[g] > 1 {
            out.insert(Word::gen(g).pow(b.orders[g] as i64));
        }
    }
    for x in 0..n {
        for y in (x + 1)..n {
            if b.commute[x][y] {
                let xi = if b.orders[x] == 2 { Letter::pos(x) } else { Letter::neg(x) };
                let yi = if b.orders[y] == 2 { Letter::pos(y) } else { Letter::neg(y) };
                out.insert(Word(vec![Letter::pos(x), Letter::pos(y), xi, yi]));
            }
        }
    }
    for r in &p.relators {
        let c = b.cyclic_canonical(r);
        if !c.is_empty() && commuting_pair(&b, &c).is_none() {
            out.insert(c);
        }
    }
    out.into_iter().collect()
}

/// Canonical text of a presentation: generator line plus one relator per line.
pub fn canonical_text(p: &Presentation) -> String {
    let mut s = format!("gens {}\n", p.generators.join(" "));
    for r in canonical_relators(p) {
        s.push_str(&format!("rel {}\n", p.render(&r)));
    }
    s
}

/// The labeled diagram whose Shephard presentation has the same canonical form, if any.
pub fn recognize_diagram(p: &Presentation) -> Option<LabeledDiagram> {
    let n = p.ngens();
    let names: Vec<&str> = p.generators.iter().map(String::as_str).collect();
    let mut d = LabeledDiagram::new(&p.name, &names);
    for v in 0..n {
        d.loops.insert(v, Label::Infinite);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            d.edges.insert((a, b), Label::Infinite);
        }
    }
    for r in &p.relators {
        let c = cyclic_reduce(r);
        let gens: Vec<usize> = c.generators_used().into_iter().collect();
        match gens.as_slice() {
            [g] => {
                let m = c.exponent_sums(n)[*g].unsigned_abs() as u32;
                if m as usize == c.len() && m >= 1 {
                    d.set_loop(*g, Label::Finite(m.max(2)));
                }
            }
            [a, b] if c.len() % 2 == 0 && c.len() >= 4 => {
                d.set_edge(*a, *b, Label::Finite((c.len() / 2) as u32));
            }
            _ => {}
        }
    }
    (canonical_text(&shephard_presentation(&d)) == canonical_text(p)).then_some(d)
}
