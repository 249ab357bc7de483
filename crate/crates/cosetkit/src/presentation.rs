//! Words, presentations, labeled diagrams and the syntactic transformations on them.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PresentationError {
    #[error("unknown generator `{0}`")]
    UnknownGenerator(String),
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("duplicate generator `{0}`")]
    DuplicateGenerator(String),
    #[error("improper labeling on edge {a}-{b}: odd label {label} joins loop orders {ma} and {mb}")]
    ImproperLabeling { a: String, b: String, label: u32, ma: String, mb: String },
    #[error("replacement word for `{0}` contains the eliminated generator")]
    ReplacementContainsEliminated(String),
    #[error("map is not generator-permuting: image of `{0}` is not a single generator")]
    NonPermutingMap(String),
    #[error("orbit exceeded {0} words")]
    OrbitCapExceeded(usize),
    #[error("permutation is not a diagram automorphism: {0}")]
    NotDiagramAutomorphism(String),
}

/// A generator reference with sign. Ordering puts positives before inverses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub gen: u32,
    pub inv: bool,
}

impl Letter {
    pub fn pos(gen: usize) -> Self {
        Letter { gen: gen as u32, inv: false }
    }

    pub fn neg(gen: usize) -> Self {
        Letter { gen: gen as u32, inv: true }
    }

    pub fn inverse(self) -> Self {
        Letter { gen: self.gen, inv: !self.inv }
    }

    pub fn index(self) -> usize {
        self.gen as usize
    }
}

/// A word over a generator list. Ordering is shortlex.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(pub Vec<Letter>);

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    pub fn gen(g: usize) -> Self {
        Word(vec![Letter::pos(g)])
    }

    pub fn from_signed(items: &[(usize, bool)]) -> Self {
        Word(items.iter().map(|&(g, inv)| Letter { gen: g as u32, inv }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn inverse(&self) -> Word {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        free_reduce(&Word(v))
    }

    /// Raw concatenation without reduction.
    pub fn join(parts: &[&Word]) -> Word {
        Word(parts.iter().flat_map(|w| w.0.iter().copied()).collect())
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut v = Vec::with_capacity(base.len() * k.unsigned_abs() as usize);
        for _ in 0..k.unsigned_abs() {
            v.extend_from_slice(&base.0);
        }
        free_reduce(&Word(v))
    }

    /// Alternating product `(ab)_m` of length m starting with `a`.
    pub fn alternating(a: Letter, b: Letter, m: usize) -> Word {
        Word((0..m).map(|i| if i % 2 == 0 { a } else { b }).collect())
    }

    pub fn is_single_generator(&self) -> Option<usize> {
        match self.0.as_slice() {
            [l] if !l.inv => Some(l.index()),
            _ => None,
        }
    }

    pub fn generators_used(&self) -> BTreeSet<usize> {
        self.0.iter().map(|l| l.index()).collect()
    }

    /// Rotation of the letters by `k` places to the left.
    pub fn rotate(&self, k: usize) -> Word {
        if self.0.is_empty() {
            return self.clone();
        }
        let k = k % self.0.len();
        let mut v = self.0[k..].to_vec();
        v.extend_from_slice(&self.0[..k]);
        Word(v)
    }

    /// Exponent sum per generator.
    pub fn exponent_sums(&self, ngens: usize) -> Vec<i64> {
        let mut s = vec![0i64; ngens];
        for l in &self.0 {
            s[l.index()] += if l.inv { -1 } else { 1 };
        }
        s
    }

    pub fn render(&self, names: &[String]) -> String {
        if self.0.is_empty() {
            return "1".to_string();
        }
        let mut out = Vec::new();
        for (l, run) in &self.0.iter().group_by(|l| **l) {
            let n = run.count() as i64;
            let e = if l.inv { -n } else { n };
            let name = &names[l.index()];
            if e == 1 {
                out.push(name.clone());
            } else {
                out.push(format!("{name}^{e}"));
            }
        }
        out.join(" ")
    }

    pub fn map_generators(&self, f: impl Fn(usize) -> usize) -> Word {
        Word(self.0.iter().map(|l| Letter { gen: f(l.index()) as u32, inv: l.inv }).collect())
    }
}

/// Cancel adjacent inverse pairs until none remain.
pub fn free_reduce(w: &Word) -> Word {
    let mut out: Vec<Letter> = Vec::with_capacity(w.0.len());
    for &l in &w.0 {
        if out.last() == Some(&l.inverse()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    Word(out)
}

/// Free reduction followed by removal of matching first/last inverse letters.
pub fn cyclic_reduce(w: &Word) -> Word {
    let r = free_reduce(w);
    let v = &r.0;
    let mut i = 0;
    let mut j = v.len();
    while j >= i + 2 && v[i] == v[j - 1].inverse() {
        i += 1;
        j -= 1;
    }
    Word(v[i..j].to_vec())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Presentation {
    pub name: String,
    pub generators: Vec<String>,
    pub relators: Vec<Word>,
    /// Equalities a caller asserted without proof (Tietze replacements).
    pub asserted: Vec<String>,
}

impl Presentation {
    pub fn new(name: &str, generators: &[&str], relators: Vec<Word>) -> Result<Self, PresentationError> {
        let generators: Vec<String> = generators.iter().map(|s| s.to_string()).collect();
        Self::from_parts(name, generators, relators)
    }

    pub fn from_parts(name: &str, generators: Vec<String>, relators: Vec<Word>) -> Result<Self, PresentationError> {
        let mut seen = BTreeSet::new();
        for g in &generators {
            if !seen.insert(g.as_str()) {
                return Err(PresentationError::DuplicateGenerator(g.clone()));
            }
        }
        let relators = relators.iter().map(free_reduce).filter(|w| !w.is_empty()).collect();
        Ok(Presentation { name: name.to_string(), generators, relators, asserted: Vec::new() })
    }

    pub fn ngens(&self) -> usize {
        self.generators.len()
    }

    pub fn gen_index(&self, name: &str) -> Option<usize> {
        self.generators.iter().position(|g| g == name)
    }

    pub fn word(&self, text: &str) -> Result<Word, PresentationError> {
        parse_word(text, self)
    }

    pub fn render(&self, w: &Word) -> String {
        w.render(&self.generators)
    }

    /// Same group with generators listed in `order` (a permutation of the current names).
    pub fn reorder_generators(&self, order: &[String]) -> Result<Presentation, PresentationError> {
        let mut to_new = vec![0usize; self.ngens()];
        for (old, name) in self.generators.iter().enumerate() {
            let new = order
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| PresentationError::UnknownGenerator(name.clone()))?;
            to_new[old] = new;
        }
        let relators = self.relators.iter().map(|r| r.map_generators(|g| to_new[g])).collect();
        let mut p = Presentation::from_parts(&self.name, order.to_vec(), relators)?;
        p.asserted = self.asserted.clone();
        Ok(p)
    }

    /// Relators sorted shortlex and deduplicated.
    pub fn sorted(&self) -> Presentation {
        let mut p = self.clone();
        p.relators.sort();
        p.relators.dedup();
        p
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("group {}\ngens {}\n", self.name, self.generators.join(" "));
        for r in &self.relators {
            s.push_str(&format!("rel {}\n", self.render(r)));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String, usize),
    Int(i64, usize),
    Caret(usize),
    Open(usize),
    Close(usize),
}

fn tokenize(text: &str) -> Result<Vec<Token>, PresentationError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() || c == '*' || c == '.' {
            i += 1;
        } else if c == '(' {
            out.push(Token::Open(i));
            i += 1;
        } else if c == ')' {
            out.push(Token::Close(i));
            i += 1;
        } else if c == '^' {
            out.push(Token::Caret(i));
            i += 1;
        } else if c == '-' || c.is_ascii_digit() {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<i64>().map_err(|_| PresentationError::Syntax { pos: start, msg: format!("bad integer `{s}`") })?;
            out.push(Token::Int(v, start));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                i += 1;
            }
            out.push(Token::Ident(chars[start..i].iter().collect(), start));
        } else {
            return Err(PresentationError::Syntax { pos: i, msg: format!("unexpected character `{c}`") });
        }
    }
    Ok(out)
}

struct WordParser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    lookup: &'a dyn Fn(&str) -> Option<usize>,
    end: usize,
}

impl WordParser<'_> {
    fn position(&self) -> usize {
        match self.tokens.get(self.pos) {
            Some(Token::Ident(_, p) | Token::Int(_, p) | Token::Caret(p) | Token::Open(p) | Token::Close(p)) => *p,
            None => self.end,
        }
    }

    fn exponent(&mut self) -> Result<i64, PresentationError> {
        if let Some(Token::Caret(_)) = self.tokens.get(self.pos) {
            self.pos += 1;
            match self.tokens.get(self.pos) {
                Some(Token::Int(v, _)) => {
                    let v = *v;
                    self.pos += 1;
                    Ok(v)
                }
                _ => Err(PresentationError::Syntax { pos: self.position(), msg: "expected integer exponent".into() }),
            }
        } else {
            Ok(1)
        }
    }

    fn sequence(&mut self, nested: bool) -> Result<Vec<Letter>, PresentationError> {
        let mut out = Vec::new();
        loop {
            match self.tokens.get(self.pos).cloned() {
                None => {
                    if nested {
                        return Err(PresentationError::Syntax { pos: self.end, msg: "unclosed parenthesis".into() });
                    }
                    return Ok(out);
                }
                Some(Token::Close(p)) => {
                    if nested {
                        self.pos += 1;
                        return Ok(out);
                    }
                    return Err(PresentationError::Syntax { pos: p, msg: "unbalanced `)`".into() });
                }
                Some(Token::Open(_)) => {
                    self.pos += 1;
                    let inner = self.sequence(true)?;
                    let e = self.exponent()?;
                    let w = Word(inner).pow(e);
                    out.extend(w.0);
                }
                Some(Token::Int(1, _)) => {
                    self.pos += 1;
                    self.exponent()?;
                }
                Some(Token::Ident(name, p)) => {
                    self.pos += 1;
                    let g = (self.lookup)(&name).ok_or(PresentationError::UnknownGenerator(name.clone()))?;
                    let _ = p;
                    let e = self.exponent()?;
                    let l = Letter { gen: g as u32, inv: e < 0 };
                    for _ in 0..e.unsigned_abs() {
                        out.push(l);
                    }
                }
                Some(Token::Int(_, p)) | Some(Token::Caret(p)) => {
                    return Err(PresentationError::Syntax { pos: p, msg: "unexpected token".into() });
                }
            }
        }
    }
}

/// Parse a word using a name lookup.
pub fn parse_word_with(text: &str, lookup: &dyn Fn(&str) -> Option<usize>) -> Result<Word, PresentationError> {
    let tokens = tokenize(text)?;
    let mut p = WordParser { tokens, pos: 0, lookup, end: text.chars().count() };
    let letters = p.sequence(false)?;
    Ok(free_reduce(&Word(letters)))
}

pub fn parse_word(text: &str, pres: &Presentation) -> Result<Word, PresentationError> {
    parse_word_with(text, &|name| pres.gen_index(name))
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
    .trim()
}

/// Parse a presentation file (`group`, `gens`, `rel` lines).
pub fn parse_presentation(text: &str) -> Result<Presentation, PresentationError> {
    let mut name = String::from("G");
    let mut gens: Vec<String> = Vec::new();
    let mut rel_lines: Vec<(usize, String)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
        match head {
            "group" => name = rest.trim().to_string(),
            "gens" => gens.extend(rest.split_whitespace().map(str::to_string)),
            "rel" => rel_lines.push((lineno, rest.trim().to_string())),
            _ => {}
        }
    }
    let mut p = Presentation::from_parts(&name, gens, Vec::new())?;
    for (_, r) in rel_lines {
        let w = parse_word(&r, &p)?;
        if !w.is_empty() {
            p.relators.push(w);
        }
    }
    Ok(p)
}

/// Diagram label: a finite order `m >= 2` or infinity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Finite(u32),
    Infinite,
}

impl Label {
    pub fn parse(s: &str) -> Option<Label> {
        if s == "inf" {
            return Some(Label::Infinite);
        }
        match s.parse::<u32>() {
            Ok(m) if m >= 2 => Some(Label::Finite(m)),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Finite(m) => write!(f, "{m}"),
            Label::Infinite => write!(f, "inf"),
        }
    }
}

/// Extended Coxeter diagram. Missing loop means order 2; missing edge means label 2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledDiagram {
    pub name: String,
    pub vertices: Vec<String>,
    pub loops: BTreeMap<usize, Label>,
    pub edges: BTreeMap<(usize, usize), Label>,
}

impl LabeledDiagram {
    pub fn new(name: &str, vertices: &[&str]) -> Self {
        LabeledDiagram {
            name: name.to_string(),
            vertices: vertices.iter().map(|s| s.to_string()).collect(),
            loops: BTreeMap::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn vertex(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn set_loop(&mut self, v: usize, label: Label) {
        if label == Label::Finite(2) {
            self.loops.remove(&v);
        } else {
            self.loops.insert(v, label);
        }
    }

    pub fn set_edge(&mut self, a: usize, b: usize, label: Label) {
        let key = (a.min(b), a.max(b));
        if label == Label::Finite(2) {
            self.edges.remove(&key);
        } else {
            self.edges.insert(key, label);
        }
    }

    pub fn loop_label(&self, v: usize) -> Label {
        self.loops.get(&v).copied().unwrap_or(Label::Finite(2))
    }

    pub fn edge_label(&self, a: usize, b: usize) -> Label {
        self.edges.get(&(a.min(b), a.max(b))).copied().unwrap_or(Label::Finite(2))
    }

    /// Diagram file text; parses back with [`parse_diagram`].
    pub fn to_text(&self) -> String {
        let mut s = format!("diagram {}\n", self.name);
        for (v, name) in self.vertices.iter().enumerate() {
            match self.loops.get(&v) {
                Some(l) => s.push_str(&format!("vertex {name} order {l}\n")),
                None => s.push_str(&format!("vertex {name}\n")),
            }
        }
        for (&(a, b), l) in &self.edges {
            s.push_str(&format!("edge {} {} {l}\n", self.vertices[a], self.vertices[b]));
        }
        s
    }

    /// Every odd finite edge must join vertices of equal order.
    pub fn validate(&self) -> Result<(), PresentationError> {
        for (&(a, b), &label) in &self.edges {
            if a == b {
                return Err(PresentationError::Syntax { pos: 0, msg: format!("edge joins `{}` to itself", self.vertices[a]) });
            }
            if let Label::Finite(m) = label {
                if m % 2 == 1 && self.loop_label(a) != self.loop_label(b) {
                    return Err(PresentationError::ImproperLabeling {
                        a: self.vertices[a].clone(),
                        b: self.vertices[b].clone(),
                        label: m,
                        ma: self.loop_label(a).to_string(),
                        mb: self.loop_label(b).to_string(),
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn parse_diagram(text: &str) -> Result<LabeledDiagram, PresentationError> {
    let mut d = LabeledDiagram::new("D", &[]);
    let bad = |lineno: usize, msg: &str| PresentationError::Syntax { pos: lineno + 1, msg: msg.to_string() };
    for (lineno, raw) in text.lines().enumerate() {
        let line = strip_comment(raw);
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts[0] {
            "diagram" => d.name = parts.get(1).copied().unwrap_or("D").to_string(),
            "vertex" => {
                let name = parts.get(1).ok_or_else(|| bad(lineno, "vertex needs a name"))?;
                if d.vertex(name).is_some() {
                    return Err(PresentationError::DuplicateGenerator(name.to_string()));
                }
                d.vertices.push(name.to_string());
                let v = d.vertices.len() - 1;
                match parts.get(2) {
                    None => {}
                    Some(&"order") => {
                        let label = parts.get(3).and_then(|s| Label::parse(s)).ok_or_else(|| bad(lineno, "bad order label"))?;
                        d.set_loop(v, label);
                    }
                    Some(_) => return Err(bad(lineno, "expected `order`")),
                }
            }
            "edge" => {
                if parts.len() != 4 {
                    return Err(bad(lineno, "edge needs two vertices and a label"));
                }
                let a = d.vertex(parts[1]).ok_or_else(|| PresentationError::UnknownGenerator(parts[1].to_string()))?;
                let b = d.vertex(parts[2]).ok_or_else(|| PresentationError::UnknownGenerator(parts[2].to_string()))?;
                if a == b {
                    return Err(bad(lineno, "edge joins a vertex to itself"));
                }
                let label = Label::parse(parts[3]).ok_or_else(|| bad(lineno, "bad edge label"))?;
                d.set_edge(a, b, label);
            }
            other => return Err(bad(lineno, &format!("unknown directive `{other}`"))),
        }
    }
    d.validate()?;
    Ok(d)
}

/// The presentation defined by a labeled diagram.
pub fn shephard_presentation(d: &LabeledDiagram) -> Presentation {
    let n = d.vertices.len();
    let mut rels = Vec::new();
    for v in 0..n {
        if let Label::Finite(m) = d.loop_label(v) {
            rels.push(Word::gen(v).pow(m as i64));
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            match d.edge_label(a, b) {
                Label::Infinite => {}
                Label::Finite(m) => {
                    let m = m as usize;
                    let lhs = Word::alternating(Letter::pos(a), Letter::pos(b), m);
                    let rhs = Word::alternating(Letter::pos(b), Letter::pos(a), m);
                    rels.push(free_reduce(&Word::join(&[&lhs, &rhs.inverse()])));
                }
            }
        }
    }
    Presentation { name: d.name.clone(), generators: d.vertices.clone(), relators: rels, asserted: Vec::new() }
}

/// Images of a list of source words. For automorphisms the sources are the generators.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorMap {
    pub source: Vec<Word>,
    pub images: Vec<Word>,
}

impl GeneratorMap {
    /// Map defined on generators `0..images.len()`.
    pub fn on_generators(images: Vec<Word>) -> Self {
        let source = (0..images.len()).map(Word::gen).collect();
        GeneratorMap { source, images }
    }

    pub fn identity(ngens: usize) -> Self {
        Self::on_generators((0..ngens).map(Word::gen).collect())
    }

    /// Whether sources are exactly the generators in order.
    pub fn is_generator_map(&self) -> bool {
        self.source.iter().enumerate().all(|(i, w)| w.is_single_generator() == Some(i))
    }

    /// Apply a map defined on generators to an arbitrary word.
    pub fn apply(&self, w: &Word) -> Word {
        debug_assert!(self.is_generator_map());
        let mut v = Vec::new();
        for l in &w.0 {
            let img = &self.images[l.index()];
            if l.inv {
                v.extend(img.inverse().0);
            } else {
                v.extend_from_slice(&img.0);
            }
        }
        free_reduce(&Word(v))
    }

    /// Permutation of generator indices when each image is a single positive generator.
    pub fn as_permutation(&self, names: &[String]) -> Result<Vec<usize>, PresentationError> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, w)| w.is_single_generator().ok_or_else(|| PresentationError::NonPermutingMap(names.get(i).cloned().unwrap_or_default())))
            .collect()
    }

    pub fn compose(&self, inner: &GeneratorMap) -> GeneratorMap {
        GeneratorMap::on_generators(inner.images.iter().map(|w| self.apply(w)).collect())
    }
}

/// Replace `elim` by `replacement` throughout `w`.
pub fn substitute(w: &Word, elim: usize, replacement: &Word) -> Result<Word, PresentationError> {
    if replacement.0.iter().any(|l| l.index() == elim) {
        return Err(PresentationError::ReplacementContainsEliminated(format!("#{elim}")));
    }
    let inv = replacement.inverse();
    let mut v = Vec::with_capacity(w.len());
    for &l in &w.0 {
        if l.index() == elim {
            v.extend_from_slice(if l.inv { &inv.0 } else { &replacement.0 });
        } else {
            v.push(l);
        }
    }
    Ok(free_reduce(&Word(v)))
}

/// Remove generator `elim`, substituting `replacement` (a word over the same generator list).
pub fn tietze_eliminate(p: &Presentation, elim: usize, replacement: &Word) -> Result<Presentation, PresentationError> {
    if replacement.0.iter().any(|l| l.index() == elim) {
        return Err(PresentationError::ReplacementContainsEliminated(p.generators[elim].clone()));
    }
    let reindex = |g: usize| if g > elim { g - 1 } else { g };
    let mut rels = Vec::new();
    for r in &p.relators {
        let w = substitute(r, elim, replacement)?;
        if !w.is_empty() {
            rels.push(w.map_generators(reindex));
        }
    }
    rels.sort();
    rels.dedup();
    let mut gens = p.generators.clone();
    let removed = gens.remove(elim);
    let mut asserted = p.asserted.clone();
    asserted.push(format!("{removed} = {}", replacement.render(&p.generators)));
    Ok(Presentation { name: p.name.clone(), generators: gens, relators: rels, asserted })
}

/// Append extra relators: the quotient by their normal closure.
pub fn quotient_presentation(p: &Presentation, extra: &[Word]) -> Presentation {
    let mut q = p.clone();
    q.relators.extend(extra.iter().map(free_reduce).filter(|w| !w.is_empty()));
    q
}

pub const ORBIT_CAP: usize = 10_000;

/// Close `h_gens` under the group generated by generator-permuting maps.
pub fn b_symmetrize(h_gens: &[Word], auts: &[GeneratorMap], names: &[String]) -> Result<Vec<Word>, PresentationError> {
    for a in auts {
        a.as_permutation(names)?;
    }
    let mut seen: BTreeSet<Word> = BTreeSet::new();
    let mut queue: VecDeque<Word> = VecDeque::new();
    for h in h_gens {
        let w = free_reduce(h);
        if seen.insert(w.clone()) {
            queue.push_back(w);
        }
    }
    while let Some(w) = queue.pop_front() {
        for a in auts {
            let img = a.apply(&w);
            if !seen.contains(&img) {
                if seen.len() >= ORBIT_CAP {
                    return Err(PresentationError::OrbitCapExceeded(ORBIT_CAP));
                }
                seen.insert(img.clone());
                queue.push_back(img);
            }
        }
    }
    Ok(seen.into_iter().collect())
}

/// The generator map induced by a vertex permutation preserving all labels.
pub fn diagram_automorphism_to_map(d: &LabeledDiagram, perm: &[usize]) -> Result<GeneratorMap, PresentationError> {
    let n = d.vertices.len();
    let mut seen = vec![false; n];
    if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
        return Err(PresentationError::NotDiagramAutomorphism("not a permutation of the vertices".into()));
    }
    for v in 0..n {
        if d.loop_label(v) != d.loop_label(perm[v]) {
            return Err(PresentationError::NotDiagramAutomorphism(format!(
                "loop at {} ({}) sent to {} ({})",
                d.vertices[v],
                d.loop_label(v),
                d.vertices[perm[v]],
                d.loop_label(perm[v])
            )));
        }
    }
    for a in 0..n {
        for b in (a + 1)..n {
            if d.edge_label(a, b) != d.edge_label(perm[a], perm[b]) {
                return Err(PresentationError::NotDiagramAutomorphism(format!(
                    "edge {}-{} ({}) sent to {}-{} ({})",
                    d.vertices[a],
                    d.vertices[b],
                    d.edge_label(a, b),
                    d.vertices[perm[a]],
                    d.vertices[perm[b]],
                    d.edge_label(perm[a], perm[b])
                )));
            }
        }
    }
    Ok(GeneratorMap::on_generators(perm.iter().map(|&p| Word::gen(p)).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab() -> Presentation {
        Presentation::new("F", &["a", "b"], vec![]).unwrap()
    }

    #[test]
    fn parse_basic_words() {
        let p = ab();
        assert_eq!(p.word("a b^-1 a").unwrap(), Word::from_signed(&[(0, false), (1, true), (0, false)]));
        assert!(p.word("a a^-1").unwrap().is_empty());
        assert_eq!(p.word("(a b)^3").unwrap().len(), 6);
        assert!(p.word("1").unwrap().is_empty());
        assert_eq!(p.word("(a b)^-1").unwrap(), p.word("b^-1 a^-1").unwrap());
    }

    #[test]
    fn parse_errors() {
        let p = ab();
        assert_eq!(p.word("a c"), Err(PresentationError::UnknownGenerator("c".into())));
        assert!(matches!(p.word("(a b"), Err(PresentationError::Syntax { .. })));
        assert!(matches!(p.word("a ^"), Err(PresentationError::Syntax { .. })));
    }

    #[test]
    fn reductions() {
        let p = ab();
        let w = Word::join(&[&p.word("a").unwrap(), &p.word("a^-1 b").unwrap()]);
        assert_eq!(free_reduce(&w), p.word("b").unwrap());
        assert!(free_reduce(&Word::empty()).is_empty());
        let w = Word::from_signed(&[(0, false), (1, false), (1, true), (0, true)]);
        assert!(free_reduce(&w).is_empty());
        let w = Word::from_signed(&[(1, false), (0, false), (1, true)]);
        assert_eq!(cyclic_reduce(&w), p.word("a").unwrap());
    }

    #[test]
    fn diagram_parsing_and_labels() {
        let s3 = parse_diagram("diagram S3\nvertex a\nvertex b\nedge a b 3\n").unwrap();
        let p = shephard_presentation(&s3);
        assert_eq!(p.relators.len(), 3);
        let braid = parse_diagram("vertex a order inf\nvertex b order inf\nedge a b 3\n").unwrap();
        assert_eq!(shephard_presentation(&braid).relators.len(), 1);
        let bad = parse_diagram("vertex a order 5\nvertex b\nedge a b 3\n");
        assert!(matches!(bad, Err(PresentationError::ImproperLabeling { .. })));
    }

    #[test]
    fn shephard_four_vertex_example() {
        let d = parse_diagram(
            "vertex a order inf\nvertex b order 5\nvertex c order 5\nvertex d\n\
             edge a b 4\nedge b c 3\nedge a d 6\nedge a c inf\n",
        )
        .unwrap();
        let p = shephard_presentation(&d);
        let expect = ["b^5", "c^5", "d^2", "a b a b a^-1 b^-1 a^-1 b^-1", "b c b c^-1 b^-1 c^-1", "b d b^-1 d^-1", "c d c^-1 d^-1", "a d a d a d a^-1 d^-1 a^-1 d^-1 a^-1 d^-1"];
        let mut want: Vec<Word> = expect.iter().map(|s| p.word(s).unwrap()).collect();
        let mut got = p.relators.clone();
        want.sort();
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn coxeter_a3_relators() {
        let d = parse_diagram("vertex a\nvertex b\nvertex c\nedge a b 3\nedge b c 3\n").unwrap();
        let p = shephard_presentation(&d);
        let mut want: Vec<Word> = ["a^2", "b^2", "c^2", "a b a b^-1 a^-1 b^-1", "b c b c^-1 b^-1 c^-1", "a c a^-1 c^-1"]
            .iter()
            .map(|s| p.word(s).unwrap())
            .collect();
        let mut got = p.relators.clone();
        want.sort();
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn substitution_and_tietze() {
        let p = Presentation::new("G", &["a", "b"], vec![]).unwrap();
        let q = Presentation { relators: vec![p.word("b^-1 a^2").unwrap()], ..p.clone() };
        let r = tietze_eliminate(&q, 1, &p.word("a^2").unwrap()).unwrap();
        assert_eq!(r.generators, vec!["a".to_string()]);
        assert!(r.relators.is_empty());
        assert_eq!(r.asserted, vec!["b = a^2".to_string()]);
        assert!(matches!(substitute(&p.word("a").unwrap(), 0, &p.word("a b").unwrap()), Err(PresentationError::ReplacementContainsEliminated(_))));
        let w = p.word("b").unwrap();
        assert_eq!(substitute(&w, 0, &p.word("b").unwrap()).unwrap(), w);
        let gg = Word::from_signed(&[(0, false), (0, true)]);
        assert!(substitute(&gg, 0, &p.word("b b").unwrap()).unwrap().is_empty());
    }

    #[test]
    fn symmetrize_orbits() {
        let names: Vec<String> = ["a1", "a2", "a3", "a4"].iter().map(|s| s.to_string()).collect();
        let p = Presentation::from_parts("A", names.clone(), vec![]).unwrap();
        let h = p.word("(a3 a4 a1 a2)^2").unwrap();
        let psi_x = GeneratorMap::on_generators([1, 0, 3, 2].iter().map(|&g| Word::gen(g)).collect());
        let psi_y = GeneratorMap::on_generators([0, 2, 1, 3].iter().map(|&g| Word::gen(g)).collect());
        let orbit = b_symmetrize(&[h.clone()], &[psi_x.clone(), psi_y.clone()], &names).unwrap();
        // Oracle: apply every element of the generated permutation group (closure by brute force).
        let mut perms: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut frontier = vec![vec![0, 1, 2, 3]];
        while let Some(q) = frontier.pop() {
            if perms.insert(q.clone()) {
                for s in [[1, 0, 3, 2], [0, 2, 1, 3]] {
                    frontier.push(q.iter().map(|&i| s[i]).collect());
                }
            }
        }
        let images: BTreeSet<Word> = perms.iter().map(|q| h.map_generators(|g| q[g])).collect();
        assert_eq!(perms.len(), 8);
        assert_eq!(orbit.len(), images.len());
        assert_eq!(orbit.len(), 8);
        for w in &orbit {
            for a in [&psi_x, &psi_y] {
                assert!(orbit.contains(&a.apply(w)));
            }
        }
        let id = GeneratorMap::identity(4);
        assert_eq!(b_symmetrize(&[h.clone()], &[id], &names).unwrap(), vec![h]);
        let two = b_symmetrize(&[Word::gen(0)], &[GeneratorMap::on_generators(vec![Word::gen(3), Word::gen(1), Word::gen(2), Word::gen(0)])], &names).unwrap();
        assert_eq!(two, vec![Word::gen(0), Word::gen(3)]);
        let bad = GeneratorMap::on_generators(vec![p.word("a1 a2").unwrap(), Word::gen(1), Word::gen(2), Word::gen(3)]);
        assert!(matches!(b_symmetrize(&[Word::gen(0)], &[bad], &names), Err(PresentationError::NonPermutingMap(_))));
    }

    #[test]
    fn diagram_automorphisms() {
        let sq = parse_diagram("vertex a1\nvertex a2\nvertex a3\nvertex a4\nedge a1 a2 3\nedge a1 a3 3\nedge a2 a4 3\nedge a3 a4 3\n").unwrap();
        // 4-cycle a1 -> a2 -> a4 -> a3 -> a1 on the square.
        assert!(diagram_automorphism_to_map(&sq, &[1, 3, 0, 2]).is_ok());
        assert_eq!(diagram_automorphism_to_map(&sq, &[0, 1, 2, 3]).unwrap(), GeneratorMap::identity(4));
        assert!(matches!(diagram_automorphism_to_map(&sq, &[1, 0, 2, 3]), Err(PresentationError::NotDiagramAutomorphism(_))));
    }

    #[test]
    fn automorphism_orbits_match_closure() {
        let sq = parse_diagram("vertex a1\nvertex a2\nvertex a3\nvertex a4\nedge a1 a2 3\nedge a1 a3 3\nedge a2 a4 3\nedge a3 a4 3\n").unwrap();
        let rot = diagram_automorphism_to_map(&sq, &[1, 3, 0, 2]).unwrap();
        let perm = rot.as_permutation(&sq.vertices).unwrap();
        let mut orbit = BTreeSet::new();
        let mut v = 0;
        loop {
            if !orbit.insert(v) {
                break;
            }
            v = perm[v];
        }
        assert_eq!(orbit, (0..4).collect());
    }

    fn arb_word(ngens: u32, max: usize) -> impl Strategy<Value = Word> {
        proptest::collection::vec((0..ngens, any::<bool>()), 0..=max)
            .prop_map(|v| Word(v.into_iter().map(|(gen, inv)| Letter { gen, inv }).collect()))
    }

    proptest! {
        #[test]
        fn free_reduce_idempotent(w in arb_word(3, 64)) {
            let r = free_reduce(&w);
            prop_assert!(r.len() <= w.len());
            prop_assert_eq!(free_reduce(&r), r.clone());
            prop_assert!(r.0.windows(2).all(|p| p[0] != p[1].inverse()));
        }

        #[test]
        fn inverse_cancels(w in arb_word(3, 32)) {
            prop_assert!(w.concat(&w.inverse()).is_empty());
        }

        #[test]
        fn render_parse_round_trip(w in arb_word(2, 24)) {
            let p = ab();
            let r = free_reduce(&w);
            prop_assert_eq!(p.word(&p.render(&r)).unwrap(), r);
        }
    }

    #[test]
    fn loopless_and_infinite_loops() {
        let d = parse_diagram("vertex a\nvertex b\nvertex c\nedge a b 4\n").unwrap();
        let p = shephard_presentation(&d);
        for g in 0..3 {
            assert!(p.relators.contains(&Word::gen(g).pow(2)));
        }
        let d = parse_diagram("vertex a order inf\nvertex b order inf\nedge a b inf\n").unwrap();
        assert!(shephard_presentation(&d).relators.is_empty());
    }
}
