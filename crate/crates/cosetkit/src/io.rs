//! Text formats: system files, construction descriptors and graph-of-systems files.
//!
//! A system file is a presentation file plus `system`, `type <label> := <generators>` and
//! optional `backend` and `certificate` lines. Structured backends record just enough to rebuild
//! the group handle, so a serialized construction re-parses to the same system.

use std::collections::BTreeSet;
use std::sync::Arc;

use itertools::Itertools;
use thiserror::Error;

use crate::canonical::canonical_text;
use crate::constructions::{
    amalgam_system, check_action_admissible, check_compatible, check_hnn_admissible, check_twist_admissible, free_product_system, hnn_system, semidirect_system,
    twist_system, ConstructionError,
};
use crate::finite::FiniteGroup;
use crate::gog::{GogError, GraphEdge, GraphOfSystems, GraphVertex};
use crate::incidence::{diagram_kind, make_system, CosetIncidenceSystem, DiagramKind, IncidenceError, Property, TypeLabel, TypeSet};
use crate::presentation::{parse_presentation, parse_word_with, GeneratorMap, Presentation, PresentationError, Word};
use crate::structured::{AmalgamGroup, FreeProductGroup, GroupHandle, HnnGroup, SemiDirectGroup, SpecialSubgroup, StructError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IoError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error(transparent)]
    Presentation(#[from] PresentationError),
    #[error(transparent)]
    Incidence(#[from] IncidenceError),
    #[error(transparent)]
    Structured(#[from] StructError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Graph(#[from] GogError),
    #[error("backend: {0}")]
    Backend(String),
    #[error("cannot read {path}: {msg}")]
    Read { path: String, msg: String },
}

type Result<T> = std::result::Result<T, IoError>;

fn syntax(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Syntax { line: line + 1, msg: msg.into() }
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

/// Non-empty, comment-free lines with their zero-based line numbers, split at the first space.
fn directives(text: &str) -> impl Iterator<Item = (usize, &str, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = strip_comment(raw);
        (!line.is_empty()).then(|| {
            let (head, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            (i, head, rest.trim())
        })
    })
}

fn property_key(p: Property) -> &'static str {
    match p {
        Property::FlagTransitive => "ft",
        Property::ResiduallyConnected => "rc",
        Property::Firm => "firm",
        Property::Thin => "thin",
        Property::Thick => "thick",
        Property::Finite => "finite",
        Property::Hypertope => "hypertope",
    }
}

fn parse_property(s: &str) -> Option<Property> {
    [
        Property::FlagTransitive,
        Property::ResiduallyConnected,
        Property::Firm,
        Property::Thin,
        Property::Thick,
        Property::Finite,
        Property::Hypertope,
    ]
    .into_iter()
    .find(|&p| property_key(p) == s)
}

// ---------------------------------------------------------------------------------------
// Backends

/// How the group of a system file is represented.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Backend {
    /// Enumerate if the presentation is not recognized as an Artin-Tits group.
    Auto,
    Finite,
    Presented,
    /// The first `split` generators form the left factor.
    Free(usize, Box<Backend>, Box<Backend>),
    SemiDirect(usize, Box<Backend>, Box<Backend>),
    Amalgam(usize),
    Hnn,
}

fn parse_backend(tokens: &mut std::slice::Iter<&str>, line: usize) -> Result<Backend> {
    let head = tokens.next().ok_or_else(|| syntax(line, "incomplete backend"))?;
    let mut split = || -> Result<usize> {
        tokens.next().and_then(|t| t.parse().ok()).ok_or_else(|| syntax(line, "expected generator count"))
    };
    Ok(match *head {
        "auto" => Backend::Auto,
        "finite" => Backend::Finite,
        "presented" => Backend::Presented,
        "amalgam" => Backend::Amalgam(split()?),
        "hnn" => Backend::Hnn,
        "free-product" | "semidirect" => {
            let k = split()?;
            let (l, r) = (parse_backend(tokens, line)?, parse_backend(tokens, line)?);
            if *head == "free-product" {
                Backend::Free(k, Box::new(l), Box::new(r))
            } else {
                Backend::SemiDirect(k, Box::new(l), Box::new(r))
            }
        }
        other => return Err(syntax(line, format!("unknown backend `{other}`"))),
    })
}

fn render_backend(b: &Backend) -> String {
    match b {
        Backend::Auto => "auto".into(),
        Backend::Finite => "finite".into(),
        Backend::Presented => "presented".into(),
        Backend::Free(k, l, r) => format!("free-product {k} {} {}", render_backend(l), render_backend(r)),
        Backend::SemiDirect(k, l, r) => format!("semidirect {k} {} {}", render_backend(l), render_backend(r)),
        Backend::Amalgam(k) => format!("amalgam {k}"),
        Backend::Hnn => "hnn".into(),
    }
}

fn backend_of(h: &GroupHandle) -> Result<Backend> {
    Ok(match h {
        GroupHandle::Finite(_) => Backend::Finite,
        GroupHandle::Presented(_) => Backend::Presented,
        GroupHandle::FreeProduct(g) => Backend::Free(g.split, Box::new(backend_of(&g.left)?), Box::new(backend_of(&g.right)?)),
        GroupHandle::SemiDirect(g) => {
            let (l, r) = (backend_of(&g.base)?, backend_of(&g.actor)?);
            if [&l, &r].iter().any(|b| !matches!(b, Backend::Finite | Backend::Presented)) {
                return Err(IoError::Backend("semidirect factors must be finite or presented".into()));
            }
            Backend::SemiDirect(g.split, Box::new(l), Box::new(r))
        }
        GroupHandle::Amalgam(g) => Backend::Amalgam(g.split),
        GroupHandle::Hnn(_) => Backend::Hnn,
    })
}

/// Generators `lo..hi` with the relators that only use them, renumbered from zero.
fn slice_presentation(p: &Presentation, lo: usize, hi: usize) -> Presentation {
    let rels = p
        .relators
        .iter()
        .filter(|r| r.letters().iter().all(|l| (lo..hi).contains(&l.index())))
        .map(|r| r.map_generators(|g| g - lo))
        .collect();
    Presentation::from_parts(&p.name, p.generators[lo..hi].to_vec(), rels).expect("names come from a valid presentation")
}

fn shift_down(w: &Word, by: usize) -> Word {
    w.map_generators(|g| g - by)
}

/// Extra data a structured backend needs, read from `action`, `amalgamate` and `conjugate` lines.
#[derive(Default)]
struct BackendData {
    action: Vec<(usize, usize, Word)>,
    amalgamate: Vec<(Word, Word)>,
    conjugate: Vec<(Word, Word)>,
}

fn finite_handle(p: &Presentation, max_cosets: usize) -> Result<Arc<FiniteGroup>> {
    FiniteGroup::from_presentation(p, max_cosets).map(Arc::new).map_err(|e| IoError::Backend(format!("group `{}`: {e}", p.name)))
}

fn build_handle(p: &Presentation, b: &Backend, data: &BackendData, max_cosets: usize) -> Result<GroupHandle> {
    Ok(match b {
        Backend::Auto => {
            if diagram_kind(p) == Some(DiagramKind::Artin) {
                GroupHandle::Presented(Arc::new(p.clone()))
            } else {
                match FiniteGroup::from_presentation(p, max_cosets) {
                    Ok(g) => GroupHandle::Finite(Arc::new(g)),
                    Err(_) => GroupHandle::Presented(Arc::new(p.clone())),
                }
            }
        }
        Backend::Finite => GroupHandle::Finite(finite_handle(p, max_cosets)?),
        Backend::Presented => GroupHandle::Presented(Arc::new(p.clone())),
        Backend::Free(k, l, r) => {
            let n = p.ngens();
            let left = build_handle(&slice_presentation(p, 0, *k), l, &BackendData::default(), max_cosets)?;
            let right = build_handle(&slice_presentation(p, *k, n), r, &BackendData::default(), max_cosets)?;
            GroupHandle::FreeProduct(Arc::new(FreeProductGroup::new(left, right)?))
        }
        Backend::SemiDirect(k, l, r) => {
            let n = p.ngens();
            let base = build_handle(&slice_presentation(p, 0, *k), l, &BackendData::default(), max_cosets)?;
            let actor = build_handle(&slice_presentation(p, *k, n), r, &BackendData::default(), max_cosets)?;
            let mut action: Vec<GeneratorMap> = (*k..n).map(|_| GeneratorMap::identity(*k)).collect();
            for (b, x, w) in &data.action {
                action[b - k].images[*x] = w.clone();
            }
            GroupHandle::SemiDirect(Arc::new(SemiDirectGroup::new(base, actor, action)?))
        }
        Backend::Amalgam(k) => {
            let n = p.ngens();
            let left = finite_handle(&slice_presentation(p, 0, *k), max_cosets)?;
            let right = finite_handle(&slice_presentation(p, *k, n), max_cosets)?;
            let (cl, cr): (Vec<Word>, Vec<Word>) = data.amalgamate.iter().map(|(a, b)| (a.clone(), shift_down(b, *k))).unzip();
            GroupHandle::Amalgam(Arc::new(AmalgamGroup::new(left, right, cl, cr).map_err(IoError::Backend)?))
        }
        Backend::Hnn => {
            let n = p.ngens();
            let base = finite_handle(&slice_presentation(p, 0, n - 1), max_cosets)?;
            let (a1, a2): (Vec<Word>, Vec<Word>) = data.conjugate.iter().cloned().unzip();
            GroupHandle::Hnn(Arc::new(HnnGroup::new(base, a1, a2, &p.generators[n - 1]).map_err(IoError::Backend)?))
        }
    })
}

fn rename_group(h: &mut GroupHandle, name: &str) {
    let pres = match h {
        GroupHandle::Finite(g) => Arc::get_mut(g).map(|g| &mut g.presentation),
        GroupHandle::FreeProduct(g) => Arc::get_mut(g).map(|g| &mut g.presentation),
        GroupHandle::Amalgam(g) => Arc::get_mut(g).map(|g| &mut g.presentation),
        GroupHandle::Hnn(g) => Arc::get_mut(g).map(|g| &mut g.presentation),
        GroupHandle::SemiDirect(g) => Arc::get_mut(g).map(|g| &mut g.presentation),
        GroupHandle::Presented(p) => Some(Arc::make_mut(p)),
    };
    if let Some(p) = pres {
        p.name = name.to_string();
    }
}

/// The special subgroup generated by `words`, when they split along the group's structure.
fn special_from_words(h: &GroupHandle, words: &[Word]) -> Option<SpecialSubgroup> {
    let split_at = |k: usize| -> Option<(Vec<Word>, Vec<Word>)> {
        let mut left = Vec::new();
        let mut right = Vec::new();
        for w in words {
            if w.letters().iter().all(|l| l.index() < k) {
                left.push(w.clone());
            } else if w.letters().iter().all(|l| l.index() >= k) {
                right.push(shift_down(w, k));
            } else {
                return None;
            }
        }
        Some((left, right))
    };
    Some(match h {
        GroupHandle::Finite(g) => SpecialSubgroup::Finite(g.subgroup_from_words(words)),
        GroupHandle::Presented(_) => SpecialSubgroup::Standard(words.iter().map(Word::is_single_generator).collect::<Option<BTreeSet<usize>>>()?),
        GroupHandle::FreeProduct(g) => {
            let (l, r) = split_at(g.split)?;
            SpecialSubgroup::Free(Box::new(special_from_words(&g.left, &l)?), Box::new(special_from_words(&g.right, &r)?))
        }
        GroupHandle::SemiDirect(g) => {
            let (l, r) = split_at(g.split)?;
            SpecialSubgroup::Pair(Box::new(special_from_words(&g.base, &l)?), Box::new(special_from_words(&g.actor, &r)?))
        }
        GroupHandle::Amalgam(g) => {
            let (l, r) = split_at(g.split)?;
            SpecialSubgroup::Amalgam { left: g.left.subgroup_from_words(&l), right: g.right.subgroup_from_words(&r) }
        }
        GroupHandle::Hnn(g) => {
            let t = g.stable_index();
            let stable = words.iter().any(|w| w.is_single_generator() == Some(t));
            let base: Vec<Word> = words.iter().filter(|w| w.is_single_generator() != Some(t)).cloned().collect();
            if base.iter().any(|w| w.letters().iter().any(|l| l.index() == t)) {
                return None;
            }
            SpecialSubgroup::Hnn { base: g.base.subgroup_from_words(&base), stable }
        }
    })
}

// ---------------------------------------------------------------------------------------
// System files

/// Parses a system file. Groups without a `backend` line are enumerated (cap `max_cosets`)
/// unless recognized as Artin-Tits groups; failed enumeration falls back to a presented group.
pub fn parse_system(text: &str, max_cosets: usize) -> Result<CosetIncidenceSystem> {
    let p = parse_presentation(text)?;
    let lookup = |s: &str| p.gen_index(s);
    let word = |s: &str, line: usize| parse_word_with(s, &lookup).map_err(|e| syntax(line, e.to_string()));
    let mut name: Option<String> = None;
    let mut backend = Backend::Auto;
    let mut data = BackendData::default();
    let mut labels = Vec::new();
    let mut gens = Vec::new();
    let mut certificates = Vec::new();
    for (line, head, rest) in directives(text) {
        match head {
            "group" | "gens" | "rel" => {}
            "system" => name = (!rest.is_empty()).then(|| rest.to_string()),
            "backend" => {
                let tokens: Vec<&str> = rest.split_whitespace().collect();
                let mut it = tokens.iter();
                backend = parse_backend(&mut it, line)?;
                if it.next().is_some() {
                    return Err(syntax(line, "trailing tokens after backend"));
                }
            }
            "type" => {
                let (label, gens_text) = rest.split_once(":=").ok_or_else(|| syntax(line, "expected `type <label> := <generators>`"))?;
                labels.push(TypeLabel::parse(label).ok_or_else(|| syntax(line, format!("bad type label `{}`", label.trim())))?);
                let items: Vec<&str> =
                    if gens_text.contains(',') { gens_text.split(',').collect() } else { gens_text.split_whitespace().collect() };
                gens.push(items.into_iter().map(str::trim).filter(|s| !s.is_empty()).map(|s| word(s, line)).collect::<Result<Vec<Word>>>()?);
            }
            "action" => {
                let (lhs, rhs) = rest.split_once("->").ok_or_else(|| syntax(line, "expected `action <b> <x> -> <word>`"))?;
                let (b, x) = lhs.split_whitespace().collect_tuple().ok_or_else(|| syntax(line, "expected two generators before `->`"))?;
                let idx = |s: &str| p.gen_index(s).ok_or_else(|| syntax(line, format!("unknown generator `{s}`")));
                data.action.push((idx(b)?, idx(x)?, word(rhs, line)?));
            }
            "amalgamate" => {
                let (l, r) = rest.split_once('=').ok_or_else(|| syntax(line, "expected `amalgamate <word> = <word>`"))?;
                data.amalgamate.push((word(l, line)?, word(r, line)?));
            }
            "conjugate" => {
                let (l, r) = rest.split_once("->").ok_or_else(|| syntax(line, "expected `conjugate <word> -> <word>`"))?;
                data.conjugate.push((word(l, line)?, word(r, line)?));
            }
            "certificate" => {
                let mut parts = rest.splitn(3, char::is_whitespace);
                let (Some(prop), Some(value), Some(theorem)) = (parts.next(), parts.next(), parts.next()) else {
                    return Err(syntax(line, "expected `certificate <property> holds|fails <theorem>`"));
                };
                let property = parse_property(prop).ok_or_else(|| syntax(line, format!("unknown property `{prop}`")))?;
                let holds = match value {
                    "holds" => true,
                    "fails" => false,
                    _ => return Err(syntax(line, "certificate value must be holds or fails")),
                };
                certificates.push((property, holds, theorem.trim().to_string()));
            }
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    if labels.is_empty() {
        return Err(syntax(0, "system file declares no types"));
    }
    let mut group = build_handle(&p, &backend, &data, max_cosets)?;
    rename_group(&mut group, &p.name);
    if !matches!(backend, Backend::Auto | Backend::Finite | Backend::Presented) && canonical_text(group.presentation()) != canonical_text(&p) {
        return Err(IoError::Backend("rebuilt group does not match the listed relators".into()));
    }
    let specials: Option<Vec<SpecialSubgroup>> = match &group {
        GroupHandle::Finite(_) | GroupHandle::Presented(_) => None,
        h => Some(gens.iter().map(|ws| special_from_words(h, ws)).collect::<Option<Vec<_>>>().ok_or_else(|| {
            IoError::Backend("parabolic generators do not split along the group structure".into())
        })?),
    };
    let types = TypeSet::new(labels)?;
    let name = name.unwrap_or_else(|| p.name.clone());
    let mut sys = make_system(&name, group, types, gens)?;
    if let Some(specials) = specials {
        if let Some(bad) = specials.iter().position(|s| !sys.group.verify_special(s)) {
            return Err(IoError::Backend(format!("parabolic of type {} is not special", sys.types.label(bad))));
        }
        sys = sys.with_specials(specials);
    }
    if !certificates.is_empty() {
        sys.certificates.clear();
        for (p, holds, thm) in certificates {
            sys.certify(p, holds, &thm);
        }
    }
    Ok(sys)
}

/// Serializes a system so that [`parse_system`] rebuilds the same group, types and certificates.
pub fn write_system(sys: &CosetIncidenceSystem) -> Result<String> {
    let p = sys.group.presentation();
    let mut s = format!("group {}\ngens {}\n", p.name, p.generators.join(" "));
    for r in &p.relators {
        s.push_str(&format!("rel {}\n", p.render(r)));
    }
    s.push_str(&format!("system {}\n", sys.name));
    let backend = backend_of(&sys.group)?;
    s.push_str(&format!("backend {}\n", render_backend(&backend)));
    match &sys.group {
        GroupHandle::SemiDirect(g) => {
            for (b, map) in g.action.iter().enumerate() {
                for (x, img) in map.images.iter().enumerate() {
                    if img.is_single_generator() != Some(x) {
                        s.push_str(&format!("action {} {} -> {}\n", p.generators[g.split + b], p.generators[x], p.render(img)));
                    }
                }
            }
        }
        GroupHandle::Amalgam(g) => {
            for (a, b) in g.c_left_gens.iter().zip(&g.c_right_gens) {
                s.push_str(&format!("amalgamate {} = {}\n", p.render(a), p.render(&b.map_generators(|x| x + g.split))));
            }
        }
        GroupHandle::Hnn(g) => {
            for (a, b) in g.a1_gens.iter().zip(&g.a2_gens) {
                s.push_str(&format!("conjugate {} -> {}\n", p.render(a), p.render(b)));
            }
        }
        _ => {}
    }
    for (label, ws) in sys.types.labels().iter().zip(&sys.parabolic_gens) {
        let items: Vec<String> = ws.iter().map(|w| p.render(w)).collect();
        let sep = if items.iter().any(|i| i.contains(' ')) { ", " } else { " " };
        s.push_str(&format!("type {label} := {}\n", items.join(sep)).replace(":= \n", ":=\n"));
    }
    for c in sys.certificates.iter().sorted_by_key(|c| c.property) {
        s.push_str(&format!("certificate {} {} {}\n", property_key(c.property), if c.holds { "holds" } else { "fails" }, c.theorem));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------------------
// Construction descriptors

/// Reads the text of a referenced file.
pub type Resolver<'a> = dyn Fn(&str) -> Result<String> + 'a;

/// Builds the system described by a `construct` descriptor.
pub fn build_from_descriptor(text: &str, resolve: &Resolver, max_cosets: usize) -> Result<CosetIncidenceSystem> {
    let mut kind = None;
    let mut files: [Option<String>; 2] = [None, None];
    let mut maps: Vec<(usize, String, String)> = Vec::new();
    let mut keys: Vec<(usize, String, String)> = Vec::new();
    for (line, head, rest) in directives(text) {
        match head {
            "construct" => kind = Some((line, rest.to_string())),
            "alpha" | "left" | "base" => files[0] = Some(rest.to_string()),
            "beta" | "right" | "actor" => files[1] = Some(rest.to_string()),
            "map" => {
                let (l, r) = rest.split_once("->").ok_or_else(|| syntax(line, "expected `map <gen> -> <word>`"))?;
                maps.push((line, l.trim().to_string(), r.trim().to_string()));
            }
            _ => {
                let full = format!("{head} {rest}");
                let (k, v) = full.split_once('=').ok_or_else(|| syntax(line, format!("unknown directive `{head}`")))?;
                keys.push((line, k.trim().to_string(), v.trim().to_string()));
            }
        }
    }
    let (kline, kind) = kind.ok_or_else(|| syntax(0, "missing `construct` line"))?;
    let load = |i: usize| -> Result<CosetIncidenceSystem> {
        let path = files[i].as_ref().ok_or_else(|| syntax(kline, format!("missing {} system", if i == 0 { "alpha" } else { "beta" })))?;
        parse_system(&resolve(path)?, max_cosets)
    };
    let key = |k: &str| keys.iter().find(|(_, name, _)| name == k).map(|(l, _, v)| (*l, v.as_str()));
    let labels = |v: &str, line: usize| -> Result<Vec<TypeLabel>> {
        v.split_whitespace().map(|s| TypeLabel::parse(s).ok_or_else(|| syntax(line, format!("bad type label `{s}`")))).collect()
    };
    let mask = |sys: &CosetIncidenceSystem, k: &str| -> Result<u32> {
        let (line, v) = key(k).ok_or_else(|| syntax(kline, format!("missing `{k} = …`")))?;
        labels(v, line)?.iter().try_fold(0u32, |m, l| {
            sys.types.index_of(l).map(|i| m | (1 << i)).ok_or_else(|| syntax(line, format!("unknown type {l}")))
        })
    };
    let word_in = |p: &Presentation, s: &str, line: usize| parse_word_with(s, &|g| p.gen_index(g)).map_err(|e| syntax(line, e.to_string()));
    let pair_map = |src: &Presentation, tgt: &Presentation| -> Result<GeneratorMap> {
        let (mut source, mut images) = (Vec::new(), Vec::new());
        for (line, l, r) in &maps {
            source.push(word_in(src, l, *line)?);
            images.push(word_in(tgt, r, *line)?);
        }
        Ok(GeneratorMap { source, images })
    };
    let action_maps = |alpha: &CosetIncidenceSystem, beta: &CosetIncidenceSystem| -> Result<Vec<GeneratorMap>> {
        let (pa, pb) = (alpha.group.presentation(), beta.group.presentation());
        let mut action: Vec<GeneratorMap> = (0..pb.ngens()).map(|_| GeneratorMap::identity(pa.ngens())).collect();
        for (line, l, r) in &maps {
            let (b, x) = l.split_once(':').ok_or_else(|| syntax(*line, "action maps are written `map <actor-gen>:<gen> -> <word>`"))?;
            let b = pb.gen_index(b.trim()).ok_or_else(|| syntax(*line, format!("unknown actor generator `{}`", b.trim())))?;
            let x = pa.gen_index(x.trim()).ok_or_else(|| syntax(*line, format!("unknown generator `{}`", x.trim())))?;
            action[b].images[x] = word_in(pa, r, *line)?;
        }
        Ok(action)
    };
    Ok(match kind.as_str() {
        "free-product" => free_product_system(&load(0)?, &load(1)?)?,
        "amalgam" => {
            let (alpha, beta) = (load(0)?, load(1)?);
            let (line, v) = key("shared").ok_or_else(|| syntax(kline, "missing `shared = …`"))?;
            let shared = labels(v, line)?;
            let phi = pair_map(alpha.group.presentation(), beta.group.presentation())?;
            let cert = check_compatible(&alpha, &beta, &shared, &phi)?;
            amalgam_system(&alpha, &beta, &cert)?
        }
        "hnn" => {
            let alpha = load(0)?;
            let (source, target) = (mask(&alpha, "source")?, mask(&alpha, "target")?);
            let phi = pair_map(alpha.group.presentation(), alpha.group.presentation())?;
            let mut classes = check_hnn_admissible(&alpha, source, target, &phi)?;
            if let Some((line, stable)) = key("stable") {
                let clash = alpha.group.presentation().gen_index(stable).is_some() || alpha.types.labels().iter().any(|l| l.atoms().contains(stable));
                if clash || TypeLabel::parse(stable) != Some(TypeLabel::atom(stable)) {
                    return Err(syntax(line, format!("stable letter `{stable}` clashes or is not a plain name")));
                }
                classes.stable = stable.to_string();
            }
            hnn_system(&alpha, &classes)?
        }
        "semidirect" => {
            let (alpha, beta) = (load(0)?, load(1)?);
            let data = check_action_admissible(&alpha, &beta, &action_maps(&alpha, &beta)?)?;
            semidirect_system(&alpha, &beta, &data)?
        }
        "twist" => {
            let (alpha, beta) = (load(0)?, load(1)?);
            let (line, base_point) = key("F0").ok_or_else(|| syntax(kline, "missing `F0 = <type>`"))?;
            if TypeLabel::parse(base_point).is_none() {
                return Err(syntax(line, "bad base point"));
            }
            let cert = check_twist_admissible(&alpha, &beta, &action_maps(&alpha, &beta)?, base_point)?;
            if let Some((line, v)) = key("L") {
                let want: BTreeSet<TypeLabel> = labels(v, line)?.into_iter().collect();
                let got: BTreeSet<TypeLabel> = cert.orbit().iter().map(|&i| alpha.types.label(i).clone()).collect();
                if want != got {
                    return Err(syntax(line, format!("declared orbit L differs from the big orbit {{{}}}", got.iter().join(","))));
                }
            }
            twist_system(&alpha, &beta, &cert)?
        }
        other => return Err(syntax(kline, format!("unknown construction `{other}`"))),
    })
}

// ---------------------------------------------------------------------------------------
// Graph-of-systems files

/// Pairs `gen -> word` from the tokens after `map`; a word runs until the next `name ->`.
fn parse_map_tokens(tokens: &[&str], line: usize) -> Result<Vec<(String, String)>> {
    let arrows: Vec<usize> = tokens.iter().positions(|t| *t == "->").collect();
    if arrows.first() != Some(&1) {
        return Err(syntax(line, "expected `map <gen> -> <word> …`"));
    }
    let mut out = Vec::new();
    for (n, &a) in arrows.iter().enumerate() {
        let end = arrows.get(n + 1).map_or(tokens.len(), |&next| next - 1);
        if end <= a + 1 {
            return Err(syntax(line, format!("empty image for `{}`", tokens[a - 1])));
        }
        out.push((tokens[a - 1].trim_end_matches(',').to_string(), tokens[a + 1..end].join(" ").trim_end_matches(',').to_string()));
    }
    Ok(out)
}

/// Parses a graph file; `orient <edge-id> …` lines choose orientations of non-tree pairs.
pub fn parse_graph(text: &str, resolve: &Resolver, max_cosets: usize) -> Result<(GraphOfSystems, Vec<String>)> {
    let mut g = GraphOfSystems { name: "graph".into(), vertices: Vec::new(), edges: Vec::new(), tree: Vec::new() };
    let mut orientation = Vec::new();
    for (line, head, rest) in directives(text) {
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        match head {
            "gog" => g.name = rest.to_string(),
            "vertex" => match tokens.as_slice() {
                [id, "system", file] => g.vertices.push(GraphVertex { id: id.to_string(), system: parse_system(&resolve(file)?, max_cosets)? }),
                _ => return Err(syntax(line, "expected `vertex <id> system <file>`")),
            },
            "edge" => {
                let [id, rev, "from", v, "to", w, "system", file, "map", map @ ..] = tokens.as_slice() else {
                    return Err(syntax(line, "expected `edge <id> <rev-id> from <v> to <w> system <file> map <gen> -> <word> …`"));
                };
                let system = parse_system(&resolve(file)?, max_cosets)?;
                let origin = g.vertices.iter().find(|x| x.id == *v).ok_or_else(|| syntax(line, format!("unknown vertex `{v}` (declare vertices first)")))?;
                let (pe, pv) = (system.group.presentation(), origin.system.group.presentation());
                let mut images: Vec<Option<Word>> = vec![None; pe.ngens()];
                for (gen, img) in parse_map_tokens(map, line)? {
                    let k = pe.gen_index(&gen).ok_or_else(|| syntax(line, format!("unknown edge generator `{gen}`")))?;
                    images[k] = Some(parse_word_with(&img, &|s| pv.gen_index(s)).map_err(|e| syntax(line, e.to_string()))?);
                }
                let images = images
                    .into_iter()
                    .enumerate()
                    .map(|(k, w)| w.ok_or_else(|| syntax(line, format!("no image for `{}`", pe.generators[k]))))
                    .collect::<Result<Vec<Word>>>()?;
                g.edges.push(GraphEdge {
                    id: id.to_string(),
                    reverse: rev.to_string(),
                    from: v.to_string(),
                    to: w.to_string(),
                    system,
                    boundary: GeneratorMap::on_generators(images),
                });
            }
            "tree" => g.tree.extend(tokens.iter().map(|s| s.to_string())),
            "orient" => orientation.extend(tokens.iter().map(|s| s.to_string())),
            other => return Err(syntax(line, format!("unknown directive `{other}`"))),
        }
    }
    Ok((g, orientation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::free_product_system;
    use crate::fixtures::*;

    const NGON5: &str = "group D5\ngens a1 a2\nrel a1^2\nrel a2^2\nrel (a1 a2)^5\nsystem ngon5\ntype 1 := a2\ntype 2 := a1\n";

    #[test]
    fn parses_a_finite_system() {
        let s = parse_system(NGON5, 200_000).unwrap();
        assert_eq!(s.group.variant_name(), "finite");
        assert_eq!(s.rank(), 2);
        assert_eq!(s.name, "ngon5");
    }

    #[test]
    fn artin_groups_stay_presented() {
        let text = "gens a b\nrel a b a b^-1 a^-1 b^-1\nsystem braid3\ntype 1 := b\ntype 2 := a\n";
        let s = parse_system(text, 1000).unwrap();
        assert!(matches!(s.group, GroupHandle::Presented(_)));
        assert!(s.standard_calculus.is_some());
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_system("gens a\nsystem x\ntype 1 a\n", 100).unwrap_err();
        assert_eq!(err, IoError::Syntax { line: 3, msg: "expected `type <label> := <generators>`".into() });
        assert!(matches!(parse_system("gens a\nbogus\n", 100), Err(IoError::Syntax { line: 2, .. })));
        assert!(matches!(parse_system("gens a\ntype 1 := b\n", 100), Err(IoError::Syntax { .. })));
    }

    #[test]
    fn free_product_round_trips() {
        let s = free_product_system(&ngon(4), &rank_one("c", "3")).unwrap();
        let text = write_system(&s).unwrap();
        assert!(text.contains("backend free-product 2 finite finite"), "{text}");
        let back = parse_system(&text, 200_000).unwrap();
        assert_eq!(write_system(&back).unwrap(), text);
        assert_eq!(back.specials, s.specials);
    }

    #[test]
    fn twist_round_trips() {
        let alpha = artin_d(4);
        let beta = cyclic_actor(2);
        let cert = check_twist_admissible(&alpha, &beta, &[d_swap(4)], "1").unwrap();
        let s = twist_system(&alpha, &beta, &cert).unwrap();
        let text = write_system(&s).unwrap();
        assert!(text.contains("action tau a1 -> a4"), "{text}");
        let back = parse_system(&text, 200_000).unwrap();
        assert_eq!(write_system(&back).unwrap(), text);
        assert_eq!(back.specials, s.specials);
    }

    #[test]
    fn hnn_round_trips() {
        let alpha = coxeter_a(5);
        let (source, target, phi) = a5_hnn_map();
        let s = hnn_system(&alpha, &check_hnn_admissible(&alpha, source, target, &phi).unwrap()).unwrap();
        let text = write_system(&s).unwrap();
        let back = parse_system(&text, 200_000).unwrap();
        assert_eq!(write_system(&back).unwrap(), text);
        assert_eq!(back.specials, s.specials);
    }

    #[test]
    fn descriptor_builds_and_rejects() {
        let files = |name: &str| -> Result<String> {
            Ok(match name {
                "d5.sys" => NGON5.to_string(),
                "c2.sys" => "gens c\nrel c^2\nsystem C2\ntype 3 :=\n".to_string(),
                _ => return Err(IoError::Read { path: name.into(), msg: "missing".into() }),
            })
        };
        let s = build_from_descriptor("construct free-product\nalpha d5.sys\nbeta c2.sys\n", &files, 200_000).unwrap();
        assert_eq!(s.rank(), 3);
        let bad = "construct hnn\nalpha d5.sys\nsource = 1\ntarget = 2\nmap a2 -> a1 a2\n";
        assert!(matches!(build_from_descriptor(bad, &files, 200_000), Err(IoError::Construction(_))));
        assert!(matches!(build_from_descriptor("construct twist\nalpha nope.sys\nbeta c2.sys\nF0 = 1\n", &files, 10), Err(IoError::Read { .. })));
    }

    #[test]
    fn map_tokens_split_on_arrows() {
        let got = parse_map_tokens(&["e8", "->", "a1", "a2", "e9", "->", "a2"], 0).unwrap();
        assert_eq!(got, [("e8".to_string(), "a1 a2".to_string()), ("e9".to_string(), "a2".to_string())]);
        assert!(parse_map_tokens(&["e8", "a1"], 0).is_err());
    }
}
