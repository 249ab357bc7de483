//! Fixed-order property reports and the exit-code rule shared by the command-line tool.

use std::fmt;

use crate::incidence::{Basis, Budget, CosetIncidenceSystem, Firmness, FtMode, Outcome, RcMode, Verdict};

/// A property that can be requested with `--props`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Prop {
    Ft,
    Rc,
    Firm,
    Thin,
    Thick,
    Finite,
    Chambers,
    FlagComplex,
    Hypertope,
}

impl Prop {
    pub const ALL: [Prop; 9] = [Prop::Ft, Prop::Rc, Prop::Firm, Prop::Thin, Prop::Thick, Prop::Finite, Prop::Chambers, Prop::FlagComplex, Prop::Hypertope];

    pub fn parse(s: &str) -> Option<Prop> {
        Some(match s.trim() {
            "ft" => Prop::Ft,
            "rc" => Prop::Rc,
            "firm" | "firmness" => Prop::Firm,
            "thin" => Prop::Thin,
            "thick" => Prop::Thick,
            "finite" => Prop::Finite,
            "chambers" => Prop::Chambers,
            "flag_complex" | "flag-complex" => Prop::FlagComplex,
            "hypertope" => Prop::Hypertope,
            _ => return None,
        })
    }

    pub fn parse_list(s: &str) -> Result<Vec<Prop>, String> {
        let mut v: Vec<Prop> = s.split(',').filter(|p| !p.trim().is_empty()).map(|p| Prop::parse(p).ok_or_else(|| format!("unknown property `{}`", p.trim()))).collect::<Result<_, _>>()?;
        v.sort();
        v.dedup();
        Ok(v)
    }
}

/// Ordered `key=value` lines plus the worst outcome among the requested properties.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub lines: Vec<(String, String)>,
    pub outcomes: Vec<Outcome>,
}

impl Report {
    /// 0 when everything requested holds, 1 if anything fails, 2 if something is unknown.
    pub fn exit_code(&self) -> i32 {
        if self.outcomes.contains(&Outcome::Fails) {
            1
        } else if self.outcomes.contains(&Outcome::Unknown) {
            2
        } else {
            0
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.lines {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Header line recording every limit that can influence a verdict.
pub fn budget_header(b: &Budget) -> String {
    format!("# max_cosets={} max_word_len={} samples={} seed={}", b.max_cosets, b.max_word_len, b.samples, b.seed)
}

fn push_verdict(lines: &mut Vec<(String, String)>, key: &str, v: &Verdict) {
    lines.push((key.into(), v.outcome.to_string()));
    if v.outcome == Outcome::Fails {
        lines.push((format!("{key}_witness"), v.witness.clone().unwrap_or_else(|| "none recorded".into())));
    }
    if let Basis::Theorem(t) = &v.basis {
        if v.outcome == Outcome::Holds {
            lines.push((format!("{key}_certificate"), t.clone()));
        }
    }
}

fn firmness_outcome(p: Prop, f: Firmness) -> Outcome {
    match (p, f) {
        (_, Firmness::Unknown) => Outcome::Unknown,
        (Prop::Thin, Firmness::Thin) | (Prop::Thick, Firmness::Thick) => Outcome::Holds,
        (Prop::Firm, Firmness::NotFirm) => Outcome::Fails,
        (Prop::Firm, _) => Outcome::Holds,
        _ => Outcome::Fails,
    }
}

/// Runs the requested checks in the fixed key order.
pub fn build_report(sys: &CosetIncidenceSystem, props: &[Prop], budget: &Budget) -> Report {
    let want = |p: Prop| props.contains(&p);
    let mut lines = vec![("system".to_string(), sys.name.clone()), ("rank".to_string(), sys.rank().to_string())];
    let mut outcomes = Vec::new();
    if want(Prop::Ft) {
        let v = sys.check_flag_transitive(FtMode::Products, budget);
        outcomes.push(v.outcome);
        push_verdict(&mut lines, "ft", &v);
    }
    if want(Prop::Rc) {
        let v = sys.check_residually_connected(RcMode::Rc1, budget);
        outcomes.push(v.outcome);
        push_verdict(&mut lines, "rc", &v);
    }
    let firm_props: Vec<Prop> = [Prop::Firm, Prop::Thin, Prop::Thick].into_iter().filter(|&p| want(p)).collect();
    if !firm_props.is_empty() {
        let (cls, v) = sys.check_firm_thin();
        lines.push(("firmness".into(), cls.to_string()));
        let worst = firm_props.iter().map(|&p| firmness_outcome(p, cls)).max_by_key(|o| match o {
            Outcome::Holds => 0,
            Outcome::Unknown => 1,
            Outcome::Fails => 2,
        });
        let worst = worst.expect("non-empty");
        outcomes.push(worst);
        if worst == Outcome::Fails {
            let why = v.witness.clone().unwrap_or_else(|| {
                let idx = sys.corank_one_indices();
                let shown: Vec<String> = idx
                    .iter()
                    .enumerate()
                    .map(|(j, i)| format!("{}:{}", sys.types.label(j), match i {
                        crate::structured::IndexValue::Finite(n) => n.to_string(),
                        crate::structured::IndexValue::Infinite => "inf".into(),
                        crate::structured::IndexValue::Unknown => "?".into(),
                    }))
                    .collect();
                format!("firmness={cls} corank-one indices {}", shown.join(" "))
            });
            lines.push(("firmness_witness".into(), why));
        }
        if let Basis::Theorem(t) = &v.basis {
            if worst == Outcome::Holds {
                lines.push(("firmness_certificate".into(), t.clone()));
            }
        }
    }
    let finite = (want(Prop::Finite) || want(Prop::Chambers)).then(|| sys.check_finite(budget));
    if want(Prop::Finite) {
        let (v, _) = finite.as_ref().expect("computed");
        outcomes.push(v.outcome);
        push_verdict(&mut lines, "finite", v);
    }
    if want(Prop::Chambers) {
        let value = match sys.chambers(budget) {
            Some(n) => {
                outcomes.push(Outcome::Holds);
                n.to_string()
            }
            None => {
                let (v, _) = finite.as_ref().expect("computed");
                if v.is_fails() {
                    outcomes.push(Outcome::Holds);
                    "infinite".into()
                } else {
                    outcomes.push(Outcome::Unknown);
                    "unknown".into()
                }
            }
        };
        lines.push(("chambers".into(), value));
    }
    if want(Prop::FlagComplex) {
        let v = sys.is_flag_complex(budget);
        outcomes.push(v.outcome);
        push_verdict(&mut lines, "flag_complex", &v);
    }
    if want(Prop::Hypertope) {
        let v = sys.is_regular_hypertope(budget);
        outcomes.push(v.outcome);
        push_verdict(&mut lines, "hypertope", &v);
    }
    Report { lines, outcomes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{klein, ngon};

    #[test]
    fn polygon_report_holds() {
        let r = build_report(&ngon(5), &Prop::parse_list("ft,rc,thin").unwrap(), &Budget::default());
        assert_eq!(r.to_string(), "system=ngon5\nrank=2\nft=holds\nrc=holds\nfirmness=thin\n");
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn klein_report_fails_with_witness() {
        let k = klein(&[&["x"], &["y"], &["x y"]], &["1", "2", "3"]);
        let r = build_report(&k, &[Prop::Ft], &Budget::default());
        assert_eq!(r.get("ft"), Some("fails"));
        assert!(r.get("ft_witness").unwrap().contains("J={1,2} i=3"), "{r}");
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn property_lists() {
        assert_eq!(Prop::parse_list("thin,ft,ft").unwrap(), [Prop::Ft, Prop::Thin]);
        assert!(Prop::parse_list("ft,bogus").is_err());
    }
}
