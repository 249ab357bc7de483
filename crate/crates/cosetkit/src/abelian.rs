//! Abelianization invariants via Smith normal form over the integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::presentation::Presentation;

/// Free rank and torsion coefficients (each > 1, dividing the next).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Abelianization {
    pub rank: usize,
    pub torsion: Vec<BigInt>,
}

impl std::fmt::Display for Abelianization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.rank > 0 {
            parts.push(if self.rank == 1 { "Z".into() } else { format!("Z^{}", self.rank) });
        }
        parts.extend(self.torsion.iter().map(|t| format!("Z/{t}")));
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Diagonal entries (nonzero, divisibility chain) of the Smith normal form.
pub fn smith_diagonal(mut m: Vec<Vec<BigInt>>, ncols: usize) -> Vec<BigInt> {
    let nrows = m.len();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < nrows.min(ncols) {
        // smallest nonzero entry in the remaining block
        let mut best: Option<(usize, usize)> = None;
        for i in t..nrows {
            for j in t..ncols {
                if !m[i][j].is_zero() && best.map_or(true, |(bi, bj)| m[i][j].abs() < m[bi][bj].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let mut changed = false;
            for i in (t + 1)..nrows {
                if !m[i][t].is_zero() {
                    let q = m[i][t].div_floor(&m[t][t]);
                    for j in t..ncols {
                        let v = &m[t][j] * &q;
                        m[i][j] -= v;
                    }
                    if !m[i][t].is_zero() {
                        m.swap(t, i);
                        changed = true;
                    }
                }
            }
            for j in (t + 1)..ncols {
                if !m[t][j].is_zero() {
                    let q = m[t][j].div_floor(&m[t][t]);
                    for row in m.iter_mut().skip(t) {
                        let v = &row[t] * &q;
                        row[j] -= v;
                    }
                    if !m[t][j].is_zero() {
                        for row in m.iter_mut() {
                            row.swap(t, j);
                        }
                        changed = true;
                    }
                }
            }
            if changed {
                continue;
            }
            // enforce divisibility of the rest of the block
            let pivot = m[t][t].clone();
            let bad = (t + 1..nrows).find(|&i| (t + 1..ncols).any(|j| !(&m[i][j] % &pivot).is_zero()));
            match bad {
                Some(i) => {
                    for j in t..ncols {
                        let v = m[i][j].clone();
                        m[t][j] += v;
                    }
                }
                None => break,
            }
        }
        diag.push(m[t][t].abs());
        t += 1;
    }
    diag
}

pub fn abelianize(p: &Presentation) -> Abelianization {
    let n = p.ngens();
    let rows: Vec<Vec<BigInt>> = p
        .relators
        .iter()
        .map(|r| r.exponent_sums(n).into_iter().map(BigInt::from).collect())
        .collect();
    let diag = smith_diagonal(rows, n);
    let rank = n - diag.len();
    let torsion = diag.into_iter().filter(|d| !d.is_one()).collect();
    Abelianization { rank, torsion }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentation::{parse_presentation, tietze_eliminate, Word};

    fn ab(text: &str) -> Abelianization {
        abelianize(&parse_presentation(text).unwrap())
    }

    #[test]
    fn small_groups() {
        assert_eq!(ab("gens a\nrel a^5").to_string(), "Z/5");
        assert_eq!(ab("gens a b").rank, 2);
        assert_eq!(ab("gens a b\nrel a^2\nrel b^2\nrel (a b)^3").to_string(), "Z/2");
        assert_eq!(ab("gens a b\nrel a^4\nrel b^6\nrel a b a^-1 b^-1").to_string(), "Z/2 + Z/12");
        assert_eq!(ab("gens a b c\nrel a b a b^-1 a^-1 b^-1").to_string(), "Z^2");
    }

    #[test]
    fn smith_against_determinant() {
        // |det| of a square nonsingular matrix equals the product of the diagonal.
        let m = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let big: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
        let d = smith_diagonal(big, 3);
        let prod: BigInt = d.iter().product();
        let det = 2 * (6 * -16 - 12 * -4) - 4 * (-6 * -16 - 12 * 10) + 4 * (-6 * -4 - 6 * 10);
        assert_eq!(prod, BigInt::from(i64::abs(det)));
        assert!(d.windows(2).all(|w| (&w[1] % &w[0]).is_zero()));
    }

    #[test]
    fn tietze_preserves_invariants() {
        let p = parse_presentation("gens a b c\nrel a^4\nrel c^-1 a b\nrel b^6 a^2").unwrap();
        let repl = p.word("a b").unwrap();
        let q = tietze_eliminate(&p, 2, &repl).unwrap();
        assert_eq!(abelianize(&p), abelianize(&q));
        let _ = Word::empty();
    }
}
