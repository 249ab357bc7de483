mod common;

use std::sync::{Arc, OnceLock};

use cosetkit::finite::FiniteGroup;
use cosetkit::fixtures::ngon;
use cosetkit::incidence::{make_system, Budget, FtMode, Outcome, RcMode, TypeSet};
use cosetkit::io::{parse_system, write_system};
use cosetkit::presentation::{parse_presentation, Letter, Word};
use cosetkit::structured::GroupHandle;
use itertools::Itertools;
use proptest::prelude::*;

use common::*;

fn fixtures() -> &'static [(GroupHandle, Oracle)] {
    static CELL: OnceLock<Vec<(GroupHandle, Oracle)>> = OnceLock::new();
    CELL.get_or_init(|| {
        [c2_free_c2(), d3_amalgam_d4(), a5_hnn()]
            .into_iter()
            .enumerate()
            .map(|(k, g)| {
                let o = Oracle::new(&g, 900 + k as u64, 2);
                (g, o)
            })
            .collect()
    })
}

fn arb_word(ngens: usize, max: usize) -> impl Strategy<Value = Word> {
    proptest::collection::vec((0..ngens as u32, any::<bool>()), 0..=max).prop_map(|v| Word(v.into_iter().map(|(gen, inv)| Letter { gen, inv }).collect()))
}

fn fixture_and_words() -> impl Strategy<Value = (usize, Word, Word)> {
    (0usize..3).prop_flat_map(|k| {
        let n = fixtures()[k].0.presentation().ngens();
        (Just(k), arb_word(n, 14), arb_word(n, 14))
    })
}

fn dihedral(n: usize) -> Arc<FiniteGroup> {
    let text = format!("group D{n}\ngens a b\nrel a^2\nrel b^2\nrel (a b)^{n}");
    Arc::new(FiniteGroup::from_presentation(&parse_presentation(&text).unwrap(), 1000).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normal_forms_agree_with_permutation_oracle((k, u, v) in fixture_and_words()) {
        let (g, oracle) = &fixtures()[k];
        let (nu, nv) = (g.normalize(&u).unwrap(), g.normalize(&v).unwrap());
        prop_assert_eq!(nu == nv, oracle.equal(&u, &v));
        prop_assert_eq!(g.is_identity(&u).unwrap(), oracle.trivial(&u));
    }

    #[test]
    fn normal_forms_are_canonical((k, u, v) in fixture_and_words()) {
        let g = &fixtures()[k].0;
        let (nu, nv) = (g.normalize(&u).unwrap(), g.normalize(&v).unwrap());
        // the word of a normal form normalizes back to itself
        prop_assert_eq!(g.normalize(&g.word_of(&nu).unwrap()).unwrap(), nu.clone());
        prop_assert_eq!(g.mul(&nu, &nv).unwrap(), g.normalize(&u.concat(&v)).unwrap());
        prop_assert_eq!(g.inverse(&nu).unwrap(), g.normalize(&u.inverse()).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn orbit_stabilizer(n in 2usize..13, x in 0u32..1000, y in 0u32..1000) {
        let g = dihedral(n);
        let h = g.closure(&[x % g.order() as u32, y % g.order() as u32]);
        let (ids, count) = g.left_coset_ids(&h);
        prop_assert_eq!(count * h.count_ones(..), g.order());
        // elements sharing a coset id differ by an element of h
        for (a, b) in (0..g.order()).tuple_combinations() {
            let same = h.contains(g.mul(g.inv(a as u32), b as u32) as usize);
            prop_assert_eq!(ids[a] == ids[b], same);
        }
    }

    #[test]
    fn modes_agree_on_dihedral_systems(n in 3usize..10, picks in proptest::collection::vec(proptest::collection::vec(0u32..40, 1..3), 2..5)) {
        let g = dihedral(n);
        let gens: Vec<Vec<Word>> = picks.iter().map(|p| p.iter().map(|&x| g.word_of(x % g.order() as u32)).collect()).collect();
        let labels: Vec<String> = (1..=gens.len()).map(|i| i.to_string()).collect();
        let types = TypeSet::from_atoms(&labels.iter().map(String::as_str).collect::<Vec<_>>()).unwrap();
        let sys = make_system("D", GroupHandle::Finite(g.clone()), types, gens).unwrap();
        let b = Budget::default();
        let ft: Vec<Outcome> = FtMode::ALL.iter().map(|&m| sys.check_flag_transitive(m, &b).outcome).collect();
        prop_assert!(ft.iter().all_equal(), "ft modes {:?}", ft);
        let rc: Vec<Outcome> = RcMode::ALL.iter().filter(|&&m| m != RcMode::Intersections).map(|&m| sys.check_residually_connected(m, &b).outcome).collect();
        prop_assert!(rc.iter().all_equal(), "rc modes {:?}", rc);
        if ft[0] == Outcome::Holds {
            let (_, sets) = sys.finite_view().unwrap();
            let borel = sets[(1 << sys.rank()) - 1].count_ones(..);
            prop_assert_eq!(sys.chambers(&b), Some((g.order() / borel) as u64));
        }
    }

    #[test]
    fn system_files_round_trip(n in 2usize..9) {
        let text = write_system(&ngon(n)).unwrap();
        let again = parse_system(&text, 1000).unwrap();
        prop_assert_eq!(write_system(&again).unwrap(), text);
        prop_assert_eq!(again.chambers(&Budget::default()), Some(2 * n as u64));
    }
}
