use proptest::prelude::*;

use pcrtbp::homology::{kunneth, loop_ranks_sphere, path_space_ranks, rfh_ranks, GradedRanks, RfhRank};

// Oracle: plain convolution of truncated sequences.
fn convolve(a: &[u64], b: &[u64], upto: usize) -> Vec<u64> {
    (0..=upto).map(|n| (0..=n).map(|i| a.get(i).copied().unwrap_or(0) * b.get(n - i).copied().unwrap_or(0)).sum()).collect()
}

fn seq(g: &GradedRanks, upto: usize) -> Vec<u64> {
    g.ranks_up_to(upto)
}

#[test]
fn kunneth_examples() {
    let s1 = GradedRanks::circle();
    assert_eq!(seq(&kunneth(&s1, &s1).unwrap(), 5), vec![1, 2, 1, 0, 0, 0]);
    let ones = GradedRanks::new(vec![], 1).unwrap();
    assert_eq!(seq(&kunneth(&ones, &s1).unwrap(), 5), vec![1, 2, 2, 2, 2, 2]);
    let g = GradedRanks::new(vec![3, 0, 2], 5).unwrap();
    assert_eq!(kunneth(&g, &GradedRanks::unit()).unwrap(), g);
}

#[test]
fn path_space_table() {
    let p = path_space_ranks();
    assert_eq!(seq(&p, 9), vec![1, 3, 4, 4, 4, 4, 4, 4, 4, 4]);
    assert_eq!(p.tail(), 4);
    assert_eq!(p.rank(7), 4);
    let l = loop_ranks_sphere(2).unwrap();
    assert_eq!(l.rank(0), 1);
    assert!(l.stable_from() <= 2);
}

#[test]
fn rfh_ranks_for_circle_in_sphere() {
    let p = path_space_ranks();
    let table = rfh_ranks(&p, 1, 2, -20..=20).unwrap();
    for (k, r) in &table {
        if *k == 0 || *k == 1 {
            assert_eq!(*r, RfhRank::NotComputed);
        } else {
            assert_eq!(*r, RfhRank::Rank(4), "degree {k}");
        }
    }
    assert!(rfh_ranks(&p, 2, 2, 0..=3).is_err());
}

#[test]
fn rfh_symmetry_in_stable_range() {
    let p = path_space_ranks();
    let table = rfh_ranks(&p, 1, 2, -30..=30).unwrap();
    let at = |k: i64| table.iter().find(|e| e.0 == k).unwrap().1;
    for k in -28..=28i64 {
        if k.abs() >= 2 && (1 - k).abs() >= 2 {
            assert_eq!(at(k), at(1 - k));
        }
    }
}

fn ranks() -> impl Strategy<Value = (Vec<u64>, u64)> {
    (prop::collection::vec(0u64..6, 0..8), 0u64..4)
}

proptest! {
    #[test]
    fn kunneth_matches_truncated_convolution(a in prop::collection::vec(0u64..6, 1..8), (b, tb) in ranks()) {
        let ga = GradedRanks::finite(&a);
        let gb = GradedRanks::new(b, tb).unwrap();
        let out = kunneth(&ga, &gb).unwrap();
        let upto = 40;
        prop_assert_eq!(seq(&out, upto), convolve(&seq(&ga, upto), &seq(&gb, upto), upto));
        prop_assert_eq!(out.rank(1000), out.tail());
    }

    #[test]
    fn kunneth_is_commutative_and_associative(a in prop::collection::vec(0u64..4, 1..6), b in prop::collection::vec(0u64..4, 1..6), (c, tc) in ranks()) {
        let (ga, gb, gc) = (GradedRanks::finite(&a), GradedRanks::finite(&b), GradedRanks::new(c, tc).unwrap());
        prop_assert_eq!(kunneth(&ga, &gb).unwrap(), kunneth(&gb, &ga).unwrap());
        let l = kunneth(&kunneth(&ga, &gb).unwrap(), &gc).unwrap();
        let r = kunneth(&ga, &kunneth(&gb, &gc).unwrap()).unwrap();
        prop_assert_eq!(l, r);
    }
}
