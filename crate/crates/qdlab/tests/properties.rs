use num_traits::{Signed, Zero};
use proptest::prelude::*;

use qdlab::lattice::{lll, shortest_vector};
use qdlab::plucker::{covolume_sq, sort_sign, wedge};
use qdlab::rational::{fmt_q, parse_q, qi, qr};
use qdlab::Q;

fn small_q() -> impl Strategy<Value = Q> {
    (-12i64..=12, 1i64..=9).prop_map(|(n, d)| qr(n, d))
}

fn vectors(k: usize, d: usize) -> impl Strategy<Value = Vec<Vec<Q>>> {
    prop::collection::vec(prop::collection::vec(small_q(), d), k)
}

fn det(m: &[Vec<Q>]) -> Q {
    let n = m.len();
    let mut a = m.to_vec();
    let mut out = qi(1);
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else { return Q::zero() };
        if p != c {
            a.swap(p, c);
            out = -out;
        }
        out *= &a[c][c];
        for r in c + 1..n {
            let f = &a[r][c] / &a[c][c];
            for j in c..n {
                let v = &f * &a[c][j];
                a[r][j] -= v;
            }
        }
    }
    out
}

fn gram(w: &[Vec<Q>]) -> Vec<Vec<Q>> {
    w.iter().map(|u| w.iter().map(|v| u.iter().zip(v).map(|(a, b)| a * b).sum()).collect()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn covolume_is_gram_determinant(k in 1usize..=3, d in 3usize..=4, seed in vectors(3, 4)) {
        let w: Vec<Vec<Q>> = seed.into_iter().take(k).map(|v| v.into_iter().take(d).collect()).collect();
        let g = det(&gram(&w));
        prop_assert_eq!(covolume_sq(&w), g.clone());
        prop_assert_eq!(wedge(&w).unwrap().norm_sq(), g);
    }

    #[test]
    fn wedge_is_alternating(w in vectors(3, 4)) {
        let base = wedge(&w).unwrap();
        let swapped = wedge(&[w[1].clone(), w[0].clone(), w[2].clone()]).unwrap();
        prop_assert_eq!(swapped.add(&base).norm_sq(), Q::zero());
        let repeated = wedge(&[w[0].clone(), w[1].clone(), w[0].clone()]).unwrap();
        prop_assert!(repeated.is_zero());
    }

    #[test]
    fn sort_sign_counts_inversions(perm in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
        let (sorted, sign) = sort_sign(&perm).unwrap();
        prop_assert_eq!(sorted, (0..5).collect::<Vec<_>>());
        let inv = (0..5).flat_map(|i| (i + 1..5).map(move |j| (i, j))).filter(|&(i, j)| perm[i] > perm[j]).count();
        prop_assert_eq!(sign, if inv % 2 == 0 { 1 } else { -1 });
    }

    #[test]
    fn rational_text_round_trips(q in small_q()) {
        prop_assert_eq!(parse_q(&fmt_q(&q)).unwrap(), q);
    }

    #[test]
    fn reduction_keeps_the_lattice(b in vectors(2, 2)) {
        let d0 = det(&b);
        prop_assume!(!d0.is_zero());
        let r = lll(&b, &qr(3, 4)).unwrap();
        prop_assert_eq!(det(&r.basis).abs(), d0.abs());
        let s = shortest_vector(&b, 1_000_000).unwrap();
        for v in &r.basis {
            let n: Q = v.iter().map(|x| x * x).sum();
            prop_assert!(s.len_sq <= n);
        }
        prop_assert_eq!(s.len_sq, qdlab::lattice::brute_shortest_len_sq(&r.basis, 3));
    }
}
