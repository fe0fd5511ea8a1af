//! Randomized property tests for the integer-lattice routines, field
//! arithmetic, and the weight enumerator.

use proptest::prelude::*;

use delpezzo::code::GeneratorMatrix;
use delpezzo::families::prime_power;
use delpezzo::gf::FiniteField;
use delpezzo::lattice::{
    kernel, quotient_invariants, row_basis, smith_normal_form, IntMatrix,
};

fn int_matrix() -> impl Strategy<Value = IntMatrix> {
    (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
        proptest::collection::vec(proptest::collection::vec(-30i64..=30, c), r)
            .prop_map(move |rows| IntMatrix::from_rows(rows).pad_cols(c))
    })
}

proptest! {
    #[test]
    fn snf_transforms_are_consistent(a in int_matrix()) {
        let s = smith_normal_form(&a).unwrap();
        prop_assert_eq!(s.u.mul3(&a, &s.v).unwrap(), s.d.clone());
        prop_assert_eq!(s.u.mul(&s.uinv).unwrap(), IntMatrix::identity(a.rows));
        prop_assert_eq!(s.v.mul(&s.vinv).unwrap(), IntMatrix::identity(a.cols));
        let f = s.invariant_factors();
        for w in f.windows(2) {
            prop_assert_eq!(w[1] % w[0], 0);
        }
    }

    #[test]
    fn kernel_rows_annihilate(a in int_matrix()) {
        let k = kernel(&a).unwrap();
        if k.rows > 0 {
            prop_assert!(k.mul(&a).unwrap().is_zero());
        }
        // rank-nullity over Q
        let r = row_basis(&a).unwrap();
        prop_assert_eq!(k.rows + r.rows, a.rows);
    }

    #[test]
    fn quotient_order_matches_invariant_factors(a in int_matrix()) {
        // |torsion| from quotient_invariants equals the product of the
        // nontrivial invariant factors of the relation matrix
        let q = quotient_invariants(a.cols, &a).unwrap();
        let f = smith_normal_form(&a).unwrap().invariant_factors();
        let expect: i64 = f.iter().filter(|&&d| d > 1).product();
        let got: i64 = q.torsion.iter().product();
        prop_assert_eq!(got, expect);
        prop_assert_eq!(q.free_rank + row_basis(&a).unwrap().rows, a.cols);
    }

    #[test]
    fn field_arithmetic_laws(pe in prop::sample::select(vec![(2u64, 4usize), (3, 3), (5, 2), (7, 1)]),
                             codes in proptest::collection::vec(0u64..100, 3)) {
        let (p, e) = pe;
        let f = FiniteField::new(p, e).unwrap();
        let order = f.order();
        let a = f.from_code(codes[0] % order);
        let b = f.from_code(codes[1] % order);
        let c = f.from_code(codes[2] % order);
        prop_assert_eq!(&(&a + &b) * &c, &(&a * &c) + &(&b * &c));
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a - &b) + &b, a.clone());
        // Frobenius x -> x^p is additive
        let fr = |x: &delpezzo::gf::FieldElement| x.pow(p);
        prop_assert_eq!(fr(&(&a + &b)), &fr(&a) + &fr(&b));
    }

    #[test]
    fn weight_enumerator_matches_naive_on_random_matrices(
        q in prop::sample::select(vec![2u64, 3, 4, 5]),
        seed in proptest::collection::vec(0u64..1000, 18),
    ) {
        let (k, n) = (3usize, 6usize);
        let (p, e) = prime_power(q).unwrap();
        let f = FiniteField::new(p, e).unwrap();
        let rows: Vec<Vec<u64>> = (0..k)
            .map(|i| (0..n).map(|j| seed[i * n + j] % q).collect())
            .collect();
        let m = GeneratorMatrix {
            family: "test".into(),
            q,
            p,
            e,
            modulus: f.modulus().to_vec(),
            k,
            n,
            rows: rows.clone(),
            column_kinds: vec!["plane".into(); n],
            constants: vec![],
        };
        let fast = m.weight_distribution(1_000_000, 2).unwrap();

        // direct oracle over all q^k messages in field arithmetic
        let elems: Vec<_> = f.enumerate().collect();
        let mut naive = vec![0u64; n + 1];
        let qk = (q as usize).pow(k as u32);
        for msg in 0..qk {
            let mut digits = vec![0usize; k];
            let mut v = msg;
            for d in digits.iter_mut() {
                *d = v % q as usize;
                v /= q as usize;
            }
            let mut w = 0;
            for j in 0..n {
                let mut acc = f.zero();
                for i in 0..k {
                    acc = &acc + &(&elems[digits[i]] * &elems[rows[i][j] as usize]);
                }
                if !acc.is_zero() {
                    w += 1;
                }
            }
            naive[w] += 1;
        }
        prop_assert_eq!(fast, naive);
    }
}
