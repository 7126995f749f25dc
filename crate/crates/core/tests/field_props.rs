use cyclescope::field::{Domain, ScalarField};
use cyclescope::poly::Poly;
use proptest::prelude::*;

fn field(p: Poly) -> ScalarField {
    ScalarField::new(p, Poly::constant(1.0), Domain::real_line()).unwrap()
}

fn coeffs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 2..=max_len).prop_filter("non-constant", |c| c.last().unwrap().abs() > 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn planted_roots_recovered(
        lead in prop_oneof![-2.0..-0.5f64, 0.5..2.0f64],
        start in -3.0..-2.0f64,
        gaps in prop::collection::vec(0.4..1.2f64, 1..=3),
        mults in prop::collection::vec(1u32..=2, 4),
    ) {
        let mut roots = vec![start];
        for g in &gaps {
            roots.push(roots.last().unwrap() + g);
        }
        let mut planted = Vec::new();
        for (r, m) in roots.iter().zip(&mults) {
            for _ in 0..*m {
                planted.push(*r);
            }
        }
        prop_assume!(planted.len() <= 6);
        let f = field(Poly::from_roots(lead, &planted));
        let z = f.zeros((-4.0, 4.0), 1e-10).unwrap();
        prop_assert_eq!(z.len(), roots.len());
        for (r, m) in roots.iter().zip(&mults) {
            prop_assert_eq!(z.multiplicity_at(*r, 1e-6), Some(*m));
        }
    }

    #[test]
    fn derivatives_match_differences(num in coeffs(6), den in prop::collection::vec(-0.4..0.4f64, 2), x in -2.0..2.0f64) {
        // negative discriminant: no real poles
        let d = Poly::new(vec![1.0, den[0], den[0] * den[0] / 4.0 + 0.1 + den[1].abs()]);
        let f = ScalarField::new(Poly::new(num), d, Domain::real_line()).unwrap();
        let h = 1e-5;
        for k in 1..=3 {
            let fd = (f.eval(x + h, k - 1).unwrap() - f.eval(x - h, k - 1).unwrap()) / (2.0 * h);
            let exact = f.eval(x, k).unwrap();
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "k={} fd={} exact={}", k, fd, exact);
        }
    }

    #[test]
    fn squares_never_change_sign(c in coeffs(4)) {
        let p = Poly::new(c);
        let f = field(p.mul(&p));
        prop_assert_eq!(f.sign_changes((-10.0, 10.0)).unwrap().count, 0);
    }

    #[test]
    fn addition_commutes_and_associates(a in coeffs(5), b in coeffs(5), c in coeffs(5), x in -2.0..2.0f64) {
        let (fa, fb, fc) = (field(Poly::new(a)), field(Poly::new(b)), field(Poly::new(c)));
        let ab = fa.add(&fb).unwrap();
        let ba = fb.add(&fa).unwrap();
        let left = ab.add(&fc).unwrap();
        let right = fa.add(&fb.add(&fc).unwrap()).unwrap();
        let scale = 1.0 + fa.value(x).abs() + fb.value(x).abs() + fc.value(x).abs();
        prop_assert!((ab.value(x) - ba.value(x)).abs() <= 1e-12 * scale);
        prop_assert!((left.value(x) - right.value(x)).abs() <= 1e-12 * scale);
    }
}
