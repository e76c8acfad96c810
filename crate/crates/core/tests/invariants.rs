use covlab::probes::sep;
use covlab::{
    dist_lower, eval_dual_norm, eval_norm, intersects, norming_functional, Body, Index, Intersection, NormSpec,
    SparseVector,
};
use proptest::prelude::*;

fn sparse(max_idx: Index, max_len: usize) -> impl Strategy<Value = SparseVector> {
    prop::collection::vec((0..max_idx, -5.0f64..5.0), 0..=max_len).prop_map(SparseVector::from_pairs)
}

fn m_value() -> impl Strategy<Value = f64> {
    prop_oneof![Just(8.0), Just(32.0), Just(128.0), 2.5f64..500.0]
}

fn spec() -> impl Strategy<Value = NormSpec> {
    prop_oneof![
        Just(NormSpec::Sup),
        m_value().prop_map(NormSpec::m_norm),
        (m_value(), prop::collection::vec(0u32..8, 1..4), 0.1f64..3.0).prop_map(|(m, g, q)| NormSpec::scaled(m, g, q)),
    ]
}

fn smooth_spec() -> impl Strategy<Value = NormSpec> {
    spec().prop_filter("smooth norms only", |s| *s != NormSpec::Sup)
}

fn mnorm(x: &SparseVector, m: f64) -> f64 {
    eval_norm(&NormSpec::m_norm(m), x).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn sandwich(x in sparse(16, 8), m in m_value()) {
        let n = mnorm(&x, m);
        let s = x.norm_sup();
        prop_assert!(n <= s + 1e-10);
        prop_assert!(s <= (1.0 + 1.0 / m).sqrt() * n + 1e-10);
    }

    #[test]
    fn flat_face(x in sparse(8, 6), y in sparse(8, 6), m in m_value(), shift in 8u32..16) {
        prop_assume!(!x.is_zero());
        let x = x.scale(1.0 / mnorm(&x, m));
        let cap = 1.0 - (2.0 / m).sqrt();
        let y = SparseVector::from_pairs(y.iter().map(|(i, v)| (i + shift, v)));
        let ys = y.norm_sup();
        let y = if ys > cap { y.scale(cap / ys) } else { y };
        prop_assert!((mnorm(&x.add(&y), m) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn lattice(x in sparse(12, 8), shrink in prop::collection::vec(0.0f64..=1.0, 12), s in spec()) {
        let y = x.map_values(|i, v| v * shrink[i as usize]);
        prop_assert!(eval_norm(&s, &y).unwrap() <= eval_norm(&s, &x).unwrap() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn triangle_and_homogeneity(x in sparse(12, 8), y in sparse(12, 8), l in -4.0f64..4.0, s in spec()) {
        let n = |v: &SparseVector| eval_norm(&s, v).unwrap();
        prop_assert!(n(&x.add(&y)) <= n(&x) + n(&y) + 1e-10);
        prop_assert!((n(&x.scale(l)) - l.abs() * n(&x)).abs() <= 1e-10 * (1.0 + n(&x)));
    }

    #[test]
    fn norming_functional_is_tight(x in sparse(12, 6), s in smooth_spec()) {
        prop_assume!(x.norm_sup() > 1e-3);
        let f = norming_functional(&s, &x).unwrap();
        prop_assert!((f.apply(&x) - eval_norm(&s, &x).unwrap()).abs() <= 1e-7);
        prop_assert!((eval_dual_norm(&s, &f).unwrap() - 1.0).abs() <= 1e-7);
    }

    #[test]
    fn dual_norm_bounds_pairing(x in sparse(10, 6), f in sparse(10, 6), s in spec()) {
        let pairing = x.dot(&f);
        let bound = eval_norm(&s, &x).unwrap() * eval_dual_norm(&s, &covlab::DualFunctional(f)).unwrap();
        prop_assert!(pairing.abs() <= bound * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn flat_extension_of_scaled_ball(
        x in sparse(6, 5), y in sparse(4, 4), m in m_value(), q in 0.2f64..3.0,
        g0 in prop::collection::btree_set(0u32..6, 1..4),
    ) {
        // Γ₁ = 0..6 contains Γ₀; y lives on 10.. (off Γ₁).
        let s = NormSpec::scaled(m, g0.iter().copied(), q);
        prop_assume!(!x.is_zero());
        let x = x.scale(1.0 / eval_norm(&s, &x).unwrap());
        let cap = 1.0 - (2.0 / m).sqrt();
        let y = SparseVector::from_pairs(y.iter().map(|(i, v)| (i + 10, v)));
        let y = if y.norm_sup() > cap { y.scale(cap / y.norm_sup()) } else { y };
        prop_assert!(eval_norm(&s, &x.add(&y)).unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn scaled_ball_splits(
        x in sparse(10, 8), m in m_value(), q in 0.2f64..3.0,
        g0 in prop::collection::btree_set(0u32..10, 1..5),
    ) {
        let g0: Vec<Index> = g0.into_iter().collect();
        let s = NormSpec::scaled(m, g0.iter().copied(), q);
        prop_assume!(!x.is_zero());
        let x = x.scale(1.0 / eval_norm(&s, &x).unwrap());
        prop_assert!(mnorm(&x.project(&g0), m) <= q * (1.0 + 1e-10));
        prop_assert!(x.project_out(&g0).norm_sup() <= (1.0 + 1.0 / m).sqrt() * (1.0 + 1e-10));
    }

    #[test]
    fn same_norm_balls_meet_iff_centers_close(
        a in sparse(6, 4), b in sparse(6, 4), ra in 0.1f64..3.0, rb in 0.1f64..3.0, s in spec(),
    ) {
        let (ba, bb) = (Body::new(a.clone(), ra, s.clone()).unwrap(), Body::new(b.clone(), rb, s.clone()).unwrap());
        let d = eval_norm(&s, &a.sub(&b)).unwrap();
        match intersects(&ba, &bb, 1e-9).unwrap() {
            Intersection::Intersecting { witness } => {
                prop_assert!(d <= ra + rb + 1e-12);
                prop_assert!(ba.gauge(&witness) <= 1.0 + 1e-10 && bb.gauge(&witness) <= 1.0 + 1e-10);
            }
            Intersection::Disjoint { certificate } => {
                prop_assert!(d > ra + rb - 1e-12);
                let m = certificate.recompute(&ba, &bb).unwrap();
                prop_assert!(m > 0.0 && (m - certificate.margin()).abs() <= 1e-10);
            }
            Intersection::Unresolved => prop_assert!(false, "unresolved same-norm pair"),
        }
    }

    #[test]
    fn mixed_norm_certificates_recompute(
        a in sparse(4, 3), b in sparse(4, 3), ra in 0.2f64..2.0, rb in 0.2f64..2.0, sa in spec(), sb in spec(),
    ) {
        let (ba, bb) = (Body::new(a, ra, sa).unwrap(), Body::new(b, rb, sb).unwrap());
        match intersects(&ba, &bb, 1e-9).unwrap() {
            Intersection::Intersecting { witness } => {
                prop_assert!(ba.gauge(&witness) <= 1.0 + 1e-10 && bb.gauge(&witness) <= 1.0 + 1e-10);
            }
            Intersection::Disjoint { certificate } => {
                let m = certificate.recompute(&ba, &bb).unwrap();
                prop_assert!(m > 0.0 && (m - certificate.margin()).abs() <= 1e-10);
            }
            Intersection::Unresolved => {}
        }
    }

    #[test]
    fn dist_lower_is_sound(
        c in sparse(5, 4), x in sparse(5, 4), r in 0.1f64..2.0, s in spec(),
        dirs in prop::collection::vec(sparse(5, 5), 16),
    ) {
        let b = Body::new(c.clone(), r, s.clone()).unwrap();
        let lb = dist_lower(&b, &x).value;
        prop_assert!(lb >= 0.0);
        for d in dirs {
            let n = eval_norm(&s, &d).unwrap();
            if n == 0.0 { continue; }
            let z = c.add(&d.scale(r / n));
            prop_assert!(x.sub(&z).norm_sup() >= lb - 1e-12);
        }
    }

    #[test]
    fn sep_is_permutation_invariant_and_homogeneous(
        pts in prop::collection::vec(sparse(6, 4), 2..8), l in 0.1f64..10.0, s in spec(), rot in 0usize..8,
    ) {
        let base = sep(&pts, &s).unwrap();
        let mut perm = pts.clone();
        perm.rotate_left(rot % pts.len());
        perm.reverse();
        prop_assert_eq!(sep(&perm, &s).unwrap(), base);
        let scaled: Vec<SparseVector> = pts.iter().map(|p| p.scale(l)).collect();
        prop_assert!((sep(&scaled, &s).unwrap() - l * base).abs() <= 1e-10 * (1.0 + l * base));
    }
}

proptest! {
    #[test]
    fn containment_is_monotone_in_radius(
        c in sparse(6, 4), x in sparse(6, 4), r1 in 0.05f64..3.0, extra in 0.0f64..2.0, s in spec(),
    ) {
        let small = Body::new(c.clone(), r1, s.clone()).unwrap();
        let large = Body::new(c, r1 + extra, s).unwrap();
        prop_assert!(!small.contains(&x) || large.contains(&x));
    }
}
