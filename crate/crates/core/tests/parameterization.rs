use margmod::contrasts::effect_components;
use margmod::parameterization::collapsibility_check;
use margmod::table::is_ordered_decomposable;
use margmod::{CodingKind, Effect, MarginalSequence, MllError, Parameterization, Table, VariableScheme};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn seq(s: &VariableScheme, ms: &[&str]) -> MarginalSequence {
    let v: Vec<Vec<String>> = ms.iter().map(|m| m.chars().map(|c| c.to_string()).collect()).collect();
    MarginalSequence::from_names(s, &v).unwrap()
}

fn random_table(s: &VariableScheme, rng: &mut ChaCha8Rng) -> Table {
    let cells = (0..s.cell_count()).map(|_| rng.random_range(0.05..1.0)).collect();
    Table::counts(s.clone(), cells).unwrap().normalized().unwrap()
}

fn eff(s: &VariableScheme, names: &str) -> Effect {
    let v: Vec<String> = names.chars().map(|c| c.to_string()).collect();
    s.effect_from_names(&v).unwrap()
}

#[test]
fn jacobian_matches_central_differences() {
    let s = VariableScheme::from_sizes(&[("A", 2), ("B", 3), ("C", 2)]).unwrap();
    let sq = seq(&s, &["AB", "BC", "ABC"]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for coding in [CodingKind::Local, CodingKind::Global] {
        let p = Parameterization::build_with(&s, &sq, |_| coding, true).unwrap();
        for _ in 0..5 {
            let t = random_table(&s, &mut rng);
            let m: Vec<f64> = t.cells().iter().map(|v| v * 500.0).collect();
            let jac = p.jacobian(&Table::counts(s.clone(), m.clone()).unwrap()).unwrap();
            for i in 0..m.len() {
                let h = 1e-6 * m[i];
                let mut up = m.clone();
                let mut dn = m.clone();
                up[i] += h;
                dn[i] -= h;
                let lu = p.lambda_of_frequencies(&up).unwrap();
                let ld = p.lambda_of_frequencies(&dn).unwrap();
                for k in 0..p.n_components() {
                    let fd = (lu[k] - ld[k]) / (2.0 * h);
                    let err = (fd - jac[(i, k)]).abs() / jac[(i, k)].abs().max(1e-3);
                    assert!(err < 1e-6, "cell {i} comp {}: {fd} vs {}", p.label(k), jac[(i, k)]);
                }
            }
        }
    }
}

/// λ targets of the three incompatible two-way tables, with ABC set to zero.
fn incompatible_lambda(s: &VariableScheme, p: &Parameterization) -> Vec<f64> {
    let two = VariableScheme::binary(&["X", "Y"]).unwrap();
    let tabs = [("AB", [3.0, 1.0, 1.0, 3.0]), ("AC", [1.0, 3.0, 3.0, 1.0]), ("BC", [3.0, 1.0, 1.0, 3.0])];
    let mut lam = vec![0.0; p.n_components()];
    for (names, cells) in tabs {
        let t = Table::counts(two.clone(), cells.to_vec()).unwrap();
        let m = eff(s, names);
        let vars: Vec<usize> = m.indices().collect();
        for (sub, local) in [(Effect::single(vars[0]), Effect(1)), (Effect::single(vars[1]), Effect(2)), (m, Effect(3))] {
            if let Some(k) = p.component_index(sub, &vec![1; sub.len()]) {
                if p.components()[k].marginal == m {
                    lam[k] = effect_components(&t, two.full(), local, CodingKind::Local).unwrap()[0];
                }
            }
        }
    }
    lam
}

#[test]
fn incompatible_marginals_report_nonexistence() {
    let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
    let p = Parameterization::build(&s, &seq(&s, &["AB", "AC", "BC", "ABC"]), CodingKind::Local).unwrap();
    let lam = incompatible_lambda(&s, &p);
    assert!(lam.iter().filter(|v| **v != 0.0).count() == 3);
    match p.invert(&lam) {
        Err(MllError::Nonexistence(_)) => {}
        other => panic!("expected nonexistence, got {other:?}"),
    }
}

#[test]
fn marginal_odds_ratio_bound_on_grid() {
    for i in 0..100 {
        for j in 0..100 {
            let t = (i as f64 + 0.5) / 100.0;
            let u = (j as f64 + 0.5) / 100.0;
            // A=1 slice (t, 3-t, 1-t, t), A=2 slice (u, 1-u, 3-u, u); BC margin is their sum
            let bc = [t + u, 4.0 - t - u, 4.0 - t - u, t + u];
            let or = bc[0] * bc[3] / (bc[1] * bc[2]);
            let closed = (t + u).powi(2) / (4.0 - t - u).powi(2);
            assert!((or - closed).abs() < 1e-12);
            assert!(or <= 1.0);
        }
    }
}

#[test]
fn sequence_decomposability_verdicts() {
    let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
    let good = Parameterization::build(&s, &seq(&s, &["AB", "AC", "ABC"]), CodingKind::Local).unwrap();
    assert!(good.check_smoothness().variation_independent());
    assert!(good.check_smoothness().hierarchical_complete);
    let bad = Parameterization::build(&s, &seq(&s, &["AB", "AC", "BC", "ABC"]), CodingKind::Local).unwrap();
    assert!(!bad.check_smoothness().variation_independent());
    assert!(is_ordered_decomposable(&MarginalSequence::saturated(&s)).decomposable);
}

#[test]
fn independence_zeros_in_housing_marginals() {
    // A ⫫ B, C ⫫ D | AB, built as P(A)P(B)P(C|AB)P(D|AB)
    let s = VariableScheme::binary(&["A", "B", "C", "D"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pa: f64 = rng.random_range(0.2..0.8);
    let pb: f64 = rng.random_range(0.2..0.8);
    let pc: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..0.8)).collect();
    let pd: Vec<f64> = (0..4).map(|_| rng.random_range(0.2..0.8)).collect();
    let mut cells = Vec::new();
    for a in 0..2 {
        for b in 0..2 {
            for c in 0..2 {
                for d in 0..2 {
                    let ab = 2 * a + b;
                    let f = |p: f64, x: usize| if x == 0 { p } else { 1.0 - p };
                    cells.push(f(pa, a) * f(pb, b) * f(pc[ab], c) * f(pd[ab], d));
                }
            }
        }
    }
    let t = Table::probabilities(s.clone(), cells).unwrap();
    let p = Parameterization::build(&s, &seq(&s, &["AB", "ABCD"]), CodingKind::Local).unwrap();
    let lam = p.compute_lambda(&t).unwrap();
    for e in ["AB", "CD", "ACD", "BCD", "ABCD"] {
        let k = p.effect_range(eff(&s, e)).unwrap().start;
        assert!(lam[k].abs() < 1e-12, "{e}: {}", lam[k]);
    }
    assert!(lam[p.effect_range(eff(&s, "AC")).unwrap().start].abs() > 1e-4);
}

#[test]
fn roundtrip_four_way_sequences() {
    let s = VariableScheme::binary(&["A", "B", "C", "D"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for ms in [&["AB", "ABCD"][..], &["A", "B", "AB", "ABC", "ABD", "ABCD"][..]] {
        let p = Parameterization::build(&s, &seq(&s, ms), CodingKind::Local).unwrap();
        for _ in 0..20 {
            let t = random_table(&s, &mut rng);
            let back = p.invert(&p.compute_lambda(&t).unwrap()).unwrap();
            let err = back.cells().iter().zip(t.cells()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(err < 1e-9);
        }
    }
}

#[test]
fn conditional_independence_makes_marginal_and_joint_terms_agree() {
    // A ⫫ B | C: the AB and ABC terms of the joint log-linear expansion vanish
    let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = Parameterization::build(&s, &seq(&s, &["BC", "ABC"]), CodingKind::Local).unwrap();
    let b = eff(&s, "B");
    for _ in 0..10 {
        let full = Parameterization::build(&s, &MarginalSequence::saturated(&s), CodingKind::Local).unwrap();
        let mut lam: Vec<f64> = (0..full.n_components()).map(|_| rng.random_range(-0.5..0.5)).collect();
        for e in ["AB", "ABC"] {
            lam[full.effect_range(eff(&s, e)).unwrap().start] = 0.0;
        }
        let t = full.invert(&lam).unwrap();
        let marg = p.compute_lambda(&t).unwrap();
        let k = p.effect_range(b).unwrap().start;
        let joint = full.compute_lambda(&t).unwrap()[full.effect_range(b).unwrap().start];
        assert!((marg[k] - joint).abs() < 1e-10);
    }
}

#[test]
fn first_marginal_components_leave_conditional_unchanged() {
    let s = VariableScheme::from_sizes(&[("A", 2), ("B", 3), ("C", 3)]).unwrap();
    let p = Parameterization::build(&s, &seq(&s, &["AB", "ABC"]), CodingKind::Local).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let t = random_table(&s, &mut rng);
    let mut lam = p.compute_lambda(&t).unwrap();
    for (k, c) in p.components().iter().enumerate() {
        if c.marginal_index == 0 {
            lam[k] += rng.random_range(-0.4..0.4);
        }
    }
    let t2 = p.invert(&lam).unwrap();
    let cond = |x: &Table| -> Vec<f64> {
        let ab = x.marginalize(eff(&s, "AB")).unwrap();
        x.cells().iter().enumerate().map(|(i, v)| v / ab.cells()[i / 3]).collect()
    };
    for (a, b) in cond(&t).iter().zip(cond(&t2)) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn independent_components_always_invert() {
    let s = VariableScheme::binary(&["A", "B", "C", "D"]).unwrap();
    let p = Parameterization::build(&s, &seq(&s, &["AB", "ABCD"]), CodingKind::Local).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let lam: Vec<f64> = (0..p.n_components()).map(|_| rng.random_range(-0.3..0.3)).collect();
        let t = p.invert(&lam).unwrap();
        let back = p.compute_lambda(&t).unwrap();
        for (a, b) in back.iter().zip(&lam) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn marginal_zero_not_implied_by_conditional_zero() {
    let s = VariableScheme::binary(&["A", "B", "C"]).unwrap();
    let full = Parameterization::build(&s, &MarginalSequence::saturated(&s), CodingKind::Local).unwrap();
    let mut lam = vec![0.0; full.n_components()];
    lam[full.effect_range(eff(&s, "AC")).unwrap().start] = 0.6;
    lam[full.effect_range(eff(&s, "BC")).unwrap().start] = 0.6;
    let t = full.invert(&lam).unwrap();
    let r = collapsibility_check(&t, eff(&s, "AB"), eff(&s, "AB"), s.full()).unwrap();
    assert!(!r.collapsible);
    assert_eq!(r.collapsible, r.criterion);
    let marg = effect_components(&t, eff(&s, "AB"), eff(&s, "AB"), CodingKind::Local).unwrap();
    assert!(marg[0].abs() > 1e-3);
}
