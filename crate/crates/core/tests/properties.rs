use morse_forge::factors::{FactorElement, FactorId, FactorSpec, Letter};
use morse_forge::graph::{Ball, GraphPath, QgParams};
use morse_forge::morse::{cm_with_delta, delta_of, nesting_with_delta, Gauge};
use morse_forge::rational::{fmt_q, frac, int, parse_q};
use morse_forge::rays::{phi, psi, CombRay};
use morse_forge::words::{FreeProduct, GenLabel, Word};
use proptest::prelude::*;
use std::sync::OnceLock;

fn zz() -> FreeProduct {
    FreeProduct::new(FactorSpec::integer_line(FactorId::A), FactorSpec::integer_line(FactorId::B)).unwrap()
}

fn mixed() -> FreeProduct {
    FreeProduct::new(FactorSpec::lattice(FactorId::A, 2), FactorSpec::cyclic(FactorId::B, 3).unwrap()).unwrap()
}

fn ball4() -> &'static Ball {
    static B: OnceLock<Ball> = OnceLock::new();
    B.get_or_init(|| Ball::build(&zz(), 4, 100_000).unwrap())
}

fn word_from(g: &FreeProduct, picks: &[usize]) -> Word {
    let labels = g.labels();
    picks.iter().fold(Word::identity(), |w, &i| g.mul_label(&w, labels[i % labels.len()]))
}

fn naive_reduce(labels: &[GenLabel]) -> Vec<GenLabel> {
    // free cancellation only; correct for products of free factors
    let mut out: Vec<GenLabel> = Vec::new();
    for &l in labels {
        if out.last() == Some(&l.inv()) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

fn line(f: FactorId, n: i64) -> FactorElement {
    let spec = zz().factor(f).clone();
    spec.from_letters(&vec![Letter::new(0, n < 0); n.unsigned_abs() as usize])
}

proptest! {
    #[test]
    fn normal_forms_alternate(picks in prop::collection::vec(0usize..64, 0..24)) {
        for g in [zz(), mixed()] {
            let w = word_from(&g, &picks);
            let syl = w.syllables();
            prop_assert!(syl.windows(2).all(|p| p[0].factor != p[1].factor));
            prop_assert!(syl.iter().all(|s| !g.factor(s.factor).is_identity(s)));
            prop_assert_eq!(g.parse(&g.format(&w)).unwrap(), w);
        }
    }

    #[test]
    fn group_laws(a in prop::collection::vec(0usize..64, 0..12), b in prop::collection::vec(0usize..64, 0..12), c in prop::collection::vec(0usize..64, 0..12)) {
        let g = mixed();
        let (u, v, w) = (word_from(&g, &a), word_from(&g, &b), word_from(&g, &c));
        prop_assert_eq!(g.multiply(&g.multiply(&u, &v), &w), g.multiply(&u, &g.multiply(&v, &w)));
        prop_assert!(g.multiply(&u, &g.inverse(&u)).is_identity());
        prop_assert!(g.norm(&g.multiply(&u, &v)) <= g.norm(&u) + g.norm(&v));
        prop_assert_eq!(g.distance(&u, &v), g.distance(&v, &u));
    }

    #[test]
    fn norm_matches_free_reduction(picks in prop::collection::vec(0usize..4, 0..30)) {
        // in ℤ∗ℤ = F_2 the word length is the freely reduced length
        let g = zz();
        let labels: Vec<GenLabel> = picks.iter().map(|&i| g.labels()[i]).collect();
        let reduced = naive_reduce(&labels);
        prop_assert_eq!(g.norm(&word_from(&g, &picks)), reduced.len() as u64);
    }

    #[test]
    fn syllable_length_convention(picks in prop::collection::vec(0usize..4, 0..20)) {
        // pad to a_1 b_1 ⋯ a_k b_k with trivial a_1 / b_k as needed: 2k, or 2k − 1 if b_k = e
        let g = zz();
        let w = word_from(&g, &picks);
        let expect = if w.is_identity() {
            0
        } else {
            let padded = w.syllable_count() + usize::from(w.first_factor() == Some(FactorId::B)) + usize::from(w.last_factor() == Some(FactorId::A));
            let k = padded / 2;
            (2 * k - usize::from(w.last_factor() == Some(FactorId::A))) as u64
        };
        prop_assert_eq!(g.syllable_length(&w).0, expect);
    }

    #[test]
    fn quasi_geodesics_are_closed_under_subpaths(steps in prop::collection::vec(0usize..5, 1..9), l in 1i64..4, e in 0i64..3, cut in (0usize..9, 0usize..9)) {
        let ball = ball4();
        let mut path = vec![0u32];
        for &s in &steps {
            let cur = *path.last().unwrap();
            let next = if s == 4 { Some(cur) } else { ball.edges(cur)[s].to };
            match next {
                Some(v) => path.push(v),
                None => break,
            }
        }
        let qg = QgParams::new(int(l), int(e));
        let whole = ball.is_quasi_geodesic(&GraphPath::new(path.clone()), &qg);
        let (i, j) = (cut.0.min(cut.1).min(path.len() - 1), cut.0.max(cut.1).min(path.len() - 1));
        let sub = ball.is_quasi_geodesic(&GraphPath::new(path[i..=j].to_vec()), &qg);
        prop_assert!(!whole || sub);
        // relaxing the constants keeps the property
        prop_assert!(!whole || ball.is_quasi_geodesic(&GraphPath::new(path), &QgParams::new(int(l + 1), int(e + 1))));
    }

    #[test]
    fn phi_psi_round_trip(prefix in prop::collection::vec(prop_oneof![-3i64..=-1, 1i64..=3], 0..6), cycle in prop::collection::vec((prop_oneof![-3i64..=-1, 1i64..=3], prop_oneof![-3i64..=-1, 1i64..=3]), 1..3), lead in -2i64..=2) {
        let g = zz();
        let mut syl = vec![line(FactorId::A, lead)];
        for (i, &n) in prefix.iter().enumerate() {
            syl.push(line(if i % 2 == 0 { FactorId::B } else { FactorId::A }, n));
        }
        let offset = syl.len();
        let cyc: Vec<FactorElement> = cycle
            .iter()
            .flat_map(|&(p, q)| [p, q])
            .enumerate()
            .map(|(i, n)| line(if (offset + i) % 2 == 0 { FactorId::A } else { FactorId::B }, n))
            .collect();
        let a = CombRay::periodic(&g, syl, cyc).unwrap();
        let depth = 40;
        let ray = phi(&g, &a, depth).unwrap();
        prop_assert_eq!(ray.vertices.len(), depth + 1);
        let back = psi(&g, &ray.vertices).unwrap();
        let stable = back.stable_syllables();
        let expected = a.expand(stable.len());
        prop_assert_eq!(stable, expected.as_slice());
        prop_assert_eq!(phi(&g, &back, depth).unwrap().vertices, ray.vertices);
    }

    #[test]
    fn affine_gauge_constants(a in 0i64..4, b in 0i64..4, c in 0i64..4, t in 0u64..40) {
        // M = aλ + bε + c: M(5,0) = 5a+c, M(3,0) = 3a+c, M(1, 2M(5,0)) = a + 2b(5a+c) + c
        let m = Gauge::affine(int(a), int(b), int(c)).unwrap();
        let m5 = 5 * a + c;
        let expect = (4 * (a + 2 * b * m5 + c) + 2 * m5).max(8 * (3 * a + c));
        let delta = delta_of(&m).unwrap();
        prop_assert_eq!(delta, int(expect));
        let cm = cm_with_delta(delta, t).unwrap();
        prop_assert_eq!(cm, (int(18) * delta).max(int(t as i64) + int(6) * delta));
        let k = nesting_with_delta(t, delta);
        prop_assert!(int(k as i64) >= int(t as i64) + int(4) * delta && int(k as i64) >= int(12) * delta);
        prop_assert!(int(k as i64) - int(1) < (int(t as i64) + int(4) * delta).max(int(12) * delta));
    }

    #[test]
    fn rationals_print_and_parse(n in -500i64..500, d in 1i64..60) {
        let q = frac(n, d);
        prop_assert_eq!(parse_q(&fmt_q(&q)).unwrap(), q);
    }
}
