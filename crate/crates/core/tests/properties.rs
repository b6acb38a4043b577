//! Randomized invariants across mesh, space, kernel and transfer layers.

use std::sync::Arc;

use lor_transfer::fespace::{project_l2, Continuity, FESpace, Field};
use lor_transfer::kernels::MassOperator;
use lor_transfer::mesh::{make_lor_mesh, CartesianMesh, LorSpec};
use lor_transfer::quadrature::RuleKind;
use lor_transfer::transfer::{lor_space, make_pair, TransferPair};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Debug)]
struct Setup {
    dim: usize,
    elems: usize,
    p: usize,
    q: usize,
    extra_n: usize,
    nodes: RuleKind,
    continuity: Continuity,
    seed: u64,
}

fn setups() -> impl Strategy<Value = Setup> {
    (
        1usize..=2,
        1usize..=3,
        1usize..=5,
        0usize..=1,
        0usize..=1,
        prop::sample::select(vec![
            RuleKind::GaussLobatto,
            RuleKind::ChebyshevLobatto,
            RuleKind::UniformClosed,
        ]),
        prop::sample::select(vec![Continuity::H1, Continuity::L2]),
        any::<u64>(),
    )
        .prop_map(|(dim, elems, p, q, extra_n, nodes, continuity, seed)| Setup {
            dim,
            elems,
            p,
            q,
            extra_n,
            nodes,
            continuity,
            seed,
        })
}

fn build(s: &Setup) -> TransferPair {
    // skewed box so element sizes differ per axis
    let bbox: Vec<(f64, f64)> = (0..s.dim).map(|a| (-0.5, 0.3 + a as f64)).collect();
    let mesh = CartesianMesh::uniform(&vec![s.elems; s.dim], &bbox).unwrap();
    let high = FESpace::new(mesh, s.p, s.continuity).unwrap();
    let n = (s.p + 1).div_ceil(s.q + 1) + s.extra_n;
    let low = lor_space(&high, LorSpec::new(n, s.nodes), s.q).unwrap();
    make_pair(&high, &low, n, None).unwrap()
}

fn random_field(space: &Arc<FESpace>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Field {
    let c = (0..space.dof_count()).map(|_| rng.gen_range(lo..hi)).collect();
    Field::new(space.clone(), c).unwrap()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn prolongation_inverts_restriction(s in setups()) {
        let t = build(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let u = random_field(t.high(), &mut rng, -1.0, 1.0);
        let (pru, _) = t.prolong(&t.restrict(&u).unwrap()).unwrap();
        prop_assert!(pru.l2_distance(&u).unwrap() <= 1e-11 * u.l2_norm());
    }

    #[test]
    fn restrict_after_prolong_is_a_projection(s in setups()) {
        let t = build(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let v = random_field(t.low(), &mut rng, -1.0, 1.0);
        let q = t.restrict(&t.prolong(&v).unwrap().0).unwrap();
        let qq = t.restrict(&t.prolong(&q).unwrap().0).unwrap();
        prop_assert!(qq.l2_distance(&q).unwrap() <= 1e-11 * v.l2_norm());
    }

    #[test]
    fn both_directions_conserve(s in setups()) {
        let t = build(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let u = random_field(t.high(), &mut rng, -1.0, 1.0);
        let v = random_field(t.low(), &mut rng, -1.0, 1.0);
        let (iu, iv) = (u.integrate(), v.integrate());
        let ru = t.restrict(&u).unwrap().integrate();
        let pv = t.prolong(&v).unwrap().0.integrate();
        prop_assert!((ru - iu).abs() <= 1e-12 * (1.0 + iu.abs()));
        prop_assert!((pv - iv).abs() <= 1e-12 * (1.0 + iv.abs()));
    }

    #[test]
    fn constants_pass_through(s in setups()) {
        let t = build(&s);
        let r = t.restrict(&Field::constant(t.high().clone(), 1.0)).unwrap();
        let (p, _) = t.prolong(&Field::constant(t.low().clone(), 1.0)).unwrap();
        for c in r.coefficients().iter().chain(p.coefficients()) {
            prop_assert!((c - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn weighted_restriction_keeps_constants(s in setups()) {
        let t = build(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let rho = random_field(t.high(), &mut rng, 0.5, 2.0);
        let w = t.with_density(&rho).unwrap();
        let r = w.restrict_weighted(&Field::constant(t.high().clone(), 1.0)).unwrap();
        for c in r.coefficients() {
            prop_assert!((c - 1.0).abs() <= 1e-11);
        }
    }

    #[test]
    fn mass_operators_are_symmetric_positive(s in setups()) {
        let t = build(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let rho = random_field(t.high(), &mut rng, 0.5, 2.0);
        for m in [
            MassOperator::square(t.high(), None).unwrap(),
            MassOperator::square(t.high(), Some(&rho)).unwrap(),
            MassOperator::square(t.low(), None).unwrap(),
        ] {
            let n = m.shape().0;
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (mx, my) = (m.apply_vec(&x), m.apply_vec(&y));
            let scale = dot(&x, &x).sqrt() * dot(&y, &y).sqrt();
            prop_assert!((dot(&mx, &y) - dot(&x, &my)).abs() <= 1e-12 * scale);
            prop_assert!(dot(&mx, &x) > 0.0);
        }
    }

    #[test]
    fn lor_mesh_tiles_the_coarse_mesh(s in setups()) {
        let coarse = CartesianMesh::uniform(&vec![s.elems; s.dim], &vec![(0.0, 2.0); s.dim]).unwrap();
        let lor = make_lor_mesh(&coarse, LorSpec::new(s.p + 1, s.nodes)).unwrap();
        prop_assert!((lor.volume() - coarse.volume()).abs() <= 1e-13 * coarse.volume());
        for a in 0..s.dim {
            for v in coarse.axis(a) {
                prop_assert!(lor.axis(a).contains(v));
            }
        }
    }

    #[test]
    fn l2_projection_fixes_members(s in setups()) {
        let t = build(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let u = random_field(t.high(), &mut rng, -1.0, 1.0);
        let pu = project_l2(t.high(), |x| u.evaluate(x).unwrap()).unwrap();
        prop_assert!(pu.l2_distance(&u).unwrap() <= 1e-12 * u.l2_norm().max(1.0));
    }
}
