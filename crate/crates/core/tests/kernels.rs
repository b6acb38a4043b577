use std::sync::Arc;

use approx::assert_abs_diff_eq;
use lor_transfer::fespace::{interpolate_nodal, Continuity, FESpace, Field};
use lor_transfer::kernels::{Basis1D, MassOperator};
use lor_transfer::mesh::{make_lor_mesh, CartesianMesh, LorSpec};
use lor_transfer::quadrature::RuleKind;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Global matrix assembled from the pointwise oracle blocks.
fn oracle_dense(op: &MassOperator) -> DMatrix<f64> {
    let (nr, nc) = op.shape();
    let mut m = DMatrix::zeros(nr, nc);
    for e in 0..op.num_elements() {
        let (rows, cols) = op.element_dofs(e).unwrap();
        let blk = op.element_matrix(e).unwrap();
        for (i, &gi) in rows.iter().enumerate() {
            for (j, &gj) in cols.iter().enumerate() {
                m[(gi, gj)] += blk[(i, j)];
            }
        }
    }
    m
}

fn unit_box(counts: &[usize]) -> CartesianMesh {
    CartesianMesh::uniform(counts, &vec![(0.0, 1.0); counts.len()]).unwrap()
}

#[test]
fn basis_is_identity_at_nodes() {
    for p in 1..=8 {
        let s = FESpace::new(unit_box(&[1]), p, Continuity::H1).unwrap();
        let b = Basis1D::of_space(&s);
        let m = b.eval_matrix(b.nodes());
        for i in 0..=p {
            for j in 0..=p {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(m[i * (p + 1) + j], expected, epsilon = 1e-13);
            }
        }
    }
}

#[test]
fn mass_of_constant_gives_volume() {
    let s = FESpace::new(unit_box(&[3, 2]), 3, Continuity::H1).unwrap();
    let op = MassOperator::square(&s, None).unwrap();
    let one = Field::constant(s.clone(), 1.0);
    let m1 = op.apply(&one).unwrap();
    let total: f64 = m1.coefficients().iter().sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-14);
}

#[test]
fn mixed_with_constants_gives_cell_integrals() {
    let high_mesh = CartesianMesh::uniform(&[2, 2], &[(0.0, 1.0); 2]).unwrap();
    let high = FESpace::new(high_mesh.clone(), 3, Continuity::H1).unwrap();
    let low_mesh = make_lor_mesh(&high_mesh, LorSpec::new(4, RuleKind::GaussLobatto)).unwrap();
    let low = FESpace::new(low_mesh.clone(), 0, Continuity::L2).unwrap();
    let op = MassOperator::mixed(&low, &high, None).unwrap();
    let f = |x: &[f64]| x[0] * x[0] * x[1] + 2.0 * x[1] * x[1] * x[1];
    let u = interpolate_nodal(&high, f).unwrap();
    let y = op.apply(&u).unwrap();
    // ∫_cell u by tensor Gauss on the cell, evaluating u pointwise
    let g = lor_transfer::quadrature::gauss(4);
    for e in 0..low_mesh.num_elements() {
        let m = low_mesh.element_multi(e);
        let (x0, x1) = low_mesh.interval(0, m[0]);
        let (y0, y1) = low_mesh.interval(1, m[1]);
        let mut cell = 0.0;
        for (xi, wx) in g.points.iter().zip(g.weights()) {
            for (yi, wy) in g.points.iter().zip(g.weights()) {
                let x = x0 + 0.5 * (xi + 1.0) * (x1 - x0);
                let y = y0 + 0.5 * (yi + 1.0) * (y1 - y0);
                cell += 0.25 * (x1 - x0) * (y1 - y0) * wx * wy * u.evaluate(&[x, y]).unwrap();
            }
        }
        assert_abs_diff_eq!(y.coefficients()[e], cell, epsilon = 1e-14);
    }
}

#[test]
fn dense_oracle_two_elements_cubic() {
    let mesh = CartesianMesh::uniform(&[2], &[(-1.0, 1.0)]).unwrap();
    let s = FESpace::new(mesh, 3, Continuity::H1).unwrap();
    let op = MassOperator::square(&s, None).unwrap();
    let dense = oracle_dense(&op);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        let x = random_vec(&mut rng, s.dof_count());
        let y = op.apply_vec(&x);
        let yd = &dense * DVector::from_column_slice(&x);
        let diff: Vec<f64> = y.iter().zip(yd.iter()).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-13 * norm(&x));
    }
}

#[test]
fn diagonal_examples() {
    let m = CartesianMesh::uniform(&[1], &[(-1.0, 1.0)]).unwrap();
    let s = FESpace::new(m, 1, Continuity::H1).unwrap();
    let d = MassOperator::square(&s, None).unwrap().diagonal().unwrap();
    assert_abs_diff_eq!(d[0], 2.0 / 3.0, epsilon = 1e-15);
    assert_abs_diff_eq!(d[1], 2.0 / 3.0, epsilon = 1e-15);

    let m = CartesianMesh::from_axes(vec![vec![0.0, 0.1, 0.5, 1.0], vec![0.0, 0.25, 1.0]]).unwrap();
    let s = FESpace::new(m.clone(), 0, Continuity::L2).unwrap();
    let op = MassOperator::square(&s, None).unwrap();
    let d = op.diagonal().unwrap();
    for (e, v) in d.iter().enumerate() {
        assert_abs_diff_eq!(*v, m.element_volume(e), epsilon = 1e-15);
    }
    let blk = op.element_matrix(4).unwrap();
    assert_eq!(blk.shape(), (1, 1));
    assert_abs_diff_eq!(blk[(0, 0)], m.element_volume(4), epsilon = 1e-15);
}

#[test]
fn diagonal_matches_oracle() {
    for (counts, p, cont) in [
        (vec![3], 4, Continuity::H1),
        (vec![2, 3], 2, Continuity::H1),
        (vec![2, 2], 3, Continuity::L2),
        (vec![2, 1, 2], 2, Continuity::H1),
    ] {
        let s = FESpace::new(unit_box(&counts), p, cont).unwrap();
        let op = MassOperator::square(&s, None).unwrap();
        let d = op.diagonal().unwrap();
        let dense = oracle_dense(&op);
        for (i, v) in d.iter().enumerate() {
            assert_abs_diff_eq!(*v, dense[(i, i)], epsilon = 1e-13 * dense[(i, i)].abs().max(1.0));
        }
    }
}

#[test]
fn diagonal_of_mixed_is_rejected() {
    let hm = unit_box(&[2]);
    let high = FESpace::new(hm.clone(), 2, Continuity::H1).unwrap();
    let low = FESpace::new(
        make_lor_mesh(&hm, LorSpec::new(3, RuleKind::GaussLobatto)).unwrap(),
        0,
        Continuity::L2,
    )
    .unwrap();
    let op = MassOperator::mixed(&low, &high, None).unwrap();
    assert!(op.diagonal().is_err());
    assert!(op.element_matrix(2).is_err());
    assert_eq!(op.shape(), (6, 5));
}

#[test]
fn mixed_block_half_intervals() {
    let hm = CartesianMesh::uniform(&[1], &[(-1.0, 1.0)]).unwrap();
    let high = FESpace::new(hm.clone(), 1, Continuity::H1).unwrap();
    let low = FESpace::new(
        make_lor_mesh(&hm, LorSpec::new(2, RuleKind::GaussLobatto)).unwrap(),
        0,
        Continuity::L2,
    )
    .unwrap();
    let op = MassOperator::mixed(&low, &high, None).unwrap();
    let blk = op.element_matrix(0).unwrap();
    let expected = [[0.75, 0.25], [0.25, 0.75]];
    for i in 0..2 {
        for j in 0..2 {
            assert_abs_diff_eq!(blk[(i, j)], expected[i][j], epsilon = 1e-15);
        }
    }
    let dense = op.to_dense();
    for i in 0..2 {
        for j in 0..2 {
            assert_abs_diff_eq!(dense[(i, j)], expected[i][j], epsilon = 1e-15);
        }
    }
}

#[test]
fn mixed_block_row_sums_are_cell_volumes() {
    let hm = CartesianMesh::uniform(&[1, 1], &[(0.0, 2.0), (0.0, 1.0)]).unwrap();
    let high = FESpace::new(hm.clone(), 4, Continuity::H1).unwrap();
    let lm = make_lor_mesh(&hm, LorSpec::new(3, RuleKind::ChebyshevLobatto)).unwrap();
    let low = FESpace::new(lm.clone(), 0, Continuity::L2).unwrap();
    let op = MassOperator::mixed(&low, &high, None).unwrap();
    let blk = op.element_matrix(0).unwrap();
    let (rows, _) = op.element_dofs(0).unwrap();
    assert_eq!(blk.shape(), (9, 25));
    for (i, &r) in rows.iter().enumerate() {
        let sum: f64 = blk.row(i).iter().sum();
        assert_abs_diff_eq!(sum, lm.element_volume(r), epsilon = 1e-14);
    }
}

#[test]
fn weighted_with_unit_density_matches_unweighted() {
    let hm = unit_box(&[2, 2]);
    let high = FESpace::new(hm.clone(), 3, Continuity::H1).unwrap();
    let low = FESpace::new(
        make_lor_mesh(&hm, LorSpec::new(4, RuleKind::GaussLobatto)).unwrap(),
        0,
        Continuity::L2,
    )
    .unwrap();
    let rho = Field::constant(high.clone(), 1.0);
    let a = MassOperator::mixed(&low, &high, None).unwrap().to_dense();
    let b = MassOperator::mixed(&low, &high, Some(&rho)).unwrap().to_dense();
    assert!((a - b).amax() <= 1e-13);
    let a = MassOperator::square(&high, None).unwrap().to_dense();
    let b = MassOperator::square(&high, Some(&rho)).unwrap().to_dense();
    assert!((a - b).amax() <= 1e-13);
}

fn random_spaces(dim: usize, p: usize) -> (Arc<FESpace>, Arc<FESpace>) {
    let counts = vec![2; dim];
    let hm = CartesianMesh::uniform(&counts, &vec![(0.0, 1.0); dim]).unwrap();
    let high = FESpace::new(hm.clone(), p, Continuity::H1).unwrap();
    let low = FESpace::new(
        make_lor_mesh(&hm, LorSpec::new(p + 1, RuleKind::GaussLobatto)).unwrap(),
        0,
        Continuity::L2,
    )
    .unwrap();
    (high, low)
}

#[test]
fn symmetric_and_positive_definite() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for dim in 1..=3 {
        let (high, _) = random_spaces(dim, 3);
        let rho = interpolate_nodal(&high, |x| 1.5 + x[0] * x[dim - 1]).unwrap();
        for op in [
            MassOperator::square(&high, None).unwrap(),
            MassOperator::square(&high, Some(&rho)).unwrap(),
        ] {
            for _ in 0..5 {
                let x = random_vec(&mut rng, high.dof_count());
                let y = random_vec(&mut rng, high.dof_count());
                let mx = op.apply_vec(&x);
                let my = op.apply_vec(&y);
                let a: f64 = mx.iter().zip(&y).map(|(a, b)| a * b).sum();
                let b: f64 = my.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!((a - b).abs() <= 1e-12 * norm(&x) * norm(&y));
                let xmx: f64 = mx.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert!(xmx > 0.0);
            }
        }
    }
}

#[test]
fn transpose_is_adjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for dim in 1..=3 {
        let (high, low) = random_spaces(dim, 2);
        let op = MassOperator::mixed(&low, &high, None).unwrap();
        let x = random_vec(&mut rng, high.dof_count());
        let y = random_vec(&mut rng, low.dof_count());
        let a: f64 = op.apply_vec(&x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let b: f64 = op.apply_transpose_vec(&y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((a - b).abs() <= 1e-13 * norm(&x) * norm(&y));
    }
}

#[test]
fn space_mismatch_is_an_error() {
    let (high, low) = random_spaces(2, 2);
    let op = MassOperator::square(&high, None).unwrap();
    assert!(op.apply(&Field::zeros(low)).is_err());
}
