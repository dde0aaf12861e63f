//! Property tests: low-rank arithmetic agrees with dense arithmetic on
//! randomly generated tensors, and structural invariants hold across the
//! sampled input space.

use marginal::{
    apply_cp_operator, from_matricization, from_mhn, gamma_bound, matricize,
    max_diagonal_magnitude, CpOperator, DenseTensor, DimensionTree, HtTensor, MhnParams,
    DENSE_CAP,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn dims_strategy() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2usize..=3, 1..=5)
}

fn dense_of(t: &HtTensor) -> Vec<f64> {
    t.to_dense(DENSE_CAP).unwrap().data().to_vec()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn addition_matches_dense(dims in dims_strategy(), seed in 0u64..1 << 20,
                              ra in 1usize..=3, rb in 1usize..=3) {
        let tree = DimensionTree::balanced(dims.len()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = HtTensor::random(&tree, &dims, ra, &mut rng);
        let b = HtTensor::random(&tree, &dims, rb, &mut rng);
        let sum = dense_of(&a.add(&b).unwrap());
        let (da, db) = (dense_of(&a), dense_of(&b));
        for i in 0..sum.len() {
            prop_assert!((sum[i] - (da[i] + db[i])).abs() <= 1e-10);
        }
    }

    #[test]
    fn scaling_matches_dense(dims in dims_strategy(), seed in 0u64..1 << 20,
                             c in -3.0f64..3.0) {
        let tree = DimensionTree::balanced(dims.len()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let scaled = dense_of(&a.scale(c));
        let da = dense_of(&a);
        for i in 0..scaled.len() {
            prop_assert!((scaled[i] - c * da[i]).abs() <= 1e-10);
        }
    }

    #[test]
    fn inner_product_is_symmetric_and_matches_dense(
        dims in dims_strategy(), seed in 0u64..1 << 20) {
        let tree = DimensionTree::balanced(dims.len()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = HtTensor::random(&tree, &dims, 2, &mut rng);
        let b = HtTensor::random(&tree, &dims, 2, &mut rng);
        let (da, db) = (dense_of(&a), dense_of(&b));
        let dot: f64 = da.iter().zip(&db).map(|(x, y)| x * y).sum();
        let ab = a.inner(&b).unwrap();
        let ba = b.inner(&a).unwrap();
        prop_assert!((ab - dot).abs() <= 1e-9 * (1.0 + dot.abs()));
        prop_assert!((ab - ba).abs() <= 1e-9 * (1.0 + ab.abs()));
        prop_assert!((a.norm().powi(2) - a.inner(&a).unwrap()).abs()
            <= 1e-9 * (1.0 + a.inner(&a).unwrap().abs()));
    }

    #[test]
    fn operator_application_matches_dense(
        dims in dims_strategy(), seed in 0u64..1 << 20, terms in 1usize..=2) {
        let tree = DimensionTree::balanced(dims.len()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = HtTensor::random(&tree, &dims, 2, &mut rng);
        let op_terms: Vec<Vec<DMatrix<f64>>> = (0..terms)
            .map(|_| {
                dims.iter()
                    .map(|&n| DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)))
                    .collect()
            })
            .collect();
        let op = CpOperator::new(dims.clone(), op_terms).unwrap();
        let out = apply_cp_operator(&op, &v).unwrap().to_dense(DENSE_CAP).unwrap();
        let dense_op = op.to_dense_matrix(DENSE_CAP).unwrap();
        let expect = &dense_op * v.to_dense(DENSE_CAP).unwrap().as_vector();
        for (x, y) in out.as_vector().iter().zip(expect.iter()) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()));
        }
    }

    #[test]
    fn truncation_never_exceeds_relative_budget(
        dims in dims_strategy(), seed in 0u64..1 << 20, eps in 0.0f64..0.5) {
        let tree = DimensionTree::balanced(dims.len()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = HtTensor::random(&tree, &dims, 3, &mut rng);
        let t = a.truncate(eps, None);
        let (da, dt) = (dense_of(&a), dense_of(&t));
        let err2: f64 = da.iter().zip(&dt).map(|(x, y)| (x - y) * (x - y)).sum();
        let norm2: f64 = da.iter().map(|x| x * x).sum();
        prop_assert!(err2 <= eps * eps * norm2 + 1e-10 * (1.0 + norm2));
        for id in 0..tree.len() {
            if dims.len() > 1 && id != tree.root() {
                prop_assert!(t.rank(id) <= a.rank(id));
            }
        }
    }

    #[test]
    fn matricization_round_trips(dims in dims_strategy(), seed in 0u64..1 << 20,
                                 pick in 0usize..31) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let data: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let t = DenseTensor::new(dims.clone(), data).unwrap();
        let modes: Vec<usize> = (0..dims.len()).filter(|m| pick >> m & 1 == 1).collect();
        prop_assume!(!modes.is_empty());
        let mat = matricize(&t, &modes).unwrap();
        let back = from_matricization(&mat, &dims, &modes).unwrap();
        prop_assert_eq!(t.data(), back.data());
    }

    #[test]
    fn shift_bound_dominates_every_diagonal(d in 1usize..=4, seed in 0u64..1 << 20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = DMatrix::from_fn(d, d, |_, _| rng.random_range(0.1..3.0));
        let m = from_mhn(&MhnParams::new(theta).unwrap(), None).unwrap();
        let bound = gamma_bound(&m).unwrap();
        let exact = max_diagonal_magnitude(&m, DENSE_CAP).unwrap();
        prop_assert!(bound >= exact * (1.0 - 1e-12));
    }

    #[test]
    fn marginal_estimates_are_probability_vectors(d in 1usize..=4, seed in 0u64..1 << 16) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let theta = DMatrix::from_fn(d, d, |_, _| rng.random_range(0.3..2.0));
        let m = from_mhn(&MhnParams::new(theta).unwrap(), None).unwrap();
        let tree = DimensionTree::balanced(d).unwrap();
        let (p, rep) = marginal::low_rank_uniformization(
            &m, &tree, &marginal::SolverConfig::default()).unwrap();
        prop_assert!(rep.converged);
        let dense = p.to_dense(DENSE_CAP).unwrap();
        prop_assert!((dense.sum() - 1.0).abs() <= 1e-10);
        for &v in dense.data() {
            prop_assert!(v >= -1e-8);
        }
    }
}
