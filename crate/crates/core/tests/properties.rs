use proptest::prelude::*;

use tensorlab::dten;
use tensorlab::matrix_methods::pseudo_inverse;
use tensorlab::stream::{empirical_tensor, implicit_apply, TripleSampleBatch};
use tensorlab::tensor::{
    dot, fold, hadamard, khatri_rao, kruskal_to_tensor, multilinear, outer_rank1, unfold, DenseTensor, KruskalForm,
    Matrix,
};

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, len)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    vec_of(rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn tensor_with_dims() -> impl Strategy<Value = DenseTensor> {
    prop::collection::vec(1usize..4, 1..=5)
        .prop_flat_map(|dims| {
            let n = dims.iter().product();
            (Just(dims), vec_of(n))
        })
        .prop_map(|(dims, data)| DenseTensor::new(dims, data).unwrap())
}

fn cube3(d: usize) -> impl Strategy<Value = DenseTensor> {
    vec_of(d * d * d).prop_map(move |x| DenseTensor::new(vec![d, d, d], x).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fold_inverts_unfold(t in tensor_with_dims(), mode_seed in 0usize..5) {
        let mode = mode_seed % t.order();
        let m = unfold(&t, mode).unwrap();
        prop_assert_eq!(m.rows(), t.dims()[mode]);
        prop_assert_eq!(fold(&m, mode, t.dims()).unwrap(), t);
    }

    #[test]
    fn rank_one_unfolding((u, v, w) in (vec_of(3), vec_of(4), vec_of(2))) {
        let t = outer_rank1(1.0, &[&u, &v, &w]).unwrap();
        let uc = Matrix::new(3, 1, u).unwrap();
        let kr = khatri_rao(&Matrix::new(4, 1, v).unwrap(), &Matrix::new(2, 1, w).unwrap()).unwrap();
        let expect = uc.matmul(&kr.transpose()).unwrap();
        prop_assert!(unfold(&t, 0).unwrap().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn khatri_rao_gram((a, b) in (matrix(4, 3), matrix(5, 3))) {
        let kr = khatri_rao(&a, &b).unwrap();
        let lhs = kr.t_matmul(&kr).unwrap();
        let rhs = hadamard(&a.t_matmul(&a).unwrap(), &b.t_matmul(&b).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-10);
    }

    #[test]
    fn multilinear_composes(t in cube3(3), (a, b, c) in (matrix(3, 2), matrix(3, 3), matrix(3, 2)), (p, q, r) in (matrix(2, 2), matrix(3, 1), matrix(2, 3))) {
        let once = multilinear(&t, &a.matmul(&p).unwrap(), &b.matmul(&q).unwrap(), &c.matmul(&r).unwrap()).unwrap();
        let twice = multilinear(&multilinear(&t, &a, &b, &c).unwrap(), &p, &q, &r).unwrap();
        prop_assert!(once.max_abs_diff(&twice) < 1e-10);
    }

    #[test]
    fn kruskal_linear_in_weights((a, b, c) in (matrix(3, 2), matrix(2, 2), matrix(4, 2)), (w1, w2) in (vec_of(2), vec_of(2)), s in -3.0f64..3.0) {
        let f = vec![a, b, c];
        let build = |w: Vec<f64>| kruskal_to_tensor(&KruskalForm::new(w, f.clone()).unwrap()).unwrap();
        let mix: Vec<f64> = w1.iter().zip(&w2).map(|(x, y)| x + s * y).collect();
        let expect = build(w1.clone()).add(&build(w2.clone()).scale(s)).unwrap();
        prop_assert!(build(mix).max_abs_diff(&expect) < 1e-10);
    }

    #[test]
    fn implicit_apply_is_bilinear(x in matrix(6, 3), (u1, u2, v) in (vec_of(3), vec_of(3), vec_of(3)), s in -2.0f64..2.0) {
        let batch = TripleSampleBatch::symmetric(x).unwrap();
        let mix: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a + s * b).collect();
        let lhs = implicit_apply(&batch, &mix, &v).unwrap();
        let r1 = implicit_apply(&batch, &u1, &v).unwrap();
        let r2 = implicit_apply(&batch, &u2, &v).unwrap();
        for i in 0..3 {
            prop_assert!((lhs[i] - r1[i] - s * r2[i]).abs() < 1e-10);
        }
        // agrees with contracting the materialized empirical tensor
        let t = empirical_tensor(&batch);
        for c in 0..3 {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += t.get(&[a, b, c]) * u1[a] * v[b];
                }
            }
            prop_assert!((acc - r1[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn pseudo_inverse_projectors(m in matrix(5, 3)) {
        let p = pseudo_inverse(&m).unwrap();
        let mpm = m.matmul(&p).unwrap().matmul(&m).unwrap();
        prop_assert!(mpm.max_abs_diff(&m) < 1e-8 * (1.0 + m.frobenius()));
        let proj = m.matmul(&p).unwrap();
        prop_assert!(proj.asymmetry() < 1e-8);
        prop_assert!(proj.matmul(&proj).unwrap().max_abs_diff(&proj) < 1e-8);
    }

    #[test]
    fn dten_round_trip(t in tensor_with_dims()) {
        let bytes = dten::to_bytes(&t);
        let back = dten::from_bytes(&bytes).unwrap();
        prop_assert_eq!(dten::to_bytes(&back), bytes);
        prop_assert_eq!(back, t);
    }

    #[test]
    fn dot_is_symmetric((a, b) in (vec_of(7), vec_of(7))) {
        prop_assert_eq!(dot(&a, &b), dot(&b, &a));
    }
}
