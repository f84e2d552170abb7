//! Property tests for the algebraic identities that hold for every input:
//! matricization layouts, contraction identities, and distance invariances.

use nalgebra::DVector;
use proptest::prelude::*;

use ftsvd_core::metrics::{dist_samples, dist_vec};
use ftsvd_core::rkhs::{self, KernelSpec};
use ftsvd_core::tensor::Tensor3;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len)
}

fn dims() -> impl Strategy<Value = (usize, usize, usize)> {
    (1usize..5, 1usize..5, 1usize..6)
}

prop_compose! {
    fn tensor_with_vectors()(dims in dims())(
        data in finite_vec(dims.0 * dims.1 * dims.2),
        a in finite_vec(dims.0),
        b in finite_vec(dims.1),
        v in finite_vec(dims.2),
        dims in Just(dims),
    ) -> (Tensor3, DVector<f64>, DVector<f64>, DVector<f64>) {
        (
            Tensor3::new(dims.0, dims.1, dims.2, data).unwrap(),
            DVector::from_vec(a),
            DVector::from_vec(b),
            DVector::from_vec(v),
        )
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank1_contraction_identity((_, a, b, v) in tensor_with_vectors(), lambda in -5.0..5.0f64) {
        let t = Tensor3::rank1(lambda, &a, &b, &v).unwrap();
        let got = t.contract_all(&a, &b, &v).unwrap();
        let want = lambda * a.norm_squared() * b.norm_squared() * v.norm_squared();
        prop_assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0));
    }

    #[test]
    fn mode3_matricization_agrees_with_contraction((t, a, b, _) in tensor_with_vectors()) {
        let (p1, p2, _) = t.dims();
        let m3 = t.matricize(3).unwrap();
        let mut kron = DVector::zeros(p1 * p2);
        for i in 0..p1 {
            for j in 0..p2 {
                kron[i * p2 + j] = a[i] * b[j];
            }
        }
        let via_matrix = m3 * kron;
        let direct = t.contract12(&a, &b).unwrap();
        prop_assert!((via_matrix - direct).norm() <= 1e-12 * t.frob_norm().max(1.0));
    }

    #[test]
    fn matricization_preserves_frobenius_norm((t, _, _, _) in tensor_with_vectors()) {
        let f = t.frob_norm();
        for mode in 1..=3usize {
            let m = t.matricize(mode).unwrap();
            prop_assert!((m.norm() - f).abs() <= 1e-12 * f.max(1.0));
        }
    }

    #[test]
    fn matricization_round_trip((t, _, _, _) in tensor_with_vectors()) {
        let (p1, p2, n) = t.dims();
        let m1 = t.matricize(1).unwrap();
        let m2 = t.matricize(2).unwrap();
        let m3 = t.matricize(3).unwrap();
        let back1 = Tensor3::from_fn(p1, p2, n, |i, j, k| m1[(i, j + p2 * k)]).unwrap();
        let back2 = Tensor3::from_fn(p1, p2, n, |i, j, k| m2[(j, i + p1 * k)]).unwrap();
        let back3 = Tensor3::from_fn(p1, p2, n, |i, j, k| m3[(k, j + p2 * i)]).unwrap();
        prop_assert_eq!(&back1, &t);
        prop_assert_eq!(&back2, &t);
        prop_assert_eq!(&back3, &t);
    }

    #[test]
    fn subtracting_projection_orthogonalizes((t, a, b, v) in tensor_with_vectors()) {
        let denom = a.norm_squared() * b.norm_squared() * v.norm_squared();
        prop_assume!(denom > 1e-6);
        let lambda = t.contract_all(&a, &b, &v).unwrap() / denom;
        let r = t.subtract_rank1(lambda, &a, &b, &v).unwrap();
        let inner = r.contract_all(&a, &b, &v).unwrap();
        prop_assert!(inner.abs() <= 1e-8 * t.frob_norm().max(1.0));
    }

    #[test]
    fn dist_vec_is_symmetric_sign_and_scale_invariant(
        u in finite_vec(6),
        v in finite_vec(6),
        c in 0.1..20.0f64,
    ) {
        let u = DVector::from_vec(u);
        let v = DVector::from_vec(v);
        prop_assume!(u.norm() > 1e-6 && v.norm() > 1e-6);
        let d = dist_vec(&u, &v).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert!((dist_vec(&v, &u).unwrap() - d).abs() < 1e-12);
        prop_assert!((dist_vec(&(-&u), &v).unwrap() - d).abs() < 1e-12);
        prop_assert!((dist_vec(&(&u * c), &v).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn dist_samples_matches_dist_vec(f in finite_vec(32), g in finite_vec(32)) {
        // Both reduce to the same cosine, so they agree exactly.
        let fv = DVector::from_vec(f.clone());
        let gv = DVector::from_vec(g.clone());
        prop_assume!(fv.norm() > 1e-3 && gv.norm() > 1e-3);
        let a = dist_samples(&f, &g).unwrap();
        let b = dist_vec(&fv, &gv).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn q_n_monotone_in_delta(
        mut eigs in prop::collection::vec(0.0..1.0f64, 1..12),
        d1 in 0.01..1.0f64,
        d2 in 0.01..1.0f64,
    ) {
        eigs.sort_by(|a, b| b.total_cmp(a));
        let spec = KernelSpec::eigen_list(eigs).unwrap();
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let q_lo = rkhs::q_n(lo, &spec, 16).unwrap();
        let q_hi = rkhs::q_n(hi, &spec, 16).unwrap();
        prop_assert!(q_lo <= q_hi + 1e-15);
        // And non-increasing in n.
        let q_n_small = rkhs::q_n(lo, &spec, 8).unwrap();
        prop_assert!(q_lo <= q_n_small + 1e-15);
    }
}
