use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tensor_bss::bss::{apply_unmixing, unmix_tensor, whiten_tensor};
use tensor_bss::eval::mdi;
use tensor_bss::moments::{mode_b_lags, mode_cov, LagSet};
use tensor_bss::simgen::{gen_latent_setting, haar_orthogonal, mix};
use tensor_bss::{Matrix, Method, Setting, Tensor, TensorSeries};

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn randn_matrix(r: usize, c: usize, rng: &mut ChaCha8Rng) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn randn_series(dims: &[usize], t: usize, rng: &mut ChaCha8Rng) -> TensorSeries {
    let frames = (0..t)
        .map(|_| Tensor::from_fn(dims.to_vec(), |_| rng.sample(StandardNormal)).unwrap())
        .collect();
    TensorSeries::new(frames).unwrap()
}

proptest! {
    #[test]
    fn lag_sets_round_trip(lags in proptest::collection::btree_set(0usize..40, 1..8)) {
        let set = LagSet::new(lags.into_iter().collect()).unwrap();
        let back: LagSet = set.to_string().parse().unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn lag_ranges_round_trip(a in 0usize..20, len in 1usize..15) {
        let set = LagSet::range(a, a + len - 1).unwrap();
        prop_assert_eq!(set.to_string().parse::<LagSet>().unwrap(), set);
    }

    #[test]
    fn flatten_round_trips(dims in proptest::collection::vec(1usize..5, 1..5), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let x = Tensor::from_fn(dims.clone(), |_| rng.sample(StandardNormal)).unwrap();
        for m in 0..dims.len() {
            let back = Tensor::unflatten(&x.flatten(m).unwrap(), m, &dims).unwrap();
            prop_assert_eq!(&back, &x);
        }
    }

    #[test]
    fn mode_products_compose(dims in proptest::collection::vec(1usize..4, 1..4), seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let x = Tensor::from_fn(dims.clone(), |_| rng.sample(StandardNormal)).unwrap();
        let m = seed as usize % dims.len();
        let a = randn_matrix(3, dims[m], &mut rng);
        let b = randn_matrix(2, 3, &mut rng);
        let lhs = x.mode_product(&a, m).unwrap().mode_product(&b, m).unwrap();
        let rhs = x.mode_product(&(&b * &a), m).unwrap();
        prop_assert!((lhs.vectorize() - rhs.vectorize()).amax() < 1e-12);
    }

    #[test]
    fn mdi_ignores_signed_permutation_and_scale(p in 2usize..9, seed in any::<u64>()) {
        let mut rng = rng_from(seed);
        let gamma = randn_matrix(p, p, &mut rng);
        let omega = randn_matrix(p, p, &mut rng);
        let mut perm: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let mut c = Matrix::zeros(p, p);
        for (i, &j) in perm.iter().enumerate() {
            let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
            c[(i, j)] = s * rng.random_range(0.2..5.0);
        }
        let v = mdi(&gamma, &omega).unwrap().value;
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!((mdi(&(c * &gamma), &omega).unwrap().value - v).abs() < 1e-10);
    }
}

#[test]
fn rotated_lag_moments_transform_covariantly() {
    // X = Z ⊙ U with orthogonal U: every B^m of X is the matching
    // combination of the B^m of Z, conjugated by U_m.
    let mut rng = rng_from(17);
    let dims = [3usize, 2, 2];
    let z = randn_series(&dims, 40, &mut rng);
    let u: Vec<Matrix> = dims.iter().map(|&p| haar_orthogonal(p, &mut rng)).collect();
    let x = mix(&z, &u).unwrap();
    for lags in [[0, 0, 0, 0], [0, 2, 2, 0], [1, 0, 3, 2]] {
        for m in 0..dims.len() {
            let p = dims[m];
            let um = &u[m];
            for i in 0..p {
                for j in 0..p {
                    let lhs = mode_b_lags(&x, m, lags, i, j).unwrap().entries;
                    let mut rhs = Matrix::zeros(p, p);
                    for k in 0..p {
                        for l in 0..p {
                            rhs += mode_b_lags(&z, m, lags, k, l).unwrap().entries * (um[(i, k)] * um[(j, l)]);
                        }
                    }
                    let rhs = um * rhs * um.transpose();
                    assert!((lhs - rhs).amax() < 1e-10, "lags {lags:?} mode {m} ({i},{j})");
                }
            }
        }
    }
}

#[test]
fn mode_whitening_inverts_input_mode_covariances() {
    let mut rng = rng_from(3);
    let a = [
        randn_matrix(3, 3, &mut rng),
        randn_matrix(2, 2, &mut rng),
        randn_matrix(4, 4, &mut rng),
    ];
    let x = mix(&randn_series(&[3, 2, 4], 500, &mut rng), &a).unwrap();
    let (_, ws) = whiten_tensor(&x).unwrap();
    for (m, w) in ws.iter().enumerate() {
        let c = mode_cov(&x, m).unwrap().entries;
        assert!((w - w.transpose()).amax() < 1e-12);
        assert!((w * c * w - Matrix::identity(w.nrows(), w.nrows())).amax() < 1e-8);
    }
}

#[test]
fn stored_unmixing_reproduces_recovered_series() {
    let mut rng = rng_from(8);
    let z = gen_latent_setting(Setting::Sv, &[3, 2, 2], 800, &mut rng).unwrap();
    let a: Vec<Matrix> = [3, 2, 2].iter().map(|&p| randn_matrix(p, p, &mut rng)).collect();
    let x = mix(&z, &a).unwrap();
    for method in [Method::Tsobi, Method::Tgjade] {
        let res = unmix_tensor(&x, &method.default_config()).unwrap();
        let again = apply_unmixing(&x, &res).unwrap();
        let diff = (again.to_vector_series() - res.recovered.to_vector_series()).amax();
        assert!(diff < 1e-12, "{method}: {diff}");
    }
}

#[test]
fn gram_of_orthogonal_factors_is_identity() {
    let mut rng = rng_from(4);
    for p in [1, 2, 5, 12] {
        let q = haar_orthogonal(p, &mut rng);
        let err = (q.transpose() * &q - Matrix::identity(p, p)).amax();
        assert!(err < 1e-12);
        let v = DVector::from_fn(p, |_, _| rng.sample(StandardNormal));
        assert!(((&q * &v).norm() - v.norm()).abs() < 1e-12);
    }
}
