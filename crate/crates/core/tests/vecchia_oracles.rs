mod common;

use common::{dense_correlation, gls, to_dmatrix, transform_matrix};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vdecor::dataset::with_intercept;
use vdecor::geom::LocationSet;
use vdecor::kernel::CorrelationModel;
use vdecor::learners::LinearModel;
use vdecor::simgen::sample_locations;
use vdecor::vecchia::{
    compute_factors, prediction_factors, recorrelate_prediction, transform_features_at, PredictionFactors, VecchiaFactors,
};

fn models() -> Vec<CorrelationModel> {
    vec![
        CorrelationModel::exponential(0.236, 0.0).unwrap(),
        CorrelationModel::exponential(0.1, 0.25).unwrap(),
        CorrelationModel::matern(1.5, 0.08, 0.5).unwrap(),
        CorrelationModel::matern(2.1, 0.05, 0.25).unwrap(),
    ]
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
}

#[test]
fn full_conditioning_equals_inverse_cholesky() {
    let locs = sample_locations(120, 4).unwrap();
    for m in models() {
        let f = compute_factors(&locs, &m, 119).unwrap();
        let r = dense_correlation(&locs, &m, f.ordering().perm());
        let l = r.clone().cholesky().unwrap().l();
        let linv = l.try_inverse().unwrap();
        let a = transform_matrix(&f);
        let diff = (&a - &linv).abs().max() / linv.abs().max();
        assert!(diff < 1e-8, "{m:?}: {diff}");
        let w = &a * &r * a.transpose() - DMatrix::identity(120, 120);
        assert!(w.abs().max() < 1e-8, "{m:?}");
    }
}

#[test]
fn truncated_weights_solve_the_local_system() {
    let locs = sample_locations(200, 5).unwrap();
    for m in models() {
        let f = compute_factors(&locs, &m, 7).unwrap();
        let perm = f.ordering().perm();
        for i in (1..200).step_by(13) {
            let set = f.sets().get(i);
            let mut pts: Vec<usize> = set.iter().map(|&j| perm[j]).collect();
            pts.push(perm[i]);
            let r = dense_correlation(&locs, &m, &pts);
            let k = set.len();
            let rnn = r.view((0, 0), (k, k)).into_owned();
            let rin = r.view((0, k), (k, 1)).into_owned();
            let b = rnn.clone().cholesky().unwrap().solve(&rin);
            for (x, y) in b.iter().zip(f.weights(i)) {
                assert!((x - y).abs() < 1e-9, "{m:?} pos {i}");
            }
            let v = 1.0 - (rin.transpose() * &b)[(0, 0)];
            assert!((v - f.variance(i)).abs() < 1e-9);
        }
    }
}

#[test]
fn ols_on_transformed_data_is_gls() {
    let n = 300;
    let locs = sample_locations(n, 9).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let raw = Array2::from_shape_fn((n, 3), |_| rng.random_range(-2.0..2.0));
    let x = with_intercept(raw.view());
    let y = noise(n, 2);
    for m in models() {
        let f = compute_factors(&locs, &m, n).unwrap();
        let t = f.transform(&y, x.view()).unwrap();
        let ols = LinearModel::fit(t.features.view(), &t.response).unwrap();
        let r = dense_correlation(&locs, &m, &(0..n).collect::<Vec<_>>());
        let beta = gls(&to_dmatrix(&x), &DVector::from_vec(y.clone()), &r);
        for (a, b) in ols.coefficients().iter().zip(beta.iter()) {
            assert!((a - b).abs() < 1e-6, "{m:?}: {a} vs {b}");
        }
    }
}

#[test]
fn round_trip_at_training_points() {
    let locs = sample_locations(250, 6).unwrap();
    let y = noise(250, 3);
    for m in models() {
        for c in [1, 10, 30] {
            let f = compute_factors(&locs, &m, c).unwrap();
            let yt = f.decorrelate_response(&y).unwrap();
            for pos in 0..250 {
                let pf = f.training_conditional(pos);
                let back = recorrelate_prediction(yt[pos], &pf, &y).unwrap();
                let orig = y[f.ordering().original(pos)];
                assert!((back - orig).abs() <= 1e-10 * orig.abs().max(1.0), "{m:?} C={c} pos {pos}");
            }
        }
    }
}

#[test]
fn nugget_one_is_the_identity() {
    let locs = sample_locations(100, 1).unwrap();
    let m = CorrelationModel::matern(0.5, 0.3, 1.0).unwrap();
    let f = compute_factors(&locs, &m, 30).unwrap();
    assert!(f.variances().iter().all(|&v| v == 1.0));
    let y = noise(100, 8);
    let x = with_intercept(Array2::from_shape_fn((100, 2), |(i, j)| (i * (j + 1)) as f64).view());
    let (yt, xt) = f.transform(&y, x.view()).unwrap().into_input_order();
    assert_eq!(yt, y);
    assert_eq!(xt, x);
}

#[test]
fn prediction_weights_are_kriging_weights() {
    let locs = sample_locations(80, 12).unwrap();
    let m = CorrelationModel::exponential(0.2, 0.3).unwrap();
    let u = [0.37, 0.61];
    let pf = prediction_factors(&u, &locs, &m, 80).unwrap();
    let mut ids = pf.neighbors.clone();
    ids.sort_unstable();
    assert_eq!(ids, (0..80).collect::<Vec<_>>());
    let order = &pf.neighbors;
    let r = dense_correlation(&locs, &m, order);
    let ru = DVector::from_fn(80, |a, _| {
        let d = common::sq(&u, locs.point(order[a])).sqrt();
        0.7 * m.correlation(d).unwrap()
    });
    let b = r.cholesky().unwrap().solve(&ru);
    for (x, y) in b.iter().zip(&pf.weights) {
        assert!((x - y).abs() < 1e-8);
    }
    assert!((1.0 - ru.dot(&b) - pf.variance).abs() < 1e-10);
}

#[test]
fn features_at_a_new_point_follow_the_same_map() {
    let locs = sample_locations(60, 2).unwrap();
    let m = CorrelationModel::exponential(0.15, 0.2).unwrap();
    let x = with_intercept(Array2::from_shape_fn((60, 2), |(i, j)| ((i + 3 * j) % 7) as f64).view());
    let u = [0.5, 0.5];
    let pf = prediction_factors(&u, &locs, &m, 10).unwrap();
    let row = [1.0, 2.0, -1.0];
    let t = transform_features_at(&row, x.view(), &pf).unwrap();
    let s = pf.variance.sqrt();
    for c in 0..3 {
        let lag: f64 = pf.neighbors.iter().zip(&pf.weights).map(|(&j, &b)| b * x[[j, c]]).sum();
        assert!((t[c] - (row[c] - lag) / s).abs() < 1e-12);
    }
    assert!(transform_features_at(&row[..2], x.view(), &pf).is_err());
}

#[test]
fn factors_json_round_trip_is_exact() {
    let locs = sample_locations(150, 21).unwrap();
    let f = compute_factors(&locs, &CorrelationModel::matern(2.1, 0.1, 0.25).unwrap(), 12).unwrap();
    let mut buf = Vec::new();
    f.write_json(&mut buf).unwrap();
    let g = VecchiaFactors::read_json(buf.as_slice()).unwrap();
    assert_eq!(f, g);
}

#[test]
fn response_transform_rejects_wrong_length() {
    let locs = sample_locations(10, 1).unwrap();
    let f = compute_factors(&locs, &CorrelationModel::exponential(0.2, 0.1).unwrap(), 3).unwrap();
    assert!(f.decorrelate_response(&[1.0; 9]).is_err());
    let no_intercept = Array2::from_elem((10, 2), 2.0);
    assert!(f.decorrelate_features(no_intercept.view()).is_err());
}

fn arb_model() -> impl Strategy<Value = CorrelationModel> {
    (0.02f64..0.5, 0.0f64..0.99, prop::bool::ANY, 0.3f64..3.0).prop_map(|(r, w, mat, nu)| {
        if mat {
            CorrelationModel::matern(nu, r, w).unwrap()
        } else {
            CorrelationModel::exponential(r, w).unwrap()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn prop_response_transform_is_linear(m in arb_model(), seed in 0u64..1000, a in -3.0f64..3.0) {
        let locs = sample_locations(90, seed).unwrap();
        let f = compute_factors(&locs, &m, 8).unwrap();
        let y1 = noise(90, seed + 1);
        let y2 = noise(90, seed + 2);
        let mix: Vec<f64> = y1.iter().zip(&y2).map(|(p, q)| a * p + q).collect();
        let (t1, t2, tm) = (
            f.decorrelate_response(&y1).unwrap(),
            f.decorrelate_response(&y2).unwrap(),
            f.decorrelate_response(&mix).unwrap(),
        );
        for i in 0..90 {
            let want = a * t1[i] + t2[i];
            prop_assert!((tm[i] - want).abs() <= 1e-9 * want.abs().max(1.0));
        }
    }

    #[test]
    fn prop_variances_in_unit_interval(m in arb_model(), seed in 0u64..1000, c in 1usize..20) {
        let locs = sample_locations(120, seed).unwrap();
        let f = compute_factors(&locs, &m, c).unwrap();
        for &v in f.variances() {
            prop_assert!(v > 0.0 && v <= 1.0, "v = {}", v);
        }
        prop_assert_eq!(f.variance(0), 1.0);
    }

    #[test]
    fn prop_factors_invariant_to_coordinate_scaling(seed in 0u64..1000, s in 0.5f64..4.0) {
        // scaling locations and range together leaves correlations unchanged
        let locs = sample_locations(70, seed).unwrap();
        let scaled = LocationSet::new(locs.coords() * s).unwrap();
        let m = CorrelationModel::exponential(0.2, 0.3).unwrap();
        let f = compute_factors(&locs, &m, 10).unwrap();
        let g = compute_factors(&scaled, &m.with_range(0.2 * s).unwrap(), 10).unwrap();
        prop_assert_eq!(f.ordering(), g.ordering());
        for i in 0..70 {
            prop_assert!((f.variance(i) - g.variance(i)).abs() < 1e-9);
        }
    }
}

#[test]
fn full_conditioning_matches_pointwise_solves() {
    let locs = sample_locations(120, 17).unwrap();
    for m in [
        CorrelationModel::exponential(0.15, 0.2).unwrap(),
        CorrelationModel::matern(1.7, 0.1, 0.0).unwrap(),
    ] {
        let f = compute_factors(&locs, &m, 119).unwrap();
        for pos in 0..locs.len() {
            let ord = f.ordering();
            let set: Vec<usize> = f.sets().get(pos).iter().map(|&p| ord.original(p)).collect();
            let pf = PredictionFactors::from_neighbors(locs.point(ord.original(pos)), set, &locs, &m).unwrap();
            assert_eq!(pf.weights.as_slice(), f.weights(pos));
            assert_eq!(pf.variance, f.variance(pos));
        }
    }
}
