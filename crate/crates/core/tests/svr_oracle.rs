use credcrf::features::FeatureSpace;
use credcrf::regressors::{svr_train, Role, SvrSettings};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn raw(c: f64, epsilon: f64) -> SvrSettings {
    SvrSettings {
        c,
        epsilon,
        tol: 1e-15,
        max_iter: 200_000,
        standardize: false,
        clamp: false,
    }
}

/// With epsilon = 0 the loss is ridge regression with the bias
/// regularized: (I + 2C X'X) w = 2C X'y on the augmented design.
fn ridge(xs: &[Vec<f64>], y: &[f64], c: f64) -> Vec<f64> {
    let d = xs[0].len() + 1;
    let x = DMatrix::from_fn(xs.len(), d, |i, j| if j + 1 == d { 1.0 } else { xs[i][j] });
    let yv = DVector::from_column_slice(y);
    let a = DMatrix::identity(d, d) + (x.transpose() * &x) * (2.0 * c);
    let b = x.transpose() * yv * (2.0 * c);
    a.lu()
        .solve(&b)
        .expect("positive definite")
        .iter()
        .copied()
        .collect()
}

#[test]
fn epsilon_zero_matches_ridge_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..20 {
        let n = rng.random_range(5..40);
        let d = rng.random_range(1..6);
        let c = [0.1, 1.0, 10.0][trial % 3];
        let xs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = xs
            .iter()
            .map(|x| {
                3.0 + x
                    .iter()
                    .enumerate()
                    .map(|(k, v)| (k as f64 - 1.0) * v)
                    .sum::<f64>()
                    + rng.random_range(-0.3..0.3)
            })
            .collect();
        let ex: Vec<(Vec<f64>, f64)> = xs.iter().cloned().zip(y.iter().copied()).collect();
        let names: Vec<String> = (0..d).map(|k| format!("x{k}")).collect();
        let (m, _) =
            svr_train(Role::Language, FeatureSpace::new(names), &ex, &raw(c, 0.0)).unwrap();
        let w = ridge(&xs, &y, c);
        for k in 0..d {
            assert!(
                (m.weights[k] - w[k]).abs() < 1e-6,
                "trial {trial}: {:?} vs {w:?}",
                m.weights
            );
        }
        assert!((m.bias - w[d]).abs() < 1e-6);
    }
}

#[test]
fn noiseless_line_is_fit_exactly() {
    let xs: Vec<Vec<f64>> = (0..20)
        .map(|i| vec![i as f64 / 10.0, (i % 3) as f64])
        .collect();
    let ex: Vec<(Vec<f64>, f64)> = xs
        .iter()
        .map(|x| (x.clone(), 1.5 + 0.8 * x[0] - 0.3 * x[1]))
        .collect();
    let (m, _) = svr_train(
        Role::Topic,
        FeatureSpace::new(["a", "b"]),
        &ex,
        &raw(1e6, 0.0),
    )
    .unwrap();
    for (x, y) in &ex {
        assert!((m.predict_raw(x).unwrap() - y).abs() < 1e-3);
    }
}

#[test]
fn standardized_fit_predicts_in_original_units() {
    let ex: Vec<(Vec<f64>, f64)> = (0..30)
        .map(|i| {
            let x = i as f64 * 100.0;
            (vec![x, 7.0], 2.0 + x / 1000.0)
        })
        .collect();
    let s = SvrSettings {
        epsilon: 0.0,
        c: 1e4,
        ..SvrSettings::default()
    };
    let (m, _) = svr_train(Role::Topic, FeatureSpace::new(["big", "constant"]), &ex, &s).unwrap();
    assert!((m.predict(&[1500.0, 7.0]).unwrap() - 3.5).abs() < 1e-2);
    assert!((m.predict(&[1500.0, -50.0]).unwrap() - 3.5).abs() < 1e-2);
}
