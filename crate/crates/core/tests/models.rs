use soundscape_core::dataset::{simulate_dataset, Layout, Truth};
use soundscape_core::gibbs::{CandidateModel, MultiModel, MultiPriors, SamplerConfig, UniModel, UniPriors};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// With one index, an inverse-Wishart on `lambda` with `r = 4`, `R = 0.5`
/// is the univariate IG(2, 1) prior on `tau2`, so both samplers target the
/// same posterior.
#[test]
fn one_index_multivariate_matches_univariate() {
    let mut alpha = vec![0.0; 13];
    alpha[0] = 1.0;
    alpha[1] = 0.5;
    alpha[12] = -0.6;
    let truth = Truth::Multi {
        alpha,
        lambda: vec![0.4],
        sigma2: 1.0,
    };
    let data = simulate_dataset(&truth, &Layout::with_sites(6, 3, 5, &["05:30", "06:30"]), 17).unwrap();
    assert_eq!(data.index_names, vec!["NDSI".to_string()]);

    let toggles = CandidateModel::Full.toggles();
    let uni = UniModel::new(&data, 0, toggles)
        .unwrap()
        .with_priors(UniPriors {
            alpha_variance: 100.0,
            ..UniPriors::default()
        })
        .unwrap();
    let multi = MultiModel::new(&data, toggles)
        .unwrap()
        .with_priors(MultiPriors {
            alpha_variance: 100.0,
            sigma2_shape: 2.0,
            sigma2_scale: 1.0,
            wishart_df: 4.0,
            wishart_r: vec![0.5],
        })
        .unwrap();
    let cfg = SamplerConfig {
        iterations: 6000,
        burn_in: 1000,
        chains: 2,
        seed: 11,
        ..Default::default()
    };
    let u = uni.run(&cfg).unwrap();
    let m = multi.run(&cfg).unwrap();

    let pairs = [
        ("alpha1_1", "alpha2_NDSI_1"),
        ("alpha1_2", "alpha2_NDSI_2"),
        ("alpha1_13", "alpha2_NDSI_13"),
        ("sigma2", "sigma2"),
        ("tau2", "lambda_NDSI_NDSI"),
    ];
    for (a, b) in pairs {
        let x = u.column_by_label(a).unwrap();
        let y = m.column_by_label(b).unwrap();
        // posterior sd as the yardstick; both chains are long relative to it
        let tol = 0.15 * sd(&x).max(sd(&y));
        assert!((mean(&x) - mean(&y)).abs() < tol, "{a}: {} vs {}", mean(&x), mean(&y));
        assert!((sd(&x) / sd(&y) - 1.0).abs() < 0.15, "{a}: sd {} vs {}", sd(&x), sd(&y));
    }
}
