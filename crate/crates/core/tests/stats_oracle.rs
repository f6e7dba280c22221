use nalgebra::DMatrix;
use persona_miner::stats::pca::covariance;
use persona_miner::stats::special::{erfc, f_sf, ln_gamma, t_two_sided};
use persona_miner::stats::{one_way_anova, pca, ptukey, tukey_hsd};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use statrs::function::gamma;

#[test]
fn special_functions_match_statrs() {
    for x in [0.01, 0.3, 1.0, 2.5, 7.0, 33.3, 150.0] {
        assert!((ln_gamma(x) - gamma::ln_gamma(x)).abs() <= 1e-12 * gamma::ln_gamma(x).abs().max(1.0), "{x}");
    }
    // reference values from the C library's erfc
    let libm = [
        (-3.0, 1.9999779095030015),
        (-0.7, 1.6778011938374184),
        (0.0, 1.0),
        (0.2, 0.7772974107895215),
        (1.0, 0.15729920705028513),
        (2.0, 0.004677734981047265),
        (4.5, 1.9661604415428873e-10),
        (8.0, 1.1224297172982928e-29),
    ];
    for (x, want) in libm {
        assert!((erfc(x) - want).abs() <= 1e-14 * want, "{x}: {} vs {want}", erfc(x));
    }
}

#[test]
fn f_tail_matches_statrs() {
    for (f, d1, d2) in [(0.5, 2.0, 10.0), (13.5, 1.0, 4.0), (3.1, 4.0, 40.0), (80.0, 2.0, 297.0), (1.0, 9.0, 3.0)] {
        let want = FisherSnedecor::new(d1, d2).unwrap().sf(f);
        assert!((f_sf(f, d1, d2) - want).abs() <= 1e-12, "F({d1},{d2})={f}: {} vs {want}", f_sf(f, d1, d2));
    }
}

#[test]
fn anova_matches_squared_pooled_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let na = rng.random_range(2..30);
        let nb = rng.random_range(2..30);
        let a: Vec<f64> = (0..na).map(|_| rng.random_range(0.0..10.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.random_range(2.0..12.0)).collect();
        let ma = a.iter().sum::<f64>() / na as f64;
        let mb = b.iter().sum::<f64>() / nb as f64;
        let ss: f64 = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() + b.iter().map(|x| (x - mb).powi(2)).sum::<f64>();
        let df = (na + nb - 2) as f64;
        let sp2 = ss / df;
        let t = (ma - mb) / (sp2 * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
        let r = one_way_anova(&[a, b]).unwrap();
        assert!((r.f_statistic - t * t).abs() <= 1e-9 * (t * t).max(1.0));
        let p_t = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().sf(t.abs());
        assert!((r.p_value - p_t).abs() <= 1e-10);
    }
}

#[test]
fn anova_is_order_invariant() {
    let g = vec![vec![1.0, 2.5, 3.0], vec![4.0, 5.5, 6.0, 2.0], vec![9.0, 8.0]];
    let r1 = one_way_anova(&g).unwrap();
    let r2 = one_way_anova(&[g[2].clone(), g[0].clone(), g[1].clone()]).unwrap();
    assert!((r1.f_statistic - r2.f_statistic).abs() <= 1e-12 * r1.f_statistic);
}

#[test]
fn studentized_range_two_groups_is_scaled_t() {
    // with two groups the range statistic is sqrt(2)|t|
    for df in [1.0, 2.0, 5.0, 12.0, 60.0, 500.0] {
        let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
        for t in [0.2, 0.9, 1.7, 2.6, 4.0, 7.5] {
            let want = 1.0 - 2.0 * t_dist.sf(t);
            let got = ptukey(2f64.sqrt() * t, 2, df);
            assert!((got - want).abs() <= 1e-8, "df={df} t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn studentized_range_table_values() {
    // upper 5% and 1% points from published tables (three decimals)
    let points = [
        (3.877, 3, 10.0, 0.95),
        (3.151, 2, 10.0, 0.95),
        (3.958, 4, 20.0, 0.95),
        (3.977, 5, 60.0, 0.95),
        (4.824, 10, 30.0, 0.95),
        (5.270, 3, 10.0, 0.99),
    ];
    for (q, k, df, p) in points {
        assert!((ptukey(q, k, df) - p).abs() < 1e-4, "q={q} k={k} df={df}: {}", ptukey(q, k, df));
    }
}

#[test]
fn studentized_range_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let (k, df, q) = (4usize, 6usize, 3.2);
    let trials = 200_000;
    let mut below = 0;
    for _ in 0..trials {
        let z: Vec<f64> = (0..k).map(|_| normal.sample(&mut rng)).collect();
        let range = z.iter().cloned().fold(f64::MIN, f64::max) - z.iter().cloned().fold(f64::MAX, f64::min);
        let chi2: f64 = (0..df).map(|_| normal.sample(&mut rng).powi(2)).sum();
        if range / (chi2 / df as f64).sqrt() <= q {
            below += 1;
        }
    }
    let p_hat = below as f64 / trials as f64;
    let se = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
    assert!((ptukey(q, k, df as f64) - p_hat).abs() < 4.0 * se);
}

#[test]
fn tukey_outlier_group() {
    let g = vec![vec![10.0, 11.0, 9.5, 10.5, 10.2], vec![10.4, 9.8, 10.9, 10.1, 10.6], vec![30.0, 31.0, 29.5, 30.5, 30.2]];
    let r = tukey_hsd(&g, 0.05).unwrap();
    let rej: Vec<_> = r.pairs.iter().map(|p| ((p.group_a, p.group_b), p.reject)).collect();
    assert_eq!(rej, vec![((0, 1), false), ((0, 2), true), ((1, 2), true)]);
}

#[test]
fn tukey_is_at_least_the_unadjusted_p() {
    let g = vec![vec![1.0, 2.0, 3.0, 2.5], vec![2.0, 3.5, 4.0, 3.0], vec![3.0, 4.5, 5.0, 4.2], vec![1.5, 2.2, 2.9, 2.0]];
    let r = tukey_hsd(&g, 0.05).unwrap();
    let df = r.df_within as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
    for p in &r.pairs {
        let (a, b) = (&g[p.group_a], &g[p.group_b]);
        let se = (r.ms_within * (1.0 / a.len() as f64 + 1.0 / b.len() as f64)).sqrt();
        let unadjusted = 2.0 * t_dist.sf(p.mean_diff.abs() / se);
        assert!(p.p_adjusted + 1e-12 >= unadjusted, "{p:?} vs {unadjusted}");
    }
}

fn power_iteration(cov: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let n = cov.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.01).collect();
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| cov[i][j] * v[j]).sum()).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        lambda = norm;
        v = w.into_iter().map(|x| x / norm).collect();
    }
    (lambda, v)
}

#[test]
fn pca_matches_nalgebra_and_power_iteration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let base: f64 = rng.random_range(0.0..10.0);
            (0..10).map(|j| base * (j as f64 + 1.0) / 5.0 + rng.random_range(0.0..2.0)).collect()
        })
        .collect();
    let p = pca(&rows, 10).unwrap();
    let (_, cov) = covariance(&rows);
    let trace: f64 = (0..10).map(|i| cov[i][i]).sum();
    let m = DMatrix::from_fn(10, 10, |i, j| cov[i][j]);
    let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    for (r, e) in p.explained_variance_ratio.iter().zip(&eig) {
        assert!((r - e / trace).abs() <= 1e-9);
    }
    let (lambda, v) = power_iteration(&cov);
    assert!((p.explained_variance[0] - lambda).abs() <= 1e-9 * lambda);
    let dot: f64 = v.iter().zip(&p.components[0]).map(|(a, b)| a * b).sum();
    assert!((dot.abs() - 1.0).abs() <= 1e-9);
    // orthonormal loadings, nonincreasing ratios
    for i in 0..10 {
        for j in 0..10 {
            let d: f64 = p.components[i].iter().zip(&p.components[j]).map(|(a, b)| a * b).sum();
            assert!((d - if i == j { 1.0 } else { 0.0 }).abs() <= 1e-9);
        }
    }
    assert!(p.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
    assert!(p.total_ratio() <= 1.0 + 1e-9);
    for r in &rows {
        let back = p.reconstruct(&p.project(r));
        assert!(back.iter().zip(r).all(|(a, b)| (a - b).abs() <= 1e-9));
    }
}

#[test]
fn isotropic_sample_splits_variance_evenly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = Normal::new(0.0, 1.0).unwrap();
    let rows: Vec<Vec<f64>> = (0..5000).map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)]).collect();
    let p = pca(&rows, 2).unwrap();
    let (_, cov) = covariance(&rows);
    let (lambda, _) = power_iteration(&cov);
    assert!((p.explained_variance[0] - lambda).abs() <= 1e-9);
    assert!((p.explained_variance_ratio[0] - 0.5).abs() < 0.05);
    assert!((p.explained_variance_ratio[1] - 0.5).abs() < 0.05);
}

proptest! {
    #[test]
    fn pca_sign_convention(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..4).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let p = pca(&rows, 4).unwrap();
        for c in &p.components {
            let big = c.iter().cloned().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            prop_assert!(big > 0.0);
        }
    }

    #[test]
    fn t_tail_matches_statrs(t in 0.0f64..20.0, df in 1.0f64..400.0) {
        let want = 2.0 * StudentsT::new(0.0, 1.0, df).unwrap().sf(t);
        prop_assert!((t_two_sided(t, df) - want).abs() <= 1e-11);
    }
}
