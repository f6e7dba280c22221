//! One-way ANOVA and Tukey's honest significant difference test.

use serde::{Deserialize, Serialize};

use super::special::{f_sf, ln_gamma, normal_interval, normal_pdf};
use super::{quad, StatsError, P_FLOOR};

fn validate_groups(groups: &[Vec<f64>]) -> Result<(), StatsError> {
    if groups.len() < 2 {
        return Err(StatsError::Domain(format!("need at least 2 groups, got {}", groups.len())));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(StatsError::Domain(format!("group {i} has {} values, at least 2 needed", g.len())));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::Domain(format!("group {i} has a non-finite value")));
        }
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    if xs.iter().all(|&x| x == xs[0]) {
        return xs[0];
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

struct Partition {
    means: Vec<f64>,
    ss_between: f64,
    ss_within: f64,
    n: usize,
}

fn partition(groups: &[Vec<f64>]) -> Partition {
    let n: usize = groups.iter().map(Vec::len).sum();
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = mean(&all);
    let means: Vec<f64> = groups.iter().map(|g| mean(g)).collect();
    let ss_between = groups.iter().zip(&means).map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand)).sum();
    let ss_within = groups.iter().zip(&means).map(|(g, m)| g.iter().map(|x| (x - m) * (x - m)).sum::<f64>()).sum();
    Partition { means, ss_between, ss_within, n }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnovaResult {
    #[serde(with = "crate::real")]
    pub f_statistic: f64,
    pub p_value: f64,
    /// Set when the true p-value is below the reporting floor; `p_value` is then 0.
    pub p_underflow: bool,
    pub df_between: usize,
    pub df_within: usize,
    pub ss_between: f64,
    pub ss_within: f64,
}

impl AnovaResult {
    pub fn p_display(&self) -> String {
        if self.p_underflow {
            "≈0".into()
        } else {
            format!("{}", self.p_value)
        }
    }
}

fn floor_p(p: f64) -> (f64, bool) {
    let p = p.clamp(0.0, 1.0);
    if p < P_FLOOR {
        (0.0, true)
    } else {
        (p, false)
    }
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult, StatsError> {
    validate_groups(groups)?;
    let part = partition(groups);
    let df_between = groups.len() - 1;
    let df_within = part.n - groups.len();
    let (f, p) = if part.ss_within == 0.0 {
        if part.ss_between > 0.0 {
            (f64::INFINITY, 0.0)
        } else {
            (0.0, 1.0)
        }
    } else {
        let f = (part.ss_between / df_between as f64) / (part.ss_within / df_within as f64);
        (f, f_sf(f, df_between as f64, df_within as f64))
    };
    let (p_value, p_underflow) = floor_p(p);
    Ok(AnovaResult {
        f_statistic: f,
        p_value,
        p_underflow: p_underflow || (p == 0.0 && f.is_infinite()),
        df_between,
        df_within,
        ss_between: part.ss_between,
        ss_within: part.ss_within,
    })
}

/// P(R ≤ w) for the range of `k` independent standard normals.
pub fn normal_range_cdf(w: f64, k: usize) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w.is_infinite() {
        return 1.0;
    }
    let km1 = (k - 1) as i32;
    let f = |z: f64| normal_pdf(z) * normal_interval(z, z + w).powi(km1);
    let v = k as f64 * quad::integrate_split(&f, -8.5, 8.5, 4, 1e-10, 30);
    v.clamp(0.0, 1.0)
}

/// CDF of the studentized range with `k` groups and `df` degrees of freedom.
pub fn ptukey(q: f64, k: usize, df: f64) -> f64 {
    assert!(k >= 2, "studentized range needs k >= 2");
    if q.is_nan() {
        return f64::NAN;
    }
    if q <= 0.0 {
        return 0.0;
    }
    if q.is_infinite() {
        return 1.0;
    }
    if df.is_infinite() || df > 50_000.0 {
        return normal_range_cdf(q, k);
    }
    // s = sqrt(chi2_df / df)
    let log_norm = std::f64::consts::LN_2 + 0.5 * df * df.ln() - 0.5 * df * std::f64::consts::LN_2 - ln_gamma(0.5 * df);
    let density = |s: f64| {
        if s <= 0.0 {
            return if df == 1.0 { log_norm.exp() } else { 0.0 };
        }
        (log_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s).exp()
    };
    let mode = ((df - 1.0) / df).max(0.0).sqrt();
    let spread = 15.0 / (2.0 * df).sqrt();
    let lo = (mode - spread).max(0.0);
    let hi = mode + spread;
    let f = |s: f64| density(s) * normal_range_cdf(q * s, k);
    quad::integrate_split(&f, lo, hi, 8, 1e-9, 30).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyPair {
    pub group_a: usize,
    pub group_b: usize,
    /// mean(b) − mean(a)
    pub mean_diff: f64,
    #[serde(with = "crate::real")]
    pub q_statistic: f64,
    pub p_adjusted: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TukeyResult {
    pub alpha: f64,
    pub groups: usize,
    pub df_within: usize,
    pub ms_within: f64,
    pub pairs: Vec<TukeyPair>,
}

/// Tukey-Kramer comparisons of every unordered group pair.
pub fn tukey_hsd(groups: &[Vec<f64>], alpha: f64) -> Result<TukeyResult, StatsError> {
    validate_groups(groups)?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let part = partition(groups);
    let k = groups.len();
    let df_within = part.n - k;
    let msw = part.ss_within / df_within as f64;
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let diff = part.means[b] - part.means[a];
            let se = (msw / 2.0 * (1.0 / groups[a].len() as f64 + 1.0 / groups[b].len() as f64)).sqrt();
            let (q, p) = if diff == 0.0 {
                (0.0, 1.0)
            } else if se == 0.0 {
                (f64::INFINITY, 0.0)
            } else {
                let q = diff.abs() / se;
                (q, (1.0 - ptukey(q, k, df_within as f64)).clamp(0.0, 1.0))
            };
            pairs.push(TukeyPair { group_a: a, group_b: b, mean_diff: diff, q_statistic: q, p_adjusted: p, reject: p < alpha });
        }
    }
    Ok(TukeyResult { alpha, groups: k, df_within, ms_within: msw, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anova_hand_values() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(r.f_statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.f_statistic - 13.5).abs() < 1e-12);
        assert_eq!((r.df_between, r.df_within), (1, 4));
    }

    #[test]
    fn anova_degenerate() {
        let r = one_way_anova(&[vec![0.1; 3], vec![0.7; 3]]).unwrap();
        assert_eq!(r.f_statistic, f64::INFINITY);
        assert_eq!(r.p_value, 0.0);
        assert_eq!(r.p_display(), "≈0");
        let r = one_way_anova(&[vec![0.1; 3], vec![0.1; 3]]).unwrap();
        assert_eq!((r.f_statistic, r.p_value), (0.0, 1.0));
        assert!(one_way_anova(&[vec![1.0, 2.0]]).is_err());
        assert!(one_way_anova(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn range_cdf_k2_is_closed_form() {
        // the range of two normals is |Z1 - Z2| ~ sqrt(2)|Z|
        for w in [0.1, 0.5, 1.0, 2.5, 4.0] {
            let exact = 2.0 * super::super::special::normal_cdf(w / 2f64.sqrt()) - 1.0;
            assert!((normal_range_cdf(w, 2) - exact).abs() < 1e-12, "{w}");
        }
    }

    #[test]
    fn tukey_basic() {
        let r = tukey_hsd(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]], 0.05).unwrap();
        assert_eq!(r.pairs.len(), 1);
        assert_eq!(r.pairs[0].mean_diff, 0.0);
        assert!(!r.pairs[0].reject);
        let r = tukey_hsd(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]], 0.05).unwrap();
        assert_eq!(r.pairs[0].mean_diff.abs(), 3.0);
    }
}
