use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided one-sample Kolmogorov-Smirnov p-value against N(0, 1), using
/// the asymptotic Kolmogorov distribution with Stephens' small-sample shift.
pub fn ks_normal_pvalue(sample: &mut [f64]) -> f64 {
    let normal = Normal::new(0.0, 1.0).unwrap();
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sample.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let en = n.sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * d;
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
