use crate::error::{Error, Result};

/// One-sample Kolmogorov–Smirnov distance `sup_x |F_M(x) - F(x)|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(values: &[f64], cdf: F) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InvalidArgument(
            "ks_statistic needs at least one value".into(),
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / m - f;
        let below = f - i as f64 / m;
        d = d.max(above).max(below);
    }
    Ok(d.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{normal_cdf, normal_quantile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stratified_sample_is_close() {
        let m = 400;
        let values: Vec<f64> = (0..m)
            .map(|k| normal_quantile((k as f64 + 0.5) / m as f64).unwrap())
            .collect();
        let d = ks_statistic(&values, normal_cdf).unwrap();
        assert!(d <= 0.5 / m as f64 + 1e-12, "{d}");
    }

    #[test]
    fn single_value_at_median() {
        let d = ks_statistic(&[0.0], normal_cdf).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(ks_statistic(&[], normal_cdf).is_err());
    }

    #[test]
    fn uniform_draws_usually_pass_the_one_percent_cutoff() {
        let crit = 1.63 / 2000f64.sqrt();
        let mut pass = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
            if ks_statistic(&v, |x| x.clamp(0.0, 1.0)).unwrap() < crit {
                pass += 1;
            }
        }
        assert!(pass >= 95, "{pass}");
    }
}
