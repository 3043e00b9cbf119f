//! Ordinary least squares on `(ln x, ln y)`.

use serde::Serialize;

use crate::error::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `ln y = slope ln x + intercept`.
pub fn loglog_regress(points: &[(f64, f64)]) -> Result<RegressionResult, HarnessError> {
    if points.len() < 2 {
        return Err(HarnessError::Config(format!("need at least 2 points, got {}", points.len())));
    }
    if let Some((x, y)) = points.iter().find(|(x, y)| !(x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)) {
        return Err(HarnessError::Config(format!("log-log fit needs positive values, got ({x}, {y})")));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ly.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::Config("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { (1.0 - sse / syy).clamp(0.0, 1.0) };
    Ok(RegressionResult { slope, intercept, r_squared, points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::log_grid;
    use adaconv_core::stream_rng;
    use rand::Rng;

    #[test]
    fn exact_power_law() {
        let r = loglog_regress(&[(1.0, 2.0), (10.0, 20.0), (100.0, 200.0)]).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-14);
        assert!((r.intercept - 2f64.ln()).abs() < 1e-14);
        assert!((r.r_squared - 1.0).abs() < 1e-14);
        let sq: Vec<(f64, f64)> = log_grid(1e-3, 50.0, 9).into_iter().map(|x| (x, x * x)).collect();
        assert!((loglog_regress(&sq).unwrap().slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law_on_default_grid() {
        let mut rng = stream_rng(53, 0);
        let pts: Vec<(f64, f64)> = log_grid(1e-6, 1.0, 13)
            .into_iter()
            .map(|x| (x, 3.0 * x.powf(0.56) * (1.0 + 0.01 * rng.gen_range(-1.0..1.0))))
            .collect();
        let r = loglog_regress(&pts).unwrap();
        assert!((r.slope - 0.56).abs() < 0.02);
        assert!(r.r_squared > 0.99);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(loglog_regress(&[(1.0, 1.0)]).is_err());
        assert!(loglog_regress(&[(1.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(loglog_regress(&[(1.0, 1.0), (2.0, -2.0)]).is_err());
        assert!(loglog_regress(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }
}
