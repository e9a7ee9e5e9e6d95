use crate::error::{Error, Result};

/// Result of fitting `rate = c * p^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialFit {
    pub p: f64,
    pub prefactor: f64,
    /// Euclidean norm of the log-domain residuals.
    pub residual_norm: f64,
    /// Orders dropped because their rate was not positive.
    pub excluded: Vec<u32>,
}

/// Unweighted least squares of `ln(rate)` against `n`; the slope is `ln(p)`.
pub fn fit_exponential(n_values: &[u32], rates: &[f64]) -> Result<ExponentialFit> {
    if n_values.len() != rates.len() {
        return Err(Error::InvalidParameter {
            field: "rates",
            reason: format!("{} rates for {} orders", rates.len(), n_values.len()),
        });
    }
    let mut excluded = Vec::new();
    let mut points = Vec::new();
    for (&n, &rate) in n_values.iter().zip(rates) {
        if rate > 0.0 && rate.is_finite() {
            points.push((f64::from(n), rate.ln()));
        } else {
            excluded.push(n);
        }
    }
    let mut distinct: Vec<u32> = n_values
        .iter()
        .zip(rates)
        .filter(|(_, &r)| r > 0.0 && r.is_finite())
        .map(|(&n, _)| n)
        .collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientFitPoints(distinct.len()));
    }

    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual_norm = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ExponentialFit {
        p: slope.exp(),
        prefactor: intercept.exp(),
        residual_norm,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_geometric_data() {
        let n = [1, 2, 3, 4];
        let rates: Vec<f64> = n.iter().map(|&k| 3.0e5 * 0.0136f64.powi(k as i32)).collect();
        let fit = fit_exponential(&n, &rates).unwrap();
        assert!((fit.p - 0.0136).abs() < 1e-12);
        assert!((fit.prefactor / 3.0e5 - 1.0).abs() < 1e-10);
        assert!(fit.residual_norm < 1e-9);
    }

    #[test]
    fn flat_rates_give_unit_p() {
        let fit = fit_exponential(&[1, 2, 3], &[1.0, 1.0, 1.0]).unwrap();
        assert!((fit.p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_rates_are_excluded() {
        let fit = fit_exponential(&[1, 2, 3, 4], &[0.1, 0.01, 0.001, 0.0]).unwrap();
        assert_eq!(fit.excluded, vec![4]);
        assert!((fit.p - 0.1).abs() < 1e-12);
    }

    #[test]
    fn needs_two_orders() {
        assert!(matches!(
            fit_exponential(&[1, 1], &[0.1, 0.2]),
            Err(Error::InsufficientFitPoints(1))
        ));
        assert!(fit_exponential(&[1, 2], &[0.1, 0.0]).is_err());
        assert!(fit_exponential(&[1, 2], &[0.1]).is_err());
    }
}
