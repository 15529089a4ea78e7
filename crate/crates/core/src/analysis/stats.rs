//! Small statistics helpers: least-squares lines and energy series.

use crate::integrators::Integrable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Ordinary least-squares line through `(x, y)`. Needs at least two distinct
/// abscissae.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// `H(q_k, p_k)` along a trajectory.
pub fn energy_series<Sys: Integrable + ?Sized>(sys: &Sys, states: &[Sys::State]) -> Vec<f64> {
    states.iter().map(|s| sys.energy(s)).collect()
}

/// Cumulative time average `(1/(k+1)) Σ_{j ≤ k} x_j`.
pub fn running_average(x: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    x.iter()
        .enumerate()
        .map(|(k, v)| {
            acc += v;
            acc / (k + 1) as f64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_recovered() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 0.5 * v).collect();
        let fit = linear_fit(&x, &y).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-14);
        assert!((fit.intercept - 3.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0, 1.0], &[0.0, 2.0]).is_none());
    }

    #[test]
    fn running_average_of_constant() {
        assert_eq!(running_average(&[2.0, 2.0, 2.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(running_average(&[1.0, 3.0]), vec![1.0, 2.0]);
    }
}
