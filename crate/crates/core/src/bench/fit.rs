use super::BenchError;

/// `time(N) = (N / a)^b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub a: f64,
    pub b: f64,
}

impl PowerLawFit {
    pub fn predict(&self, n: f64) -> f64 {
        (n / self.a).powf(self.b)
    }
}

/// `y(x) = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept: f64,
    pub slope: f64,
}

impl LinearFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

fn least_squares(points: impl Iterator<Item = (f64, f64)> + Clone) -> Result<LinearFit, BenchError> {
    let n = points.clone().count();
    if n < 2 {
        return Err(BenchError::TooFewPoints(n));
    }
    let nf = n as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (sx / nf, sy / nf);
    let (sxx, sxy) = points.fold((0.0, 0.0), |(sxx, sxy), (x, y)| {
        (sxx + (x - mx) * (x - mx), sxy + (x - mx) * (y - my))
    });
    if sxx == 0.0 {
        return Err(BenchError::DegenerateInput("all x values are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(LinearFit {
        intercept: my - slope * mx,
        slope,
    })
}

fn check_finite(points: &[(f64, f64)]) -> Result<(), BenchError> {
    match points.iter().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
        Some(&(x, y)) => Err(BenchError::InvalidPoint { x, y }),
        None => Ok(()),
    }
}

/// Ordinary least squares.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<LinearFit, BenchError> {
    check_finite(points)?;
    least_squares(points.iter().copied())
}

/// Least squares on `(ln N, ln time)`: the slope is the exponent and the
/// scale follows from the means.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<PowerLawFit, BenchError> {
    check_finite(points)?;
    if let Some(&(x, y)) = points.iter().find(|(n, t)| *n <= 0.0 || *t <= 0.0) {
        return Err(BenchError::InvalidPoint { x, y });
    }
    let logs = points.iter().map(|(n, t)| (n.ln(), t.ln()));
    let line = least_squares(logs.clone())?;
    let b = line.slope;
    if b == 0.0 {
        return Err(BenchError::DegenerateInput("times do not vary with size".into()));
    }
    let k = points.len() as f64;
    let mean_ln_n = logs.clone().map(|p| p.0).sum::<f64>() / k;
    let mean_ln_t = logs.map(|p| p.1).sum::<f64>() / k;
    Ok(PowerLawFit {
        a: (mean_ln_n - mean_ln_t / b).exp(),
        b,
    })
}

/// Server memory as a function of pooled accounts, in MB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServerMemoryModel {
    pub base: f64,
    /// Per account available in the pool.
    pub per_available: f64,
    /// Per account hosting a session.
    pub per_used: f64,
}

impl Default for ServerMemoryModel {
    fn default() -> Self {
        Self {
            base: 151.0,
            per_available: 5.8,
            per_used: 17.0,
        }
    }
}

pub fn estimate_server_memory(model: &ServerMemoryModel, available: u32, used: u32) -> f64 {
    model.base + model.per_available * f64::from(available) + model.per_used * f64::from(used)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn memory_model_substitution() {
        let m = ServerMemoryModel::default();
        assert_eq!(estimate_server_memory(&m, 0, 0), 151.0);
        assert_eq!(estimate_server_memory(&m, 2, 0), 162.6);
        assert_eq!(estimate_server_memory(&m, 0, 6), 253.0);
    }

    #[test]
    fn two_points_interpolate() {
        let fit = fit_power_law(&[(2.0, 8.0), (4.0, 64.0)]).unwrap();
        assert!((fit.b - 3.0).abs() < 1e-12);
        assert!((fit.a - 1.0).abs() < 1e-12);
        let line = fit_linear(&[(1.0, 3.0), (3.0, 7.0)]).unwrap();
        assert!((line.slope - 2.0).abs() < 1e-12 && (line.intercept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_linear(&[(1.0, 2.0), (1.0, 3.0)]),
            Err(BenchError::DegenerateInput(_))
        ));
        assert!(matches!(
            fit_power_law(&[(5.0, 2.0), (5.0, 3.0)]),
            Err(BenchError::DegenerateInput(_))
        ));
        assert_eq!(fit_linear(&[(1.0, 2.0)]), Err(BenchError::TooFewPoints(1)));
        assert!(matches!(
            fit_power_law(&[(0.0, 1.0), (2.0, 2.0)]),
            Err(BenchError::InvalidPoint { .. })
        ));
        assert!(matches!(
            fit_power_law(&[(1.0, 1.0), (2.0, 1.0)]),
            Err(BenchError::DegenerateInput(_))
        ));
    }

    #[test]
    fn noiseless_power_law_recovers_generator() {
        let pts: Vec<_> = (30..=50)
            .step_by(5)
            .map(|n| (f64::from(n), (f64::from(n) / 24.7).powf(6.3)))
            .collect();
        let fit = fit_power_law(&pts).unwrap();
        assert!((fit.a - 24.7).abs() < 1e-9, "{fit:?}");
        assert!((fit.b - 6.3).abs() < 1e-9, "{fit:?}");
    }

    proptest! {
        #[test]
        fn collinear_points_recover_line(
            intercept in -100.0f64..100.0,
            slope in -10.0f64..10.0,
            xs in proptest::collection::btree_set(-1000i32..1000, 2..20),
        ) {
            let pts: Vec<_> = xs.iter().map(|&x| (f64::from(x), intercept + slope * f64::from(x))).collect();
            let fit = fit_linear(&pts).unwrap();
            prop_assert!((fit.slope - slope).abs() < 1e-9);
            prop_assert!((fit.intercept - intercept).abs() < 1e-7);
        }
    }
}
