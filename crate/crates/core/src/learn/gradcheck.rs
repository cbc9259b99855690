/// Central-difference step used by [`grad_check`].
pub const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter index with the largest relative error.
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Compares the gradient returned by `f` at `params` with central differences
/// of its value, one parameter at a time.
pub fn grad_check<F>(mut f: F, params: &[f64], tolerance: f64) -> GradCheckReport
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (_, analytic) = f(params);
    assert_eq!(analytic.len(), params.len(), "gradient length must match parameter count");
    let mut x = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic: analytic.first().copied().unwrap_or(0.0),
        numeric: 0.0,
        checked: params.len(),
        tolerance,
    };
    for i in 0..params.len() {
        x[i] = params[i] + FD_STEP;
        let plus = f(&x).0;
        x[i] = params[i] - FD_STEP;
        let minus = f(&x).0;
        x[i] = params[i];
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let rel = relative_error(analytic[i], numeric);
        if rel > report.max_rel_error || i == 0 {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst_index = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
    }
    report
}
