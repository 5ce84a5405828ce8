/// One coordinate whose analytic and numeric gradients disagree.
#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Below this magnitude errors are measured absolutely rather than relatively.
const MAGNITUDE_FLOOR: f64 = 1e-5;

/// Compares `analytic` against central finite differences of `loss` around
/// `params`, coordinate by coordinate.
///
/// Relative error is `|a − n| / max(|a|, |n|, 1e-5)`; coordinates above
/// `tolerance` are reported as failures.
pub fn gradient_check<F>(
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    step: f64,
    tolerance: f64,
) -> GradCheckReport
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "gradient and parameter counts differ"
    );
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        checked: params.len(),
        max_rel_error: 0.0,
        worst_index: None,
        failures: Vec::new(),
    };
    for i in 0..params.len() {
        probe[i] = params[i] + step;
        let up = loss(&probe);
        probe[i] = params[i] - step;
        let down = loss(&probe);
        probe[i] = params[i];
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[i];
        let rel_error = (a - numeric).abs() / a.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR);
        if rel_error > report.max_rel_error || rel_error.is_nan() {
            report.max_rel_error = rel_error;
            report.worst_index = Some(i);
        }
        if !(rel_error <= tolerance) {
            report.failures.push(GradMismatch {
                index: i,
                analytic: a,
                numeric,
                rel_error,
            });
        }
    }
    report
}
