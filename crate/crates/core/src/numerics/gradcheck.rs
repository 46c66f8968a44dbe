use serde::Serialize;

use super::real::Real;
use super::{shape_err, NumericsError};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GradCheckConfig {
    pub eps: f64,
    pub tol: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self { eps: 1e-6, tol: 1e-5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error, if any were checked.
    pub worst: Option<usize>,
    pub checked: usize,
    /// Coordinates excluded by the caller (non-differentiable points).
    pub skipped: Vec<usize>,
    /// Coordinates whose stencil crossed into another smooth piece.
    pub crossed: Vec<usize>,
    pub passed: bool,
}

/// `|a − n| / max(1e-8, |a| + |n|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

/// Central-difference gradient of `f` at `params`.
pub fn numeric_gradient<F>(mut f: F, params: &[f64], eps: f64) -> Result<Vec<f64>, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut w = params.to_vec();
    (0..w.len())
        .map(|i| Ok(central_difference(&mut |w: &[f64]| (f(w), 0), &mut w, i, eps)?.expect("single piece")))
        .collect()
}

/// `(f(w+h) − f(w−h)) / step`, where `step` is the exact distance between
/// the two representable perturbed points. The difference is formed in
/// `T`, so a wider `T` suppresses cancellation. `None` when either point
/// lies outside the base point's piece.
fn central_difference<T, F>(f: &mut F, w: &mut [f64], i: usize, eps: f64) -> Result<Option<f64>, NumericsError>
where
    T: Real,
    F: FnMut(&[f64]) -> (T, u64),
{
    let orig = w[i];
    let (_, base_piece) = f(w);
    let mut eval = |x: f64| {
        w[i] = x;
        let (value, piece) = f(w);
        w[i] = orig;
        if value.is_finite() {
            Ok((value, piece))
        } else {
            Err(NumericsError::NonFinite {
                coordinate: i,
                value: value.to_f64(),
            })
        }
    };
    let (up, down) = (orig + eps, orig - eps);
    let (f_up, p_up) = eval(up)?;
    let (f_down, p_down) = eval(down)?;
    if p_up != base_piece || p_down != base_piece {
        return Ok(None);
    }
    let step = T::from_f64(up) - T::from_f64(down);
    Ok(Some(((f_up - f_down) / step).to_f64()))
}

/// Compares `analytic` against central differences of `f` coordinate by
/// coordinate. Coordinates listed in `skip` are not evaluated.
pub fn grad_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    skip: &[usize],
    cfg: GradCheckConfig,
) -> Result<GradCheckReport, NumericsError>
where
    F: FnMut(&[f64]) -> f64,
{
    grad_check_piecewise(|w| (f(w), 0), params, analytic, skip, cfg)
}

/// [`grad_check`] for piecewise-smooth `f` evaluated in any [`Real`]. `f`
/// also returns an id of the smooth piece containing its input (e.g. a
/// hash of ReLU activation signs); a coordinate whose perturbed points
/// leave the base point's piece straddles a kink and is reported in
/// `crossed` instead of being compared.
pub fn grad_check_piecewise<T, F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    skip: &[usize],
    cfg: GradCheckConfig,
) -> Result<GradCheckReport, NumericsError>
where
    T: Real,
    F: FnMut(&[f64]) -> (T, u64),
{
    if params.len() != analytic.len() {
        return Err(shape_err(
            "grad_check",
            format!("{} params, {} gradient entries", params.len(), analytic.len()),
        ));
    }
    let mut w = params.to_vec();
    let mut skipped: Vec<usize> = skip.iter().copied().filter(|&i| i < w.len()).collect();
    skipped.sort_unstable();
    skipped.dedup();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        skipped,
        crossed: Vec::new(),
        passed: true,
    };
    for (i, &a) in analytic.iter().enumerate() {
        if report.skipped.binary_search(&i).is_ok() {
            continue;
        }
        let Some(numeric) = central_difference(&mut f, &mut w, i, cfg.eps)? else {
            report.crossed.push(i);
            continue;
        };
        let err = relative_error(a, numeric);
        report.checked += 1;
        if err > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(err);
            report.worst = Some(i);
        }
    }
    report.passed = report.max_rel_error <= cfg.tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::real::DoubleDouble;

    #[test]
    fn square_at_three() {
        let r = grad_check(|w| w[0] * w[0], &[3.0], &[6.0], &[], GradCheckConfig::default()).unwrap();
        assert!(r.passed);
        assert!(r.max_rel_error < 1e-9, "{}", r.max_rel_error);
        assert_eq!(r.checked, 1);
    }

    #[test]
    fn wrong_gradient_fails() {
        let r = grad_check(|w| w[0] * w[0], &[3.0], &[5.0], &[], GradCheckConfig::default()).unwrap();
        assert!(!r.passed);
        assert_eq!(r.worst, Some(0));
    }

    #[test]
    fn relu_kink_is_skipped() {
        let relu = |w: &[f64]| w[0].max(0.0) + w[1].max(0.0);
        let r = grad_check(relu, &[0.0, 2.0], &[0.0, 1.0], &[0], GradCheckConfig::default()).unwrap();
        assert!(r.passed);
        assert_eq!(r.skipped, vec![0]);
        assert_eq!(r.checked, 1);
    }

    #[test]
    fn kink_crossing_is_detected() {
        let f = |w: &[f64]| (w[0].max(0.0), u64::from(w[0] > 0.0));
        let cfg = GradCheckConfig::default();
        let r = grad_check_piecewise(f, &[5e-7], &[1.0], &[], cfg).unwrap();
        assert_eq!(r.crossed, vec![0]);
        assert_eq!(r.checked, 0);
        let r = grad_check_piecewise(f, &[0.5], &[1.0], &[], cfg).unwrap();
        assert!(r.passed && r.crossed.is_empty());
    }

    #[test]
    fn wide_evaluation_resolves_weak_coordinates() {
        // f = 5 + 1e-9·w: in f64 the slope sits just above the round-off of
        // f; in double-double it is recovered almost exactly.
        let slope = 1e-9;
        let plain = numeric_gradient(|w| 5.0 + slope * w[0], &[0.3], 1e-6).unwrap()[0];
        let wide = |w: &[f64]| {
            let v = DoubleDouble::from_f64(5.0) + DoubleDouble::from_f64(slope) * DoubleDouble::from_f64(w[0]);
            (v, 0)
        };
        let r = grad_check_piecewise(wide, &[0.3], &[slope], &[], GradCheckConfig::default()).unwrap();
        assert!(relative_error(slope, plain) > 1e-5, "{plain:e}");
        assert!(r.max_rel_error < 1e-12, "{}", r.max_rel_error);
    }

    #[test]
    fn non_finite_names_coordinate() {
        // ln is finite at 1e-7 but not at 1e-7 − eps.
        let err = grad_check(
            |w| w[0] + w[1].ln(),
            &[1.0, 1e-7],
            &[1.0, 1e7],
            &[],
            GradCheckConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, NumericsError::NonFinite { coordinate: 1, .. }));
    }

    #[test]
    fn both_zero_is_exact() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
    }
}
