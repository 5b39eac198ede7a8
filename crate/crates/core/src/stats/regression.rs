use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionPoint {
    pub hdi: f64,
    pub pavedness: f64,
    /// Total road length, used only when weighting is switched on.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionResult {
    pub pearson_r: f64,
    pub r_squared: f64,
    pub slope: f64,
    pub intercept: f64,
    pub n: usize,
}

/// Least-squares line of pavedness on HDI. Unweighted unless `weighted`.
///
/// `r_squared` is computed from the residuals, independently of
/// `pearson_r`.
///
/// ```
/// use surface_forge::stats::{hdi_regression, RegressionPoint};
/// let pts: Vec<_> = (0..5).map(|i| RegressionPoint { hdi: i as f64, pavedness: 2.0 * i as f64 + 1.0, weight: 1.0 }).collect();
/// let r = hdi_regression(&pts, false).unwrap();
/// assert!((r.pearson_r - 1.0).abs() < 1e-12 && (r.slope - 2.0).abs() < 1e-12);
/// ```
pub fn hdi_regression(points: &[RegressionPoint], weighted: bool) -> Result<RegressionResult, StatsError> {
    if points.len() < 2 {
        return Err(StatsError::Degenerate(format!("need at least 2 points, got {}", points.len())));
    }
    let w = |p: &RegressionPoint| if weighted { p.weight } else { 1.0 };
    if points.iter().any(|p| !(w(p) > 0.0) || !p.hdi.is_finite() || !p.pavedness.is_finite()) {
        return Err(StatsError::Degenerate("weights must be positive and values finite".into()));
    }
    let sw: f64 = points.iter().map(w).sum();
    let mx = points.iter().map(|p| w(p) * p.hdi).sum::<f64>() / sw;
    let my = points.iter().map(|p| w(p) * p.pavedness).sum::<f64>() / sw;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p.hdi - mx, p.pavedness - my);
        sxx += w(p) * dx * dx;
        syy += w(p) * dy * dy;
        sxy += w(p) * dx * dy;
    }
    if sxx <= 0.0 {
        return Err(StatsError::Degenerate("HDI has zero variance".into()));
    }
    if syy <= 0.0 {
        return Err(StatsError::Degenerate("pavedness has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points
        .iter()
        .map(|p| {
            let e = p.pavedness - (intercept + slope * p.hdi);
            w(p) * e * e
        })
        .sum();
    Ok(RegressionResult {
        pearson_r: (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        r_squared: (1.0 - ss_res / syy).clamp(0.0, 1.0),
        slope,
        intercept,
        n: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(x: f64, y: f64) -> RegressionPoint {
        RegressionPoint { hdi: x, pavedness: y, weight: 1.0 }
    }

    #[test]
    fn lines_and_degenerate() {
        let r = hdi_regression(&[pt(0.0, 1.0), pt(1.0, 0.0), pt(2.0, -1.0)], false).unwrap();
        assert!((r.pearson_r + 1.0).abs() < 1e-12 && (r.r_squared - 1.0).abs() < 1e-12);
        assert!(hdi_regression(&[pt(0.5, 1.0)], false).is_err());
        let e = hdi_regression(&[pt(0.5, 1.0), pt(0.5, 2.0)], false).unwrap_err();
        assert!(e.to_string().contains("HDI"));
        assert!(hdi_regression(&[pt(0.1, 1.0), pt(0.5, 1.0)], false).unwrap_err().to_string().contains("pavedness"));
    }

    #[test]
    fn weighting_is_a_switch() {
        let mut pts = vec![pt(0.0, 0.0), pt(1.0, 1.0), pt(2.0, 0.0)];
        pts[2].weight = 100.0;
        let u = hdi_regression(&pts, false).unwrap();
        let w = hdi_regression(&pts, true).unwrap();
        assert_ne!(u.slope, w.slope);
    }

    proptest! {
        #[test]
        fn r_squared_is_r_squared(xs in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.1f64..10.0), 3..60), weighted in any::<bool>()) {
            let pts: Vec<_> = xs.iter().map(|&(x, y, w)| RegressionPoint { hdi: x, pavedness: y, weight: w }).collect();
            if let Ok(r) = hdi_regression(&pts, weighted) {
                prop_assert!((r.r_squared - r.pearson_r * r.pearson_r).abs() < 1e-9);
            }
        }
    }
}
