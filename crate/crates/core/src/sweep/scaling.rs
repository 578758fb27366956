use super::{RowStatus, SweepRow};
use crate::error::{Error, Result};

/// Couplings at or below this magnitude are treated as numerically zero and
/// left out of the fit.
pub const MAGNITUDE_FLOOR: f64 = 1e-15;

const MIN_POINTS: usize = 4;

/// `ln|J| = slope·ln γ + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square deviation of `ln|J|` from the line.
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingReport {
    pub window: (f64, f64),
    pub xx: PowerLawFit,
    pub yy: PowerLawFit,
    pub zz: PowerLawFit,
}

fn fit(points: &[(f64, f64)]) -> PowerLawFit {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = points.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
    PowerLawFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: points.len(),
    }
}

/// Log-log least-squares slopes of `|J_xx|`, `|J_yy|`, `|J_zz|` against the
/// sweep value over `ok` rows with `lo ≤ γ ≤ hi`.
pub fn scaling_report(rows: &[SweepRow], window: (f64, f64)) -> Result<ScalingReport> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InsufficientPoints(format!(
            "window ({lo}, {hi}) must satisfy 0 < lo < hi"
        )));
    }
    let selected: Vec<(f64, [f64; 3])> = rows
        .iter()
        .filter(|r| r.status == RowStatus::Ok && (lo..=hi).contains(&r.sweep_value))
        .filter_map(|r| r.diagonal_couplings().map(|j| (r.sweep_value, j)))
        .collect();
    let one = |c: usize, name: &str| -> Result<PowerLawFit> {
        let pts: Vec<(f64, f64)> = selected
            .iter()
            .filter(|(_, j)| j[c].abs() > MAGNITUDE_FLOOR)
            .map(|(g, j)| (g.ln(), j[c].abs().ln()))
            .collect();
        let distinct = pts.windows(2).filter(|w| w[0].0 != w[1].0).count() + usize::from(!pts.is_empty());
        if pts.len() < MIN_POINTS || distinct < 2 {
            return Err(Error::InsufficientPoints(format!(
                "{name}: {} usable rows in [{lo}, {hi}], need {MIN_POINTS}",
                pts.len()
            )));
        }
        Ok(fit(&pts))
    };
    Ok(ScalingReport {
        window,
        xx: one(0, "J_xx")?,
        yy: one(1, "J_yy")?,
        zz: one(2, "J_zz")?,
    })
}
