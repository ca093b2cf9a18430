use num_complex::Complex64;
use serde::Serialize;

use crate::linalg::{eigenvalues, left_null_space, CMatrix, CVector};
use crate::model::StateSpace;

use super::Trajectory;

/// Real parts at or above `−HURWITZ_TOLERANCE` count as non-decaying.
pub const HURWITZ_TOLERANCE: f64 = 1e-9;
/// Threshold for both `|Re λ|` and `‖v†B̄‖` when detecting noise-free modes.
pub const DF_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    /// Decay rate `r` in `|x(t)| ≈ c·e^{−r t}`.
    pub rate: f64,
    /// RMS residual of the log-linear fit.
    pub residual: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub eigenvalues: Vec<Complex64>,
    /// Largest real part over `eigenvalues`.
    pub margin: f64,
    pub is_hurwitz: bool,
    /// Left eigenvectors `v` with `|Re λ| < DF_TOLERANCE` and `‖v†B̄‖ <
    /// DF_TOLERANCE`, in doubled coordinates.
    pub decoherence_free: Vec<Vec<Complex64>>,
    pub decay: Option<DecayFit>,
}

impl AnalysisReport {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Log-linear least squares of `ln|x|` against `t` over the final half of
/// the samples, skipping magnitudes below `1e-12`.
pub fn fit_decay(times: &[f64], values: &[Complex64]) -> Option<DecayFit> {
    let n = times.len().min(values.len());
    let start = n / 2;
    let pts: Vec<(f64, f64)> = (start..n)
        .filter(|&k| values[k].norm() >= 1e-12)
        .map(|k| (times[k], values[k].norm().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let len = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / len;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / len;
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let slope = sxy / sxx;
    let icpt = ym - slope * tm;
    let rss: f64 = pts.iter().map(|p| (p.1 - icpt - slope * p.0).powi(2)).sum();
    Some(DecayFit { rate: -slope, residual: (rss / len).sqrt(), samples: pts.len() })
}

/// Fix the global phase so the largest-modulus entry is real and positive.
fn canonical_phase(v: &CVector) -> Vec<Complex64> {
    let pivot = v
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (i, z)| if z.norm() > best.1 + 1e-12 { (i, z.norm()) } else { best });
    let z = v[pivot.0];
    let phase = if z.norm() > 0.0 { z.conj() / z.norm() } else { Complex64::new(1.0, 0.0) };
    v.iter().map(|x| x * phase).collect()
}

/// Spectral report for a drift `a` with noise input matrix `b`.
pub fn analyze_matrix(
    a: &CMatrix,
    b: &CMatrix,
    selector: Option<&CVector>,
    trajectory: Option<&Trajectory>,
) -> AnalysisReport {
    let ev = eigenvalues(a);
    let margin = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let is_hurwitz = !ev.is_empty() && margin < -HURWITZ_TOLERANCE;

    let mut marginal: Vec<Complex64> = Vec::new();
    for z in ev.iter().filter(|z| z.re.abs() < DF_TOLERANCE) {
        if !marginal.iter().any(|w| (w - z).norm() < 1e-8 * (1.0 + z.norm())) {
            marginal.push(*z);
        }
    }
    let dim = a.nrows();
    let mut decoherence_free = Vec::new();
    for lambda in marginal {
        let mut stacked = CMatrix::zeros(dim, dim + b.ncols());
        stacked
            .view_mut((0, 0), (dim, dim))
            .copy_from(&(a - CMatrix::identity(dim, dim) * lambda));
        stacked.view_mut((0, dim), b.shape()).copy_from(b);
        for v in left_null_space(&stacked, DF_TOLERANCE) {
            decoherence_free.push(canonical_phase(&v));
        }
    }

    let decay = match (selector, trajectory) {
        (Some(sel), Some(traj)) => fit_decay(&traj.times, &traj.coordinate(sel)),
        _ => None,
    };

    AnalysisReport {
        eigenvalues: ev,
        margin: if margin.is_finite() { margin } else { 0.0 },
        is_hurwitz,
        decoherence_free,
        decay,
    }
}

/// Eigen-analysis of the doubled drift of `ss`, plus an exponential fit of
/// `selector·⟨x⟩` when a trajectory is supplied.
pub fn analyze(ss: &StateSpace, selector: Option<&CVector>, trajectory: Option<&Trajectory>) -> AnalysisReport {
    let dbl = ss.to_doubled();
    analyze_matrix(&dbl.abar, &dbl.bbar, selector, trajectory)
}
