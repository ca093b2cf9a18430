//! First- and second-moment dynamics of linear networks under vacuum inputs
//! plus optional classical drives.
//!
//! Means follow `d⟨x⟩/dt = Ā⟨x⟩ + B̄ ū(t)` in doubled coordinates
//! `x = [a; a^#]`, `ū = [u; u^#]`. Vacuum inputs have zero mean, so only
//! classical drives enter the mean equation.
//!
//! Second moments use the symmetrised ordering `Σ = ½⟨{Δx, Δx†}⟩`. The vacuum
//! Itô table then contributes `½ B̄ B̄†`, giving
//! `dΣ/dt = ĀΣ + ΣĀ† + ½B̄B̄†`. A single damped cavity relaxes to `Σ = ½`
//! in the `⟨a a*⟩` sector under this convention.

mod analysis;
mod drive;
mod trajectory;

pub use analysis::{analyze, analyze_matrix, fit_decay, AnalysisReport, DecayFit, DF_TOLERANCE, HURWITZ_TOLERANCE};
pub use drive::{Drive, DriveProfile};
pub use trajectory::{Coordinate, Trajectory};

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, expm, max_abs, re, solve_lyapunov, CMatrix, CVector};
use crate::model::StateSpace;

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_HORIZON: f64 = 10.0;

/// Doubled mean vector `[a; a^#]` from mode means.
pub fn doubled_means(modes: &[Complex64]) -> CVector {
    let m = modes.len();
    CVector::from_fn(2 * m, |i, _| if i < m { modes[i] } else { modes[i - m].conj() })
}

/// Symmetrised vacuum covariance `½ I` on `2m` doubled coordinates.
pub fn vacuum_covariance(num_modes: usize) -> CMatrix {
    CMatrix::identity(2 * num_modes, 2 * num_modes) * re(0.5)
}

/// Noise loading `Q = ½ B̄ B̄†` for vacuum inputs.
pub fn vacuum_noise(ss: &StateSpace) -> CMatrix {
    let dbl = ss.to_doubled();
    &dbl.bbar * dbl.bbar.adjoint() * re(0.5)
}

/// Number of steps for a grid; the horizon must be a multiple of the step.
pub fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidStep(format!("step must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon >= dt) {
        return Err(Error::InvalidStep(format!("horizon {horizon} must be at least one step ({dt})")));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::InvalidStep(format!("horizon {horizon} is not a multiple of step {dt}")));
    }
    Ok(n as usize)
}

/// Increment of one classical fourth-order step of `dx/dt = f(t, x)`.
fn rk4_increment<F>(f: &F, t: f64, x: &CVector, h: f64) -> CVector
where
    F: Fn(f64, &CVector) -> CVector,
{
    let hh = re(0.5 * h);
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * hh));
    let k3 = f(t + 0.5 * h, &(x + &k2 * hh));
    let k4 = f(t + h, &(x + &k3 * re(h)));
    (k1 + (k2 + k3) * re(2.0) + k4) * re(h / 6.0)
}

fn rk4_step_matrix<F>(f: &F, x: &CMatrix, h: f64) -> CMatrix
where
    F: Fn(&CMatrix) -> CMatrix,
{
    let hh = re(0.5 * h);
    let k1 = f(x);
    let k2 = f(&(x + &k1 * hh));
    let k3 = f(&(x + &k2 * hh));
    let k4 = f(&(x + &k3 * re(h)));
    x + (k1 + (k2 + k3) * re(2.0) + k4) * re(h / 6.0)
}

/// Fixed-step integration of `dx/dt = drift·x + input·u(t)` where `u` is
/// built from `drives` (each drive adds to one entry of `u`).
///
/// This is the undoubled core used both for doubled quantum means and for
/// classical plants.
pub fn integrate_linear(
    drift: &CMatrix,
    input: &CMatrix,
    x0: &CVector,
    drives: &[Drive],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let steps = grid_steps(horizon, dt)?;
    let dim = drift.nrows();
    if drift.ncols() != dim || x0.len() != dim || input.nrows() != dim {
        return Err(Error::Dimension(format!(
            "drift {:?}, input {:?}, initial state {}",
            drift.shape(),
            input.shape(),
            x0.len()
        )));
    }
    for d in drives {
        d.validate(horizon, input.ncols())?;
    }
    let forcing = |t: f64| -> Option<CVector> {
        if drives.is_empty() {
            return None;
        }
        let mut u = CVector::zeros(input.ncols());
        for d in drives {
            u[d.channel] += d.value(t);
        }
        Some(input * u)
    };
    let f = |t: f64, x: &CVector| -> CVector {
        let dx = drift * x;
        match forcing(t) {
            Some(g) => dx + g,
            None => dx,
        }
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut means = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    // compensated accumulation keeps round-off from swamping the O(dt⁴)
    // truncation error over long grids
    let mut carry = CVector::zeros(dim);
    times.push(0.0);
    means.push(x.clone());
    for k in 0..steps {
        let t = k as f64 * dt;
        let y = rk4_increment(&f, t, &x, dt) - &carry;
        let sum = &x + &y;
        carry = (&sum - &x) - y;
        x = sum;
        times.push((k + 1) as f64 * dt);
        means.push(x.clone());
    }
    Ok(Trajectory { dt, times, means, covariances: None, metadata: BTreeMap::new() })
}

/// Expand drives on external channels of a model with `n` inputs into drives
/// on the doubled input vector `[u; u^#]`.
fn doubled_drives(drives: &[Drive], n: usize, horizon: f64) -> Result<Vec<Drive>> {
    let mut out = Vec::with_capacity(2 * drives.len());
    for d in drives {
        d.validate(horizon, n)?;
        out.push(d.clone());
        let conj_profile = match &d.profile {
            DriveProfile::Constant { amplitude } => DriveProfile::Constant { amplitude: amplitude.conj() },
            DriveProfile::Sinusoid { amplitude, frequency } => {
                DriveProfile::Sinusoid { amplitude: amplitude.conj(), frequency: *frequency }
            }
            DriveProfile::Pulse { amplitude, start, stop } => {
                DriveProfile::Pulse { amplitude: amplitude.conj(), start: *start, stop: *stop }
            }
            DriveProfile::Samples { dt, values } => {
                DriveProfile::Samples { dt: *dt, values: values.iter().map(|z| z.conj()).collect() }
            }
        };
        out.push(Drive::new(d.channel + n, conj_profile));
    }
    Ok(out)
}

fn check_doubled_means(x0: &CVector, m: usize) -> Result<()> {
    if x0.len() != 2 * m {
        return Err(Error::InvalidInitial(format!("expected {} doubled means, got {}", 2 * m, x0.len())));
    }
    let defect = (0..m).map(|i| (x0[m + i] - x0[i].conj()).norm()).fold(0.0, f64::max);
    let scale = x0.iter().fold(1.0, |acc: f64, z| acc.max(z.norm()));
    if defect > 1e-12 * scale {
        return Err(Error::InvalidInitial(format!(
            "initial means are not conjugation-consistent (defect {defect:.3e})"
        )));
    }
    Ok(())
}

fn check_covariance(cov: &CMatrix, m: usize) -> Result<()> {
    if cov.shape() != (2 * m, 2 * m) {
        return Err(Error::InvalidInitial(format!(
            "covariance must be {0}×{0}, got {1:?}",
            2 * m,
            cov.shape()
        )));
    }
    let dev = max_abs(&(cov - cov.adjoint()));
    if dev > 1e-9 {
        return Err(Error::InvalidInitial(format!("covariance is not Hermitian (deviation {dev:.3e})")));
    }
    Ok(())
}

/// Mean dynamics of `ss` from doubled initial means `x0`.
pub fn integrate_means(
    ss: &StateSpace,
    x0: &CVector,
    drives: &[Drive],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    check_doubled_means(x0, ss.num_modes())?;
    let dbl = ss.to_doubled();
    let drives = doubled_drives(drives, ss.num_channels(), horizon)?;
    integrate_linear(&dbl.abar, &dbl.bbar, x0, &drives, horizon, dt)
}

/// Means and symmetrised covariances together.
pub fn integrate_moments(
    ss: &StateSpace,
    x0: &CVector,
    cov0: &CMatrix,
    drives: &[Drive],
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    let m = ss.num_modes();
    check_covariance(cov0, m)?;
    let mut traj = integrate_means(ss, x0, drives, horizon, dt)?;
    let dbl = ss.to_doubled();
    let q = vacuum_noise(ss);
    let a = &dbl.abar;
    let a_adj = a.adjoint();
    let f = |s: &CMatrix| -> CMatrix { a * s + s * &a_adj + &q };
    let mut covs = Vec::with_capacity(traj.len());
    let mut s = cov0.clone();
    covs.push(s.clone());
    for _ in 1..traj.len() {
        s = rk4_step_matrix(&f, &s, dt);
        covs.push(s.clone());
    }
    traj.covariances = Some(covs);
    Ok(traj)
}

/// Covariance evolution from `cov0` with vacuum inputs (means stay at zero).
pub fn integrate_covariance(ss: &StateSpace, cov0: &CMatrix, horizon: f64, dt: f64) -> Result<Trajectory> {
    let x0 = CVector::zeros(2 * ss.num_modes());
    integrate_moments(ss, &x0, cov0, &[], horizon, dt)
}

/// Solve `ĀΣ + ΣĀ† + ½B̄B̄† = 0`.
pub fn steady_state_covariance(ss: &StateSpace) -> Result<CMatrix> {
    let dbl = ss.to_doubled();
    let margin = eigenvalues(&dbl.abar).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if margin.is_nan() || margin >= -HURWITZ_TOLERANCE {
        return Err(Error::NotHurwitz { margin });
    }
    solve_lyapunov(&dbl.abar, &vacuum_noise(ss))
}

/// `e^{Ā t}` for the doubled drift of `ss`.
pub fn propagate_exact(ss: &StateSpace, t: f64) -> Result<CMatrix> {
    propagate_matrix(&ss.to_doubled().abar, t)
}

pub fn propagate_matrix(a: &CMatrix, t: f64) -> Result<CMatrix> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidStep(format!("propagation time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(CMatrix::identity(a.nrows(), a.ncols()));
    }
    Ok(expm(&(a * re(t))))
}

/// Closed-form means `e^{Āt} x0` on the trajectory grid (undriven only).
pub fn exact_means(ss: &StateSpace, x0: &CVector, times: &[f64]) -> Result<Vec<CVector>> {
    let a = ss.to_doubled().abar;
    times.iter().map(|&t| propagate_matrix(&a, t).map(|p| p * x0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, ZERO};
    use crate::model::{derive_state_space, make_mode, Coupling};

    fn cavity(omega: f64, gamma: f64) -> StateSpace {
        derive_state_space(&make_mode(omega, &[Coupling::annihilation(gamma)]).unwrap())
    }

    #[test]
    fn undriven_cavity_matches_exponential() {
        let ss = cavity(1.0, 0.5);
        let x0 = doubled_means(&[c(1.0, 0.0)]);
        let traj = integrate_means(&ss, &x0, &[], 1.0, 1e-3).unwrap();
        let got = traj.means.last().unwrap()[0];
        let want = c(-0.25, -1.0).exp();
        assert!(((got - want) / want).norm() < 1e-8);
        assert_eq!(traj.len(), 1001);
    }

    #[test]
    fn constant_drive_settles_to_fixed_point() {
        let ss = cavity(1.0, 0.5);
        let u = c(0.3, -0.2);
        let drive = Drive::new(0, DriveProfile::Constant { amplitude: u });
        let traj = integrate_means(&ss, &doubled_means(&[ZERO]), &[drive], 60.0, 1e-2).unwrap();
        // −A⁻¹Bu
        let want = -ss.b_minus[(0, 0)] * u / ss.a_minus[(0, 0)];
        let got = traj.means.last().unwrap()[0];
        assert!((got - want).norm() < 1e-6, "{got} vs {want}");
    }

    #[test]
    fn grid_validation() {
        assert!(grid_steps(1.0, 0.0).is_err());
        assert!(grid_steps(1.0, -1e-3).is_err());
        assert!(grid_steps(1e-4, 1e-3).is_err());
        assert!(grid_steps(1.0, 0.3).is_err());
        assert_eq!(grid_steps(10.0, 1e-3).unwrap(), 10_000);
    }

    #[test]
    fn initial_means_must_be_consistent() {
        let ss = cavity(1.0, 0.5);
        let bad = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(matches!(integrate_means(&ss, &bad, &[], 1.0, 0.1), Err(Error::InvalidInitial(_))));
        let short = CVector::from_vec(vec![c(1.0, 0.0)]);
        assert!(integrate_means(&ss, &short, &[], 1.0, 0.1).is_err());
    }

    #[test]
    fn propagator_cases() {
        let ss = cavity(1.0, 0.5);
        let p0 = propagate_exact(&ss, 0.0).unwrap();
        assert_eq!(p0, CMatrix::identity(2, 2));
        let p = propagate_exact(&ss, 2.0).unwrap();
        assert!((p[(0, 0)] - c(-0.5, -2.0).exp()).norm() < 1e-14);
        assert!(propagate_exact(&ss, -1.0).is_err());
    }

    #[test]
    fn cavity_steady_state_is_half() {
        let ss = cavity(1.0, 0.5);
        let s = steady_state_covariance(&ss).unwrap();
        assert!((s[(0, 0)] - re(0.5)).norm() < 1e-14);
        assert!((s[(1, 1)] - re(0.5)).norm() < 1e-14);
        assert!(s[(0, 1)].norm() < 1e-14);
    }

    #[test]
    fn covariance_relaxes_to_steady_state() {
        let ss = cavity(1.0, 0.5);
        let mut start = vacuum_covariance(1);
        start[(0, 0)] = re(2.0);
        start[(1, 1)] = re(2.0);
        start[(0, 1)] = c(0.3, 0.1);
        start[(1, 0)] = c(0.3, -0.1);
        let traj = integrate_covariance(&ss, &start, 80.0, 1e-2).unwrap();
        let last = traj.covariances.as_ref().unwrap().last().unwrap();
        let steady = steady_state_covariance(&ss).unwrap();
        assert!(max_abs(&(last - steady)) < 1e-8);
        assert!(traj.hermiticity_defect() <= 1e-9);
    }

    #[test]
    fn closed_system_covariance_is_conjugated_initial() {
        let omega = CMatrix::from_row_slice(2, 2, &[re(1.0), c(0.2, 0.1), c(0.2, -0.1), re(-0.5)]);
        let spec = crate::model::OscillatorSpec::new(omega, CMatrix::zeros(0, 2), CMatrix::zeros(0, 2)).unwrap();
        let ss = derive_state_space(&spec);
        let mut s0 = vacuum_covariance(2);
        s0[(0, 1)] = c(0.1, 0.05);
        s0[(1, 0)] = c(0.1, -0.05);
        let traj = integrate_covariance(&ss, &s0, 2.0, 1e-3).unwrap();
        let p = propagate_exact(&ss, 2.0).unwrap();
        let want = &p * &s0 * p.adjoint();
        assert!(max_abs(&(traj.covariances.unwrap().last().unwrap() - want)) < 1e-10);
    }

    #[test]
    fn lyapunov_refuses_marginal_system() {
        let spec = make_mode(1.0, &[]).unwrap();
        assert!(matches!(
            steady_state_covariance(&derive_state_space(&spec)),
            Err(Error::NotHurwitz { .. })
        ));
    }
}
