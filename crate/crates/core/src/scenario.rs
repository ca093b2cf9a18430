//! Ready-made networks with their initial states and readout coordinates.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dsl::{self, CompiledNetwork};
use crate::dynamics::{
    analyze, analyze_matrix, doubled_means, integrate_linear, integrate_means, integrate_moments, vacuum_covariance,
    AnalysisReport, Coordinate, Drive, Trajectory,
};
use crate::error::{Error, Result};
use crate::linalg::{c, re, CMatrix, CVector, ONE, ZERO};
use crate::model::StateSpace;
use crate::observer::{
    build_quantum_observer, classical_joint_input, classical_luenberger, one_way_cascade, two_way_cascade,
    ClassicalPlant, ObserverSystem,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioKind {
    Classical,
    OneWay,
    TwoWay,
    Observer,
    ObserverVerified,
    File(PathBuf),
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "classical" => ScenarioKind::Classical,
            "oneway" => ScenarioKind::OneWay,
            "twoway" => ScenarioKind::TwoWay,
            "observer" => ScenarioKind::Observer,
            "observer-verified" => ScenarioKind::ObserverVerified,
            _ => match s.strip_prefix("file:") {
                Some(p) if !p.is_empty() => ScenarioKind::File(PathBuf::from(p)),
                _ => {
                    return Err(Error::InvalidSpec(format!(
                        "unknown scenario '{s}' (expected classical, oneway, twoway, observer, observer-verified or file:<path>)"
                    )))
                }
            },
        })
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Classical => f.write_str("classical"),
            ScenarioKind::OneWay => f.write_str("oneway"),
            ScenarioKind::TwoWay => f.write_str("twoway"),
            ScenarioKind::Observer => f.write_str("observer"),
            ScenarioKind::ObserverVerified => f.write_str("observer-verified"),
            ScenarioKind::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams {
    pub omega: f64,
    pub gamma: f64,
    pub gamma_l: f64,
    /// Classical observer gain.
    pub gain: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self { omega: 1.0, gamma: 0.5, gamma_l: 2.0, gain: 1.0 }
    }
}

impl ScenarioParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidSpec(format!("{what} = {v} is out of range")));
        if !self.omega.is_finite() {
            return bad("omega", self.omega);
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", self.gamma);
        }
        if !(self.gamma_l >= 0.0 && self.gamma_l.is_finite()) {
            return bad("gamma_l", self.gamma_l);
        }
        if !self.gain.is_finite() {
            return bad("gain", self.gain);
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum ScenarioModel {
    Quantum(StateSpace),
    /// Joint classical plant/observer system `[x; x̃]`.
    Classical { drift: CMatrix, input: CMatrix },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub params: ScenarioParams,
    pub model: ScenarioModel,
    /// Initial means (doubled for quantum models).
    pub x0: CVector,
    pub coordinates: Vec<Coordinate>,
    /// Coordinate whose magnitude is fitted for a decay rate.
    pub fit: Option<String>,
    pub input_names: Vec<String>,
    /// External input that `--drive` acts on.
    pub drive_channel: usize,
    /// Drives declared in a scenario file.
    pub file_drives: Vec<Drive>,
    pub observer: Option<ObserverSystem>,
    pub compiled: Option<CompiledNetwork>,
}

fn doubled_selector(weights: &[f64]) -> CVector {
    let m = weights.len();
    CVector::from_fn(2 * m, |i, _| if i < m { re(weights[i]) } else { ZERO })
}

impl Scenario {
    pub fn build(kind: ScenarioKind, params: ScenarioParams) -> Result<Self> {
        params.validate()?;
        let ScenarioParams { omega, gamma, gamma_l, gain } = params;
        let quantum_x0 = doubled_means(&[ONE, ZERO]);
        let from_observer = |sys: ObserverSystem, coords: Vec<Coordinate>, fit: &str| -> Self {
            let ss = sys.joint.clone().expect("quantum observer");
            let net = sys.network.as_ref().expect("quantum observer");
            Self {
                kind: kind.clone(),
                params,
                model: ScenarioModel::Quantum(ss),
                x0: quantum_x0.clone(),
                coordinates: coords,
                fit: Some(fit.into()),
                input_names: net.input_labels(),
                drive_channel: sys.disturbance_input.unwrap_or(0),
                file_drives: Vec::new(),
                observer: Some(sys),
                compiled: None,
            }
        };
        let e = Coordinate::new("e", doubled_selector(&[1.0, -1.0]));
        Ok(match &kind {
            ScenarioKind::Classical => {
                let a = -0.5 * gamma;
                let plant = ClassicalPlant::new(
                    CMatrix::from_element(1, 1, c(a, -omega)),
                    CMatrix::from_element(1, 1, re(-gamma.sqrt())),
                    CMatrix::from_element(1, 1, re(gamma.sqrt())),
                )?;
                let sys = classical_luenberger(&plant, &CMatrix::from_element(1, 1, re(gain)))?;
                let ce = CVector::from_vec(vec![ONE, -ONE]);
                Self {
                    kind: kind.clone(),
                    params,
                    model: ScenarioModel::Classical {
                        drift: sys.joint_drift.clone(),
                        input: classical_joint_input(&plant),
                    },
                    x0: CVector::from_vec(vec![ONE, ZERO]),
                    coordinates: vec![Coordinate::new("e", ce)],
                    fit: Some("e".into()),
                    input_names: vec!["u".into()],
                    drive_channel: 0,
                    file_drives: Vec::new(),
                    observer: Some(sys),
                    compiled: None,
                }
            }
            ScenarioKind::OneWay => from_observer(
                one_way_cascade(omega, gamma)?,
                vec![Coordinate::new("a", doubled_selector(&[1.0, 0.0])), e],
                "a",
            ),
            ScenarioKind::TwoWay => from_observer(
                two_way_cascade(omega, gamma)?,
                vec![
                    Coordinate::new("e", doubled_selector(&[1.0, 1.0])),
                    Coordinate::new("df", doubled_selector(&[1.0, -1.0])),
                ],
                "e",
            ),
            ScenarioKind::Observer => from_observer(build_quantum_observer(omega, gamma, gamma_l, false)?, vec![e], "e"),
            ScenarioKind::ObserverVerified => {
                let sys = build_quantum_observer(omega, gamma, gamma_l, true)?;
                let meas = Coordinate::new("meas", sys.verification_output()?.c_row.clone());
                from_observer(sys, vec![e, meas], "e")
            }
            ScenarioKind::File(path) => {
                let text = std::fs::read(path)
                    .map_err(|err| Error::InvalidSpec(format!("cannot read {}: {err}", path.display())))?;
                let compiled = dsl::build_network(&dsl::parse_bytes(&text)?)?;
                let ss = compiled.network.reduce()?;
                let m = ss.num_modes();
                let mut init = vec![ZERO; m];
                if m > 0 {
                    init[0] = ONE;
                }
                let mut weights = vec![0.0; m];
                if m > 0 {
                    weights[0] = 1.0;
                }
                Self {
                    kind: kind.clone(),
                    params,
                    model: ScenarioModel::Quantum(ss),
                    x0: doubled_means(&init),
                    coordinates: if m > 0 { vec![Coordinate::new("x1", doubled_selector(&weights))] } else { Vec::new() },
                    fit: (m > 0).then(|| "x1".into()),
                    input_names: compiled.input_names.clone(),
                    drive_channel: 0,
                    file_drives: compiled.drives.clone(),
                    observer: None,
                    compiled: Some(compiled),
                }
            }
        })
    }

    pub fn state_space(&self) -> Option<&StateSpace> {
        match &self.model {
            ScenarioModel::Quantum(ss) => Some(ss),
            ScenarioModel::Classical { .. } => None,
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.input_names.len()
    }

    pub fn coordinate(&self, name: &str) -> Option<&Coordinate> {
        self.coordinates.iter().find(|c| c.name == name)
    }

    /// Means (and, for quantum models, covariances from the vacuum state when
    /// `covariance` is set) on the grid `0, dt, …, horizon`.
    pub fn simulate(&self, drives: &[Drive], horizon: f64, dt: f64, covariance: bool) -> Result<Trajectory> {
        let mut all: Vec<Drive> = self.file_drives.clone();
        all.extend_from_slice(drives);
        let mut traj = match &self.model {
            ScenarioModel::Quantum(ss) if covariance => {
                integrate_moments(ss, &self.x0, &vacuum_covariance(ss.num_modes()), &all, horizon, dt)?
            }
            ScenarioModel::Quantum(ss) => integrate_means(ss, &self.x0, &all, horizon, dt)?,
            ScenarioModel::Classical { drift, input } => integrate_linear(drift, input, &self.x0, &all, horizon, dt)?,
        };
        traj.metadata.insert("scenario".into(), self.kind.to_string());
        Ok(traj)
    }

    pub fn analyze(&self, trajectory: Option<&Trajectory>) -> AnalysisReport {
        let selector = self.fit.as_deref().and_then(|n| self.coordinate(n)).map(|c| &c.weights);
        match &self.model {
            ScenarioModel::Quantum(ss) => analyze(ss, selector, trajectory),
            ScenarioModel::Classical { drift, input } => analyze_matrix(drift, input, selector, trajectory),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_names() {
        assert_eq!("observer-verified".parse::<ScenarioKind>().unwrap(), ScenarioKind::ObserverVerified);
        assert_eq!("file:x.qnet".parse::<ScenarioKind>().unwrap(), ScenarioKind::File("x.qnet".into()));
        assert!("file:".parse::<ScenarioKind>().is_err());
        assert!("fig9".parse::<ScenarioKind>().is_err());
        for k in ["classical", "oneway", "twoway", "observer", "observer-verified"] {
            assert_eq!(k.parse::<ScenarioKind>().unwrap().to_string(), k);
        }
    }

    #[test]
    fn params_checked() {
        let p = ScenarioParams { gamma: 0.0, ..Default::default() };
        assert!(matches!(Scenario::build(ScenarioKind::OneWay, p), Err(Error::InvalidSpec(_))));
        let p = ScenarioParams { gamma_l: -1.0, ..Default::default() };
        assert!(Scenario::build(ScenarioKind::Observer, p).is_err());
    }

    #[test]
    fn classical_error_rate() {
        let s = Scenario::build(ScenarioKind::Classical, ScenarioParams::default()).unwrap();
        let traj = s.simulate(&[], 10.0, 1e-2, false).unwrap();
        let fit = s.analyze(Some(&traj)).decay.unwrap();
        // γ/2 + L√γ
        assert!((fit.rate - (0.25 + 0.5f64.sqrt())).abs() < 1e-6);
    }

    #[test]
    fn missing_file_is_invalid_config() {
        let k = ScenarioKind::File("/nonexistent/net.qnet".into());
        assert!(matches!(Scenario::build(k, ScenarioParams::default()), Err(Error::InvalidSpec(_))));
    }
}
