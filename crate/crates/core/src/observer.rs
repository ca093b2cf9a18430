//! Luenberger observers: the classical reference design and its coherent
//! quantum counterparts built from cavities and beam splitters.
//!
//! Error conventions:
//!
//! - classical, one-way cascade, quantum observers: `e = x − x̃` (`a − ã`);
//! - two-way cascade: `e = a + ã`, since there `−ã` tracks `a`. The
//!   orthogonal combination `a − ã` is the noise-free mode of that network.
//!
//! For every construction the error dynamics are obtained by conjugating the
//! joint drift into a basis whose first coordinates are the error map, so the
//! reported `error_a` always comes from the reduced network, not from a
//! hand-derived formula.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde_json::json;

use crate::dynamics::HURWITZ_TOLERANCE;
use crate::error::{Error, Result};
use crate::linalg::{
    block2, c, eigenvalues, max_abs, orthogonal_complement, range_basis, re, solve_lyapunov, CMatrix, CVector,
    ONE, ZERO,
};
use crate::model::{derive_state_space, json::matrix_to_json, make_mode, Coupling, StateSpace};
use crate::network::{beamsplitter_5050, Block, ComposedNetwork, Direction};

/// Default closed-loop margin targeted by [`detectable`].
pub const DEFAULT_GAIN_MARGIN: f64 = -0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPlant {
    pub a: CMatrix,
    pub b: CMatrix,
    pub c: CMatrix,
}

impl ClassicalPlant {
    pub fn new(a: CMatrix, b: CMatrix, c: CMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || c.ncols() != n {
            return Err(Error::Dimension(format!(
                "A {:?}, B {:?}, C {:?} are not conformable",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn scalar(a: f64, b: f64, c: f64) -> Self {
        let one = |x: f64| CMatrix::from_element(1, 1, re(x));
        Self { a: one(a), b: one(b), c: one(c) }
    }

    pub fn num_states(&self) -> usize {
        self.a.nrows()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObserverKind {
    Classical,
    OneWay,
    TwoWay,
    Quantum,
    QuantumVerifiable,
}

impl ObserverKind {
    pub fn name(self) -> &'static str {
        match self {
            ObserverKind::Classical => "classical",
            ObserverKind::OneWay => "oneway",
            ObserverKind::TwoWay => "twoway",
            ObserverKind::Quantum => "observer",
            ObserverKind::QuantumVerifiable => "observer-verified",
        }
    }
}

/// Coefficient of one external input (or its adjoint) in the error equation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCoefficient {
    pub input: String,
    pub conjugate: bool,
    pub value: Complex64,
}

/// The `(y − ỹ)/√2` output of the verifiable observer, as a linear
/// combination of external outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationOutput {
    /// `(output label, weight)` pairs.
    pub weights: Vec<(String, Complex64)>,
    /// Mean contribution of the doubled state: `⟨out⟩ = c_row·⟨x⟩ + d_row·ū`.
    pub c_row: CVector,
    pub d_row: CVector,
    /// `c_row` restricted to the annihilation sector equals `e_gain · E`.
    pub e_gain: Complex64,
}

impl VerificationOutput {
    pub fn mean(&self, x: &CVector, drive: Option<&CVector>) -> Complex64 {
        let base = self.c_row.dot(x);
        match drive {
            Some(u) => base + self.d_row.dot(u),
            None => base,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ObserverSystem {
    pub kind: ObserverKind,
    pub network: Option<ComposedNetwork>,
    /// Reduced joint model (quantum constructions).
    pub joint: Option<StateSpace>,
    pub classical: Option<(ClassicalPlant, CMatrix)>,
    /// Joint drift in the state ordering used by `error_map`.
    pub joint_drift: CMatrix,
    /// Rows select the error coordinates from the joint (annihilation-sector)
    /// state.
    pub error_map: CMatrix,
    pub error_a: CMatrix,
    /// Size of the coupling from non-error coordinates into the error
    /// equation; zero when the error dynamics are autonomous.
    pub coupling: f64,
    pub noise_coeffs: Vec<NoiseCoefficient>,
    /// External input carrying the classical disturbance `u`.
    pub disturbance_input: Option<usize>,
    pub verification: Option<VerificationOutput>,
    pub notes: Vec<String>,
}

impl ObserverSystem {
    pub fn is_autonomous(&self) -> bool {
        self.coupling < 1e-9
    }

    /// Scalar error coefficient (single-coordinate error maps).
    pub fn error_rate(&self) -> Complex64 {
        self.error_a[(0, 0)]
    }

    /// Error selector over doubled coordinates `[a; a^#]`.
    pub fn error_selector(&self) -> CVector {
        let m = self.error_map.ncols();
        let is_quantum = self.joint.is_some();
        let len = if is_quantum { 2 * m } else { m };
        CVector::from_fn(len, |i, _| if i < m { self.error_map[(0, i)] } else { ZERO })
    }

    pub fn noise_coefficient(&self, input: &str, conjugate: bool) -> Option<Complex64> {
        self.noise_coeffs
            .iter()
            .find(|n| n.input == input && n.conjugate == conjugate)
            .map(|n| n.value)
    }

    /// The combined verification output; only verifiable observers have one.
    pub fn verification_output(&self) -> Result<&VerificationOutput> {
        self.verification.as_ref().ok_or(Error::NotVerifiable)
    }

    pub fn to_json(&self) -> Result<String> {
        let noise: Vec<_> = self
            .noise_coeffs
            .iter()
            .map(|n| {
                json!({
                    "input": n.input,
                    "conjugate": n.conjugate,
                    "value": [n.value.re, n.value.im],
                })
            })
            .collect();
        let mut v = json!({
            "kind": self.kind.name(),
            "joint_drift": matrix_to_json(&self.joint_drift),
            "error_map": matrix_to_json(&self.error_map),
            "error_a": matrix_to_json(&self.error_a),
            "autonomous": self.is_autonomous(),
            "coupling": self.coupling,
            "noise_coeffs": noise,
        });
        if let Some(joint) = &self.joint {
            v["state_space"] = serde_json::to_value(joint)?;
        }
        if let Some(net) = &self.network {
            v["inputs"] = json!(net.input_labels());
            v["outputs"] = json!(net.output_labels());
        }
        if let Some((_, gain)) = &self.classical {
            v["gain"] = json!(matrix_to_json(gain));
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Conjugate `drift` into the basis `[E; E⊥]` and return the error block and
/// the norm of the off-diagonal coupling block.
fn error_block(drift: &CMatrix, error_map: &CMatrix) -> Result<(CMatrix, f64)> {
    let k = error_map.nrows();
    let n = error_map.ncols();
    // rows of E⊥ span the orthogonal complement of the row space of E
    let row_basis = range_basis(&error_map.adjoint(), 1e-12);
    let comp = orthogonal_complement(&row_basis, n).adjoint();
    let mut t = CMatrix::zeros(n, n);
    t.view_mut((0, 0), (k, n)).copy_from(error_map);
    t.view_mut((k, 0), (n - k, n)).copy_from(&comp);
    let t_inv = t
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("error map rows are linearly dependent".into()))?;
    let conj = &t * drift * t_inv;
    let block = conj.view((0, 0), (k, k)).into_owned();
    let coupling = max_abs(&conj.view((0, k), (k, n - k)).into_owned());
    Ok((block, coupling))
}

fn noise_table(ss: &StateSpace, error_map: &CMatrix, labels: &[String]) -> Vec<NoiseCoefficient> {
    let minus = error_map * &ss.b_minus;
    let plus = error_map * &ss.b_plus;
    let mut out = Vec::with_capacity(2 * labels.len());
    for (j, l) in labels.iter().enumerate() {
        out.push(NoiseCoefficient { input: l.clone(), conjugate: false, value: minus[(0, j)] });
        out.push(NoiseCoefficient { input: l.clone(), conjugate: true, value: plus[(0, j)] });
    }
    out
}

/// Build an [`ObserverSystem`] from a wired network and an error map over its
/// modes.
fn quantum_system(
    kind: ObserverKind,
    network: ComposedNetwork,
    error_map: CMatrix,
    disturbance: Option<&str>,
) -> Result<ObserverSystem> {
    let joint = network.reduce()?;
    let (error_a, coupling_minus) = error_block(&joint.a_minus, &error_map)?;
    // creation-sector leakage into the error coordinate
    let coupling_plus = max_abs(&(&error_map * &joint.a_plus));
    let labels = network.input_labels();
    let noise_coeffs = noise_table(&joint, &error_map, &labels);
    let disturbance_input = disturbance.and_then(|l| network.input_index(l));
    Ok(ObserverSystem {
        kind,
        joint_drift: joint.a_minus.clone(),
        joint: Some(joint),
        network: Some(network),
        classical: None,
        error_map,
        error_a,
        coupling: coupling_minus.max(coupling_plus),
        noise_coeffs,
        disturbance_input,
        verification: None,
        notes: Vec::new(),
    })
}

/// Classical Luenberger observer `x̃' = Ax̃ + Bu + L(y − Cx̃)`.
///
/// The joint state is `[x; x̃]`; the error `e = x − x̃` obeys `ė = (A − LC)e`.
pub fn classical_luenberger(plant: &ClassicalPlant, gain: &CMatrix) -> Result<ObserverSystem> {
    let n = plant.num_states();
    let p = plant.c.nrows();
    if gain.shape() != (n, p) {
        return Err(Error::Dimension(format!("gain must be {n}×{p}, got {:?}", gain.shape())));
    }
    let lc = gain * &plant.c;
    let drift = block2(&plant.a, &CMatrix::zeros(n, n), &lc, &(&plant.a - &lc));
    let error_map = block2(
        &CMatrix::identity(n, n),
        &(-CMatrix::identity(n, n)),
        &CMatrix::zeros(0, n),
        &CMatrix::zeros(0, n),
    );
    let (error_a, coupling) = error_block(&drift, &error_map)?;
    let closed = &plant.a - &lc;
    let dev = max_abs(&(&error_a - &closed));
    if dev > 1e-10 * (1.0 + max_abs(&closed)) {
        return Err(Error::Singular(format!("error block deviates from A − LC by {dev:.3e}")));
    }
    Ok(ObserverSystem {
        kind: ObserverKind::Classical,
        network: None,
        joint: None,
        classical: Some((plant.clone(), gain.clone())),
        joint_drift: drift,
        error_map,
        error_a,
        coupling,
        noise_coeffs: Vec::new(),
        disturbance_input: Some(0),
        verification: None,
        notes: Vec::new(),
    })
}

/// Input matrix of the classical joint system `[x; x̃]`: both copies see `Bu`.
pub fn classical_joint_input(plant: &ClassicalPlant) -> CMatrix {
    let n = plant.num_states();
    let m = plant.b.ncols();
    let mut b = CMatrix::zeros(2 * n, m);
    b.view_mut((0, 0), (n, m)).copy_from(&plant.b);
    b.view_mut((n, 0), (n, m)).copy_from(&plant.b);
    b
}

fn spectral_margin(a: &CMatrix) -> f64 {
    eigenvalues(a).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detectability {
    pub detectable: bool,
    pub gain: Option<CMatrix>,
}

/// [`detectable_with_margin`] at [`DEFAULT_GAIN_MARGIN`].
pub fn detectable(a: &CMatrix, c: &CMatrix) -> Result<Detectability> {
    detectable_with_margin(a, c, DEFAULT_GAIN_MARGIN)
}

/// Decide detectability of `(A, C)` and suggest a stabilising gain.
///
/// The state is split into observable and unobservable parts with an
/// orthonormal Kalman decomposition. The pair is detectable iff the
/// unobservable block is Hurwitz. The observable block is placed with a
/// shifted Lyapunov design on the dual system: with
/// `(A_d + βI)P + P(A_d + βI)† = 2B_dB_d†` and `K = B_d†P⁻¹`, every
/// eigenvalue of `A_d − B_dK` has real part exactly `−β`.
pub fn detectable_with_margin(a: &CMatrix, c: &CMatrix, margin: f64) -> Result<Detectability> {
    let n = a.nrows();
    if a.ncols() != n || c.ncols() != n {
        return Err(Error::Dimension(format!("A {:?} and C {:?} are not conformable", a.shape(), c.shape())));
    }
    let p = c.nrows();
    if n == 0 {
        return Ok(Detectability { detectable: true, gain: Some(CMatrix::zeros(0, p)) });
    }
    if spectral_margin(a) <= margin {
        return Ok(Detectability { detectable: true, gain: Some(CMatrix::zeros(n, p)) });
    }

    // observability matrix [C; CA; …; CA^{n−1}]
    let mut obs = CMatrix::zeros(n * p, n);
    let mut blk = c.clone();
    for k in 0..n {
        obs.view_mut((k * p, 0), (p, n)).copy_from(&blk);
        blk = &blk * a;
    }
    let vo = range_basis(&obs.adjoint(), 1e-9);
    let r = vo.ncols();
    if r < n {
        let vu = orthogonal_complement(&vo, n);
        let a_uu = vu.adjoint() * a * &vu;
        if spectral_margin(&a_uu) >= -HURWITZ_TOLERANCE {
            return Ok(Detectability { detectable: false, gain: None });
        }
    }
    if r == 0 {
        return Ok(Detectability { detectable: true, gain: Some(CMatrix::zeros(n, p)) });
    }

    let a_o = vo.adjoint() * a * &vo;
    let c_o = c * &vo;
    let slowest = eigenvalues(&a_o).iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let beta = (-margin).max(-slowest - margin);
    let a_d = a_o.adjoint() + CMatrix::identity(r, r) * re(beta);
    let b_d = c_o.adjoint();
    let pm = solve_lyapunov(&a_d, &(&b_d * b_d.adjoint() * re(-2.0)))?;
    let p_inv = pm
        .try_inverse()
        .ok_or_else(|| Error::Singular("gramian of the observable block is singular".into()))?;
    let k = b_d.adjoint() * p_inv;
    let gain = vo * k.adjoint();

    let closed = a - &gain * c;
    let ok = spectral_margin(&closed) < -HURWITZ_TOLERANCE;
    Ok(Detectability { detectable: ok, gain: ok.then_some(gain) })
}

fn cavity(omega: f64, rates: &[f64]) -> Result<StateSpace> {
    let cps: Vec<Coupling> = rates.iter().map(|r| Coupling::annihilation(*r)).collect();
    Ok(derive_state_space(&make_mode(omega, &cps)?))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidSpec(format!("damping rate must be positive, got {gamma}")));
    }
    Ok(())
}

/// Plant cavity feeding an identical observer cavity through one channel.
pub fn one_way_network(omega: f64, gamma: f64) -> Result<ComposedNetwork> {
    check_gamma(gamma)?;
    ComposedNetwork::concatenate(vec![
        Block::dynamic("plant", cavity(omega, &[gamma])?),
        Block::dynamic("observer", cavity(omega, &[gamma])?),
    ])?
    .connect("plant.out[0]", "observer.in[0]")
}

/// Two cavities, each with two channels of rate `γ/2`: channel 0 runs plant →
/// observer, channel 1 observer → plant.
pub fn two_way_network(omega: f64, gamma: f64) -> Result<ComposedNetwork> {
    check_gamma(gamma)?;
    let h = 0.5 * gamma;
    ComposedNetwork::concatenate(vec![
        Block::dynamic("plant", cavity(omega, &[h, h])?),
        Block::dynamic("observer", cavity(omega, &[h, h])?),
    ])?
    .connect("plant.out[0]", "observer.in[0]")?
    .connect("observer.out[1]", "plant.in[1]")
}

pub fn one_way_cascade(omega: f64, gamma: f64) -> Result<ObserverSystem> {
    let net = one_way_network(omega, gamma)?;
    let e = CMatrix::from_row_slice(1, 2, &[ONE, -ONE]);
    let mut sys = quantum_system(ObserverKind::OneWay, net, e, Some("plant.in[0]"))?;
    let dbl = sys.joint.as_ref().expect("quantum").to_doubled();
    if spectral_margin(&dbl.abar) < -HURWITZ_TOLERANCE {
        sys.notes.push("stable: both modes damped".into());
    }
    sys.notes.push(format!(
        "error a − ã is not autonomous: coupling {:.6} from the plant mode",
        sys.coupling
    ));
    Ok(sys)
}

pub fn two_way_cascade(omega: f64, gamma: f64) -> Result<ObserverSystem> {
    let net = two_way_network(omega, gamma)?;
    let e = CMatrix::from_row_slice(1, 2, &[ONE, ONE]);
    let mut sys = quantum_system(ObserverKind::TwoWay, net, e, Some("plant.in[0]"))?;
    let joint = sys.joint.as_ref().expect("quantum");
    let df = CMatrix::from_row_slice(1, 2, &[ONE, -ONE]);
    let (rot, _) = error_block(&joint.a_minus, &df)?;
    let leak = max_abs(&(&df * &joint.b_minus)).max(max_abs(&(&df * &joint.b_plus)));
    sys.notes.push(format!(
        "a − ã evolves with coefficient {:.6}{:+.6}i and noise coupling {:.3e}",
        rot[(0, 0)].re,
        rot[(0, 0)].im,
        leak
    ));
    Ok(sys)
}

/// Observer mode with couplings `√γ ã`, `√γ_L ã`, `√γ_L ã*`.
pub fn observer_mode(omega: f64, gamma: f64, gamma_l: f64) -> Result<StateSpace> {
    Ok(derive_state_space(&make_mode(
        omega,
        &[Coupling::annihilation(gamma), Coupling::annihilation(gamma_l), Coupling::creation(gamma_l)],
    )?))
}

/// Wiring of the coherent observer.
///
/// Without verification: J1 splits the disturbed input `b_in + u` against a
/// vacuum `b₁` into the plant (`d₁`) and the observer (`d₄`); J4 forms
/// `w = (d₅ − d₂)/√2` from the observer and plant outputs and feeds it to the
/// observer's gain channel; the creation-coupled channel takes `z`.
///
/// With verification, J2 and J3 tap the plant and observer outputs against
/// vacua `b₂`, `b₃` before J4. The taps `y = J2.out[1]` and `ỹ = J3.out[1]`
/// stay external and the verification output is `(y − ỹ)/√2`.
pub fn quantum_observer_network(omega: f64, gamma: f64, gamma_l: f64, verifiable: bool) -> Result<ComposedNetwork> {
    check_gamma(gamma)?;
    if !(gamma_l.is_finite() && gamma_l >= 0.0) {
        return Err(Error::InvalidSpec(format!("gain rate must be non-negative, got {gamma_l}")));
    }
    let plant = cavity(omega, &[gamma])?;
    let obs = observer_mode(omega, gamma, gamma_l)?;
    let mut blocks = vec![
        Block::fixed("J1", beamsplitter_5050()),
        Block::dynamic("plant", plant),
        Block::dynamic("observer", obs),
    ];
    if verifiable {
        blocks.push(Block::fixed("J2", beamsplitter_5050()));
        blocks.push(Block::fixed("J3", beamsplitter_5050()));
    }
    blocks.push(Block::fixed("J4", beamsplitter_5050()));

    let mut net = ComposedNetwork::concatenate(blocks)?
        .connect("J1.out[0]", "plant.in[0]")?
        .connect("J1.out[1]", "observer.in[0]")?;
    if verifiable {
        net = net
            .connect("plant.out[0]", "J2.in[0]")?
            .connect("observer.out[0]", "J3.in[0]")?
            .connect("J3.out[0]", "J4.in[0]")?
            .connect("J2.out[0]", "J4.in[1]")?;
    } else {
        net = net
            .connect("observer.out[0]", "J4.in[0]")?
            .connect("plant.out[0]", "J4.in[1]")?;
    }
    net.connect("J4.out[1]", "observer.in[1]")
}

/// Error coefficient predicted by hand elimination of the junction relations:
/// `A − LC/√2` without verification taps and `A − LC/2` with them, where
/// `A = −γ/2 − iω`, `C = √γ`, `L = √γ_L`.
pub fn closed_form_error_a(omega: f64, gamma: f64, gamma_l: f64, verifiable: bool) -> Complex64 {
    let lc = (gamma * gamma_l).sqrt();
    let share = if verifiable { 0.5 } else { 1.0 / SQRT_2 };
    c(-0.5 * gamma - share * lc, -omega)
}

pub fn build_quantum_observer(omega: f64, gamma: f64, gamma_l: f64, verifiable: bool) -> Result<ObserverSystem> {
    let net = quantum_observer_network(omega, gamma, gamma_l, verifiable)?;
    let e = CMatrix::from_row_slice(1, 2, &[ONE, -ONE]);
    let kind = if verifiable { ObserverKind::QuantumVerifiable } else { ObserverKind::Quantum };
    let mut sys = quantum_system(kind, net, e, Some("J1.in[0]"))?;

    let expected = closed_form_error_a(omega, gamma, gamma_l, verifiable);
    let dev = (sys.error_rate() - expected).norm();
    if dev > 1e-10 || !sys.is_autonomous() {
        return Err(Error::Singular(format!(
            "reduced observer error dynamics deviate from the junction algebra ({dev:.3e}, coupling {:.3e})",
            sys.coupling
        )));
    }

    if verifiable {
        let net = sys.network.as_ref().expect("quantum");
        let joint = sys.joint.as_ref().expect("quantum");
        let y = net.output_index("J2.out[1]").expect("tap y is external");
        let y_t = net.output_index("J3.out[1]").expect("tap ỹ is external");
        let h = re(1.0 / SQRT_2);
        let dbl = joint.to_doubled();
        let c_row: CVector = (dbl.cbar.row(y) * h - dbl.cbar.row(y_t) * h).transpose();
        let d_row: CVector = (dbl.dbar.row(y) * h - dbl.dbar.row(y_t) * h).transpose();
        let m = joint.num_modes();
        // project the annihilation-sector part onto E = (1, −1)
        let e_gain = (c_row[0] - c_row[1]) * 0.5;
        let resid = (c_row[0] - e_gain).norm() + (c_row[1] + e_gain).norm()
            + (m..2 * m).map(|i| c_row[i].norm()).sum::<f64>();
        if resid > 1e-12 {
            return Err(Error::Singular(format!("verification output is not a pure error readout ({resid:.3e})")));
        }
        sys.verification = Some(VerificationOutput {
            weights: vec![
                (net.port_label(net.external_outputs()[y], Direction::Out), h),
                (net.port_label(net.external_outputs()[y_t], Direction::Out), -h),
            ],
            c_row,
            d_row,
            e_gain,
        });
    }
    Ok(sys)
}
