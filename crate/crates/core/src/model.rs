//! Physical oscillator descriptions and the linear input-output models they
//! induce.
//!
//! An [`OscillatorSpec`] holds `m` modes `a_1 … a_m` with Hamiltonian
//! `Σ ω_{αβ} a_α* a_β` and `n` coupling operators
//! `L_k = Σ C⁻_{kα} a_α + Σ C⁺_{kα} a_α*`. [`derive_state_space`] turns that
//! into the Heisenberg-picture model
//!
//! ```text
//! da/dt = A₋ a + A₊ a^# + B₋ b_in + B₊ b_in^#
//! b_out = C₋ a + C₊ a^# + D b_in
//! ```
//!
//! with `A₋ = −½C₋†C₋ + ½C₊ᵀC₊^# − iΩ`, `A₊ = −½C₋†C₊ + ½C₊ᵀC₋^#`,
//! `B₋ = −C₋†`, `B₊ = −C₊ᵀ` and `D = I`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{block2, block_diag, conj, max_abs, re, CMatrix, I, ZERO};

pub const DEFAULT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillatorSpec {
    omega: CMatrix,
    c_minus: CMatrix,
    c_plus: CMatrix,
}

impl OscillatorSpec {
    pub fn new(omega: CMatrix, c_minus: CMatrix, c_plus: CMatrix) -> Result<Self> {
        Self::with_tolerance(omega, c_minus, c_plus, DEFAULT_TOLERANCE)
    }

    pub fn with_tolerance(
        omega: CMatrix,
        c_minus: CMatrix,
        c_plus: CMatrix,
        tol: f64,
    ) -> Result<Self> {
        let m = omega.nrows();
        if omega.ncols() != m {
            return Err(Error::InvalidSpec(format!(
                "omega must be square, got {:?}",
                omega.shape()
            )));
        }
        if c_minus.ncols() != m || c_plus.ncols() != m {
            return Err(Error::InvalidSpec(format!(
                "coupling matrices need {m} columns, got {:?} and {:?}",
                c_minus.shape(),
                c_plus.shape()
            )));
        }
        if c_minus.nrows() != c_plus.nrows() {
            return Err(Error::InvalidSpec(format!(
                "C₋ has {} rows but C₊ has {}",
                c_minus.nrows(),
                c_plus.nrows()
            )));
        }
        if omega.iter().chain(c_minus.iter()).chain(c_plus.iter()).any(|z| !z.is_finite()) {
            return Err(Error::InvalidSpec("non-finite matrix entry".into()));
        }
        let herm = max_abs(&(&omega - omega.adjoint()));
        if herm > tol {
            return Err(Error::InvalidSpec(format!(
                "omega is not Hermitian (deviation {herm:.3e})"
            )));
        }
        Ok(Self { omega, c_minus, c_plus })
    }

    pub fn num_modes(&self) -> usize {
        self.omega.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.c_minus.nrows()
    }

    pub fn omega(&self) -> &CMatrix {
        &self.omega
    }

    pub fn c_minus(&self) -> &CMatrix {
        &self.c_minus
    }

    pub fn c_plus(&self) -> &CMatrix {
        &self.c_plus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingKind {
    Annihilation,
    Creation,
}

/// One coupling channel `L = √rate·a` (annihilation) or `L = √rate·a*`
/// (creation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coupling {
    pub kind: CouplingKind,
    pub rate: f64,
}

impl Coupling {
    pub fn annihilation(rate: f64) -> Self {
        Self { kind: CouplingKind::Annihilation, rate }
    }

    pub fn creation(rate: f64) -> Self {
        Self { kind: CouplingKind::Creation, rate }
    }
}

/// Single-mode spec with one channel per coupling, in declaration order.
pub fn make_mode(omega: f64, couplings: &[Coupling]) -> Result<OscillatorSpec> {
    let mut rows = Vec::with_capacity(couplings.len());
    for cp in couplings {
        if !(cp.rate.is_finite() && cp.rate >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "coupling rate must be a finite non-negative number, got {}",
                cp.rate
            )));
        }
        let amp = re(cp.rate.sqrt());
        rows.push(match cp.kind {
            CouplingKind::Annihilation => (amp, ZERO),
            CouplingKind::Creation => (ZERO, amp),
        });
    }
    mode_from_rows(omega, &rows)
}

/// Single-mode spec from general coupling rows `L_k = α_k a + β_k a*`.
pub fn mode_from_rows(omega: f64, rows: &[(Complex64, Complex64)]) -> Result<OscillatorSpec> {
    if !omega.is_finite() {
        return Err(Error::InvalidSpec(format!("frequency must be finite, got {omega}")));
    }
    let n = rows.len();
    let c_minus = CMatrix::from_iterator(n, 1, rows.iter().map(|r| r.0));
    let c_plus = CMatrix::from_iterator(n, 1, rows.iter().map(|r| r.1));
    OscillatorSpec::new(CMatrix::from_element(1, 1, re(omega)), c_minus, c_plus)
}

/// Linear input-output model over `m` modes and `n` channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "json::StateSpaceJson", try_from = "json::StateSpaceJson")]
pub struct StateSpace {
    pub a_minus: CMatrix,
    pub a_plus: CMatrix,
    pub b_minus: CMatrix,
    pub b_plus: CMatrix,
    pub c_minus: CMatrix,
    pub c_plus: CMatrix,
    pub d: CMatrix,
}

impl StateSpace {
    /// Checks shapes and unitarity of `D` at the default tolerance.
    pub fn new(
        a_minus: CMatrix,
        a_plus: CMatrix,
        b_minus: CMatrix,
        b_plus: CMatrix,
        c_minus: CMatrix,
        c_plus: CMatrix,
        d: CMatrix,
    ) -> Result<Self> {
        let ss = Self { a_minus, a_plus, b_minus, b_plus, c_minus, c_plus, d };
        ss.check_shapes()?;
        let n = ss.num_channels();
        let dev = max_abs(&(&ss.d * ss.d.adjoint() - CMatrix::identity(n, n)));
        if dev > DEFAULT_TOLERANCE {
            return Err(Error::InvalidSpec(format!(
                "feedthrough D is not unitary (deviation {dev:.3e})"
            )));
        }
        Ok(ss)
    }

    /// Zero-mode block whose only content is the scattering matrix `s`.
    pub fn static_scatter(s: CMatrix) -> Result<Self> {
        let n = s.nrows();
        Self::new(
            CMatrix::zeros(0, 0),
            CMatrix::zeros(0, 0),
            CMatrix::zeros(0, n),
            CMatrix::zeros(0, n),
            CMatrix::zeros(n, 0),
            CMatrix::zeros(n, 0),
            s,
        )
    }

    fn check_shapes(&self) -> Result<()> {
        let m = self.a_minus.nrows();
        let n = self.d.nrows();
        let want = [
            ("a_minus", &self.a_minus, (m, m)),
            ("a_plus", &self.a_plus, (m, m)),
            ("b_minus", &self.b_minus, (m, n)),
            ("b_plus", &self.b_plus, (m, n)),
            ("c_minus", &self.c_minus, (n, m)),
            ("c_plus", &self.c_plus, (n, m)),
            ("d", &self.d, (n, n)),
        ];
        for (name, mat, shape) in want {
            if mat.shape() != shape {
                return Err(Error::Dimension(format!(
                    "{name} is {:?}, expected {shape:?}",
                    mat.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn num_modes(&self) -> usize {
        self.a_minus.nrows()
    }

    pub fn num_channels(&self) -> usize {
        self.d.nrows()
    }

    /// Direct sum: modes and channels are stacked in the order given.
    pub fn direct_sum(parts: &[&StateSpace]) -> StateSpace {
        let pick = |f: fn(&StateSpace) -> &CMatrix| -> CMatrix {
            let mats: Vec<&CMatrix> = parts.iter().map(|p| f(p)).collect();
            block_diag(&mats)
        };
        StateSpace {
            a_minus: pick(|s| &s.a_minus),
            a_plus: pick(|s| &s.a_plus),
            b_minus: pick(|s| &s.b_minus),
            b_plus: pick(|s| &s.b_plus),
            c_minus: pick(|s| &s.c_minus),
            c_plus: pick(|s| &s.c_plus),
            d: pick(|s| &s.d),
        }
    }

    pub fn to_doubled(&self) -> DoubledForm {
        to_doubled(self)
    }

    pub fn is_passive(&self) -> bool {
        max_abs(&self.a_plus) == 0.0 && max_abs(&self.b_plus) == 0.0 && max_abs(&self.c_plus) == 0.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Apply the coefficient formulas to a validated spec.
pub fn derive_state_space(spec: &OscillatorSpec) -> StateSpace {
    let cm = &spec.c_minus;
    let cp = &spec.c_plus;
    let half = re(0.5);
    let a_minus = (cm.adjoint() * cm) * (-half) + (cp.transpose() * conj(cp)) * half - &spec.omega * I;
    let a_plus = (cm.adjoint() * cp) * (-half) + (cp.transpose() * conj(cm)) * half;
    let n = spec.num_channels();
    StateSpace {
        a_minus,
        a_plus,
        b_minus: -cm.adjoint(),
        b_plus: -cp.transpose(),
        c_minus: cm.clone(),
        c_plus: cp.clone(),
        d: CMatrix::identity(n, n),
    }
}

/// Largest of `‖A₋ + A₋† + C₋†C₋ − C₊ᵀC₊^#‖`, `‖B₋ + C₋†D‖`, `‖B₊ + C₊ᵀD^#‖`
/// (max-norm). With `D = I` the last two reduce to `B₋ + C₋†` and `B₊ + C₊ᵀ`.
pub fn realizability_residual(ss: &StateSpace) -> f64 {
    let damping = &ss.a_minus + ss.a_minus.adjoint() + ss.c_minus.adjoint() * &ss.c_minus
        - ss.c_plus.transpose() * conj(&ss.c_plus);
    let b_minus = &ss.b_minus + ss.c_minus.adjoint() * &ss.d;
    let b_plus = &ss.b_plus + ss.c_plus.transpose() * conj(&ss.d);
    max_abs(&damping).max(max_abs(&b_minus)).max(max_abs(&b_plus))
}

/// Stacked representation acting on `[a; a^#]` and `[b; b^#]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubledForm {
    pub abar: CMatrix,
    pub bbar: CMatrix,
    pub cbar: CMatrix,
    pub dbar: CMatrix,
}

fn doubled(top: &CMatrix, plus: &CMatrix) -> CMatrix {
    block2(top, plus, &conj(plus), &conj(top))
}

pub fn to_doubled(ss: &StateSpace) -> DoubledForm {
    let n = ss.num_channels();
    let zero_d = CMatrix::zeros(n, n);
    DoubledForm {
        abar: doubled(&ss.a_minus, &ss.a_plus),
        bbar: doubled(&ss.b_minus, &ss.b_plus),
        cbar: doubled(&ss.c_minus, &ss.c_plus),
        dbar: doubled(&ss.d, &zero_d),
    }
}

impl DoubledForm {
    pub fn num_modes(&self) -> usize {
        self.abar.nrows() / 2
    }

    pub fn num_inputs(&self) -> usize {
        self.bbar.ncols() / 2
    }

    pub fn num_outputs(&self) -> usize {
        self.cbar.nrows() / 2
    }

    /// Max deviation from the conjugation-swap symmetry over all four blocks.
    pub fn symmetry_defect(&self) -> f64 {
        fn defect(m: &CMatrix) -> f64 {
            let (r, c) = (m.nrows() / 2, m.ncols() / 2);
            let tl = m.view((0, 0), (r, c));
            let tr = m.view((0, c), (r, c));
            let bl = m.view((r, 0), (r, c));
            let br = m.view((r, c), (r, c));
            let d1 = max_abs(&(br.map(|z| z.conj()) - tl));
            let d2 = max_abs(&(bl.map(|z| z.conj()) - tr));
            d1.max(d2)
        }
        defect(&self.abar)
            .max(defect(&self.bbar))
            .max(defect(&self.cbar))
            .max(defect(&self.dbar))
    }

    /// Read the top blocks back into a [`StateSpace`]. The doubled `D` must be
    /// block diagonal (no squeezing in the feedthrough).
    pub fn to_state_space(&self) -> Result<StateSpace> {
        let m = self.num_modes();
        let ni = self.num_inputs();
        let no = self.num_outputs();
        if ni != no {
            return Err(Error::Dimension(format!(
                "{ni} external inputs but {no} external outputs"
            )));
        }
        let d_plus = self.dbar.view((0, ni), (no, ni)).into_owned();
        if max_abs(&d_plus) > DEFAULT_TOLERANCE {
            return Err(Error::InvalidSpec("feedthrough mixes b and b^#".into()));
        }
        StateSpace::new(
            self.abar.view((0, 0), (m, m)).into_owned(),
            self.abar.view((0, m), (m, m)).into_owned(),
            self.bbar.view((0, 0), (m, ni)).into_owned(),
            self.bbar.view((0, ni), (m, ni)).into_owned(),
            self.cbar.view((0, 0), (no, m)).into_owned(),
            self.cbar.view((0, m), (no, m)).into_owned(),
            self.dbar.view((0, 0), (no, ni)).into_owned(),
        )
    }
}

pub(crate) mod json {
    //! JSON layout: complex numbers as `[re, im]`, matrices row-major.

    use super::*;

    pub type MatrixJson = Vec<Vec<[f64; 2]>>;

    pub fn matrix_to_json(m: &CMatrix) -> MatrixJson {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    pub fn matrix_from_json(name: &str, rows: &MatrixJson, nrows: usize, ncols: usize) -> Result<CMatrix> {
        // zero-column matrices may be written as [] or as rows of []
        if nrows > 0 && ncols == 0 && rows.is_empty() {
            return Ok(CMatrix::zeros(nrows, 0));
        }
        if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::Dimension(format!(
                "{name}: expected {nrows}×{ncols} matrix"
            )));
        }
        Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
            Complex64::new(rows[i][j][0], rows[i][j][1])
        }))
    }

    #[derive(Serialize, Deserialize)]
    pub struct StateSpaceJson {
        pub a_minus: MatrixJson,
        pub a_plus: MatrixJson,
        pub b_minus: MatrixJson,
        pub b_plus: MatrixJson,
        pub c_minus: MatrixJson,
        pub c_plus: MatrixJson,
        pub d: MatrixJson,
    }

    impl From<StateSpace> for StateSpaceJson {
        fn from(ss: StateSpace) -> Self {
            Self {
                a_minus: matrix_to_json(&ss.a_minus),
                a_plus: matrix_to_json(&ss.a_plus),
                b_minus: matrix_to_json(&ss.b_minus),
                b_plus: matrix_to_json(&ss.b_plus),
                c_minus: matrix_to_json(&ss.c_minus),
                c_plus: matrix_to_json(&ss.c_plus),
                d: matrix_to_json(&ss.d),
            }
        }
    }

    impl TryFrom<StateSpaceJson> for StateSpace {
        type Error = Error;

        fn try_from(j: StateSpaceJson) -> Result<Self> {
            let m = j.a_minus.len();
            let n = j.d.len();
            StateSpace::new(
                matrix_from_json("a_minus", &j.a_minus, m, m)?,
                matrix_from_json("a_plus", &j.a_plus, m, m)?,
                matrix_from_json("b_minus", &j.b_minus, m, n)?,
                matrix_from_json("b_plus", &j.b_plus, m, n)?,
                matrix_from_json("c_minus", &j.c_minus, n, m)?,
                matrix_from_json("c_plus", &j.c_plus, n, m)?,
                matrix_from_json("d", &j.d, n, n)?,
            )
        }
    }

    #[derive(Serialize, Deserialize)]
    pub struct SpecJson {
        pub m: usize,
        pub n: usize,
        pub omega: MatrixJson,
        pub c_minus: MatrixJson,
        pub c_plus: MatrixJson,
    }
}

impl Serialize for OscillatorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        json::SpecJson {
            m: self.num_modes(),
            n: self.num_channels(),
            omega: json::matrix_to_json(&self.omega),
            c_minus: json::matrix_to_json(&self.c_minus),
            c_plus: json::matrix_to_json(&self.c_plus),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OscillatorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = json::SpecJson::deserialize(d)?;
        let build = || -> Result<OscillatorSpec> {
            OscillatorSpec::new(
                json::matrix_from_json("omega", &j.omega, j.m, j.m)?,
                json::matrix_from_json("c_minus", &j.c_minus, j.n, j.m)?,
                json::matrix_from_json("c_plus", &j.c_plus, j.n, j.m)?,
            )
        };
        build().map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn cavity(omega: f64, gamma: f64) -> OscillatorSpec {
        make_mode(omega, &[Coupling::annihilation(gamma)]).unwrap()
    }

    #[test]
    fn cavity_coefficients() {
        let ss = derive_state_space(&cavity(1.0, 0.5));
        assert!((ss.a_minus[(0, 0)] - c(-0.25, -1.0)).norm() < 1e-15);
        assert!((ss.b_minus[(0, 0)] - re(-0.5f64.sqrt())).norm() < 1e-15);
        assert!((ss.c_minus[(0, 0)] - re(0.5f64.sqrt())).norm() < 1e-15);
        assert_eq!(max_abs(&ss.a_plus), 0.0);
        assert_eq!(max_abs(&ss.b_plus), 0.0);
        assert_eq!(max_abs(&ss.c_plus), 0.0);
        assert_eq!(ss.d, CMatrix::identity(1, 1));
    }

    #[test]
    fn closed_system_is_pure_rotation() {
        let omega = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![re(1.0), re(2.5)]));
        let spec = OscillatorSpec::new(omega.clone(), CMatrix::zeros(0, 2), CMatrix::zeros(0, 2)).unwrap();
        let ss = derive_state_space(&spec);
        assert!(max_abs(&(&ss.a_minus + &omega * I)) < 1e-15);
        assert_eq!(max_abs(&ss.a_plus), 0.0);
        assert_eq!(ss.num_channels(), 0);
    }

    #[test]
    fn observer_mode_damping_cancels() {
        let (gamma, gamma_l, omega) = (0.5, 2.0, 1.0);
        let spec = make_mode(
            omega,
            &[
                Coupling::annihilation(gamma),
                Coupling::annihilation(gamma_l),
                Coupling::creation(gamma_l),
            ],
        )
        .unwrap();
        // hand substitution: C₋ = [√γ; √γ_L; 0], C₊ = [0; 0; √γ_L]
        // C₋†C₋ = γ + γ_L, C₊ᵀC₊^# = γ_L, C₋†C₊ = 0, C₊ᵀC₋^# = 0
        let ss = derive_state_space(&spec);
        assert!((ss.a_minus[(0, 0)] - c(-0.5 * gamma, -omega)).norm() < 1e-14);
        assert!(ss.a_plus[(0, 0)].norm() < 1e-15);
        let bm: Vec<f64> = ss.b_minus.iter().map(|z| z.re).collect();
        let bp: Vec<f64> = ss.b_plus.iter().map(|z| z.re).collect();
        assert_eq!(bm, vec![-gamma.sqrt(), -gamma_l.sqrt(), 0.0]);
        assert_eq!(bp, vec![0.0, 0.0, -gamma_l.sqrt()]);
    }

    #[test]
    fn make_mode_rows_follow_declaration_order() {
        let spec = make_mode(1.0, &[Coupling::annihilation(0.5)]).unwrap();
        assert_eq!(spec.c_minus()[(0, 0)], re(0.5f64.sqrt()));
        assert_eq!(spec.c_plus()[(0, 0)], ZERO);

        let spec = make_mode(0.0, &[]).unwrap();
        assert_eq!(spec.num_channels(), 0);
        let ss = derive_state_space(&spec);
        assert_eq!(ss.a_minus[(0, 0)], ZERO);
    }

    #[test]
    fn negative_rate_rejected() {
        let err = make_mode(1.0, &[Coupling::annihilation(-1.0)]).unwrap_err();
        assert!(matches!(err, Error::InvalidSpec(_)));
        assert!(make_mode(1.0, &[Coupling::creation(f64::NAN)]).is_err());
    }

    #[test]
    fn spec_validation() {
        let bad = CMatrix::from_row_slice(2, 2, &[re(1.0), re(0.5), re(0.0), re(1.0)]);
        assert!(matches!(
            OscillatorSpec::new(bad, CMatrix::zeros(1, 2), CMatrix::zeros(1, 2)),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            OscillatorSpec::new(CMatrix::identity(2, 2), CMatrix::zeros(1, 3), CMatrix::zeros(1, 2)),
            Err(Error::InvalidSpec(_))
        ));
        // tolerance is configurable
        let nearly = CMatrix::from_row_slice(1, 1, &[c(1.0, 1e-7)]);
        assert!(OscillatorSpec::new(nearly.clone(), CMatrix::zeros(0, 1), CMatrix::zeros(0, 1)).is_err());
        assert!(OscillatorSpec::with_tolerance(nearly, CMatrix::zeros(0, 1), CMatrix::zeros(0, 1), 1e-6).is_ok());
    }

    #[test]
    fn residual_catches_wrong_sign() {
        let mut ss = derive_state_space(&cavity(1.0, 0.5));
        assert!(realizability_residual(&ss) < 1e-12);
        ss.b_minus = ss.c_minus.adjoint();
        // ‖B₋ + C₋†‖ = 2√γ
        let want = 2.0 * 0.5f64.sqrt();
        assert!((realizability_residual(&ss) - want).abs() < 1e-12);
    }

    #[test]
    fn zero_system_residual() {
        let ss = StateSpace {
            a_minus: CMatrix::zeros(2, 2),
            a_plus: CMatrix::zeros(2, 2),
            b_minus: CMatrix::zeros(2, 1),
            b_plus: CMatrix::zeros(2, 1),
            c_minus: CMatrix::zeros(1, 2),
            c_plus: CMatrix::zeros(1, 2),
            d: CMatrix::zeros(1, 1),
        };
        assert_eq!(realizability_residual(&ss), 0.0);
        let dbl = to_doubled(&ss);
        assert_eq!(max_abs(&dbl.abar), 0.0);
        assert_eq!(max_abs(&dbl.bbar), 0.0);
        assert_eq!(max_abs(&dbl.cbar), 0.0);
        assert_eq!(max_abs(&dbl.dbar), 0.0);
    }

    #[test]
    fn passive_cavity_doubles_block_diagonally() {
        let ss = derive_state_space(&cavity(1.0, 0.5));
        let dbl = to_doubled(&ss);
        let a = ss.a_minus[(0, 0)];
        assert_eq!(dbl.abar[(0, 0)], a);
        assert_eq!(dbl.abar[(1, 1)], a.conj());
        assert_eq!(dbl.abar[(0, 1)], ZERO);
        assert_eq!(dbl.abar[(1, 0)], ZERO);
        assert_eq!(dbl.symmetry_defect(), 0.0);
    }

    #[test]
    fn observer_doubled_input_blocks() {
        let gamma_l: f64 = 2.0;
        let spec = make_mode(
            1.0,
            &[Coupling::annihilation(0.5), Coupling::annihilation(gamma_l), Coupling::creation(gamma_l)],
        )
        .unwrap();
        let dbl = to_doubled(&derive_state_space(&spec));
        // row 0 acts on [b1 b2 b3 | b1# b2# b3#]
        let want_row0 = [-(0.5f64.sqrt()), -gamma_l.sqrt(), 0.0, 0.0, 0.0, -gamma_l.sqrt()];
        let want_row1 = [0.0, 0.0, -gamma_l.sqrt(), -(0.5f64.sqrt()), -gamma_l.sqrt(), 0.0];
        for j in 0..6 {
            assert!((dbl.bbar[(0, j)] - re(want_row0[j])).norm() < 1e-15, "row0 col {j}");
            assert!((dbl.bbar[(1, j)] - re(want_row1[j])).norm() < 1e-15, "row1 col {j}");
        }
        assert_eq!(dbl.symmetry_defect(), 0.0);
    }

    #[test]
    fn static_scatter_has_no_modes() {
        let s = CMatrix::from_row_slice(2, 2, &[ZERO, re(1.0), re(1.0), ZERO]);
        let ss = StateSpace::static_scatter(s).unwrap();
        assert_eq!(ss.num_modes(), 0);
        assert_eq!(ss.num_channels(), 2);
        assert!(StateSpace::static_scatter(CMatrix::identity(2, 2) * re(2.0)).is_err());
    }

    #[test]
    fn json_layout() {
        let ss = derive_state_space(&cavity(1.0, 0.5));
        let v: serde_json::Value = serde_json::from_str(&ss.to_json().unwrap()).unwrap();
        for key in ["a_minus", "a_plus", "b_minus", "b_plus", "c_minus", "c_plus", "d"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!((v["a_minus"][0][0][0].as_f64().unwrap() + 0.25).abs() < 1e-15);
        assert_eq!(v["a_minus"][0][0][1].as_f64(), Some(-1.0));
        let back = StateSpace::from_json(&ss.to_json().unwrap()).unwrap();
        assert_eq!(back, ss);

        let spec = cavity(1.0, 0.5);
        let text = serde_json::to_string(&spec).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["m"], 1);
        assert_eq!(v["n"], 1);
        assert!(v.get("omega").is_some() && v.get("c_minus").is_some() && v.get("c_plus").is_some());
        let back: OscillatorSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn json_rejects_bad_shapes() {
        let text = r#"{"a_minus":[[[0,0]]],"a_plus":[[[0,0]]],"b_minus":[[[0,0],[1,0]]],
            "b_plus":[[[0,0]]],"c_minus":[[[0,0]]],"c_plus":[[[0,0]]],"d":[[[1,0]]]}"#;
        assert!(StateSpace::from_json(text).is_err());
    }
}
