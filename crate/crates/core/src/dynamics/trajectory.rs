use std::collections::BTreeMap;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::linalg::{CMatrix, CVector};

/// Sampled moments on a uniform grid `t_k = k·dt`.
///
/// Means are stored in doubled coordinates `[a; a^#]`; covariances, when
/// present, are the symmetrised second moments `½⟨{Δx, Δx†}⟩` in the same
/// ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub times: Vec<f64>,
    pub means: Vec<CVector>,
    pub covariances: Option<Vec<CMatrix>>,
    pub metadata: BTreeMap<String, String>,
}

/// A named linear functional of the mean vector, exported as extra CSV
/// columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub name: String,
    pub weights: CVector,
}

impl Coordinate {
    pub fn new(name: impl Into<String>, weights: CVector) -> Self {
        Self { name: name.into(), weights }
    }
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `Σ_j w_j ⟨x_j⟩` at every step.
    pub fn coordinate(&self, weights: &CVector) -> Vec<Complex64> {
        self.means.iter().map(|x| weights.dot(x)).collect()
    }

    /// `wᵀ Σ w̄`, the symmetrised variance of the coordinate `Σ_j w_j x_j`.
    pub fn coordinate_variance(&self, weights: &CVector) -> Option<Vec<f64>> {
        let wc = weights.map(|z| z.conj());
        self.covariances
            .as_ref()
            .map(|covs| covs.iter().map(|s| weights.dot(&(s * &wc)).re).collect())
    }

    /// Largest `‖x[m+i] − conj(x[i])‖` over the whole trajectory.
    pub fn symmetry_defect(&self) -> f64 {
        self.means
            .iter()
            .map(|x| {
                let m = x.len() / 2;
                (0..m).map(|i| (x[m + i] - x[i].conj()).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Largest `‖Σ − Σ†‖` over the stored covariances.
    pub fn hermiticity_defect(&self) -> f64 {
        self.covariances.as_ref().map_or(0.0, |covs| {
            covs.iter()
                .map(|s| crate::linalg::max_abs(&(s - s.adjoint())))
                .fold(0.0, f64::max)
        })
    }

    /// CSV with header `t,re(x1),im(x1),…`, optional covariance columns
    /// `re(S1_1),im(S1_1),…` and `re(name),im(name),abs(name)` per extra
    /// coordinate.
    pub fn write_csv<W: Write>(
        &self,
        mut out: W,
        include_covariance: bool,
        extra: &[Coordinate],
    ) -> io::Result<()> {
        let dim = self.means.first().map_or(0, |x| x.len());
        let covs = if include_covariance { self.covariances.as_ref() } else { None };

        let mut header = vec!["t".to_string()];
        for j in 1..=dim {
            header.push(format!("re(x{j})"));
            header.push(format!("im(x{j})"));
        }
        if covs.is_some() {
            for i in 1..=dim {
                for j in 1..=dim {
                    header.push(format!("re(S{i}_{j})"));
                    header.push(format!("im(S{i}_{j})"));
                }
            }
        }
        for c in extra {
            header.push(format!("re({})", c.name));
            header.push(format!("im({})", c.name));
            header.push(format!("abs({})", c.name));
        }
        writeln!(out, "{}", header.join(","))?;

        let extra_vals: Vec<Vec<Complex64>> = extra.iter().map(|c| self.coordinate(&c.weights)).collect();
        let mut row = String::new();
        for (k, t) in self.times.iter().enumerate() {
            row.clear();
            row.push_str(&t.to_string());
            for z in self.means[k].iter() {
                row.push_str(&format!(",{},{}", z.re, z.im));
            }
            if let Some(covs) = covs {
                let s = &covs[k];
                for i in 0..dim {
                    for j in 0..dim {
                        row.push_str(&format!(",{},{}", s[(i, j)].re, s[(i, j)].im));
                    }
                }
            }
            for vals in &extra_vals {
                let z = vals[k];
                row.push_str(&format!(",{},{},{}", z.re, z.im, z.norm()));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}
