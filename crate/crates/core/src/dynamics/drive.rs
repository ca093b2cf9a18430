use num_complex::Complex64;

use crate::error::{Error, Result};

/// Time profile of a classical field added to an input channel
/// (`b_in → b_in + u(t)`).
#[derive(Debug, Clone, PartialEq)]
pub enum DriveProfile {
    Constant { amplitude: Complex64 },
    /// `amplitude · sin(frequency · t)`, frequency in angular units.
    Sinusoid { amplitude: Complex64, frequency: f64 },
    /// `amplitude` on `[start, stop)`, zero elsewhere.
    Pulse { amplitude: Complex64, start: f64, stop: f64 },
    /// Uniformly sampled from `t = 0`, linearly interpolated, zero past the
    /// last sample.
    Samples { dt: f64, values: Vec<Complex64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drive {
    /// Index into the model's external inputs.
    pub channel: usize,
    pub profile: DriveProfile,
}

impl Drive {
    pub fn new(channel: usize, profile: DriveProfile) -> Self {
        Self { channel, profile }
    }

    pub fn value(&self, t: f64) -> Complex64 {
        match &self.profile {
            DriveProfile::Constant { amplitude } => *amplitude,
            DriveProfile::Sinusoid { amplitude, frequency } => amplitude * (frequency * t).sin(),
            DriveProfile::Pulse { amplitude, start, stop } => {
                if t >= *start && t < *stop {
                    *amplitude
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            DriveProfile::Samples { dt, values } => {
                if values.is_empty() || t < 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let x = t / dt;
                let k = x.floor() as usize;
                if k + 1 < values.len() {
                    let w = x - k as f64;
                    values[k] * (1.0 - w) + values[k + 1] * w
                } else if k + 1 == values.len() && (x - k as f64) < 1e-9 {
                    values[k]
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
        }
    }

    pub(crate) fn validate(&self, horizon: f64, num_inputs: usize) -> Result<()> {
        if self.channel >= num_inputs {
            return Err(Error::InvalidDrive(format!(
                "channel {} out of range ({num_inputs} external inputs)",
                self.channel
            )));
        }
        let finite = |z: &Complex64| z.re.is_finite() && z.im.is_finite();
        match &self.profile {
            DriveProfile::Constant { amplitude } if !finite(amplitude) => {
                Err(Error::InvalidDrive("non-finite amplitude".into()))
            }
            DriveProfile::Sinusoid { amplitude, frequency } if !finite(amplitude) || !frequency.is_finite() => {
                Err(Error::InvalidDrive("non-finite sinusoid parameters".into()))
            }
            DriveProfile::Pulse { amplitude, start, stop } => {
                if !finite(amplitude) || !(0.0 <= *start && start < stop && *start <= horizon) {
                    Err(Error::InvalidDrive(format!("pulse support [{start}, {stop}) not within [0, {horizon}]")))
                } else {
                    Ok(())
                }
            }
            DriveProfile::Samples { dt, values } => {
                if !(dt.is_finite() && *dt > 0.0) || values.iter().any(|z| !finite(z)) {
                    Err(Error::InvalidDrive("samples need dt > 0 and finite values".into()))
                } else if values.len() > 1 && (values.len() - 1) as f64 * dt > horizon * (1.0 + 1e-12) {
                    Err(Error::InvalidDrive("samples extend past the horizon".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }
}
