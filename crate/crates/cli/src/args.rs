//! Parsers for the `--drive` and `--sweep` flag values.

use num_complex::Complex64;
use qnet::dynamics::DriveProfile;

/// `sin:amp=1,freq=2`, `const:amp=0.5`, `pulse:amp=1,start=0,stop=2` or
/// `none`.
pub fn parse_drive(spec: &str) -> Result<Option<DriveProfile>, String> {
    let spec = spec.trim();
    if spec == "none" {
        return Ok(None);
    }
    let (shape, rest) = spec.split_once(':').ok_or_else(|| format!("drive '{spec}' should look like sin:amp=1,freq=2"))?;
    let mut amp = None;
    let mut freq = None;
    let mut start = None;
    let mut stop = None;
    for kv in rest.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected key=value, got '{kv}'"))?;
        let v: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
        if !v.is_finite() {
            return Err(format!("{k} must be finite"));
        }
        let slot = match k.trim() {
            "amp" => &mut amp,
            "freq" => &mut freq,
            "start" => &mut start,
            "stop" => &mut stop,
            other => return Err(format!("unknown drive parameter '{other}'")),
        };
        if slot.replace(v).is_some() {
            return Err(format!("drive parameter '{}' given twice", k.trim()));
        }
    }
    let amp = Complex64::new(amp.ok_or("drive needs amp=")?, 0.0);
    let profile = match shape {
        "const" => DriveProfile::Constant { amplitude: amp },
        "sin" => DriveProfile::Sinusoid { amplitude: amp, frequency: freq.ok_or("sin drive needs freq=")? },
        "pulse" => DriveProfile::Pulse {
            amplitude: amp,
            start: start.unwrap_or(0.0),
            stop: stop.ok_or("pulse drive needs stop=")?,
        },
        other => return Err(format!("unknown drive shape '{other}' (const, sin, pulse)")),
    };
    Ok(Some(profile))
}

pub const SWEEP_PARAMETERS: [&str; 4] = ["omega", "gamma", "gamma_l", "gain"];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub values: Vec<f64>,
}

/// `name=start:stop:count` (inclusive, evenly spaced) or `name=v1,v2,…`.
pub fn parse_sweep(spec: &str) -> Result<SweepSpec, String> {
    let (name, range) = spec.split_once('=').ok_or_else(|| format!("sweep '{spec}' should look like gamma_l=0:2:5"))?;
    let name = name.trim().replace('-', "_");
    if !SWEEP_PARAMETERS.contains(&name.as_str()) {
        return Err(format!("cannot sweep '{name}' (expected one of {})", SWEEP_PARAMETERS.join(", ")));
    }
    let num = |s: &str| -> Result<f64, String> {
        let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("'{s}' is not finite"))
        }
    };
    let values = if range.contains(':') {
        let parts: Vec<&str> = range.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("range '{range}' should be start:stop:count"));
        }
        let (a, b) = (num(parts[0])?, num(parts[1])?);
        let count: usize = parts[2].trim().parse().map_err(|_| format!("'{}' is not a count", parts[2]))?;
        match count {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..count).map(|k| a + (b - a) * k as f64 / (count - 1) as f64).collect(),
        }
    } else {
        range
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(num)
            .collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err("sweep range is empty".into());
    }
    Ok(SweepSpec { name, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drives() {
        assert_eq!(
            parse_drive("sin:amp=1,freq=2").unwrap(),
            Some(DriveProfile::Sinusoid { amplitude: Complex64::new(1.0, 0.0), frequency: 2.0 })
        );
        assert_eq!(parse_drive("none").unwrap(), None);
        assert!(matches!(parse_drive("pulse:amp=1,stop=3").unwrap(), Some(DriveProfile::Pulse { start, .. }) if start == 0.0));
        assert!(parse_drive("sin:amp=1").is_err());
        assert!(parse_drive("square:amp=1").is_err());
        assert!(parse_drive("sin:amp=1,amp=2,freq=1").is_err());
        assert!(parse_drive("sin:amp=x,freq=1").is_err());
        assert!(parse_drive("sin").is_err());
    }

    #[test]
    fn sweeps() {
        let s = parse_sweep("gamma_l=0:2:5").unwrap();
        assert_eq!(s.values, vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        let s = parse_sweep("gamma-l=0,0.5,1,2").unwrap();
        assert_eq!(s.name, "gamma_l");
        assert_eq!(s.values, vec![0.0, 0.5, 1.0, 2.0]);
        assert_eq!(parse_sweep("gamma=0.3:9:1").unwrap().values, vec![0.3]);
        assert!(parse_sweep("gamma_l=0:2:0").is_err());
        assert!(parse_sweep("gamma_l=").is_err());
        assert!(parse_sweep("theta=0:1:2").is_err());
        assert!(parse_sweep("gamma_l=0:1").is_err());
    }
}
