//! Parsers for the command-line value grammar.

use crate::dca::Method;
use crate::spectral::ConstraintClass;

use super::HarnessError;

/// `"96"`, `"60,90,120"` or `"start:step:stop"` (inclusive).
pub fn parse_usize_grid(s: &str) -> Result<Vec<usize>, HarnessError> {
    let s = s.trim();
    let bad = |why: &str| HarnessError::Input(format!("invalid integer grid `{s}`: {why}"));
    let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad("not a non-negative integer"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("ranges are start:step:stop"));
        }
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step == 0 {
            return Err(bad("step must be positive"));
        }
        if stop < start {
            return Err(bad("stop is below start"));
        }
        return Ok((start..=stop).step_by(step).collect());
    }
    let values = s.split(',').map(num).collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(bad("empty"));
    }
    Ok(values)
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, HarnessError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| HarnessError::Input(format!("invalid real `{t}` in `{s}`")))
        })
        .collect()
}

/// SNR levels in dB; `inf` means noiseless.
pub fn parse_snr_list(s: &str) -> Result<Vec<Option<f64>>, HarnessError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("+inf") {
                return Ok(None);
            }
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| HarnessError::Input(format!("invalid SNR `{t}`")))
        })
        .collect()
}

pub fn parse_methods(s: &str) -> Result<Vec<Method>, HarnessError> {
    let mut out = Vec::new();
    for t in s.split(',') {
        let m: Method = t.trim().parse().map_err(|e: crate::Error| HarnessError::Input(e.to_string()))?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    Ok(out)
}

pub fn parse_constraint(s: &str) -> Result<ConstraintClass, HarnessError> {
    s.parse().map_err(|e: crate::Error| HarnessError::Input(e.to_string()))
}
