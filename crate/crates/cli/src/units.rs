//! Unit-suffix parsing for command-line values.
//!
//! Frequencies normalize to MHz, times to ns, magnetic fields to Gauss.
//! A bare number means the base unit (MHz, ns, G). Suffixes are matched
//! case-insensitively and may be separated from the number by spaces.

fn split_suffix(input: &str) -> (&str, String) {
    let trimmed = input.trim();
    let boundary = trimmed
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic() || *c == '\u{b5}')
        .last()
        .map_or(trimmed.len(), |(i, _)| i);
    let (number, suffix) = trimmed.split_at(boundary);
    (number.trim(), suffix.to_lowercase())
}

fn parse_with_units(
    input: &str,
    kind: &str,
    units: &[(&str, f64)],
) -> Result<f64, String> {
    let (number, suffix) = split_suffix(input);
    let value: f64 = number
        .parse()
        .map_err(|_| format!("`{input}` is not a number with an optional {kind} unit"))?;
    let scale = units
        .iter()
        .find(|(name, _)| *name == suffix)
        .map(|&(_, s)| s)
        .ok_or_else(|| {
            let known: Vec<&str> = units.iter().map(|&(n, _)| n).filter(|n| !n.is_empty()).collect();
            format!(
                "unknown {kind} unit `{suffix}` in `{input}` (accepted: {})",
                known.join(", ")
            )
        })?;
    let scaled = value * scale;
    if !scaled.is_finite() {
        return Err(format!("`{input}` is out of range"));
    }
    Ok(scaled)
}

/// Frequency in MHz; accepts Hz, kHz, MHz, GHz, THz suffixes.
pub fn freq_mhz(input: &str) -> Result<f64, String> {
    parse_with_units(
        input,
        "frequency",
        &[
            ("", 1.0),
            ("hz", 1e-6),
            ("khz", 1e-3),
            ("mhz", 1.0),
            ("ghz", 1e3),
            ("thz", 1e6),
        ],
    )
}

/// Time in ns; accepts ns, us (or µs), ms, s suffixes.
pub fn time_ns(input: &str) -> Result<f64, String> {
    parse_with_units(
        input,
        "time",
        &[
            ("", 1.0),
            ("ns", 1.0),
            ("us", 1e3),
            ("\u{b5}s", 1e3),
            ("ms", 1e6),
            ("s", 1e9),
        ],
    )
}

/// Magnetic field in Gauss; accepts G or Gauss suffixes.
pub fn field_gauss(input: &str) -> Result<f64, String> {
    parse_with_units(input, "field", &[("", 1.0), ("g", 1.0), ("gauss", 1.0)])
}

/// `key=value` pair with a numeric value, for `--init`.
pub fn key_value(input: &str) -> Result<(String, f64), String> {
    let (key, value) = input
        .split_once('=')
        .ok_or_else(|| format!("`{input}` is not of the form key=value"))?;
    let value: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("`{input}`: value is not a number"))?;
    Ok((key.trim().to_string(), value))
}

/// `min,max,step` triple for field sweeps.
pub fn sweep_triple(input: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = input.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("`{input}` is not of the form min,max,step"));
    }
    let mut values = [0.0_f64; 3];
    for (slot, part) in values.iter_mut().zip(&parts) {
        *slot = part
            .parse()
            .map_err(|_| format!("`{part}` in `{input}` is not a number"))?;
    }
    let [min, max, step] = values;
    if !step.is_finite() || step <= 0.0 {
        return Err(format!("sweep step must be positive, got {step}"));
    }
    if max < min {
        return Err(format!("sweep max {max} below min {min}"));
    }
    Ok((min, max, step))
}

/// Inclusive grid from a `(min, max, step)` triple.
pub fn sweep_grid((min, max, step): (f64, f64, f64)) -> Vec<f64> {
    let n = ((max - min) / step).round() as usize + 1;
    (0..n)
        .map(|k| min + step * k as f64)
        .filter(|&v| v <= max + step * 1e-9)
        .collect()
}

/// Evenly spaced grid with `points` samples across `[from, to]`.
pub fn linspace(from: f64, to: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![from];
    }
    let step = (to - from) / (points - 1) as f64;
    (0..points).map(|k| from + step * k as f64).collect()
}
