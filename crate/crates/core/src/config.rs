//! Optional `key = value` configuration files.
//!
//! The grammar is one assignment per line, `#` comments, blank lines
//! ignored, last assignment wins. Every key is optional; consumers fall
//! back to built-in defaults for anything unset, and command-line flags
//! override both. Unknown keys are rejected with a nearest-match
//! suggestion rather than silently ignored, since a typo here would
//! otherwise change physics defaults without a trace.

use std::path::Path;

use crate::{Error, Result};

/// Settings a config file may override. `None` means "not set here".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    /// Intrinsic fraction of emission in the zero-phonon line.
    pub alpha: Option<f64>,
    /// Relative spread above which Purcell cross-checks are flagged.
    pub consistency_threshold: Option<f64>,
    /// Gyromagnetic ratio in MHz per Gauss.
    pub gyromagnetic_mhz_per_g: Option<f64>,
    /// Axial zero-field splitting in MHz.
    pub d_mhz: Option<f64>,
    /// Transverse zero-field splitting in MHz.
    pub e_mhz: Option<f64>,
    /// ODMR line full width at half maximum in MHz.
    pub linewidth_mhz: Option<f64>,
    /// Base seed for stochastic commands.
    pub seed: Option<u64>,
}

const KEYS: &[&str] = &[
    "alpha",
    "consistency_threshold",
    "gyromagnetic_mhz_per_g",
    "d_mhz",
    "e_mhz",
    "linewidth_mhz",
    "seed",
];

fn suggest(key: &str) -> String {
    KEYS.iter()
        .map(|k| (strsim::levenshtein(key, k), k))
        .min()
        .filter(|&(d, _)| d <= 3)
        .map(|(_, k)| format!("; did you mean `{k}`?"))
        .unwrap_or_default()
}

fn parse_positive(line_no: usize, key: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| {
        Error::Config(format!(
            "line {line_no}: `{key}` expects a number, got `{value}`"
        ))
    })?;
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::Config(format!(
            "line {line_no}: `{key}` must be positive, got {v}"
        )));
    }
    Ok(v)
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                )));
            };
            let key = key.trim();
            let value = value.trim();
            match key {
                "alpha" => {
                    let v = parse_positive(line_no, key, value)?;
                    if v >= 1.0 {
                        return Err(Error::Config(format!(
                            "line {line_no}: `alpha` is a fraction and must lie in (0, 1), got {v}"
                        )));
                    }
                    config.alpha = Some(v);
                }
                "consistency_threshold" => {
                    config.consistency_threshold = Some(parse_positive(line_no, key, value)?);
                }
                "gyromagnetic_mhz_per_g" => {
                    config.gyromagnetic_mhz_per_g = Some(parse_positive(line_no, key, value)?);
                }
                "d_mhz" | "e_mhz" => {
                    let v: f64 = value.parse().map_err(|_| {
                        Error::Config(format!(
                            "line {line_no}: `{key}` expects a number, got `{value}`"
                        ))
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Config(format!(
                            "line {line_no}: `{key}` must be finite"
                        )));
                    }
                    if key == "d_mhz" {
                        config.d_mhz = Some(v);
                    } else {
                        config.e_mhz = Some(v);
                    }
                }
                "linewidth_mhz" => {
                    config.linewidth_mhz = Some(parse_positive(line_no, key, value)?);
                }
                "seed" => {
                    config.seed = Some(value.parse().map_err(|_| {
                        Error::Config(format!(
                            "line {line_no}: `seed` expects a non-negative integer, got `{value}`"
                        ))
                    })?);
                }
                unknown => {
                    return Err(Error::Config(format!(
                        "line {line_no}: unknown key `{unknown}`{}",
                        suggest(unknown)
                    )));
                }
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_assignments_comments_and_blanks() {
        let text = "\n# defaults for the bulk sample\nalpha = 0.053\nd_mhz = 1336 # bulk\nseed=42\n";
        let config = Config::parse(text).unwrap();
        assert_eq!(config.alpha, Some(0.053));
        assert_eq!(config.d_mhz, Some(1336.0));
        assert_eq!(config.seed, Some(42));
        assert_eq!(config.e_mhz, None);
    }

    #[test]
    fn last_assignment_wins() {
        let config = Config::parse("seed = 1\nseed = 2\n").unwrap();
        assert_eq!(config.seed, Some(2));
    }

    #[test]
    fn unknown_key_suggests_nearest() {
        let msg = Config::parse("alpah = 0.05\n").unwrap_err().to_string();
        assert!(msg.contains("unknown key `alpah`"), "{msg}");
        assert!(msg.contains("did you mean `alpha`?"), "{msg}");
    }

    #[test]
    fn unknown_key_without_a_close_match() {
        let msg = Config::parse("pressure_mbar = 1\n").unwrap_err().to_string();
        assert!(msg.contains("unknown key"), "{msg}");
        assert!(!msg.contains("did you mean"), "{msg}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::parse("alpha = 1.5\n").is_err());
        assert!(Config::parse("alpha = -0.1\n").is_err());
        assert!(Config::parse("seed = -3\n").is_err());
        assert!(Config::parse("linewidth_mhz = zero\n").is_err());
        assert!(Config::parse("just some words\n").is_err());
    }

    #[test]
    fn error_names_the_line() {
        let msg = Config::parse("alpha = 0.05\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }
}
