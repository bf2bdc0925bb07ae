//! Key-value result reports.
//!
//! Every command prints its results in this one format: `key = value`
//! lines in insertion order, floats with 17 significant digits so a
//! report can be parsed back (or diffed) without loss, `#` comments for
//! section headings. Keeping the renderer in one place keeps outputs
//! uniform across subcommands.

use crate::fit::FitResult;

#[derive(Debug, Clone, PartialEq)]
enum Line {
    Comment(String),
    Float(String, f64),
    Int(String, i64),
    Text(String, String),
}

/// An ordered list of report lines; render with [`Report::to_text`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<Line>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        self.lines.push(Line::Comment(text.to_string()));
        self
    }

    pub fn float(&mut self, key: &str, value: f64) -> &mut Self {
        self.lines.push(Line::Float(key.to_string(), value));
        self
    }

    pub fn int(&mut self, key: &str, value: i64) -> &mut Self {
        self.lines.push(Line::Int(key.to_string(), value));
        self
    }

    pub fn text(&mut self, key: &str, value: &str) -> &mut Self {
        self.lines
            .push(Line::Text(key.to_string(), value.to_string()));
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for line in &self.lines {
            match line {
                Line::Comment(text) => out.push_str(&format!("# {text}\n")),
                Line::Float(key, value) => out.push_str(&format!("{key} = {value:.16e}\n")),
                Line::Int(key, value) => out.push_str(&format!("{key} = {value}\n")),
                Line::Text(key, value) => out.push_str(&format!("{key} = {value}\n")),
            }
        }
        out
    }
}

/// Standard rendering of a fit: model, convergence, each parameter with
/// its confidence half-width, derived quantities, and residual summary.
pub fn fit_report(result: &FitResult) -> Report {
    let mut report = Report::new();
    report.text("model", result.model.name());
    report.text("converged", if result.converged { "true" } else { "false" });
    report.int("iterations", result.iterations as i64);
    let ci_suffix = result.ci_level.label();
    for ((name, &value), &half) in result
        .param_names()
        .iter()
        .zip(&result.params)
        .zip(&result.ci)
    {
        report.float(name, value);
        report.float(&format!("{name}_{ci_suffix}"), half);
    }
    for &(name, value) in &result.derived {
        report.float(name, value);
    }
    report.float("residual_rms", result.residual_rms);
    if let Some(chi2) = result.reduced_chi2 {
        report.float("reduced_chi2", chi2);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_in_insertion_order() {
        let mut report = Report::new();
        report
            .comment("purcell factor")
            .float("factor", 48.0)
            .int("routes", 3)
            .text("flagged", "false");
        let text = report.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# purcell factor");
        assert_eq!(lines[1], "factor = 4.8000000000000000e1");
        assert_eq!(lines[2], "routes = 3");
        assert_eq!(lines[3], "flagged = false");
    }

    #[test]
    fn floats_round_trip_through_the_report() {
        let value = std::f64::consts::PI * 1e-7;
        let mut report = Report::new();
        report.float("x", value);
        let text = report.to_text();
        let rendered = text.split(" = ").nth(1).unwrap().trim();
        let back: f64 = rendered.parse().unwrap();
        assert_eq!(back, value);
    }

    #[test]
    fn fit_report_lists_every_parameter_with_interval() {
        use crate::fit::{fit, DataSeries, FitOptions, ModelId, ModelSpec, SeriesMetadata};
        let x: Vec<f64> = (0..60).map(|k| 0.5 * k as f64).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| ModelId::ExpDecay.eval(&[2.0, 6.0, 0.1], v))
            .collect();
        let data = DataSeries::new(x, y, None, SeriesMetadata::default()).unwrap();
        let result = fit(
            &ModelSpec::new(ModelId::ExpDecay),
            &data,
            None,
            &FitOptions::default(),
        )
        .unwrap();
        let text = fit_report(&result).to_text();
        assert!(text.contains("model = exp_decay"), "{text}");
        assert!(text.contains("converged = true"), "{text}");
        for name in ["amplitude", "tau", "baseline"] {
            assert!(text.contains(&format!("\n{name} = ")), "{text}");
            assert!(text.contains(&format!("{name}_ci95 = ")), "{text}");
        }
        assert!(text.contains("residual_rms"), "{text}");
        assert!(!text.contains("reduced_chi2"), "{text}");
    }
}
