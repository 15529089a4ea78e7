//! CSV bodies and `key = value` summaries for analysis reports.
//!
//! Floats are written with Rust's shortest round-trip formatting (exponent
//! form for very large or small magnitudes), so output is byte-stable across
//! runs.

use std::io::{self, Write};

use super::convergence::ConvergenceReport;
use super::temperature::TemperatureSeries;

/// One row of `invariants.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantRow {
    pub check: String,
    pub statistic: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl InvariantRow {
    /// A row passing when `value ≤ tolerance`.
    pub fn at_most(check: impl Into<String>, statistic: impl Into<String>, value: f64, tolerance: f64) -> Self {
        InvariantRow {
            check: check.into(),
            statistic: statistic.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }

    /// An informational row that always passes.
    pub fn info(check: impl Into<String>, statistic: impl Into<String>, value: f64) -> Self {
        InvariantRow {
            check: check.into(),
            statistic: statistic.into(),
            value,
            tolerance: f64::INFINITY,
            pass: true,
        }
    }
}

pub fn write_invariants_csv<W: Write>(mut w: W, rows: &[InvariantRow]) -> io::Result<()> {
    writeln!(w, "check,statistic,value,tolerance,pass")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:?},{:?},{}",
            r.check, r.statistic, r.value, r.tolerance, r.pass
        )?;
    }
    Ok(())
}

pub fn write_convergence_csv<W: Write>(mut w: W, report: &ConvergenceReport) -> io::Result<()> {
    writeln!(w, "h,ms_error")?;
    for (h, e) in report.step_sizes.iter().zip(&report.ms_errors) {
        writeln!(w, "{h:?},{e:?}")?;
    }
    Ok(())
}

pub fn write_temperature_csv<W: Write>(mut w: W, series: &[TemperatureSeries]) -> io::Result<()> {
    writeln!(w, "t,method,mean_kinetic")?;
    for s in series {
        for (t, k) in s.times.iter().zip(&s.mean_kinetic) {
            writeln!(w, "{t:?},{},{k:?}", s.method)?;
        }
    }
    Ok(())
}

/// Cumulative time average of each series, in the same layout as
/// [`write_temperature_csv`].
pub fn write_time_averaged_csv<W: Write>(mut w: W, series: &[TemperatureSeries]) -> io::Result<()> {
    writeln!(w, "t,method,time_averaged_kinetic")?;
    for s in series {
        let avg = super::stats::running_average(&s.mean_kinetic);
        for (t, k) in s.times.iter().zip(&avg) {
            writeln!(w, "{t:?},{},{k:?}", s.method)?;
        }
    }
    Ok(())
}

/// `(key, value)` summary entries for a convergence report.
pub fn convergence_summary(report: &ConvergenceReport) -> Vec<(String, String)> {
    let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| v.to_string());
    vec![
        ("method".into(), report.method.to_string()),
        ("fitted_slope".into(), opt(report.fitted_slope)),
        ("intercept".into(), opt(report.intercept)),
        ("exact".into(), report.exact.to_string()),
        ("paths".into(), report.paths.to_string()),
        ("reference_levels".into(), report.reference_levels.to_string()),
        ("error_norm".into(), report.norm.name().to_string()),
        ("error_constant".into(), report.error_constant().to_string()),
    ]
}

pub fn temperature_summary(series: &TemperatureSeries) -> Vec<(String, String)> {
    let m = series.method.name();
    vec![
        (format!("{m}.time_average"), series.time_average.to_string()),
        (format!("{m}.target"), series.target.to_string()),
        (format!("{m}.relative_error"), series.relative_error().to_string()),
        (format!("{m}.trend"), series.trend.to_string()),
        (format!("{m}.noise_digest"), format!("{:016x}", series.noise_digest)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrators::{ErrorNorm, Method};

    #[test]
    fn convergence_csv_schema() {
        let rep = ConvergenceReport {
            method: Method::Svi,
            step_sizes: vec![0.5, 0.25],
            ms_errors: vec![0.1, 0.05],
            fitted_slope: Some(1.0),
            intercept: Some(-2.3),
            paths: 4,
            reference_levels: 6,
            norm: ErrorNorm::PhaseSpace,
            exact: false,
        };
        let mut out = Vec::new();
        write_convergence_csv(&mut out, &rep).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "h,ms_error\n0.5,0.1\n0.25,0.05\n");
        let summary = convergence_summary(&rep);
        assert!(summary.contains(&("fitted_slope".to_string(), "1".to_string())));
    }

    #[test]
    fn invariant_rows() {
        let mut out = Vec::new();
        write_invariants_csv(&mut out, &[InvariantRow::at_most("noether", "max_drift", 2e-13, 1e-12)]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "check,statistic,value,tolerance,pass\nnoether,max_drift,2e-13,1e-12,true\n"
        );
    }
}
