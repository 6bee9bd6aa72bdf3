use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub label: String,
}

pub fn check_times(times: &[f64]) -> Result<()> {
    let ok = times.first().is_none_or(|t| *t >= 0.0 && t.is_finite())
        && times.windows(2).all(|w| w[1] > w[0] && w[1].is_finite());
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidTimeGrid)
    }
}

/// `samples` equally spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, samples: usize) -> Result<Vec<f64>> {
    if !(t_max > 0.0 && t_max.is_finite()) || samples < 2 {
        return Err(Error::InvalidTimeGrid);
    }
    let step = t_max / (samples - 1) as f64;
    Ok((0..samples)
        .map(|i| {
            if i + 1 == samples {
                t_max
            } else {
                i as f64 * step
            }
        })
        .collect())
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        check_times(&times)?;
        if times.len() != values.len() {
            return Err(Error::InvalidTimeGrid);
        }
        Ok(TimeSeries {
            times,
            values,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_abs_drift(&self) -> f64 {
        let Some(first) = self.values.first() else {
            return 0.0;
        };
        self.values
            .iter()
            .map(|v| (v - first).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        csv_columns(&["t", &self.label], &[&self.times, &self.values])
    }
}

/// CSV with a header row; all columns must have equal length.
pub fn csv_columns(headers: &[&str], columns: &[&[f64]]) -> String {
    let mut out = headers.join(",");
    out.push('\n');
    let rows = columns.first().map_or(0, |c| c.len());
    for r in 0..rows {
        for (i, col) in columns.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&format_g12(col[r]));
        }
        out.push('\n');
    }
    out
}

/// Shortest `%g`-style rendering with 12 significant digits. Negative zero
/// prints as `0` so that output bytes do not depend on rounding noise sign.
pub fn format_g12(v: f64) -> String {
    const DIGITS: i32 = 12;
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if mantissa.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        return "0".into();
    }
    let mut out = String::new();
    if (-4..DIGITS).contains(&exp) {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        out.push_str(strip_zeros(&format!("{v:.decimals$}")));
    } else {
        out.push_str(strip_zeros(mantissa));
        let sign = if exp < 0 { '-' } else { '+' };
        let _ = write!(out, "e{sign}{:02}", exp.abs());
    }
    if out == "-0" {
        out = "0".into();
    }
    out
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}
