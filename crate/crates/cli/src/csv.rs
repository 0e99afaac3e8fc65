//! Fixed CSV schema for sweep results.

use std::fmt::Write as _;

pub const HEADER: &str = "snr_db,scheme,rate,iterations,termination,feasibility_residual,zf_residual,status,wall_ms";

/// Significant digits for every floating-point field.
pub const SIG_DIGITS: usize = 12;

/// `%g`-style rendering with [`SIG_DIGITS`] significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS as i32).contains(&exp) {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t == "-0" { "0".into() } else { t.into() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub snr_db: f64,
    pub scheme: &'static str,
    pub rate: Option<f64>,
    pub iterations: Option<usize>,
    pub termination: Option<&'static str>,
    pub feasibility_residual: Option<f64>,
    pub zf_residual: Option<f64>,
    pub status: &'static str,
    pub wall_ms: Option<f64>,
    /// Diagnostic for stderr; not written to the CSV.
    pub note: Option<String>,
}

impl Row {
    pub fn new(snr_db: f64, scheme: &'static str, status: &'static str) -> Self {
        Self {
            snr_db,
            scheme,
            rate: None,
            iterations: None,
            termination: None,
            feasibility_residual: None,
            zf_residual: None,
            status,
            wall_ms: None,
            note: None,
        }
    }

    pub fn line(&self) -> String {
        let num = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig(self.snr_db),
            self.scheme,
            num(self.rate),
            self.iterations.map(|k| k.to_string()).unwrap_or_default(),
            self.termination.unwrap_or_default(),
            num(self.feasibility_residual),
            num(self.zf_residual),
            self.status,
            self.wall_ms.map(|ms| format!("{ms:.3}")).unwrap_or_default(),
        )
    }
}

pub fn render(rows: &[Row]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.line());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(5.0), "5");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_sig(2.0 / 3.0 * 1e3), "666.666666667");
        assert_eq!(fmt_sig(1.5e-9), "1.5e-9");
        assert_eq!(fmt_sig(-1.234567890123456e20), "-1.23456789012e20");
        assert_eq!(fmt_sig(123456789012.4), "123456789012");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        for x in [std::f64::consts::PI, 7.155712345e-3, 1e-300, 42.0] {
            let back: f64 = fmt_sig(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-11, "{x}");
        }
    }

    #[test]
    fn blank_fields_and_header() {
        let mut r = Row::new(30.0, "sc-zf", "AllZFInfeasible");
        r.iterations = Some(0);
        let text = render(&[r]);
        assert_eq!(text, format!("{HEADER}\n30,sc-zf,,0,,,,AllZFInfeasible,\n"));
        assert_eq!(HEADER.split(',').count(), 9);
    }
}
