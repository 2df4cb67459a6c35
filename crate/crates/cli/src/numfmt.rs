//! Number parsing and fixed-precision formatting shared by the file formats
//! and the command line.

/// Significant figures used in reports.
pub const REPORT_SIG_FIGS: usize = 6;

/// Formats `x` with `sig` significant figures, `%g` style: scientific notation
/// when the decimal exponent is below -4 or at least `sig`, trailing zeros
/// trimmed. Exponents carry no `+` or leading zeros (`1.5e22`, `2e-7`).
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sig = sig.max(1);
    // Round first, then read the exponent, so 9.999995 becomes 1e1 not 10.0000e0.
    let sci = format!("{:.*e}", sig - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= sig as i32 {
        format!("{}e{}", trim_zeros(mantissa), exp)
    } else {
        let decimals = (sig as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

/// Report formatting: six significant figures.
pub fn fmt6(x: f64) -> String {
    fmt_sig(x, REPORT_SIG_FIGS)
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Parses a finite real. Accepts decimal and scientific notation.
pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() || s.chars().any(|c| c.is_ascii_alphabetic() && c != 'e' && c != 'E') {
        return None;
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Parses a non-negative integer written either as digits or in scientific
/// notation with an integral value (`375e6`, `2.2e9`).
pub fn parse_count(s: &str) -> Option<u128> {
    let s = s.trim();
    if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) {
        return s.parse().ok();
    }
    let v = parse_real(s)?;
    if v < 0.0 || v.fract() != 0.0 || v >= u128::MAX as f64 {
        return None;
    }
    Some(v as u128)
}
