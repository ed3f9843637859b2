//! Fixed significant-digit float formatting for CSV and JSON output.

use serde_json::Value;

/// Formats like C's `%.{digits}g`.
pub fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if exp < -5 || exp >= digits as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Nine significant digits, the precision used for every emitted artifact.
pub fn sig9(x: f64) -> String {
    sig(x, 9)
}

/// Rounds `x` to nine significant digits.
pub fn round9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    sig9(x).parse().unwrap_or(x)
}

/// Recursively rounds every floating-point number in a JSON tree to nine significant
/// digits, so serialized reports are stable across platforms.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if n.is_f64() {
                if let Some(x) = n.as_f64() {
                    if let Some(r) = serde_json::Number::from_f64(round9(x)) {
                        *n = r;
                    }
                }
            }
        }
        Value::Array(a) => a.iter_mut().for_each(round_json),
        Value::Object(o) => o.values_mut().for_each(round_json),
        _ => {}
    }
}
