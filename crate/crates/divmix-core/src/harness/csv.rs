//! CSV output with 6 significant digits.

/// `%.6g`-style formatting: 6 significant digits, trailing zeros trimmed.
pub fn fmt6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mant, exp) = sci.split_once('e').unwrap();
    let e: i32 = exp.parse().unwrap();
    if (-5..6).contains(&e) {
        let s = format!("{:.*}", (5 - e).max(0) as usize, v);
        trim(&s)
    } else {
        format!("{}e{}{:02}", trim(mant), if e < 0 { "-" } else { "+" }, e.abs())
    }
}

fn trim(s: &str) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s.to_string()
    }
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::fmt6;

    #[test]
    fn six_digits() {
        assert_eq!(fmt6(0.5), "0.5");
        assert_eq!(fmt6(3.14159265), "3.14159");
        assert_eq!(fmt6(-1234567.0), "-1.23457e+06");
        assert_eq!(fmt6(1.0e-7), "1e-07");
        assert_eq!(fmt6(100.0), "100");
        assert_eq!(fmt6(0.000123456789), "0.000123457");
        assert_eq!(fmt6(999999.5), "1e+06");
    }
}
