//! Number formatting for TSV output.

/// Six significant digits, ties to even, `%g` layout: plain notation for decimal
/// exponents in [-4, 6), scientific otherwise, trailing zeros dropped.
pub fn g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Rust rounds exact ties to even when formatting with a precision.
    let e = format!("{:.5e}", x);
    let (mant, exp) = e.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if !(-4..6).contains(&exp) {
        let d = digits.trim_end_matches('0');
        out.push_str(&d[..1]);
        if d.len() > 1 {
            out.push('.');
            out.push_str(&d[1..]);
        }
        out.push('e');
        out.push(if exp < 0 { '-' } else { '+' });
        out.push_str(&format!("{:02}", exp.abs()));
        return out;
    }
    let s = if exp >= 0 {
        let k = exp as usize + 1;
        let (int, frac) = digits.split_at(k);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            int.to_string()
        } else {
            format!("{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("0.{zeros}{}", digits.trim_end_matches('0'))
    };
    out.push_str(&s);
    out
}

/// `g6` for optional values, `NA` when absent.
pub fn g6_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), g6)
}

#[cfg(test)]
mod tests {
    use super::g6;

    #[test]
    fn layouts() {
        assert_eq!(g6(27.2), "27.2");
        assert_eq!(g6(8.704), "8.704");
        assert_eq!(g6(0.0052219321), "0.00522193");
        assert_eq!(g6(123456.7), "123457");
        assert_eq!(g6(1234567.0), "1.23457e+06");
        assert_eq!(g6(0.00001234), "1.234e-05");
        assert_eq!(g6(-0.5), "-0.5");
        assert_eq!(g6(1.0), "1");
        assert_eq!(g6(100.0), "100");
    }

    #[test]
    fn ties_go_to_even() {
        assert_eq!(g6(123456.5), "123456");
        assert_eq!(g6(123457.5), "123458");
        assert_eq!(g6(1234.5625), "1234.56");
        assert_eq!(g6(0.0009765625), "0.000976562");
    }
}
