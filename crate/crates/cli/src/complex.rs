//! `a+bi` / `a-bi` literals.

use monoconv::Complex64;

/// Parses `a+bi` or `a-bi` with decimal `a` and `b`; errors give a 0-based
/// character position.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let body = text
        .strip_suffix('i')
        .ok_or_else(|| format!("position {}: complex literal must end in `i`", text.chars().count()))?;
    // The sign separating the parts: the last `+`/`-` that is not leading and
    // does not belong to an exponent.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| matches!(bytes[i], b'+' | b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
        .ok_or_else(|| "position 0: expected `a+bi` or `a-bi`".to_string())?;
    let (re_text, im_text) = body.split_at(split);
    let re = decimal(re_text).ok_or_else(|| format!("position 0: invalid real part `{re_text}`"))?;
    let im = decimal(im_text).ok_or_else(|| format!("position {split}: invalid imaginary part `{im_text}`"))?;
    Ok(Complex64::new(re, im))
}

fn decimal(text: &str) -> Option<f64> {
    let digits = text.trim_start_matches(['+', '-']);
    let ok = !digits.is_empty()
        && digits.starts_with(|c: char| c.is_ascii_digit() || c == '.')
        && text.len() - digits.len() <= 1;
    if !ok {
        return None;
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}
