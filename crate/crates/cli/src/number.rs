//! Numeric flag parsing: plain, scientific and SI-suffixed (`7B`, `4.26T`).

const SUFFIXES: [(char, f64); 4] = [('K', 1e3), ('M', 1e6), ('B', 1e9), ('T', 1e12)];

pub fn parse_number(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let (body, scale) = match text.chars().last() {
        Some(last) => match SUFFIXES
            .iter()
            .find(|(s, _)| *s == last.to_ascii_uppercase())
        {
            Some(&(_, scale)) => (&text[..text.len() - 1], scale),
            None => (text, 1.0),
        },
        None => return Err("empty value".into()),
    };
    let value: f64 = body
        .parse()
        .map_err(|_| format!("'{text}' is not a number (plain, 1e9 or 1B style)"))?;
    let value = value * scale;
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("'{text}' is not finite"))
    }
}

pub fn positive(text: &str) -> Result<f64, String> {
    let v = parse_number(text)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be > 0, got {text}"))
    }
}

pub fn non_negative(text: &str) -> Result<f64, String> {
    let v = parse_number(text)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be >= 0, got {text}"))
    }
}
