//! Human-readable rendering at three significant figures.

const SUFFIXES: [(f64, &str); 4] = [(1e12, "T"), (1e9, "B"), (1e6, "M"), (1e3, "K")];

/// Three significant figures with a K/M/B/T suffix: `41.6B`, `7.92T`.
pub fn si(value: f64) -> String {
    if !value.is_finite() {
        return value.to_string();
    }
    let abs = value.abs();
    for (scale, suffix) in SUFFIXES {
        // Round first so 999.96e9 renders as 1.00T, not 1000B.
        if round_sig(abs, 3) >= scale * (1.0 - 1e-12) {
            return format!("{}{suffix}", sig3(value / scale));
        }
    }
    sig3(value)
}

/// Scientific notation with three significant figures: `3.19e24`.
pub fn sci(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return value.to_string();
    }
    format!("{value:.2e}")
}

pub fn percent(fraction: f64) -> String {
    format!("{}%", sig3(fraction * 100.0))
}

fn round_sig(value: f64, digits: i32) -> f64 {
    if value == 0.0 {
        return 0.0;
    }
    let mag = value.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - mag);
    (value * factor).round() / factor
}

/// Three significant figures without exponent, trailing zeros kept.
pub fn sig3(value: f64) -> String {
    if value == 0.0 {
        return "0".into();
    }
    let rounded = round_sig(value, 3);
    let mag = rounded.abs().log10().floor() as i32;
    let decimals = (2 - mag).max(0) as usize;
    format!("{rounded:.decimals$}")
}
