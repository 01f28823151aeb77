//! Decimal-exact rounding helpers.
//!
//! Rounding works on the shortest round-trip decimal rendering of an `f64`
//! rather than on scaled binary values, so `2.675` rounds to `2.68` the way
//! a reader of the CSV would expect.

/// Rounds `value` half-away-from-zero to `places` decimal places. Negative
/// `places` round to tens, hundreds, and so on.
pub fn round_decimal(value: f64, places: i32) -> f64 {
    if !value.is_finite() || value == 0.0 {
        return value;
    }
    let repr = format!("{}", value.abs());
    let (int_part, frac_part) = repr.split_once('.').unwrap_or((repr.as_str(), ""));
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes())
        .map(|b| b - b'0')
        .collect();
    let mut point = int_part.len() as i64;
    let keep = point + i64::from(places);
    if keep >= digits.len() as i64 {
        return value;
    }
    if keep < 0 {
        return 0.0;
    }
    let keep = keep as usize;
    let round_up = digits[keep] >= 5;
    digits.truncate(keep);
    if round_up {
        let mut i = keep;
        loop {
            if i == 0 {
                digits.insert(0, 1);
                point += 1;
                break;
            }
            i -= 1;
            if digits[i] == 9 {
                digits[i] = 0;
            } else {
                digits[i] += 1;
                break;
            }
        }
    }
    let point = point as usize;
    while digits.len() < point {
        digits.push(0);
    }
    let mut text = String::with_capacity(digits.len() + 2);
    for (i, d) in digits.iter().enumerate() {
        if i == point {
            text.push('.');
        }
        text.push(char::from(b'0' + d));
    }
    if text.is_empty() {
        return 0.0;
    }
    let rounded: f64 = text.parse().unwrap_or(0.0);
    rounded.copysign(value)
}

/// Number of digits after the decimal point in the shortest rendering of `value`.
pub fn decimals_of(value: f64) -> u32 {
    let repr = format!("{}", value.abs());
    repr.split_once('.').map_or(0, |(_, frac)| frac.len() as u32)
}

/// If `unit` is an exact power of ten, returns the equivalent decimal places
/// (`1000` gives `-3`, `0.01` gives `2`).
pub fn power_of_ten_places(unit: f64) -> Option<i32> {
    if !(unit.is_finite() && unit > 0.0) {
        return None;
    }
    let exponent = unit.log10().round() as i32;
    let candidate: f64 = format!("1e{exponent}").parse().ok()?;
    (candidate == unit).then_some(-exponent)
}

/// Rounds `value` to the nearest multiple of `unit`, half-away-from-zero.
pub fn round_to_unit(value: f64, unit: f64) -> f64 {
    if let Some(places) = power_of_ten_places(unit) {
        return round_decimal(value, places);
    }
    let multiples = round_decimal(value / unit, 0);
    round_decimal(multiples * unit, decimals_of(unit) as i32)
}

/// True when `value` already sits on the grid of multiples of `unit`.
pub fn on_grid(value: f64, unit: f64) -> bool {
    let rounded = round_to_unit(value, unit);
    (rounded - value).abs() <= 1e-9 * value.abs().max(1.0)
}

/// Grid spacing implied by a decimal-places precision.
pub fn unit_for_places(places: u32) -> f64 {
    format!("1e-{places}").parse().unwrap_or(1.0)
}

/// Counts decimals in a textual number such as `12.50` or `1.5e-3`.
pub fn text_decimals(text: &str) -> u32 {
    let (mantissa, exponent) = match text.find(['e', 'E']) {
        Some(idx) => (&text[..idx], text[idx + 1..].parse::<i64>().unwrap_or(0)),
        None => (text, 0),
    };
    let frac = mantissa.split_once('.').map_or(0, |(_, f)| f.len() as i64);
    (frac - exponent).max(0) as u32
}

/// Parses a plain decimal number (optional sign, digits, optional fraction,
/// optional exponent). Rejects `inf`, `nan` and hex forms that `f64::from_str`
/// would otherwise accept.
pub fn parse_plain_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return None;
    }
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        i += 1;
        if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
            i += 1;
        }
        let start = i;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return None;
        }
    }
    if i != bytes.len() {
        return None;
    }
    text.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_half_away_from_zero() {
        assert_eq!(round_decimal(2.5, 0), 3.0);
        assert_eq!(round_decimal(-2.5, 0), -3.0);
        assert_eq!(round_decimal(2.675, 2), 2.68);
        assert_eq!(round_decimal(0.0012, 3), 0.001);
        assert_eq!(round_decimal(9.99, 1), 10.0);
    }

    #[test]
    fn rounds_to_thousands() {
        assert_eq!(round_to_unit(12345.0, 1000.0), 12000.0);
        assert_eq!(round_to_unit(987.0, 1000.0), 1000.0);
        assert_eq!(round_to_unit(499.0, 1000.0), 0.0);
        assert_eq!(round_to_unit(-1500.0, 1000.0), -2000.0);
    }

    #[test]
    fn rounds_to_non_decimal_unit() {
        assert_eq!(round_to_unit(7.3, 0.5), 7.5);
        assert_eq!(round_to_unit(7.2, 0.5), 7.0);
        assert_eq!(round_to_unit(0.29, 0.1), 0.3);
    }

    #[test]
    fn unit_one_is_identity_on_integers() {
        for v in [-3.0, 0.0, 17.0, 123456.0] {
            assert_eq!(round_to_unit(v, 1.0), v);
        }
    }

    #[test]
    fn power_of_ten_detection() {
        assert_eq!(power_of_ten_places(1000.0), Some(-3));
        assert_eq!(power_of_ten_places(0.01), Some(2));
        assert_eq!(power_of_ten_places(1.0), Some(0));
        assert_eq!(power_of_ten_places(0.5), None);
    }

    #[test]
    fn counts_text_decimals() {
        assert_eq!(text_decimals("12.50"), 2);
        assert_eq!(text_decimals("7"), 0);
        assert_eq!(text_decimals("1.5e-3"), 4);
        assert_eq!(text_decimals("15e2"), 0);
    }

    #[test]
    fn plain_number_parsing() {
        assert_eq!(parse_plain_number("-3.25"), Some(-3.25));
        assert_eq!(parse_plain_number(".5"), Some(0.5));
        assert_eq!(parse_plain_number("1e3"), Some(1000.0));
        assert_eq!(parse_plain_number("inf"), None);
        assert_eq!(parse_plain_number("NaN"), None);
        assert_eq!(parse_plain_number("12a"), None);
        assert_eq!(parse_plain_number("-"), None);
        assert_eq!(parse_plain_number("2024-01-01"), None);
    }
}
