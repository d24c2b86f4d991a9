//! Engineering notation for passive component values and the E24 preferred
//! number series used when adapting template passives to a host board.

/// E24 mantissas scaled by ten, so every entry is an exact integer.
pub const E24_M10: [u32; 24] = [
    10, 11, 12, 13, 15, 16, 18, 20, 22, 24, 27, 30, 33, 36, 39, 43, 47, 51, 56, 62, 68, 75, 82, 91,
];

/// A point on the E24 grid: `m10/10 * 10^decade`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct E24Point {
    pub idx: usize,
    pub decade: i32,
}

impl E24Point {
    pub fn value(self) -> f64 {
        (E24_M10[self.idx] as f64 / 10.0) * 10f64.powi(self.decade)
    }

    /// Steps along the series, carrying across decades.
    pub fn step(self, delta: i32) -> E24Point {
        let mut idx = self.idx as i32 + delta;
        let mut decade = self.decade;
        while idx < 0 {
            idx += 24;
            decade -= 1;
        }
        while idx >= 24 {
            idx -= 24;
            decade += 1;
        }
        E24Point { idx: idx as usize, decade }
    }
}

/// Nearest E24 grid point by log-ratio distance; ties resolve downward.
pub fn e24_nearest(value: f64) -> Option<E24Point> {
    if !(value.is_finite() && value > 0.0) {
        return None;
    }
    let decade = value.log10().floor() as i32;
    // Candidates from the decade below through the decade above cover
    // mantissas that round across a decade boundary.
    let mut best: Option<(f64, E24Point)> = None;
    for d in [decade - 1, decade, decade + 1] {
        for idx in 0..24 {
            let point = E24Point { idx, decade: d };
            let dist = (value.ln() - point.value().ln()).abs();
            let better = match best {
                None => true,
                Some((bd, bp)) => dist < bd || (dist == bd && point.value() < bp.value()),
            };
            if better {
                best = Some((dist, point));
            }
        }
    }
    best.map(|(_, p)| p)
}

/// The E24 values within one series step of `value` (below, snap, above).
pub fn e24_neighbors(value: f64) -> Option<[f64; 3]> {
    let p = e24_nearest(value)?;
    Some([p.step(-1).value(), p.value(), p.step(1).value()])
}

/// Parses engineering notation: `470`, `4.7k`, `4k7`, `10u`, `1M`, `0R`.
/// Trailing unit letters (`R`, `F`, ohm signs) are tolerated. `m` is milli
/// and `M` is mega, so the multiplier lookup is case-sensitive.
pub fn parse_value(s: &str) -> Option<f64> {
    let s = s.trim();
    if s.is_empty() {
        return None;
    }
    let cleaned: String = s.chars().filter(|c| !matches!(c, 'Ω' | 'F' | 'f')).collect();
    let cleaned = cleaned.trim();

    fn exponent(c: char) -> Option<i32> {
        match c {
            'p' | 'P' => Some(-12),
            'n' | 'N' => Some(-9),
            'u' | 'U' | 'µ' | 'μ' => Some(-6),
            'm' => Some(-3),
            'k' | 'K' => Some(3),
            'M' => Some(6),
            'G' | 'g' => Some(9),
            'R' | 'r' => Some(0),
            _ => None,
        }
    }

    // Infix form: 4k7 -> 4.7e3, 0R -> 0. The decimal string is assembled and
    // parsed in one step so the result is correctly rounded.
    for (i, c) in cleaned.char_indices() {
        if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' {
            continue;
        }
        let exp = exponent(c)?;
        let head = &cleaned[..i];
        let tail = &cleaned[i + c.len_utf8()..];
        if head.is_empty() || !tail.chars().all(|t| t.is_ascii_digit()) {
            return None;
        }
        let decimal = if tail.is_empty() {
            format!("{head}e{exp}")
        } else {
            format!("{head}.{tail}e{exp}")
        };
        return decimal.parse().ok();
    }
    cleaned.parse().ok()
}

fn format_scaled(value: f64, suffixes: &[(f64, &str)]) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    for &(scale, suffix) in suffixes {
        if value >= scale * 0.9995 {
            let scaled = value / scale;
            let rounded = (scaled * 100.0).round() / 100.0;
            let mut s = format!("{rounded}");
            if s.ends_with(".0") {
                s.truncate(s.len() - 2);
            }
            return format!("{s}{suffix}");
        }
    }
    format!("{value}")
}

/// Canonical resistance string: `9100.0 -> "9.1k"`, `470.0 -> "470"`.
pub fn format_ohms(value: f64) -> String {
    format_scaled(value, &[(1e9, "G"), (1e6, "M"), (1e3, "k"), (1.0, "")])
}

/// Canonical capacitance string: `1e-5 -> "10u"`.
pub fn format_farads(value: f64) -> String {
    format_scaled(
        value,
        &[(1.0, "F"), (1e-3, "m"), (1e-6, "u"), (1e-9, "n"), (1e-12, "p")],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        assert_eq!(parse_value("470"), Some(470.0));
        assert_eq!(parse_value("4.7k"), Some(4700.0));
        assert_eq!(parse_value("4k7"), Some(4700.0));
        assert_eq!(parse_value("10k"), Some(10_000.0));
        assert_eq!(parse_value("1M"), Some(1_000_000.0));
        assert_eq!(parse_value("0R"), Some(0.0));
        assert_eq!(parse_value("0"), Some(0.0));
        assert_eq!(parse_value("10u"), Some(1e-5));
        assert_eq!(parse_value("100nF"), Some(1e-7));
        assert_eq!(parse_value("BC547"), None);
    }

    #[test]
    fn formats_are_canonical() {
        assert_eq!(format_ohms(9100.0), "9.1k");
        assert_eq!(format_ohms(11_000.0), "11k");
        assert_eq!(format_ohms(10_000.0), "10k");
        assert_eq!(format_ohms(470.0), "470");
        assert_eq!(format_ohms(1_000_000.0), "1M");
        assert_eq!(format_farads(1e-5), "10u");
        assert_eq!(format_farads(1e-7), "100n");
    }

    #[test]
    fn format_parse_roundtrip_on_e24_grid() {
        for decade in 0..6 {
            for idx in 0..24 {
                let v = E24Point { idx, decade }.value();
                let parsed = parse_value(&format_ohms(v)).unwrap();
                assert!((parsed - v).abs() / v < 1e-6, "{v} vs {parsed}");
            }
        }
    }

    #[test]
    fn e24_neighbors_of_10k() {
        // 10k sits on the grid; one step spans 9.1k..11k.
        let n = e24_neighbors(10_000.0).unwrap();
        assert_eq!(n[0], 9_100.0);
        assert_eq!(n[1], 10_000.0);
        assert_eq!(n[2], 11_000.0);
    }

    #[test]
    fn e24_snap_off_grid() {
        let p = e24_nearest(6_500.0).unwrap();
        assert_eq!(E24_M10[p.idx], 68);
        let p = e24_nearest(0.95).unwrap();
        assert_eq!((E24_M10[p.idx], p.decade), (91, -1));
    }
}
