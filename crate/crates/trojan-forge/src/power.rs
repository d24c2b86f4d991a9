//! Power-rail and Trojan-net naming heuristics shared by net selection,
//! insertion and verification.

use crate::graph::PcbGraph;

const POWER_NAMES: [&str; 10] =
    ["GND", "AGND", "DGND", "VCC", "VDD", "VBUS", "VIN", "VOUT", "VEE", "VSS"];

/// Leaf segment of a hierarchical net name (`/power/VCC` -> `VCC`).
fn leaf(name: &str) -> &str {
    name.rsplit('/').next().unwrap_or(name)
}

/// Matches rail-voltage names like `+5V`, `-12V`, `+3V3`.
fn is_rail_voltage(name: &str) -> bool {
    let mut chars = name.chars().peekable();
    if !matches!(chars.next(), Some('+') | Some('-')) {
        return false;
    }
    let mut digits = 0;
    while let Some(c) = chars.peek() {
        if c.is_ascii_digit() || *c == '.' {
            digits += 1;
            chars.next();
        } else {
            break;
        }
    }
    if digits == 0 || !matches!(chars.next(), Some('V') | Some('v')) {
        return false;
    }
    chars.all(|c| c.is_ascii_digit())
}

/// Name-based power classification, case-insensitive on the leaf segment.
pub fn is_power_net_name(name: &str) -> bool {
    let leaf = leaf(name);
    let upper = leaf.to_ascii_uppercase();
    POWER_NAMES.contains(&upper.as_str()) || is_rail_voltage(leaf)
}

/// Full heuristic: power-style name, or more than 25% of all pin incidences
/// on the board (ground pours and supply rails fan out that widely).
pub fn is_power_net(graph: &PcbGraph, name: &str) -> bool {
    if is_power_net_name(name) {
        return true;
    }
    let total = graph.total_pin_count();
    if total == 0 {
        return false;
    }
    match graph.net_pins(name) {
        Some(pins) => pins.len() * 4 > total,
        None => false,
    }
}

/// Nets created by the insertion engine: template internals (`TJNET<k>`) and
/// split halves (`..._TJ<k>`).
pub fn is_trojan_net(name: &str) -> bool {
    fn tail_index(s: &str, prefix_end: usize) -> bool {
        let tail = &s[prefix_end..];
        !tail.is_empty() && tail.chars().all(|c| c.is_ascii_digit())
    }
    if let Some(rest) = name.strip_prefix("TJNET") {
        if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) {
            return true;
        }
    }
    if let Some(pos) = name.rfind("_TJ") {
        return tail_index(name, pos + 3);
    }
    false
}

/// Supply rails by heuristic, with deterministic preference order.
/// Returns (vdd, gnd).
pub fn find_rails(graph: &PcbGraph) -> Option<(String, String)> {
    let rank_vdd = ["VDD", "VCC", "VBUS", "VIN"];
    let rank_gnd = ["GND", "DGND", "AGND", "VSS"];
    let mut names: Vec<&str> = graph.net_names().collect();
    names.sort_unstable();

    let pick = |ranked: &[&str], voltage_ok: bool| -> Option<String> {
        for want in ranked {
            for name in &names {
                if leaf(name).eq_ignore_ascii_case(want) {
                    return Some((*name).to_string());
                }
            }
        }
        if voltage_ok {
            for name in &names {
                if is_rail_voltage(leaf(name)) && leaf(name).starts_with('+') {
                    return Some((*name).to_string());
                }
            }
        }
        None
    };

    let vdd = pick(&rank_vdd, true)?;
    let gnd = pick(&rank_gnd, false)?;
    Some((vdd, gnd))
}
