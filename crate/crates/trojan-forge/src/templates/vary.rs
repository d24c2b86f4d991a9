//! Passive value variation: template resistors and capacitors are re-valued
//! to sit within one E24 step of values already present on the host board, so
//! inserted parts do not stand out in a bill-of-materials scan.

use rand::Rng;

use super::{PartKind, TrojanTemplate};
use crate::seed;
use crate::values::{e24_nearest, format_farads, format_ohms, parse_value};

/// Parsed passive values present on the host board, one pool per part kind.
#[derive(Debug, Clone, Default)]
pub struct HostValues {
    pub resistors: Vec<f64>,
    pub capacitors: Vec<f64>,
}

impl HostValues {
    pub fn pool(&self, kind: PartKind) -> &[f64] {
        match kind {
            PartKind::Resistor => &self.resistors,
            PartKind::Capacitor => &self.capacitors,
            _ => &[],
        }
    }

    pub fn push(&mut self, kind: PartKind, value: f64) {
        match kind {
            PartKind::Resistor => self.resistors.push(value),
            PartKind::Capacitor => self.capacitors.push(value),
            _ => {}
        }
    }
}

/// Returns a copy of the template with passive part values re-drawn from the
/// host pools: pick a host value, snap it to the E24 grid, then move at most
/// one series step. Part kinds, counts and topology are untouched, as are
/// parts whose values parametrize a TimedRc behavior. Deterministic for a
/// fixed seed; an empty pool skips variation for that kind.
pub fn vary_passives(template: &TrojanTemplate, host: &HostValues, seed_value: u64) -> TrojanTemplate {
    let mut rng = seed::rng(seed::mix(seed_value, seed::fnv1a(&template.id)));
    let mut varied = template.clone();
    for part in &mut varied.parts {
        if !part.kind.is_passive() || part.rc_bound {
            continue;
        }
        let pool = host.pool(part.kind);
        if pool.is_empty() {
            continue;
        }
        let base = pool[rng.gen_range(0..pool.len())];
        let Some(snapped) = e24_nearest(base) else { continue };
        let stepped = snapped.step(rng.gen_range(-1..=1));
        part.value = match part.kind {
            PartKind::Resistor => format_ohms(stepped.value()),
            PartKind::Capacitor => format_farads(stepped.value()),
            _ => unreachable!(),
        };
        debug_assert!(parse_value(&part.value).is_some());
    }
    varied
}

#[cfg(test)]
mod tests {
    use super::super::{builtin_templates, TemplateLibrary};
    use super::*;
    use crate::values::e24_neighbors;

    fn host_10k() -> HostValues {
        HostValues { resistors: vec![10_000.0, 10_000.0], capacitors: vec![] }
    }

    #[test]
    fn values_stay_within_one_e24_step_of_host() {
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let varied = vary_passives(t1, &host_10k(), 99);
        let allowed = e24_neighbors(10_000.0).unwrap();
        for part in varied.parts.iter().filter(|p| p.kind == PartKind::Resistor) {
            let v = parse_value(&part.value).unwrap();
            assert!(
                allowed.iter().any(|a| (a - v).abs() / a < 1e-9),
                "{} = {v} not within one E24 step of 10k ({allowed:?})",
                part.ref_hint
            );
        }
    }

    #[test]
    fn variation_is_deterministic() {
        let lib = TemplateLibrary::builtin();
        let t3 = lib.get("T3").unwrap();
        let host = HostValues { resistors: vec![470.0, 2_200.0, 68_000.0], capacitors: vec![1e-7] };
        let a = vary_passives(t3, &host, 7);
        let b = vary_passives(t3, &host, 7);
        assert_eq!(a, b);
        let c = vary_passives(t3, &host, 8);
        assert_ne!(a, c, "different seeds should usually differ");
    }

    #[test]
    fn missing_pool_skips_kind() {
        let lib = TemplateLibrary::builtin();
        let t5 = lib.get("T5").unwrap();
        let host = HostValues { resistors: vec![1_000.0], capacitors: vec![] };
        let varied = vary_passives(t5, &host, 3);
        for (orig, new) in t5.parts.iter().zip(&varied.parts) {
            if orig.kind == PartKind::Capacitor {
                assert_eq!(orig.value, new.value);
            }
        }
    }

    #[test]
    fn rc_bound_parts_are_left_alone() {
        let lib = TemplateLibrary::builtin();
        let t4 = lib.get("T4").unwrap();
        let host = HostValues { resistors: vec![330.0], capacitors: vec![4.7e-6] };
        let varied = vary_passives(t4, &host, 11);
        for (orig, new) in t4.parts.iter().zip(&varied.parts) {
            if orig.rc_bound {
                assert_eq!(orig.value, new.value, "{}", orig.ref_hint);
            }
        }
        assert_eq!(varied.behavior, t4.behavior);
    }

    #[test]
    fn topology_and_kinds_never_change() {
        let host = HostValues { resistors: vec![123.0, 9_999.0], capacitors: vec![2.2e-8] };
        for template in builtin_templates() {
            let varied = vary_passives(&template, &host, 42);
            assert_eq!(template.parts.len(), varied.parts.len());
            for (orig, new) in template.parts.iter().zip(&varied.parts) {
                assert_eq!(orig.kind, new.kind);
                assert_eq!(orig.ref_hint, new.ref_hint);
                assert_eq!(orig.pins, new.pins);
            }
            assert_eq!(template.behavior, varied.behavior);
            varied.validate().unwrap();
        }
    }
}
