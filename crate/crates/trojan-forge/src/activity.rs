//! Per-net signal statistics from simulation traces and the selection of
//! trigger-input, victim and observable nets.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::PcbGraph;
use crate::netlist::alpha_prefix;
use crate::power::{is_power_net, is_trojan_net};
use crate::seed;
use crate::templates::{TemplateKind, TrojanTemplate};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetStats {
    /// Fraction of samples at logic 1.
    pub p1: f64,
    /// Number of value changes across consecutive samples.
    pub toggles: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, Default)]
pub struct ActivityProfile {
    stats: IndexMap<String, NetStats>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ActivityError {
    #[error("trace line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("trace line {line}: non-binary sample `{value}`")]
    NonBinarySample { line: usize, value: String },
    #[error("net `{0}` is not profiled")]
    UnprofiledNet(String),
    #[error("profiled net `{0}` does not exist in the design")]
    ProfileNetUnknown(String),
    #[error("need {needed} eligible signal nets, found {found}")]
    InsufficientEligibleNets { needed: usize, found: usize },
    #[error("no net subset meets the rarity threshold {threshold}; best achievable {best:e}")]
    RarityUnsatisfiable { threshold: f64, best: f64 },
    #[error("explicit victim `{net}` is ineligible: {reason}")]
    IneligibleVictim { net: String, reason: String },
    #[error("no eligible victim nets")]
    NoEligibleNets,
    #[error("no observable point: no hints matched and no LED or connector nets found")]
    NoObservablePoint,
    #[error("selection policy invalid: {0}")]
    InvalidPolicy(String),
    #[error("template `{0}` is not a trigger")]
    NotATrigger(String),
}

impl ActivityProfile {
    pub fn get(&self, net: &str) -> Option<&NetStats> {
        self.stats.get(net)
    }

    pub fn nets(&self) -> impl Iterator<Item = &str> {
        self.stats.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }

    pub fn insert(&mut self, net: impl Into<String>, stats: NetStats) {
        self.stats.insert(net.into(), stats);
    }

    /// Checks that every profiled net exists in the design.
    pub fn bind(&self, graph: &PcbGraph) -> Result<(), ActivityError> {
        for net in self.nets() {
            if !graph.has_net(net) {
                return Err(ActivityError::ProfileNetUnknown(net.to_string()));
            }
        }
        Ok(())
    }
}

/// Parses a trace: header `time,<net>,...`, then rows of a nondecreasing
/// time stamp followed by binary samples. `#`-prefixed lines are comments.
pub fn load_trace_str(text: &str) -> Result<ActivityProfile, ActivityError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (header_line, header) = lines
        .next()
        .ok_or(ActivityError::Format { line: 1, message: "empty trace".into() })?;
    let mut columns = header.split(',').map(str::trim);
    if columns.next() != Some("time") {
        return Err(ActivityError::Format {
            line: header_line,
            message: "header must start with `time`".into(),
        });
    }
    let nets: Vec<String> = columns.map(str::to_string).collect();
    if nets.is_empty() {
        return Err(ActivityError::Format {
            line: header_line,
            message: "header names no nets".into(),
        });
    }
    {
        let mut seen = std::collections::HashSet::new();
        for net in &nets {
            if !seen.insert(net.as_str()) {
                return Err(ActivityError::Format {
                    line: header_line,
                    message: format!("duplicate net column `{net}`"),
                });
            }
        }
    }

    let mut ones = vec![0u64; nets.len()];
    let mut toggles = vec![0u64; nets.len()];
    let mut last: Vec<Option<bool>> = vec![None; nets.len()];
    let mut samples = 0u64;
    let mut last_time = f64::NEG_INFINITY;

    for (line, row) in lines {
        let mut fields = row.split(',').map(str::trim);
        let time: f64 = fields
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| ActivityError::Format { line, message: "bad time value".into() })?;
        if time < last_time {
            return Err(ActivityError::Format {
                line,
                message: "time values must be nondecreasing".into(),
            });
        }
        last_time = time;
        let values: Vec<&str> = fields.collect();
        if values.len() != nets.len() {
            return Err(ActivityError::Format {
                line,
                message: format!("expected {} samples, got {}", nets.len(), values.len()),
            });
        }
        for (i, value) in values.iter().enumerate() {
            let bit = match *value {
                "0" => false,
                "1" => true,
                other => {
                    return Err(ActivityError::NonBinarySample { line, value: other.to_string() })
                }
            };
            if bit {
                ones[i] += 1;
            }
            if let Some(prev) = last[i] {
                if prev != bit {
                    toggles[i] += 1;
                }
            }
            last[i] = Some(bit);
        }
        samples += 1;
    }

    if samples == 0 {
        return Err(ActivityError::Format { line: header_line, message: "trace has no samples".into() });
    }

    let mut profile = ActivityProfile::default();
    for (i, net) in nets.into_iter().enumerate() {
        profile.insert(
            net,
            NetStats { p1: ones[i] as f64 / samples as f64, toggles: toggles[i], samples },
        );
    }
    Ok(profile)
}

pub fn load_trace(path: &std::path::Path) -> Result<ActivityProfile, ActivityError> {
    let text = std::fs::read_to_string(path).map_err(|e| ActivityError::Format {
        line: 0,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    load_trace_str(&text)
}

/// Probability that every listed net holds its activating value, assuming
/// independence across nets. The empty product is 1.
pub fn joint_activation_probability(
    profile: &ActivityProfile,
    inputs: &[(String, bool)],
) -> Result<f64, ActivityError> {
    let mut product = 1.0;
    for (net, activating) in inputs {
        let stats =
            profile.get(net).ok_or_else(|| ActivityError::UnprofiledNet(net.clone()))?;
        product *= if *activating { stats.p1 } else { 1.0 - stats.p1 };
    }
    Ok(product)
}

fn default_threshold() -> f64 {
    1e-4
}

fn default_independence() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SelectionPolicy {
    /// Upper bound on the joint activation probability of selected nets.
    #[serde(default = "default_threshold")]
    pub rarity_threshold: f64,
    /// Recorded in manifests: joint probabilities assume independent nets.
    #[serde(default = "default_independence")]
    pub independence_assumed: bool,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        SelectionPolicy {
            rarity_threshold: default_threshold(),
            independence_assumed: default_independence(),
            seed: 0,
        }
    }
}

impl SelectionPolicy {
    pub fn validate(&self) -> Result<(), ActivityError> {
        if !(self.rarity_threshold > 0.0 && self.rarity_threshold < 1.0) {
            return Err(ActivityError::InvalidPolicy(format!(
                "rarity_threshold {} must lie in (0, 1)",
                self.rarity_threshold
            )));
        }
        Ok(())
    }
}

/// Signal nets eligible as trigger inputs or victims: not power, not
/// insertion-created, sorted lexicographically for determinism.
pub fn eligible_signal_nets(graph: &PcbGraph) -> Vec<String> {
    let mut nets: Vec<String> = graph
        .net_names()
        .filter(|n| !is_power_net(graph, n) && !is_trojan_net(n))
        .map(str::to_string)
        .collect();
    nets.sort_unstable();
    nets
}

/// Picks the trigger input nets for a template.
///
/// With a profile: slot-by-slot greedy choice by ascending per-input
/// activation probability (ties lexicographic), then the joint bound is
/// enforced. Without one: uniform random over eligible nets, seeded.
pub fn select_trigger_nets(
    graph: &PcbGraph,
    profile: Option<&ActivityProfile>,
    template: &TrojanTemplate,
    policy: &SelectionPolicy,
) -> Result<Vec<String>, ActivityError> {
    if template.kind != TemplateKind::Trigger {
        return Err(ActivityError::NotATrigger(template.id.clone()));
    }
    policy.validate()?;
    let needed = template.input_arity();
    let eligible = eligible_signal_nets(graph);

    match profile {
        None => {
            if eligible.len() < needed {
                return Err(ActivityError::InsufficientEligibleNets {
                    needed,
                    found: eligible.len(),
                });
            }
            let mut rng = seed::rng(seed::mix(policy.seed, seed::fnv1a("trigger-nets")));
            let mut pool = eligible;
            pool.shuffle(&mut rng);
            pool.truncate(needed);
            Ok(pool)
        }
        Some(profile) => {
            let candidates: Vec<&String> =
                eligible.iter().filter(|n| profile.get(n).is_some()).collect();
            if candidates.len() < needed {
                return Err(ActivityError::InsufficientEligibleNets {
                    needed,
                    found: candidates.len(),
                });
            }
            let activating = template.activating_values();
            let mut chosen: Vec<(String, bool)> = Vec::with_capacity(needed);
            let mut used: std::collections::HashSet<&str> = std::collections::HashSet::new();
            for slot in 0..needed {
                let want_high = activating[slot];
                let best = candidates
                    .iter()
                    .filter(|n| !used.contains(n.as_str()))
                    .min_by(|a, b| {
                        let pa = slot_probability(profile, a, want_high);
                        let pb = slot_probability(profile, b, want_high);
                        pa.total_cmp(&pb).then_with(|| a.cmp(b))
                    })
                    .expect("candidate count checked above");
                used.insert(best.as_str());
                chosen.push(((*best).clone(), want_high));
            }
            let joint = joint_activation_probability(profile, &chosen)?;
            if joint > policy.rarity_threshold {
                return Err(ActivityError::RarityUnsatisfiable {
                    threshold: policy.rarity_threshold,
                    best: joint,
                });
            }
            Ok(chosen.into_iter().map(|(net, _)| net).collect())
        }
    }
}

fn slot_probability(profile: &ActivityProfile, net: &str, want_high: bool) -> f64 {
    let p1 = profile.get(net).map(|s| s.p1).unwrap_or(1.0);
    if want_high {
        p1
    } else {
        1.0 - p1
    }
}

/// Picks the victim net: the explicit choice if eligible, else a seeded
/// uniform draw. Eligibility: non-power, at least two pins, not created by a
/// previous insertion.
pub fn select_victim_net(
    graph: &PcbGraph,
    explicit: Option<&str>,
    seed_value: u64,
) -> Result<String, ActivityError> {
    let eligibility = |net: &str| -> Result<(), String> {
        if !graph.has_net(net) {
            return Err("net does not exist".into());
        }
        if is_power_net(graph, net) {
            return Err("power net".into());
        }
        if is_trojan_net(net) {
            return Err("created by a previous insertion".into());
        }
        if graph.net_pins(net).map_or(0, |p| p.len()) < 2 {
            return Err("fewer than two pins".into());
        }
        Ok(())
    };

    if let Some(net) = explicit {
        return match eligibility(net) {
            Ok(()) => Ok(net.to_string()),
            Err(reason) => {
                Err(ActivityError::IneligibleVictim { net: net.to_string(), reason })
            }
        };
    }

    let pool: Vec<String> = eligible_signal_nets(graph)
        .into_iter()
        .filter(|n| eligibility(n).is_ok())
        .collect();
    if pool.is_empty() {
        return Err(ActivityError::NoEligibleNets);
    }
    let mut rng = seed::rng(seed::mix(seed_value, seed::fnv1a("victim-net")));
    let index = rand::Rng::gen_range(&mut rng, 0..pool.len());
    Ok(pool[index].clone())
}

/// Picks an externally observable net for leak payloads, by priority:
/// user hints present in the graph, then LED nets, then connector nets.
/// Power nets are never observable targets.
pub fn select_observable_net(
    graph: &PcbGraph,
    hints: &[String],
) -> Result<String, ActivityError> {
    for hint in hints {
        if graph.has_net(hint) && !is_power_net(graph, hint) {
            return Ok(hint.clone());
        }
    }

    let nets_touching = |accept: &dyn Fn(&crate::netlist::Component) -> bool| -> Vec<String> {
        let mut found: Vec<String> = graph
            .net_names()
            .filter(|net| {
                if is_power_net(graph, net) || is_trojan_net(net) {
                    return false;
                }
                graph.net_pins(net).map_or(false, |pins| {
                    pins.iter().any(|pin| {
                        graph.component(&pin.reference).map_or(false, |c| accept(c))
                    })
                })
            })
            .map(str::to_string)
            .collect();
        found.sort_unstable();
        found
    };

    let led_nets = nets_touching(&|c| {
        let prefix = alpha_prefix(&c.reference);
        prefix == "LED" || (prefix == "D" && c.value.to_ascii_uppercase().contains("LED"))
    });
    if let Some(net) = led_nets.first() {
        return Ok(net.clone());
    }

    let connector_nets = nets_touching(&|c| {
        matches!(alpha_prefix(&c.reference), "J" | "P" | "CON")
    });
    if let Some(net) = connector_nets.first() {
        return Ok(net.clone());
    }

    Err(ActivityError::NoObservablePoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::netlist::parse_netlist;
    use crate::templates::TemplateLibrary;

    #[test]
    fn trace_statistics() {
        let profile = load_trace_str("time,A,B\n0,0,1\n1,0,1\n2,0,1\n3,1,1\n").unwrap();
        let a = profile.get("A").unwrap();
        assert_eq!(a.p1, 0.25);
        assert_eq!(a.toggles, 1);
        assert_eq!(a.samples, 4);
        let b = profile.get("B").unwrap();
        assert_eq!(b.p1, 1.0);
        assert_eq!(b.toggles, 0);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let profile = load_trace_str("# simulated\ntime,X\n\n0,0\n# mid comment\n1,1\n").unwrap();
        assert_eq!(profile.get("X").unwrap().p1, 0.5);
    }

    #[test]
    fn non_binary_sample_names_line() {
        let err = load_trace_str("time,A\n0,0\n1,2\n").unwrap_err();
        assert_eq!(err, ActivityError::NonBinarySample { line: 3, value: "2".into() });
    }

    #[test]
    fn bad_arity_and_time_are_format_errors() {
        assert!(matches!(
            load_trace_str("time,A,B\n0,1\n"),
            Err(ActivityError::Format { line: 2, .. })
        ));
        assert!(matches!(
            load_trace_str("time,A\n5,1\n4,1\n"),
            Err(ActivityError::Format { line: 3, .. })
        ));
        assert!(matches!(load_trace_str("volts,A\n"), Err(ActivityError::Format { .. })));
    }

    fn profile_from(pairs: &[(&str, f64)]) -> ActivityProfile {
        let mut p = ActivityProfile::default();
        for (net, p1) in pairs {
            p.insert(*net, NetStats { p1: *p1, toggles: 0, samples: 100 });
        }
        p
    }

    #[test]
    fn joint_probability_is_a_product() {
        let p = profile_from(&[("A", 0.5), ("B", 0.5), ("C", 0.5), ("D", 0.5)]);
        let inputs: Vec<(String, bool)> =
            ["A", "B", "C", "D"].iter().map(|n| (n.to_string(), true)).collect();
        assert_eq!(joint_activation_probability(&p, &inputs).unwrap(), 0.0625);

        let p = profile_from(&[("A", 0.01), ("B", 0.01), ("C", 0.01), ("D", 0.01)]);
        let got = joint_activation_probability(&p, &inputs).unwrap();
        assert!((got - 1e-8).abs() < 1e-20);

        assert_eq!(joint_activation_probability(&p, &[]).unwrap(), 1.0);
        assert!(matches!(
            joint_activation_probability(&p, &[("ZZ".to_string(), true)]),
            Err(ActivityError::UnprofiledNet(_))
        ));
    }

    #[test]
    fn joint_probability_monotone_nonincreasing() {
        let p = profile_from(&[("A", 0.3), ("B", 0.9), ("C", 0.2)]);
        let mut inputs: Vec<(String, bool)> = Vec::new();
        let mut last = 1.0;
        for (net, val) in [("A", true), ("B", false), ("C", true)] {
            inputs.push((net.to_string(), val));
            let now = joint_activation_probability(&p, &inputs).unwrap();
            assert!(now <= last);
            last = now;
        }
    }

    fn board_with_nets(names: &[&str]) -> PcbGraph {
        // One resistor per net pair keeps every net at two pins.
        let mut comps = String::new();
        let mut nets = String::new();
        for (i, name) in names.iter().enumerate() {
            comps.push_str(&format!("(comp (ref R{i}) (value 1k) (footprint F))"));
            comps.push_str(&format!("(comp (ref U{i}) (value MCU) (footprint F))"));
            nets.push_str(&format!(
                "(net (code {}) (name {name}) (node (ref R{i}) (pin 1)) (node (ref U{i}) (pin 1)))",
                i + 1
            ));
        }
        let text = format!("(export (version D) (design) (components {comps}) (nets {nets}))");
        build_graph(&parse_netlist(&text).unwrap())
    }

    #[test]
    fn greedy_selection_matches_brute_force_on_derived_example() {
        let graph = board_with_nets(&["A", "B", "C", "D", "E", "F"]);
        let profile = profile_from(&[
            ("A", 0.9),
            ("B", 0.01),
            ("C", 0.02),
            ("D", 0.5),
            ("E", 0.03),
            ("F", 0.04),
        ]);
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let policy = SelectionPolicy::default();
        let picked =
            select_trigger_nets(&graph, Some(&profile), t1, &policy).unwrap();
        let mut sorted = picked.clone();
        sorted.sort();
        assert_eq!(sorted, vec!["B", "C", "E", "F"]);
        let inputs: Vec<(String, bool)> = picked.iter().map(|n| (n.clone(), true)).collect();
        let joint = joint_activation_probability(&profile, &inputs).unwrap();
        assert!((joint - 2.4e-7).abs() < 1e-12);

        // Brute force over all 4-subsets: greedy is optimal here.
        let nets = ["A", "B", "C", "D", "E", "F"];
        let mut best = f64::INFINITY;
        for a in 0..6 {
            for b in a + 1..6 {
                for c in b + 1..6 {
                    for d in c + 1..6 {
                        let inputs: Vec<(String, bool)> = [a, b, c, d]
                            .iter()
                            .map(|i| (nets[*i].to_string(), true))
                            .collect();
                        best = best.min(joint_activation_probability(&profile, &inputs).unwrap());
                    }
                }
            }
        }
        assert_eq!(joint, best);
    }

    #[test]
    fn rarity_bound_is_enforced() {
        let graph = board_with_nets(&["A", "B", "C", "D"]);
        let profile = profile_from(&[("A", 0.4), ("B", 0.4), ("C", 0.4), ("D", 0.4)]);
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let policy = SelectionPolicy { rarity_threshold: 1e-4, ..Default::default() };
        match select_trigger_nets(&graph, Some(&profile), t1, &policy) {
            Err(ActivityError::RarityUnsatisfiable { best, .. }) => {
                assert!((best - 0.4f64.powi(4)).abs() < 1e-12);
            }
            other => panic!("expected RarityUnsatisfiable, got {other:?}"),
        }
    }

    #[test]
    fn mixed_trigger_uses_low_and_high_slots() {
        let graph = board_with_nets(&["A", "B", "C", "D", "E", "F", "G", "H", "I", "K"]);
        let profile = profile_from(&[
            ("A", 0.01),
            ("B", 0.02),
            ("C", 0.03),
            ("D", 0.04),
            ("E", 0.97),
            ("F", 0.98),
            ("G", 0.99),
            ("H", 0.96),
            ("I", 0.5),
            ("K", 0.5),
        ]);
        let lib = TemplateLibrary::builtin();
        let t3 = lib.get("T3").unwrap();
        let policy = SelectionPolicy::default();
        let picked = select_trigger_nets(&graph, Some(&profile), t3, &policy).unwrap();
        // AND slots get the rare-high nets, NOR slots the rarely-low ones.
        assert_eq!(picked[..4], ["A", "B", "C", "D"]);
        let mut nor_slots = picked[4..].to_vec();
        nor_slots.sort();
        assert_eq!(nor_slots, vec!["E", "F", "G", "H"]);
    }

    #[test]
    fn random_selection_is_deterministic() {
        let graph = board_with_nets(&["A", "B", "C", "D", "E", "F"]);
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let policy = SelectionPolicy { seed: 9, ..Default::default() };
        let one = select_trigger_nets(&graph, None, t1, &policy).unwrap();
        let two = select_trigger_nets(&graph, None, t1, &policy).unwrap();
        assert_eq!(one, two);
        assert_eq!(one.len(), 4);
    }

    #[test]
    fn power_only_graph_has_no_eligible_nets() {
        let graph = board_with_nets(&["GND", "VCC"]);
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        match select_trigger_nets(&graph, None, t1, &SelectionPolicy::default()) {
            Err(ActivityError::InsufficientEligibleNets { found: 0, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn victim_selection_rules() {
        let graph = board_with_nets(&["/SIG", "GND", "/OTHER", "/PAD1", "/PAD2"]);
        assert_eq!(select_victim_net(&graph, Some("/SIG"), 0).unwrap(), "/SIG");
        assert!(matches!(
            select_victim_net(&graph, Some("GND"), 0),
            Err(ActivityError::IneligibleVictim { .. })
        ));
        assert!(matches!(
            select_victim_net(&graph, Some("/MISSING"), 0),
            Err(ActivityError::IneligibleVictim { .. })
        ));
        let a = select_victim_net(&graph, None, 3).unwrap();
        let b = select_victim_net(&graph, None, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn observable_priority_hint_then_led_then_connector() {
        let text = "(export (version D) (design)
  (components
    (comp (ref U1) (value MCU) (footprint F))
    (comp (ref LED1) (value LED) (footprint F))
    (comp (ref J1) (value CONN) (footprint F))
    (comp (ref R1) (value 1k) (footprint F))
    (comp (ref R2) (value 1k) (footprint F))
    (comp (ref R3) (value 1k) (footprint F)))
  (nets
    (net (code 1) (name /STATUS) (node (ref LED1) (pin 1)) (node (ref U1) (pin 2)))
    (net (code 2) (name /DBG) (node (ref U1) (pin 3)) (node (ref R1) (pin 1)))
    (net (code 3) (name /EXT) (node (ref J1) (pin 1)) (node (ref U1) (pin 4)))
    (net (code 4) (name /PADA) (node (ref R2) (pin 1)) (node (ref U1) (pin 5)))
    (net (code 5) (name /PADB) (node (ref R3) (pin 1)) (node (ref U1) (pin 6)))))";
        let graph = build_graph(&parse_netlist(text).unwrap());

        assert_eq!(select_observable_net(&graph, &[]).unwrap(), "/STATUS");
        assert_eq!(
            select_observable_net(&graph, &["/DBG".to_string()]).unwrap(),
            "/DBG"
        );
        assert_eq!(
            select_observable_net(&graph, &["/MISSING".to_string()]).unwrap(),
            "/STATUS",
            "unknown hints fall through"
        );

        let bare = board_with_nets(&["/A", "/B"]);
        assert!(matches!(
            select_observable_net(&bare, &[]),
            Err(ActivityError::NoObservablePoint)
        ));
    }
}
