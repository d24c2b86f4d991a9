//! Post-insertion verification: the connectivity check walks the graph from
//! every trigger input to the victim through inserted parts, and a
//! netlist-level design-rule set catches uniqueness, floating-pin and
//! power-short defects. Geometric rules stay with the CAD tool on re-import.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::PcbGraph;
use crate::insert::TrojanManifest;
use crate::netlist::{alpha_prefix, Netlist};
use crate::power::{is_power_net_name, find_rails};
use crate::values::parse_value;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRow {
    pub id: String,
    pub status: CheckStatus,
    pub entities: Vec<String>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub checks: Vec<CheckRow>,
    /// True iff no check failed; warnings do not block emission.
    pub overall: bool,
}

impl Default for VerificationReport {
    fn default() -> Self {
        VerificationReport { schema_version: REPORT_SCHEMA_VERSION, checks: Vec::new(), overall: true }
    }
}

impl VerificationReport {
    pub fn push(
        &mut self,
        id: impl Into<String>,
        status: CheckStatus,
        entities: Vec<String>,
        message: impl Into<String>,
    ) {
        self.checks.push(CheckRow {
            id: id.into(),
            status,
            entities,
            message: message.into(),
        });
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }

    /// Sorts rows by (id, entities) and recomputes the verdict.
    pub fn finalize(&mut self) {
        self.checks.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.entities.cmp(&b.entities)));
        self.overall = self.checks.iter().all(|c| c.status != CheckStatus::Fail);
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum VerifyError {
    #[error("manifest references unknown entity `{0}`")]
    UnknownManifestEntity(String),
}

/// Nets reachable from `start`, walking only through the allowed components.
fn reachable_via(
    graph: &PcbGraph,
    start: &str,
    allowed: &dyn Fn(&str) -> bool,
) -> std::collections::BTreeSet<String> {
    let mut comp_nets: std::collections::BTreeMap<&str, Vec<&str>> = Default::default();
    let mut net_comps: std::collections::BTreeMap<&str, Vec<&str>> = Default::default();
    for name in graph.net_names() {
        for pin in graph.net_pins(name).into_iter().flatten() {
            comp_nets.entry(pin.reference.as_str()).or_default().push(name);
            net_comps.entry(name).or_default().push(pin.reference.as_str());
        }
    }
    let mut seen: std::collections::BTreeSet<String> = [start.to_string()].into();
    let mut frontier = vec![start];
    while let Some(net) = frontier.pop() {
        for comp in net_comps.get(net).into_iter().flatten() {
            if !allowed(comp) {
                continue;
            }
            for other in comp_nets.get(comp).into_iter().flatten() {
                if seen.insert((*other).to_string()) {
                    frontier.push(other);
                }
            }
        }
    }
    seen
}

/// Connectivity check: each trigger input must reach the victim through at
/// least one inserted component; leak payloads additionally need a
/// victim-to-observable path through inserted parts.
pub fn check_connectivity(
    graph: &PcbGraph,
    manifest: &TrojanManifest,
) -> Result<VerificationReport, VerifyError> {
    for reference in &manifest.added_refs {
        if !graph.has_component(reference) {
            return Err(VerifyError::UnknownManifestEntity(reference.clone()));
        }
    }
    for net in manifest
        .added_nets
        .iter()
        .chain(&manifest.trigger_input_nets)
        .chain(std::iter::once(&manifest.victim_net))
        .chain(manifest.observable_net.iter())
    {
        if !graph.has_net(net) {
            return Err(VerifyError::UnknownManifestEntity(net.clone()));
        }
    }

    let mut report = VerificationReport::default();
    let added: std::collections::BTreeSet<&str> =
        manifest.added_refs.iter().map(String::as_str).collect();

    let path_through_added = |from: &str, to: &str| -> bool {
        let from_side = reachable_via(graph, from, &|_| true);
        if !from_side.contains(to) {
            return false;
        }
        // A path through an added part exists iff some added part touches
        // both a net reachable from `from` and one reaching `to`.
        let to_side = reachable_via(graph, to, &|_| true);
        added.iter().any(|reference| {
            let mut touches_from = false;
            let mut touches_to = false;
            for net in graph.net_names() {
                if graph
                    .net_pins(net)
                    .map_or(false, |pins| pins.iter().any(|p| p.reference == **reference))
                {
                    touches_from |= from_side.contains(net);
                    touches_to |= to_side.contains(net);
                }
            }
            touches_from && touches_to
        })
    };

    for net in &manifest.trigger_input_nets {
        let ok = path_through_added(net, &manifest.victim_net);
        report.push(
            format!("connectivity/trigger-path/{}", manifest.trojan_index),
            if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            vec![net.clone(), manifest.victim_net.clone()],
            if ok {
                format!("trigger input `{net}` reaches the victim through inserted parts")
            } else {
                format!("no path from trigger input `{net}` to the victim through inserted parts")
            },
        );
    }

    if let Some(observable) = &manifest.observable_net {
        let ok = path_through_added(&manifest.victim_net, observable);
        report.push(
            format!("connectivity/leak-path/{}", manifest.trojan_index),
            if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            vec![manifest.victim_net.clone(), observable.clone()],
            if ok {
                "victim reaches the observable point through inserted parts".to_string()
            } else {
                "no leak path from victim to observable point".to_string()
            },
        );
    }

    report.finalize();
    Ok(report)
}

fn is_trojan_ref(reference: &str) -> bool {
    let prefix = alpha_prefix(reference);
    prefix.len() >= 3 && prefix.ends_with("TJ")
}

fn expected_pins(reference: &str) -> usize {
    match alpha_prefix(reference).chars().next() {
        Some('Q') => 3,
        Some('U') => 5,
        _ => 2,
    }
}

/// DRC-lite over the emitted netlist: uniqueness rules, pin-per-net rules,
/// floating template ports, zero-impedance supply shorts and missing fields
/// on inserted components. Small nets only warn.
pub fn check_design_rules(netlist: &Netlist, graph: &PcbGraph) -> VerificationReport {
    let mut report = VerificationReport::default();

    let mut seen_refs = std::collections::HashSet::new();
    let mut duplicate_refs = Vec::new();
    for comp in &netlist.components {
        if !seen_refs.insert(comp.reference.as_str()) {
            duplicate_refs.push(comp.reference.clone());
        }
    }
    report.push(
        "drc/unique-refs",
        if duplicate_refs.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        duplicate_refs.clone(),
        if duplicate_refs.is_empty() {
            "component references are unique".to_string()
        } else {
            format!("duplicate references: {}", duplicate_refs.join(", "))
        },
    );

    let mut seen_names = std::collections::HashSet::new();
    let mut duplicate_names = Vec::new();
    for net in &netlist.nets {
        if !seen_names.insert(net.name.as_str()) {
            duplicate_names.push(net.name.clone());
        }
    }
    report.push(
        "drc/unique-net-names",
        if duplicate_names.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        duplicate_names.clone(),
        if duplicate_names.is_empty() {
            "net names are unique".to_string()
        } else {
            format!("duplicate net names: {}", duplicate_names.join(", "))
        },
    );

    let mut seen_pins = std::collections::HashSet::new();
    let mut multi_pins = Vec::new();
    for net in &netlist.nets {
        for node in &net.nodes {
            if !seen_pins.insert(node.clone()) {
                multi_pins.push(node.to_string());
            }
        }
    }
    report.push(
        "drc/pin-single-net",
        if multi_pins.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        multi_pins.clone(),
        if multi_pins.is_empty() {
            "every pin is on at most one net".to_string()
        } else {
            format!("pins on multiple nets: {}", multi_pins.join(", "))
        },
    );

    // Floating template ports: an inserted part with fewer connected pins
    // than its kind requires.
    let mut floating = Vec::new();
    let mut pin_counts: std::collections::HashMap<&str, usize> = Default::default();
    for net in &netlist.nets {
        for node in &net.nodes {
            *pin_counts.entry(node.reference.as_str()).or_default() += 1;
        }
    }
    for comp in &netlist.components {
        if is_trojan_ref(&comp.reference) {
            let have = pin_counts.get(comp.reference.as_str()).copied().unwrap_or(0);
            if have < expected_pins(&comp.reference) {
                floating.push(comp.reference.clone());
            }
        }
    }
    report.push(
        "drc/floating-template-port",
        if floating.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        floating.clone(),
        if floating.is_empty() {
            "all inserted part pins are connected".to_string()
        } else {
            format!("inserted parts with unconnected pins: {}", floating.join(", "))
        },
    );

    // Zero-impedance supply short: a path between the rails made only of
    // parts that are electrically wire (0-ohm resistors, jumpers).
    let zero_impedance = |reference: &str| -> bool {
        netlist
            .components
            .iter()
            .find(|c| c.reference == reference)
            .map_or(false, |c| {
                let prefix = alpha_prefix(reference);
                (prefix.starts_with('R') || c.value.eq_ignore_ascii_case("wire"))
                    && (parse_value(&c.value) == Some(0.0) || c.value.eq_ignore_ascii_case("wire"))
            })
    };
    let mut short_entities = Vec::new();
    if let Some((vdd, gnd)) = find_rails(graph) {
        let reachable = reachable_via(graph, &vdd, &|c| zero_impedance(c));
        if reachable.contains(&gnd) {
            for comp in &netlist.components {
                if zero_impedance(&comp.reference) {
                    let on_path = graph.net_names().any(|net| {
                        reachable.contains(net)
                            && graph
                                .net_pins(net)
                                .map_or(false, |pins| pins.iter().any(|p| p.reference == comp.reference))
                    });
                    if on_path {
                        short_entities.push(comp.reference.clone());
                    }
                }
            }
        }
    }
    report.push(
        "drc/power-short",
        if short_entities.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        short_entities.clone(),
        if short_entities.is_empty() {
            "no zero-impedance path between supply rails".to_string()
        } else {
            format!("supply rails shorted through: {}", short_entities.join(", "))
        },
    );

    // Small nets: warn only. Power nets with one pin are common on small
    // fixtures, still worth flagging.
    let mut smalls = Vec::new();
    for net in &netlist.nets {
        if net.nodes.len() < 2 && !is_power_net_name(&net.name) {
            smalls.push(net.name.clone());
        }
    }
    report.push(
        "drc/net-min-pins",
        if smalls.is_empty() { CheckStatus::Pass } else { CheckStatus::Warn },
        smalls.clone(),
        if smalls.is_empty() {
            "every signal net joins at least two pins".to_string()
        } else {
            format!("nets with a single pin: {}", smalls.join(", "))
        },
    );

    let mut missing_fields = Vec::new();
    for comp in &netlist.components {
        if is_trojan_ref(&comp.reference) && (comp.value.is_empty() || comp.footprint.is_empty()) {
            missing_fields.push(comp.reference.clone());
        }
    }
    report.push(
        "drc/component-fields",
        if missing_fields.is_empty() { CheckStatus::Pass } else { CheckStatus::Fail },
        missing_fields.clone(),
        if missing_fields.is_empty() {
            "inserted components carry value and footprint".to_string()
        } else {
            format!("inserted components missing fields: {}", missing_fields.join(", "))
        },
    );

    report.finalize();
    report
}

/// Convenience wrapper used by the CLI `verify` subcommand and pipelines.
pub fn verify_benchmark(
    netlist: &Netlist,
    graph: &PcbGraph,
    manifests: &[TrojanManifest],
) -> Result<VerificationReport, VerifyError> {
    let mut report = check_design_rules(netlist, graph);
    for manifest in manifests {
        report.merge(check_connectivity(graph, manifest)?);
    }
    report.finalize();
    Ok(report)
}
