//! Trojan insertion: template instantiation into the board graph, victim
//! rewiring per payload kind, and ground-truth manifest assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::activity::{
    joint_activation_probability, load_trace, select_observable_net, select_trigger_nets,
    select_victim_net, ActivityError, ActivityProfile, SelectionPolicy,
};
use crate::graph::{build_graph, GraphError, PcbGraph};
use crate::netlist::{alpha_prefix, parse_netlist, write_netlist, Component, Netlist, PinRef};
use crate::power::find_rails;
use crate::seed;
use crate::sim::SimError;
use crate::templates::{
    classify, vary_passives, BoolFn, ClassifyContext, HostValues, PartKind, TaxonomyTag,
    TemplateError, TemplateKind, TemplateLibrary, TemplateNet, TrojanTemplate, PORT_GND,
    PORT_LEAK_OUT, PORT_TRIG_EN, PORT_VDD, PORT_VICTIM_IN, PORT_VICTIM_MOD,
};
use crate::values::parse_value;
use crate::verify::{check_connectivity, check_design_rules, VerificationReport, VerifyError};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RailBindings {
    pub vdd: String,
    pub gnd: String,
}

fn default_count() -> u32 {
    1
}

/// Mirrors the JSON config file field-for-field; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InsertionConfig {
    #[serde(default)]
    pub trigger_id: Option<String>,
    #[serde(default)]
    pub payload_id: Option<String>,
    #[serde(default = "default_count")]
    pub count: u32,
    #[serde(default)]
    pub trigger_nets: Option<Vec<String>>,
    #[serde(default)]
    pub victim: Option<String>,
    #[serde(default)]
    pub observable: Option<String>,
    #[serde(default)]
    pub policy: SelectionPolicy,
    #[serde(default)]
    pub vary_passives: bool,
    #[serde(default)]
    pub rail_bindings: Option<RailBindings>,
    /// Restrict a series payload to one sink pin, as `REF.PIN`.
    #[serde(default)]
    pub restrict_sink: Option<String>,
    /// Override driver identification on the victim net, as `REF.PIN`.
    #[serde(default)]
    pub driver_override: Option<String>,
}

impl Default for InsertionConfig {
    fn default() -> Self {
        InsertionConfig {
            trigger_id: None,
            payload_id: None,
            count: 1,
            trigger_nets: None,
            victim: None,
            observable: None,
            policy: SelectionPolicy::default(),
            vary_passives: false,
            rail_bindings: None,
            restrict_sink: None,
            driver_override: None,
        }
    }
}

impl InsertionConfig {
    pub fn from_json(text: &str) -> Result<Self, InsertError> {
        let config: InsertionConfig =
            serde_json::from_str(text).map_err(|e| InsertError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), InsertError> {
        if self.count < 1 {
            return Err(InsertError::Config("count must be at least 1".into()));
        }
        self.policy.validate()?;
        Ok(())
    }
}

/// Ground truth for one inserted Trojan.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrojanManifest {
    pub trojan_index: u32,
    pub trigger_id: String,
    pub payload_id: String,
    pub added_refs: Vec<String>,
    pub added_nets: Vec<String>,
    pub trigger_input_nets: Vec<String>,
    pub victim_net: String,
    /// (driver-side net, sink-side net) for series payloads.
    pub split_net_names: Option<(String, String)>,
    pub observable_net: Option<String>,
    pub joint_activation_probability: Option<f64>,
    pub independence_assumed: bool,
    pub taxonomy: Vec<TaxonomyTag>,
    pub seed: u64,
    /// Values given to the inserted passive parts, keyed by reference.
    pub passive_values: BTreeMap<String, String>,
    pub leak_idle_level: Option<String>,
    pub driver_pin: Option<String>,
    pub warnings: Vec<String>,
}

/// On-disk shape of `manifest.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFile {
    pub schema_version: u32,
    pub trojans: Vec<TrojanManifest>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum InsertError {
    #[error("template port `{0}` is not bound")]
    UnboundPort(String),
    #[error("bound net `{0}` does not exist")]
    UnknownNet(String),
    #[error("cannot resolve supply rails: {0}")]
    RailUnresolvable(String),
    #[error("victim net `{0}` has no identifiable driver pin (no U/Q component)")]
    VictimHasNoDriver(String),
    #[error(transparent)]
    Selection(#[from] ActivityError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("config: {0}")]
    Config(String),
}

/// First unused `<prefix>TJ<k>` reference for the part kind.
pub fn allocate_refdes(graph: &PcbGraph, kind: PartKind) -> String {
    let prefix = kind.ref_prefix();
    let mut k = 0;
    loop {
        let candidate = format!("{prefix}TJ{k}");
        if !graph.has_component(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

fn allocate_tjnet(graph: &PcbGraph) -> String {
    let mut k = 0;
    loop {
        let candidate = format!("TJNET{k}");
        if !graph.has_net(&candidate) {
            return candidate;
        }
        k += 1;
    }
}

/// Instantiates a template into the graph: every part becomes a fresh
/// `*TJ<k>` component, internal nets become fresh `TJNET<k>` nets, and all
/// pins are wired per the template. Returns (added_refs, added_nets) with
/// refs aligned to the template part order.
pub fn instantiate_template(
    graph: &mut PcbGraph,
    template: &TrojanTemplate,
    binding: &BTreeMap<String, String>,
) -> Result<(Vec<String>, Vec<String>), InsertError> {
    for port in &template.ports {
        let net = binding.get(port).ok_or_else(|| InsertError::UnboundPort(port.clone()))?;
        if !graph.has_net(net) {
            return Err(InsertError::UnknownNet(net.clone()));
        }
    }

    let mut net_map: BTreeMap<&str, String> = BTreeMap::new();
    let mut added_nets = Vec::with_capacity(template.internal_nets.len());
    for internal in &template.internal_nets {
        let fresh = allocate_tjnet(graph);
        graph.add_net(&fresh)?;
        net_map.insert(internal.as_str(), fresh.clone());
        added_nets.push(fresh);
    }

    let mut added_refs = Vec::with_capacity(template.parts.len());
    for part in &template.parts {
        let reference = allocate_refdes(graph, part.kind);
        let mut component = Component::new(&reference, &part.value, part.kind.footprint());
        component.fields.push(("kind".to_string(), part.kind.name().to_string()));
        graph.add_component(component)?;
        for bind in &part.pins {
            let net = match &bind.net {
                TemplateNet::Port(p) => binding[p].clone(),
                TemplateNet::Internal(n) => net_map[n.as_str()].clone(),
            };
            graph.connect(PinRef::new(&reference, &bind.pin), &net)?;
        }
        added_refs.push(reference);
    }
    Ok((added_refs, added_nets))
}

fn parse_pin_spec(spec: &str) -> Result<PinRef, InsertError> {
    let (reference, pin) = spec
        .split_once('.')
        .ok_or_else(|| InsertError::Config(format!("pin spec `{spec}` must be REF.PIN")))?;
    if reference.is_empty() || pin.is_empty() {
        return Err(InsertError::Config(format!("pin spec `{spec}` must be REF.PIN")));
    }
    Ok(PinRef::new(reference, pin))
}

/// Passive values already on the board, for template variation.
pub fn collect_host_values(graph: &PcbGraph) -> HostValues {
    let mut host = HostValues::default();
    for comp in graph.components() {
        let kind = match alpha_prefix(&comp.reference) {
            "R" => PartKind::Resistor,
            "C" => PartKind::Capacitor,
            _ => continue,
        };
        if let Some(value) = parse_value(&comp.value) {
            if value > 0.0 {
                host.push(kind, value);
            }
        }
    }
    host
}

fn resolve_rails(
    graph: &PcbGraph,
    config: &InsertionConfig,
) -> Result<(String, String), InsertError> {
    match &config.rail_bindings {
        Some(bindings) => {
            for net in [&bindings.vdd, &bindings.gnd] {
                if !graph.has_net(net) {
                    return Err(InsertError::UnknownNet(net.clone()));
                }
            }
            Ok((bindings.vdd.clone(), bindings.gnd.clone()))
        }
        None => find_rails(graph).ok_or_else(|| {
            InsertError::RailUnresolvable(
                "no nets match the power naming heuristic; pass rail_bindings".into(),
            )
        }),
    }
}

/// How a payload attaches to the victim net.
enum PayloadWiring {
    Series,
    Tap,
    Shunt,
}

fn payload_wiring(payload: &TrojanTemplate) -> PayloadWiring {
    match payload.behavior.front() {
        BoolFn::MuxLeak2 => PayloadWiring::Tap,
        BoolFn::StuckAt { active_high: true } => PayloadWiring::Shunt,
        _ => PayloadWiring::Series,
    }
}

struct VictimCut {
    driver_side: String,
    sink_side: String,
    driver_pin: PinRef,
    warning: Option<String>,
}

/// Splits the victim net for a series payload: the driver pin (U/Q prefix, or
/// an explicit override) keeps the original net, sink pins move to the fresh
/// `<victim>_TJ<k>` net.
fn cut_victim(
    graph: &mut PcbGraph,
    victim: &str,
    config: &InsertionConfig,
) -> Result<VictimCut, InsertError> {
    let pins: Vec<PinRef> = graph
        .net_pins(victim)
        .ok_or_else(|| InsertError::UnknownNet(victim.to_string()))?
        .iter()
        .cloned()
        .collect();

    let driver_pin = match &config.driver_override {
        Some(spec) => {
            let pin = parse_pin_spec(spec)?;
            if !pins.contains(&pin) {
                return Err(InsertError::Config(format!(
                    "driver override {pin} is not on net `{victim}`"
                )));
            }
            pin
        }
        None => {
            let mut candidates: Vec<&PinRef> = pins
                .iter()
                .filter(|p| matches!(alpha_prefix(&p.reference), "U" | "Q"))
                .collect();
            candidates.sort();
            match candidates.first() {
                None => return Err(InsertError::VictimHasNoDriver(victim.to_string())),
                Some(first) => (*first).clone(),
            }
        }
    };

    let driver_candidates = pins
        .iter()
        .filter(|p| matches!(alpha_prefix(&p.reference), "U" | "Q"))
        .count();
    let warning = (config.driver_override.is_none() && driver_candidates > 1).then(|| {
        format!("victim `{victim}` has {driver_candidates} driver candidates; chose {driver_pin}")
    });

    let sinks: Vec<PinRef> = match &config.restrict_sink {
        Some(spec) => {
            let pin = parse_pin_spec(spec)?;
            if !pins.contains(&pin) || pin == driver_pin {
                return Err(InsertError::Config(format!(
                    "restrict_sink {pin} is not a sink pin on net `{victim}`"
                )));
            }
            vec![pin]
        }
        None => pins.iter().filter(|p| **p != driver_pin).cloned().collect(),
    };

    let (driver_side, sink_side) = graph.split_net(victim, &sinks)?;
    Ok(VictimCut { driver_side, sink_side, driver_pin, warning })
}

fn insert_one(
    graph: &mut PcbGraph,
    config: &InsertionConfig,
    profile: Option<&ActivityProfile>,
    library: &TemplateLibrary,
    index: u32,
) -> Result<TrojanManifest, InsertError> {
    let trojan_seed = seed::mix(config.policy.seed, u64::from(index));
    let mut warnings = Vec::new();

    // Template choice: explicit ids, or a random builtin pair.
    let mut pick_rng = seed::rng(seed::mix(trojan_seed, seed::fnv1a("pick-templates")));
    let trigger_base = match &config.trigger_id {
        Some(id) => library.get(id)?.clone(),
        None => {
            let triggers = library.triggers();
            triggers[rand::Rng::gen_range(&mut pick_rng, 0..triggers.len())].clone()
        }
    };
    let payload_base = match &config.payload_id {
        Some(id) => library.get(id)?.clone(),
        None => {
            let payloads = library.payloads();
            payloads[rand::Rng::gen_range(&mut pick_rng, 0..payloads.len())].clone()
        }
    };
    if trigger_base.kind != TemplateKind::Trigger {
        return Err(InsertError::Config(format!("`{}` is not a trigger", trigger_base.id)));
    }
    if payload_base.kind != TemplateKind::Payload {
        return Err(InsertError::Config(format!("`{}` is not a payload", payload_base.id)));
    }

    let (trigger, payload) = if config.vary_passives {
        let host = collect_host_values(graph);
        (
            vary_passives(&trigger_base, &host, seed::mix(trojan_seed, seed::fnv1a("vary-t"))),
            vary_passives(&payload_base, &host, seed::mix(trojan_seed, seed::fnv1a("vary-p"))),
        )
    } else {
        (trigger_base, payload_base)
    };

    let rails = resolve_rails(graph, config)?;

    // Trigger inputs, selected or explicit, before any mutation.
    let selection_policy = SelectionPolicy { seed: trojan_seed, ..config.policy.clone() };
    let trigger_nets: Vec<String> = match &config.trigger_nets {
        Some(nets) => {
            if nets.len() != trigger.input_arity() {
                return Err(InsertError::Config(format!(
                    "trigger_nets lists {} nets, trigger `{}` takes {}",
                    nets.len(),
                    trigger.id,
                    trigger.input_arity()
                )));
            }
            for net in nets {
                if !graph.has_net(net) {
                    return Err(InsertError::UnknownNet(net.clone()));
                }
            }
            nets.clone()
        }
        None => select_trigger_nets(graph, profile, &trigger, &selection_policy)?,
    };

    let victim = select_victim_net(graph, config.victim.as_deref(), trojan_seed)?;

    let joint_activation = match profile {
        None => None,
        Some(profile) => {
            let inputs: Vec<(String, bool)> = trigger_nets
                .iter()
                .cloned()
                .zip(trigger.activating_values())
                .collect();
            match joint_activation_probability(profile, &inputs) {
                Ok(p) => Some(p),
                Err(ActivityError::UnprofiledNet(net)) => {
                    warnings.push(format!("net `{net}` unprofiled; joint probability omitted"));
                    None
                }
                Err(other) => return Err(other.into()),
            }
        }
    };

    let ctx = ClassifyContext {
        trigger_timed: !trigger.behavior.is_combinational(),
        paired_payload_effect: Some(
            crate::templates::classify(&payload, &ClassifyContext::default())
                .iter()
                .find(|t| t.axis == crate::templates::TaxonomyAxis::PayloadEffect)
                .map(|t| t.value.clone())
                .unwrap_or_default(),
        ),
        ..ClassifyContext::default()
    };
    let mut taxonomy: std::collections::BTreeSet<TaxonomyTag> = classify(&trigger, &ctx);
    taxonomy.extend(classify(&payload, &ctx));

    // TRIG_EN is materialized as a fresh net joining the two instances.
    let trig_en_net = allocate_tjnet(graph);
    graph.add_net(&trig_en_net)?;
    let mut added_nets = vec![trig_en_net.clone()];

    let mut trigger_binding: BTreeMap<String, String> = BTreeMap::new();
    for (i, net) in trigger_nets.iter().enumerate() {
        trigger_binding.insert(crate::templates::trig_port(i), net.clone());
    }
    trigger_binding.insert(PORT_TRIG_EN.to_string(), trig_en_net.clone());
    trigger_binding.insert(PORT_VDD.to_string(), rails.0.clone());
    trigger_binding.insert(PORT_GND.to_string(), rails.1.clone());
    let (trigger_refs, trigger_nets_added) =
        instantiate_template(graph, &trigger, &trigger_binding)?;
    added_nets.extend(trigger_nets_added);

    let mut payload_binding: BTreeMap<String, String> = BTreeMap::new();
    payload_binding.insert(PORT_TRIG_EN.to_string(), trig_en_net.clone());
    payload_binding.insert(PORT_VDD.to_string(), rails.0.clone());
    payload_binding.insert(PORT_GND.to_string(), rails.1.clone());

    let mut split_net_names = None;
    let mut observable_net = None;
    let mut leak_idle_level = None;
    let mut driver_pin = None;

    match payload_wiring(&payload) {
        PayloadWiring::Series => {
            let cut = cut_victim(graph, &victim, config)?;
            if let Some(w) = cut.warning {
                warnings.push(w);
            }
            payload_binding.insert(PORT_VICTIM_IN.to_string(), cut.driver_side.clone());
            payload_binding.insert(PORT_VICTIM_MOD.to_string(), cut.sink_side.clone());
            added_nets.push(cut.sink_side.clone());
            driver_pin = Some(cut.driver_pin.to_string());
            split_net_names = Some((cut.driver_side, cut.sink_side));
        }
        PayloadWiring::Tap => {
            let hints: Vec<String> = config.observable.iter().cloned().collect();
            let observable = select_observable_net(graph, &hints)?;
            payload_binding.insert(PORT_VICTIM_IN.to_string(), victim.clone());
            payload_binding.insert(PORT_LEAK_OUT.to_string(), observable.clone());
            observable_net = Some(observable);
            leak_idle_level = Some("high".to_string());
        }
        PayloadWiring::Shunt => {
            payload_binding.insert(PORT_VICTIM_MOD.to_string(), victim.clone());
        }
    }

    let (payload_refs, payload_nets_added) =
        instantiate_template(graph, &payload, &payload_binding)?;
    added_nets.extend(payload_nets_added);

    let mut passive_values = BTreeMap::new();
    for (template, refs) in [(&trigger, &trigger_refs), (&payload, &payload_refs)] {
        for (part, reference) in template.parts.iter().zip(refs.iter()) {
            if part.kind.is_passive() {
                passive_values.insert(reference.clone(), part.value.clone());
            }
        }
    }

    let mut added_refs = trigger_refs;
    added_refs.extend(payload_refs);

    Ok(TrojanManifest {
        trojan_index: index,
        trigger_id: trigger.id.clone(),
        payload_id: payload.id.clone(),
        added_refs,
        added_nets,
        trigger_input_nets: trigger_nets,
        victim_net: victim,
        split_net_names,
        observable_net,
        joint_activation_probability: joint_activation,
        independence_assumed: config.policy.independence_assumed,
        taxonomy: taxonomy.into_iter().collect(),
        seed: trojan_seed,
        passive_values,
        leak_idle_level,
        driver_pin,
        warnings,
    })
}

/// Inserts `config.count` Trojans, each with an independent seed derived from
/// the policy seed and its index.
pub fn insert_trojans(
    graph: &mut PcbGraph,
    config: &InsertionConfig,
    profile: Option<&ActivityProfile>,
    library: &TemplateLibrary,
) -> Result<Vec<TrojanManifest>, InsertError> {
    config.validate()?;
    if let Some(profile) = profile {
        profile.bind(graph)?;
    }
    let mut manifests = Vec::with_capacity(config.count as usize);
    for index in 0..config.count {
        manifests.push(insert_one(graph, config, profile, library, index)?);
    }
    Ok(manifests)
}

#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

impl PipelineError {
    fn new(stage: &'static str, message: impl std::fmt::Display) -> Self {
        PipelineError { stage, message: message.to_string() }
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub netlist_text: String,
    pub netlist: Netlist,
    pub manifests: Vec<TrojanManifest>,
    pub report: VerificationReport,
    pub warnings: Vec<String>,
}

/// The in-memory pipeline: graph conversion, insertion, conversion back,
/// emission and verification. The emitted text is re-parsed as a self-check.
pub fn run_pipeline_on(
    netlist: &Netlist,
    config: &InsertionConfig,
    profile: Option<&ActivityProfile>,
    library: &TemplateLibrary,
) -> Result<PipelineOutput, PipelineError> {
    let mut graph = build_graph(netlist);
    let manifests = insert_trojans(&mut graph, config, profile, library)
        .map_err(|e| PipelineError::new("insert", e))?;

    let (out_netlist, warnings) = graph.to_netlist();
    let text = write_netlist(&out_netlist);
    let reparsed =
        parse_netlist(&text).map_err(|e| PipelineError::new("emit", format!("output does not reparse: {e}")))?;
    if !reparsed.structurally_eq(&out_netlist) {
        return Err(PipelineError::new("emit", "output re-parse is not structurally identical"));
    }

    let mut report = check_design_rules(&out_netlist, &graph);
    for manifest in &manifests {
        let connectivity = check_connectivity(&graph, manifest)
            .map_err(|e: VerifyError| PipelineError::new("verify", e))?;
        report.merge(connectivity);
    }
    report.finalize();

    Ok(PipelineOutput { netlist_text: text, netlist: out_netlist, manifests, report, warnings })
}

/// File-based pipeline entry: reads the board netlist and optional trace,
/// then runs [`run_pipeline_on`]. Errors are tagged with their stage.
pub fn run_pipeline(
    netlist_path: &std::path::Path,
    config: &InsertionConfig,
    trace_path: Option<&std::path::Path>,
) -> Result<PipelineOutput, PipelineError> {
    let text = std::fs::read_to_string(netlist_path)
        .map_err(|e| PipelineError::new("read", format!("{}: {e}", netlist_path.display())))?;
    let netlist = parse_netlist(&text).map_err(|e| PipelineError::new("parse", e))?;
    let profile = match trace_path {
        None => None,
        Some(path) => Some(load_trace(path).map_err(|e| PipelineError::new("trace", e))?),
    };
    let library = TemplateLibrary::builtin();
    run_pipeline_on(&netlist, config, profile.as_ref(), &library)
}
