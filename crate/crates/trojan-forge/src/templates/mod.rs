//! Parametric trigger and payload circuit fragments built from discrete
//! parts, with declared behavioral models, logic-family synthesis, passive
//! value variation and taxonomy tagging.

mod builtin;
mod file;
mod synth;
mod taxonomy;
mod vary;

pub use builtin::{builtin_templates, stuck_at_payload, TemplateLibrary};
pub use file::{load_templates_from_dir, parse_template, write_template};
pub use synth::synthesize_gate;
pub use taxonomy::{classify, vocabulary, ClassifyContext, TaxonomyAxis, TaxonomyTag};
pub use vary::{vary_passives, HostValues};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::values::parse_value;

pub const PORT_TRIG_EN: &str = "TRIG_EN";
pub const PORT_VICTIM_IN: &str = "VICTIM_IN";
pub const PORT_VICTIM_MOD: &str = "VICTIM_MOD";
pub const PORT_LEAK_OUT: &str = "LEAK_OUT";
pub const PORT_VDD: &str = "VDD";
pub const PORT_GND: &str = "GND";

pub fn trig_port(i: usize) -> String {
    format!("TRIG{}", i + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Trigger,
    Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartKind {
    Resistor,
    Capacitor,
    Diode,
    Npn,
    Pnp,
    OpAmp,
}

impl PartKind {
    pub fn ref_prefix(self) -> &'static str {
        match self {
            PartKind::Resistor => "R",
            PartKind::Capacitor => "C",
            PartKind::Diode => "D",
            PartKind::Npn | PartKind::Pnp => "Q",
            PartKind::OpAmp => "U",
        }
    }

    pub fn pin_count(self) -> usize {
        match self {
            PartKind::Resistor | PartKind::Capacitor | PartKind::Diode => 2,
            PartKind::Npn | PartKind::Pnp => 3,
            PartKind::OpAmp => 5,
        }
    }

    pub fn is_passive(self) -> bool {
        matches!(self, PartKind::Resistor | PartKind::Capacitor)
    }

    /// Default footprint for generated benchmark components.
    pub fn footprint(self) -> &'static str {
        match self {
            PartKind::Resistor => "Resistor_SMD:R_0805_2012Metric",
            PartKind::Capacitor => "Capacitor_SMD:C_0805_2012Metric",
            PartKind::Diode => "Diode_SMD:D_SOD-323",
            PartKind::Npn | PartKind::Pnp => "Package_TO_SOT_SMD:SOT-23",
            PartKind::OpAmp => "Package_TO_SOT_SMD:SOT-23-5",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PartKind::Resistor => "resistor",
            PartKind::Capacitor => "capacitor",
            PartKind::Diode => "diode",
            PartKind::Npn => "npn",
            PartKind::Pnp => "pnp",
            PartKind::OpAmp => "opamp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "resistor" => Some(PartKind::Resistor),
            "capacitor" => Some(PartKind::Capacitor),
            "diode" => Some(PartKind::Diode),
            "npn" => Some(PartKind::Npn),
            "pnp" => Some(PartKind::Pnp),
            "opamp" => Some(PartKind::OpAmp),
            _ => None,
        }
    }
}

// Pin designator conventions, fixed so the structural evaluator can assign
// terminal roles: diode 1=K 2=A (KiCad Device:D), transistor 1=B 2=C 3=E,
// opamp 1=IN+ 2=IN- 3=OUT 4=V+ 5=V-.
pub const DIODE_CATHODE: &str = "1";
pub const DIODE_ANODE: &str = "2";
pub const BJT_BASE: &str = "1";
pub const BJT_COLLECTOR: &str = "2";
pub const BJT_EMITTER: &str = "3";
pub const OPAMP_IN_P: &str = "1";
pub const OPAMP_IN_N: &str = "2";
pub const OPAMP_OUT: &str = "3";
pub const OPAMP_VP: &str = "4";
pub const OPAMP_VN: &str = "5";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogicFamily {
    Rtl,
    Dtl,
    Ttl,
    Mixed,
}

impl LogicFamily {
    pub fn name(self) -> &'static str {
        match self {
            LogicFamily::Rtl => "RTL",
            LogicFamily::Dtl => "DTL",
            LogicFamily::Ttl => "TTL",
            LogicFamily::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateFn {
    And,
    Nand,
    Or,
    Nor,
}

impl GateFn {
    pub fn name(self) -> &'static str {
        match self {
            GateFn::And => "AND",
            GateFn::Nand => "NAND",
            GateFn::Or => "OR",
            GateFn::Nor => "NOR",
        }
    }

    pub fn eval(self, bits: &[bool]) -> bool {
        let all = bits.iter().all(|b| *b);
        let any = bits.iter().any(|b| *b);
        match self {
            GateFn::And => all,
            GateFn::Nand => !all,
            GateFn::Or => any,
            GateFn::Nor => !any,
        }
    }
}

/// Declared boolean function of a combinational template. This is the
/// specification side of the dual route; the structural evaluator must agree
/// with it on every input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoolFn {
    Gate { f: GateFn, n: usize },
    /// First `and_n` inputs must be high and the remaining `nor_n` low.
    AndNorMix { and_n: usize, nor_n: usize },
    /// Payload: victim XOR trig_en.
    Xor2,
    /// Payload: leak output follows the victim while selected, idles high.
    MuxLeak2,
    /// Payload: victim forced low while the transistor conducts. With
    /// `active_high` the transistor conducts when TRIG_EN is high.
    StuckAt { active_high: bool },
}

impl BoolFn {
    pub fn arity(&self) -> usize {
        match self {
            BoolFn::Gate { n, .. } => *n,
            BoolFn::AndNorMix { and_n, nor_n } => and_n + nor_n,
            BoolFn::Xor2 | BoolFn::MuxLeak2 | BoolFn::StuckAt { .. } => 2,
        }
    }

    pub fn eval(&self, bits: &[bool]) -> bool {
        debug_assert_eq!(bits.len(), self.arity());
        match self {
            BoolFn::Gate { f, .. } => f.eval(bits),
            BoolFn::AndNorMix { and_n, .. } => {
                bits[..*and_n].iter().all(|b| *b) && bits[*and_n..].iter().all(|b| !*b)
            }
            BoolFn::Xor2 => bits[0] ^ bits[1],
            BoolFn::MuxLeak2 => {
                if bits[1] {
                    bits[0]
                } else {
                    true
                }
            }
            BoolFn::StuckAt { active_high } => {
                let conducting = if *active_high { bits[1] } else { !bits[1] };
                if conducting {
                    false
                } else {
                    bits[0]
                }
            }
        }
    }

    /// The input pattern that drives the output to its minority value; for
    /// trigger functions this is the rare activating assignment.
    pub fn activating_values(&self) -> Vec<bool> {
        match self {
            BoolFn::Gate { f, n } => match f {
                GateFn::And | GateFn::Nand => vec![true; *n],
                GateFn::Or | GateFn::Nor => vec![false; *n],
            },
            BoolFn::AndNorMix { and_n, nor_n } => {
                let mut v = vec![true; *and_n];
                v.extend(std::iter::repeat(false).take(*nor_n));
                v
            }
            BoolFn::Xor2 | BoolFn::MuxLeak2 | BoolFn::StuckAt { .. } => vec![true, true],
        }
    }
}

/// RC trigger stage parameters. `r_discharge` is `None` when a series diode
/// holds the accumulated charge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RcParams {
    pub r_charge: f64,
    pub r_discharge: Option<f64>,
    pub c: f64,
    pub vdd: f64,
    pub r1: f64,
    pub r2: f64,
}

impl RcParams {
    pub fn vref(&self) -> f64 {
        self.vdd * self.r2 / (self.r1 + self.r2)
    }

    pub fn validate(&self) -> Result<(), TemplateError> {
        let positive = self.r_charge > 0.0
            && self.c > 0.0
            && self.vdd > 0.0
            && self.r1 > 0.0
            && self.r2 > 0.0
            && self.r_discharge.map_or(true, |r| r > 0.0);
        if !positive {
            return Err(TemplateError::InvalidRcParams("all parameters must be positive".into()));
        }
        let vref = self.vref();
        if !(vref > 0.0 && vref < self.vdd) {
            return Err(TemplateError::InvalidRcParams("Vref must lie strictly inside (0, Vdd)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BehaviorModel {
    Combinational(BoolFn),
    /// A combinational front end charging an RC stage behind a comparator.
    TimedRc { front: BoolFn, params: RcParams },
}

impl BehaviorModel {
    pub fn arity(&self) -> usize {
        match self {
            BehaviorModel::Combinational(f) => f.arity(),
            BehaviorModel::TimedRc { front, .. } => front.arity(),
        }
    }

    pub fn front(&self) -> &BoolFn {
        match self {
            BehaviorModel::Combinational(f) => f,
            BehaviorModel::TimedRc { front, .. } => front,
        }
    }

    pub fn is_combinational(&self) -> bool {
        matches!(self, BehaviorModel::Combinational(_))
    }
}

/// Where a part pin lands: an external port or a template-internal net.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TemplateNet {
    Port(String),
    Internal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PinBind {
    pub pin: String,
    pub net: TemplateNet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemplatePart {
    /// Placeholder designator within the template, e.g. `R3`.
    pub ref_hint: String,
    pub kind: PartKind,
    pub value: String,
    pub pins: Vec<PinBind>,
    /// Value participates in the TimedRc behavioral parameters; passive
    /// variation leaves it alone so parts and declared behavior stay
    /// consistent.
    pub rc_bound: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrojanTemplate {
    pub id: String,
    pub kind: TemplateKind,
    pub ports: Vec<String>,
    pub parts: Vec<TemplatePart>,
    pub internal_nets: Vec<String>,
    pub behavior: BehaviorModel,
    pub family: LogicFamily,
    pub taxonomy: std::collections::BTreeSet<TaxonomyTag>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TemplateError {
    #[error("unsupported input arity {0}: expected 2..=8")]
    UnsupportedArity(usize),
    #[error("gate synthesis does not target the {0} family")]
    UnsupportedFamily(String),
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("invalid RC parameters: {0}")]
    InvalidRcParams(String),
    #[error("template `{id}`: {message}")]
    Malformed { id: String, message: String },
    #[error("taxonomy value `{value}` is not in the {axis} vocabulary")]
    UnknownTaxonomyValue { axis: String, value: String },
    #[error("template file {path}: {message}")]
    File { path: String, message: String },
}

impl TrojanTemplate {
    /// Trigger input count, or 2 for payloads ({victim, TRIG_EN}).
    pub fn input_arity(&self) -> usize {
        self.behavior.arity()
    }

    /// Input port names in behavioral order.
    pub fn input_ports(&self) -> Vec<String> {
        match self.kind {
            TemplateKind::Trigger => (0..self.input_arity()).map(trig_port).collect(),
            TemplateKind::Payload => {
                // A shunt payload attaches straight to the victim net, so its
                // victim port doubles as the output.
                let victim = if self.ports.iter().any(|p| p == PORT_VICTIM_IN) {
                    PORT_VICTIM_IN
                } else {
                    PORT_VICTIM_MOD
                };
                vec![victim.to_string(), PORT_TRIG_EN.to_string()]
            }
        }
    }

    pub fn output_port(&self) -> &'static str {
        match self.kind {
            TemplateKind::Trigger => PORT_TRIG_EN,
            TemplateKind::Payload => match self.behavior.front() {
                BoolFn::MuxLeak2 => PORT_LEAK_OUT,
                _ => PORT_VICTIM_MOD,
            },
        }
    }

    pub fn activating_values(&self) -> Vec<bool> {
        self.behavior.front().activating_values()
    }

    pub fn has_port(&self, name: &str) -> bool {
        self.ports.iter().any(|p| p == name)
    }

    /// Structural well-formedness: pin arities, declared nets, port usage
    /// and behavior arity all line up.
    pub fn validate(&self) -> Result<(), TemplateError> {
        let fail = |message: String| TemplateError::Malformed { id: self.id.clone(), message };

        match self.kind {
            TemplateKind::Trigger => {
                if !self.has_port(PORT_TRIG_EN) {
                    return Err(fail("trigger must expose TRIG_EN".into()));
                }
                for i in 0..self.input_arity() {
                    if !self.has_port(&trig_port(i)) {
                        return Err(fail(format!("missing trigger input port {}", trig_port(i))));
                    }
                }
            }
            TemplateKind::Payload => {
                if !self.has_port(PORT_TRIG_EN) {
                    return Err(fail("payload must consume TRIG_EN".into()));
                }
                if self.input_arity() != 2 {
                    return Err(fail("payload behavior must take {victim, TRIG_EN}".into()));
                }
            }
        }

        if let BehaviorModel::TimedRc { params, .. } = &self.behavior {
            params.validate()?;
        }

        let mut used_ports = std::collections::BTreeSet::new();
        let mut used_internal = std::collections::BTreeSet::new();
        for part in &self.parts {
            if part.pins.len() != part.kind.pin_count() {
                return Err(fail(format!(
                    "part {} has {} pin bindings, expected {}",
                    part.ref_hint,
                    part.pins.len(),
                    part.kind.pin_count()
                )));
            }
            let mut seen = std::collections::BTreeSet::new();
            for bind in &part.pins {
                if !seen.insert(bind.pin.as_str()) {
                    return Err(fail(format!("part {} binds pin {} twice", part.ref_hint, bind.pin)));
                }
                match &bind.net {
                    TemplateNet::Port(p) => {
                        if !self.has_port(p) {
                            return Err(fail(format!("part {} binds undeclared port {p}", part.ref_hint)));
                        }
                        used_ports.insert(p.clone());
                    }
                    TemplateNet::Internal(n) => {
                        if !self.internal_nets.iter().any(|x| x == n) {
                            return Err(fail(format!("part {} binds undeclared net {n}", part.ref_hint)));
                        }
                        used_internal.insert(n.clone());
                    }
                }
            }
        }
        for port in &self.ports {
            if !used_ports.contains(port) {
                return Err(fail(format!("port {port} is not bound to any part pin")));
            }
        }
        for net in &self.internal_nets {
            if !used_internal.contains(net) {
                return Err(fail(format!("internal net {net} is unused")));
            }
        }
        // Every resistor must carry a numeric value for strength comparison.
        for part in &self.parts {
            if part.kind == PartKind::Resistor && parse_value(&part.value).is_none() {
                return Err(fail(format!("resistor {} value `{}` is not numeric", part.ref_hint, part.value)));
            }
        }
        Ok(())
    }

    /// Multiset of part kinds, for structural diversity checks.
    pub fn part_multiset(&self) -> std::collections::BTreeMap<PartKind, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for part in &self.parts {
            *counts.entry(part.kind).or_insert(0) += 1;
        }
        counts
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boolfn_arity_and_eval() {
        let f = BoolFn::Gate { f: GateFn::And, n: 4 };
        assert_eq!(f.arity(), 4);
        assert!(f.eval(&[true; 4]));
        assert!(!f.eval(&[true, true, true, false]));

        let m = BoolFn::AndNorMix { and_n: 4, nor_n: 4 };
        let mut bits = vec![true, true, true, true, false, false, false, false];
        assert!(m.eval(&bits));
        bits[7] = true;
        assert!(!m.eval(&bits));
        assert_eq!(m.activating_values(), vec![true, true, true, true, false, false, false, false]);
    }

    #[test]
    fn payload_formulas() {
        assert!(!BoolFn::Xor2.eval(&[true, true]));
        assert!(BoolFn::Xor2.eval(&[false, true]));
        assert!(BoolFn::MuxLeak2.eval(&[false, false])); // idles high
        assert!(!BoolFn::MuxLeak2.eval(&[false, true]));
        assert!(!BoolFn::StuckAt { active_high: true }.eval(&[true, true]));
        assert!(BoolFn::StuckAt { active_high: true }.eval(&[true, false]));
        assert!(!BoolFn::StuckAt { active_high: false }.eval(&[true, false]));
    }

    #[test]
    fn rc_params_validate() {
        let good = RcParams { r_charge: 1e4, r_discharge: None, c: 1e-5, vdd: 5.0, r1: 1e4, r2: 1e4 };
        assert!(good.validate().is_ok());
        assert!((good.vref() - 2.5).abs() < 1e-12);
        let bad = RcParams { r_charge: 0.0, ..good };
        assert!(bad.validate().is_err());
        let bad = RcParams { r2: f64::INFINITY, ..good };
        assert!(bad.validate().is_err());
    }
}
