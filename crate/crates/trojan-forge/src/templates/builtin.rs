//! The embedded template library: five triggers and three payloads, matching
//! the fabricated combination set (5 x 3 = 15 pairs).

use indexmap::IndexMap;

use super::synth::{build_gate, port, synthesize_gate, CircuitBuilder, R_PULLDOWN, R_PULLUP};
use super::taxonomy::{intrinsic_payload_tags, intrinsic_trigger_tags};
use super::{
    trig_port, BehaviorModel, BoolFn, GateFn, LogicFamily, RcParams, TemplateError, TemplateKind,
    TemplateNet, TrojanTemplate, PORT_GND, PORT_LEAK_OUT, PORT_TRIG_EN, PORT_VDD, PORT_VICTIM_IN,
    PORT_VICTIM_MOD,
};

const RC_CHARGE_OHMS: f64 = 10_000.0;
const RC_CAP_FARADS: f64 = 1e-5;
const RC_CAP_VALUE: &str = "10u";
const RC_DIVIDER_OHMS: f64 = 10_000.0;
const RC_VDD_VOLTS: f64 = 5.0;

fn trigger_ports(n: usize) -> Vec<String> {
    let mut ports: Vec<String> = (0..n).map(trig_port).collect();
    ports.push(PORT_TRIG_EN.to_string());
    ports.push(PORT_VDD.to_string());
    ports.push(PORT_GND.to_string());
    ports
}

/// T1: 4-input AND trigger in RTL.
fn t1() -> TrojanTemplate {
    let mut t = synthesize_gate(GateFn::And, 4, LogicFamily::Rtl).expect("T1 synthesis");
    t.id = "T1".to_string();
    t
}

/// T2: 4-input NOR trigger in DTL.
fn t2() -> TrojanTemplate {
    let mut t = synthesize_gate(GateFn::Nor, 4, LogicFamily::Dtl).expect("T2 synthesis");
    t.id = "T2".to_string();
    t
}

/// Mixed 8-input condition: AND over TRIG1..4, NOR over TRIG5..8, combined
/// with an AND stage. Writes the condition to `output`.
fn mixed_condition(builder: &mut CircuitBuilder, output: TemplateNet) {
    let and_inputs: Vec<TemplateNet> = (0..4).map(|i| port(trig_port(i))).collect();
    let nor_inputs: Vec<TemplateNet> = (4..8).map(|i| port(trig_port(i))).collect();
    let and_out = builder.fresh_net();
    let nor_out = builder.fresh_net();
    build_gate(builder, GateFn::And, LogicFamily::Rtl, &and_inputs, and_out.clone())
        .expect("mixed AND stage");
    build_gate(builder, GateFn::Nor, LogicFamily::Dtl, &nor_inputs, nor_out.clone())
        .expect("mixed NOR stage");
    build_gate(builder, GateFn::And, LogicFamily::Rtl, &[and_out, nor_out], output)
        .expect("mixed combiner");
}

/// T3: 8-input mixed (AND + NOR) combinational trigger.
fn t3() -> TrojanTemplate {
    let mut builder = CircuitBuilder::new();
    mixed_condition(&mut builder, port(PORT_TRIG_EN));
    let (parts, internal_nets) = builder.finish();
    TrojanTemplate {
        id: "T3".to_string(),
        kind: TemplateKind::Trigger,
        ports: trigger_ports(8),
        parts,
        internal_nets,
        behavior: BehaviorModel::Combinational(BoolFn::AndNorMix { and_n: 4, nor_n: 4 }),
        family: LogicFamily::Mixed,
        taxonomy: intrinsic_trigger_tags(false),
    }
}

/// RC accumulator triggers: the mixed condition charges a capacitor behind a
/// comparator. With the diode the charge is held between excitations (T4);
/// without it the capacitor drains back through the charge path (T5).
fn rc_trigger(id: &str, with_diode: bool) -> TrojanTemplate {
    let mut builder = CircuitBuilder::new();
    let condition = builder.fresh_net();
    mixed_condition(&mut builder, condition.clone());

    let v_cap = builder.fresh_net();
    if with_diode {
        let charge_mid = builder.fresh_net();
        builder.resistor(RC_CHARGE_OHMS, condition, charge_mid.clone());
        builder.rc_bound();
        builder.diode(charge_mid, v_cap.clone());
    } else {
        builder.resistor(RC_CHARGE_OHMS, condition, v_cap.clone());
        builder.rc_bound();
    }
    builder.capacitor(RC_CAP_VALUE, v_cap.clone(), port(PORT_GND));
    builder.rc_bound();

    let v_ref = builder.fresh_net();
    builder.resistor(RC_DIVIDER_OHMS, port(PORT_VDD), v_ref.clone());
    builder.rc_bound();
    builder.resistor(RC_DIVIDER_OHMS, v_ref.clone(), port(PORT_GND));
    builder.rc_bound();
    builder.opamp(v_cap, v_ref, port(PORT_TRIG_EN));

    let (parts, internal_nets) = builder.finish();
    let params = RcParams {
        r_charge: RC_CHARGE_OHMS,
        r_discharge: if with_diode { None } else { Some(RC_CHARGE_OHMS) },
        c: RC_CAP_FARADS,
        vdd: RC_VDD_VOLTS,
        r1: RC_DIVIDER_OHMS,
        r2: RC_DIVIDER_OHMS,
    };
    TrojanTemplate {
        id: id.to_string(),
        kind: TemplateKind::Trigger,
        ports: trigger_ports(8),
        parts,
        internal_nets,
        behavior: BehaviorModel::TimedRc {
            front: BoolFn::AndNorMix { and_n: 4, nor_n: 4 },
            params,
        },
        family: LogicFamily::Mixed,
        taxonomy: intrinsic_trigger_tags(true),
    }
}

/// P1: XOR payload in RTL. The victim is re-driven through the gate, so the
/// signal inverts while TRIG_EN is high and passes through otherwise.
fn p1() -> TrojanTemplate {
    let mut builder = CircuitBuilder::new();
    let victim = port(PORT_VICTIM_IN);
    let trig = port(PORT_TRIG_EN);

    let not_victim = builder.fresh_net();
    let not_trig = builder.fresh_net();
    builder.inverter(victim.clone(), not_victim.clone());
    builder.inverter(trig.clone(), not_trig.clone());

    // XNOR node: pulled low by (victim & !trig) or (!victim & trig).
    let xnor = builder.fresh_net();
    builder.resistor(R_PULLUP, port(PORT_VDD), xnor.clone());
    builder.series_chain(&[victim, not_trig], xnor.clone(), port(PORT_GND));
    builder.series_chain(&[not_victim, trig], xnor.clone(), port(PORT_GND));

    builder.inverter(xnor, port(PORT_VICTIM_MOD));

    let (parts, internal_nets) = builder.finish();
    TrojanTemplate {
        id: "P1".to_string(),
        kind: TemplateKind::Payload,
        ports: vec![
            PORT_VICTIM_IN.to_string(),
            PORT_VICTIM_MOD.to_string(),
            PORT_TRIG_EN.to_string(),
            PORT_VDD.to_string(),
            PORT_GND.to_string(),
        ],
        parts,
        internal_nets,
        behavior: BehaviorModel::Combinational(BoolFn::Xor2),
        family: LogicFamily::Rtl,
        taxonomy: intrinsic_payload_tags("corrupt-function/invert"),
    }
}

/// P2: 2:1 MUX leak. While selected the leak output follows the tapped
/// victim; dormant it idles high off the supply.
fn p2() -> TrojanTemplate {
    let mut builder = CircuitBuilder::new();
    let trig = port(PORT_TRIG_EN);
    let leak = port(PORT_LEAK_OUT);

    builder.pass_npn(trig.clone(), port(PORT_VICTIM_IN), leak.clone());
    let not_trig = builder.fresh_net();
    builder.inverter(trig, not_trig.clone());
    builder.pass_npn(not_trig, port(PORT_VDD), leak);

    let (parts, internal_nets) = builder.finish();
    TrojanTemplate {
        id: "P2".to_string(),
        kind: TemplateKind::Payload,
        ports: vec![
            PORT_VICTIM_IN.to_string(),
            PORT_LEAK_OUT.to_string(),
            PORT_TRIG_EN.to_string(),
            PORT_VDD.to_string(),
            PORT_GND.to_string(),
        ],
        parts,
        internal_nets,
        behavior: BehaviorModel::Combinational(BoolFn::MuxLeak2),
        family: LogicFamily::Mixed,
        taxonomy: intrinsic_payload_tags("leak-information"),
    }
}

/// P3: single-transistor stuck-at payload.
///
/// `active_high` (variant c) shunts the victim net to ground while TRIG_EN
/// is high. The low-active variant (b) passes the victim through a series
/// switch that opens when TRIG_EN drops, letting a pull-down force it low.
pub fn stuck_at_payload(active_high: bool) -> TrojanTemplate {
    let mut builder = CircuitBuilder::new();
    let (id, ports) = if active_high {
        builder.pass_npn(port(PORT_TRIG_EN), port(PORT_VICTIM_MOD), port(PORT_GND));
        (
            "P3",
            vec![PORT_VICTIM_MOD.to_string(), PORT_TRIG_EN.to_string(), PORT_GND.to_string()],
        )
    } else {
        builder.pass_npn(port(PORT_TRIG_EN), port(PORT_VICTIM_IN), port(PORT_VICTIM_MOD));
        builder.resistor(R_PULLDOWN, port(PORT_VICTIM_MOD), port(PORT_GND));
        (
            "P3B",
            vec![
                PORT_VICTIM_IN.to_string(),
                PORT_VICTIM_MOD.to_string(),
                PORT_TRIG_EN.to_string(),
                PORT_GND.to_string(),
            ],
        )
    };
    let (parts, internal_nets) = builder.finish();
    TrojanTemplate {
        id: id.to_string(),
        kind: TemplateKind::Payload,
        ports,
        parts,
        internal_nets,
        behavior: BehaviorModel::Combinational(BoolFn::StuckAt { active_high }),
        family: LogicFamily::Rtl,
        taxonomy: intrinsic_payload_tags("corrupt-function/stuck-at"),
    }
}

/// The embedded template set: triggers T1..T5 followed by payloads P1..P3.
pub fn builtin_templates() -> Vec<TrojanTemplate> {
    vec![
        t1(),
        t2(),
        t3(),
        rc_trigger("T4", true),
        rc_trigger("T5", false),
        p1(),
        p2(),
        stuck_at_payload(true),
    ]
}

/// Id-indexed template collection shared read-only across insertions.
#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    templates: IndexMap<String, TrojanTemplate>,
}

impl TemplateLibrary {
    pub fn builtin() -> Self {
        let mut templates = IndexMap::new();
        for t in builtin_templates() {
            templates.insert(t.id.clone(), t);
        }
        TemplateLibrary { templates }
    }

    pub fn insert(&mut self, template: TrojanTemplate) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn get(&self, id: &str) -> Result<&TrojanTemplate, TemplateError> {
        self.templates.get(id).ok_or_else(|| TemplateError::UnknownTemplate(id.to_string()))
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(String::as_str)
    }

    pub fn triggers(&self) -> Vec<&TrojanTemplate> {
        self.templates.values().filter(|t| t.kind == TemplateKind::Trigger).collect()
    }

    pub fn payloads(&self) -> Vec<&TrojanTemplate> {
        self.templates.values().filter(|t| t.kind == TemplateKind::Payload).collect()
    }

    /// Exhaustive (trigger, payload) id pairing in library order.
    pub fn all_pairs(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        for trigger in self.triggers() {
            for payload in self.payloads() {
                pairs.push((trigger.id.clone(), payload.id.clone()));
            }
        }
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_counts_are_five_and_three() {
        let lib = TemplateLibrary::builtin();
        assert_eq!(lib.triggers().len(), 5);
        assert_eq!(lib.payloads().len(), 3);
        assert_eq!(lib.all_pairs().len(), 15);
    }

    #[test]
    fn builtin_templates_validate() {
        for t in builtin_templates() {
            t.validate().unwrap_or_else(|e| panic!("{}: {e}", t.id));
        }
    }

    #[test]
    fn t1_is_four_input_and() {
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        assert_eq!(
            t1.behavior,
            BehaviorModel::Combinational(BoolFn::Gate { f: GateFn::And, n: 4 })
        );
        assert_eq!(t1.family, LogicFamily::Rtl);
    }

    #[test]
    fn t4_is_timed_with_charge_hold() {
        let lib = TemplateLibrary::builtin();
        let t4 = lib.get("T4").unwrap();
        match &t4.behavior {
            BehaviorModel::TimedRc { params, front } => {
                assert_eq!(params.r_discharge, None, "diode holds the charge");
                assert_eq!(front.arity(), 8);
            }
            other => panic!("unexpected behavior {other:?}"),
        }
        assert!(t4.parts.iter().any(|p| p.kind == super::super::PartKind::Diode && p.rc_bound == false));
        assert!(t4.parts.iter().any(|p| p.kind == super::super::PartKind::Capacitor));
    }

    #[test]
    fn t5_discharges_without_diode() {
        let lib = TemplateLibrary::builtin();
        let t5 = lib.get("T5").unwrap();
        match &t5.behavior {
            BehaviorModel::TimedRc { params, .. } => {
                assert_eq!(params.r_discharge, Some(RC_CHARGE_OHMS));
            }
            other => panic!("unexpected behavior {other:?}"),
        }
    }

    #[test]
    fn payload_ports_match_wiring_style() {
        let lib = TemplateLibrary::builtin();
        assert!(lib.get("P1").unwrap().has_port(PORT_VICTIM_MOD));
        assert!(lib.get("P1").unwrap().has_port(PORT_VICTIM_IN));
        assert!(lib.get("P2").unwrap().has_port(PORT_LEAK_OUT));
        assert!(!lib.get("P2").unwrap().has_port(PORT_VICTIM_MOD));
        assert!(lib.get("P3").unwrap().has_port(PORT_VICTIM_MOD));
        assert!(!lib.get("P3").unwrap().has_port(PORT_VICTIM_IN));
    }

    #[test]
    fn variant_b_is_available_but_not_builtin() {
        let b = stuck_at_payload(false);
        b.validate().unwrap();
        assert_eq!(b.behavior, BehaviorModel::Combinational(BoolFn::StuckAt { active_high: false }));
        let lib = TemplateLibrary::builtin();
        assert!(lib.get("P3B").is_err());
    }

    #[test]
    fn unknown_template_is_an_error() {
        let lib = TemplateLibrary::builtin();
        assert!(matches!(lib.get("T9"), Err(TemplateError::UnknownTemplate(_))));
    }
}
