//! Discrete-logic gate synthesis. The same boolean function is realized with
//! deliberately different part structures per family, which is what makes the
//! generated triggers structurally diverse:
//!
//! * RTL — transistor switch networks (series for NAND, parallel for NOR)
//!   with resistive pull-ups,
//! * DTL — diode input networks feeding a transistor inverter or follower,
//! * TTL — transistor buffers on every input, a switch core, and a
//!   diode-coupled emitter-follower output stage.
//!
//! All structures are chosen so the switch-level evaluator resolves them
//! regardless of the exact resistor values, keeping passive variation safe.

use super::taxonomy::intrinsic_trigger_tags;
use super::{
    trig_port, BehaviorModel, BoolFn, GateFn, LogicFamily, PartKind, PinBind, TemplateError,
    TemplateKind, TemplateNet, TemplatePart, TrojanTemplate, BJT_BASE, BJT_COLLECTOR, BJT_EMITTER,
    DIODE_ANODE, DIODE_CATHODE, OPAMP_IN_N, OPAMP_IN_P, OPAMP_OUT, OPAMP_VN, OPAMP_VP, PORT_GND,
    PORT_VDD,
};
use crate::values::format_ohms;

pub const R_BASE: f64 = 4_700.0;
pub const R_PULLUP: f64 = 1_000.0;
pub const R_PULLDOWN: f64 = 10_000.0;
pub const R_DIODE_PULLUP: f64 = 2_200.0;
pub const R_DIODE_PULLDOWN: f64 = 10_000.0;
pub const NPN_VALUE: &str = "BC547";
pub const PNP_VALUE: &str = "BC557";
pub const DIODE_VALUE: &str = "1N4148";
pub const OPAMP_VALUE: &str = "LM358";

/// Accumulates parts and internal nets while a template circuit is built.
pub(crate) struct CircuitBuilder {
    parts: Vec<TemplatePart>,
    internal_nets: Vec<String>,
    kind_counters: std::collections::BTreeMap<&'static str, usize>,
    net_counter: usize,
}

pub(crate) fn port(name: impl Into<String>) -> TemplateNet {
    TemplateNet::Port(name.into())
}

impl CircuitBuilder {
    pub fn new() -> Self {
        CircuitBuilder {
            parts: Vec::new(),
            internal_nets: Vec::new(),
            kind_counters: std::collections::BTreeMap::new(),
            net_counter: 0,
        }
    }

    pub fn fresh_net(&mut self) -> TemplateNet {
        self.net_counter += 1;
        let name = format!("N{}", self.net_counter);
        self.internal_nets.push(name.clone());
        TemplateNet::Internal(name)
    }

    fn next_ref(&mut self, kind: PartKind) -> String {
        let prefix = kind.ref_prefix();
        let counter = self.kind_counters.entry(prefix).or_insert(0);
        *counter += 1;
        format!("{prefix}{counter}")
    }

    fn push(&mut self, kind: PartKind, value: &str, pins: Vec<(&'static str, TemplateNet)>) {
        let ref_hint = self.next_ref(kind);
        self.parts.push(TemplatePart {
            ref_hint,
            kind,
            value: value.to_string(),
            pins: pins
                .into_iter()
                .map(|(pin, net)| PinBind { pin: pin.to_string(), net })
                .collect(),
            rc_bound: false,
        });
    }

    pub fn resistor(&mut self, ohms: f64, a: TemplateNet, b: TemplateNet) {
        self.push(PartKind::Resistor, &format_ohms(ohms), vec![("1", a), ("2", b)]);
    }

    pub fn capacitor(&mut self, value: &str, a: TemplateNet, b: TemplateNet) {
        self.push(PartKind::Capacitor, value, vec![("1", a), ("2", b)]);
    }

    pub fn diode(&mut self, anode: TemplateNet, cathode: TemplateNet) {
        self.push(PartKind::Diode, DIODE_VALUE, vec![(DIODE_CATHODE, cathode), (DIODE_ANODE, anode)]);
    }

    pub fn npn(&mut self, base: TemplateNet, collector: TemplateNet, emitter: TemplateNet) {
        self.push(
            PartKind::Npn,
            NPN_VALUE,
            vec![(BJT_BASE, base), (BJT_COLLECTOR, collector), (BJT_EMITTER, emitter)],
        );
    }

    pub fn opamp(
        &mut self,
        in_p: TemplateNet,
        in_n: TemplateNet,
        out: TemplateNet,
    ) {
        self.push(
            PartKind::OpAmp,
            OPAMP_VALUE,
            vec![
                (OPAMP_IN_P, in_p),
                (OPAMP_IN_N, in_n),
                (OPAMP_OUT, out),
                (OPAMP_VP, port(PORT_VDD)),
                (OPAMP_VN, port(PORT_GND)),
            ],
        );
    }

    /// Marks the most recent part as carrying a TimedRc behavior parameter.
    pub fn rc_bound(&mut self) {
        if let Some(part) = self.parts.last_mut() {
            part.rc_bound = true;
        }
    }

    pub fn finish(self) -> (Vec<TemplatePart>, Vec<String>) {
        (self.parts, self.internal_nets)
    }

    // --- gate structure primitives -------------------------------------

    /// Common-emitter inverter: `output = !input`.
    pub fn inverter(&mut self, input: TemplateNet, output: TemplateNet) {
        let base = self.fresh_net();
        self.resistor(R_BASE, input, base.clone());
        self.npn(base, output.clone(), port(PORT_GND));
        self.resistor(R_PULLUP, port(PORT_VDD), output);
    }

    /// Emitter follower: `output = input` with current gain. The collector
    /// ties straight to VDD so the stage works for any resistor values.
    pub fn follower(&mut self, input: TemplateNet, output: TemplateNet) {
        let base = self.fresh_net();
        self.resistor(R_BASE, input, base.clone());
        self.npn(base, port(PORT_VDD), output.clone());
        self.resistor(R_PULLDOWN, output, port(PORT_GND));
    }

    /// Follower with a diode-coupled output, the TTL-style output stage.
    pub fn ttl_output(&mut self, input: TemplateNet, output: TemplateNet) {
        let base = self.fresh_net();
        let emitter = self.fresh_net();
        self.resistor(R_BASE, input, base.clone());
        self.npn(base, port(PORT_VDD), emitter.clone());
        self.diode(emitter, output.clone());
        self.resistor(R_PULLDOWN, output, port(PORT_GND));
    }

    /// Base-driven pass switch between `from` and `to`.
    pub fn pass_npn(&mut self, control: TemplateNet, from: TemplateNet, to: TemplateNet) {
        let base = self.fresh_net();
        self.resistor(R_BASE, control, base.clone());
        self.npn(base, from, to);
    }

    /// Stacked switches conducting `top`..`bottom` only when every input is
    /// high. No pull-up is added.
    pub fn series_chain(&mut self, inputs: &[TemplateNet], top: TemplateNet, bottom: TemplateNet) {
        let mut upper = top;
        for (i, input) in inputs.iter().enumerate() {
            let base = self.fresh_net();
            self.resistor(R_BASE, input.clone(), base.clone());
            let lower = if i + 1 == inputs.len() { bottom.clone() } else { self.fresh_net() };
            self.npn(base, upper, lower.clone());
            upper = lower;
        }
    }

    /// Series transistor chain: `output = NAND(inputs)`.
    pub fn rtl_nand(&mut self, inputs: &[TemplateNet], output: TemplateNet) {
        self.resistor(R_PULLUP, port(PORT_VDD), output.clone());
        self.series_chain(inputs, output, port(PORT_GND));
    }

    /// Parallel transistor bank: `output = NOR(inputs)`.
    pub fn rtl_nor(&mut self, inputs: &[TemplateNet], output: TemplateNet) {
        self.resistor(R_PULLUP, port(PORT_VDD), output.clone());
        for input in inputs {
            let base = self.fresh_net();
            self.resistor(R_BASE, input.clone(), base.clone());
            self.npn(base, output.clone(), port(PORT_GND));
        }
    }

    /// Diode-AND input network: `node` is high only when every input is.
    pub fn dtl_and_node(&mut self, inputs: &[TemplateNet], node: TemplateNet) {
        self.resistor(R_DIODE_PULLUP, port(PORT_VDD), node.clone());
        for input in inputs {
            self.diode(node.clone(), input.clone());
        }
    }

    /// Diode-OR input network: `node` is high when any input is.
    pub fn dtl_or_node(&mut self, inputs: &[TemplateNet], node: TemplateNet) {
        self.resistor(R_DIODE_PULLDOWN, node.clone(), port(PORT_GND));
        for input in inputs {
            self.diode(input.clone(), node.clone());
        }
    }
}

/// Builds the gate structure for one family, wiring `inputs` to `output`.
pub(crate) fn build_gate(
    builder: &mut CircuitBuilder,
    f: GateFn,
    family: LogicFamily,
    inputs: &[TemplateNet],
    output: TemplateNet,
) -> Result<(), TemplateError> {
    match family {
        LogicFamily::Rtl => match f {
            GateFn::Nand => builder.rtl_nand(inputs, output),
            GateFn::Nor => builder.rtl_nor(inputs, output),
            GateFn::And => {
                let mid = builder.fresh_net();
                builder.rtl_nand(inputs, mid.clone());
                builder.inverter(mid, output);
            }
            GateFn::Or => {
                let mid = builder.fresh_net();
                builder.rtl_nor(inputs, mid.clone());
                builder.inverter(mid, output);
            }
        },
        LogicFamily::Dtl => {
            let node = builder.fresh_net();
            match f {
                GateFn::And => {
                    builder.dtl_and_node(inputs, node.clone());
                    builder.follower(node, output);
                }
                GateFn::Nand => {
                    builder.dtl_and_node(inputs, node.clone());
                    builder.inverter(node, output);
                }
                GateFn::Or => {
                    builder.dtl_or_node(inputs, node.clone());
                    builder.follower(node, output);
                }
                GateFn::Nor => {
                    builder.dtl_or_node(inputs, node.clone());
                    builder.inverter(node, output);
                }
            }
        }
        LogicFamily::Ttl => {
            let buffered: Vec<TemplateNet> = inputs
                .iter()
                .map(|input| {
                    let b = builder.fresh_net();
                    builder.follower(input.clone(), b.clone());
                    b
                })
                .collect();
            let core = builder.fresh_net();
            match f {
                GateFn::Nand => {
                    builder.rtl_nand(&buffered, core.clone());
                    builder.ttl_output(core, output);
                }
                GateFn::And => {
                    builder.rtl_nand(&buffered, core.clone());
                    builder.inverter(core, output);
                }
                GateFn::Nor => {
                    builder.rtl_nor(&buffered, core.clone());
                    builder.ttl_output(core, output);
                }
                GateFn::Or => {
                    builder.rtl_nor(&buffered, core.clone());
                    builder.inverter(core, output);
                }
            }
        }
        LogicFamily::Mixed => {
            return Err(TemplateError::UnsupportedFamily("mixed".into()));
        }
    }
    Ok(())
}

/// Synthesizes a trigger template computing `f` over `n` inputs in the given
/// logic family. Arity is limited to 2..=8.
pub fn synthesize_gate(
    f: GateFn,
    n: usize,
    family: LogicFamily,
) -> Result<TrojanTemplate, TemplateError> {
    if !(2..=8).contains(&n) {
        return Err(TemplateError::UnsupportedArity(n));
    }
    let mut builder = CircuitBuilder::new();
    let inputs: Vec<TemplateNet> = (0..n).map(|i| port(trig_port(i))).collect();
    build_gate(&mut builder, f, family, &inputs, port(super::PORT_TRIG_EN))?;
    let (parts, internal_nets) = builder.finish();

    let mut ports: Vec<String> = (0..n).map(trig_port).collect();
    ports.push(super::PORT_TRIG_EN.to_string());
    ports.push(PORT_VDD.to_string());
    ports.push(PORT_GND.to_string());

    let template = TrojanTemplate {
        id: format!("{}{}_{}", f.name(), n, family.name()),
        kind: TemplateKind::Trigger,
        ports,
        parts,
        internal_nets,
        behavior: BehaviorModel::Combinational(BoolFn::Gate { f, n }),
        family,
        taxonomy: intrinsic_trigger_tags(false),
    };
    template.validate()?;
    Ok(template)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_bounds_enforced() {
        assert!(matches!(
            synthesize_gate(GateFn::Nor, 1, LogicFamily::Rtl),
            Err(TemplateError::UnsupportedArity(1))
        ));
        assert!(matches!(
            synthesize_gate(GateFn::And, 9, LogicFamily::Ttl),
            Err(TemplateError::UnsupportedArity(9))
        ));
        assert!(synthesize_gate(GateFn::And, 8, LogicFamily::Ttl).is_ok());
    }

    #[test]
    fn families_have_distinct_part_multisets() {
        let rtl = synthesize_gate(GateFn::Nand, 2, LogicFamily::Rtl).unwrap();
        let dtl = synthesize_gate(GateFn::Nand, 2, LogicFamily::Dtl).unwrap();
        let ttl = synthesize_gate(GateFn::Nand, 2, LogicFamily::Ttl).unwrap();
        assert_ne!(rtl.part_multiset(), dtl.part_multiset());
        assert_ne!(rtl.part_multiset(), ttl.part_multiset());
        assert_ne!(dtl.part_multiset(), ttl.part_multiset());
    }

    #[test]
    fn synthesized_templates_are_well_formed() {
        for f in [GateFn::And, GateFn::Nand, GateFn::Or, GateFn::Nor] {
            for family in [LogicFamily::Rtl, LogicFamily::Dtl, LogicFamily::Ttl] {
                for n in 2..=8 {
                    let t = synthesize_gate(f, n, family).unwrap();
                    assert_eq!(t.input_arity(), n);
                    t.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn mixed_family_is_not_a_synthesis_target() {
        assert!(matches!(
            synthesize_gate(GateFn::And, 4, LogicFamily::Mixed),
            Err(TemplateError::UnsupportedFamily(_))
        ));
    }
}
