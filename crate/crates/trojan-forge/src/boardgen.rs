//! Deterministic synthetic fixture boards. Generated boards mimic small
//! microcontroller designs: supply rails, an MCU driving every signal net, a
//! status LED, a connector, and passive loads — enough surface for every
//! selector and payload wiring style to operate.

use rand::Rng;

use crate::netlist::{Component, NetDef, Netlist, PinRef};
use crate::seed;

const RESISTOR_POOL: [&str; 10] =
    ["100", "220", "470", "1k", "2.2k", "4.7k", "10k", "22k", "47k", "100k"];
const CAPACITOR_POOL: [&str; 6] = ["22p", "100n", "1u", "4.7u", "10u", "100u"];

/// Minimum component count of the fixed skeleton.
pub const MIN_COMPONENTS: usize = 16;

struct BoardBuilder {
    netlist: Netlist,
    nets: std::collections::BTreeMap<String, Vec<PinRef>>,
    net_order: Vec<String>,
    mcu_pins: Vec<u32>,
    signal_nets: Vec<String>,
    counters: std::collections::BTreeMap<&'static str, usize>,
}

impl BoardBuilder {
    fn new(name: &str, mcu_count: usize) -> Self {
        let mut netlist = Netlist { version: "D".to_string(), ..Netlist::default() };
        netlist.design_meta.push(("source".to_string(), format!("{name}.sch")));
        netlist.design_meta.push(("date".to_string(), "2024-11-07".to_string()));
        netlist.design_meta.push(("tool".to_string(), "eeschema".to_string()));
        let mut builder = BoardBuilder {
            netlist,
            nets: Default::default(),
            net_order: Vec::new(),
            mcu_pins: vec![0; mcu_count],
            signal_nets: Vec::new(),
            counters: Default::default(),
        };
        for i in 0..mcu_count {
            builder.netlist.components.push(Component::new(
                format!("U{}", i + 1),
                "ATMEGA328P",
                "Package_QFP:TQFP-32_7x7mm_P0.8mm",
            ));
        }
        builder.touch_net("GND");
        builder.touch_net("VCC");
        builder
    }

    fn touch_net(&mut self, name: &str) {
        if !self.nets.contains_key(name) {
            self.nets.insert(name.to_string(), Vec::new());
            self.net_order.push(name.to_string());
        }
    }

    fn connect(&mut self, net: &str, pin: PinRef) {
        self.touch_net(net);
        self.nets.get_mut(net).unwrap().push(pin);
    }

    fn next_ref(&mut self, prefix: &'static str) -> String {
        let counter = self.counters.entry(prefix).or_insert(0);
        *counter += 1;
        format!("{prefix}{counter}")
    }

    fn add_part(&mut self, prefix: &'static str, value: &str, footprint: &str) -> String {
        let reference = self.next_ref(prefix);
        self.netlist.components.push(Component::new(&reference, value, footprint));
        reference
    }

    /// Fresh MCU pin on the given controller, as a PinRef.
    fn mcu_pin(&mut self, mcu: usize) -> PinRef {
        self.mcu_pins[mcu] += 1;
        PinRef::new(format!("U{}", mcu + 1), self.mcu_pins[mcu].to_string())
    }

    fn component_count(&self) -> usize {
        self.netlist.components.len()
    }

    fn finish(mut self) -> Netlist {
        let mut code = 1;
        for name in &self.net_order {
            let nodes = self.nets.remove(name).unwrap();
            if nodes.is_empty() {
                continue;
            }
            self.netlist.nets.push(NetDef { code, name: name.clone(), nodes });
            code += 1;
        }
        self.netlist
    }
}

/// Builds a board with exactly `target_components` components (at least
/// [`MIN_COMPONENTS`]). Deterministic in (name, target, seed).
pub fn synthetic_board(name: &str, target_components: usize, seed_value: u64) -> Netlist {
    let target = target_components.max(MIN_COMPONENTS);
    let mcu_count = if target >= 50 { 2 } else { 1 };
    let mut rng = seed::rng(seed::mix(seed_value, seed::fnv1a(name)));
    let mut b = BoardBuilder::new(name, mcu_count);

    // Decoupling.
    let c = b.add_part("C", "100n", "Capacitor_SMD:C_0603_1608Metric");
    b.connect("VCC", PinRef::new(&c, "1"));
    b.connect("GND", PinRef::new(&c, "2"));

    // Status LED with a parallel bleed resistor, driven by the MCU.
    let led = b.add_part("LED", "LED", "LED_SMD:LED_0805_2012Metric");
    let bleed = b.add_part("R", "4.7k", "Resistor_SMD:R_0805_2012Metric");
    let drv = b.mcu_pin(0);
    b.connect("/STATUS", drv);
    b.connect("/STATUS", PinRef::new(&led, "1"));
    b.connect("/STATUS", PinRef::new(&bleed, "1"));
    b.connect("GND", PinRef::new(&led, "2"));
    b.connect("GND", PinRef::new(&bleed, "2"));

    // Expansion header on two driven nets.
    let conn = b.add_part("J", "CONN_01X04", "Connector_PinHeader_2.54mm:PinHeader_1x04_P2.54mm");
    for (i, ext) in ["/EXT1", "/EXT2"].iter().enumerate() {
        let pin = b.mcu_pin(0);
        b.connect(ext, pin);
        b.connect(ext, PinRef::new(&conn, (i + 1).to_string()));
        b.signal_nets.push(ext.to_string());
    }
    b.connect("GND", PinRef::new(&conn, "3"));
    b.connect("VCC", PinRef::new(&conn, "4"));

    // Ten base signal nets, each MCU-driven with a resistive load.
    for i in 1..=10 {
        let net = format!("/SIG{i}");
        let value = RESISTOR_POOL[rng.gen_range(0..RESISTOR_POOL.len())];
        let r = b.add_part("R", value, "Resistor_SMD:R_0805_2012Metric");
        let pin = b.mcu_pin(i % mcu_count);
        b.connect(&net, pin);
        b.connect(&net, PinRef::new(&r, "1"));
        b.connect("GND", PinRef::new(&r, "2"));
        b.signal_nets.push(net);
    }

    // Filler parts in a fixed rotation until the target count is reached.
    let mut kind_cursor = 0usize;
    while b.component_count() < target {
        match kind_cursor % 4 {
            0 => {
                let net = format!("/SIG{}", b.signal_nets.len() - 1);
                let value = RESISTOR_POOL[rng.gen_range(0..RESISTOR_POOL.len())];
                let r = b.add_part("R", value, "Resistor_SMD:R_0805_2012Metric");
                let pin = b.mcu_pin(b.signal_nets.len() % mcu_count);
                b.connect(&net, pin);
                b.connect(&net, PinRef::new(&r, "1"));
                b.connect("GND", PinRef::new(&r, "2"));
                b.signal_nets.push(net);
            }
            1 => {
                let value = CAPACITOR_POOL[rng.gen_range(0..CAPACITOR_POOL.len())];
                let c = b.add_part("C", value, "Capacitor_SMD:C_0603_1608Metric");
                let net = b.signal_nets[rng.gen_range(0..b.signal_nets.len())].clone();
                b.connect(&net, PinRef::new(&c, "1"));
                b.connect("GND", PinRef::new(&c, "2"));
            }
            2 => {
                let d = b.add_part("D", "1N4148", "Diode_SMD:D_SOD-323");
                let net = b.signal_nets[rng.gen_range(0..b.signal_nets.len())].clone();
                b.connect(&net, PinRef::new(&d, "1"));
                b.connect("GND", PinRef::new(&d, "2"));
            }
            _ => {
                // Open-collector stage: base tapped off a signal, collector
                // drives a fresh net loaded by an MCU input pin.
                let q = b.add_part("Q", "BC547", "Package_TO_SOT_SMD:SOT-23");
                let base_net = b.signal_nets[rng.gen_range(0..b.signal_nets.len())].clone();
                let out_net = format!("/QOUT{}", b.counters.get("Q").copied().unwrap_or(1));
                b.connect(&base_net, PinRef::new(&q, "1"));
                let load = b.mcu_pin((b.signal_nets.len() + 1) % mcu_count);
                b.connect(&out_net, PinRef::new(&q, "2"));
                b.connect(&out_net, load);
                b.connect("GND", PinRef::new(&q, "3"));
                b.signal_nets.push(out_net);
            }
        }
        kind_cursor += 1;
    }

    b.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::activity::eligible_signal_nets;
    use crate::graph::build_graph;
    use crate::netlist::{parse_netlist, validate_netlist, write_netlist, alpha_prefix};
    use crate::power::is_power_net;

    #[test]
    fn hits_exact_component_targets() {
        for target in [MIN_COMPONENTS, 34, 67, 120] {
            let board = synthetic_board("count", target, 1);
            assert_eq!(board.components.len(), target);
        }
    }

    #[test]
    fn generated_boards_are_valid_and_roundtrip() {
        for seed in 0..5 {
            let board = synthetic_board("gen", 40, seed);
            assert!(validate_netlist(&board).is_clean());
            let text = write_netlist(&board);
            let reparsed = parse_netlist(&text).unwrap();
            assert!(reparsed.structurally_eq(&board));
        }
    }

    #[test]
    fn deterministic_per_name_and_seed() {
        let a = write_netlist(&synthetic_board("det", 34, 7));
        let b = write_netlist(&synthetic_board("det", 34, 7));
        assert_eq!(a, b);
        let c = write_netlist(&synthetic_board("det", 34, 8));
        assert_ne!(a, c);
    }

    #[test]
    fn every_eligible_net_has_an_active_driver() {
        let board = synthetic_board("drivers", 67, 3);
        let graph = build_graph(&board);
        for net in eligible_signal_nets(&graph) {
            let pins = graph.net_pins(&net).unwrap();
            assert!(pins.len() >= 2, "{net} has {} pins", pins.len());
            assert!(
                pins.iter().any(|p| matches!(alpha_prefix(&p.reference), "U" | "Q")),
                "{net} lacks a driver"
            );
        }
    }

    #[test]
    fn enough_signal_nets_for_eight_input_triggers() {
        let board = synthetic_board("nets", MIN_COMPONENTS, 2);
        let graph = build_graph(&board);
        let eligible = eligible_signal_nets(&graph);
        assert!(eligible.len() >= 9, "found only {}", eligible.len());
        for net in &eligible {
            assert!(!is_power_net(&graph, net));
        }
    }

    #[test]
    fn rails_and_observables_exist() {
        let board = synthetic_board("obs", 34, 4);
        let graph = build_graph(&board);
        assert!(graph.has_net("GND"));
        assert!(graph.has_net("VCC"));
        assert!(crate::activity::select_observable_net(&graph, &[]).is_ok());
    }
}
