//! Switch-level evaluation of template circuits under a three-rule discrete
//! model:
//!
//! 1. an NPN conducts collector–emitter when its base net is high (PNP when
//!    low),
//! 2. a diode conducts only from anode to cathode,
//! 3. a net is high iff it is pulled to the supply through conducting paths
//!    and no conducting path to ground has strictly lower total resistance;
//!    resistances are compared exactly.
//!
//! Input ports are modeled as rails behind a source resistance: trigger taps
//! are ideal (0 ohm) while a victim tap sits behind a driver impedance so a
//! shunt payload can overpower it. Conduction states are iterated to a fixed
//! point, which feed-forward gate structures reach in a few sweeps.

use std::collections::HashMap;

use super::SimError;
use crate::templates::{
    PartKind, TemplateNet, TrojanTemplate, BJT_BASE, BJT_COLLECTOR, BJT_EMITTER, DIODE_ANODE,
    DIODE_CATHODE, PORT_GND, PORT_VDD,
};
use crate::values::parse_value;

/// Source resistance of a driven victim net (ohms). Trigger inputs are ideal.
pub const VICTIM_SOURCE_OHMS: f64 = 100.0;

#[derive(Debug, Clone, Copy)]
struct Switch {
    base: usize,
    collector: usize,
    emitter: usize,
    /// true: conducts when base is high (NPN); false: when low (PNP).
    active_high: bool,
}

#[derive(Debug)]
pub(crate) struct Circuit {
    node_count: usize,
    resistors: Vec<(usize, usize, f64)>,
    diodes: Vec<(usize, usize)>, // (anode, cathode)
    switches: Vec<Switch>,
    inputs: Vec<(usize, f64)>, // (node, source resistance) in behavioral order
    output: usize,
    hi: usize,
    lo: usize,
    id: String,
}

impl Circuit {
    pub(crate) fn compile(template: &TrojanTemplate) -> Result<Circuit, SimError> {
        let mut node_ids: HashMap<String, usize> = HashMap::new();
        let mut next = 0usize;
        let mut node = |name: &str, next: &mut usize, ids: &mut HashMap<String, usize>| -> usize {
            *ids.entry(name.to_string()).or_insert_with(|| {
                let id = *next;
                *next += 1;
                id
            })
        };

        let hi = node("\u{0}HI", &mut next, &mut node_ids);
        let lo = node("\u{0}LO", &mut next, &mut node_ids);

        let mut resolve = |net: &TemplateNet, next: &mut usize, ids: &mut HashMap<String, usize>| match net {
            TemplateNet::Port(p) => node(p, next, ids),
            TemplateNet::Internal(n) => node(n, next, ids),
        };

        let mut resistors = Vec::new();
        let mut diodes = Vec::new();
        let mut switches = Vec::new();

        for part in &template.parts {
            let pin = |designator: &str| -> Result<&TemplateNet, SimError> {
                part.pins
                    .iter()
                    .find(|b| b.pin == designator)
                    .map(|b| &b.net)
                    .ok_or_else(|| SimError::UnsupportedPart {
                        template: template.id.clone(),
                        part: format!("{} missing pin {designator}", part.ref_hint),
                    })
            };
            match part.kind {
                PartKind::Resistor => {
                    let ohms = parse_value(&part.value).ok_or_else(|| SimError::UnsupportedPart {
                        template: template.id.clone(),
                        part: format!("{} has non-numeric value", part.ref_hint),
                    })?;
                    let a = resolve(pin("1")?, &mut next, &mut node_ids);
                    let b = resolve(pin("2")?, &mut next, &mut node_ids);
                    resistors.push((a, b, ohms));
                }
                PartKind::Capacitor => {} // open at DC
                PartKind::Diode => {
                    let k = resolve(pin(DIODE_CATHODE)?, &mut next, &mut node_ids);
                    let a = resolve(pin(DIODE_ANODE)?, &mut next, &mut node_ids);
                    diodes.push((a, k));
                }
                PartKind::Npn | PartKind::Pnp => {
                    let base = resolve(pin(BJT_BASE)?, &mut next, &mut node_ids);
                    let collector = resolve(pin(BJT_COLLECTOR)?, &mut next, &mut node_ids);
                    let emitter = resolve(pin(BJT_EMITTER)?, &mut next, &mut node_ids);
                    switches.push(Switch {
                        base,
                        collector,
                        emitter,
                        active_high: part.kind == PartKind::Npn,
                    });
                }
                PartKind::OpAmp => {
                    return Err(SimError::UnsupportedPart {
                        template: template.id.clone(),
                        part: format!("{}: op-amps are not combinational", part.ref_hint),
                    })
                }
            }
        }

        // Rails bind to the virtual sources.
        if let Some(&vdd) = node_ids.get(PORT_VDD) {
            resistors.push((vdd, hi, 0.0));
        }
        if let Some(&gnd) = node_ids.get(PORT_GND) {
            resistors.push((gnd, lo, 0.0));
        }

        let input_ports = template.input_ports();
        let mut inputs = Vec::with_capacity(input_ports.len());
        for (i, port) in input_ports.iter().enumerate() {
            let id = *node_ids.get(port).ok_or_else(|| SimError::UnsupportedPart {
                template: template.id.clone(),
                part: format!("input port {port} is unbound"),
            })?;
            let source = if template.kind == crate::templates::TemplateKind::Payload && i == 0 {
                VICTIM_SOURCE_OHMS
            } else {
                0.0
            };
            inputs.push((id, source));
        }
        let output = *node_ids.get(template.output_port()).ok_or_else(|| {
            SimError::UnsupportedPart {
                template: template.id.clone(),
                part: format!("output port {} is unbound", template.output_port()),
            }
        })?;

        Ok(Circuit {
            node_count: next,
            resistors,
            diodes,
            switches,
            inputs,
            output,
            hi,
            lo,
            id: template.id.clone(),
        })
    }

    /// Multi-pass Dijkstra pair + switch update until the conduction state
    /// stabilizes. Returns the output level.
    pub(crate) fn solve(&self, input_bits: &[bool]) -> Result<bool, SimError> {
        debug_assert_eq!(input_bits.len(), self.inputs.len());
        let mut conducting = vec![false; self.switches.len()];
        let limit = 2 * self.switches.len() + 8;
        for _ in 0..limit {
            let levels = self.levels(input_bits, &conducting);
            let next: Vec<bool> = self
                .switches
                .iter()
                .map(|s| levels[s.base] == s.active_high)
                .collect();
            if next == conducting {
                return Ok(levels[self.output]);
            }
            conducting = next;
        }
        Err(SimError::Unstable(self.id.clone()))
    }

    fn levels(&self, input_bits: &[bool], conducting: &[bool]) -> Vec<bool> {
        // Adjacency with per-direction diode gating. `forward` follows the
        // direction current flows away from the supply; the ground search
        // walks diodes in reverse (current flows toward ground).
        let mut adj: Vec<Vec<(usize, f64, u8)>> = vec![Vec::new(); self.node_count];
        const BOTH: u8 = 0;
        const HI_ONLY: u8 = 1;
        const LO_ONLY: u8 = 2;
        let mut undirected = |adj: &mut Vec<Vec<(usize, f64, u8)>>, a: usize, b: usize, w: f64| {
            adj[a].push((b, w, BOTH));
            adj[b].push((a, w, BOTH));
        };
        for &(a, b, w) in &self.resistors {
            undirected(&mut adj, a, b, w);
        }
        for (s, on) in self.switches.iter().zip(conducting) {
            if *on {
                undirected(&mut adj, s.collector, s.emitter, 0.0);
            }
        }
        for &(a, k) in &self.diodes {
            adj[a].push((k, 0.0, HI_ONLY));
            adj[k].push((a, 0.0, LO_ONLY));
        }
        for ((node, source), bit) in self.inputs.iter().zip(input_bits) {
            let rail = if *bit { self.hi } else { self.lo };
            undirected(&mut adj, *node, rail, *source);
        }

        let dist_hi = dijkstra(&adj, self.hi, HI_ONLY);
        let dist_lo = dijkstra(&adj, self.lo, LO_ONLY);
        (0..self.node_count)
            .map(|n| dist_hi[n].is_finite() && !(dist_lo[n] < dist_hi[n]))
            .collect()
    }
}

fn dijkstra(adj: &[Vec<(usize, f64, u8)>], start: usize, pass: u8) -> Vec<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    #[derive(PartialEq)]
    struct Cost(f64);
    impl Eq for Cost {}
    impl PartialOrd for Cost {
        fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
            Some(self.cmp(other))
        }
    }
    impl Ord for Cost {
        fn cmp(&self, other: &Self) -> std::cmp::Ordering {
            self.0.total_cmp(&other.0)
        }
    }

    let mut dist = vec![f64::INFINITY; adj.len()];
    dist[start] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Cost(0.0), start)));
    while let Some(Reverse((Cost(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w, gate) in &adj[u] {
            if gate != 0 && gate != pass {
                continue;
            }
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse((Cost(nd), v)));
            }
        }
    }
    dist
}

/// Structural evaluation of a combinational template at one input vector.
pub fn eval_combinational(template: &TrojanTemplate, inputs: &[bool]) -> Result<bool, SimError> {
    if !template.behavior.is_combinational() {
        return Err(SimError::NonCombinationalTemplate(template.id.clone()));
    }
    let arity = template.input_arity();
    if inputs.len() != arity {
        return Err(SimError::ArityMismatch { expected: arity, got: inputs.len() });
    }
    Circuit::compile(template)?.solve(inputs)
}

/// Input vector for a truth-table row; bit 0 of the vector is the most
/// significant bit of the row index, so row `0b1111` drives all inputs high.
pub fn row_inputs(row: usize, arity: usize) -> Vec<bool> {
    (0..arity).map(|j| (row >> (arity - 1 - j)) & 1 == 1).collect()
}

/// Exhaustive structural enumeration over all 2^n inputs (n <= 8). This is
/// the oracle the declared behavior models are checked against.
pub fn brute_force_truth_table(template: &TrojanTemplate) -> Result<Vec<bool>, SimError> {
    if !template.behavior.is_combinational() {
        return Err(SimError::NonCombinationalTemplate(template.id.clone()));
    }
    let arity = template.input_arity();
    if arity > 8 {
        return Err(SimError::ArityTooLarge(arity));
    }
    let circuit = Circuit::compile(template)?;
    (0..1usize << arity).map(|row| circuit.solve(&row_inputs(row, arity))).collect()
}

/// Exact activation probability under independent per-input marginals,
/// computed by weighting the structural truth table.
pub fn exact_activation_probability(
    template: &TrojanTemplate,
    marginals: &[f64],
) -> Result<f64, SimError> {
    let arity = template.input_arity();
    if marginals.len() != arity {
        return Err(SimError::ArityMismatch { expected: arity, got: marginals.len() });
    }
    let table = brute_force_truth_table(template)?;
    let mut total = 0.0;
    for (row, out) in table.iter().enumerate() {
        if !*out {
            continue;
        }
        let weight: f64 = row_inputs(row, arity)
            .iter()
            .zip(marginals)
            .map(|(bit, p)| if *bit { *p } else { 1.0 - *p })
            .product();
        total += weight;
    }
    Ok(total)
}
