//! Bipartite component–net graph of a board with the edit primitives used by
//! Trojan insertion: net splitting, component/net addition and pin rewiring.

use std::collections::{BTreeSet, HashMap};

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::netlist::{Component, NetDef, Netlist, PinRef};
use crate::sexpr::Sexpr;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GraphError {
    #[error("unknown net `{0}`")]
    UnknownNet(String),
    #[error("unknown component `{0}`")]
    UnknownComponent(String),
    #[error("pin {0} is not on net `{1}`")]
    PinNotOnNet(PinRef, String),
    #[error("split moved no pins")]
    EmptySplit,
    #[error("split cannot move every pin off net `{0}`")]
    FullSplit(String),
    #[error("component `{0}` already exists")]
    DuplicateComponent(String),
    #[error("net `{0}` already exists")]
    DuplicateNet(String),
    #[error("pin {0} is already connected to net `{1}`")]
    PinAlreadyConnected(PinRef, String),
}

/// One element of an alternating net/component path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathElem {
    Net(String),
    Comp(String),
}

#[derive(Debug, Clone, Default)]
pub struct PcbGraph {
    version: String,
    design_meta: Vec<(String, String)>,
    design_extras: Vec<Sexpr>,
    netlist_extras: Vec<Sexpr>,
    components: IndexMap<String, Component>,
    nets: IndexMap<String, IndexSet<PinRef>>,
    pin_net: HashMap<PinRef, String>,
}

/// Builds the graph from a netlist that satisfies the netlist invariants.
pub fn build_graph(netlist: &Netlist) -> PcbGraph {
    let mut graph = PcbGraph {
        version: netlist.version.clone(),
        design_meta: netlist.design_meta.clone(),
        design_extras: netlist.design_extras.clone(),
        netlist_extras: netlist.extras.clone(),
        ..PcbGraph::default()
    };
    for comp in &netlist.components {
        graph.components.insert(comp.reference.clone(), comp.clone());
    }
    for net in &netlist.nets {
        let pins: IndexSet<PinRef> = net.nodes.iter().cloned().collect();
        for pin in &pins {
            graph.pin_net.insert(pin.clone(), net.name.clone());
        }
        graph.nets.insert(net.name.clone(), pins);
    }
    graph
}

impl PcbGraph {
    pub fn component_count(&self) -> usize {
        self.components.len()
    }

    pub fn net_count(&self) -> usize {
        self.nets.len()
    }

    pub fn has_component(&self, reference: &str) -> bool {
        self.components.contains_key(reference)
    }

    pub fn has_net(&self, name: &str) -> bool {
        self.nets.contains_key(name)
    }

    pub fn component(&self, reference: &str) -> Option<&Component> {
        self.components.get(reference)
    }

    pub fn components(&self) -> impl Iterator<Item = &Component> {
        self.components.values()
    }

    pub fn net_names(&self) -> impl Iterator<Item = &str> {
        self.nets.keys().map(String::as_str)
    }

    pub fn net_pins(&self, name: &str) -> Option<&IndexSet<PinRef>> {
        self.nets.get(name)
    }

    pub fn net_of_pin(&self, pin: &PinRef) -> Option<&str> {
        self.pin_net.get(pin).map(String::as_str)
    }

    /// Total number of pin incidences across all nets.
    pub fn total_pin_count(&self) -> usize {
        self.pin_net.len()
    }

    /// Snapshot of the pin -> net map, used to check that edits leave
    /// untouched pins alone.
    pub fn pin_net_map(&self) -> HashMap<PinRef, String> {
        self.pin_net.clone()
    }

    pub fn add_component(&mut self, comp: Component) -> Result<(), GraphError> {
        if self.components.contains_key(&comp.reference) {
            return Err(GraphError::DuplicateComponent(comp.reference));
        }
        self.components.insert(comp.reference.clone(), comp);
        Ok(())
    }

    pub fn add_net(&mut self, name: &str) -> Result<(), GraphError> {
        if self.nets.contains_key(name) {
            return Err(GraphError::DuplicateNet(name.to_string()));
        }
        self.nets.insert(name.to_string(), IndexSet::new());
        Ok(())
    }

    pub fn connect(&mut self, pin: PinRef, net: &str) -> Result<(), GraphError> {
        if !self.components.contains_key(&pin.reference) {
            return Err(GraphError::UnknownComponent(pin.reference));
        }
        if let Some(existing) = self.pin_net.get(&pin) {
            return Err(GraphError::PinAlreadyConnected(pin.clone(), existing.clone()));
        }
        let pins = self.nets.get_mut(net).ok_or_else(|| GraphError::UnknownNet(net.to_string()))?;
        pins.insert(pin.clone());
        self.pin_net.insert(pin, net.to_string());
        Ok(())
    }

    /// Converts back to a netlist. Net codes are assigned densely in graph
    /// order; nets left without any pin are dropped, one warning each.
    pub fn to_netlist(&self) -> (Netlist, Vec<String>) {
        let mut warnings = Vec::new();
        let mut nets = Vec::new();
        let mut code = 1;
        for (name, pins) in &self.nets {
            if pins.is_empty() {
                warnings.push(format!("dropping net `{name}`: no connected pins"));
                continue;
            }
            nets.push(NetDef { code, name: name.clone(), nodes: pins.iter().cloned().collect() });
            code += 1;
        }
        let netlist = Netlist {
            version: self.version.clone(),
            design_meta: self.design_meta.clone(),
            design_extras: self.design_extras.clone(),
            components: self.components.values().cloned().collect(),
            nets,
            extras: self.netlist_extras.clone(),
        };
        (netlist, warnings)
    }

    /// Shortest alternating net/component path by breadth-first search over
    /// net nodes; neighbor expansion is in lexicographic order so the result
    /// is deterministic.
    pub fn find_path(&self, from: &str, to: &str) -> Result<Option<Vec<PathElem>>, GraphError> {
        if !self.nets.contains_key(from) {
            return Err(GraphError::UnknownNet(from.to_string()));
        }
        if !self.nets.contains_key(to) {
            return Err(GraphError::UnknownNet(to.to_string()));
        }
        if from == to {
            return Ok(Some(vec![PathElem::Net(from.to_string())]));
        }

        // net -> sorted components on it, component -> sorted nets it touches
        let mut comp_nets: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for (pin, net) in &self.pin_net {
            comp_nets.entry(pin.reference.as_str()).or_default().insert(net.as_str());
        }
        let mut net_comps: HashMap<&str, BTreeSet<&str>> = HashMap::new();
        for (comp, nets) in &comp_nets {
            for net in nets {
                net_comps.entry(net).or_default().insert(comp);
            }
        }

        let mut prev: HashMap<&str, (&str, &str)> = HashMap::new(); // net -> (via comp, from net)
        let mut visited: BTreeSet<&str> = BTreeSet::new();
        visited.insert(from);
        let mut frontier: Vec<&str> = vec![from];
        'bfs: while !frontier.is_empty() {
            let mut next: Vec<&str> = Vec::new();
            for net in &frontier {
                let Some(comps) = net_comps.get(net) else { continue };
                for comp in comps {
                    for other in &comp_nets[comp] {
                        if visited.contains(other) {
                            continue;
                        }
                        visited.insert(other);
                        prev.insert(other, (comp, net));
                        if *other == to {
                            break 'bfs;
                        }
                        next.push(other);
                    }
                }
            }
            frontier = next;
        }

        if !prev.contains_key(to) {
            return Ok(None);
        }
        let mut path = vec![PathElem::Net(to.to_string())];
        let mut cursor = to;
        while cursor != from {
            let (comp, net) = prev[cursor];
            path.push(PathElem::Comp(comp.to_string()));
            path.push(PathElem::Net(net.to_string()));
            cursor = net;
        }
        path.reverse();
        Ok(Some(path))
    }

    /// First unused `<base>_TJ<k>` net name.
    fn split_name(&self, base: &str) -> String {
        let mut k = 0;
        loop {
            let name = format!("{base}_TJ{k}");
            if !self.nets.contains_key(&name) {
                return name;
            }
            k += 1;
        }
    }

    /// Cuts a net in two: `moved` pins go to a fresh `<net>_TJ<k>` net, the
    /// rest stay. Returns (original, new) net names.
    pub fn split_net(
        &mut self,
        net: &str,
        moved: &[PinRef],
    ) -> Result<(String, String), GraphError> {
        let pins = self.nets.get(net).ok_or_else(|| GraphError::UnknownNet(net.to_string()))?;
        if moved.is_empty() {
            return Err(GraphError::EmptySplit);
        }
        let moved_set: IndexSet<PinRef> = moved.iter().cloned().collect();
        for pin in &moved_set {
            if !pins.contains(pin) {
                return Err(GraphError::PinNotOnNet(pin.clone(), net.to_string()));
            }
        }
        if moved_set.len() == pins.len() {
            return Err(GraphError::FullSplit(net.to_string()));
        }

        let new_name = self.split_name(net);
        self.nets.insert(new_name.clone(), IndexSet::new());
        let pins = self.nets.get_mut(net).unwrap();
        pins.retain(|p| !moved_set.contains(p));
        let new_pins = self.nets.get_mut(&new_name).unwrap();
        for pin in moved_set {
            self.pin_net.insert(pin.clone(), new_name.clone());
            new_pins.insert(pin);
        }
        Ok((net.to_string(), new_name))
    }

    /// Cross-reference audit; returns one message per inconsistency. Run by
    /// tests after every mutation.
    pub fn audit(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (pin, net) in &self.pin_net {
            if !self.components.contains_key(&pin.reference) {
                problems.push(format!("pin {pin} references unknown component"));
            }
            match self.nets.get(net) {
                None => problems.push(format!("pin {pin} maps to unknown net `{net}`")),
                Some(pins) if !pins.contains(pin) => {
                    problems.push(format!("pin {pin} missing from net `{net}` pin set"))
                }
                _ => {}
            }
        }
        for (name, pins) in &self.nets {
            for pin in pins {
                if self.pin_net.get(pin).map(String::as_str) != Some(name.as_str()) {
                    problems.push(format!("net `{name}` lists pin {pin} owned elsewhere"));
                }
            }
        }
        problems
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_netlist;

    fn two_comp_board() -> Netlist {
        parse_netlist(
            "(export (version D)
  (design (source t))
  (components
    (comp (ref U1) (value MCU) (footprint F))
    (comp (ref R1) (value 10k) (footprint F)))
  (nets
    (net (code 1) (name A) (node (ref U1) (pin 1)) (node (ref R1) (pin 1)))
    (net (code 2) (name B) (node (ref R1) (pin 2)) (node (ref U1) (pin 2)))))",
        )
        .unwrap()
    }

    #[test]
    fn build_counts_nodes_and_edges() {
        let n = parse_netlist(
            "(export (version D) (design)
  (components (comp (ref U1) (value A) (footprint F)) (comp (ref U2) (value B) (footprint F)))
  (nets (net (code 1) (name X) (node (ref U1) (pin 1)) (node (ref U2) (pin 1)))))",
        )
        .unwrap();
        let g = build_graph(&n);
        assert_eq!(g.component_count() + g.net_count(), 3);
        assert_eq!(g.total_pin_count(), 2);
    }

    #[test]
    fn empty_netlist_gives_empty_graph() {
        let g = build_graph(&Netlist::default());
        assert_eq!(g.component_count(), 0);
        assert_eq!(g.net_count(), 0);
    }

    #[test]
    fn roundtrip_preserves_structure() {
        let n = two_comp_board();
        let g = build_graph(&n);
        let (n2, warnings) = g.to_netlist();
        assert!(warnings.is_empty());
        assert!(n.structurally_eq(&n2));
    }

    #[test]
    fn edgeless_net_dropped_with_warning() {
        let mut g = build_graph(&two_comp_board());
        g.add_net("ORPHAN").unwrap();
        let (n, warnings) = g.to_netlist();
        assert_eq!(warnings.len(), 1);
        assert!(warnings[0].contains("ORPHAN"));
        assert!(n.nets.iter().all(|net| net.name != "ORPHAN"));
    }

    #[test]
    fn path_identity_is_single_net() {
        let g = build_graph(&two_comp_board());
        let p = g.find_path("A", "A").unwrap().unwrap();
        assert_eq!(p, vec![PathElem::Net("A".into())]);
    }

    #[test]
    fn path_across_one_component() {
        let g = build_graph(&two_comp_board());
        let p = g.find_path("A", "B").unwrap().unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p[0], PathElem::Net("A".into()));
        assert_eq!(p[2], PathElem::Net("B".into()));
        assert!(matches!(p[1], PathElem::Comp(_)));
    }

    #[test]
    fn disconnected_nets_have_no_path() {
        let n = parse_netlist(
            "(export (version D) (design)
  (components (comp (ref R1) (value 1k) (footprint F)) (comp (ref R2) (value 1k) (footprint F)))
  (nets
    (net (code 1) (name A) (node (ref R1) (pin 1)) (node (ref R1) (pin 2)))
    (net (code 2) (name B) (node (ref R2) (pin 1)) (node (ref R2) (pin 2)))))",
        )
        .unwrap();
        let g = build_graph(&n);
        assert_eq!(g.find_path("A", "B").unwrap(), None);
        assert!(matches!(g.find_path("A", "ZZZ"), Err(GraphError::UnknownNet(_))));
    }

    #[test]
    fn split_two_pin_net() {
        let mut g = build_graph(&two_comp_board());
        let moved = vec![PinRef::new("R1", "1")];
        let (orig, new) = g.split_net("A", &moved).unwrap();
        assert_eq!(orig, "A");
        assert_eq!(new, "A_TJ0");
        assert_eq!(g.net_pins("A").unwrap().len(), 1);
        assert_eq!(g.net_pins("A_TJ0").unwrap().len(), 1);
        assert!(g.audit().is_empty());
    }

    #[test]
    fn second_split_picks_next_index() {
        let mut g = build_graph(&two_comp_board());
        g.split_net("A", &[PinRef::new("R1", "1")]).unwrap();
        // Reconnect something onto A so it can be split again.
        g.connect(PinRef::new("R1", "3"), "A").unwrap();
        let (_, new) = g.split_net("A", &[PinRef::new("R1", "3")]).unwrap();
        assert_eq!(new, "A_TJ1");
        assert!(g.audit().is_empty());
    }

    #[test]
    fn split_rejects_empty_and_full() {
        let mut g = build_graph(&two_comp_board());
        assert_eq!(g.split_net("A", &[]).unwrap_err(), GraphError::EmptySplit);
        let all: Vec<PinRef> = g.net_pins("A").unwrap().iter().cloned().collect();
        assert!(matches!(g.split_net("A", &all).unwrap_err(), GraphError::FullSplit(_)));
        assert!(matches!(
            g.split_net("A", &[PinRef::new("R9", "1")]).unwrap_err(),
            GraphError::PinNotOnNet(..)
        ));
    }

    #[test]
    fn split_preserves_pin_multiset() {
        let mut g = build_graph(&two_comp_board());
        let before = g.total_pin_count();
        g.split_net("A", &[PinRef::new("R1", "1")]).unwrap();
        assert_eq!(g.total_pin_count(), before);
    }

    #[test]
    fn connect_rejects_double_connection() {
        let mut g = build_graph(&two_comp_board());
        let err = g.connect(PinRef::new("R1", "1"), "B").unwrap_err();
        assert!(matches!(err, GraphError::PinAlreadyConnected(..)));
    }
}
