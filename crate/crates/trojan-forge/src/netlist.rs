//! PCB netlist model with a KiCad-style S-expression reader and writer.
//!
//! The dialect is `(export (version ..) (design ..) (components ..) (nets ..))`.
//! Unknown sub-forms are kept as opaque blobs and written back verbatim, since
//! real exports carry tool-version noise that must survive a round trip.

use std::fmt;

use thiserror::Error;

use crate::sexpr::{self, Sexpr};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PinRef {
    pub reference: String,
    pub pin: String,
}

impl PinRef {
    pub fn new(reference: impl Into<String>, pin: impl Into<String>) -> Self {
        PinRef { reference: reference.into(), pin: pin.into() }
    }
}

impl fmt::Display for PinRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.reference, self.pin)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Component {
    pub reference: String,
    pub value: String,
    pub footprint: String,
    pub fields: Vec<(String, String)>,
    /// Unrecognized sub-forms (libsource, sheetpath, tstamps, ...).
    pub extras: Vec<Sexpr>,
}

impl Component {
    pub fn new(reference: impl Into<String>, value: impl Into<String>, footprint: impl Into<String>) -> Self {
        Component {
            reference: reference.into(),
            value: value.into(),
            footprint: footprint.into(),
            fields: Vec::new(),
            extras: Vec::new(),
        }
    }

    /// Leading alphabetic run of the reference designator (`R12` -> `R`).
    pub fn prefix(&self) -> &str {
        alpha_prefix(&self.reference)
    }
}

pub fn alpha_prefix(reference: &str) -> &str {
    let end = reference
        .char_indices()
        .find(|(_, c)| !c.is_ascii_alphabetic())
        .map(|(i, _)| i)
        .unwrap_or(reference.len());
    &reference[..end]
}

fn valid_reference(reference: &str) -> bool {
    let prefix = alpha_prefix(reference);
    let rest = &reference[prefix.len()..];
    !prefix.is_empty() && !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetDef {
    pub code: u32,
    pub name: String,
    pub nodes: Vec<PinRef>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Netlist {
    pub version: String,
    pub design_meta: Vec<(String, String)>,
    pub design_extras: Vec<Sexpr>,
    pub components: Vec<Component>,
    pub nets: Vec<NetDef>,
    /// Unknown top-level sections (libparts, libraries, ...).
    pub extras: Vec<Sexpr>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NetlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("duplicate component reference `{0}`")]
    DuplicateRef(String),
    #[error("duplicate net name `{0}`")]
    DuplicateNetName(String),
    #[error("duplicate net code {0}")]
    DuplicateNetCode(u32),
    #[error("net `{0}` has a non-positive code")]
    NonPositiveNetCode(String),
    #[error("invalid component reference `{0}`: expected letters followed by digits")]
    InvalidRef(String),
    #[error("net `{net}` references unknown component `{reference}`")]
    DanglingNode { net: String, reference: String },
    #[error("net `{0}` has no nodes")]
    EmptyNet(String),
    #[error("pin {0} appears in more than one net")]
    PinMultiplyConnected(PinRef),
}

impl From<sexpr::SyntaxError> for NetlistError {
    fn from(e: sexpr::SyntaxError) -> Self {
        NetlistError::Syntax { line: e.line, message: e.message }
    }
}

/// Parses an exported netlist document. Source order of components and nets
/// is preserved; all structural invariants are enforced.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let doc = sexpr::parse(text)?;
    if doc.tag() != Some("export") {
        return Err(NetlistError::Syntax {
            line: 1,
            message: format!("expected `(export ...)`, found `{}`", doc.tag().unwrap_or("?")),
        });
    }

    let mut netlist = Netlist { version: "D".to_string(), ..Netlist::default() };

    for form in doc.as_list().unwrap().iter().skip(1) {
        match form.tag() {
            Some("version") => {
                netlist.version = form
                    .as_list()
                    .and_then(|items| items.get(1))
                    .and_then(Sexpr::as_atom)
                    .unwrap_or("D")
                    .to_string();
            }
            Some("design") => parse_design(form, &mut netlist),
            Some("components") => {
                for comp in form.children("comp") {
                    netlist.components.push(parse_component(comp)?);
                }
            }
            Some("nets") => {
                for net in form.children("net") {
                    netlist.nets.push(parse_net(net)?);
                }
            }
            _ => netlist.extras.push(form.clone()),
        }
    }

    check_invariants(&netlist)?;
    Ok(netlist)
}

fn parse_design(form: &Sexpr, netlist: &mut Netlist) {
    for child in form.as_list().unwrap().iter().skip(1) {
        let simple_pair = child
            .as_list()
            .filter(|items| items.len() == 2)
            .and_then(|items| Some((items[0].as_atom()?, items[1].as_atom()?)));
        match simple_pair {
            Some((k, v)) => netlist.design_meta.push((k.to_string(), v.to_string())),
            None => netlist.design_extras.push(child.clone()),
        }
    }
}

fn parse_component(form: &Sexpr) -> Result<Component, NetlistError> {
    let mut comp = Component::default();
    for child in form.as_list().unwrap().iter().skip(1) {
        match child.tag() {
            Some("ref") => comp.reference = atom_value(child).unwrap_or_default(),
            Some("value") => comp.value = atom_value(child).unwrap_or_default(),
            Some("footprint") => comp.footprint = atom_value(child).unwrap_or_default(),
            Some("fields") => {
                for field in child.children("field") {
                    let name = field.child_value("name").unwrap_or_default().to_string();
                    let value = field
                        .as_list()
                        .and_then(|items| items.last())
                        .and_then(Sexpr::as_atom)
                        .unwrap_or_default()
                        .to_string();
                    comp.fields.push((name, value));
                }
            }
            _ => comp.extras.push(child.clone()),
        }
    }
    if !valid_reference(&comp.reference) {
        return Err(NetlistError::InvalidRef(comp.reference));
    }
    Ok(comp)
}

fn parse_net(form: &Sexpr) -> Result<NetDef, NetlistError> {
    let name = form.child_value("name").unwrap_or_default().to_string();
    let code: u32 = form
        .child_value("code")
        .and_then(|c| c.parse().ok())
        .filter(|c| *c > 0)
        .ok_or_else(|| NetlistError::NonPositiveNetCode(name.clone()))?;
    let mut nodes = Vec::new();
    for node in form.children("node") {
        // Extra node attributes (pinfunction, pintype) are tolerated and
        // dropped; connectivity is carried by (ref, pin) alone.
        let reference = node.child_value("ref").unwrap_or_default().to_string();
        let pin = node.child_value("pin").unwrap_or_default().to_string();
        nodes.push(PinRef { reference, pin });
    }
    if nodes.is_empty() {
        return Err(NetlistError::EmptyNet(name));
    }
    Ok(NetDef { code, name, nodes })
}

fn atom_value(form: &Sexpr) -> Option<String> {
    form.as_list()?.get(1)?.as_atom().map(str::to_string)
}

fn check_invariants(netlist: &Netlist) -> Result<(), NetlistError> {
    let mut refs = std::collections::HashSet::new();
    for comp in &netlist.components {
        if !refs.insert(comp.reference.as_str()) {
            return Err(NetlistError::DuplicateRef(comp.reference.clone()));
        }
    }
    let mut names = std::collections::HashSet::new();
    let mut codes = std::collections::HashSet::new();
    let mut pins = std::collections::HashSet::new();
    for net in &netlist.nets {
        if !names.insert(net.name.as_str()) {
            return Err(NetlistError::DuplicateNetName(net.name.clone()));
        }
        if !codes.insert(net.code) {
            return Err(NetlistError::DuplicateNetCode(net.code));
        }
        for node in &net.nodes {
            if !refs.contains(node.reference.as_str()) {
                return Err(NetlistError::DanglingNode {
                    net: net.name.clone(),
                    reference: node.reference.clone(),
                });
            }
            if !pins.insert(node.clone()) {
                return Err(NetlistError::PinMultiplyConnected(node.clone()));
            }
        }
    }
    Ok(())
}

/// Emits netlist text that reparses to a structurally identical netlist.
/// Net codes are renumbered densely from 1 in list order.
pub fn write_netlist(netlist: &Netlist) -> String {
    let mut out = String::with_capacity(4096);
    out.push_str("(export (version ");
    sexpr::write_atom(&mut out, if netlist.version.is_empty() { "D" } else { &netlist.version });
    out.push_str(")\n");

    out.push_str("  (design\n");
    for (k, v) in &netlist.design_meta {
        out.push_str("    (");
        sexpr::write_atom(&mut out, k);
        out.push(' ');
        sexpr::write_atom(&mut out, v);
        out.push_str(")\n");
    }
    for extra in &netlist.design_extras {
        out.push_str("    ");
        sexpr::write_compact(extra, &mut out);
        out.push('\n');
    }
    out.push_str("  )\n");

    for extra in &netlist.extras {
        out.push_str("  ");
        sexpr::write_compact(extra, &mut out);
        out.push('\n');
    }

    out.push_str("  (components\n");
    for comp in &netlist.components {
        out.push_str("    (comp (ref ");
        sexpr::write_atom(&mut out, &comp.reference);
        out.push_str(") (value ");
        sexpr::write_atom(&mut out, &comp.value);
        out.push_str(") (footprint ");
        sexpr::write_atom(&mut out, &comp.footprint);
        out.push(')');
        if !comp.fields.is_empty() {
            out.push_str(" (fields");
            for (name, value) in &comp.fields {
                out.push_str(" (field (name ");
                sexpr::write_atom(&mut out, name);
                out.push_str(") ");
                sexpr::write_atom(&mut out, value);
                out.push(')');
            }
            out.push(')');
        }
        for extra in &comp.extras {
            out.push(' ');
            sexpr::write_compact(extra, &mut out);
        }
        out.push_str(")\n");
    }
    out.push_str("  )\n");

    out.push_str("  (nets\n");
    for (i, net) in netlist.nets.iter().enumerate() {
        out.push_str(&format!("    (net (code {}) (name ", i + 1));
        sexpr::write_atom(&mut out, &net.name);
        out.push(')');
        for node in &net.nodes {
            out.push_str("\n      (node (ref ");
            sexpr::write_atom(&mut out, &node.reference);
            out.push_str(") (pin ");
            sexpr::write_atom(&mut out, &node.pin);
            out.push_str("))");
        }
        out.push_str(")\n");
    }
    out.push_str("  )\n)\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateRef,
    DuplicateNetName,
    DuplicateNetCode,
    NonPositiveNetCode,
    InvalidRef,
    DanglingNode,
    EmptyNet,
    PinMultiplyConnected,
}

#[derive(Debug, Clone)]
pub struct Violation {
    pub kind: ViolationKind,
    pub entity: String,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, entity: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { kind, entity: entity.into(), message: message.into() });
    }
}

/// Report-style invariant audit for directly constructed netlists.
pub fn validate_netlist(netlist: &Netlist) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut refs = std::collections::HashSet::new();
    for comp in &netlist.components {
        if !valid_reference(&comp.reference) {
            report.push(ViolationKind::InvalidRef, &comp.reference, "reference is not letters+digits");
        }
        if !refs.insert(comp.reference.as_str()) {
            report.push(ViolationKind::DuplicateRef, &comp.reference, "component listed twice");
        }
    }
    let mut names = std::collections::HashSet::new();
    let mut codes = std::collections::HashSet::new();
    let mut pins = std::collections::HashSet::new();
    for net in &netlist.nets {
        if !names.insert(net.name.as_str()) {
            report.push(ViolationKind::DuplicateNetName, &net.name, "net name listed twice");
        }
        if net.code == 0 {
            report.push(ViolationKind::NonPositiveNetCode, &net.name, "net code must be positive");
        } else if !codes.insert(net.code) {
            report.push(ViolationKind::DuplicateNetCode, &net.name, format!("net code {} reused", net.code));
        }
        if net.nodes.is_empty() {
            report.push(ViolationKind::EmptyNet, &net.name, "net has no nodes");
        }
        for node in &net.nodes {
            if !refs.contains(node.reference.as_str()) {
                report.push(
                    ViolationKind::DanglingNode,
                    node.to_string(),
                    format!("net `{}` references unknown component", net.name),
                );
            }
            if !pins.insert(node.clone()) {
                report.push(ViolationKind::PinMultiplyConnected, node.to_string(), "pin connected to multiple nets");
            }
        }
    }
    report
}

impl Netlist {
    /// Equality on the canonical field set: references, values, footprints,
    /// net names and node sets. Codes and preserved blobs are excluded.
    pub fn structurally_eq(&self, other: &Netlist) -> bool {
        if self.components.len() != other.components.len() || self.nets.len() != other.nets.len() {
            return false;
        }
        let comp_key = |c: &Component| (c.reference.clone(), c.value.clone(), c.footprint.clone());
        if self.components.iter().map(comp_key).ne(other.components.iter().map(comp_key)) {
            return false;
        }
        let net_key = |n: &NetDef| {
            let mut nodes = n.nodes.clone();
            nodes.sort();
            (n.name.clone(), nodes)
        };
        self.nets.iter().map(net_key).eq(other.nets.iter().map(net_key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "(export (version D)
  (design (source test.sch))
  (components
    (comp (ref R1) (value 10k) (footprint R_0805)))
  (nets
    (net (code 1) (name N1)
      (node (ref R1) (pin 1))
      (node (ref R1) (pin 2)))))";

    #[test]
    fn parses_minimal_document() {
        let n = parse_netlist(MINIMAL).unwrap();
        assert_eq!(n.components.len(), 1);
        assert_eq!(n.nets.len(), 1);
        assert_eq!(n.nets[0].nodes.len(), 2);
        assert_eq!(n.design_meta, vec![("source".to_string(), "test.sch".to_string())]);
    }

    #[test]
    fn duplicate_ref_is_rejected() {
        let text = MINIMAL.replace(
            "(comp (ref R1) (value 10k) (footprint R_0805))",
            "(comp (ref R1) (value 10k) (footprint R_0805)) (comp (ref R1) (value 1k) (footprint R_0805))",
        );
        assert_eq!(parse_netlist(&text).unwrap_err(), NetlistError::DuplicateRef("R1".into()));
    }

    #[test]
    fn dangling_node_names_component() {
        let text = MINIMAL.replace("(node (ref R1) (pin 2))", "(node (ref R9) (pin 2))");
        match parse_netlist(&text).unwrap_err() {
            NetlistError::DanglingNode { reference, .. } => assert_eq!(reference, "R9"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_error_carries_line() {
        // The innermost unclosed list starts on line 2.
        match parse_netlist("(export (version D)\n  (components\n").unwrap_err() {
            NetlistError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn invalid_ref_rejected() {
        let text = MINIMAL.replace("(ref R1)", "(ref #PWR01)").replace("(node (ref R1)", "(node (ref #PWR01)");
        assert!(matches!(parse_netlist(&text).unwrap_err(), NetlistError::InvalidRef(_)));
    }

    #[test]
    fn roundtrip_is_structural_identity() {
        let n = parse_netlist(MINIMAL).unwrap();
        let text = write_netlist(&n);
        let n2 = parse_netlist(&text).unwrap();
        assert!(n.structurally_eq(&n2));
        // Second pass is byte-stable.
        assert_eq!(write_netlist(&n2), text);
    }

    #[test]
    fn slash_names_are_quoted_and_roundtrip() {
        let mut n = parse_netlist(MINIMAL).unwrap();
        n.nets[0].name = "/SIG_TJ0".to_string();
        let text = write_netlist(&n);
        assert!(text.contains("\"/SIG_TJ0\""));
        let n2 = parse_netlist(&text).unwrap();
        assert_eq!(n2.nets[0].name, "/SIG_TJ0");
        assert_eq!(write_netlist(&n2), text);
    }

    #[test]
    fn empty_netlist_is_valid_document() {
        let n = Netlist { version: "D".into(), ..Netlist::default() };
        let text = write_netlist(&n);
        let n2 = parse_netlist(&text).unwrap();
        assert!(n2.components.is_empty());
        assert!(n2.nets.is_empty());
    }

    #[test]
    fn unknown_forms_are_preserved() {
        let text = MINIMAL.replace(
            "(components",
            "(libparts (libpart (lib Device) (part R)))\n  (components",
        );
        let n = parse_netlist(&text).unwrap();
        assert_eq!(n.extras.len(), 1);
        let out = write_netlist(&n);
        assert!(out.contains("(libparts (libpart (lib Device) (part R)))"));
        assert!(parse_netlist(&out).unwrap().structurally_eq(&n));
    }

    #[test]
    fn validate_reports_pin_in_two_nets() {
        let mut n = parse_netlist(MINIMAL).unwrap();
        n.nets.push(NetDef { code: 2, name: "N2".into(), nodes: vec![PinRef::new("R1", "1")] });
        let report = validate_netlist(&n);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::PinMultiplyConnected);
    }

    #[test]
    fn validate_reports_empty_net() {
        let mut n = parse_netlist(MINIMAL).unwrap();
        n.nets.push(NetDef { code: 2, name: "N2".into(), nodes: vec![] });
        let report = validate_netlist(&n);
        assert!(report.violations.iter().any(|v| v.kind == ViolationKind::EmptyNet));
    }

    #[test]
    fn validate_clean_on_valid_netlist() {
        let n = parse_netlist(MINIMAL).unwrap();
        assert!(validate_netlist(&n).is_clean());
    }
}
