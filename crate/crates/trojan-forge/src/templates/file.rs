//! Template files reuse the netlist dialect: parts are components, template
//! wiring is the nets section, and two extension forms carry the rest —
//! `(ports ...)` names the nets that are externally bindable and
//! `(template ...)` holds id, kind, family and the declared behavior.

use std::collections::BTreeMap;
use std::path::Path;

use super::taxonomy::{intrinsic_payload_tags, intrinsic_trigger_tags, payload_effect};
use super::{
    BehaviorModel, BoolFn, GateFn, LogicFamily, PartKind, PinBind, RcParams, TemplateError,
    TemplateKind, TemplateNet, TemplatePart, TrojanTemplate,
};
use crate::netlist::{parse_netlist, write_netlist, Component, NetDef, Netlist, PinRef};
use crate::sexpr::Sexpr;
use crate::values::{format_farads, format_ohms, parse_value};

fn behavior_to_sexpr(behavior: &BehaviorModel) -> Sexpr {
    fn boolfn(f: &BoolFn) -> Sexpr {
        match f {
            BoolFn::Gate { f, n } => Sexpr::list(vec![
                Sexpr::atom("gate"),
                Sexpr::atom(f.name()),
                Sexpr::atom(n.to_string()),
            ]),
            BoolFn::AndNorMix { and_n, nor_n } => Sexpr::list(vec![
                Sexpr::atom("and_nor"),
                Sexpr::atom(and_n.to_string()),
                Sexpr::atom(nor_n.to_string()),
            ]),
            BoolFn::Xor2 => Sexpr::list(vec![Sexpr::atom("xor")]),
            BoolFn::MuxLeak2 => Sexpr::list(vec![Sexpr::atom("mux_leak")]),
            BoolFn::StuckAt { active_high } => Sexpr::list(vec![
                Sexpr::atom("stuck_at"),
                Sexpr::atom(if *active_high { "high" } else { "low" }),
            ]),
        }
    }
    let inner = match behavior {
        BehaviorModel::Combinational(f) => boolfn(f),
        BehaviorModel::TimedRc { front, params } => {
            let mut items = vec![
                Sexpr::atom("timed_rc"),
                Sexpr::list(vec![Sexpr::atom("front"), boolfn(front)]),
                Sexpr::pair("r_charge", format_ohms(params.r_charge)),
            ];
            if let Some(r) = params.r_discharge {
                items.push(Sexpr::pair("r_discharge", format_ohms(r)));
            }
            items.push(Sexpr::pair("c", format_farads(params.c)));
            items.push(Sexpr::pair("vdd", params.vdd.to_string()));
            items.push(Sexpr::pair("r1", format_ohms(params.r1)));
            items.push(Sexpr::pair("r2", format_ohms(params.r2)));
            Sexpr::list(items)
        }
    };
    Sexpr::list(vec![Sexpr::atom("behavior"), inner])
}

fn boolfn_from_sexpr(form: &Sexpr, path: &str) -> Result<BoolFn, TemplateError> {
    let err = |m: String| TemplateError::File { path: path.to_string(), message: m };
    let items = form.as_list().ok_or_else(|| err("behavior form is not a list".into()))?;
    let tag = form.tag().unwrap_or("");
    let int_at = |i: usize| -> Result<usize, TemplateError> {
        items
            .get(i)
            .and_then(Sexpr::as_atom)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err(format!("behavior `{tag}` needs an integer at position {i}")))
    };
    match tag {
        "gate" => {
            let name = items.get(1).and_then(Sexpr::as_atom).unwrap_or("");
            let f = match name.to_ascii_uppercase().as_str() {
                "AND" => GateFn::And,
                "NAND" => GateFn::Nand,
                "OR" => GateFn::Or,
                "NOR" => GateFn::Nor,
                other => return Err(err(format!("unknown gate function `{other}`"))),
            };
            Ok(BoolFn::Gate { f, n: int_at(2)? })
        }
        "and_nor" => Ok(BoolFn::AndNorMix { and_n: int_at(1)?, nor_n: int_at(2)? }),
        "xor" => Ok(BoolFn::Xor2),
        "mux_leak" => Ok(BoolFn::MuxLeak2),
        "stuck_at" => {
            let polarity = items.get(1).and_then(Sexpr::as_atom).unwrap_or("high");
            Ok(BoolFn::StuckAt { active_high: polarity == "high" })
        }
        other => Err(err(format!("unknown behavior `{other}`"))),
    }
}

fn behavior_from_sexpr(form: &Sexpr, path: &str) -> Result<BehaviorModel, TemplateError> {
    let err = |m: String| TemplateError::File { path: path.to_string(), message: m };
    let inner = form
        .as_list()
        .and_then(|items| items.get(1))
        .ok_or_else(|| err("empty behavior form".into()))?;
    if inner.tag() == Some("timed_rc") {
        let front_form = inner
            .first_child("front")
            .and_then(|f| f.as_list())
            .and_then(|items| items.get(1))
            .ok_or_else(|| err("timed_rc needs a (front ...) form".into()))?;
        let front = boolfn_from_sexpr(front_form, path)?;
        let number = |key: &str| -> Result<Option<f64>, TemplateError> {
            match inner.child_value(key) {
                None => Ok(None),
                Some(raw) => parse_value(raw)
                    .map(Some)
                    .ok_or_else(|| err(format!("bad numeric value for `{key}`"))),
            }
        };
        let require = |key: &str| -> Result<f64, TemplateError> {
            number(key)?.ok_or_else(|| err(format!("timed_rc missing `{key}`")))
        };
        let params = RcParams {
            r_charge: require("r_charge")?,
            r_discharge: number("r_discharge")?,
            c: require("c")?,
            vdd: require("vdd")?,
            r1: require("r1")?,
            r2: require("r2")?,
        };
        Ok(BehaviorModel::TimedRc { front, params })
    } else {
        Ok(BehaviorModel::Combinational(boolfn_from_sexpr(inner, path)?))
    }
}

/// Renders a template as a standalone dialect document.
pub fn write_template(template: &TrojanTemplate) -> String {
    let mut netlist = Netlist { version: "D".to_string(), ..Netlist::default() };

    let template_form = Sexpr::list(vec![
        Sexpr::atom("template"),
        Sexpr::pair("id", &template.id),
        Sexpr::pair(
            "kind",
            match template.kind {
                TemplateKind::Trigger => "trigger",
                TemplateKind::Payload => "payload",
            },
        ),
        Sexpr::pair("family", template.family.name()),
        behavior_to_sexpr(&template.behavior),
    ]);
    let mut ports_form = vec![Sexpr::atom("ports")];
    ports_form.extend(template.ports.iter().map(Sexpr::atom));
    netlist.extras.push(template_form);
    netlist.extras.push(Sexpr::list(ports_form));

    let mut net_pins: BTreeMap<String, Vec<PinRef>> = BTreeMap::new();
    for part in &template.parts {
        let mut comp = Component::new(&part.ref_hint, &part.value, part.kind.footprint());
        comp.fields.push(("kind".to_string(), part.kind.name().to_string()));
        if part.rc_bound {
            comp.fields.push(("rc_bound".to_string(), "yes".to_string()));
        }
        netlist.components.push(comp);
        for bind in &part.pins {
            let net_name = match &bind.net {
                TemplateNet::Port(p) => p.clone(),
                TemplateNet::Internal(n) => n.clone(),
            };
            net_pins
                .entry(net_name)
                .or_default()
                .push(PinRef::new(&part.ref_hint, &bind.pin));
        }
    }
    // Ports first in declared order, then internals in declared order.
    let mut ordered: Vec<String> = Vec::new();
    ordered.extend(template.ports.iter().cloned());
    ordered.extend(template.internal_nets.iter().cloned());
    let mut code = 1;
    for name in ordered {
        if let Some(nodes) = net_pins.remove(&name) {
            netlist.nets.push(NetDef { code, name, nodes });
            code += 1;
        }
    }
    write_netlist(&netlist)
}

/// Parses a dialect document into a template. `path` is used in messages.
pub fn parse_template(text: &str, path: &str) -> Result<TrojanTemplate, TemplateError> {
    let err = |m: String| TemplateError::File { path: path.to_string(), message: m };
    let netlist =
        parse_netlist(text).map_err(|e| err(format!("netlist parse failed: {e}")))?;

    let template_form = netlist
        .extras
        .iter()
        .find(|f| f.tag() == Some("template"))
        .ok_or_else(|| err("missing (template ...) form".into()))?;
    let ports_form = netlist
        .extras
        .iter()
        .find(|f| f.tag() == Some("ports"))
        .ok_or_else(|| err("missing (ports ...) form".into()))?;

    let id = template_form
        .child_value("id")
        .ok_or_else(|| err("template form missing id".into()))?
        .to_string();
    let kind = match template_form.child_value("kind") {
        Some("trigger") => TemplateKind::Trigger,
        Some("payload") => TemplateKind::Payload,
        other => return Err(err(format!("bad template kind {other:?}"))),
    };
    let family = match template_form.child_value("family") {
        Some("RTL") => LogicFamily::Rtl,
        Some("DTL") => LogicFamily::Dtl,
        Some("TTL") => LogicFamily::Ttl,
        Some("mixed") | None => LogicFamily::Mixed,
        Some(other) => return Err(err(format!("unknown family `{other}`"))),
    };
    let behavior_form = template_form
        .first_child("behavior")
        .ok_or_else(|| err("template form missing behavior".into()))?;
    let behavior = behavior_from_sexpr(behavior_form, path)?;

    let ports: Vec<String> = ports_form
        .as_list()
        .unwrap()
        .iter()
        .skip(1)
        .filter_map(Sexpr::as_atom)
        .map(str::to_string)
        .collect();

    // Pin bindings come from scanning the nets.
    let mut pin_nets: BTreeMap<PinRef, String> = BTreeMap::new();
    let mut internal_nets: Vec<String> = Vec::new();
    for net in &netlist.nets {
        if !ports.iter().any(|p| *p == net.name) {
            internal_nets.push(net.name.clone());
        }
        for node in &net.nodes {
            pin_nets.insert(node.clone(), net.name.clone());
        }
    }

    let mut parts = Vec::new();
    for comp in &netlist.components {
        let explicit_kind = comp
            .fields
            .iter()
            .find(|(k, _)| k == "kind")
            .and_then(|(_, v)| PartKind::from_name(v));
        let kind = match explicit_kind.or_else(|| infer_kind(comp)) {
            Some(k) => k,
            None => return Err(err(format!("cannot determine part kind of `{}`", comp.reference))),
        };
        let rc_bound = comp.fields.iter().any(|(k, v)| k == "rc_bound" && v == "yes");
        let mut pins: Vec<PinBind> = pin_nets
            .iter()
            .filter(|(pin, _)| pin.reference == comp.reference)
            .map(|(pin, net)| {
                let net = if ports.iter().any(|p| p == net) {
                    TemplateNet::Port(net.clone())
                } else {
                    TemplateNet::Internal(net.clone())
                };
                PinBind { pin: pin.pin.clone(), net }
            })
            .collect();
        pins.sort_by(|a, b| a.pin.cmp(&b.pin));
        parts.push(TemplatePart {
            ref_hint: comp.reference.clone(),
            kind,
            value: comp.value.clone(),
            pins,
            rc_bound,
        });
    }

    let taxonomy = match (kind, &behavior) {
        (TemplateKind::Trigger, BehaviorModel::TimedRc { .. }) => intrinsic_trigger_tags(true),
        (TemplateKind::Trigger, _) => intrinsic_trigger_tags(false),
        (TemplateKind::Payload, b) => intrinsic_payload_tags(payload_effect(b.front())),
    };

    let template =
        TrojanTemplate { id, kind, ports, parts, internal_nets, behavior, family, taxonomy };
    template.validate()?;
    Ok(template)
}

fn infer_kind(comp: &Component) -> Option<PartKind> {
    let value_upper = comp.value.to_ascii_uppercase();
    match comp.prefix() {
        "R" => Some(PartKind::Resistor),
        "C" => Some(PartKind::Capacitor),
        "D" => Some(PartKind::Diode),
        "Q" => {
            if value_upper.contains("PNP") || value_upper == "BC557" || value_upper == "2N3906" {
                Some(PartKind::Pnp)
            } else {
                Some(PartKind::Npn)
            }
        }
        "U" => Some(PartKind::OpAmp),
        _ => None,
    }
}

/// Loads every `.net` file in a directory, sorted by file name.
pub fn load_templates_from_dir(dir: &Path) -> Result<Vec<TrojanTemplate>, TemplateError> {
    let to_err = |m: String| TemplateError::File { path: dir.display().to_string(), message: m };
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| to_err(format!("cannot read directory: {e}")))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map_or(false, |ext| ext == "net"))
        .collect();
    paths.sort();
    let mut templates = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(&path).map_err(|e| TemplateError::File {
            path: path.display().to_string(),
            message: format!("read failed: {e}"),
        })?;
        templates.push(parse_template(&text, &path.display().to_string())?);
    }
    Ok(templates)
}
