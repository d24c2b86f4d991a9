//! Closed-vocabulary taxonomy tags over six classification axes. Values are
//! frozen as string enums so manifests stay machine-comparable.

use serde::{Deserialize, Serialize};

use super::{BehaviorModel, BoolFn, TemplateError, TemplateKind, TrojanTemplate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaxonomyAxis {
    InsertionPhase,
    Abstraction,
    Activation,
    PayloadEffect,
    Location,
    Physical,
}

impl TaxonomyAxis {
    pub const ALL: [TaxonomyAxis; 6] = [
        TaxonomyAxis::InsertionPhase,
        TaxonomyAxis::Abstraction,
        TaxonomyAxis::Activation,
        TaxonomyAxis::PayloadEffect,
        TaxonomyAxis::Location,
        TaxonomyAxis::Physical,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaxonomyAxis::InsertionPhase => "insertion_phase",
            TaxonomyAxis::Abstraction => "abstraction",
            TaxonomyAxis::Activation => "activation",
            TaxonomyAxis::PayloadEffect => "payload_effect",
            TaxonomyAxis::Location => "location",
            TaxonomyAxis::Physical => "physical",
        }
    }
}

/// Per-axis closed vocabularies. Alteration-style classes are present even
/// though only component-addition Trojans are generated.
pub fn vocabulary(axis: TaxonomyAxis) -> &'static [&'static str] {
    match axis {
        TaxonomyAxis::InsertionPhase => &["design", "fabrication", "post-fabrication"],
        TaxonomyAxis::Abstraction => &["specification", "schematic", "netlist", "layout"],
        TaxonomyAxis::Activation => &[
            "always-on",
            "triggered/internal/logic",
            "triggered/internal/timed",
            "triggered/external",
            "triggered/physical",
        ],
        TaxonomyAxis::PayloadEffect => &[
            "corrupt-function/invert",
            "corrupt-function/stuck-at",
            "leak-information",
            "degrade-performance",
            "denial-of-service",
        ],
        TaxonomyAxis::Location => &["surface-layer", "internal-layer"],
        TaxonomyAxis::Physical => &["component-addition", "trace-alteration"],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaxonomyTag {
    pub axis: TaxonomyAxis,
    pub value: String,
}

/// Constructs a tag, rejecting values outside the axis vocabulary.
pub fn tag(axis: TaxonomyAxis, value: &str) -> Result<TaxonomyTag, TemplateError> {
    if !vocabulary(axis).contains(&value) {
        return Err(TemplateError::UnknownTaxonomyValue {
            axis: axis.name().to_string(),
            value: value.to_string(),
        });
    }
    Ok(TaxonomyTag { axis, value: value.to_string() })
}

fn tag_unchecked(axis: TaxonomyAxis, value: &str) -> TaxonomyTag {
    TaxonomyTag { axis, value: value.to_string() }
}

pub(crate) fn intrinsic_trigger_tags(timed: bool) -> std::collections::BTreeSet<TaxonomyTag> {
    let activation =
        if timed { "triggered/internal/timed" } else { "triggered/internal/logic" };
    [
        tag_unchecked(TaxonomyAxis::Activation, activation),
        tag_unchecked(TaxonomyAxis::Physical, "component-addition"),
    ]
    .into_iter()
    .collect()
}

pub(crate) fn intrinsic_payload_tags(effect: &str) -> std::collections::BTreeSet<TaxonomyTag> {
    [
        tag_unchecked(TaxonomyAxis::PayloadEffect, effect),
        tag_unchecked(TaxonomyAxis::Physical, "component-addition"),
    ]
    .into_iter()
    .collect()
}

pub(crate) fn payload_effect(f: &BoolFn) -> &'static str {
    match f {
        BoolFn::Xor2 => "corrupt-function/invert",
        BoolFn::StuckAt { .. } => "corrupt-function/stuck-at",
        BoolFn::MuxLeak2 => "leak-information",
        _ => "corrupt-function/invert",
    }
}

/// Insertion metadata needed to complete a classification.
#[derive(Debug, Clone)]
pub struct ClassifyContext {
    pub phase: String,
    pub layer: String,
    /// Activation style of the paired trigger, for classifying payloads.
    pub trigger_timed: bool,
    /// Effect of the paired payload, for classifying triggers.
    pub paired_payload_effect: Option<String>,
}

impl Default for ClassifyContext {
    fn default() -> Self {
        ClassifyContext {
            phase: "design".to_string(),
            layer: "surface-layer".to_string(),
            trigger_timed: false,
            paired_payload_effect: None,
        }
    }
}

/// Tags a template within an insertion context. The result always covers all
/// six axes; template-intrinsic tags win over context-derived defaults.
pub fn classify(
    template: &TrojanTemplate,
    ctx: &ClassifyContext,
) -> std::collections::BTreeSet<TaxonomyTag> {
    let mut by_axis: std::collections::BTreeMap<TaxonomyAxis, String> =
        std::collections::BTreeMap::new();

    by_axis.insert(TaxonomyAxis::InsertionPhase, ctx.phase.clone());
    by_axis.insert(TaxonomyAxis::Abstraction, "netlist".to_string());
    by_axis.insert(TaxonomyAxis::Location, ctx.layer.clone());
    by_axis.insert(TaxonomyAxis::Physical, "component-addition".to_string());

    let timed = match (template.kind, &template.behavior) {
        (TemplateKind::Trigger, BehaviorModel::TimedRc { .. }) => true,
        (TemplateKind::Trigger, _) => false,
        (TemplateKind::Payload, _) => ctx.trigger_timed,
    };
    by_axis.insert(
        TaxonomyAxis::Activation,
        if timed { "triggered/internal/timed" } else { "triggered/internal/logic" }.to_string(),
    );

    let effect = match template.kind {
        TemplateKind::Payload => payload_effect(template.behavior.front()).to_string(),
        TemplateKind::Trigger => ctx
            .paired_payload_effect
            .clone()
            .unwrap_or_else(|| "corrupt-function/invert".to_string()),
    };
    by_axis.insert(TaxonomyAxis::PayloadEffect, effect);

    for intrinsic in &template.taxonomy {
        by_axis.insert(intrinsic.axis, intrinsic.value.clone());
    }

    by_axis
        .into_iter()
        .map(|(axis, value)| TaxonomyTag { axis, value })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::super::builtin_templates;
    use super::*;

    fn find(id: &str) -> TrojanTemplate {
        builtin_templates().into_iter().find(|t| t.id == id).unwrap()
    }

    #[test]
    fn classify_covers_all_axes() {
        let ctx = ClassifyContext::default();
        for template in builtin_templates() {
            let tags = classify(&template, &ctx);
            for axis in TaxonomyAxis::ALL {
                assert!(tags.iter().any(|t| t.axis == axis), "{}: missing {:?}", template.id, axis);
            }
            for t in &tags {
                assert!(vocabulary(t.axis).contains(&t.value.as_str()), "{:?}", t);
            }
        }
    }

    #[test]
    fn triggers_are_internally_triggered() {
        let ctx = ClassifyContext::default();
        for id in ["T1", "T2", "T3", "T4", "T5"] {
            let tags = classify(&find(id), &ctx);
            let activation = tags.iter().find(|t| t.axis == TaxonomyAxis::Activation).unwrap();
            assert!(activation.value.starts_with("triggered/internal"), "{id}");
        }
    }

    #[test]
    fn t4_reflects_timed_trigger() {
        let tags = classify(&find("T4"), &ClassifyContext::default());
        let activation = tags.iter().find(|t| t.axis == TaxonomyAxis::Activation).unwrap();
        assert_eq!(activation.value, "triggered/internal/timed");
    }

    #[test]
    fn payload_effects() {
        let ctx = ClassifyContext::default();
        let p2 = classify(&find("P2"), &ctx);
        assert!(p2.iter().any(|t| t.axis == TaxonomyAxis::PayloadEffect && t.value == "leak-information"));
        let p3 = classify(&find("P3"), &ctx);
        assert!(p3
            .iter()
            .any(|t| t.axis == TaxonomyAxis::PayloadEffect && t.value.contains("stuck-at")));
        let p1 = classify(&find("P1"), &ctx);
        assert!(p1
            .iter()
            .any(|t| t.axis == TaxonomyAxis::PayloadEffect && t.value.starts_with("corrupt-function")));
    }

    #[test]
    fn vocabulary_is_closed() {
        assert!(tag(TaxonomyAxis::Activation, "triggered/internal/logic").is_ok());
        assert!(tag(TaxonomyAxis::Activation, "sometimes").is_err());
    }
}
