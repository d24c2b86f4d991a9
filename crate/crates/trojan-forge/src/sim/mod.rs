//! Behavioral evaluation of templates: structural truth tables, the RC
//! trigger transient model, Monte Carlo activation estimation and the
//! trigger+payload co-simulation used for dormant-transparency checks.

mod eval;
mod mc;
mod rc;

pub use eval::{
    brute_force_truth_table, eval_combinational, exact_activation_probability, row_inputs,
    VICTIM_SOURCE_OHMS,
};
pub use mc::{estimate_activation_probability, estimate_activation_probability_sequential};
pub use rc::{simulate_rc_trigger, RcSimResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::templates::{
    BehaviorModel, BoolFn, TemplateKind, TrojanTemplate, PORT_LEAK_OUT, PORT_VICTIM_MOD,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("input arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("template `{0}` is not combinational")]
    NonCombinationalTemplate(String),
    #[error("arity {0} exceeds the exhaustive enumeration limit of 8")]
    ArityTooLarge(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("time step {dt} too coarse: must be at most {max}")]
    StepTooCoarse { dt: f64, max: f64 },
    #[error("template `{0}` is not a recognized payload")]
    UnknownPayload(String),
    #[error("template `{template}`: unsupported element ({part})")]
    UnsupportedPart { template: String, part: String },
    #[error("evaluation of `{0}` did not settle; the circuit is not feed-forward")]
    Unstable(String),
    #[error("stimulus missing waveform for port `{0}`")]
    MissingStimulus(String),
    #[error("bad stimulus: {0}")]
    BadStimulus(String),
}

/// Port-keyed stimulus: a static assignment or step waveforms on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stimulus {
    Static { inputs: BTreeMap<String, u8> },
    Timed { dt: f64, waveforms: BTreeMap<String, Vec<(f64, u8)>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PayloadEval {
    pub victim_mod: bool,
    pub leak_out: Option<bool>,
}

/// Payload transfer function per payload kind:
/// XOR inverts the victim while enabled; the MUX taps it onto the leak
/// output (idling high when dormant); stuck-at forces the victim low while
/// its transistor conducts.
pub fn eval_payload(
    template: &TrojanTemplate,
    victim: bool,
    trig_en: bool,
) -> Result<PayloadEval, SimError> {
    if template.kind != TemplateKind::Payload {
        return Err(SimError::UnknownPayload(template.id.clone()));
    }
    match template.behavior.front() {
        BoolFn::Xor2 => Ok(PayloadEval { victim_mod: victim ^ trig_en, leak_out: None }),
        BoolFn::MuxLeak2 => Ok(PayloadEval {
            victim_mod: victim,
            leak_out: Some(if trig_en { victim } else { true }),
        }),
        BoolFn::StuckAt { active_high } => Ok(PayloadEval {
            victim_mod: if trig_en == *active_high { false } else { victim },
            leak_out: None,
        }),
        _ => Err(SimError::UnknownPayload(template.id.clone())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CosimResult {
    pub trig_en: bool,
    pub victim_mod: bool,
    pub leak_out: Option<bool>,
}

/// A deterministic non-activating input vector for a trigger: the first
/// truth-table row on which its condition is false.
pub fn dormant_inputs(trigger: &TrojanTemplate) -> Vec<bool> {
    let front = trigger.behavior.front();
    let arity = front.arity();
    for row in 0..1usize << arity {
        let bits = row_inputs(row, arity);
        if !front.eval(&bits) {
            return bits;
        }
    }
    vec![false; arity]
}

/// Co-simulates a trigger feeding a payload. Combinational triggers are
/// evaluated structurally; for RC triggers `rc_charged` supplies the
/// comparator state (false while dormant).
pub fn cosim(
    trigger: &TrojanTemplate,
    payload: &TrojanTemplate,
    trigger_inputs: &[bool],
    rc_charged: bool,
    victim: bool,
) -> Result<CosimResult, SimError> {
    let trig_en = match &trigger.behavior {
        BehaviorModel::Combinational(_) => eval_combinational(trigger, trigger_inputs)?,
        BehaviorModel::TimedRc { front, .. } => {
            if trigger_inputs.len() != front.arity() {
                return Err(SimError::ArityMismatch {
                    expected: front.arity(),
                    got: trigger_inputs.len(),
                });
            }
            rc_charged
        }
    };
    let payload_eval = eval_payload(payload, victim, trig_en)?;
    Ok(CosimResult {
        trig_en,
        victim_mod: payload_eval.victim_mod,
        leak_out: payload_eval.leak_out,
    })
}

fn waveform_level(wave: &[(f64, u8)], t: f64) -> bool {
    let mut level = false;
    for (time, bit) in wave {
        if *time <= t {
            level = *bit != 0;
        } else {
            break;
        }
    }
    level
}

/// Evaluates a template against a stimulus and renders the result in the
/// trace CSV format (`time,<column>,...` with binary samples), so simulator
/// output can be fed straight back into activity analysis.
pub fn simulate_template(template: &TrojanTemplate, stimulus: &Stimulus) -> Result<String, SimError> {
    let input_ports = template.input_ports();

    let (dt, grid, port_waves): (f64, Vec<f64>, BTreeMap<String, Vec<(f64, u8)>>) = match stimulus
    {
        Stimulus::Static { inputs } => {
            let waves: BTreeMap<String, Vec<(f64, u8)>> = inputs
                .iter()
                .map(|(port, bit)| (port.clone(), vec![(0.0, *bit)]))
                .collect();
            (1.0, vec![0.0], waves)
        }
        Stimulus::Timed { dt, waveforms } => {
            if !(*dt > 0.0 && dt.is_finite()) {
                return Err(SimError::BadStimulus("dt must be positive".into()));
            }
            let mut t_end = 0.0f64;
            for wave in waveforms.values() {
                let mut last = 0.0;
                for (t, bit) in wave {
                    if !t.is_finite() || *t < last {
                        return Err(SimError::BadStimulus(
                            "waveform times must be nondecreasing".into(),
                        ));
                    }
                    if *bit > 1 {
                        return Err(SimError::BadStimulus("samples must be 0 or 1".into()));
                    }
                    last = *t;
                }
                t_end = t_end.max(last);
            }
            let steps = (t_end / dt).ceil() as usize;
            let grid = (0..=steps).map(|i| i as f64 * dt).collect();
            (*dt, grid, waveforms.clone())
        }
    };

    for port in &input_ports {
        if !port_waves.contains_key(port) {
            return Err(SimError::MissingStimulus(port.clone()));
        }
    }

    let inputs_at = |t: f64| -> Vec<bool> {
        input_ports.iter().map(|p| waveform_level(&port_waves[p], t)).collect()
    };

    let mut columns: Vec<(&str, Vec<bool>)> = Vec::new();
    match (&template.kind, &template.behavior) {
        (TemplateKind::Trigger, BehaviorModel::Combinational(_)) => {
            let mut out = Vec::with_capacity(grid.len());
            for &t in &grid {
                out.push(eval_combinational(template, &inputs_at(t))?);
            }
            columns.push((template.output_port(), out));
        }
        (TemplateKind::Trigger, BehaviorModel::TimedRc { front, params }) => {
            // Front-end condition becomes the TRIG waveform for the RC stage.
            let trig_wave: Vec<(f64, bool)> =
                grid.iter().map(|&t| (t, front.eval(&inputs_at(t)))).collect();
            let sim_dt = dt.min(params.r_charge * params.c / 10.0);
            let result = simulate_rc_trigger(params, &trig_wave, sim_dt)?;
            let out = grid
                .iter()
                .map(|&t| {
                    let mut level = false;
                    for (time, en) in &result.trig_en {
                        if *time <= t {
                            level = *en;
                        } else {
                            break;
                        }
                    }
                    level
                })
                .collect();
            columns.push((template.output_port(), out));
        }
        (TemplateKind::Payload, _) => {
            let mut victim_col = Vec::with_capacity(grid.len());
            let mut leak_col = Vec::with_capacity(grid.len());
            let mut has_leak = false;
            for &t in &grid {
                let bits = inputs_at(t);
                let eval = eval_payload(template, bits[0], bits[1])?;
                victim_col.push(eval.victim_mod);
                if let Some(leak) = eval.leak_out {
                    has_leak = true;
                    leak_col.push(leak);
                }
            }
            if template.output_port() == PORT_LEAK_OUT {
                columns.push((PORT_LEAK_OUT, leak_col.clone()));
                columns.push((PORT_VICTIM_MOD, victim_col));
            } else {
                columns.push((PORT_VICTIM_MOD, victim_col));
                if has_leak {
                    columns.push((PORT_LEAK_OUT, leak_col));
                }
            }
        }
    }

    let mut csv = String::from("time");
    for (name, _) in &columns {
        csv.push(',');
        csv.push_str(name);
    }
    csv.push('\n');
    for (i, t) in grid.iter().enumerate() {
        csv.push_str(&format!("{t}"));
        for (_, col) in &columns {
            csv.push(',');
            csv.push(if col[i] { '1' } else { '0' });
        }
        csv.push('\n');
    }
    Ok(csv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::TemplateLibrary;

    #[test]
    fn payload_formulas_match_transfer_functions() {
        let lib = TemplateLibrary::builtin();
        let p1 = lib.get("P1").unwrap();
        // Transparent when dormant.
        for victim in [false, true] {
            assert_eq!(eval_payload(p1, victim, false).unwrap().victim_mod, victim);
        }
        assert!(!eval_payload(p1, true, true).unwrap().victim_mod);

        let p2 = lib.get("P2").unwrap();
        let e = eval_payload(p2, false, true).unwrap();
        assert_eq!((e.victim_mod, e.leak_out), (false, Some(false)));
        let e = eval_payload(p2, false, false).unwrap();
        assert_eq!(e.leak_out, Some(true), "idles high");

        let p3 = lib.get("P3").unwrap();
        assert!(!eval_payload(p3, true, true).unwrap().victim_mod);
        assert!(eval_payload(p3, true, false).unwrap().victim_mod);
    }

    #[test]
    fn triggers_are_not_payloads() {
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        assert!(matches!(eval_payload(t1, true, true), Err(SimError::UnknownPayload(_))));
    }

    #[test]
    fn payload_structural_eval_matches_formula() {
        let lib = TemplateLibrary::builtin();
        for id in ["P1", "P2", "P3"] {
            let payload = lib.get(id).unwrap();
            let table = brute_force_truth_table(payload).unwrap();
            for row in 0..4usize {
                let bits = row_inputs(row, 2);
                let formula = eval_payload(payload, bits[0], bits[1]).unwrap();
                let structural_primary = table[row];
                let expected = match payload.output_port() {
                    PORT_LEAK_OUT => formula.leak_out.unwrap(),
                    _ => formula.victim_mod,
                };
                assert_eq!(structural_primary, expected, "{id} row {row:#b}");
            }
        }
    }

    #[test]
    fn dormant_inputs_deactivate_every_trigger() {
        let lib = TemplateLibrary::builtin();
        for trigger in lib.triggers() {
            let bits = dormant_inputs(trigger);
            assert!(!trigger.behavior.front().eval(&bits), "{}", trigger.id);
        }
    }

    #[test]
    fn cosim_t1_p1_inverts_on_activation() {
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let p1 = lib.get("P1").unwrap();
        let active = cosim(t1, p1, &[true; 4], false, true).unwrap();
        assert!(active.trig_en);
        assert!(!active.victim_mod, "victim inverted at 4'b1111");
        let dormant = cosim(t1, p1, &dormant_inputs(t1), false, true).unwrap();
        assert!(!dormant.trig_en);
        assert!(dormant.victim_mod, "victim passes through when dormant");
    }

    #[test]
    fn simulate_static_and_timed() {
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let inputs: BTreeMap<String, u8> =
            (1..=4).map(|i| (format!("TRIG{i}"), 1u8)).collect();
        let csv = simulate_template(t1, &Stimulus::Static { inputs }).unwrap();
        assert!(csv.starts_with("time,TRIG_EN\n"));
        assert!(csv.contains("0,1"));

        let mut waveforms = BTreeMap::new();
        for i in 1..=4 {
            waveforms.insert(format!("TRIG{i}"), vec![(0.0, 0u8), (0.5, 1u8), (1.0, 1u8)]);
        }
        let csv = simulate_template(t1, &Stimulus::Timed { dt: 0.25, waveforms }).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6); // header + t in {0,.25,.5,.75,1}
        assert!(lines[1].ends_with(",0"));
        assert!(lines[5].ends_with(",1"));
    }

    #[test]
    fn simulate_requires_all_ports() {
        let lib = TemplateLibrary::builtin();
        let t1 = lib.get("T1").unwrap();
        let inputs: BTreeMap<String, u8> = [("TRIG1".to_string(), 1u8)].into_iter().collect();
        assert!(matches!(
            simulate_template(t1, &Stimulus::Static { inputs }),
            Err(SimError::MissingStimulus(_))
        ));
    }
}
