//! Forward-Euler transient model of the capacitor-accumulator trigger stage.
//! A closed form exists for constant drive (V(t) = Vdd(1 - e^(-t/RC))), which
//! the tests use as the oracle.

use super::SimError;
use crate::templates::RcParams;

#[derive(Debug, Clone)]
pub struct RcSimResult {
    /// TRIG_EN transitions as (time, level), starting at t = 0.
    pub trig_en: Vec<(f64, bool)>,
    /// First time the comparator output went high.
    pub fire_time: Option<f64>,
    /// Capacitor voltage at the end of the run.
    pub v_end: f64,
}

/// Integrates the capacitor voltage over a TRIG step waveform.
///
/// While TRIG is high the capacitor charges through `r_charge`; while low it
/// holds its charge if a diode blocks the discharge path (`r_discharge` =
/// None) or drains through `r_discharge`. TRIG_EN is an ideal comparator
/// against Vref. The step must satisfy dt <= r_charge*c/10.
pub fn simulate_rc_trigger(
    params: &RcParams,
    trig: &[(f64, bool)],
    dt: f64,
) -> Result<RcSimResult, SimError> {
    params.validate().map_err(|e| SimError::InvalidParams(e.to_string()))?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SimError::InvalidParams("dt must be positive".into()));
    }
    let max_dt = params.r_charge * params.c / 10.0;
    if dt > max_dt {
        return Err(SimError::StepTooCoarse { dt, max: max_dt });
    }
    if trig.is_empty() {
        return Err(SimError::BadStimulus("empty TRIG waveform".into()));
    }
    let mut last_t = 0.0;
    for (t, _) in trig {
        if !t.is_finite() || *t < last_t {
            return Err(SimError::BadStimulus("waveform times must be nondecreasing".into()));
        }
        last_t = *t;
    }

    let vref = params.vref();
    let t_end = trig.last().unwrap().0;
    let charge_tau = params.r_charge * params.c;
    let discharge_tau = params.r_discharge.map(|r| r * params.c);

    let mut v = 0.0f64;
    let mut t = 0.0f64;
    let mut step_idx = 0usize;
    let mut level = false; // TRIG before the first step
    let mut en = v >= vref;
    let mut transitions = vec![(0.0, en)];
    let mut fire_time = if en { Some(0.0) } else { None };

    while t < t_end {
        while step_idx < trig.len() && trig[step_idx].0 <= t {
            level = trig[step_idx].1;
            step_idx += 1;
        }
        let dv = if level {
            (params.vdd - v) / charge_tau
        } else {
            match discharge_tau {
                None => 0.0, // diode holds the charge
                Some(tau) => -v / tau,
            }
        };
        v = (v + dt * dv).clamp(0.0, params.vdd);
        t += dt;
        let now = v >= vref;
        if now != en {
            en = now;
            transitions.push((t, en));
            if en && fire_time.is_none() {
                fire_time = Some(t);
            }
        }
    }

    Ok(RcSimResult { trig_en: transitions, fire_time, v_end: v })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(with_diode: bool) -> RcParams {
        RcParams {
            r_charge: 10_000.0,
            r_discharge: if with_diode { None } else { Some(10_000.0) },
            c: 1e-5,
            vdd: 5.0,
            r1: 10_000.0,
            r2: 10_000.0,
        }
    }

    /// Closed-form fire time for constant TRIG high: t = RC ln(Vdd/(Vdd-Vref)).
    fn closed_form_fire(p: &RcParams) -> f64 {
        p.r_charge * p.c * (p.vdd / (p.vdd - p.vref())).ln()
    }

    #[test]
    fn constant_high_fires_at_rc_ln2() {
        let p = params(true);
        let expected = closed_form_fire(&p); // RC ln 2 = 69.3 ms
        assert!((expected - 0.0693147).abs() < 1e-6);
        let dt = 1e-4;
        let result = simulate_rc_trigger(&p, &[(0.0, true), (0.2, true)], dt).unwrap();
        let fired = result.fire_time.expect("must fire");
        assert!(
            (fired - expected).abs() <= 2.0 * dt,
            "fired at {fired}, expected {expected} +- {}",
            2.0 * dt
        );
    }

    #[test]
    fn halving_dt_moves_fire_time_by_less_than_dt() {
        let p = params(true);
        let wave = [(0.0, true), (0.2, true)];
        let coarse = simulate_rc_trigger(&p, &wave, 2e-4).unwrap().fire_time.unwrap();
        let fine = simulate_rc_trigger(&p, &wave, 1e-4).unwrap().fire_time.unwrap();
        assert!((coarse - fine).abs() < 2e-4);
    }

    #[test]
    fn diode_accumulates_across_pulses() {
        let p = params(true);
        // Ten 8 ms pulses: 80 ms of total on-time > 69.3 ms.
        let mut wave = Vec::new();
        for i in 0..10 {
            let start = i as f64 * 0.05;
            wave.push((start, true));
            wave.push((start + 0.008, false));
        }
        wave.push((0.6, false));
        let result = simulate_rc_trigger(&p, &wave, 1e-4).unwrap();
        assert!(result.fire_time.is_some(), "charge must accumulate across pulses");

        // Piecewise closed form: the nth pulse continues charging from the
        // held voltage, so after k pulses v = Vdd(1 - e^(-k*0.008/RC)).
        let tau = p.r_charge * p.c;
        let pulses_needed = (0..)
            .find(|k| p.vdd * (1.0 - (-(*k as f64) * 0.008 / tau).exp()) >= p.vref())
            .unwrap();
        let fired = result.fire_time.unwrap();
        let pulse_start = (pulses_needed - 1) as f64 * 0.05;
        assert!(
            fired > pulse_start && fired < pulse_start + 0.009,
            "fired at {fired}, expected during pulse {pulses_needed}"
        );
    }

    #[test]
    fn without_diode_short_pulses_never_fire() {
        let p = params(false);
        // 8 ms on, 92 ms off: each gap drains far more than a pulse adds.
        let mut wave = Vec::new();
        for i in 0..20 {
            let start = i as f64 * 0.1;
            wave.push((start, true));
            wave.push((start + 0.008, false));
        }
        wave.push((2.5, false));
        let result = simulate_rc_trigger(&p, &wave, 1e-4).unwrap();
        assert_eq!(result.fire_time, None);
        // Closed-form bound: peak after a pulse stays under
        // Vdd(1-e^(-0.008/tau)) / (1-e^(-0.1/tau)) (geometric series limit).
        let tau = p.r_charge * p.c;
        let limit = p.vdd * (1.0 - (-0.008f64 / tau).exp()) / (1.0 - (-0.1f64 / tau).exp());
        assert!(limit < p.vref(), "test premise: steady-state peak {limit} < Vref");
    }

    #[test]
    fn charge_holds_when_trig_drops_with_diode() {
        let p = params(true);
        let result =
            simulate_rc_trigger(&p, &[(0.0, true), (0.02, false), (0.3, false)], 1e-4).unwrap();
        let expected = p.vdd * (1.0 - (-0.02f64 / (p.r_charge * p.c)).exp());
        assert!((result.v_end - expected).abs() < 0.05, "{} vs {expected}", result.v_end);
    }

    #[test]
    fn step_too_coarse_is_rejected() {
        let p = params(true);
        assert!(matches!(
            simulate_rc_trigger(&p, &[(0.0, true)], 1.0),
            Err(SimError::StepTooCoarse { .. })
        ));
        assert!(matches!(
            simulate_rc_trigger(&p, &[(0.0, true)], -1.0),
            Err(SimError::InvalidParams(_))
        ));
    }

    #[test]
    fn bad_waveform_is_rejected() {
        let p = params(true);
        assert!(matches!(
            simulate_rc_trigger(&p, &[(0.1, true), (0.05, false)], 1e-4),
            Err(SimError::BadStimulus(_))
        ));
    }
}
