//! Leaky integrate-and-fire membrane dynamics (forward Euler).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Membrane parameters. Times in ms, potentials in mV, resistance in MOhm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LifParams {
    pub tau_m: f64,
    pub v_rest: f64,
    pub v_reset: f64,
    pub v_th: f64,
    pub r_m: f64,
    pub t_ref: f64,
    pub dt: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self {
            tau_m: 10.0,
            v_rest: 0.0,
            v_reset: 0.0,
            v_th: 1.0,
            r_m: 1.0,
            t_ref: 0.0,
            dt: 0.1,
        }
    }
}

impl LifParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.tau_m, self.v_rest, self.v_reset, self.v_th, self.r_m, self.t_ref, self.dt]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::Config("LIF parameters must be finite".into()));
        }
        if self.tau_m <= 0.0 || self.dt <= 0.0 {
            return Err(Error::Config("tau_m and dt must be positive".into()));
        }
        // small tolerance so that dt = tau_m / 10 computed in floating point is accepted
        if self.dt > self.tau_m / 10.0 * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "dt = {} exceeds tau_m / 10 = {}",
                self.dt,
                self.tau_m / 10.0
            )));
        }
        if self.v_th <= self.v_reset {
            return Err(Error::Config("v_th must exceed v_reset".into()));
        }
        if self.t_ref < 0.0 {
            return Err(Error::Config("t_ref must be non-negative".into()));
        }
        Ok(())
    }

    /// Refractory period in whole steps.
    pub fn refractory_steps(&self) -> u32 {
        (self.t_ref / self.dt).round() as u32
    }

    /// Analytic interspike interval (ms) under constant current `i_in`, or `None` when the
    /// drive never reaches threshold.
    pub fn analytic_isi(&self, i_in: f64) -> Option<f64> {
        let v_inf = self.v_rest + self.r_m * i_in;
        if v_inf <= self.v_th {
            return None;
        }
        Some(self.t_ref + self.tau_m * ((v_inf - self.v_reset) / (v_inf - self.v_th)).ln())
    }
}

/// One Euler step. Fires when the potential is at or above `v_th`, either on entry or
/// after integration, in which case it is reset. Refractoriness is the caller's concern.
#[inline]
pub fn lif_step(v: f64, i_in: f64, p: &LifParams) -> (f64, bool) {
    if v >= p.v_th {
        return (p.v_reset, true);
    }
    let v_next = v + (p.dt / p.tau_m) * (-(v - p.v_rest) + p.r_m * i_in);
    if v_next >= p.v_th {
        (p.v_reset, true)
    } else {
        (v_next, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rest_is_a_fixed_point() {
        let p = LifParams { v_rest: -65.0, v_reset: -70.0, v_th: -50.0, ..Default::default() };
        assert_eq!(lif_step(-65.0, 0.0, &p), (-65.0, false));
    }

    #[test]
    fn threshold_equality_fires() {
        let p = LifParams::default();
        assert_eq!(lif_step(p.v_th, 0.0, &p), (p.v_reset, true));
        // integration landing exactly on threshold also fires: 0.5 + 0.01 * (-0.5 + 50.5) = 1
        let (v, spiked) = lif_step(0.5, 50.5, &p);
        assert!(spiked && v == p.v_reset);
        assert_eq!(lif_step(0.5, 0.0, &p), (0.495, false));
    }

    #[test]
    fn reference_isi() {
        let p = LifParams::default();
        let isi = p.analytic_isi(2.0).unwrap();
        assert!((isi - 10.0 * 2f64.ln()).abs() < 1e-12);
        assert!((1000.0 / isi - 144.269_504).abs() < 1e-3);
        let mut v = 0.0;
        let mut steps = 0;
        loop {
            steps += 1;
            let (next, spiked) = lif_step(v, 2.0, &p);
            v = next;
            if spiked {
                break;
            }
        }
        let simulated = steps as f64 * p.dt;
        assert!(((simulated - isi) / isi).abs() < 0.02, "{simulated} vs {isi}");
        assert!(p.analytic_isi(1.0).is_none());
    }

    #[test]
    fn leak_is_monotone() {
        let p = LifParams { v_rest: -65.0, v_reset: -70.0, v_th: -50.0, ..Default::default() };
        let mut v = -52.0;
        for _ in 0..1000 {
            let (next, spiked) = lif_step(v, 0.0, &p);
            assert!(!spiked);
            assert!((next - p.v_rest).abs() <= (v - p.v_rest).abs());
            v = next;
        }
        let mut v = -80.0;
        for _ in 0..1000 {
            let (next, _) = lif_step(v, 0.0, &p);
            assert!((next - p.v_rest).abs() <= (v - p.v_rest).abs());
            v = next;
        }
    }

    #[test]
    fn validation() {
        assert!(LifParams::default().validate().is_ok());
        assert!(LifParams { dt: 2.0, ..Default::default() }.validate().is_err());
        assert!(LifParams { tau_m: -1.0, ..Default::default() }.validate().is_err());
        assert!(LifParams { v_th: 0.0, ..Default::default() }.validate().is_err());
        assert!(LifParams { dt: 1.0, ..Default::default() }.validate().is_ok());
    }
}
