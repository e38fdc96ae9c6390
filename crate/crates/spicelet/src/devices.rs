//! Device equations and their linearizations, plus source waveforms.
//!
//! The diode follows the Shockley law `I = Is·(exp(V/(n·Vt)) − 1)` with the
//! exponent capped and extended tangentially so wild Newton steps cannot
//! overflow. The MOSFET is the level-1 square law without body effect;
//! PMOS is evaluated by sign reflection and `vds < 0` by drain/source swap,
//! so the model is symmetric in both quadrants. All conductances returned
//! are the exact partial derivatives of the returned branch current.

use crate::netlist::{ModelCard, ModelKind, Waveform};

/// Thermal voltage at 300 K. Fixed: there are no temperature sweeps here.
pub const VT_THERMAL: f64 = 0.025852;

/// Exponent cap for the diode law; beyond it the exponential continues as
/// its tangent line.
const EXP_CAP: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiodeParams {
    /// Saturation current, amps.
    pub is_sat: f64,
    /// Emission coefficient.
    pub n: f64,
}

impl Default for DiodeParams {
    fn default() -> Self {
        DiodeParams {
            is_sat: 1e-14,
            n: 1.0,
        }
    }
}

impl DiodeParams {
    pub fn from_model(card: &ModelCard) -> Self {
        let d = DiodeParams::default();
        DiodeParams {
            is_sat: card.params.get("is").copied().unwrap_or(d.is_sat),
            n: card.params.get("n").copied().unwrap_or(d.n),
        }
    }

    fn n_vt(&self) -> f64 {
        self.n * VT_THERMAL
    }

    /// Critical voltage for junction limiting.
    pub fn v_crit(&self) -> f64 {
        let nvt = self.n_vt();
        nvt * (nvt / (std::f64::consts::SQRT_2 * self.is_sat)).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MosPolarity {
    Nmos,
    Pmos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MosfetParams {
    /// Threshold voltage, volts (negative for enhancement PMOS).
    pub vto: f64,
    /// Transconductance parameter, A/V².
    pub kp: f64,
    /// Channel width, meters.
    pub w: f64,
    /// Channel length, meters.
    pub l: f64,
    /// Channel-length modulation, 1/V.
    pub lambda: f64,
    pub polarity: MosPolarity,
}

impl MosfetParams {
    /// Classic level-1 defaults for parameters absent from the card.
    pub fn from_model(card: &ModelCard) -> Self {
        let polarity = match card.kind {
            ModelKind::Pmos => MosPolarity::Pmos,
            _ => MosPolarity::Nmos,
        };
        MosfetParams {
            vto: card.params.get("vto").copied().unwrap_or(0.0),
            kp: card.params.get("kp").copied().unwrap_or(2e-5),
            w: card.params.get("w").copied().unwrap_or(1e-4),
            l: card.params.get("l").copied().unwrap_or(1e-4),
            lambda: card.params.get("lambda").copied().unwrap_or(0.0),
            polarity,
        }
    }

    pub fn beta(&self) -> f64 {
        self.kp * self.w / self.l
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MosRegion {
    Cutoff,
    Triode,
    Saturation,
}

impl std::fmt::Display for MosRegion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MosRegion::Cutoff => "cutoff",
            MosRegion::Triode => "triode",
            MosRegion::Saturation => "saturation",
        };
        write!(f, "{s}")
    }
}

/// Diode current and small-signal conductance at junction voltage `v`.
pub fn diode_eval(p: &DiodeParams, v: f64) -> (f64, f64) {
    let nvt = p.n * VT_THERMAL;
    let x = v / nvt;
    if x > EXP_CAP {
        // tangent extension of exp past the cap
        let e = EXP_CAP.exp();
        let i = p.is_sat * (e * (1.0 + (x - EXP_CAP)) - 1.0);
        let g = p.is_sat / nvt * e;
        (i, g)
    } else {
        let e = x.exp();
        (p.is_sat * (e - 1.0), p.is_sat / nvt * e)
    }
}

/// Classic junction-voltage limiting: forward steps above the critical
/// voltage are pulled back logarithmically. The returned voltage lies
/// between `v_old` and `v_new` whenever limiting engages (the raw formula
/// can snap a downward step to `v_crit` outside that bracket, so the result
/// is clamped).
pub fn diode_limit(v_new: f64, v_old: f64, p: &DiodeParams) -> f64 {
    let nvt = p.n * VT_THERMAL;
    let v_crit = p.v_crit();
    if v_new <= v_crit || (v_new - v_old).abs() <= 2.0 * nvt {
        return v_new;
    }
    let limited = if v_old > 0.0 {
        let arg = 1.0 + (v_new - v_old) / nvt;
        if arg > 0.0 {
            v_old + nvt * arg.ln()
        } else {
            v_crit
        }
    } else {
        nvt * (v_new / nvt).ln()
    };
    limited.clamp(v_old.min(v_new), v_old.max(v_new))
}

/// Level-1 MOSFET: drain current and exact partials `gm = ∂id/∂vgs`,
/// `gds = ∂id/∂vds` at the given bias. `vds < 0` is handled by drain/source
/// swap, PMOS by sign reflection.
pub fn mosfet_eval(p: &MosfetParams, vgs: f64, vds: f64) -> (f64, f64, f64, MosRegion) {
    match p.polarity {
        MosPolarity::Nmos => nmos_eval(p.beta(), p.vto, p.lambda, vgs, vds),
        MosPolarity::Pmos => {
            // reflect: PMOS(vgs, vds) = −NMOS(−vgs, −vds) with −vto
            let (id, gm, gds, region) = nmos_eval(p.beta(), -p.vto, p.lambda, -vgs, -vds);
            (-id, gm, gds, region)
        }
    }
}

fn nmos_eval(beta: f64, vto: f64, lambda: f64, vgs: f64, vds: f64) -> (f64, f64, f64, MosRegion) {
    if vds < 0.0 {
        // operate with the terminals swapped; map partials back:
        //   id(vgs, vds) = −id_sw(vgs − vds, −vds)
        //   ∂id/∂vgs = −gm_sw,  ∂id/∂vds = gm_sw + gds_sw
        let (id, gm, gds, region) = nmos_forward(beta, vto, lambda, vgs - vds, -vds);
        return (-id, -gm, gm + gds, region);
    }
    nmos_forward(beta, vto, lambda, vgs, vds)
}

fn nmos_forward(
    beta: f64,
    vto: f64,
    lambda: f64,
    vgs: f64,
    vds: f64,
) -> (f64, f64, f64, MosRegion) {
    let vov = vgs - vto;
    if vov <= 0.0 {
        return (0.0, 0.0, 0.0, MosRegion::Cutoff);
    }
    let clm = 1.0 + lambda * vds;
    if vds < vov {
        let id = beta * (vov * vds - 0.5 * vds * vds) * clm;
        let gm = beta * vds * clm;
        let gds = beta * (vov - vds) * clm + beta * (vov * vds - 0.5 * vds * vds) * lambda;
        (id, gm, gds, MosRegion::Triode)
    } else {
        let id = 0.5 * beta * vov * vov * clm;
        let gm = beta * vov * clm;
        let gds = 0.5 * beta * vov * vov * lambda;
        (id, gm, gds, MosRegion::Saturation)
    }
}

/// Source value at time `t`.
pub fn waveform_eval(w: &Waveform, t: f64) -> f64 {
    match *w {
        Waveform::Dc(v) => v,
        Waveform::Sin {
            offset,
            amplitude,
            freq,
        } => offset + amplitude * (2.0 * std::f64::consts::PI * freq * t).sin(),
        Waveform::Pulse {
            v1,
            v2,
            delay,
            rise,
            fall,
            width,
            period,
        } => {
            if t < delay {
                return v1;
            }
            let mut tp = t - delay;
            if period > 0.0 {
                tp %= period;
            }
            if tp < rise {
                v1 + (v2 - v1) * tp / rise
            } else if tp < rise + width {
                v2
            } else if tp < rise + width + fall {
                v2 + (v1 - v2) * (tp - rise - width) / fall
            } else {
                v1
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn diode_at_zero_bias() {
        let p = DiodeParams::default();
        let (i, g) = diode_eval(&p, 0.0);
        assert_eq!(i, 0.0);
        assert!((g - p.is_sat / (p.n * VT_THERMAL)).abs() < 1e-25);
    }

    #[test]
    fn diode_reverse_saturation() {
        let p = DiodeParams::default();
        let (i, g) = diode_eval(&p, -1.0);
        assert!((i + 1e-14).abs() < 1e-20, "i = {i:e}");
        assert!(g > 0.0);
    }

    #[test]
    fn diode_forward_matches_closed_form() {
        // frozen from a 30-digit evaluation of Is·(exp(0.6/0.025852) − 1)
        let p = DiodeParams::default();
        let (i, g) = diode_eval(&p, 0.6);
        let i_expect = 1.20103672503706e-4;
        let g_expect = 4.64581744212077e-3;
        assert!((i - i_expect).abs() <= TOL * i_expect, "i = {i:e}");
        assert!((g - g_expect).abs() <= 1e-10 * g_expect, "g = {g:e}");
    }

    #[test]
    fn diode_exponent_cap_is_continuous_and_monotone() {
        let p = DiodeParams::default();
        let nvt = p.n * VT_THERMAL;
        let below = diode_eval(&p, (EXP_CAP - 1e-9) * nvt);
        let above = diode_eval(&p, (EXP_CAP + 1e-9) * nvt);
        assert!(above.0 > below.0);
        assert!((above.1 - below.1).abs() / below.1 < 1e-6);
        // far beyond the cap stays finite
        let wild = diode_eval(&p, 1000.0);
        assert!(wild.0.is_finite() && wild.1.is_finite());
    }

    #[test]
    fn limit_passes_small_steps() {
        let p = DiodeParams::default();
        assert_eq!(diode_limit(0.1, 0.0, &p), 0.1);
        assert_eq!(diode_limit(0.7, 0.7, &p), 0.7);
    }

    #[test]
    fn limit_pulls_back_large_forward_step() {
        // frozen from the limiting formula: 0.7 + nvt·ln(1 + 4.3/nvt)
        let p = DiodeParams::default();
        let v = diode_limit(5.0, 0.7, &p);
        assert!(v > 0.7 && v < 5.0);
        assert!((v - 0.832361630585224).abs() < 1e-12, "v = {v}");
    }

    #[test]
    fn limit_from_reverse_bias() {
        let p = DiodeParams::default();
        let v = diode_limit(2.0, -1.0, &p);
        assert!(v > -1.0 && v < 2.0);
    }

    #[test]
    fn mosfet_saturation_point() {
        let p = MosfetParams {
            vto: 1.0,
            kp: 2e-4,
            w: 1.0,
            l: 1.0,
            lambda: 0.0,
            polarity: MosPolarity::Nmos,
        };
        let (id, gm, gds, region) = mosfet_eval(&p, 2.0, 3.0);
        assert_eq!(region, MosRegion::Saturation);
        assert!((id - 1e-4).abs() < 1e-19);
        assert!((gm - 2e-4).abs() < 1e-19);
        assert_eq!(gds, 0.0);
    }

    #[test]
    fn mosfet_cutoff() {
        let p = MosfetParams {
            vto: 1.0,
            kp: 2e-4,
            w: 1.0,
            l: 1.0,
            lambda: 0.0,
            polarity: MosPolarity::Nmos,
        };
        let (id, gm, gds, region) = mosfet_eval(&p, 0.5, 3.0);
        assert_eq!((id, gm, gds), (0.0, 0.0, 0.0));
        assert_eq!(region, MosRegion::Cutoff);
    }

    fn fd_check(p: &MosfetParams, vgs: f64, vds: f64) {
        let h = 1e-7;
        let (_, gm, gds, _) = mosfet_eval(p, vgs, vds);
        let fd_gm = (mosfet_eval(p, vgs + h, vds).0 - mosfet_eval(p, vgs - h, vds).0) / (2.0 * h);
        let fd_gds = (mosfet_eval(p, vgs, vds + h).0 - mosfet_eval(p, vgs, vds - h).0) / (2.0 * h);
        let scale = gm.abs().max(gds.abs()).max(1e-12);
        assert!(
            (gm - fd_gm).abs() <= 1e-6 * scale,
            "gm {gm:e} vs fd {fd_gm:e} at ({vgs},{vds})"
        );
        assert!(
            (gds - fd_gds).abs() <= 1e-6 * scale,
            "gds {gds:e} vs fd {fd_gds:e} at ({vgs},{vds})"
        );
    }

    #[test]
    fn mosfet_partials_match_finite_differences() {
        let nmos = MosfetParams {
            vto: 1.0,
            kp: 2e-5,
            w: 1e-5,
            l: 1e-6,
            lambda: 0.02,
            polarity: MosPolarity::Nmos,
        };
        let pmos = MosfetParams {
            vto: -1.0,
            polarity: MosPolarity::Pmos,
            ..nmos
        };
        // away from region boundaries, both quadrants
        for &(vgs, vds) in &[(2.0, 3.0), (2.0, 0.4), (3.5, 1.2), (2.0, -0.8), (1.5, -3.0)] {
            fd_check(&nmos, vgs, vds);
            fd_check(&pmos, -vgs, -vds);
        }
    }

    #[test]
    fn mosfet_continuous_across_triode_saturation() {
        let p = MosfetParams {
            vto: 1.0,
            kp: 2e-4,
            w: 1.0,
            l: 1.0,
            lambda: 0.0,
            polarity: MosPolarity::Nmos,
        };
        let vgs = 2.5;
        let edge = vgs - p.vto;
        let lo = mosfet_eval(&p, vgs, edge - 1e-12);
        let hi = mosfet_eval(&p, vgs, edge + 1e-12);
        assert!((lo.0 - hi.0).abs() < 1e-12 * lo.0);
        assert!((lo.1 - hi.1).abs() < 1e-9 * lo.1, "gm continuous");
    }

    #[test]
    fn mosfet_scales_with_w_over_l() {
        let base = MosfetParams {
            vto: 1.0,
            kp: 2e-5,
            w: 1e-5,
            l: 1e-6,
            lambda: 0.0,
            polarity: MosPolarity::Nmos,
        };
        let double = MosfetParams { w: 2e-5, ..base };
        let a = mosfet_eval(&base, 2.0, 3.0).0;
        let b = mosfet_eval(&double, 2.0, 3.0).0;
        assert!((b - 2.0 * a).abs() < 1e-18);
    }

    #[test]
    fn pmos_mirrors_nmos() {
        let nmos = MosfetParams {
            vto: 1.0,
            kp: 2e-5,
            w: 1e-5,
            l: 1e-6,
            lambda: 0.03,
            polarity: MosPolarity::Nmos,
        };
        let pmos = MosfetParams {
            vto: -1.0,
            polarity: MosPolarity::Pmos,
            ..nmos
        };
        for &(vgs, vds) in &[(2.0, 3.0), (1.5, 0.2), (0.3, 1.0), (2.0, -1.0)] {
            let n = mosfet_eval(&nmos, vgs, vds);
            let p = mosfet_eval(&pmos, -vgs, -vds);
            assert!(
                (p.0 + n.0).abs() <= 1e-15 * n.0.abs().max(1e-18),
                "id mirror"
            );
        }
    }

    #[test]
    fn pulse_waveform_points() {
        let w = Waveform::Pulse {
            v1: 0.0,
            v2: 5.0,
            delay: 1e-6,
            rise: 1e-9,
            fall: 1e-9,
            width: 10e-6,
            period: 20e-6,
        };
        assert_eq!(waveform_eval(&w, 0.0), 0.0);
        assert_eq!(waveform_eval(&w, 5e-6), 5.0);
        // second period plateau
        assert_eq!(waveform_eval(&w, 25e-6), 5.0);
    }

    #[test]
    fn sin_waveform_quarter_period() {
        let w = Waveform::Sin {
            offset: 0.0,
            amplitude: 1.0,
            freq: 1000.0,
        };
        assert!((waveform_eval(&w, 0.25e-3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dc_waveform_is_constant() {
        let w = Waveform::Dc(3.3);
        assert_eq!(waveform_eval(&w, 0.0), 3.3);
        assert_eq!(waveform_eval(&w, 1.0), 3.3);
    }

    proptest! {
        /// The diode conductance is positive everywhere and the current is
        /// strictly increasing. The sample range keeps exp(v/nVt) above f64
        /// resolution of the −1 term; deeper reverse bias is numerically
        /// flat at −Is.
        #[test]
        fn diode_monotone(v1 in -0.8f64..1.5, dv in 1e-6f64..1.0) {
            let p = DiodeParams::default();
            let (i1, g1) = diode_eval(&p, v1);
            let (i2, _) = diode_eval(&p, v1 + dv);
            prop_assert!(g1 > 0.0);
            prop_assert!(i2 > i1);
        }

        /// Limiting never moves a step outside [v_old, v_new].
        #[test]
        fn limit_stays_bracketed(v_old in -1.0f64..1.0, v_new in -1.0f64..6.0) {
            let p = DiodeParams::default();
            let v = diode_limit(v_new, v_old, &p);
            let lo = v_old.min(v_new) - 1e-12;
            let hi = v_old.max(v_new) + 1e-12;
            prop_assert!(v >= lo && v <= hi, "{v} outside [{lo},{hi}]");
        }
    }
}
