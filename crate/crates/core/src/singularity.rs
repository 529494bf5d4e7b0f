//! Nonincreasing nonlinearities `h` that may blow up at zero, their level-`n`
//! caps `h_n = T_n(h)`, and the truncations `T_k`, `G_k`.

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    /// `s^-γ`.
    PurePower,
    /// `(s + shift)^-γ`, finite at `0⁺`.
    ShiftedPower { shift: f64 },
    /// `min(plateau, s^-γ)`.
    BoundedPlateau { plateau: f64 },
}

/// Envelope data for the growth conditions near zero and at infinity:
/// `h(s) <= c1 s^-γ` for `s < k_under` and `h(s) <= c2 s^-θ` for `s > k_over`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub c1: f64,
    pub c2: f64,
    pub k_under: f64,
    pub k_over: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularNonlinearity {
    kind: Kind,
    gamma: f64,
    theta: f64,
    envelope: Envelope,
}

pub const DEFAULT_K_UNDER: f64 = 0.5;
pub const DEFAULT_K_OVER: f64 = 2.0;

impl SingularNonlinearity {
    /// `s^-γ` with `θ = γ` and derived envelope constants.
    pub fn pure_power(gamma: f64) -> Result<Self> {
        Self::new(Kind::PurePower, gamma, None)
    }

    pub fn shifted_power(gamma: f64, shift: f64) -> Result<Self> {
        Self::new(Kind::ShiftedPower { shift }, gamma, None)
    }

    pub fn bounded_plateau(gamma: f64, plateau: f64) -> Result<Self> {
        Self::new(Kind::BoundedPlateau { plateau }, gamma, None)
    }

    /// General constructor. `theta` defaults to `γ`; the envelope constants
    /// are the smallest ones valid for the default `k_under`, `k_over`.
    pub fn new(kind: Kind, gamma: f64, theta: Option<f64>) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid("h.gamma", format!("{gamma} must be positive")));
        }
        let theta = theta.unwrap_or(gamma);
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(invalid("h.theta", format!("{theta} must be positive")));
        }
        if theta > gamma {
            // s^θ h(s) ~ s^(θ-γ) is unbounded at infinity for every shipped kind.
            return Err(invalid(
                "h.theta",
                format!("{theta} exceeds gamma {gamma}; no decay envelope exists"),
            ));
        }
        match kind {
            Kind::ShiftedPower { shift } if !(shift > 0.0 && shift.is_finite()) => {
                return Err(invalid("h.shift", format!("{shift} must be positive")))
            }
            Kind::BoundedPlateau { plateau } if !(plateau > 0.0 && plateau.is_finite()) => {
                return Err(invalid("h.plateau", format!("{plateau} must be positive")))
            }
            _ => {}
        }
        let mut h = SingularNonlinearity {
            kind,
            gamma,
            theta,
            envelope: Envelope {
                c1: 0.0,
                c2: 0.0,
                k_under: DEFAULT_K_UNDER,
                k_over: DEFAULT_K_OVER,
            },
        };
        h.envelope = h.derive_envelope(DEFAULT_K_UNDER, DEFAULT_K_OVER);
        Ok(h)
    }

    /// Replaces the envelope; rejected unless it holds on the check sample.
    pub fn with_envelope(mut self, envelope: Envelope) -> Result<Self> {
        let Envelope {
            c1,
            c2,
            k_under,
            k_over,
        } = envelope;
        if !(c1 > 0.0 && c2 > 0.0 && k_under > 0.0) {
            return Err(invalid("h.envelope", "c1, c2 and k_under must be positive"));
        }
        if !(k_over > k_under) {
            return Err(invalid("h.k_over", format!("{k_over} must exceed k_under {k_under}")));
        }
        self.envelope = envelope;
        let report = self.check_envelope();
        if !report.holds() {
            return Err(invalid(
                "h.envelope",
                format!("violated on the sample: {report:?}"),
            ));
        }
        Ok(self)
    }

    /// Moves the envelope thresholds and re-derives tight `c1`, `c2`.
    pub fn with_thresholds(mut self, k_under: f64, k_over: f64) -> Result<Self> {
        if !(k_under > 0.0 && k_over > k_under) {
            return Err(invalid("h.k_over", "need 0 < k_under < k_over"));
        }
        self.envelope = self.derive_envelope(k_under, k_over);
        Ok(self)
    }

    fn derive_envelope(&self, k_under: f64, k_over: f64) -> Envelope {
        let (g, t) = (self.gamma, self.theta);
        let (c1, c2) = match self.kind {
            Kind::PurePower => (1.0, k_over.powf(t - g)),
            Kind::ShiftedPower { shift } => {
                // s^γ (s+a)^-γ increases towards 1.
                let c1 = (k_under / (k_under + shift)).powf(g);
                // s^θ (s+a)^-γ peaks at s = θ a / (γ - θ) when θ < γ.
                let c2 = if t == g {
                    1.0
                } else {
                    let peak = t * shift / (g - t);
                    let s = peak.max(k_over);
                    s.powf(t) * (s + shift).powf(-g)
                };
                (c1, c2)
            }
            Kind::BoundedPlateau { plateau } => {
                let cross = plateau.powf(-1.0 / g);
                let c1 = (plateau * k_under.powf(g)).min(1.0);
                // s^θ min(H0, s^-γ) peaks at the crossover point.
                let c2 = if t == g {
                    1.0
                } else if cross > k_over {
                    plateau.powf(1.0 - t / g)
                } else {
                    k_over.powf(t - g)
                };
                (c1, c2)
            }
        };
        // Headroom for rounding in the sampled envelope check.
        let pad = 1.0 + 1e-12;
        Envelope {
            c1: c1 * pad,
            c2: c2 * pad,
            k_under,
            k_over,
        }
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn envelope(&self) -> Envelope {
        self.envelope
    }

    /// Whether `h` is strictly decreasing on `(0, ∞)`.
    pub fn strictly_decreasing(&self) -> bool {
        !matches!(self.kind, Kind::BoundedPlateau { .. })
    }

    /// `h(s)` for `s > 0`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        if !(s > 0.0) {
            return Err(Error::Domain { s });
        }
        Ok(self.eval_positive(s))
    }

    pub(crate) fn eval_positive(&self, s: f64) -> f64 {
        match self.kind {
            Kind::PurePower => s.powf(-self.gamma),
            Kind::ShiftedPower { shift } => (s + shift).powf(-self.gamma),
            Kind::BoundedPlateau { plateau } => plateau.min(s.powf(-self.gamma)),
        }
    }

    /// `h_n(s) = min(n, h(s))`.
    pub fn eval_capped(&self, n: u64, s: f64) -> Result<f64> {
        Ok((n as f64).min(self.eval(s)?))
    }

    /// Limit of `h` at `0⁺`; infinite for the pure power.
    pub fn limit_at_zero(&self) -> f64 {
        match self.kind {
            Kind::PurePower => f64::INFINITY,
            Kind::ShiftedPower { shift } => shift.powf(-self.gamma),
            Kind::BoundedPlateau { plateau } => plateau,
        }
    }

    /// Samples 1000 log-spaced points in `(1e-8, 1e8)` and checks
    /// monotonicity, positivity and both growth envelopes.
    pub fn check_envelope(&self) -> EnvelopeReport {
        let samples: Vec<f64> = (0..1000)
            .map(|i| 10f64.powf(-8.0 + 16.0 * (i as f64 + 0.5) / 1000.0))
            .collect();
        let values: Vec<f64> = samples.iter().map(|&s| self.eval_positive(s)).collect();
        let Envelope {
            c1,
            c2,
            k_under,
            k_over,
        } = self.envelope;
        let mut report = EnvelopeReport {
            monotone: values.windows(2).all(|w| w[1] <= w[0]),
            positive: values.iter().all(|&v| v > 0.0 && v.is_finite()),
            near_zero_ratio: 0.0,
            at_infinity_ratio: 0.0,
            finite_limit: self.eval_positive(1e6) <= self.eval_positive(k_over),
        };
        for (&s, &v) in samples.iter().zip(&values) {
            if s < k_under {
                report.near_zero_ratio = report.near_zero_ratio.max(v / (c1 * s.powf(-self.gamma)));
            }
            if s > k_over {
                report.at_infinity_ratio =
                    report.at_infinity_ratio.max(v / (c2 * s.powf(-self.theta)));
            }
        }
        report
    }
}

/// Outcome of [`SingularNonlinearity::check_envelope`]; ratios are
/// `max h(s) / bound(s)` and must not exceed one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeReport {
    pub monotone: bool,
    pub positive: bool,
    pub near_zero_ratio: f64,
    pub at_infinity_ratio: f64,
    pub finite_limit: bool,
}

impl EnvelopeReport {
    pub fn holds(&self) -> bool {
        self.monotone
            && self.positive
            && self.finite_limit
            && self.near_zero_ratio <= 1.0
            && self.at_infinity_ratio <= 1.0
    }
}

/// Positive truncation level `k`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TruncationLevel(f64);

impl TruncationLevel {
    pub fn new(k: f64) -> Result<Self> {
        if k > 0.0 && k.is_finite() {
            Ok(TruncationLevel(k))
        } else {
            Err(invalid("k", format!("truncation level {k} must be positive")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn t(self, s: f64) -> f64 {
        trunc_t(self.0, s)
    }

    pub fn g(self, s: f64) -> f64 {
        trunc_g(self.0, s)
    }
}

/// `T_k(s) = max(-k, min(k, s))`.
pub fn trunc_t(k: f64, s: f64) -> f64 {
    s.clamp(-k, k)
}

/// `G_k(s) = (|s| - k)⁺ sign(s)`, written as `s - T_k(s)`. Whenever some
/// double `g` satisfies `T_k(s) + g == s` this is one; when `k` sits exactly
/// half an ulp of `s` off the grid no such double exists.
pub fn trunc_g(k: f64, s: f64) -> f64 {
    s - trunc_t(k, s)
}

/// `T_k(s)^((γ+1)/2)` for `s >= 0`.
pub fn trunc_power(k: f64, gamma: f64, s: f64) -> f64 {
    trunc_t(k, s.max(0.0)).powf(0.5 * (gamma + 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn instances() -> Vec<SingularNonlinearity> {
        let mut out = Vec::new();
        for g in [0.1, 0.5, 1.0, 2.0, 3.5] {
            out.push(SingularNonlinearity::pure_power(g).unwrap());
            out.push(SingularNonlinearity::shifted_power(g, 0.3).unwrap());
            out.push(SingularNonlinearity::bounded_plateau(g, 50.0).unwrap());
            out.push(SingularNonlinearity::new(Kind::PurePower, g, Some(g / 2.0)).unwrap());
            out.push(SingularNonlinearity::new(Kind::ShiftedPower { shift: 2.0 }, g, Some(g / 3.0)).unwrap());
            out.push(SingularNonlinearity::new(Kind::BoundedPlateau { plateau: 1e4 }, g, Some(g / 2.0)).unwrap());
            out.push(SingularNonlinearity::new(Kind::BoundedPlateau { plateau: 0.01 }, g, Some(g / 2.0)).unwrap());
        }
        out
    }

    #[test]
    fn eval_examples() {
        assert_eq!(SingularNonlinearity::pure_power(0.5).unwrap().eval(4.0).unwrap(), 0.5);
        assert_eq!(SingularNonlinearity::pure_power(1.0).unwrap().eval(1.0).unwrap(), 1.0);
        let shifted = SingularNonlinearity::shifted_power(1.0, 1.0).unwrap();
        assert!((shifted.eval(1e-300).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(shifted.limit_at_zero(), 1.0);
        assert!(matches!(shifted.eval(0.0), Err(Error::Domain { .. })));
        assert!(shifted.eval(-1.0).is_err());
    }

    #[test]
    fn capped_examples() {
        let h = SingularNonlinearity::pure_power(1.0).unwrap();
        assert_eq!(h.eval_capped(2, 0.01).unwrap(), 2.0);
        assert_eq!(h.eval_capped(1000, 0.5).unwrap(), 2.0);
        assert!(h.eval_capped(5, 0.0).is_err());
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(trunc_t(2.0, 5.0), 2.0);
        assert_eq!(trunc_t(2.0, -5.0), -2.0);
        assert_eq!(trunc_t(3.0, 0.0), 0.0);
        assert_eq!(trunc_g(2.0, 5.0), 3.0);
        assert_eq!(trunc_g(2.0, 1.0), 0.0);
        assert_eq!(trunc_g(2.0, -5.0), -3.0);
        assert_eq!(trunc_power(4.0, 1.0, 9.0), 4.0);
        assert_eq!(trunc_power(4.0, 3.0, 1.0), 1.0);
        assert_eq!(trunc_power(1.0, 1.0, 0.25), 0.25);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(SingularNonlinearity::pure_power(-1.0).is_err());
        assert!(SingularNonlinearity::pure_power(0.0).is_err());
        assert!(SingularNonlinearity::shifted_power(1.0, 0.0).is_err());
        assert!(SingularNonlinearity::bounded_plateau(1.0, -2.0).is_err());
        assert!(SingularNonlinearity::new(Kind::PurePower, 1.0, Some(2.0)).is_err());
        assert!(TruncationLevel::new(0.0).is_err());
    }

    #[test]
    fn envelopes_hold_for_every_instance() {
        for h in instances() {
            let r = h.check_envelope();
            assert!(r.holds(), "{h:?}: {r:?}");
        }
    }

    #[test]
    fn plateau_decay_constant_at_crossover() {
        let mid = SingularNonlinearity::new(Kind::BoundedPlateau { plateau: 0.1 }, 2.0, Some(1.0)).unwrap();
        // Crossover at 0.1^-1/2 ≈ 3.16 > k_over: c2 = H0^(1-θ/γ).
        assert!((mid.envelope().c2 - 0.1f64.sqrt()).abs() < 1e-9);
        let big = SingularNonlinearity::new(Kind::BoundedPlateau { plateau: 1e6 }, 2.0, Some(1.0)).unwrap();
        assert!((big.envelope().c2 - 0.5).abs() < 1e-9);
    }

    #[test]
    fn custom_envelope_is_checked() {
        let h = SingularNonlinearity::pure_power(1.0).unwrap();
        let bad = Envelope { c1: 0.5, c2: 1.0, k_under: 0.5, k_over: 2.0 };
        assert!(h.with_envelope(bad).is_err());
        let good = Envelope { c1: 2.0, c2: 2.0, k_under: 0.1, k_over: 10.0 };
        assert!(h.with_envelope(good).is_ok());
        assert!(h.with_thresholds(1.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn truncation_identity_on_lattice(k in 1i64..1 << 40, s in -(1i64 << 40)..1 << 40) {
            let (k, s) = (k as f64 / 1048576.0, s as f64 / 1048576.0);
            prop_assert_eq!(trunc_t(k, s) + trunc_g(k, s), s);
        }

        #[test]
        fn truncation_identity_within_an_ulp(k in 1e-6f64..1e6, s in -1e8f64..1e8) {
            let sum = trunc_t(k, s) + trunc_g(k, s);
            let ulp = s.abs().next_up() - s.abs();
            prop_assert!((sum - s).abs() <= ulp);
        }

        #[test]
        fn h_is_nonincreasing(idx in 0usize..35, a in -8.0f64..8.0, b in -8.0f64..8.0) {
            let h = instances()[idx];
            let (s1, s2) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
            prop_assert!(h.eval(s1).unwrap() >= h.eval(s2).unwrap());
        }

        #[test]
        fn cap_is_monotone_in_level(idx in 0usize..35, n in 1u64..10_000, e in -6.0f64..6.0) {
            let h = instances()[idx];
            let s = 10f64.powf(e);
            let a = h.eval_capped(n, s).unwrap();
            let b = h.eval_capped(n + 1, s).unwrap();
            prop_assert!(a <= b && b <= h.eval(s).unwrap());
        }
    }
}
