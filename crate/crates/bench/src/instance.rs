//! Named instance families. Every family hides its structure along one
//! uniformly random unit direction `v` drawn from the instance seed.

use serde::{Deserialize, Serialize};
use trunctest_core::hardinstance::{calibrate_hard_instance, hard_instance_for_alpha, random_direction};
use trunctest_core::likelihood::null_truncated_mean;
use trunctest_core::rng::seeded;
use trunctest_core::testers::Decision;
use trunctest_core::{TruncatedGaussianSpec, TruncationSet};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    /// N(0, I).
    NullFull,
    /// N(0, I) minus an upper tail of mass ε along `v`.
    NullTail,
    /// N(0, I) restricted to the hard-instance set for ε.
    NullHardSet,
    /// N(αv, I).
    AltFull,
    /// N(αv, I) minus its own upper tail of mass ε along `v`, the cut that
    /// pulls the truncated mean furthest toward zero.
    AltTail,
    /// N(αv, I) restricted to the `NullTail` set.
    AltNullTail,
    /// N(αv, I) restricted to the hard-instance set for ε.
    AltHardSet,
    /// The hard instance for ε; the mean norm is the calibrated α, not the
    /// cell's.
    Hard,
    /// The hard instance whose calibrated shift equals the cell's α; its tail
    /// mass must not exceed the cell's ε.
    HardAtAlpha,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 9] = [
        InstanceKind::NullFull,
        InstanceKind::NullTail,
        InstanceKind::NullHardSet,
        InstanceKind::AltFull,
        InstanceKind::AltTail,
        InstanceKind::AltNullTail,
        InstanceKind::AltHardSet,
        InstanceKind::Hard,
        InstanceKind::HardAtAlpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::NullFull => "null_full",
            InstanceKind::NullTail => "null_tail",
            InstanceKind::NullHardSet => "null_hard_set",
            InstanceKind::AltFull => "alt_full",
            InstanceKind::AltTail => "alt_tail",
            InstanceKind::AltNullTail => "alt_null_tail",
            InstanceKind::AltHardSet => "alt_hard_set",
            InstanceKind::Hard => "hard",
            InstanceKind::HardAtAlpha => "hard_at_alpha",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Completeness instances have mean zero.
    pub fn is_null(self) -> bool {
        matches!(self, InstanceKind::NullFull | InstanceKind::NullTail | InstanceKind::NullHardSet)
    }

    /// ACCEPT on completeness instances, REJECT on soundness instances.
    pub fn is_success(self, decision: Decision) -> bool {
        (decision == Decision::Accept) == self.is_null()
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub kind: InstanceKind,
    pub spec: TruncatedGaussianSpec,
    pub direction: Vec<f64>,
}

impl Instance {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn set(&self) -> &TruncationSet {
        self.spec.set()
    }

    /// μ′_S = E_{N(0,I,S)}[x] for the instance's set, to accuracy α²/100.
    pub fn null_mean(&self, alpha: f64, seed: u64) -> Result<Vec<f64>> {
        Ok(null_truncated_mean(self.set(), alpha * alpha / 100.0, seed)?.value)
    }
}

pub fn build_instance(kind: InstanceKind, d: usize, alpha: f64, eps: f64, seed: u64) -> Result<Instance> {
    let v = random_direction(&mut seeded(seed), d);
    let zero = vec![0.0; d];
    let shifted = |a: f64| v.iter().map(|x| a * x).collect::<Vec<f64>>();
    let (mu, set) = match kind {
        InstanceKind::NullFull => (zero, TruncationSet::full_space(d)?),
        InstanceKind::NullTail => {
            let set = TruncationSet::tail_with_mass(&v, &zero, eps)?;
            (zero, set)
        }
        InstanceKind::NullHardSet => {
            let h = calibrate_hard_instance(eps)?;
            (zero, TruncationSet::half_space_tail(v.clone(), h.b)?)
        }
        InstanceKind::AltFull => (shifted(alpha), TruncationSet::full_space(d)?),
        InstanceKind::AltTail => {
            let mu = shifted(alpha);
            let set = TruncationSet::tail_with_mass(&v, &mu, eps)?;
            (mu, set)
        }
        InstanceKind::AltNullTail => {
            (shifted(alpha), TruncationSet::tail_with_mass(&v, &zero, eps)?)
        }
        InstanceKind::AltHardSet => {
            let h = calibrate_hard_instance(eps)?;
            (shifted(alpha), TruncationSet::half_space_tail(v.clone(), h.b)?)
        }
        InstanceKind::Hard => {
            let h = calibrate_hard_instance(eps)?;
            (shifted(h.alpha), TruncationSet::half_space_tail(v.clone(), h.b)?)
        }
        InstanceKind::HardAtAlpha => {
            let h = hard_instance_for_alpha(alpha)?;
            if h.eps > eps {
                return Err(trunctest_core::Error::InvalidParameter(
                    "hard instance at this alpha needs more tail mass than eps allows",
                )
                .into());
            }
            (shifted(h.alpha), TruncationSet::half_space_tail(v.clone(), h.b)?)
        }
    };
    Ok(Instance { kind, spec: TruncatedGaussianSpec::new(mu, set)?, direction: v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use trunctest_core::linalg::norm;

    #[test]
    fn names_round_trip() {
        for k in InstanceKind::ALL {
            assert_eq!(InstanceKind::from_name(k.name()), Some(k));
            let json = serde_json::to_string(&k).unwrap();
            assert_eq!(json, format!("\"{}\"", k.name()));
        }
    }

    #[test]
    fn families_have_the_advertised_moments() {
        let d = 6;
        let hard = build_instance(InstanceKind::Hard, d, 0.0, 0.1, 3).unwrap();
        let m = hard.set().analytic_truncated_mean(hard.spec.mu()).unwrap();
        assert!(norm(&m) < 1e-10);
        let alt = build_instance(InstanceKind::AltTail, d, 0.3, 0.05, 3).unwrap();
        assert!((alt.set().analytic_mass(alt.spec.mu()).unwrap() - 0.95).abs() < 1e-12);
        assert!((norm(alt.spec.mu()) - 0.3).abs() < 1e-12);
        let null = build_instance(InstanceKind::NullTail, d, 0.3, 0.3, 3).unwrap();
        assert!((null.set().analytic_mass(&vec![0.0; d]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(alt.direction, null.direction);
        let at = build_instance(InstanceKind::HardAtAlpha, d, 0.08, 0.2, 3).unwrap();
        assert!((norm(at.spec.mu()) - 0.08).abs() < 1e-12);
        assert!(build_instance(InstanceKind::HardAtAlpha, d, 0.3, 0.01, 3).is_err());
    }

    #[test]
    fn success_semantics() {
        assert!(InstanceKind::NullTail.is_success(Decision::Accept));
        assert!(InstanceKind::Hard.is_success(Decision::Reject));
        assert!(!InstanceKind::AltFull.is_success(Decision::Accept));
    }
}
