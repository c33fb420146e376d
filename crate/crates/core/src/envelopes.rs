//! Epigraphical regularization `g_nu(xi, x) = inf_zeta g(zeta, x) + |xi - zeta|^beta / (beta theta)`
//! and the hand-designed approximating mappings of the discrete examples.

use serde::{Deserialize, Serialize};

use crate::chance::{Affine, ParamSet};
use crate::model::Component;
use crate::{Error, Point, Result};

/// Where the infimum over `zeta` ranges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvelopeSupport {
    /// A finite support; the infimum is an exact minimum over the atoms.
    Atoms { atoms: Vec<Point> },
    /// All of `R^d`; only indicator-form functions are supported.
    Whole,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeConfig {
    pub beta: f64,
    pub theta: f64,
    pub support: EnvelopeSupport,
}

impl EnvelopeConfig {
    pub fn new(beta: f64, theta: f64, support: EnvelopeSupport) -> Result<Self> {
        let cfg = EnvelopeConfig { beta, theta, support };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 1.0) || !(self.theta > 0.0) || !self.theta.is_finite() {
            return Err(Error::InvalidInput(format!(
                "envelope needs beta >= 1 and finite theta > 0, got {}, {}",
                self.beta, self.theta
            )));
        }
        Ok(())
    }

    fn kernel(&self, xi: &[f64], zeta: &[f64]) -> f64 {
        let r: f64 = xi.iter().zip(zeta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        r.powf(self.beta) / (self.beta * self.theta)
    }
}

/// The function being regularized.
#[derive(Clone, Copy)]
pub enum EnvelopeTarget<'a> {
    /// `b - 1_{H(x)}(zeta)`.
    Indicator { b: f64, set: &'a ParamSet },
    /// An arbitrary `g(zeta, x)`.
    General(&'a dyn Fn(&[f64], &[f64]) -> f64),
}

impl EnvelopeTarget<'_> {
    pub fn eval(&self, zeta: &[f64], x: &[f64]) -> f64 {
        match self {
            EnvelopeTarget::Indicator { b, set } => {
                if set.at(x).contains(zeta) {
                    b - 1.0
                } else {
                    *b
                }
            }
            EnvelopeTarget::General(g) => g(zeta, x),
        }
    }
}

/// `g_nu(xi, x)` for the configured `beta`, `theta` and support.
pub fn epi_regularize(g: EnvelopeTarget<'_>, cfg: &EnvelopeConfig, xi: &[f64], x: &[f64]) -> Result<f64> {
    cfg.validate()?;
    match (&cfg.support, g) {
        (EnvelopeSupport::Atoms { atoms }, _) => {
            if atoms.is_empty() {
                return Err(Error::InvalidInput("envelope support has no atoms".into()));
            }
            Ok(atoms.iter().map(|z| g.eval(z, x) + cfg.kernel(xi, z)).fold(f64::INFINITY, f64::min))
        }
        (EnvelopeSupport::Whole, EnvelopeTarget::Indicator { b, set }) => match set.at(x).distance(xi) {
            Some(d) => Ok(b + (d.powf(cfg.beta) / (cfg.beta * cfg.theta) - 1.0).min(0.0)),
            None => Ok(b),
        },
        (EnvelopeSupport::Whole, EnvelopeTarget::General(_)) => {
            Err(Error::Unsupported("envelope of a general function over the whole space".into()))
        }
    }
}

/// Pasch-Hausdorff envelope (`beta = 1`).
pub fn pasch_hausdorff(
    g: EnvelopeTarget<'_>,
    theta: f64,
    support: EnvelopeSupport,
    xi: &[f64],
    x: &[f64],
) -> Result<f64> {
    epi_regularize(g, &EnvelopeConfig::new(1.0, theta, support)?, xi, x)
}

/// Moreau envelope (`beta = 2`).
pub fn moreau(g: EnvelopeTarget<'_>, theta: f64, support: EnvelopeSupport, xi: &[f64], x: &[f64]) -> Result<f64> {
    epi_regularize(g, &EnvelopeConfig::new(2.0, theta, support)?, xi, x)
}

/// `L = (3^(beta-1) / theta) max{(2 beta M_x theta)^((beta-1)/beta), 1}`, so that
/// `|g_nu(xi1, x) - g_nu(xi2, x)| <= L max{|xi1|, |xi2|, 1}^(beta-1) |xi1 - xi2|`.
pub fn lipschitz_certificate(beta: f64, theta: f64, m_x: f64) -> Result<f64> {
    if !(beta >= 1.0) || !(theta > 0.0) || !(m_x >= 0.0) {
        return Err(Error::InvalidInput(format!("need beta >= 1, theta > 0, M_x >= 0; got {beta}, {theta}, {m_x}")));
    }
    let growth = (2.0 * beta * m_x * theta).powf((beta - 1.0) / beta).max(1.0);
    Ok(3f64.powf(beta - 1.0) / theta * growth)
}

/// Named hand-designed approximating mappings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedEnvelope {
    /// `1/2 - 1_{[0, xi_1 + 1/nu] x [1, 2]}(xi, x)`.
    DiscreteI,
    /// `1/2 - 1_{(-inf, x + 1/nu]}(xi)`.
    DiscreteII,
}

impl NamedEnvelope {
    /// The components `G_nu` at index `nu`.
    pub fn components(&self, nu: u64) -> Vec<Component> {
        let slack = 1.0 / nu as f64;
        match self {
            NamedEnvelope::DiscreteI => vec![Component::indicator(
                0.5,
                ParamSet::gated(
                    ParamSet::interval(Affine::constant(0.0), Affine::constant(1.0 + slack)),
                    vec![1.0],
                    vec![2.0],
                ),
            )],
            NamedEnvelope::DiscreteII => vec![Component::indicator(
                0.5,
                ParamSet::interval(Affine::constant(f64::NEG_INFINITY), Affine::shift(slack)),
            )],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit_interval() -> ParamSet {
        ParamSet::interval(Affine::constant(0.0), Affine::constant(1.0))
    }

    #[test]
    fn indicator_closed_form() {
        let set = unit_interval();
        let cfg = EnvelopeConfig::new(1.0, 1.0, EnvelopeSupport::Whole).unwrap();
        let g = EnvelopeTarget::Indicator { b: 0.5, set: &set };
        assert_eq!(epi_regularize(g, &cfg, &[1.5], &[0.0]).unwrap(), 0.0);
        for theta in [0.01, 1.0, 50.0] {
            let cfg = EnvelopeConfig::new(1.0, theta, EnvelopeSupport::Whole).unwrap();
            assert_eq!(epi_regularize(g, &cfg, &[0.3], &[0.0]).unwrap(), -0.5);
        }
    }

    #[test]
    fn discrete_two_term_minimum() {
        let g = |z: &[f64], _x: &[f64]| z[0];
        let support = EnvelopeSupport::Atoms { atoms: vec![vec![0.0], vec![1.0]] };
        let v = pasch_hausdorff(EnvelopeTarget::General(&g), 0.5, support, &[1.0], &[0.0]).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn general_over_whole_space_is_rejected() {
        let g = |z: &[f64], _x: &[f64]| z[0];
        let r = moreau(EnvelopeTarget::General(&g), 1.0, EnvelopeSupport::Whole, &[0.0], &[0.0]);
        assert!(matches!(r, Err(Error::Unsupported(_))));
        assert!(EnvelopeConfig::new(0.5, 1.0, EnvelopeSupport::Whole).is_err());
        assert!(EnvelopeConfig::new(1.0, 0.0, EnvelopeSupport::Whole).is_err());
    }

    #[test]
    fn moreau_single_atom() {
        let g = |_z: &[f64], _x: &[f64]| 0.0;
        for t in [-2.0, 0.3, 1.7] {
            let support = EnvelopeSupport::Atoms { atoms: vec![vec![0.0]] };
            let v = moreau(EnvelopeTarget::General(&g), 0.8, support, &[t], &[0.0]).unwrap();
            assert!((v - t * t / 1.6).abs() < 1e-15);
        }
    }

    #[test]
    fn moreau_small_theta_recovers_g() {
        let atoms: Vec<Point> = (0..11).map(|k| vec![k as f64 / 10.0]).collect();
        let g = |z: &[f64], _x: &[f64]| (3.0 * z[0]).sin();
        for theta in [1e-3, 1e-5, 1e-7] {
            let support = EnvelopeSupport::Atoms { atoms: atoms.clone() };
            let worst = atoms
                .iter()
                .map(|a| {
                    (moreau(EnvelopeTarget::General(&g), theta, support.clone(), a, &[0.0]).unwrap() - g(a, &[0.0]))
                        .abs()
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-12);
        }
    }

    #[test]
    fn certificate_examples() {
        assert_eq!(lipschitz_certificate(1.0, 0.25, 3.0).unwrap(), 4.0);
        assert_eq!(lipschitz_certificate(2.0, 1.0, 1.0).unwrap(), 6.0);
        assert!(lipschitz_certificate(1.0, 1e300, 1.0).unwrap() < 1e-299);
        assert!(lipschitz_certificate(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn named_envelopes() {
        let c = NamedEnvelope::DiscreteI.components(4);
        assert_eq!(c[0].eval(&[1.25], &[1.5]), -0.5);
        assert_eq!(c[0].eval(&[1.3], &[1.5]), 0.5);
        assert_eq!(c[0].eval(&[1.0], &[0.5]), 0.5);
        let c = NamedEnvelope::DiscreteII.components(2);
        assert_eq!(c[0].eval(&[1.5], &[1.0]), -0.5);
        assert_eq!(c[0].eval(&[1.6], &[1.0]), 0.5);
    }

    proptest! {
        #[test]
        fn lipschitz_fixed_point(a in -3.0f64..3.0, xi in -3.0f64..3.0) {
            let atoms: Vec<Point> = (0..41).map(|k| vec![-2.0 + k as f64 / 10.0]).collect();
            let g = move |z: &[f64], _x: &[f64]| (z[0] - a).abs();
            let support = EnvelopeSupport::Atoms { atoms: atoms.clone() };
            for z in &atoms {
                let v = pasch_hausdorff(EnvelopeTarget::General(&g), 1.0, support.clone(), z, &[0.0]).unwrap();
                prop_assert!((v - g(z, &[0.0])).abs() < 1e-12);
            }
            let v = pasch_hausdorff(EnvelopeTarget::General(&g), 1.0, support, &[xi], &[0.0]).unwrap();
            prop_assert!(v >= 0.0);
        }

        #[test]
        fn monotone_in_theta(xi in -3.0f64..4.0, lo in -1.0f64..1.0, w in 0.0f64..2.0, t1 in 0.01f64..3.0, t2 in 0.01f64..3.0, beta in 1.0f64..3.0) {
            let set = ParamSet::interval(Affine::constant(lo), Affine::constant(lo + w));
            let g = EnvelopeTarget::Indicator { b: 0.4, set: &set };
            let (small, large) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let v_small = epi_regularize(g, &EnvelopeConfig::new(beta, small, EnvelopeSupport::Whole).unwrap(), &[xi], &[0.0]).unwrap();
            let v_large = epi_regularize(g, &EnvelopeConfig::new(beta, large, EnvelopeSupport::Whole).unwrap(), &[xi], &[0.0]).unwrap();
            prop_assert!(v_small >= v_large);
            prop_assert!(v_small <= g.eval(&[xi], &[0.0]));
        }
    }
}
