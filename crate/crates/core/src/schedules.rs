//! Parameter sequences `nu -> (lambda_nu, theta_nu, eps_nu)` driven by a measured
//! distance `d_nu`, and tail checks of their limit conditions.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Replacement for a zero distance so that power rules stay positive.
pub const DISTANCE_FLOOR: f64 = 1e-300;

/// Number of trailing values inspected by [`validate`].
pub const TAIL_LEN: usize = 10;

/// Minimum number of `nu` values accepted by [`validate`].
pub const MIN_HORIZON: usize = 20;

/// Default `eps0` in the bounded Lipschitz exponent `1/2 - eps0`.
pub const BL_EPS0: f64 = 0.1;

/// The convergence statement a schedule is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Proposition {
    Bl,
    Fm,
    Mi,
    Tv,
    Kl,
    Empirical,
    RateS1,
    RateS2,
}

impl Proposition {
    pub fn name(&self) -> &'static str {
        match self {
            Proposition::Bl => "bl",
            Proposition::Fm => "fm",
            Proposition::Mi => "mi",
            Proposition::Tv => "tv",
            Proposition::Kl => "kl",
            Proposition::Empirical => "empirical",
            Proposition::RateS1 => "rate-s1",
            Proposition::RateS2 => "rate-s2",
        }
    }

    /// Whether the schedule also needs an envelope parameter `theta`.
    pub fn uses_theta(&self) -> bool {
        matches!(self, Proposition::Bl | Proposition::Fm | Proposition::RateS2)
    }
}

/// One parameter rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Rule {
    /// `max(d_nu, floor)^exponent`.
    DistancePower {
        exponent: f64,
    },
    /// `(log(nu + 2) / nu)^exponent`.
    LogRatioPower {
        exponent: f64,
    },
    /// `nu^(-exponent)`.
    NuPower {
        exponent: f64,
    },
    Constant {
        value: f64,
    },
    /// The parameter is not used.
    Absent,
}

impl Rule {
    pub fn eval(&self, nu: u64, d: f64) -> Option<f64> {
        let n = nu as f64;
        match *self {
            Rule::DistancePower { exponent } => Some(d.max(DISTANCE_FLOOR).powf(exponent)),
            Rule::LogRatioPower { exponent } => Some(((n + 2.0).ln() / n).powf(exponent)),
            Rule::NuPower { exponent } => Some(n.powf(-exponent)),
            Rule::Constant { value } => Some(value),
            Rule::Absent => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedule {
    pub alpha: f64,
    pub proposition: Proposition,
    pub lambda: Rule,
    pub theta: Rule,
    pub epsilon: Rule,
}

/// Parameters at one index.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleValues {
    pub nu: u64,
    pub distance: f64,
    pub lambda: f64,
    pub theta: Option<f64>,
    pub epsilon: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidInput(format!("alpha must be >= 1, got {alpha}")));
    }
    Ok(())
}

impl Schedule {
    pub fn validate_rules(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if matches!(self.lambda, Rule::Absent) {
            return Err(Error::InvalidInput("lambda rule cannot be absent".into()));
        }
        if self.proposition.uses_theta() && matches!(self.theta, Rule::Absent) {
            return Err(Error::InvalidInput(format!("{} schedule needs a theta rule", self.proposition.name())));
        }
        for (name, rule) in [("lambda", self.lambda), ("theta", self.theta)] {
            if let Rule::Constant { value } = rule {
                if !(value > 0.0) {
                    return Err(Error::InvalidInput(format!("{name} constant must be positive, got {value}")));
                }
            }
        }
        if let Rule::Constant { value } = self.epsilon {
            if !(value >= 0.0) {
                return Err(Error::InvalidInput(format!("epsilon constant must be >= 0, got {value}")));
            }
        }
        Ok(())
    }

    /// Parameters at `nu` given the measured distance `d`.
    pub fn at(&self, nu: u64, d: f64) -> Result<ScheduleValues> {
        if nu == 0 {
            return Err(Error::InvalidInput("nu must be at least 1".into()));
        }
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::InvalidInput(format!("distance must be finite and >= 0, got {d}")));
        }
        let lambda = self.lambda.eval(nu, d).expect("lambda rule present");
        let theta = self.theta.eval(nu, d);
        let epsilon = self.epsilon.eval(nu, d).unwrap_or(0.0);
        Ok(ScheduleValues { nu, distance: d, lambda, theta, epsilon })
    }

    /// The proposition-specific quantity that must vanish (or diverge for the
    /// empirical schedule).
    pub fn ratio(&self, v: &ScheduleValues) -> f64 {
        let a = self.alpha;
        let d = v.distance.max(DISTANCE_FLOOR);
        match self.proposition {
            Proposition::Bl | Proposition::Fm | Proposition::RateS2 => {
                let theta = v.theta.unwrap_or(1.0);
                (d / theta).powf(a) / v.lambda
            }
            Proposition::Mi | Proposition::Tv | Proposition::Kl | Proposition::RateS1 => d.powf(a) / v.lambda,
            Proposition::Empirical => {
                let n = v.nu as f64;
                v.lambda.powf(2.0 / a) * n / (n + 2.0).ln().ln()
            }
        }
    }

    /// Whether [`Schedule::ratio`] must diverge rather than vanish.
    pub fn ratio_diverges(&self) -> bool {
        self.proposition == Proposition::Empirical
    }
}

fn make(alpha: f64, proposition: Proposition, lambda: Rule, theta: Rule, epsilon: Rule) -> Result<Schedule> {
    let s = Schedule { alpha, proposition, lambda, theta, epsilon };
    s.validate_rules()?;
    Ok(s)
}

/// `lambda = theta = d^(1/2 - eps0)` for the bounded Lipschitz metric.
pub fn schedule_bl(alpha: f64) -> Result<Schedule> {
    let e = 0.5 - BL_EPS0;
    make(alpha, Proposition::Bl, Rule::DistancePower { exponent: e }, Rule::DistancePower { exponent: e }, Rule::Absent)
}

/// The bounded Lipschitz rule applied to the Fortet-Mourier distance.
pub fn schedule_fm(alpha: f64) -> Result<Schedule> {
    Ok(Schedule { proposition: Proposition::Fm, ..schedule_bl(alpha)? })
}

/// `lambda = d^(alpha/2)` for the minimal information metric.
pub fn schedule_mi(alpha: f64) -> Result<Schedule> {
    make(alpha, Proposition::Mi, Rule::DistancePower { exponent: alpha / 2.0 }, Rule::Absent, Rule::Absent)
}

/// `lambda = d^(alpha^2/(alpha+1))`, `eps = d^(alpha/(alpha+1))` for the (S1) rate.
pub fn schedule_mi_rate(alpha: f64) -> Result<Schedule> {
    check_alpha(alpha)?;
    make(
        alpha,
        Proposition::RateS1,
        Rule::DistancePower { exponent: alpha * alpha / (alpha + 1.0) },
        Rule::Absent,
        Rule::DistancePower { exponent: alpha / (alpha + 1.0) },
    )
}

/// Same as [`schedule_mi_rate`].
pub fn schedule_rate_s1(alpha: f64) -> Result<Schedule> {
    schedule_mi_rate(alpha)
}

/// `lambda = d^(alpha^2/(2 alpha + 2))`, `theta = d^(1/2)`, `eps = d^(alpha/(2 alpha + 2))`
/// for the (S2) rate with the bounded Lipschitz distance.
pub fn schedule_rate_s2(alpha: f64) -> Result<Schedule> {
    check_alpha(alpha)?;
    make(
        alpha,
        Proposition::RateS2,
        Rule::DistancePower { exponent: alpha * alpha / (2.0 * alpha + 2.0) },
        Rule::DistancePower { exponent: 0.5 },
        Rule::DistancePower { exponent: alpha / (2.0 * alpha + 2.0) },
    )
}

/// `lambda = d^(alpha/2)` with `d` the total variation.
pub fn schedule_tv(alpha: f64) -> Result<Schedule> {
    Ok(Schedule { proposition: Proposition::Tv, ..schedule_mi(alpha)? })
}

/// `lambda = d^(alpha/2)` with `d` a divergence dominating total variation.
pub fn schedule_kl(alpha: f64) -> Result<Schedule> {
    Ok(Schedule { proposition: Proposition::Kl, ..schedule_mi(alpha)? })
}

/// `lambda = (log(nu + 2) / nu)^(alpha/2)` for empirical measures.
pub fn schedule_empirical(alpha: f64) -> Result<Schedule> {
    make(alpha, Proposition::Empirical, Rule::LogRatioPower { exponent: alpha / 2.0 }, Rule::Absent, Rule::Absent)
}

/// Default schedule for a proposition.
pub fn for_proposition(p: Proposition, alpha: f64) -> Result<Schedule> {
    match p {
        Proposition::Bl => schedule_bl(alpha),
        Proposition::Fm => schedule_fm(alpha),
        Proposition::Mi => schedule_mi(alpha),
        Proposition::Tv => schedule_tv(alpha),
        Proposition::Kl => schedule_kl(alpha),
        Proposition::Empirical => schedule_empirical(alpha),
        Proposition::RateS1 => schedule_rate_s1(alpha),
        Proposition::RateS2 => schedule_rate_s2(alpha),
    }
}

/// Verdict for one limit condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub condition: String,
    pub pass: bool,
    pub tail: Vec<f64>,
    pub first: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub proposition: Proposition,
    pub horizon: usize,
    /// Every distance was zero, so the conditions hold vacuously.
    pub exact: bool,
    pub verdicts: Vec<ConditionVerdict>,
    pub pass: bool,
}

/// Last [`TAIL_LEN`] values strictly decreasing and the last at most `first / 10`.
fn vanishes(condition: &str, values: &[f64]) -> ConditionVerdict {
    let tail = values[values.len() - TAIL_LEN..].to_vec();
    let first = values[0];
    let pass = tail.windows(2).all(|w| w[1] < w[0]) && *tail.last().expect("nonempty") <= first / 10.0;
    ConditionVerdict { condition: condition.to_string(), pass, tail, first }
}

/// Last [`TAIL_LEN`] values strictly increasing and the last above the first.
fn diverges(condition: &str, values: &[f64]) -> ConditionVerdict {
    let tail = values[values.len() - TAIL_LEN..].to_vec();
    let first = values[0];
    let pass = tail.windows(2).all(|w| w[1] > w[0]) && *tail.last().expect("nonempty") > first;
    ConditionVerdict { condition: condition.to_string(), pass, tail, first }
}

/// Tail checks of `lambda -> 0`, `theta -> 0` and the proposition's ratio condition.
pub fn validate(schedule: &Schedule, nus: &[u64], distances: &[f64]) -> Result<ValidationReport> {
    schedule.validate_rules()?;
    if nus.len() != distances.len() {
        return Err(Error::InvalidInput("need one distance per nu".into()));
    }
    if nus.len() < MIN_HORIZON {
        return Err(Error::InsufficientEvidence(format!(
            "horizon of {} values is below the minimum {MIN_HORIZON}",
            nus.len()
        )));
    }
    if nus.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("nu values must be strictly increasing".into()));
    }
    let values: Vec<ScheduleValues> =
        nus.iter().zip(distances).map(|(nu, d)| schedule.at(*nu, *d)).collect::<Result<_>>()?;
    let exact = schedule.proposition != Proposition::Empirical && distances.iter().all(|d| *d == 0.0);
    let mut verdicts = Vec::new();
    if exact {
        return Ok(ValidationReport {
            proposition: schedule.proposition,
            horizon: nus.len(),
            exact,
            verdicts,
            pass: true,
        });
    }
    let lambdas: Vec<f64> = values.iter().map(|v| v.lambda).collect();
    verdicts.push(vanishes("lambda -> 0", &lambdas));
    if schedule.proposition.uses_theta() {
        let thetas: Vec<f64> = values.iter().map(|v| v.theta.unwrap_or(f64::NAN)).collect();
        verdicts.push(vanishes("theta -> 0", &thetas));
    }
    let ratios: Vec<f64> = values.iter().map(|v| schedule.ratio(v)).collect();
    if schedule.ratio_diverges() {
        verdicts.push(diverges("lambda^(2/alpha) nu / log log nu -> inf", &ratios));
    } else {
        verdicts.push(vanishes("ratio -> 0", &ratios));
    }
    let pass = verdicts.iter().all(|v| v.pass);
    Ok(ValidationReport { proposition: schedule.proposition, horizon: nus.len(), exact, verdicts, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn harmonic(n: u64) -> (Vec<u64>, Vec<f64>) {
        let nus: Vec<u64> = (1..=n).collect();
        let d = nus.iter().map(|nu| 1.0 / *nu as f64).collect();
        (nus, d)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn bl_exponent() {
        let s = schedule_bl(1.0).unwrap();
        for nu in [1u64, 10, 1000] {
            let v = s.at(nu, 1.0 / nu as f64).unwrap();
            assert!(close(v.lambda, (nu as f64).powf(-0.4)));
            assert_eq!(v.theta, Some(v.lambda));
        }
    }

    #[test]
    fn bl_too_fast_fails() {
        let mut s = schedule_bl(1.0).unwrap();
        s.lambda = Rule::DistancePower { exponent: 2.0 };
        let (nus, d) = harmonic(100);
        let r = validate(&s, &nus, &d).unwrap();
        assert!(!r.pass);
        assert!(!r.verdicts.iter().find(|v| v.condition == "ratio -> 0").unwrap().pass);
    }

    #[test]
    fn zero_distance_uses_floor() {
        let s = schedule_bl(1.0).unwrap();
        let v = s.at(3, 0.0).unwrap();
        assert_eq!(v.lambda, DISTANCE_FLOOR.powf(0.4));
        let nus: Vec<u64> = (1..=30).collect();
        let r = validate(&s, &nus, &[0.0; 30]).unwrap();
        assert!(r.exact && r.pass);
    }

    #[test]
    fn rate_exponents() {
        let s = schedule_mi_rate(1.0).unwrap();
        let v = s.at(16, 1.0 / 16.0).unwrap();
        assert!(close(v.lambda, 0.25) && close(v.epsilon, 0.25));
        let s = schedule_mi_rate(2.0).unwrap();
        assert_eq!(s.lambda, Rule::DistancePower { exponent: 4.0 / 3.0 });
        assert_eq!(s.epsilon, Rule::DistancePower { exponent: 2.0 / 3.0 });
        let s = schedule_rate_s2(2.0).unwrap();
        assert_eq!(s.lambda, Rule::DistancePower { exponent: 4.0 / 6.0 });
        assert_eq!(s.theta, Rule::DistancePower { exponent: 0.5 });
        assert_eq!(s.epsilon, Rule::DistancePower { exponent: 2.0 / 6.0 });
    }

    #[test]
    fn empirical_values() {
        let s = schedule_empirical(2.0).unwrap();
        assert!(close(s.at(100, 0.0).unwrap().lambda, 102f64.ln() / 100.0));
        let s1 = schedule_empirical(1.0).unwrap();
        assert!(close(s1.at(7, 0.0).unwrap().lambda, (9f64.ln() / 7.0).sqrt()));
        let r: Vec<f64> = [10u64, 100, 10_000].iter().map(|nu| s.ratio(&s.at(*nu, 0.0).unwrap())).collect();
        assert!(r[0] < r[1] && r[1] < r[2]);
        for nu in [10u64, 100, 10_000] {
            let t = (nu as f64 + 2.0).ln();
            assert!(close(s.ratio(&s.at(nu, 0.0).unwrap()), t / t.ln()));
        }
    }

    #[test]
    fn validate_examples() {
        let (nus, d) = harmonic(100);
        assert!(validate(&schedule_mi(1.0).unwrap(), &nus, &d).unwrap().pass);
        let mut constant = schedule_mi(1.0).unwrap();
        constant.lambda = Rule::Constant { value: 0.5 };
        let r = validate(&constant, &nus, &d).unwrap();
        assert!(!r.verdicts[0].pass);
        let mut equal = schedule_mi(1.0).unwrap();
        equal.lambda = Rule::DistancePower { exponent: 1.0 };
        assert!(!validate(&equal, &nus, &d).unwrap().pass);
        assert!(matches!(validate(&equal, &nus[..19], &d[..19]), Err(Error::InsufficientEvidence(_))));
    }

    proptest! {
        #[test]
        fn schedules_pass_own_validation(alpha in 1.0f64..3.0, q_index in 0usize..3) {
            let q = [0.5, 1.0, 2.0][q_index];
            let nus: Vec<u64> = (1..=60).map(|k| 1u64 << k).collect();
            let d: Vec<f64> = nus.iter().map(|nu| (*nu as f64).powf(-q)).collect();
            for p in [Proposition::Bl, Proposition::Fm, Proposition::Mi, Proposition::Tv, Proposition::Kl,
                      Proposition::Empirical, Proposition::RateS1, Proposition::RateS2] {
                let s = for_proposition(p, alpha).unwrap();
                let r = validate(&s, &nus, &d).unwrap();
                prop_assert!(r.pass, "{:?} failed: {:?}", p, r.verdicts);
            }
        }

        #[test]
        fn rate_exponents_symbolic(alpha in 1.0f64..5.0) {
            let s1 = schedule_rate_s1(alpha).unwrap();
            prop_assert_eq!(s1.lambda, Rule::DistancePower { exponent: alpha * alpha / (alpha + 1.0) });
            prop_assert_eq!(s1.epsilon, Rule::DistancePower { exponent: alpha / (alpha + 1.0) });
            let s2 = schedule_rate_s2(alpha).unwrap();
            prop_assert_eq!(s2.lambda, Rule::DistancePower { exponent: alpha * alpha / (2.0 * alpha + 2.0) });
            prop_assert_eq!(s2.theta, Rule::DistancePower { exponent: 0.5 });
            prop_assert_eq!(s2.epsilon, Rule::DistancePower { exponent: alpha / (2.0 * alpha + 2.0) });
        }
    }
}
