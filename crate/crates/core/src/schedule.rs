//! Piecewise adversarial coefficient α_adv(t):
//!
//! ```text
//! 0              t ≤ k_begin·N
//! α·t            k_begin·N < t ≤ k_end·N
//! λ_final        t > k_end·N
//! ```
//!
//! The ramp is `α·t`, not `α·(t − k_begin·N)`, so the trajectory jumps at the
//! end of warm-up. [`validate_schedule`] reports that jump instead of hiding it.
//! Breakpoints are rationals so `t ≤ k·N` is decided in integer arithmetic.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};

/// A fraction `num/den` in the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::argument(alloc::format!("fraction {num}/{den} is not in (0, 1)")));
        }
        let g = gcd(num, den);
        Ok(Self { num: num / g, den: den / g })
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `t ≤ self·n`, exactly.
    fn at_or_before(&self, t: u64, n: u64) -> bool {
        (t as u128) * (self.den as u128) <= (self.num as u128) * (n as u128)
    }

    /// `⌊self·n⌋`.
    fn floor_of(&self, n: u64) -> u64 {
        ((self.num as u128 * n as u128) / self.den as u128) as u64
    }

    fn less_than(&self, other: &Fraction) -> bool {
        (self.num as u128) * (other.den as u128) < (other.num as u128) * (self.den as u128)
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Accepts `"a/b"` or a plain decimal such as `"0.75"` (read exactly as 75/100).
impl FromStr for Fraction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::argument(alloc::format!("cannot read {s:?} as a fraction"));
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse::<u64>().map_err(|_| bad())?;
            let d = d.trim().parse::<u64>().map_err(|_| bad())?;
            return Fraction::new(n, d);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.chars().all(|c| c.is_ascii_digit()) || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        if frac.len() > 18 {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int_part = if int.is_empty() { 0 } else { int.parse::<u64>().map_err(|_| bad())? };
        let frac_part = if frac.is_empty() { 0 } else { frac.parse::<u64>().map_err(|_| bad())? };
        let num = int_part.checked_mul(den).and_then(|v| v.checked_add(frac_part)).ok_or_else(bad)?;
        Fraction::new(num, den)
    }
}

/// Parameters of the piecewise adversarial coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdvSchedule {
    alpha: f64,
    k_begin: Fraction,
    k_end: Fraction,
    total_epochs: u64,
    lambda_final: f64,
}

impl AdvSchedule {
    /// Structural checks only; a plateau below the ramp end is legal and shows
    /// up as a warning from [`validate_schedule`].
    pub fn new(alpha: f64, k_begin: Fraction, k_end: Fraction, total_epochs: u64, lambda_final: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::argument(alloc::format!("alpha must be non-negative, got {alpha}")));
        }
        if !k_begin.less_than(&k_end) {
            return Err(Error::argument(alloc::format!("k_begin {k_begin} must be below k_end {k_end}")));
        }
        if total_epochs == 0 {
            return Err(Error::argument("total epochs must be positive"));
        }
        if !(lambda_final.is_finite() && lambda_final >= 0.0) {
            return Err(Error::argument(alloc::format!("lambda_final must be non-negative, got {lambda_final}")));
        }
        Ok(Self { alpha, k_begin, k_end, total_epochs, lambda_final })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_begin(&self) -> Fraction {
        self.k_begin
    }

    pub fn k_end(&self) -> Fraction {
        self.k_end
    }

    pub fn total_epochs(&self) -> u64 {
        self.total_epochs
    }

    pub fn lambda_final(&self) -> f64 {
        self.lambda_final
    }

    /// Same schedule over a different horizon.
    pub fn with_total_epochs(mut self, total_epochs: u64) -> Result<Self> {
        if total_epochs == 0 {
            return Err(Error::argument("total epochs must be positive"));
        }
        self.total_epochs = total_epochs;
        Ok(self)
    }

    /// First epoch of the ramp branch, `⌊k_begin·N⌋ + 1`.
    pub fn first_ramp_epoch(&self) -> u64 {
        self.k_begin.floor_of(self.total_epochs) + 1
    }

    /// Last epoch of the ramp branch, `⌊k_end·N⌋`.
    pub fn last_ramp_epoch(&self) -> u64 {
        self.k_end.floor_of(self.total_epochs)
    }
}

/// Evaluates the literal piecewise formula at epoch `t ∈ [0, N]`.
pub fn alpha_adv_at(schedule: &AdvSchedule, t: u64) -> Result<f64> {
    let n = schedule.total_epochs;
    if t > n {
        return Err(Error::argument(alloc::format!("epoch {t} outside [0, {n}]")));
    }
    Ok(if schedule.k_begin.at_or_before(t, n) {
        0.0
    } else if schedule.k_end.at_or_before(t, n) {
        schedule.alpha * t as f64
    } else {
        schedule.lambda_final
    })
}

/// Non-fatal findings about a schedule's shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleWarning {
    /// The plateau sits below the last ramp value, so α_adv decreases at `k_end·N`.
    PlateauDecrease { ramp_end: f64, plateau: f64 },
    /// The ramp starts at `α·t₀` rather than `α`, a discontinuity of `jump`.
    WarmupJump { epoch: u64, jump: f64 },
}

impl fmt::Display for ScheduleWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleWarning::PlateauDecrease { ramp_end, plateau } => write!(
                f,
                "adversarial coefficient drops from {ramp_end} to plateau {plateau} at the end of the ramp"
            ),
            ScheduleWarning::WarmupJump { epoch, jump } => {
                write!(f, "adversarial coefficient jumps from 0 to {jump} at epoch {epoch}")
            }
        }
    }
}

/// Reports monotonicity problems without touching the schedule.
///
/// A warm-up jump is reported when the first ramp value exceeds one ramp step
/// (α), i.e. whenever warm-up lasts at least one full epoch.
pub fn validate_schedule(schedule: &AdvSchedule) -> Vec<ScheduleWarning> {
    let mut warnings = Vec::new();
    let alpha = schedule.alpha;
    if alpha == 0.0 {
        return warnings;
    }
    let first = schedule.first_ramp_epoch();
    let last = schedule.last_ramp_epoch();
    if first <= last {
        let jump = alpha * first as f64;
        if jump > alpha {
            warnings.push(ScheduleWarning::WarmupJump { epoch: first, jump });
        }
    }
    let ramp_end = alpha * schedule.k_end.as_f64() * schedule.total_epochs as f64;
    // Relative slack so α·k_end·N rounding up by an ulp is not reported.
    if schedule.lambda_final < ramp_end * (1.0 - 1e-12) {
        warnings.push(ScheduleWarning::PlateauDecrease { ramp_end, plateau: schedule.lambda_final });
    }
    warnings
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frac(s: &str) -> Fraction {
        s.parse().unwrap()
    }

    fn sched(alpha: f64, kb: &str, ke: &str, n: u64, fin: f64) -> AdvSchedule {
        AdvSchedule::new(alpha, frac(kb), frac(ke), n, fin).unwrap()
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(frac("1/5"), Fraction::new(1, 5).unwrap());
        assert_eq!(frac("0.2"), Fraction::new(1, 5).unwrap());
        assert_eq!(frac("0.75"), Fraction::new(3, 4).unwrap());
        assert_eq!(frac(".5"), Fraction::new(1, 2).unwrap());
        assert!("1".parse::<Fraction>().is_err());
        assert!("0".parse::<Fraction>().is_err());
        assert!("3/2".parse::<Fraction>().is_err());
        assert!("a/b".parse::<Fraction>().is_err());
        assert!("-0.5".parse::<Fraction>().is_err());
    }

    #[test]
    fn evaluation_examples() {
        let s = sched(0.1, "1/5", "3/4", 200, 15.0);
        assert_eq!(alpha_adv_at(&s, 0).unwrap(), 0.0);
        assert!((alpha_adv_at(&s, 100).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(alpha_adv_at(&s, 180).unwrap(), 15.0);
        assert_eq!(alpha_adv_at(&s, 40).unwrap(), 0.0);
        assert!((alpha_adv_at(&s, 41).unwrap() - 4.1).abs() < 1e-12);
        assert!((alpha_adv_at(&s, 150).unwrap() - 15.0).abs() < 1e-12);
        assert_eq!(alpha_adv_at(&s, 151).unwrap(), 15.0);
        assert!(alpha_adv_at(&s, 201).is_err());
    }

    #[test]
    fn boundaries_are_exact_for_thirds() {
        // 1/3 · 150 = 50 exactly; floating point would blur this.
        let s = sched(0.1, "1/3", "2/3", 150, 10.0);
        assert_eq!(alpha_adv_at(&s, 50).unwrap(), 0.0);
        assert!(alpha_adv_at(&s, 51).unwrap() > 0.0);
        assert!((alpha_adv_at(&s, 100).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(alpha_adv_at(&s, 101).unwrap(), 10.0);
    }

    #[test]
    fn validation_examples() {
        let ok = sched(0.1, "0.2", "0.75", 200, 15.0);
        let w = validate_schedule(&ok);
        assert!(!w.iter().any(|w| matches!(w, ScheduleWarning::PlateauDecrease { .. })));
        assert!(w.iter().any(|w| matches!(w, ScheduleWarning::WarmupJump { epoch: 41, .. })));

        let dropping = sched(0.1, "0.2", "0.75", 200, 0.0);
        assert!(validate_schedule(&dropping)
            .iter()
            .any(|w| matches!(w, ScheduleWarning::PlateauDecrease { .. })));

        let flat = sched(0.0, "0.2", "0.75", 200, 0.0);
        assert!(validate_schedule(&flat).is_empty());
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(AdvSchedule::new(0.1, frac("3/4"), frac("1/5"), 10, 1.0).is_err());
        assert!(AdvSchedule::new(0.1, frac("1/5"), frac("1/5"), 10, 1.0).is_err());
        assert!(AdvSchedule::new(-0.1, frac("1/5"), frac("3/4"), 10, 1.0).is_err());
        assert!(AdvSchedule::new(0.1, frac("1/5"), frac("3/4"), 0, 1.0).is_err());
        assert!(AdvSchedule::new(0.1, frac("1/5"), frac("3/4"), 10, -1.0).is_err());
    }
}
