use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Neighborhood radius for the composed-smoothness bound on the Stiefel
/// manifold; theorem step sizes must not exceed it.
pub const STIEFEL_RADIUS: f64 = 0.2;

/// Step-size rule `t -> alpha_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant {
        alpha: f64,
    },
    /// `alpha0 * factor^floor(t / period)`.
    PeriodicDecay {
        alpha0: f64,
        factor: f64,
        period: usize,
    },
    /// Constant step `sqrt(2Δ / (T L N²))` for a horizon of `T` steps.
    TheoremDeterministic {
        delta: f64,
        lipschitz: f64,
        norm_equiv: f64,
        horizon: usize,
        alpha: f64,
    },
    /// Constant step `sqrt(2Δ / (L N² T (8√T − 7)))` with momentum
    /// `β = 1 − T^{-1/2}`.
    TheoremStochastic {
        delta: f64,
        lipschitz: f64,
        norm_equiv: f64,
        horizon: usize,
        alpha: f64,
        beta: f64,
    },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        config(format!("{name} must be positive and finite, got {v}"))
    }
}

impl StepSchedule {
    pub fn constant(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self::Constant { alpha })
    }

    pub fn periodic_decay(alpha0: f64, factor: f64, period: usize) -> Result<Self> {
        positive("alpha0", alpha0)?;
        positive("decay factor", factor)?;
        if period == 0 {
            return config("decay period must be >= 1");
        }
        Ok(Self::PeriodicDecay {
            alpha0,
            factor,
            period,
        })
    }

    /// Requires `T >= 2Δ / (r² L N²)` so the step stays within `r`.
    pub fn theorem_deterministic(delta: f64, lipschitz: f64, norm_equiv: f64, horizon: usize) -> Result<Self> {
        positive("delta", delta)?;
        positive("L", lipschitz)?;
        positive("N", norm_equiv)?;
        let r = STIEFEL_RADIUS;
        let t_min = 2.0 * delta / (r * r * lipschitz * norm_equiv * norm_equiv);
        if horizon == 0 || (horizon as f64) < t_min {
            return config(format!(
                "deterministic schedule needs T >= 2Δ/(r²LN²) = {t_min:.6}, got T = {horizon}"
            ));
        }
        let alpha = (2.0 * delta / (horizon as f64 * lipschitz * norm_equiv * norm_equiv)).sqrt();
        Ok(Self::TheoremDeterministic {
            delta,
            lipschitz,
            norm_equiv,
            horizon,
            alpha,
        })
    }

    /// Requires `T >= max(4, (Δ / (2 L N² r²))^{2/3})`.
    pub fn theorem_stochastic(delta: f64, lipschitz: f64, norm_equiv: f64, horizon: usize) -> Result<Self> {
        positive("delta", delta)?;
        positive("L", lipschitz)?;
        positive("N", norm_equiv)?;
        let r = STIEFEL_RADIUS;
        let t_min = (delta / (2.0 * lipschitz * norm_equiv * norm_equiv * r * r))
            .powf(2.0 / 3.0)
            .max(4.0);
        if (horizon as f64) < t_min {
            return config(format!(
                "stochastic schedule needs T >= max(4, (Δ/(2LN²r²))^(2/3)) = {t_min:.6}, got T = {horizon}"
            ));
        }
        let t = horizon as f64;
        let alpha = (2.0 * delta / (lipschitz * norm_equiv * norm_equiv * t * (8.0 * t.sqrt() - 7.0))).sqrt();
        Ok(Self::TheoremStochastic {
            delta,
            lipschitz,
            norm_equiv,
            horizon,
            alpha,
            beta: 1.0 - 1.0 / t.sqrt(),
        })
    }

    pub fn alpha(&self, t: usize) -> f64 {
        match *self {
            Self::Constant { alpha } => alpha,
            Self::PeriodicDecay {
                alpha0,
                factor,
                period,
            } => alpha0 * factor.powi((t / period) as i32),
            Self::TheoremDeterministic { alpha, .. } | Self::TheoremStochastic { alpha, .. } => alpha,
        }
    }

    /// Momentum prescribed by the schedule, if any.
    pub fn beta(&self) -> Option<f64> {
        match *self {
            Self::TheoremStochastic { beta, .. } => Some(beta),
            _ => None,
        }
    }

    /// Largest step the schedule ever produces.
    pub fn max_alpha(&self) -> f64 {
        match *self {
            Self::PeriodicDecay { factor, .. } if factor > 1.0 => f64::INFINITY,
            _ => self.alpha(0),
        }
    }

    /// Fails unless every step lies in `(0, cap]`.
    pub fn check_cap(&self, cap: f64) -> Result<()> {
        let max = self.max_alpha();
        if max > cap {
            return config(format!("step size {max} exceeds the cap r = {cap}"));
        }
        Ok(())
    }

    /// Parses `constant:<a>` or `decay:<a0>,<factor>,<period>`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse schedule `{s}`"));
        let (kind, args) = s.trim().split_once(':').ok_or_else(bad)?;
        let nums: Vec<&str> = args.split(',').map(str::trim).collect();
        match kind.trim() {
            "constant" if nums.len() == 1 => Self::constant(nums[0].parse().map_err(|_| bad())?),
            "decay" if nums.len() == 3 => Self::periodic_decay(
                nums[0].parse().map_err(|_| bad())?,
                nums[1].parse().map_err(|_| bad())?,
                nums[2].parse().map_err(|_| bad())?,
            ),
            _ => Err(bad()),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            Self::Constant { alpha } => format!("constant:{alpha}"),
            Self::PeriodicDecay {
                alpha0,
                factor,
                period,
            } => format!("decay:{alpha0},{factor},{period}"),
            Self::TheoremDeterministic { alpha, .. } => format!("theorem-deterministic:{alpha:.6e}"),
            Self::TheoremStochastic { alpha, beta, .. } => {
                format!("theorem-stochastic:{alpha:.6e},beta={beta:.6}")
            }
        }
    }
}
