//! Rank-increasing model selection around the fixed-rank solver.
//!
//! Starting from one component, every iteration runs a single component
//! cycle. When the squared fit error `mu` reaches the SDR-derived bound the
//! solve ends; when progress stalls relative to the remaining gap, a new
//! random component is appended with its least-squares weight.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SpcError};
use crate::fr_spc::{
    fr_spc_solve, observed_part, validate_input, FactorModel, FrSpcConfig, FrSpcState, Smoothing,
    StepPolicy, SweepStats,
};
use crate::scalar::Scalar;
use crate::tensor::{DenseTensor, Mask, Region};

/// Default rank cap.
pub const DEFAULT_MAX_RANK: usize = 3000;
/// Default iteration cap of [`spc_solve`].
pub const DEFAULT_MAX_ITERS: usize = 20_000;

/// How the stall ratio is compared with `nu`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SwitchComparison {
    /// `ratio < nu`.
    #[default]
    Strict,
    /// `ratio <= nu`.
    NonStrict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpcConfig<T> {
    pub smoothing: Smoothing<T>,
    pub step: StepPolicy<T>,
    /// Target signal-to-distortion ratio in dB.
    pub sdr_db: T,
    /// Switching threshold.
    pub nu: T,
    pub comparison: SwitchComparison,
    pub max_rank: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Sweep tolerance and cap for each fixed-rank run of [`spc_solve_simple`].
    pub simple_sweep_tol: T,
    pub simple_max_sweeps: usize,
}

impl<T: Scalar> SpcConfig<T> {
    pub fn new(smoothing: Smoothing<T>, sdr_db: T) -> Self {
        Self {
            smoothing,
            step: StepPolicy::default(),
            sdr_db,
            nu: T::lit(0.01),
            comparison: SwitchComparison::Strict,
            max_rank: DEFAULT_MAX_RANK,
            max_iters: DEFAULT_MAX_ITERS,
            seed: 0,
            simple_sweep_tol: T::lit(1e-6),
            simple_max_sweeps: 500,
        }
    }

    pub fn with_nu(mut self, nu: T) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if !self.sdr_db.is_finite() {
            return Err(SpcError::InvalidParameter("sdr_db must be finite".into()));
        }
        if !(self.nu > T::zero()) || !self.nu.is_finite() {
            return Err(SpcError::InvalidParameter("nu must be positive".into()));
        }
        if self.max_rank == 0 {
            return Err(SpcError::InvalidParameter("max_rank must be at least 1".into()));
        }
        self.step.validate()?;
        self.smoothing.validate(dims)
    }
}

/// Why the rank-increasing solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// `||Z_Ω - T_Ω||^2 <= eps`.
    FitReached,
    /// A switch was requested at the rank cap.
    MaxRank,
    /// The iteration cap was hit.
    MaxIters,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FitReached => "fit-reached",
            Self::MaxRank => "max-rank",
            Self::MaxIters => "max-iters",
        }
    }
}

/// One row of the SPC trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord<T> {
    pub iter: usize,
    /// `||E||^2` at the end of the iteration (after any component append).
    pub mu: T,
    pub rank: usize,
    pub switched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpcTrace<T> {
    /// Row 0 is the initial state; row `t` follows iteration `t`.
    pub records: Vec<IterationRecord<T>>,
    pub error_bound: T,
    pub final_rank: usize,
    pub termination: Termination,
    pub stats: SweepStats,
}

impl<T: Scalar> SpcTrace<T> {
    /// Number of component cycles run.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn mu(&self) -> Vec<T> {
        self.records.iter().map(|r| r.mu).collect()
    }
}

#[derive(Debug, Clone)]
pub struct SpcSolution<T> {
    pub completed: DenseTensor<T>,
    pub reconstruction: DenseTensor<T>,
    pub model: FactorModel<T>,
    pub trace: SpcTrace<T>,
}

/// `10^(-sdr/10) * ||T_Ω||^2`.
pub fn error_bound<T: Scalar>(sdr_db: T, target: &DenseTensor<T>, mask: &Mask) -> Result<T> {
    target.require_same_dims(mask.dims())?;
    mask.require_observed()?;
    let energy = target.masked_norm_sq(mask, Region::Observed)?;
    Ok(T::lit(10.0).powf(-sdr_db / T::lit(10.0)) * energy)
}

/// Stall test `|mu_t - mu_next| / |mu_next - eps|` against `nu`. Returns
/// false when `mu_next == eps`, which counts as reaching the fit.
pub fn switching_check<T: Scalar>(
    mu_t: T,
    mu_next: T,
    eps: T,
    nu: T,
    comparison: SwitchComparison,
) -> bool {
    let gap = (mu_next - eps).abs();
    if gap == T::zero() {
        return false;
    }
    let ratio = (mu_t - mu_next).abs() / gap;
    match comparison {
        SwitchComparison::Strict => ratio < nu,
        SwitchComparison::NonStrict => ratio <= nu,
    }
}

fn observed_mean<T: Scalar>(target: &DenseTensor<T>, mask: &Mask) -> T {
    let (sum, count) = target
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(i, _)| mask.is_observed(*i))
        .fold((T::zero(), 0usize), |(s, c), (_, &x)| (s + x, c + 1));
    sum / T::lit(count as f64)
}

/// Fresh `||Z_Ω - T_Ω||^2` for the state's current model.
fn fresh_fit<T: Scalar>(state: &FrSpcState<T>) -> Result<T> {
    state
        .target()
        .sub(&state.reconstruction())?
        .masked_norm_sq(state.mask(), Region::Observed)
}

/// Rank-increasing smooth PARAFAC completion.
pub fn spc_solve<T: Scalar>(
    target: &DenseTensor<T>,
    mask: &Mask,
    config: &SpcConfig<T>,
) -> Result<SpcSolution<T>> {
    validate_input(target, mask)?;
    config.validate(target.dims())?;
    let target = observed_part(target, mask);
    let eps = error_bound(config.sdr_db, &target, mask)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    // Unobserved entries start at the observed mean; the first weight is
    // fitted against that filled tensor.
    let mut filled = DenseTensor::filled(target.dims(), observed_mean(&target, mask))?;
    filled.masked_overwrite(&target, mask, Region::Observed)?;
    let mut model = FactorModel::empty(target.dims())?;
    let r = model.push_random(&mut rng);
    let g = filled.inner_with_rank1(&model.component(r).vector_refs())?;
    model.set_weight(r, g);
    let mut state = FrSpcState::new(target, mask.clone(), model)?;

    let mut records = vec![IterationRecord {
        iter: 0,
        mu: state.residual_norm_sq(),
        rank: 1,
        switched: false,
    }];
    let mut mu = records[0].mu;
    let mut t = 0;
    let termination = loop {
        if t >= config.max_iters {
            break Termination::MaxIters;
        }
        state.component_cycle(&config.smoothing, &config.step)?;
        t += 1;
        let mut mu_next = state.residual_norm_sq();
        let mut switched = false;
        let mut reason = None;
        if mu_next <= eps {
            let fresh = fresh_fit(&state)?;
            if fresh <= eps {
                reason = Some(Termination::FitReached);
            } else {
                state.resync_residual();
                mu_next = state.residual_norm_sq();
            }
        }
        if reason.is_none() && switching_check(mu, mu_next, eps, config.nu, config.comparison) {
            if state.model().rank() >= config.max_rank {
                reason = Some(Termination::MaxRank);
            } else {
                state.append_greedy_component(&mut rng)?;
                mu_next = state.residual_norm_sq();
                switched = true;
                if mu_next <= eps && fresh_fit(&state)? <= eps {
                    reason = Some(Termination::FitReached);
                }
            }
        }
        records.push(IterationRecord {
            iter: t,
            mu: mu_next,
            rank: state.model().rank(),
            switched,
        });
        mu = mu_next;
        if let Some(reason) = reason {
            break reason;
        }
    };

    let trace = SpcTrace {
        records,
        error_bound: eps,
        final_rank: state.model().rank(),
        termination,
        stats: state.stats(),
    };
    Ok(SpcSolution {
        completed: state.completed(),
        reconstruction: state.reconstruction(),
        model: state.model().clone(),
        trace,
    })
}

/// One fixed-rank attempt of [`spc_solve_simple`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankAttempt<T> {
    pub rank: usize,
    /// Final `||Z_Ω - T_Ω||^2`.
    pub fit: T,
    pub sweeps: usize,
}

#[derive(Debug, Clone)]
pub struct SimpleSolution<T> {
    pub completed: DenseTensor<T>,
    pub reconstruction: DenseTensor<T>,
    pub model: FactorModel<T>,
    pub attempts: Vec<RankAttempt<T>>,
    pub error_bound: T,
    pub termination: Termination,
}

/// Reference rank search: runs the fixed-rank solver from scratch for
/// `R = 1, 2, ..` until `||Z_Ω - T_Ω||^2 <= eps` or `max_rank` is exhausted.
pub fn spc_solve_simple<T: Scalar>(
    target: &DenseTensor<T>,
    mask: &Mask,
    config: &SpcConfig<T>,
) -> Result<SimpleSolution<T>> {
    validate_input(target, mask)?;
    config.validate(target.dims())?;
    let eps = error_bound(config.sdr_db, &observed_part(target, mask), mask)?;
    let mut attempts = Vec::new();
    let mut rank = 1;
    loop {
        let fr = FrSpcConfig {
            rank,
            smoothing: config.smoothing.clone(),
            step: config.step,
            sweep_tol: config.simple_sweep_tol,
            max_sweeps: config.simple_max_sweeps,
            seed: config.seed,
        };
        let sol = fr_spc_solve(target, mask, &fr)?;
        let fit = target
            .sub(&sol.reconstruction)?
            .masked_norm_sq(mask, Region::Observed)?;
        attempts.push(RankAttempt {
            rank,
            fit,
            sweeps: sol.trace.residual_sq.len(),
        });
        let termination = if fit <= eps {
            Some(Termination::FitReached)
        } else if rank >= config.max_rank {
            Some(Termination::MaxRank)
        } else {
            None
        };
        if let Some(termination) = termination {
            return Ok(SimpleSolution {
                completed: sol.completed,
                reconstruction: sol.reconstruction,
                model: sol.model,
                attempts,
                error_bound: eps,
                termination,
            });
        }
        rank += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothness::PenaltyKind;

    #[test]
    fn error_bound_formula() {
        let t = DenseTensor::from_vec(&[2], vec![1.0f64, 0.0]).unwrap();
        let m = Mask::all_observed(&[2]).unwrap();
        assert!((error_bound(30.0, &t, &m).unwrap() - 1e-3).abs() < 1e-15);
        assert_eq!(error_bound(0.0, &t, &m).unwrap(), 1.0);
        let t = DenseTensor::from_vec(&[2], vec![1.0f64, 3.0]).unwrap();
        assert!((error_bound(25.0, &t, &m).unwrap() - 0.0316228).abs() < 1e-7);
        assert!((error_bound(25.0, &t, &m).unwrap() - 10f64.powf(-1.5)).abs() < 1e-9);
        let empty = Mask::from_vec(&[2], vec![false, false]).unwrap();
        assert!(error_bound(25.0, &t, &empty).is_err());
    }

    #[test]
    fn switching_examples() {
        let s = SwitchComparison::Strict;
        assert!(!switching_check(1.0, 0.99, 0.5, 0.01, s));
        assert!(switching_check(1.0, 1.0, 0.5, 1e-9, s));
        assert!(switching_check(1.0, 0.999, 0.9, 0.0102, s));
        assert!(!switching_check(1.0, 0.5, 0.5, 0.01, s));
        // ratio exactly nu: only the non-strict comparison switches
        assert!(!switching_check(1.5, 1.0, 0.5, 1.0, s));
        assert!(switching_check(1.5, 1.0, 0.5, 1.0, SwitchComparison::NonStrict));
    }

    #[test]
    fn config_validation() {
        let sm = Smoothing::<f64>::none(PenaltyKind::Qv, &[3, 3]);
        let cfg = SpcConfig::new(sm.clone(), 25.0);
        assert!(cfg.validate(&[3, 3]).is_ok());
        assert!(cfg.clone().with_nu(0.0).validate(&[3, 3]).is_err());
        let mut bad = cfg.clone();
        bad.sdr_db = f64::INFINITY;
        assert!(bad.validate(&[3, 3]).is_err());
        bad = cfg;
        bad.max_rank = 0;
        assert!(bad.validate(&[3, 3]).is_err());
    }

    #[test]
    fn rejects_non_finite_observed_input() {
        let mut t = DenseTensor::<f64>::filled(&[2, 2], 1.0).unwrap();
        t.set(&[0, 1], f64::NAN);
        let m = Mask::all_observed(&[2, 2]).unwrap();
        let cfg = SpcConfig::new(Smoothing::none(PenaltyKind::Qv, &[2, 2]), 25.0);
        assert!(matches!(spc_solve(&t, &m, &cfg), Err(SpcError::NonFinite(_))));
    }
}
