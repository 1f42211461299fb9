//! Fixed-rank smooth PARAFAC completion.
//!
//! The model is `Z = sum_r g_r u_r^(1) ∘ .. ∘ u_r^(N)` with unit-norm factor
//! vectors. The objective is
//!
//! ```text
//! 1/2 ||(T - Z)_Ω||^2 + sum_r g_r^2/2 sum_n rho_n ||L_n u_r^(n)||_p^p
//! ```
//!
//! and it is minimised one component at a time (HALS): every factor vector of
//! component `r` takes a few projected (sub)gradient steps on the unit sphere,
//! then `g_r` is set in closed form. The solver keeps only the residual
//! `E = X - Z`, which is zero on the unobserved entries, so the completed
//! tensor `X` is never stored and `X_Ω = T_Ω` holds by construction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SpcError};
use crate::scalar::{dot, norm_sq, Scalar};
use crate::smoothness::{PenaltyKind, SmoothnessOperator};
use crate::tensor::{DenseTensor, Mask, Matrix, Region};

/// One rank-1 term `weight * v_1 ∘ .. ∘ v_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Component<T> {
    pub weight: T,
    pub vectors: Vec<Vec<T>>,
}

impl<T: Scalar> Component<T> {
    pub fn vector_refs(&self) -> Vec<&[T]> {
        self.vectors.iter().map(Vec::as_slice).collect()
    }
}

/// Weights and unit-norm factor vectors of a smooth PD model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel<T> {
    dims: Vec<usize>,
    components: Vec<Component<T>>,
}

/// Standard-normal draw normalised to unit length.
pub fn random_unit_vector<T: Scalar, R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<T> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| T::lit(x / norm)).collect();
        }
    }
}

impl<T: Scalar> FactorModel<T> {
    pub fn empty(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(SpcError::InvalidDims(dims.to_vec()));
        }
        Ok(Self {
            dims: dims.to_vec(),
            components: Vec::new(),
        })
    }

    pub fn from_components(dims: &[usize], components: Vec<Component<T>>) -> Result<Self> {
        let mut model = Self::empty(dims)?;
        for c in &components {
            if c.vectors.len() != dims.len() {
                return Err(SpcError::LengthMismatch {
                    expected: dims.len(),
                    found: c.vectors.len(),
                });
            }
            for (v, &d) in c.vectors.iter().zip(dims) {
                if v.len() != d {
                    return Err(SpcError::LengthMismatch {
                        expected: d,
                        found: v.len(),
                    });
                }
            }
        }
        model.components = components;
        Ok(model)
    }

    /// Appends a component with random unit factor vectors and zero weight.
    pub fn push_random<R: Rng + ?Sized>(&mut self, rng: &mut R) -> usize {
        let vectors = self
            .dims
            .iter()
            .map(|&d| random_unit_vector(d, rng))
            .collect();
        self.components.push(Component {
            weight: T::zero(),
            vectors,
        });
        self.components.len() - 1
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component<T>] {
        &self.components
    }

    pub fn component(&self, r: usize) -> &Component<T> {
        &self.components[r]
    }

    pub fn set_weight(&mut self, r: usize, weight: T) {
        self.components[r].weight = weight;
    }

    pub fn weights(&self) -> Vec<T> {
        self.components.iter().map(|c| c.weight).collect()
    }

    /// `U^(n)`: an `I_n x R` matrix whose columns are the mode-`n` vectors.
    pub fn factor_matrix(&self, mode: usize) -> Matrix<T> {
        Matrix::from_fn(self.dims[mode], self.rank(), |i, r| {
            self.components[r].vectors[mode][i]
        })
    }

    /// `sum_r g_r u_r^(1) ∘ .. ∘ u_r^(N)`.
    pub fn reconstruct(&self) -> DenseTensor<T> {
        let mut z = DenseTensor::zeros(&self.dims).expect("model dims are valid");
        for c in &self.components {
            z.rank1_accumulate(c.weight, &c.vector_refs())
                .expect("component vectors match model dims");
        }
        z
    }

    /// Smoothness term `sum_r g_r^2/2 sum_n rho_n ||L_n u_r^(n)||_p^p`.
    pub fn penalty(&self, smoothing: &Smoothing<T>) -> Result<T> {
        let half = T::lit(0.5);
        let mut total = T::zero();
        for c in &self.components {
            total += half * c.weight * c.weight * smoothing.weighted_penalty(&c.vector_refs())?;
        }
        Ok(total)
    }

    /// Largest `| ||u||_2 - 1 |` over every factor vector.
    pub fn max_unit_norm_deviation(&self) -> T {
        self.components
            .iter()
            .flat_map(|c| c.vectors.iter())
            .map(|v| (norm_sq(v).sqrt() - T::one()).abs())
            .fold(T::zero(), T::max)
    }
}

/// Penalty exponent, per-mode weights `rho_n`, and per-mode operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Smoothing<T> {
    pub kind: PenaltyKind,
    pub rho: Vec<T>,
    pub operators: Vec<SmoothnessOperator>,
}

impl<T: Scalar> Smoothing<T> {
    pub fn new(kind: PenaltyKind, rho: Vec<T>, operators: Vec<SmoothnessOperator>) -> Self {
        Self {
            kind,
            rho,
            operators,
        }
    }

    /// Chain operators on every mode of extent >= 2.
    pub fn chain(kind: PenaltyKind, rho: Vec<T>, dims: &[usize]) -> Self {
        let operators = dims
            .iter()
            .map(|&d| SmoothnessOperator::default_for(d))
            .collect();
        Self::new(kind, rho, operators)
    }

    /// No smoothing at all (`rho = 0` everywhere).
    pub fn none(kind: PenaltyKind, dims: &[usize]) -> Self {
        Self::chain(kind, vec![T::zero(); dims.len()], dims)
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.rho.len() != dims.len() {
            return Err(SpcError::InvalidParameter(format!(
                "rho has {} entries for a tensor of order {}",
                self.rho.len(),
                dims.len()
            )));
        }
        if self.operators.len() != dims.len() {
            return Err(SpcError::InvalidParameter(format!(
                "{} smoothness operators for a tensor of order {}",
                self.operators.len(),
                dims.len()
            )));
        }
        for (n, (&r, &d)) in self.rho.iter().zip(dims).enumerate() {
            if !(r >= T::zero()) || !r.is_finite() {
                return Err(SpcError::InvalidParameter(format!(
                    "rho[{n}] = {r} must be finite and nonnegative"
                )));
            }
            if self.operators[n].len() != d {
                return Err(SpcError::InvalidParameter(format!(
                    "operator for mode {n} acts on length {}, mode extent is {d}",
                    self.operators[n].len()
                )));
            }
        }
        Ok(())
    }

    /// `sum_n rho_n ||L_n v_n||_p^p`.
    pub fn weighted_penalty(&self, vectors: &[&[T]]) -> Result<T> {
        let mut s = T::zero();
        for ((&rho, op), v) in self.rho.iter().zip(&self.operators).zip(vectors) {
            if rho != T::zero() {
                s += rho * op.penalty(v, self.kind)?;
            }
        }
        Ok(s)
    }
}

/// Line-search and stopping policy for the sphere-constrained vector updates.
///
/// Each backtracking search starts at `initial_step / g^2`; the local
/// objective's quadratic term has curvature `g^2`, so this makes the first
/// trial step scale-free (it lands on the exact minimiser when `rho = 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy<T> {
    pub initial_step: T,
    pub shrink: T,
    pub max_backtracks: usize,
    pub max_iters: usize,
    pub tolerance: T,
}

impl<T: Scalar> Default for StepPolicy<T> {
    fn default() -> Self {
        Self {
            initial_step: T::one(),
            shrink: T::lit(0.5),
            max_backtracks: 30,
            max_iters: 50,
            tolerance: T::lit(1e-8),
        }
    }
}

impl<T: Scalar> StepPolicy<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.initial_step > T::zero()
            && self.shrink > T::zero()
            && self.shrink < T::one()
            && self.tolerance > T::zero()
            && self.max_iters > 0;
        if ok {
            Ok(())
        } else {
            Err(SpcError::InvalidParameter(format!("invalid step policy {self:?}")))
        }
    }
}

/// Configuration of the fixed-rank solver.
#[derive(Debug, Clone, PartialEq)]
pub struct FrSpcConfig<T> {
    pub rank: usize,
    pub smoothing: Smoothing<T>,
    pub step: StepPolicy<T>,
    /// Relative change of `||E||^2` between sweeps that ends the solve.
    pub sweep_tol: T,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl<T: Scalar> FrSpcConfig<T> {
    pub fn new(rank: usize, smoothing: Smoothing<T>) -> Self {
        Self {
            rank,
            smoothing,
            step: StepPolicy::default(),
            sweep_tol: T::lit(1e-6),
            max_sweeps: 500,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.rank == 0 {
            return Err(SpcError::InvalidParameter("rank must be at least 1".into()));
        }
        if !(self.sweep_tol > T::zero()) {
            return Err(SpcError::InvalidParameter("sweep_tol must be positive".into()));
        }
        self.step.validate()?;
        self.smoothing.validate(dims)
    }
}

/// Counters collected while sweeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    /// Vector updates skipped because the contraction `y` was exactly zero.
    pub zero_contractions: usize,
    /// Accepted sphere steps.
    pub sphere_steps: usize,
    /// Vector updates where no trial step decreased the local objective.
    pub stalled_line_searches: usize,
}

/// Coordinates of the observed entries, stored mode-major.
#[derive(Debug, Clone)]
struct ObservedSet {
    linear: Vec<usize>,
    coords: Vec<Vec<u32>>,
}

impl ObservedSet {
    fn new(mask: &Mask) -> Self {
        let dims = mask.dims();
        let mut linear = Vec::with_capacity(mask.observed_count());
        let mut coords = vec![Vec::with_capacity(linear.capacity()); dims.len()];
        let mut index = vec![0usize; dims.len()];
        for lin in 0..mask.len() {
            if mask.is_observed(lin) {
                linear.push(lin);
                for (c, &i) in coords.iter_mut().zip(&index) {
                    c.push(i as u32);
                }
            }
            for (i, &d) in index.iter_mut().zip(dims) {
                *i += 1;
                if *i < d {
                    break;
                }
                *i = 0;
            }
        }
        Self { linear, coords }
    }

    fn len(&self) -> usize {
        self.linear.len()
    }

    /// `prod_m v_m(i_m)` at observed entry `k`, skipping mode `skip`.
    #[inline]
    fn product<T: Scalar>(&self, k: usize, vectors: &[Vec<T>], skip: Option<usize>) -> T {
        let mut w = T::one();
        for (m, v) in vectors.iter().enumerate() {
            if Some(m) != skip {
                w *= v[self.coords[m][k] as usize];
            }
        }
        w
    }
}

/// Working state of the fixed-rank solver.
///
/// The residual `E` is zero off the observed set, so it is kept only on the
/// observed entries and every kernel of the component cycle runs over those.
#[derive(Debug, Clone)]
pub struct FrSpcState<T> {
    target: DenseTensor<T>,
    mask: Mask,
    model: FactorModel<T>,
    observed: ObservedSet,
    target_obs: Vec<T>,
    residual_obs: Vec<T>,
    stats: SweepStats,
}

impl<T: Scalar> FrSpcState<T> {
    /// Builds the state for `model`; the residual is `T - Z` on the observed
    /// entries and zero elsewhere.
    pub fn new(target: DenseTensor<T>, mask: Mask, model: FactorModel<T>) -> Result<Self> {
        target.require_same_dims(mask.dims())?;
        target.require_same_dims(model.dims())?;
        let observed = ObservedSet::new(&mask);
        let target_obs = observed.linear.iter().map(|&l| target.as_slice()[l]).collect();
        let mut state = Self {
            target,
            mask,
            model,
            observed,
            target_obs,
            residual_obs: Vec::new(),
            stats: SweepStats::default(),
        };
        state.resync_residual();
        Ok(state)
    }

    pub fn target(&self) -> &DenseTensor<T> {
        &self.target
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn model(&self) -> &FactorModel<T> {
        &self.model
    }

    /// The residual `E` as a dense tensor (zero on unobserved entries).
    pub fn residual(&self) -> DenseTensor<T> {
        let mut e = DenseTensor::zeros(self.target.dims()).expect("dims checked");
        let data = e.as_mut_slice();
        for (&l, &v) in self.observed.linear.iter().zip(&self.residual_obs) {
            data[l] = v;
        }
        e
    }

    pub fn stats(&self) -> SweepStats {
        self.stats
    }

    /// `||E||^2`, the squared fit error on the observed entries.
    pub fn residual_norm_sq(&self) -> T {
        norm_sq(&self.residual_obs)
    }

    /// The model reconstruction `Z`.
    pub fn reconstruction(&self) -> DenseTensor<T> {
        self.model.reconstruct()
    }

    /// The completed tensor: `T` on observed entries, `Z` elsewhere.
    pub fn completed(&self) -> DenseTensor<T> {
        let mut x = self.model.reconstruct();
        x.masked_overwrite(&self.target, &self.mask, Region::Observed)
            .expect("dims checked");
        x
    }

    /// Objective evaluated from scratch: half the squared observed-entry fit
    /// error plus the weighted smoothness term.
    pub fn objective(&self, smoothing: &Smoothing<T>) -> Result<T> {
        objective(&self.target, &self.mask, &self.model, smoothing)
    }

    /// Recomputes `E` from the model, discarding accumulated rounding.
    pub fn resync_residual(&mut self) {
        let obs = &self.observed;
        self.residual_obs = (0..obs.len())
            .map(|k| {
                let z = self
                    .model
                    .components
                    .iter()
                    .fold(T::zero(), |acc, c| acc + c.weight * obs.product(k, &c.vectors, None));
                self.target_obs[k] - z
            })
            .collect();
    }

    /// Appends a random component with the greedy weight `g = <E, w>` and
    /// removes its contribution from the residual. Returns the new weight.
    pub fn append_greedy_component<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<T> {
        let r = self.model.push_random(rng);
        let comp = &mut self.model.components[r];
        let obs = &self.observed;
        let w: Vec<T> = (0..obs.len())
            .map(|k| obs.product(k, &comp.vectors, None))
            .collect();
        let g = dot(&self.residual_obs, &w);
        comp.weight = g;
        for (e, wk) in self.residual_obs.iter_mut().zip(w) {
            *e -= g * wk;
        }
        Ok(g)
    }

    /// One pass over all components: for each `r`, form `Y_r = E + g_r w_r`,
    /// update every factor vector in mode order, update `g_r`, then set
    /// `E = Y_r - g_r w_r` on the observed entries.
    ///
    /// Off the observed set `Y_r` equals the old rank-1 term, so contractions
    /// of `Y_r` split into an observed-entry sum over `E` plus a closed-form
    /// rank-1 part.
    pub fn component_cycle(&mut self, smoothing: &Smoothing<T>, step: &StepPolicy<T>) -> Result<()> {
        let ndim = self.model.dims.len();
        let obs = &self.observed;
        for r in 0..self.model.rank() {
            let comp = &mut self.model.components[r];
            let old = comp.clone();
            for n in 0..ndim {
                let mut y = vec![T::zero(); self.model.dims[n]];
                for (k, &e) in self.residual_obs.iter().enumerate() {
                    y[obs.coords[n][k] as usize] += e * obs.product(k, &comp.vectors, Some(n));
                }
                let overlap = (0..ndim)
                    .filter(|&m| m != n)
                    .fold(old.weight, |acc, m| acc * dot(&old.vectors[m], &comp.vectors[m]));
                for (yi, &ui) in y.iter_mut().zip(&old.vectors[n]) {
                    *yi += overlap * ui;
                }
                if y.iter().all(|&v| v == T::zero()) {
                    self.stats.zero_contractions += 1;
                    continue;
                }
                let outcome = update_component_vector(
                    &comp.vectors[n],
                    &y,
                    comp.weight,
                    smoothing.rho[n],
                    &smoothing.operators[n],
                    smoothing.kind,
                    step,
                )?;
                self.stats.sphere_steps += outcome.steps;
                if outcome.stalled {
                    self.stats.stalled_line_searches += 1;
                }
                comp.vectors[n] = outcome.vector;
            }
            // <Y_r, w_new> and the residual refresh share the per-entry products.
            let new_w: Vec<T> = (0..obs.len())
                .map(|k| obs.product(k, &comp.vectors, None))
                .collect();
            let cross = (0..ndim).fold(old.weight, |acc, m| {
                acc * dot(&old.vectors[m], &comp.vectors[m])
            });
            let numerator = dot(&self.residual_obs, &new_w) + cross;
            let refs = comp.vector_refs();
            let g = numerator / (T::one() + smoothing.weighted_penalty(&refs)?);
            comp.weight = g;
            for (k, (e, wk)) in self.residual_obs.iter_mut().zip(new_w).enumerate() {
                *e += old.weight * obs.product(k, &old.vectors, None) - g * wk;
            }
        }
        Ok(())
    }
}

/// `1/2 ||(T - Z)_Ω||^2 + sum_r g_r^2/2 sum_n rho_n ||L_n u_r^(n)||_p^p`.
pub fn objective<T: Scalar>(
    target: &DenseTensor<T>,
    mask: &Mask,
    model: &FactorModel<T>,
    smoothing: &Smoothing<T>,
) -> Result<T> {
    let diff = target.sub(&model.reconstruct())?;
    let fit = diff.masked_norm_sq(mask, Region::Observed)?;
    Ok(T::lit(0.5) * fit + model.penalty(smoothing)?)
}

/// Local objective of one factor vector:
/// `g^2/2 rho ||L u||_p^p - g u^T y + g^2/2 u^T u`.
///
/// Meaningful on the unit sphere; the formula itself is evaluated for any `u`.
pub fn local_objective<T: Scalar>(
    u: &[T],
    y: &[T],
    g: T,
    rho: T,
    op: &SmoothnessOperator,
    kind: PenaltyKind,
) -> Result<T> {
    check_len(y.len(), u.len())?;
    let half_g2 = T::lit(0.5) * g * g;
    let pen = if rho == T::zero() {
        T::zero()
    } else {
        op.penalty(u, kind)?
    };
    Ok(half_g2 * rho * pen - g * dot(u, y) + half_g2 * norm_sq(u))
}

/// (Sub)gradient of [`local_objective`]:
/// `g^2/2 rho L^T SGN(L u) - g y + g^2 u` for TV and
/// `g^2 rho L^T L u - g y + g^2 u` for QV.
pub fn local_gradient<T: Scalar>(
    u: &[T],
    y: &[T],
    g: T,
    rho: T,
    op: &SmoothnessOperator,
    kind: PenaltyKind,
) -> Result<Vec<T>> {
    check_len(y.len(), u.len())?;
    let g2 = g * g;
    let mut grad: Vec<T> = u.iter().zip(y).map(|(&ui, &yi)| g2 * ui - g * yi).collect();
    if rho != T::zero() {
        let scale = T::lit(0.5) * g2 * rho;
        let sub = op.penalty_subgradient(u, kind)?;
        for (gi, si) in grad.iter_mut().zip(sub) {
            *gi += scale * si;
        }
    }
    Ok(grad)
}

fn check_len(found: usize, expected: usize) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(SpcError::LengthMismatch { expected, found })
    }
}

/// Normalised gradient step `(u - alpha v) / ||u - alpha v||`.
///
/// For unit `u` the denominator equals `sqrt(1 - 2 alpha u^T v + alpha^2 v^T v)`;
/// it is computed as the norm of the numerator, which avoids cancellation.
/// Fails with [`SpcError::StepTooLarge`] when the step lands on the origin.
pub fn sphere_update_step<T: Scalar>(u: &[T], v: &[T], alpha: T) -> Result<Vec<T>> {
    check_len(v.len(), u.len())?;
    let moved: Vec<T> = u.iter().zip(v).map(|(&ui, &vi)| ui - alpha * vi).collect();
    let norm = norm_sq(&moved).sqrt();
    if !(norm > T::epsilon()) || !norm.is_finite() {
        return Err(SpcError::StepTooLarge);
    }
    Ok(moved.into_iter().map(|x| x / norm).collect())
}

/// Result of a sphere-constrained vector update.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereOutcome<T> {
    pub vector: Vec<T>,
    /// Local objective at the input followed by each accepted iterate.
    pub objectives: Vec<T>,
    /// Number of accepted steps.
    pub steps: usize,
    /// True if the last line search found no non-increasing step.
    pub stalled: bool,
}

/// Minimises [`local_objective`] over the unit sphere by repeated
/// [`sphere_update_step`]s with backtracking. Every accepted step satisfies
/// `F(u_next) <= F(u)`; iteration stops when the relative decrease falls below
/// the policy tolerance, no step is accepted, or `max_iters` is reached.
pub fn update_component_vector<T: Scalar>(
    u: &[T],
    y: &[T],
    g: T,
    rho: T,
    op: &SmoothnessOperator,
    kind: PenaltyKind,
    step: &StepPolicy<T>,
) -> Result<SphereOutcome<T>> {
    let mut current = u.to_vec();
    let mut f = local_objective(&current, y, g, rho, op, kind)?;
    let mut outcome = SphereOutcome {
        vector: Vec::new(),
        objectives: vec![f],
        steps: 0,
        stalled: false,
    };
    let alpha0 = step.initial_step / (g * g);
    if g == T::zero() || !alpha0.is_finite() {
        outcome.vector = current;
        return Ok(outcome);
    }
    for _ in 0..step.max_iters {
        let v = local_gradient(&current, y, g, rho, op, kind)?;
        let mut alpha = alpha0;
        let mut accepted = None;
        for _ in 0..=step.max_backtracks {
            if let Ok(candidate) = sphere_update_step(&current, &v, alpha) {
                let fc = local_objective(&candidate, y, g, rho, op, kind)?;
                if fc <= f {
                    accepted = Some((candidate, fc));
                    break;
                }
            }
            alpha *= step.shrink;
        }
        let Some((candidate, fc)) = accepted else {
            outcome.stalled = true;
            break;
        };
        let decrease = f - fc;
        let scale = f.abs().max(T::min_positive_value());
        current = candidate;
        f = fc;
        outcome.steps += 1;
        outcome.objectives.push(f);
        if decrease <= step.tolerance * scale {
            break;
        }
    }
    outcome.vector = current;
    Ok(outcome)
}

/// Closed-form weight `<Y_r, w> / (1 + sum_n rho_n ||L_n u^(n)||_p^p)`.
pub fn update_weight<T: Scalar>(
    yr: &DenseTensor<T>,
    vectors: &[&[T]],
    smoothing: &Smoothing<T>,
) -> Result<T> {
    let num = yr.inner_with_rank1(vectors)?;
    let den = T::one() + smoothing.weighted_penalty(vectors)?;
    Ok(num / den)
}

/// One fixed-rank sweep over all components.
pub fn fr_spc_sweep<T: Scalar>(state: &mut FrSpcState<T>, config: &FrSpcConfig<T>) -> Result<()> {
    state.component_cycle(&config.smoothing, &config.step)
}

/// Per-sweep record of a fixed-rank solve.
#[derive(Debug, Clone, PartialEq)]
pub struct FrSpcTrace<T> {
    /// `||E||^2` after initialisation.
    pub initial_residual_sq: T,
    /// `||E||^2` after each sweep.
    pub residual_sq: Vec<T>,
    /// Whether the relative-change stopping rule fired before `max_sweeps`.
    pub converged: bool,
    pub stats: SweepStats,
}

/// Output of [`fr_spc_solve`].
#[derive(Debug, Clone)]
pub struct FrSpcSolution<T> {
    /// Completed tensor `X` (`T` on observed entries, `Z` elsewhere).
    pub completed: DenseTensor<T>,
    /// Model reconstruction `Z`.
    pub reconstruction: DenseTensor<T>,
    pub model: FactorModel<T>,
    pub trace: FrSpcTrace<T>,
}

pub(crate) fn validate_input<T: Scalar>(target: &DenseTensor<T>, mask: &Mask) -> Result<()> {
    target.require_same_dims(mask.dims())?;
    mask.require_observed()?;
    let observed_finite = target
        .as_slice()
        .iter()
        .enumerate()
        .all(|(i, x)| !mask.is_observed(i) || x.is_finite());
    if observed_finite {
        Ok(())
    } else {
        Err(SpcError::NonFinite("observed input entries".into()))
    }
}

/// Observed values with every unobserved entry set to zero.
pub(crate) fn observed_part<T: Scalar>(target: &DenseTensor<T>, mask: &Mask) -> DenseTensor<T> {
    let mut t = target.clone();
    t.masked_fill(T::zero(), mask, Region::Unobserved)
        .expect("dims checked");
    t
}

/// Fixed-rank completion. Components start as seeded random unit vectors
/// whose weights are fitted greedily one at a time to the running residual;
/// sweeps repeat until the relative change of `||E||^2` drops below
/// `sweep_tol` or `max_sweeps` is reached.
pub fn fr_spc_solve<T: Scalar>(
    target: &DenseTensor<T>,
    mask: &Mask,
    config: &FrSpcConfig<T>,
) -> Result<FrSpcSolution<T>> {
    validate_input(target, mask)?;
    config.validate(target.dims())?;
    let target = observed_part(target, mask);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let model = FactorModel::empty(target.dims())?;
    let mut state = FrSpcState::new(target, mask.clone(), model)?;
    for _ in 0..config.rank {
        state.append_greedy_component(&mut rng)?;
    }
    let initial = state.residual_norm_sq();
    let mut trace = FrSpcTrace {
        initial_residual_sq: initial,
        residual_sq: Vec::new(),
        converged: false,
        stats: SweepStats::default(),
    };
    let mut prev = initial;
    for _ in 0..config.max_sweeps {
        fr_spc_sweep(&mut state, config)?;
        let mu = state.residual_norm_sq();
        trace.residual_sq.push(mu);
        let change = (prev - mu).abs();
        if change <= config.sweep_tol * prev.max(T::min_positive_value()) || mu == T::zero() {
            trace.converged = true;
            break;
        }
        prev = mu;
    }
    trace.stats = state.stats();
    Ok(FrSpcSolution {
        completed: state.completed(),
        reconstruction: state.reconstruction(),
        model: state.model().clone(),
        trace,
    })
}
