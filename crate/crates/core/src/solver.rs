//! Normalized low-rank fixed-point iteration for the time-marginal
//! distribution.
//!
//! The marginal `p` of the chain state observed at a unit-rate
//! exponential time solves `(Id - Q) p = p0`. With a shift `gamma` no
//! smaller than every diagonal magnitude of the generator `Q`, the
//! matrix `P = Id + Q / gamma` preserves both nonnegativity and column
//! sums, and the solution expands into the geometric series
//! `p = 1/(1+gamma) * sum_m (gamma/(1+gamma))^m P^m p0`.
//!
//! The iteration accumulates the partial sums in hierarchical low-rank
//! format, truncating after every step and rescaling so that the power
//! term keeps total mass 1 and the `k`-th partial sum keeps total mass
//! `c_k = sum_{m<=k} (gamma/(1+gamma))^m`. The returned estimate is the
//! partial sum divided by its mass, hence itself a probability
//! distribution.

use crate::cp::CpOperator;
use crate::dense::max_diagonal_magnitude;
use crate::error::{Error, Result};
use crate::ht::{apply_cp_operator, HtTensor};
use crate::san::{build_cp_generator, build_initial, build_ones, gamma_bound, SanModel};
use crate::tree::DimensionTree;

/// State count up to which a user-supplied shift is validated against
/// the exact diagonal of the generator.
const GAMMA_CHECK_CAP: u128 = 4096;

/// Solver parameters.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Uniformization shift; `None` selects the separable-rate bound.
    pub gamma: Option<f64>,
    /// Stopping tolerance on the relative residual.
    pub tol: f64,
    /// Relative truncation tolerance applied after every step.
    pub eps_rel: f64,
    /// Maximum number of iterations before giving up.
    pub max_iter: usize,
    /// Optional hard cap on every rank component.
    pub rank_cap: Option<usize>,
    /// Evaluate the residual every this many iterations.
    pub check_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gamma: None,
            tol: 1e-4,
            eps_rel: 1e-8,
            max_iter: 10_000,
            rank_cap: None,
            check_every: 1,
        }
    }
}

/// Snapshot passed to the per-iteration observer.
pub struct IterationState<'a> {
    /// Number of completed update steps.
    pub iteration: usize,
    /// Partial sum `p^(k)`, rescaled to mass `c_k`.
    pub iterate: &'a HtTensor,
    /// Power term `P^k p0`, rescaled to mass 1.
    pub power_term: &'a HtTensor,
    /// Mass `c_k` of the partial sum.
    pub mass: f64,
    /// Relative residual of `iterate / mass`, when evaluated this step.
    pub residual: Option<f64>,
}

/// Outcome summary of a solver run.
#[derive(Debug, Clone)]
pub struct SolverReport {
    /// Number of update steps performed.
    pub iterations: usize,
    /// Whether the residual dropped below the tolerance.
    pub converged: bool,
    /// Shift actually used.
    pub gamma: f64,
    /// Contraction factor `gamma / (1 + gamma)` of the underlying series.
    pub rate: f64,
    /// `(iteration, relative residual)` at every evaluation.
    pub residual_history: Vec<(usize, f64)>,
    /// `(largest rank component, effective rank)` after every iteration.
    pub rank_history: Vec<(usize, usize)>,
}

impl SolverReport {
    /// Final recorded relative residual.
    pub fn final_residual(&self) -> Option<f64> {
        self.residual_history.last().map(|&(_, r)| r)
    }
}

/// Relative residual `||q - Q q - p0|| / ||p0||` of a candidate solution.
pub fn relative_residual(gen: &CpOperator, p0: &HtTensor, q: &HtTensor) -> Result<f64> {
    let qq = apply_cp_operator(gen, q)?;
    let r = q.add(&qq.scale(-1.0))?.add(&p0.scale(-1.0))?;
    Ok(r.norm() / p0.norm())
}

/// A priori error bound `constant * (gamma / (1 + gamma))^k` on the
/// distance between the `k`-th normalized iterate and the marginal.
pub fn convergence_bound(constant: f64, gamma: f64, k: usize) -> f64 {
    constant * (gamma / (1.0 + gamma)).powi(k as i32)
}

/// Runs the iteration and returns the normalized marginal estimate with
/// a run report. A run that exhausts `max_iter` is returned with
/// `converged = false` rather than as an error.
pub fn low_rank_uniformization(
    m: &SanModel,
    tree: &DimensionTree,
    cfg: &SolverConfig,
) -> Result<(HtTensor, SolverReport)> {
    low_rank_uniformization_observed(m, tree, cfg, |_| {})
}

/// Same as [`low_rank_uniformization`] with a per-iteration observer.
pub fn low_rank_uniformization_observed(
    m: &SanModel,
    tree: &DimensionTree,
    cfg: &SolverConfig,
    mut observe: impl FnMut(&IterationState<'_>),
) -> Result<(HtTensor, SolverReport)> {
    if cfg.tol <= 0.0 || !cfg.tol.is_finite() {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    if cfg.eps_rel < 0.0 || !cfg.eps_rel.is_finite() {
        return Err(Error::InvalidConfig(
            "truncation tolerance must be nonnegative".into(),
        ));
    }
    if cfg.check_every == 0 {
        return Err(Error::InvalidConfig(
            "residual check interval must be positive".into(),
        ));
    }
    let gamma = resolve_gamma(m, cfg)?;
    let rate = gamma / (1.0 + gamma);

    let gen = build_cp_generator(m)?;
    // P = Id + Q / gamma
    let propagator = CpOperator::identity(&m.sizes)?.add(&gen.scale(1.0 / gamma))?;
    let p0 = HtTensor::from_cp(&build_initial(m)?, tree)?;
    let ones = HtTensor::from_cp(&build_ones(m)?, tree)?;

    let mut power = p0.clone();
    let mut iterate = p0.clone();
    let mut weight = 1.0;
    let mut mass = 1.0;

    let mut report = SolverReport {
        iterations: 0,
        converged: false,
        gamma,
        rate,
        residual_history: Vec::new(),
        rank_history: Vec::new(),
    };

    for k in 0..=cfg.max_iter {
        let residual = if k % cfg.check_every == 0 || k == cfg.max_iter {
            let res = relative_residual(&gen, &p0, &iterate.scale(1.0 / mass))?;
            report.residual_history.push((k, res));
            Some(res)
        } else {
            None
        };
        observe(&IterationState {
            iteration: k,
            iterate: &iterate,
            power_term: &power,
            mass,
            residual,
        });
        if let Some(res) = residual {
            if res <= cfg.tol {
                report.converged = true;
                break;
            }
        }
        if k == cfg.max_iter {
            break;
        }

        // advance the power term and renormalize its mass to 1
        power = apply_cp_operator(&propagator, &power)?.truncate(cfg.eps_rel, cfg.rank_cap);
        let pm = ones.inner(&power)?;
        if pm.abs() < f64::MIN_POSITIVE || !pm.is_finite() {
            return Err(Error::SingularSystem);
        }
        power = power.scale(1.0 / pm);

        // accumulate into the partial sum and renormalize its mass to c_k
        weight *= rate;
        mass += weight;
        iterate = iterate
            .add(&power.scale(weight))?
            .truncate(cfg.eps_rel, cfg.rank_cap);
        let im = ones.inner(&iterate)?;
        if im.abs() < f64::MIN_POSITIVE || !im.is_finite() {
            return Err(Error::SingularSystem);
        }
        iterate = iterate.scale(mass / im);

        report.iterations = k + 1;
        report
            .rank_history
            .push((iterate.max_rank(), iterate.effective_rank()));
    }

    Ok((iterate.scale(1.0 / mass), report))
}

fn resolve_gamma(m: &SanModel, cfg: &SolverConfig) -> Result<f64> {
    match cfg.gamma {
        None => gamma_bound(m),
        Some(g) => {
            if !g.is_finite() || g <= 0.0 {
                return Err(Error::InvalidConfig(
                    "shift must be positive and finite".into(),
                ));
            }
            let states: u128 = m.sizes.iter().map(|&n| n as u128).product();
            if states <= GAMMA_CHECK_CAP {
                let required = max_diagonal_magnitude(m, GAMMA_CHECK_CAP)?;
                if g < required {
                    return Err(Error::InvalidGamma { gamma: g, required });
                }
            }
            Ok(g)
        }
    }
}
