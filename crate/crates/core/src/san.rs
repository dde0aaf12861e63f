//! Stochastic Automata Network models with separable transition rates,
//! their CP-format generators, diagonal bounds and the Mutual Hazard
//! Network special case.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::cp::{CpOperator, CpTensor};
use crate::error::{Error, Result};

/// A single local transition `(from, to)` of one automaton together with
/// its separable rate factors.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    /// `factors[mu][s]` multiplies the rate when automaton `mu` is in
    /// state `s`. The entry `factors[nu][from]` of the owning automaton
    /// `nu` is the baseline rate.
    pub factors: Vec<Vec<f64>>,
}

/// SAN model with only local transitions; the generator `Q(theta)` is
/// implicit in the per-transition factor vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SanModel {
    pub sizes: Vec<usize>,
    /// `transitions[nu]` is the transition set of automaton `nu`.
    pub transitions: Vec<Vec<Transition>>,
    /// Initial state; the initial distribution is the unit vector at `x0`.
    pub x0: Vec<usize>,
}

/// Mutual Hazard Network parameters: `theta[(nu, mu)]` is the
/// multiplicative effect of event `mu` on event `nu`; the diagonal holds
/// the baseline rates.
#[derive(Debug, Clone, PartialEq)]
pub struct MhnParams {
    pub theta: DMatrix<f64>,
}

impl MhnParams {
    pub fn new(theta: DMatrix<f64>) -> Result<Self> {
        if theta.nrows() == 0 || theta.nrows() != theta.ncols() {
            return Err(Error::InvalidParams(format!(
                "theta must be square and non-empty, got {}x{}",
                theta.nrows(),
                theta.ncols()
            )));
        }
        if theta.iter().any(|&v| !v.is_finite() || v <= 0.0) {
            return Err(Error::InvalidParams(
                "all theta entries must be positive and finite".into(),
            ));
        }
        Ok(MhnParams { theta })
    }

    pub fn d(&self) -> usize {
        self.theta.nrows()
    }

    /// Parse `d` rows of `d` comma-separated positive reals.
    pub fn from_csv<R: Read>(mut reader: R) -> Result<Self> {
        let mut text = String::new();
        reader
            .read_to_string(&mut text)
            .map_err(|e| Error::InvalidParams(format!("read error: {e}")))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::InvalidParams(format!("bad number: {e}")))?);
        }
        let d = rows.len();
        if d == 0 || rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidParams(
                "expected d rows of d comma-separated values".into(),
            ));
        }
        let theta = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
        MhnParams::new(theta)
    }
}

/// Reports every violated model invariant; an empty list means the model
/// is valid.
pub fn validate_model(m: &SanModel) -> Vec<String> {
    let mut violations = Vec::new();
    let d = m.sizes.len();
    if d == 0 {
        violations.push("model has no automata".to_string());
        return violations;
    }
    if m.sizes.contains(&0) {
        violations.push("every automaton needs at least one state".to_string());
    }
    if m.transitions.len() != d {
        violations.push(format!(
            "transition sets for {} automata, expected {}",
            m.transitions.len(),
            d
        ));
        return violations;
    }
    if m.x0.len() != d {
        violations.push(format!("x0 has length {}, expected {}", m.x0.len(), d));
    } else {
        for (mu, (&i, &n)) in m.x0.iter().zip(&m.sizes).enumerate() {
            if i >= n {
                violations.push(format!("x0[{mu}] = {i} out of range for size {n}"));
            }
        }
    }
    for (nu, set) in m.transitions.iter().enumerate() {
        for t in set {
            if t.from >= t.to {
                violations.push(format!(
                    "automaton {nu}: transition ({}, {}) violates the state ordering (need from < to)",
                    t.from, t.to
                ));
            }
            if t.to >= m.sizes[nu] {
                violations.push(format!(
                    "automaton {nu}: transition target {} out of range for size {}",
                    t.to, m.sizes[nu]
                ));
            }
            if t.factors.len() != d {
                violations.push(format!(
                    "automaton {nu}: transition ({}, {}) has {} factor vectors, expected {}",
                    t.from,
                    t.to,
                    t.factors.len(),
                    d
                ));
                continue;
            }
            for (mu, f) in t.factors.iter().enumerate() {
                if f.len() != m.sizes[mu] {
                    violations.push(format!(
                        "automaton {nu}: factor vector for mode {mu} has length {}, expected {}",
                        f.len(),
                        m.sizes[mu]
                    ));
                }
                if f.iter().any(|&v| v < 0.0 || !v.is_finite()) {
                    violations.push(format!(
                        "automaton {nu}: transition ({}, {}) has a negative or non-finite factor for mode {mu}",
                        t.from, t.to
                    ));
                }
            }
        }
    }
    violations
}

fn require_valid(m: &SanModel) -> Result<()> {
    let violations = validate_model(m);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(violations.join("; ")))
    }
}

/// Binary-automaton SAN for the given Mutual Hazard Network parameters.
/// Every automaton has states `{0, 1}` and the single transition `(0, 1)`;
/// `x0` defaults to the all-zeros genotype.
pub fn from_mhn(p: &MhnParams, x0: Option<Vec<usize>>) -> Result<SanModel> {
    let d = p.d();
    let x0 = x0.unwrap_or_else(|| vec![0; d]);
    if x0.len() != d || x0.iter().any(|&i| i > 1) {
        return Err(Error::InvalidParams("x0 must be a binary vector of length d".into()));
    }
    let transitions = (0..d)
        .map(|nu| {
            let factors = (0..d)
                .map(|mu| {
                    if mu == nu {
                        // baseline rate sits at the `from` state; state 1
                        // cannot fire this transition again.
                        vec![p.theta[(nu, nu)], 1.0]
                    } else {
                        vec![1.0, p.theta[(nu, mu)]]
                    }
                })
                .collect();
            vec![Transition {
                from: 0,
                to: 1,
                factors,
            }]
        })
        .collect();
    Ok(SanModel {
        sizes: vec![2; d],
        transitions,
        x0,
    })
}

/// CP operator with one Kronecker-product term per transition: diagonal
/// factor matrices away from the owning automaton and the shifted
/// transition core (with its column-sum compensation) at the owning mode.
pub fn build_cp_generator(m: &SanModel) -> Result<CpOperator> {
    require_valid(m)?;
    let d = m.sizes.len();
    let mut terms = Vec::new();
    for (nu, set) in m.transitions.iter().enumerate() {
        for t in set {
            let term = (0..d)
                .map(|mu| {
                    let n = m.sizes[mu];
                    if mu == nu {
                        let baseline = t.factors[nu][t.from];
                        let mut core = DMatrix::zeros(n, n);
                        core[(t.to, t.from)] = baseline;
                        core[(t.from, t.from)] = -baseline;
                        core
                    } else {
                        DMatrix::from_diagonal(&DVector::from_iterator(
                            n,
                            t.factors[mu].iter().copied(),
                        ))
                    }
                })
                .collect();
            terms.push(term);
        }
    }
    if terms.is_empty() {
        return Err(Error::InvalidModel("model has no transitions".into()));
    }
    CpOperator::new(m.sizes.clone(), terms)
}

/// Rank-1 identity operator over the model's state space.
pub fn build_identity(m: &SanModel) -> Result<CpOperator> {
    require_valid(m)?;
    CpOperator::identity(&m.sizes)
}

/// Initial distribution: unit vector at `x0`.
pub fn build_initial(m: &SanModel) -> Result<CpTensor> {
    require_valid(m)?;
    CpTensor::unit(&m.sizes, &m.x0)
}

/// Tensor of all ones used for the sum-to-one constraint.
pub fn build_ones(m: &SanModel) -> Result<CpTensor> {
    require_valid(m)?;
    CpTensor::ones(&m.sizes)
}

/// Inexpensive bound on the diagonal magnitudes of `Q(theta)` evaluated
/// from per-mode factor maxima.
pub fn gamma_bound(m: &SanModel) -> Result<f64> {
    require_valid(m)?;
    let mut gamma = 0.0;
    for (nu, set) in m.transitions.iter().enumerate() {
        let mut worst_state = 0.0f64;
        for i in 0..m.sizes[nu] {
            let total: f64 = set
                .iter()
                .filter(|t| t.from == i)
                .map(|t| {
                    t.factors
                        .iter()
                        .map(|f| f.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                        .product::<f64>()
                })
                .sum();
            worst_state = worst_state.max(total);
        }
        gamma += worst_state;
    }
    Ok(gamma)
}

/// Reduced bound for Mutual Hazard Networks:
/// `gamma = sum_nu prod_mu max(1, theta[nu, mu])`.
pub fn mhn_gamma(p: &MhnParams) -> f64 {
    let d = p.d();
    (0..d)
        .map(|nu| (0..d).map(|mu| p.theta[(nu, mu)].max(1.0)).product::<f64>())
        .sum()
}

/// Exact diagonal magnitude `|Q[x, x]|` of a single state.
pub fn diagonal_magnitude(m: &SanModel, x: &[usize]) -> f64 {
    m.transitions
        .iter()
        .enumerate()
        .map(|(nu, set)| {
            set.iter()
                .filter(|t| t.from == x[nu])
                .map(|t| t.factors.iter().zip(x).map(|(f, &i)| f[i]).product::<f64>())
                .sum::<f64>()
        })
        .sum()
}

/// Multiset `{-1 - |Q[x, x]|}` over all states, which equals the spectrum
/// of `Q(theta) - Id` by triangularity.
pub fn diagonal_spectrum(m: &SanModel, cap: u128) -> Result<Vec<f64>> {
    require_valid(m)?;
    let states: u128 = m.sizes.iter().map(|&n| n as u128).product();
    if states > cap {
        return Err(Error::CapExceeded { states, cap });
    }
    let mut out = Vec::with_capacity(states as usize);
    let mut x = vec![0usize; m.sizes.len()];
    loop {
        out.push(-1.0 - diagonal_magnitude(m, &x));
        if !next_index(&mut x, &m.sizes) {
            break;
        }
    }
    Ok(out)
}

/// Advances a multi-index with mode 1 fastest; returns false after the
/// last index.
pub(crate) fn next_index(x: &mut [usize], dims: &[usize]) -> bool {
    for (i, &n) in x.iter_mut().zip(dims) {
        *i += 1;
        if *i < n {
            return true;
        }
        *i = 0;
    }
    false
}

// --- model files ------------------------------------------------------

/// On-disk model description; see the README for the schema.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelFile {
    Mhn {
        d: usize,
        theta: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x0: Option<Vec<usize>>,
    },
    San {
        sizes: Vec<usize>,
        /// `transitions[nu]` lists `[from, to]` pairs.
        transitions: Vec<Vec<[usize; 2]>>,
        /// `theta[nu][t][mu][s]` is the factor of transition `t` of
        /// automaton `nu` for state `s` of automaton `mu`.
        theta: Vec<Vec<Vec<Vec<f64>>>>,
        x0: Vec<usize>,
    },
}

impl ModelFile {
    pub fn into_model(self) -> Result<SanModel> {
        match self {
            ModelFile::Mhn { d, theta, x0 } => {
                if theta.len() != d || theta.iter().any(|r| r.len() != d) {
                    return Err(Error::InvalidParams(format!("theta must be {d}x{d}")));
                }
                let mat = DMatrix::from_fn(d, d, |i, j| theta[i][j]);
                from_mhn(&MhnParams::new(mat)?, x0)
            }
            ModelFile::San {
                sizes,
                transitions,
                theta,
                x0,
            } => {
                if transitions.len() != sizes.len() || theta.len() != sizes.len() {
                    return Err(Error::InvalidModel(
                        "transitions and theta must list one entry per automaton".into(),
                    ));
                }
                let sets = transitions
                    .iter()
                    .zip(&theta)
                    .map(|(pairs, factors)| {
                        if pairs.len() != factors.len() {
                            return Err(Error::InvalidModel(
                                "theta must provide factors per transition".into(),
                            ));
                        }
                        Ok(pairs
                            .iter()
                            .zip(factors)
                            .map(|(&[from, to], f)| Transition {
                                from,
                                to,
                                factors: f.clone(),
                            })
                            .collect())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let model = SanModel {
                    sizes,
                    transitions: sets,
                    x0,
                };
                require_valid(&model)?;
                Ok(model)
            }
        }
    }
}

/// Loads a model from JSON text.
pub fn model_from_json(text: &str) -> Result<SanModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidModel(format!("bad JSON: {e}")))?;
    file.into_model()
}
