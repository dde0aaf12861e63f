//! CP (CANDECOMP/PARAFAC) tensors and operators: sums of Kronecker
//! products of per-mode vectors and matrices.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Sum of `r` outer products of per-mode vectors; `r = 0` is the zero tensor.
#[derive(Debug, Clone)]
pub struct CpTensor {
    dims: Vec<usize>,
    /// `terms[nu][mu]` is the mode-`mu` core of term `nu`, length `dims[mu]`.
    terms: Vec<Vec<DVector<f64>>>,
}

impl CpTensor {
    pub fn new(dims: Vec<usize>, terms: Vec<Vec<DVector<f64>>>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::DimMismatch("mode sizes must be positive".into()));
        }
        for term in &terms {
            if term.len() != dims.len() {
                return Err(Error::DimMismatch(format!(
                    "term has {} cores, expected {}",
                    term.len(),
                    dims.len()
                )));
            }
            for (mu, core) in term.iter().enumerate() {
                if core.len() != dims[mu] {
                    return Err(Error::DimMismatch(format!(
                        "core length {} does not match mode size {}",
                        core.len(),
                        dims[mu]
                    )));
                }
            }
        }
        Ok(CpTensor { dims, terms })
    }

    /// Rank-1 product of the given per-mode vectors.
    pub fn rank_one(cores: Vec<DVector<f64>>) -> Result<Self> {
        let dims = cores.iter().map(|c| c.len()).collect();
        Self::new(dims, vec![cores])
    }

    /// Zero tensor of the given dims (rank 0).
    pub fn zero(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims, Vec::new())
    }

    /// Canonical unit vector at the multi-index `x`.
    pub fn unit(dims: &[usize], x: &[usize]) -> Result<Self> {
        if x.len() != dims.len() || x.iter().zip(dims).any(|(&i, &n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: x.to_vec(),
                dims: dims.to_vec(),
            });
        }
        let cores = dims
            .iter()
            .zip(x)
            .map(|(&n, &i)| {
                let mut v = DVector::zeros(n);
                v[i] = 1.0;
                v
            })
            .collect();
        Self::rank_one(cores)
    }

    /// Tensor of all ones.
    pub fn ones(dims: &[usize]) -> Result<Self> {
        let cores = dims.iter().map(|&n| DVector::from_element(n, 1.0)).collect();
        Self::rank_one(cores)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Vec<DVector<f64>>] {
        &self.terms
    }

    /// Entry at a multi-index, summed over terms.
    pub fn entry(&self, x: &[usize]) -> Result<f64> {
        if x.len() != self.dims.len() || x.iter().zip(&self.dims).any(|(&i, &n)| i >= n) {
            return Err(Error::IndexOutOfRange {
                index: x.to_vec(),
                dims: self.dims.clone(),
            });
        }
        Ok(self
            .terms
            .iter()
            .map(|term| term.iter().zip(x).map(|(core, &i)| core[i]).product::<f64>())
            .sum())
    }
}

/// Sum of Kronecker products of small square matrices, one per mode.
#[derive(Debug, Clone)]
pub struct CpOperator {
    dims: Vec<usize>,
    /// `terms[nu][mu]` is an `n_mu x n_mu` matrix.
    terms: Vec<Vec<DMatrix<f64>>>,
}

impl CpOperator {
    pub fn new(dims: Vec<usize>, terms: Vec<Vec<DMatrix<f64>>>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::DimMismatch("mode sizes must be positive".into()));
        }
        if terms.is_empty() {
            return Err(Error::DimMismatch("operator needs at least one term".into()));
        }
        for term in &terms {
            if term.len() != dims.len() {
                return Err(Error::DimMismatch(format!(
                    "term has {} factors, expected {}",
                    term.len(),
                    dims.len()
                )));
            }
            for (mu, m) in term.iter().enumerate() {
                if m.nrows() != dims[mu] || m.ncols() != dims[mu] {
                    return Err(Error::DimMismatch(format!(
                        "factor is {}x{}, expected {0}x{0} with n = {}",
                        m.nrows(),
                        m.ncols(),
                        dims[mu]
                    )));
                }
            }
        }
        Ok(CpOperator { dims, terms })
    }

    /// Identity operator (one term of per-mode identities).
    pub fn identity(dims: &[usize]) -> Result<Self> {
        let term = dims.iter().map(|&n| DMatrix::identity(n, n)).collect();
        Self::new(dims.to_vec(), vec![term])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Vec<DMatrix<f64>>] {
        &self.terms
    }

    /// `self + other` by concatenating terms.
    pub fn add(&self, other: &CpOperator) -> Result<CpOperator> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch("operator dims differ".into()));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        CpOperator::new(self.dims.clone(), terms)
    }

    /// Multiply every term by the scalar `c` (applied to the first factor).
    pub fn scale(&self, c: f64) -> CpOperator {
        let terms = self
            .terms
            .iter()
            .map(|term| {
                let mut term = term.clone();
                term[0] *= c;
                term
            })
            .collect();
        CpOperator {
            dims: self.dims.clone(),
            terms,
        }
    }

    /// Full matrix over the product state space, mode 1 fastest in both
    /// row and column index. For small dims only.
    pub fn to_dense_matrix(&self, cap: u128) -> Result<DMatrix<f64>> {
        let states: u128 = self.dims.iter().map(|&n| n as u128).product();
        if states > cap {
            return Err(Error::CapExceeded { states, cap });
        }
        let n = states as usize;
        let mut out = DMatrix::zeros(n, n);
        for term in &self.terms {
            // kron with mode-1 fastest: fold from the last mode down.
            let mut acc = DMatrix::identity(1, 1);
            for m in term.iter().rev() {
                acc = acc.kronecker(m);
            }
            out += acc;
        }
        Ok(out)
    }
}
