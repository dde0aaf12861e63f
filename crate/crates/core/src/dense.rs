//! Dense ground-truth computations for small state spaces: full generator
//! assembly, direct solves and matricization SVDs. Everything here is the
//! oracle the low-rank path is validated against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::san::{diagonal_magnitude, next_index, validate_model, SanModel};
use crate::tree::DimensionTree;

/// Default cap on the number of dense entries.
pub const DENSE_CAP: u128 = 1 << 20;

/// Singular values below this fraction of the largest one are reported
/// as exactly zero.
const SV_ZERO_REL: f64 = 1e-14;

/// Full d-dimensional array with a fixed flat layout: mode 1 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::DimMismatch("mode sizes must be positive".into()));
        }
        let len: usize = dims.iter().product();
        if len != data.len() {
            return Err(Error::DimMismatch(format!(
                "data length {} does not match product of dims {}",
                data.len(),
                len
            )));
        }
        Ok(DenseTensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let len = dims.iter().product();
        Self::new(dims, vec![0.0; len])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn d(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn linear_index(&self, x: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (&i, &n) in x.iter().zip(&self.dims) {
            idx += i * stride;
            stride *= n;
        }
        idx
    }

    pub fn get(&self, x: &[usize]) -> f64 {
        self.data[self.linear_index(x)]
    }

    pub fn set(&mut self, x: &[usize], v: f64) {
        let idx = self.linear_index(x);
        self.data[idx] = v;
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Flat vector view, mode 1 fastest.
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }

    pub fn from_vector(dims: Vec<usize>, v: &DVector<f64>) -> Result<Self> {
        Self::new(dims, v.as_slice().to_vec())
    }
}

fn check_cap(sizes: &[usize], cap: u128) -> Result<usize> {
    let states: u128 = sizes.iter().map(|&n| n as u128).product();
    if states > cap {
        return Err(Error::CapExceeded { states, cap });
    }
    Ok(states as usize)
}

fn require_valid(m: &SanModel) -> Result<()> {
    let violations = validate_model(m);
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidModel(violations.join("; ")))
    }
}

/// Assembles `Q(theta)` entry by entry: one off-diagonal rate per local
/// transition and diagonal entries as minus the off-diagonal column sums.
pub fn dense_generator(m: &SanModel, cap: u128) -> Result<DMatrix<f64>> {
    require_valid(m)?;
    let n = check_cap(&m.sizes, cap)?;
    let d = m.sizes.len();
    let mut strides = vec![1usize; d];
    for mu in 1..d {
        strides[mu] = strides[mu - 1] * m.sizes[mu - 1];
    }
    let mut q = DMatrix::zeros(n, n);
    let mut x = vec![0usize; d];
    loop {
        let col: usize = x.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
        for (nu, set) in m.transitions.iter().enumerate() {
            for t in set.iter().filter(|t| t.from == x[nu]) {
                let rate: f64 = t.factors.iter().zip(&x).map(|(f, &i)| f[i]).product();
                let row = col + (t.to - t.from) * strides[nu];
                q[(row, col)] += rate;
                q[(col, col)] -= rate;
            }
        }
        if !next_index(&mut x, &m.sizes) {
            break;
        }
    }
    Ok(q)
}

/// Direct solve of `(Id - Q(theta)) p = p_0` with a partial-pivoted LU.
pub fn dense_marginal(m: &SanModel, cap: u128) -> Result<DenseTensor> {
    require_valid(m)?;
    let n = check_cap(&m.sizes, cap)?;
    let q = dense_generator(m, cap)?;
    let a = DMatrix::identity(n, n) - q;
    let mut rhs = DVector::zeros(n);
    let x0_lin: usize = {
        let mut stride = 1;
        let mut idx = 0;
        for (&i, &nn) in m.x0.iter().zip(&m.sizes) {
            idx += i * stride;
            stride *= nn;
        }
        idx
    };
    rhs[x0_lin] = 1.0;
    let p = a.lu().solve(&rhs).ok_or(Error::SingularSystem)?;
    DenseTensor::from_vector(m.sizes.clone(), &p)
}

/// Unfolding of a tensor into a matrix: rows range over the modes in `t`
/// (ascending, smallest mode fastest), columns over the complement with
/// the same rule.
pub fn matricize(t: &DenseTensor, modes: &[usize]) -> Result<DMatrix<f64>> {
    let d = t.d();
    let mut in_t = vec![false; d];
    for &m in modes {
        if m >= d {
            return Err(Error::IndexOutOfRange {
                index: vec![m],
                dims: t.dims().to_vec(),
            });
        }
        in_t[m] = true;
    }
    if modes.is_empty() {
        return Err(Error::EmptyModeSet);
    }
    let rows: usize = (0..d).filter(|&m| in_t[m]).map(|m| t.dims()[m]).product();
    let cols: usize = (0..d).filter(|&m| !in_t[m]).map(|m| t.dims()[m]).product();
    let mut out = DMatrix::zeros(rows, cols);
    let mut x = vec![0usize; d];
    let mut lin = 0usize;
    loop {
        let mut r = 0;
        let mut rs = 1;
        let mut c = 0;
        let mut cs = 1;
        for mu in 0..d {
            if in_t[mu] {
                r += x[mu] * rs;
                rs *= t.dims()[mu];
            } else {
                c += x[mu] * cs;
                cs *= t.dims()[mu];
            }
        }
        out[(r, c)] = t.data()[lin];
        lin += 1;
        if !next_index(&mut x, t.dims()) {
            break;
        }
    }
    Ok(out)
}

/// Inverse of [`matricize`]: rebuilds the tensor from an unfolding.
pub fn from_matricization(mat: &DMatrix<f64>, dims: &[usize], modes: &[usize]) -> Result<DenseTensor> {
    let mut t = DenseTensor::zeros(dims.to_vec())?;
    let d = dims.len();
    let mut in_t = vec![false; d];
    for &m in modes {
        in_t[m] = true;
    }
    let mut x = vec![0usize; d];
    let mut lin = 0usize;
    let mut data = vec![0.0; t.data.len()];
    loop {
        let mut r = 0;
        let mut rs = 1;
        let mut c = 0;
        let mut cs = 1;
        for mu in 0..d {
            if in_t[mu] {
                r += x[mu] * rs;
                rs *= dims[mu];
            } else {
                c += x[mu] * cs;
                cs *= dims[mu];
            }
        }
        data[lin] = mat[(r, c)];
        lin += 1;
        if !next_index(&mut x, dims) {
            break;
        }
    }
    t.data = data;
    Ok(t)
}

/// Descending singular values with tiny trailing values clamped to zero.
pub fn singular_values(mat: &DMatrix<f64>) -> Vec<f64> {
    let svd = mat.clone().svd(false, false);
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    if let Some(&max) = sv.first() {
        for v in sv.iter_mut() {
            if *v < SV_ZERO_REL * max {
                *v = 0.0;
            }
        }
    }
    sv
}

/// Singular values of the matricization at every non-root vertex of the
/// tree, indexed by vertex id (`None` at the root).
pub fn tree_singular_values(
    t: &DenseTensor,
    tree: &DimensionTree,
) -> Result<Vec<Option<Vec<f64>>>> {
    if tree.d() != t.d() {
        return Err(Error::TreeMismatch(format!(
            "tree has {} leaves, tensor has {} modes",
            tree.d(),
            t.d()
        )));
    }
    let mut out = vec![None; tree.len()];
    for (id, slot) in out.iter_mut().enumerate() {
        if id == tree.root() {
            continue;
        }
        let mat = matricize(t, &tree.node(id).modes)?;
        *slot = Some(singular_values(&mat));
    }
    Ok(out)
}

/// Real eigenvalues of `Q - Id`; the generator is similar to a triangular
/// matrix, so imaginary parts are numerical noise.
pub fn dense_eigenvalues_q_minus_id(m: &SanModel, cap: u128) -> Result<Vec<f64>> {
    let n = check_cap(&m.sizes, cap)?;
    let q = dense_generator(m, cap)?;
    let a = q - DMatrix::identity(n, n);
    let eig = a.complex_eigenvalues();
    Ok(eig.iter().map(|z| z.re).collect())
}

/// Max diagonal magnitude of the generator, enumerated state by state.
pub fn max_diagonal_magnitude(m: &SanModel, cap: u128) -> Result<f64> {
    require_valid(m)?;
    check_cap(&m.sizes, cap)?;
    let mut x = vec![0usize; m.sizes.len()];
    let mut max = 0.0f64;
    loop {
        max = max.max(diagonal_magnitude(m, &x));
        if !next_index(&mut x, &m.sizes) {
            break;
        }
    }
    Ok(max)
}
