//! Chart-based tensor calculus over jets.
//!
//! Tensors carry an [`IndexRange`] so the same routines serve the spatial
//! range (`n` indices, chart coordinates `x^1..x^n`) and the space-time range
//! (`n + 1` indices, slot 0 = time). Index slot `a` of a space-time tensor
//! differentiates along jet variable `a`; spatial slot `i` differentiates
//! along jet variable `i + 1`.
//!
//! Contractions are always up-against-down. Lowered-index shorthand is never
//! used: whenever a formula "contracts two lower indices", the caller raises
//! one of them explicitly.

use nalgebra::DMatrix;

use crate::error::{LabError, Result};
use crate::jets::Jet;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Up,
    Down,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexRange {
    /// Indices `0..n` address `x^1..x^n`.
    Spatial(usize),
    /// Indices `0..=n`; index 0 is time.
    Spacetime(usize),
}

impl IndexRange {
    pub fn len(&self) -> usize {
        match *self {
            IndexRange::Spatial(n) => n,
            IndexRange::Spacetime(n) => n + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spatial dimension `n`.
    pub fn dim(&self) -> usize {
        match *self {
            IndexRange::Spatial(n) | IndexRange::Spacetime(n) => n,
        }
    }

    /// Jet variable differentiated by index `idx`.
    pub fn var(&self, idx: usize) -> usize {
        match self {
            IndexRange::Spatial(_) => idx + 1,
            IndexRange::Spacetime(_) => idx,
        }
    }
}

/// Dense tensor with components of type `T` (jets or reals).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    range: IndexRange,
    variance: Vec<Variance>,
    data: Vec<T>,
}

fn flat(len: usize, idx: &[usize]) -> usize {
    idx.iter().fold(0, |acc, &i| {
        debug_assert!(i < len, "index {i} out of range {len}");
        acc * len + i
    })
}

/// Iterates over all multi-indices of a given rank over `0..len`.
pub fn index_tuples(len: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = len.pow(rank as u32);
    (0..total).map(move |mut k| {
        let mut idx = vec![0; rank];
        for slot in (0..rank).rev() {
            idx[slot] = k % len;
            k /= len;
        }
        idx
    })
}

impl<T> Tensor<T> {
    pub fn from_fn(
        range: IndexRange,
        variance: Vec<Variance>,
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Self {
        let data = index_tuples(range.len(), variance.len())
            .map(|idx| f(&idx))
            .collect();
        Tensor {
            range,
            variance,
            data,
        }
    }

    pub fn try_from_fn(
        range: IndexRange,
        variance: Vec<Variance>,
        mut f: impl FnMut(&[usize]) -> Result<T>,
    ) -> Result<Self> {
        let data = index_tuples(range.len(), variance.len())
            .map(|idx| f(&idx))
            .collect::<Result<Vec<T>>>()?;
        Ok(Tensor {
            range,
            variance,
            data,
        })
    }

    pub fn range(&self) -> IndexRange {
        self.range
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        debug_assert_eq!(idx.len(), self.rank());
        &self.data[flat(self.range.len(), idx)]
    }

    pub fn set(&mut self, idx: &[usize], value: T) {
        let pos = flat(self.range.len(), idx);
        self.data[pos] = value;
    }

    pub fn components(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            range: self.range,
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn iter_indexed(&self) -> impl Iterator<Item = (Vec<usize>, &T)> {
        index_tuples(self.range.len(), self.rank()).zip(self.data.iter())
    }
}

impl Tensor<Jet> {
    /// Component values at the base point.
    pub fn values(&self) -> Tensor<f64> {
        self.map(Jet::value)
    }

    /// Smallest truncation order over the components.
    pub fn order(&self) -> usize {
        self.data.iter().map(Jet::order).min().unwrap_or(usize::MAX)
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest componentwise difference.
    pub fn max_diff(&self, other: &Tensor<f64>) -> f64 {
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Rank-2 tensor as a matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.rank(), 2);
        let len = self.range.len();
        DMatrix::from_fn(len, len, |i, j| *self.get(&[i, j]))
    }
}

/// Connection coefficients, stored as `Γ^k_{ij}` at index `(k, i, j)`.
#[derive(Debug, Clone)]
pub struct Connection {
    pub coeffs: Tensor<Jet>,
}

impl Connection {
    pub fn new(coeffs: Tensor<Jet>) -> Result<Self> {
        if coeffs.rank() != 3 {
            return Err(LabError::Shape("connection must have rank 3".into()));
        }
        Ok(Connection { coeffs })
    }

    pub fn range(&self) -> IndexRange {
        self.coeffs.range()
    }

    /// `Γ^k_{ij}`.
    pub fn get(&self, k: usize, i: usize, j: usize) -> &Jet {
        self.coeffs.get(&[k, i, j])
    }

    /// Largest `|Γ^k_{ij} - Γ^k_{ji}|` at the base point.
    pub fn torsion(&self) -> f64 {
        let len = self.range().len();
        let mut worst: f64 = 0.0;
        for k in 0..len {
            for i in 0..len {
                for j in 0..len {
                    worst =
                        worst.max((self.get(k, i, j).value() - self.get(k, j, i).value()).abs());
                }
            }
        }
        worst
    }
}

/// Inverse of a symmetric jet matrix by Gauss–Jordan elimination with
/// pivoting on constant terms.
pub fn invert(m: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    if m.rank() != 2 {
        return Err(LabError::Shape("invert expects a rank-2 tensor".into()));
    }
    let len = m.range().len();
    let space = m.get(&[0, 0]).space().clone();
    let mut a: Vec<Vec<Jet>> = (0..len)
        .map(|i| (0..len).map(|j| m.get(&[i, j]).clone()).collect())
        .collect();
    let mut inv: Vec<Vec<Jet>> = (0..len)
        .map(|i| {
            (0..len)
                .map(|j| Jet::constant(&space, if i == j { 1.0 } else { 0.0 }))
                .collect()
        })
        .collect();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |s, j| s.max(j.value().abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..len {
        let pivot_row = (col..len)
            .max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs()))
            .expect("non-empty");
        let pivot = a[pivot_row][col].value();
        if pivot.abs() <= 1e-14 * scale {
            return Err(LabError::Singular { column: col, pivot });
        }
        a.swap(col, pivot_row);
        inv.swap(col, pivot_row);
        let p_inv = a[col][col].recip()?;
        for j in 0..len {
            a[col][j] = &a[col][j] * &p_inv;
            inv[col][j] = &inv[col][j] * &p_inv;
        }
        for r in 0..len {
            if r == col {
                continue;
            }
            let factor = a[r][col].clone();
            if factor.coeffs().iter().all(|c| *c == 0.0) {
                continue;
            }
            for j in 0..len {
                a[r][j] = &a[r][j] - &(&factor * &a[col][j]);
                inv[r][j] = &inv[r][j] - &(&factor * &inv[col][j]);
            }
        }
    }
    Ok(Tensor::from_fn(
        m.range(),
        vec![Variance::Up, Variance::Up],
        |idx| inv[idx[0]][idx[1]].clone(),
    ))
}

/// A nondegenerate metric together with its inverse, both as jets.
#[derive(Debug, Clone)]
pub struct MetricSample {
    pub g: Tensor<Jet>,
    pub g_inv: Tensor<Jet>,
}

impl MetricSample {
    /// Inverts `g` and checks positive-definiteness at the base point.
    pub fn new(g: Tensor<Jet>) -> Result<Self> {
        if g.rank() != 2 || g.variance() != [Variance::Down, Variance::Down] {
            return Err(LabError::Shape("metric must be a (0,2) tensor".into()));
        }
        let values = g.values().to_matrix();
        if values.clone().cholesky().is_none() {
            return Err(LabError::Definiteness(format!(
                "metric at base point is not positive-definite: {values}"
            )));
        }
        let g_inv = invert(&g)?;
        Ok(MetricSample { g, g_inv })
    }

    pub fn range(&self) -> IndexRange {
        self.g.range()
    }

    pub fn dim(&self) -> usize {
        self.g.range().len()
    }

    /// Largest deviation of `g · g_inv` from the identity.
    pub fn inverse_defect(&self) -> f64 {
        let g = self.g.values().to_matrix();
        let gi = self.g_inv.values().to_matrix();
        let id = DMatrix::<f64>::identity(g.nrows(), g.ncols());
        (g * gi - id).amax()
    }
}

/// Levi-Civita connection `Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})`.
pub fn christoffel(m: &MetricSample) -> Result<Connection> {
    let range = m.range();
    let len = range.len();
    // dg[l][i][j] = ∂_l g_{ij}
    let mut dg = Vec::with_capacity(len);
    for l in 0..len {
        let var = range.var(l);
        let mut rows = Vec::with_capacity(len * len);
        for i in 0..len {
            for j in 0..len {
                rows.push(m.g.get(&[i, j]).diff(var)?);
            }
        }
        dg.push(rows);
    }
    let d = |l: usize, i: usize, j: usize| &dg[l][i * len + j];
    // first kind: Γ_{ijl} = ½(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij})
    let first = Tensor::from_fn(range, vec![Variance::Down; 3], |idx| {
        let (i, j, l) = (idx[0], idx[1], idx[2]);
        (d(i, j, l) + d(j, i, l) - d(l, i, j)).scale(0.5)
    });
    let coeffs = Tensor::from_fn(
        range,
        vec![Variance::Up, Variance::Down, Variance::Down],
        |idx| {
            let (k, i, j) = (idx[0], idx[1], idx[2]);
            let terms: Vec<Jet> = (0..len)
                .map(|l| m.g_inv.get(&[k, l]) * first.get(&[i, j, l]))
                .collect();
            crate::jets::sum(&terms).expect("non-empty range")
        },
    );
    Connection::new(coeffs)
}

/// `R_{ijk}^l = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^m_{jk} Γ^l_{im} − Γ^m_{ik} Γ^l_{jm}`,
/// stored at index `(i, j, k, l)`.
pub fn curvature_from_connection(conn: &Connection) -> Result<Tensor<Jet>> {
    let range = conn.range();
    let len = range.len();
    // dgamma[a][(l, j, k)] = ∂_a Γ^l_{jk}
    let mut dgamma = Vec::with_capacity(len);
    for a in 0..len {
        let var = range.var(a);
        dgamma.push(conn.coeffs.try_from_map(|j| j.diff(var))?);
    }
    Tensor::try_from_fn(
        range,
        vec![Variance::Down, Variance::Down, Variance::Down, Variance::Up],
        |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = dgamma[i].get(&[l, j, k]) - dgamma[j].get(&[l, i, k]);
            for m in 0..len {
                acc = acc + conn.get(m, j, k) * conn.get(l, i, m)
                    - conn.get(m, i, k) * conn.get(l, j, m);
            }
            Ok(acc)
        },
    )
}

impl<T> Tensor<T> {
    fn try_from_map<U>(&self, mut f: impl FnMut(&T) -> Result<U>) -> Result<Tensor<U>> {
        Ok(Tensor {
            range: self.range,
            variance: self.variance.clone(),
            data: self.data.iter().map(&mut f).collect::<Result<Vec<U>>>()?,
        })
    }
}

/// Ricci tensor `R_{jk} = Σ_p R_{pjk}^p`.
pub fn ricci(riem: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    if riem.rank() != 4 || riem.variance()[3] != Variance::Up {
        return Err(LabError::Shape("ricci expects R_{ijk}^l".into()));
    }
    let len = riem.range().len();
    Ok(Tensor::from_fn(
        riem.range(),
        vec![Variance::Down, Variance::Down],
        |idx| {
            let terms: Vec<&Jet> = (0..len)
                .map(|p| riem.get(&[p, idx[0], idx[1], p]))
                .collect();
            crate::jets::sum(terms).expect("non-empty")
        },
    ))
}

/// Full contraction `g^{jk} T_{jk}`.
pub fn trace_with(t: &Tensor<Jet>, g_inv: &Tensor<Jet>) -> Jet {
    let len = t.range().len();
    let terms: Vec<Jet> = index_tuples(len, 2)
        .map(|ix| g_inv.get(&[ix[0], ix[1]]) * t.get(&[ix[0], ix[1]]))
        .collect();
    crate::jets::sum(&terms).expect("non-empty")
}

/// Ricci tensor and scalar curvature of a curvature tensor.
pub fn ricci_and_scalar(riem: &Tensor<Jet>, m: &MetricSample) -> Result<(Tensor<Jet>, Jet)> {
    let ric = ricci(riem)?;
    let scalar = trace_with(&ric, &m.g_inv);
    Ok((ric, scalar))
}

/// Covariant derivative; the new lower index is prepended:
/// `(∇T)_{a, ...} = ∇_a T_{...}`.
pub fn covariant_derivative(t: &Tensor<Jet>, conn: &Connection) -> Result<Tensor<Jet>> {
    if t.range() != conn.range() {
        return Err(LabError::Shape(format!(
            "tensor range {:?} does not match connection range {:?}",
            t.range(),
            conn.range()
        )));
    }
    let range = t.range();
    let len = range.len();
    let rank = t.rank();
    let mut partials = Vec::with_capacity(len);
    for a in 0..len {
        partials.push(t.try_from_map(|j| j.diff(range.var(a)))?);
    }
    let mut variance = vec![Variance::Down];
    variance.extend_from_slice(t.variance());
    let mut scratch = vec![0usize; rank];
    Tensor::try_from_fn(range, variance, |idx| {
        let a = idx[0];
        let rest = &idx[1..];
        let mut acc = partials[a].get(rest).clone();
        for slot in 0..rank {
            scratch.copy_from_slice(rest);
            let fixed = rest[slot];
            for m in 0..len {
                scratch[slot] = m;
                let comp = t.get(&scratch);
                match t.variance()[slot] {
                    Variance::Up => acc = acc + conn.get(fixed, a, m) * comp,
                    Variance::Down => acc = acc - conn.get(m, a, fixed) * comp,
                }
            }
        }
        Ok(acc)
    })
}

/// Contracts the first two (lower) slots of `t` with an inverse metric.
pub fn contract_leading(t: &Tensor<Jet>, g_inv: &Tensor<Jet>) -> Tensor<Jet> {
    let len = t.range().len();
    let variance = t.variance()[2..].to_vec();
    let mut full = vec![0usize; t.rank()];
    Tensor::from_fn(t.range(), variance, |rest| {
        full[2..].copy_from_slice(rest);
        let mut terms = Vec::with_capacity(len * len);
        for a in 0..len {
            for b in 0..len {
                let w = g_inv.get(&[a, b]);
                if w.coeffs().iter().all(|c| *c == 0.0) {
                    continue;
                }
                full[0] = a;
                full[1] = b;
                terms.push(w * t.get(&full));
            }
        }
        crate::jets::sum(&terms).unwrap_or_else(|| Jet::zero(t.get(&full).space()))
    })
}

/// Rough Laplacian `g^{ab} ∇_a ∇_b T`.
pub fn laplacian(t: &Tensor<Jet>, conn: &Connection, g_inv: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    let second = covariant_derivative(&covariant_derivative(t, conn)?, conn)?;
    Ok(contract_leading(&second, g_inv))
}

/// Hodge Laplacian `Δ_d W = −(dδ + δd) W` of a 1-form, computed from the
/// divergence and the exterior derivative rather than the Weitzenböck formula.
pub fn hodge_laplacian_one_form(
    w: &Tensor<Jet>,
    conn: &Connection,
    g_inv: &Tensor<Jet>,
) -> Result<Tensor<Jet>> {
    if w.rank() != 1 || w.variance()[0] != Variance::Down {
        return Err(LabError::Shape("hodge laplacian expects a 1-form".into()));
    }
    let range = w.range();
    let nabla_w = covariant_derivative(w, conn)?;
    // −δW = div W
    let div = trace_with(&nabla_w, g_inv);
    let dw = Tensor::from_fn(range, vec![Variance::Down, Variance::Down], |ix| {
        nabla_w.get(&[ix[0], ix[1]]) - nabla_w.get(&[ix[1], ix[0]])
    });
    let nabla_dw = covariant_derivative(&dw, conn)?;
    // −δ(dW)_b = ∇^a (dW)_{ab}
    let div_dw = contract_leading(&nabla_dw, g_inv);
    Tensor::try_from_fn(range, vec![Variance::Down], |ix| {
        let b = ix[0];
        Ok(div.diff(range.var(b))? + div_dw.get(&[b]))
    })
}

/// Raises slot `slot` (must be lower) with `g_inv`.
pub fn raise(t: &Tensor<Jet>, slot: usize, g_inv: &Tensor<Jet>) -> Tensor<Jet> {
    assert_eq!(t.variance()[slot], Variance::Down);
    let mut variance = t.variance().to_vec();
    variance[slot] = Variance::Up;
    reindex(t, slot, g_inv, variance)
}

/// Lowers slot `slot` (must be upper) with `g`.
pub fn lower(t: &Tensor<Jet>, slot: usize, g: &Tensor<Jet>) -> Tensor<Jet> {
    assert_eq!(t.variance()[slot], Variance::Up);
    let mut variance = t.variance().to_vec();
    variance[slot] = Variance::Down;
    reindex(t, slot, g, variance)
}

fn reindex(t: &Tensor<Jet>, slot: usize, m: &Tensor<Jet>, variance: Vec<Variance>) -> Tensor<Jet> {
    let len = t.range().len();
    let mut scratch = vec![0usize; t.rank()];
    Tensor::from_fn(t.range(), variance, |idx| {
        scratch.copy_from_slice(idx);
        let terms: Vec<Jet> = (0..len)
            .map(|p| {
                scratch[slot] = p;
                m.get(&[idx[slot], p]) * t.get(&scratch)
            })
            .collect();
        crate::jets::sum(&terms).expect("non-empty")
    })
}
