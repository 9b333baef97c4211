//! The Lie algebra `Λ² ⊕ Λ¹` at a point, its degenerate inner product and
//! the `#` square built from its structure constants.
//!
//! Three independent realisations of the bracket are provided:
//!
//! * [`BracketMode::Direct`]: `[U⊕W, V⊕X] = [U,V] ⊕ (U⌟X − V⌟W)` with
//!   `(U⌟X)_i = −U_ij g^{jk} X_k`, `[U,V] = V G U − U G V` and
//!   `⟨U⊕W, V⊕X⟩ = g^{ik} g^{jl} U_ij V_kl`.
//! * [`BracketMode::Spacetime`]: the element becomes a space-time 2-form `α`
//!   with `α_ij = −U_ij`, `α_i0 = W_i`, `α_0i = −W_i`; the bracket is
//!   `α G̃ β − β G̃ α` and the inner product `G̃^{ik} G̃^{jl} α_ij β_kl`, where
//!   `G̃` is the degenerate inverse metric with a zero time row and column.
//! * [`BracketMode::Mixed`]: the element becomes `A_i^j = −(U G)_ij`,
//!   `A_i^0 = W_i`, `A_0^• = 0`; the bracket is the matrix commutator `AB − BA`
//!   and the inner product `−tr(AB)`.
//!
//! The sign of `[U,V]` is the one that makes `U ↦ U⌟·` a representation, which
//! is what the Jacobi identity of the semidirect sum requires; it is also what
//! the two space-time realisations produce.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::residual::Residual;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BracketMode {
    Direct,
    Spacetime,
    Mixed,
}

pub const BRACKET_MODES: [BracketMode; 3] = [
    BracketMode::Direct,
    BracketMode::Spacetime,
    BracketMode::Mixed,
];

#[derive(Debug, Clone, PartialEq)]
pub enum LieAlgebraElement {
    /// `U ⊕ W` with `U` a lower-index 2-form and `W` a 1-form.
    Lowered { u: DMatrix<f64>, w: DVector<f64> },
    /// `(n+1) × (n+1)` matrix `A_i^j`, row and column 0 being time.
    Mixed(DMatrix<f64>),
}

impl LieAlgebraElement {
    pub fn lowered(u: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        let n = w.len();
        if u.shape() != (n, n) {
            return Err(LabError::Shape(format!(
                "2-form is {:?}, 1-form has {n} entries",
                u.shape()
            )));
        }
        if (&u + u.transpose()).amax() > 1e-14 * u.amax().max(1.0) {
            return Err(LabError::Shape("2-form is not antisymmetric".into()));
        }
        Ok(LieAlgebraElement::Lowered { u, w })
    }

    /// Checks the mixed-representation constraint `g^{ik} A_k^j = −g^{jk} A_k^i`
    /// and that the time row vanishes.
    pub fn mixed(a: DMatrix<f64>, g_inv: &DMatrix<f64>) -> Result<Self> {
        let n = g_inv.nrows();
        if a.shape() != (n + 1, n + 1) {
            return Err(LabError::Shape(format!(
                "mixed element is {:?}, expected {}x{}",
                a.shape(),
                n + 1,
                n + 1
            )));
        }
        let ga = g_inv * a.view((1, 1), (n, n));
        let scale = ga.amax().max(1.0);
        if (&ga + ga.transpose()).amax() > 1e-12 * scale || a.row(0).amax() != 0.0 {
            return Err(LabError::Shape(
                "mixed element violates g^{ik} A_k^j = -g^{jk} A_k^i".into(),
            ));
        }
        Ok(LieAlgebraElement::Mixed(a))
    }

    pub fn dim(&self) -> usize {
        match self {
            LieAlgebraElement::Lowered { w, .. } => w.len(),
            LieAlgebraElement::Mixed(a) => a.nrows() - 1,
        }
    }

    fn is_mixed(&self) -> bool {
        matches!(self, LieAlgebraElement::Mixed(_))
    }

    /// `(U, W)` of the element.
    pub fn parts(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
        match self {
            LieAlgebraElement::Lowered { u, w } => (u.clone(), w.clone()),
            LieAlgebraElement::Mixed(a) => from_mixed(a, g),
        }
    }
}

/// `(U⌟X)_i = −U_ij g^{jk} X_k`.
pub fn interior(u: &DMatrix<f64>, x: &DVector<f64>, g_inv: &DMatrix<f64>) -> DVector<f64> {
    -(u * (g_inv * x))
}

/// `g^{ik} g^{jl} U_ij V_kl`.
pub fn two_form_inner(u: &DMatrix<f64>, v: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> f64 {
    (g_inv * u * g_inv).component_mul(v).sum()
}

pub fn to_spacetime_form(u: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let n = w.len();
    DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, 0) => 0.0,
        (i, 0) => w[i - 1],
        (0, j) => -w[j - 1],
        (i, j) => -u[(i - 1, j - 1)],
    })
}

pub fn from_spacetime_form(alpha: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = alpha.nrows() - 1;
    let u = DMatrix::from_fn(n, n, |i, j| -alpha[(i + 1, j + 1)]);
    let w = DVector::from_fn(n, |i, _| alpha[(i + 1, 0)]);
    (u, w)
}

pub fn to_mixed(u: &DMatrix<f64>, w: &DVector<f64>, g_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.len();
    let ug = u * g_inv;
    DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, _) => 0.0,
        (i, 0) => w[i - 1],
        (i, j) => -ug[(i - 1, j - 1)],
    })
}

pub fn from_mixed(a: &DMatrix<f64>, g: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows() - 1;
    let u = -(a.view((1, 1), (n, n)) * g);
    let w = DVector::from_fn(n, |i, _| a[(i + 1, 0)]);
    (u, w)
}

fn degenerate_inverse(g_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = g_inv.nrows();
    DMatrix::from_fn(n + 1, n + 1, |a, b| {
        if a == 0 || b == 0 {
            0.0
        } else {
            g_inv[(a - 1, b - 1)]
        }
    })
}

/// Bracket and inner product of `U⊕W` and `V⊕X` computed through `mode`.
pub fn bracket_parts(
    (u, w): (&DMatrix<f64>, &DVector<f64>),
    (v, x): (&DMatrix<f64>, &DVector<f64>),
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    mode: BracketMode,
) -> ((DMatrix<f64>, DVector<f64>), f64) {
    match mode {
        BracketMode::Direct => {
            let uv = v * g_inv * u - u * g_inv * v;
            let wx = interior(u, x, g_inv) - interior(v, w, g_inv);
            ((uv, wx), two_form_inner(u, v, g_inv))
        }
        BracketMode::Spacetime => {
            let gt = degenerate_inverse(g_inv);
            let a = to_spacetime_form(u, w);
            let b = to_spacetime_form(v, x);
            let br = &a * &gt * &b - &b * &gt * &a;
            let inner = (&gt * &a * &gt).component_mul(&b).sum();
            (from_spacetime_form(&br), inner)
        }
        BracketMode::Mixed => {
            let a = to_mixed(u, w, g_inv);
            let b = to_mixed(v, x, g_inv);
            let br = &a * &b - &b * &a;
            let inner = -(&a * &b).trace();
            (from_mixed(&br, g), inner)
        }
    }
}

/// Bracket and inner product of two elements of the same representation.
pub fn bracket_and_inner(
    a: &LieAlgebraElement,
    b: &LieAlgebraElement,
    g: &DMatrix<f64>,
    mode: BracketMode,
) -> Result<(LieAlgebraElement, f64)> {
    if a.is_mixed() != b.is_mixed() {
        return Err(LabError::Shape("representation mismatch".into()));
    }
    if a.dim() != b.dim() || a.dim() != g.nrows() {
        return Err(LabError::Shape("dimension mismatch".into()));
    }
    let g_inv = g.clone().try_inverse().ok_or(LabError::Singular {
        column: 0,
        pivot: 0.0,
    })?;
    let (u, w) = a.parts(g);
    let (v, x) = b.parts(g);
    let ((ub, wb), inner) = bracket_parts((&u, &w), (&v, &x), g, &g_inv, mode);
    let out = if a.is_mixed() {
        LieAlgebraElement::Mixed(to_mixed(&ub, &wb, &g_inv))
    } else {
        LieAlgebraElement::Lowered { u: ub, w: wb }
    };
    Ok((out, inner))
}

/// Basis of `Λ² ⊕ Λ¹` whose `Λ²` part is orthonormal for the full-sum inner
/// product and whose `Λ¹` part is orthonormal for `g^{-1}`.
#[derive(Debug, Clone)]
pub struct LieBasis {
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub two: Vec<DMatrix<f64>>,
    pub one: Vec<DVector<f64>>,
}

impl LieBasis {
    /// Gram–Schmidt on the coordinate 2-forms `dx^i∧dx^j` and 1-forms `dx^i`.
    pub fn new(g: &DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        let g_inv = g.clone().try_inverse().ok_or(LabError::Singular {
            column: 0,
            pivot: 0.0,
        })?;
        let mut two: Vec<DMatrix<f64>> = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let mut e = DMatrix::zeros(n, n);
                e[(i, j)] = 1.0;
                e[(j, i)] = -1.0;
                for b in &two {
                    e -= b * two_form_inner(&e, b, &g_inv);
                }
                let norm = two_form_inner(&e, &e, &g_inv).sqrt();
                two.push(e / norm);
            }
        }
        let mut one: Vec<DVector<f64>> = Vec::new();
        for i in 0..n {
            let mut e = DVector::zeros(n);
            e[i] = 1.0;
            for b in &one {
                e -= b * e.dot(&(&g_inv * b));
            }
            let norm = e.dot(&(&g_inv * &e)).sqrt();
            one.push(e / norm);
        }
        Ok(LieBasis {
            g: g.clone(),
            g_inv,
            two,
            one,
        })
    }

    pub fn len(&self) -> usize {
        self.two.len() + self.one.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn element(&self, alpha: usize) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.g.nrows();
        if alpha < self.two.len() {
            (self.two[alpha].clone(), DVector::zeros(n))
        } else {
            (
                DMatrix::zeros(n, n),
                self.one[alpha - self.two.len()].clone(),
            )
        }
    }

    pub fn coordinates(&self, u: &DMatrix<f64>, w: &DVector<f64>) -> DVector<f64> {
        let g_inv = &self.g_inv;
        DVector::from_iterator(
            self.len(),
            self.two
                .iter()
                .map(|b| two_form_inner(u, b, g_inv))
                .chain(self.one.iter().map(|b| w.dot(&(g_inv * b)))),
        )
    }

    /// New basis `e'_α = Σ_β O_{αβ} e_β` for a block-orthogonal `O`.
    pub fn transformed(&self, o: &DMatrix<f64>) -> Result<LieBasis> {
        let n2 = self.two.len();
        let len = self.len();
        if o.shape() != (len, len) {
            return Err(LabError::Shape("basis change has the wrong size".into()));
        }
        let mut off_block = 0.0f64;
        for a in 0..len {
            for b in 0..len {
                if (a < n2) != (b < n2) {
                    off_block = off_block.max(o[(a, b)].abs());
                }
            }
        }
        let defect = (o * o.transpose() - DMatrix::identity(len, len)).amax();
        if off_block > 0.0 || defect > 1e-12 {
            return Err(LabError::Shape(
                "basis change must be orthogonal and preserve the Λ²/Λ¹ split".into(),
            ));
        }
        let n = self.g.nrows();
        let two = (0..n2)
            .map(|a| {
                (0..n2).fold(DMatrix::zeros(n, n), |acc, b| {
                    acc + &self.two[b] * o[(a, b)]
                })
            })
            .collect();
        let one = (n2..len)
            .map(|a| {
                (n2..len).fold(DVector::zeros(n), |acc, b| {
                    acc + &self.one[b - n2] * o[(a, b)]
                })
            })
            .collect();
        Ok(LieBasis {
            g: self.g.clone(),
            g_inv: self.g_inv.clone(),
            two,
            one,
        })
    }
}

/// `c[α][γ][δ]`: coefficient of `e_α` in `[e_γ, e_δ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureConstants {
    pub len: usize,
    data: Vec<f64>,
}

impl StructureConstants {
    pub fn get(&self, alpha: usize, gamma: usize, delta: usize) -> f64 {
        self.data[(alpha * self.len + gamma) * self.len + delta]
    }
}

pub fn structure_constants(basis: &LieBasis, mode: BracketMode) -> StructureConstants {
    let len = basis.len();
    let mut data = vec![0.0; len * len * len];
    for gamma in 0..len {
        let (u, w) = basis.element(gamma);
        for delta in 0..len {
            let (v, x) = basis.element(delta);
            let ((ub, wb), _) = bracket_parts((&u, &w), (&v, &x), &basis.g, &basis.g_inv, mode);
            let coords = basis.coordinates(&ub, &wb);
            for alpha in 0..len {
                data[(alpha * len + gamma) * len + delta] = coords[alpha];
            }
        }
    }
    StructureConstants { len, data }
}

/// `(Q^#)_{αβ} = c_α^{γδ} c_β^{μν} Q_{γμ} Q_{δν}`.
pub fn sharp_square(q: &DMatrix<f64>, c: &StructureConstants) -> Result<DMatrix<f64>> {
    let len = c.len;
    if q.shape() != (len, len) {
        return Err(LabError::Shape(format!(
            "form is {:?}, algebra has dimension {len}",
            q.shape()
        )));
    }
    if (q - q.transpose()).amax() > 1e-12 * q.amax().max(1.0) {
        return Err(LabError::Shape("# needs a symmetric form".into()));
    }
    // B_α = Σ_{γδ} c_α^{γδ} e_γ ⊗ e_δ as a matrix; then Q^#_{αβ} = tr(B_αᵀ Q B_β Q)
    let b: Vec<DMatrix<f64>> = (0..len)
        .map(|a| DMatrix::from_fn(len, len, |g, d| c.get(a, g, d)))
        .collect();
    let qbq: Vec<DMatrix<f64>> = b.iter().map(|bb| q * bb * q).collect();
    Ok(DMatrix::from_fn(len, len, |a, bt| {
        b[a].component_mul(&qbq[bt]).sum()
    }))
}

/// Cyclic sum `[x,[y,z]] + [y,[z,x]] + [z,[x,y]]` for elements given as `(U, W)`.
pub fn jacobi_residual(
    x: (&DMatrix<f64>, &DVector<f64>),
    y: (&DMatrix<f64>, &DVector<f64>),
    z: (&DMatrix<f64>, &DVector<f64>),
    g: &DMatrix<f64>,
    g_inv: &DMatrix<f64>,
    mode: BracketMode,
) -> Residual {
    let br = |a: (&DMatrix<f64>, &DVector<f64>), b: (&DMatrix<f64>, &DVector<f64>)| {
        bracket_parts(a, b, g, g_inv, mode).0
    };
    let yz = br(y, z);
    let zx = br(z, x);
    let xy = br(x, y);
    let t1 = br(x, (&yz.0, &yz.1));
    let t2 = br(y, (&zx.0, &zx.1));
    let t3 = br(z, (&xy.0, &xy.1));
    let sum_u = &t1.0 + &t2.0 + &t3.0;
    let sum_w = &t1.1 + &t2.1 + &t3.1;
    let scale = [&t1, &t2, &t3]
        .iter()
        .map(|t| t.0.amax().max(t.1.amax()))
        .fold(0.0, f64::max);
    Residual::vanishing(sum_u.amax().max(sum_w.amax()), [scale])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metric() -> DMatrix<f64> {
        DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 0.8])
    }

    fn sample(seed: f64) -> (DMatrix<f64>, DVector<f64>) {
        let a = DMatrix::from_fn(3, 3, |i, j| ((i * 3 + j) as f64 * seed).sin());
        let u = &a - a.transpose();
        let w = DVector::from_fn(3, |i, _| ((i as f64 + 1.0) * seed).cos());
        (u, w)
    }

    #[test]
    fn bracket_of_pure_parts() {
        let g = metric();
        let gi = g.clone().try_inverse().unwrap();
        let (u, _) = sample(0.7);
        let (_, x) = sample(1.3);
        let zero_w = DVector::zeros(3);
        let zero_u = DMatrix::zeros(3, 3);
        let ((ub, wb), inner) =
            bracket_parts((&u, &zero_w), (&zero_u, &x), &g, &gi, BracketMode::Direct);
        assert_eq!(ub.amax(), 0.0);
        assert!((wb - interior(&u, &x, &gi)).amax() < 1e-15);
        assert_eq!(inner, 0.0);
    }

    #[test]
    fn modes_agree() {
        let g = metric();
        let gi = g.clone().try_inverse().unwrap();
        let (u, w) = sample(0.4);
        let (v, x) = sample(2.1);
        let ((u0, w0), i0) = bracket_parts((&u, &w), (&v, &x), &g, &gi, BracketMode::Direct);
        for mode in [BracketMode::Spacetime, BracketMode::Mixed] {
            let ((u1, w1), i1) = bracket_parts((&u, &w), (&v, &x), &g, &gi, mode);
            assert!((&u1 - &u0).amax() < 1e-12, "{mode:?}");
            assert!((&w1 - &w0).amax() < 1e-12, "{mode:?}");
            assert!((i1 - i0).abs() < 1e-12, "{mode:?}");
        }
    }

    #[test]
    fn jacobi_holds() {
        let g = metric();
        let gi = g.clone().try_inverse().unwrap();
        let (a, b, c) = (sample(0.3), sample(1.1), sample(2.7));
        for mode in BRACKET_MODES {
            let r = jacobi_residual((&a.0, &a.1), (&b.0, &b.1), (&c.0, &c.1), &g, &gi, mode);
            assert!(r.passes(1e-12), "{mode:?} {r:?}");
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let basis = LieBasis::new(&metric()).unwrap();
        assert_eq!(basis.len(), 6);
        for a in 0..6 {
            let (u, w) = basis.element(a);
            let c = basis.coordinates(&u, &w);
            for b in 0..6 {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((c[b] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_constraint_is_checked() {
        let g = metric();
        let gi = g.clone().try_inverse().unwrap();
        let (u, w) = sample(0.9);
        assert!(LieAlgebraElement::mixed(to_mixed(&u, &w, &gi), &gi).is_ok());
        let bad = DMatrix::from_fn(4, 4, |i, j| if i > 0 && i == j { 1.0 } else { 0.0 });
        assert!(LieAlgebraElement::mixed(bad, &gi).is_err());
    }

    #[test]
    fn representation_mismatch_is_an_error() {
        let g = metric();
        let gi = g.clone().try_inverse().unwrap();
        let (u, w) = sample(0.9);
        let a = LieAlgebraElement::lowered(u.clone(), w.clone()).unwrap();
        let b = LieAlgebraElement::Mixed(to_mixed(&u, &w, &gi));
        assert!(bracket_and_inner(&a, &b, &g, BracketMode::Direct).is_err());
    }

    #[test]
    fn sharp_of_zero_and_asymmetric() {
        let basis = LieBasis::new(&metric()).unwrap();
        let c = structure_constants(&basis, BracketMode::Direct);
        let z = sharp_square(&DMatrix::zeros(6, 6), &c).unwrap();
        assert_eq!(z.amax(), 0.0);
        let mut q = DMatrix::zeros(6, 6);
        q[(0, 1)] = 1.0;
        assert!(sharp_square(&q, &c).is_err());
    }
}
