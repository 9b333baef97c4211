//! Hamilton's Harnack tensors and the soliton relations between `U`, `W`, `V`.
//!
//! Index conventions: every contraction written with repeated lower indices
//! is a full metric contraction of the lowered tensors. With `G = g^{-1}`:
//!
//! * `P_{ijk} = ∇_i R_{jk} − ∇_j R_{ik}`
//! * `M_{ij} = ΔR_{ij} − ½∇_i∇_j R + 2 R_{kijl} R^{kl} − R_{ik} G^{kl} R_{lj}`
//! * `Z = M(W♯, W♯) − 2 P_{ijk} U^{ij} W^k + R_{ijkl} U^{ij} U^{lk}`
//!
//! where `U^{ij} = G^{ia} G^{jb} U_{ab}` and `W^k = G^{kl} W_l`.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::jets::Jet;
use crate::residual::Residual;
use crate::solutions::{FlowSolution, Geometry, Point};
use crate::tensor::{index_tuples, IndexRange, Tensor, Variance};

/// A 2-form `U_{ij}`, a 1-form `W_i` and optionally a vector `V^i` at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct HarnackData {
    pub u: DMatrix<f64>,
    pub w: DVector<f64>,
    pub v: Option<DVector<f64>>,
}

impl HarnackData {
    pub fn new(u: DMatrix<f64>, w: DVector<f64>) -> Result<Self> {
        let n = w.len();
        if u.nrows() != n || u.ncols() != n {
            return Err(LabError::Shape(format!(
                "U is {}x{}, W has {} entries",
                u.nrows(),
                u.ncols(),
                n
            )));
        }
        for i in 0..n {
            for j in 0..n {
                if u[(i, j)] + u[(j, i)] != 0.0 {
                    return Err(LabError::Shape(format!(
                        "U is not antisymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(HarnackData { u, w, v: None })
    }

    pub fn with_v(mut self, v: DVector<f64>) -> Result<Self> {
        if v.len() != self.w.len() {
            return Err(LabError::Shape("V has the wrong length".into()));
        }
        self.v = Some(v);
        Ok(self)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        HarnackData {
            u: &self.u * lambda,
            w: &self.w * lambda,
            v: self.v.as_ref().map(|v| v * lambda),
        }
    }
}

/// Antisymmetric part `½(A − Aᵀ)`, used to build valid `U` from raw data.
pub fn antisymmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    let half = (a - a.transpose()) * 0.5;
    // force exact antisymmetry so the roundoff of the two halves cannot differ
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| {
        if i < j {
            half[(i, j)]
        } else if i > j {
            -half[(j, i)]
        } else {
            0.0
        }
    })
}

/// `P_{ijk} = ∇_i R_{jk} − ∇_j R_{ik}` as jets.
pub fn p_tensor(geo: &Geometry) -> Result<Tensor<Jet>> {
    let nabla_ric = geo.nabla(&geo.ric)?;
    Ok(Tensor::from_fn(
        geo.range(),
        vec![Variance::Down; 3],
        |ix| nabla_ric.get(&[ix[0], ix[1], ix[2]]) - nabla_ric.get(&[ix[1], ix[0], ix[2]]),
    ))
}

fn check_time(p: &Point, with_time_term: bool) -> Result<()> {
    if with_time_term && p.t <= 0.0 {
        return Err(LabError::Domain(format!(
            "the 1/t term needs t > 0, got t = {}",
            p.t
        )));
    }
    Ok(())
}

fn vector(t: &Tensor<f64>) -> DVector<f64> {
    DVector::from_column_slice(t.components())
}

/// Point values of every tensor entering `Z` and the trace Harnack expression.
#[derive(Debug, Clone)]
pub struct HarnackTensors {
    pub point: Point,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub ric: DMatrix<f64>,
    /// `R_{ijkl}`.
    pub riem: Tensor<f64>,
    pub p: Tensor<f64>,
    /// `M_{ij}` without the `R_{ij}/2t` term.
    pub m: DMatrix<f64>,
    pub scalar: f64,
    pub dt_scalar: f64,
    pub grad_scalar: DVector<f64>,
}

impl HarnackTensors {
    pub fn at(s: &FlowSolution, p: &Point, order: usize) -> Result<Self> {
        let geo = s.geometry(p, order)?;
        Self::from_geometry(&geo)
    }

    pub fn from_geometry(geo: &Geometry) -> Result<Self> {
        let n = geo.dim();
        let g = geo.g().values().to_matrix();
        let g_inv = geo.g_inv().values().to_matrix();
        let ric = geo.ric.values().to_matrix();
        let riem = geo.riem_lowered().values();
        let p = p_tensor(geo)?.values();
        let lap_ric = geo.laplacian(&geo.ric)?.values().to_matrix();
        let hess_r = geo.hessian(&geo.scalar)?.values().to_matrix();
        let ric_up = &g_inv * &ric * &g_inv;
        let ric_sq = &ric * &g_inv * &ric;
        let m = DMatrix::from_fn(n, n, |i, j| {
            let mut quad = 0.0;
            for k in 0..n {
                for l in 0..n {
                    quad += riem.get(&[k, i, j, l]) * ric_up[(k, l)];
                }
            }
            lap_ric[(i, j)] - 0.5 * hess_r[(i, j)] + 2.0 * quad - ric_sq[(i, j)]
        });
        Ok(HarnackTensors {
            point: geo.point.clone(),
            g,
            g_inv,
            ric,
            riem,
            p,
            m,
            scalar: geo.scalar.value(),
            dt_scalar: geo.scalar.diff(0)?.value(),
            grad_scalar: vector(&geo.gradient(&geo.scalar)?.values()),
        })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `M_{ij}`, plus `R_{ij}/2t` when requested.
    pub fn m_with(&self, with_time_term: bool) -> Result<DMatrix<f64>> {
        check_time(&self.point, with_time_term)?;
        Ok(if with_time_term {
            &self.m + &self.ric * (0.5 / self.point.t)
        } else {
            self.m.clone()
        })
    }

    fn check_shape(&self, d: &HarnackData) -> Result<()> {
        if d.w.len() != self.dim() {
            return Err(LabError::Shape(format!(
                "data has dimension {}, point has dimension {}",
                d.w.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// The three terms `(M(W,W), −2P(U,W), Rm(U,U))` of `Z`.
    pub fn z_terms(&self, d: &HarnackData, with_time_term: bool) -> Result<[f64; 3]> {
        self.check_shape(d)?;
        let n = self.dim();
        let m = self.m_with(with_time_term)?;
        let u_up = &self.g_inv * &d.u * &self.g_inv;
        let w_up = &self.g_inv * &d.w;
        let mww = w_up.dot(&(&m * &w_up));
        let mut puw = 0.0;
        for ix in index_tuples(n, 3) {
            puw += self.p.get(&ix) * u_up[(ix[0], ix[1])] * w_up[ix[2]];
        }
        let mut ruu = 0.0;
        for ix in index_tuples(n, 4) {
            ruu += self.riem.get(&ix) * u_up[(ix[0], ix[1])] * u_up[(ix[3], ix[2])];
        }
        Ok([mww, -2.0 * puw, ruu])
    }

    pub fn z(&self, d: &HarnackData, with_time_term: bool) -> Result<f64> {
        Ok(self.z_terms(d, with_time_term)?.iter().sum())
    }

    /// `∂_t R [+ R/t] + 2⟨∇R, V⟩ + 2 Ric(V, V)` for a vector `V`.
    pub fn trace(&self, v: &DVector<f64>, with_time_term: bool) -> Result<f64> {
        check_time(&self.point, with_time_term)?;
        if v.len() != self.dim() {
            return Err(LabError::Shape("V has the wrong length".into()));
        }
        let time = if with_time_term {
            self.scalar / self.point.t
        } else {
            0.0
        };
        Ok(self.dt_scalar + time + 2.0 * self.grad_scalar.dot(v) + 2.0 * v.dot(&(&self.ric * v)))
    }
}

pub fn compute_p(s: &FlowSolution, p: &Point, order: usize) -> Result<Tensor<f64>> {
    Ok(p_tensor(&s.geometry(p, order.max(3))?)?.values())
}

pub fn compute_m(
    s: &FlowSolution,
    p: &Point,
    with_time_term: bool,
    order: usize,
) -> Result<DMatrix<f64>> {
    check_time(p, with_time_term)?;
    HarnackTensors::at(s, p, order.max(4))?.m_with(with_time_term)
}

pub fn harnack_z(
    s: &FlowSolution,
    p: &Point,
    d: &HarnackData,
    with_time_term: bool,
    order: usize,
) -> Result<f64> {
    check_time(p, with_time_term)?;
    HarnackTensors::at(s, p, order.max(4))?.z(d, with_time_term)
}

pub fn trace_harnack(
    s: &FlowSolution,
    p: &Point,
    v: &DVector<f64>,
    with_time_term: bool,
    order: usize,
) -> Result<f64> {
    check_time(p, with_time_term)?;
    HarnackTensors::at(s, p, order.max(4))?.trace(v, with_time_term)
}

/// Cyclic sum `P_{ijk} + P_{jki} + P_{kij}` and antisymmetry defect of `P`.
pub fn p_identities(p: &Tensor<f64>) -> (Residual, Residual) {
    let n = p.range().len();
    let cyclic = index_tuples(n, 3)
        .map(|ix| {
            let (i, j, k) = (ix[0], ix[1], ix[2]);
            let terms = [*p.get(&[i, j, k]), *p.get(&[j, k, i]), *p.get(&[k, i, j])];
            Residual::vanishing(terms.iter().sum(), terms)
        })
        .collect();
    let anti = Residual::from_pairs(
        index_tuples(n, 3).map(|ix| (*p.get(&ix), -p.get(&[ix[1], ix[0], ix[2]]))),
    );
    (cyclic, anti)
}

/// A 2-form field used for the `W = U⌟V` construction.
#[derive(Debug, Clone, PartialEq)]
pub enum TwoFormField {
    /// `c` times the Riemannian volume form of a surface, frozen at the
    /// sample time so that it carries no time dependence of its own.
    VolumeForm(f64),
    /// `c` times the volume form of `g(t)`, which changes with the metric.
    EvolvingVolumeForm(f64),
    /// Constant coordinate components; parallel only on flat space.
    Constant(DMatrix<f64>),
    /// `U_ij = C_ij + Σ_k L^k_ij x^k` with antisymmetric `C` and `L^k`.
    Affine {
        constant: DMatrix<f64>,
        linear: Vec<DMatrix<f64>>,
    },
}

impl TwoFormField {
    pub fn build(&self, geo: &Geometry) -> Result<Tensor<Jet>> {
        let n = geo.dim();
        let range = geo.range();
        match self {
            TwoFormField::VolumeForm(c) | TwoFormField::EvolvingVolumeForm(c) => {
                if n != 2 {
                    return Err(LabError::Shape(format!(
                        "the volume form is a 2-form only in dimension 2, not {n}"
                    )));
                }
                let g = geo.g();
                let det = g.get(&[0, 0]) * g.get(&[1, 1]) - g.get(&[0, 1]) * g.get(&[1, 0]);
                let mut vol = det.sqrt()?.scale(*c);
                if matches!(self, TwoFormField::VolumeForm(_)) {
                    vol = vol.freeze(0);
                }
                let zero = geo.zero();
                Ok(Tensor::from_fn(
                    range,
                    vec![Variance::Down; 2],
                    |ix| match (ix[0], ix[1]) {
                        (0, 1) => vol.clone(),
                        (1, 0) => -&vol,
                        _ => zero.clone(),
                    },
                ))
            }
            TwoFormField::Constant(u) => TwoFormField::Affine {
                constant: u.clone(),
                linear: vec![DMatrix::zeros(n, n); n],
            }
            .build(geo),
            TwoFormField::Affine { constant, linear } => {
                let all_ok = linear.len() == n
                    && std::iter::once(constant)
                        .chain(linear)
                        .all(|m| m.shape() == (n, n) && (m + m.transpose()).amax() == 0.0);
                if !all_ok {
                    return Err(LabError::Shape(
                        "2-form coefficients must be antisymmetric n x n matrices".into(),
                    ));
                }
                let x = &geo.coords.x;
                Ok(Tensor::from_fn(range, vec![Variance::Down; 2], |ix| {
                    let (i, j) = (ix[0], ix[1]);
                    linear
                        .iter()
                        .zip(x)
                        .fold(geo.coords.constant(constant[(i, j)]), |acc, (l, xk)| {
                            acc + xk.scale(l[(i, j)])
                        })
                }))
            }
        }
    }
}

/// A 1-form field.
#[derive(Debug, Clone, PartialEq)]
pub enum OneFormField {
    Constant(DVector<f64>),
    /// `W_i = c_i + Σ_k L_ik x^k`.
    Affine {
        constant: DVector<f64>,
        linear: DMatrix<f64>,
    },
    /// `W = U⌟V` with `V = df` for the soliton potential `f`.
    Interior(TwoFormField),
}

impl OneFormField {
    pub fn build(&self, geo: &Geometry) -> Result<Tensor<Jet>> {
        let n = geo.dim();
        let range = geo.range();
        match self {
            OneFormField::Constant(c) => OneFormField::Affine {
                constant: c.clone(),
                linear: DMatrix::zeros(n, n),
            }
            .build(geo),
            OneFormField::Affine { constant, linear } => {
                if constant.len() != n || linear.shape() != (n, n) {
                    return Err(LabError::Shape(
                        "1-form coefficients have the wrong size".into(),
                    ));
                }
                let x = &geo.coords.x;
                Ok(Tensor::from_fn(range, vec![Variance::Down], |ix| {
                    let i = ix[0];
                    (0..n).fold(geo.coords.constant(constant[i]), |acc, k| {
                        acc + x[k].scale(linear[(i, k)])
                    })
                }))
            }
            OneFormField::Interior(u_field) => {
                let f = geo.soliton_potential.clone().ok_or_else(|| {
                    LabError::MissingPotential("W = U⌟df needs a soliton potential".into())
                })?;
                let u = u_field.build(geo)?;
                interior_field(&u, &geo.gradient(&f)?, geo.g_inv())
            }
        }
    }
}

/// `(U⌟V)_i = −U_ij g^{jk} V_k` for jet fields.
pub fn interior_field(
    u: &Tensor<Jet>,
    v: &Tensor<Jet>,
    g_inv: &Tensor<Jet>,
) -> Result<Tensor<Jet>> {
    let n = v.range().len();
    Ok(Tensor::from_fn(v.range(), vec![Variance::Down], |ix| {
        let terms: Vec<Jet> = index_tuples(n, 2)
            .map(|jk| u.get(&[ix[0], jk[0]]) * g_inv.get(&[jk[0], jk[1]]) * v.get(&[jk[1]]))
            .collect();
        -crate::jets::sum(&terms).expect("non-empty")
    }))
}

/// Residuals of the `U`/`W` soliton relations with `W = U⌟V`, `V = df`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UwResiduals {
    /// `|∇U|`, which must vanish for the other checks to be meaningful.
    pub parallel: Residual,
    /// `∇_i W_j + R_i^p U_{jp}`.
    pub w_gradient: Residual,
    /// `(ΔW_i − U_{ij} R^j_k V^k) − (ΔW_i + ½ ∇^p R U_{ip})`, the step that uses
    /// the contracted soliton identity.
    pub display_equivalence: Residual,
    /// `∂_t W_i − (ΔW_i − U_{ij} R^j_k V^k)`; only on plain Ricci flows.
    pub heat_display: Option<Residual>,
    /// `∂_t W_i − ΔW_i − ½ ∇^p R U_{ip}`; only on plain Ricci flows.
    pub heat: Option<Residual>,
}

/// Checks the relations satisfied by `W = U⌟V` for a parallel 2-form `U`.
pub fn soliton_uw_checks(
    s: &FlowSolution,
    field: &TwoFormField,
    p: &Point,
    order: usize,
    tolerance: f64,
) -> Result<UwResiduals> {
    let geo = s.geometry(p, order.max(4))?;
    let n = geo.dim();
    let f = geo.soliton_potential.clone().ok_or_else(|| {
        LabError::MissingPotential(format!("{} has no soliton potential", s.name))
    })?;
    let u = field.build(&geo)?;
    let nabla_u = geo.nabla(&u)?.values();
    let parallel = Residual::from_pairs(nabla_u.components().iter().map(|c| (*c, 0.0)));
    if !parallel.passes(tolerance) {
        return Err(LabError::NotParallel(parallel.abs));
    }

    let v = geo.gradient(&f)?;
    let g_inv = geo.g_inv();
    let w = interior_field(&u, &v, g_inv)?;

    let gi = g_inv.values().to_matrix();
    let ric = geo.ric.values().to_matrix();
    let uv = u.values().to_matrix();
    let v_up = &gi * vector(&v.values());
    let grad_r_up = &gi * vector(&geo.gradient(&geo.scalar)?.values());
    let ric_mixed = &ric * &gi; // R_i^p at (i, p)

    let nabla_w = geo.nabla(&w)?.values();
    let w_gradient = index_tuples(n, 2)
        .map(|ij| {
            let (i, j) = (ij[0], ij[1]);
            let a = *nabla_w.get(&[i, j]);
            let b: f64 = (0..n).map(|p| ric_mixed[(i, p)] * uv[(j, p)]).sum();
            Residual::vanishing(a + b, [a, b])
        })
        .collect();

    let lap_w = vector(&geo.laplacian(&w)?.values());
    let display_rhs = &lap_w - &uv * (&gi * (&ric * &v_up));
    let heat_rhs = &lap_w + (&uv * &grad_r_up) * 0.5;
    let display_equivalence =
        Residual::from_pairs(display_rhs.iter().copied().zip(heat_rhs.iter().copied()));

    let (heat_display, heat) = if s.mode.is_modified() {
        (None, None)
    } else {
        let dt_w: Vec<f64> = (0..n)
            .map(|i| w.get(&[i]).diff(0).map(|d| d.value()))
            .collect::<Result<_>>()?;
        (
            Some(Residual::from_pairs(
                dt_w.iter().copied().zip(display_rhs.iter().copied()),
            )),
            Some(Residual::from_pairs(
                dt_w.iter().copied().zip(heat_rhs.iter().copied()),
            )),
        )
    };
    Ok(UwResiduals {
        parallel,
        w_gradient,
        display_equivalence,
        heat_display,
        heat,
    })
}

/// `∇_i (V∧W)_{jk}` by the product rule, with `V∧W = ½(V⊗W − W⊗V)`, given
/// `∇_i V_j` and `∇_i W_j`.
pub fn wedge_gradient(
    v: &DVector<f64>,
    w: &DVector<f64>,
    nabla_v: &DMatrix<f64>,
    nabla_w: &DMatrix<f64>,
) -> Tensor<f64> {
    let n = v.len();
    Tensor::from_fn(IndexRange::Spatial(n), vec![Variance::Down; 3], |ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        0.5 * (nabla_v[(i, j)] * w[k] + v[j] * nabla_w[(i, k)]
            - nabla_w[(i, j)] * v[k]
            - w[j] * nabla_v[(i, k)])
    })
}

/// Substitutes `∇V = Ric` and `∇W = 0` into the product rule for `∇(V∧W)`
/// and compares with `½(R_ij W_k − R_ik W_j)`.
pub fn wedge_substitution_residual(
    ric: &DMatrix<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
) -> Residual {
    let n = v.len();
    let lhs = wedge_gradient(v, w, ric, &DMatrix::zeros(n, n));
    Residual::from_pairs(index_tuples(n, 3).map(|ix| {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        (
            *lhs.get(&ix),
            0.5 * (ric[(i, j)] * w[k] - ric[(i, k)] * w[j]),
        )
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::SolutionParams;

    fn sphere() -> FlowSolution {
        FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(2, 1.0)).unwrap()
    }

    #[test]
    fn rejects_non_antisymmetric_u() {
        let u = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(HarnackData::new(u, DVector::zeros(2)).is_err());
    }

    #[test]
    fn sphere_m_is_k_squared_g() {
        let p = Point::new([0.3, -0.6], 0.0);
        let t = HarnackTensors::at(&sphere(), &p, 5).unwrap();
        assert!((&t.m - &t.g).amax() < 1e-10);
        assert!(t.p.max_abs() < 1e-10);
    }

    #[test]
    fn sphere_z_with_unit_w_is_one() {
        let p = Point::new([0.5, 0.2], 0.0);
        let t = HarnackTensors::at(&sphere(), &p, 5).unwrap();
        let w = DVector::from_column_slice(&[1.0, 0.0]) * t.g[(0, 0)].sqrt();
        let d = HarnackData::new(DMatrix::zeros(2, 2), w).unwrap();
        assert!((t.z(&d, false).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sphere_trace_at_quarter() {
        let p = Point::new([0.0, 0.0], 0.25);
        let v = DVector::zeros(2);
        let val = trace_harnack(&sphere(), &p, &v, true, 5).unwrap();
        assert!((val - 32.0).abs() < 1e-9, "{val}");
        assert!(trace_harnack(&sphere(), &p.shifted(-0.25), &v, true, 5).is_err());
    }

    #[test]
    fn cigar_trace_vanishes_along_soliton_field() {
        let s = FlowSolution::make("cigar_flow", &SolutionParams::default()).unwrap();
        let p = Point::new([1.0, 0.0], 0.0);
        let v = DVector::from_column_slice(&[2.0, 0.0]);
        let val = trace_harnack(&s, &p, &v, false, 5).unwrap();
        assert!(val.abs() < 1e-10, "{val}");
    }

    #[test]
    fn wedge_substitution_is_exact() {
        let ric = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.3, 0.2, 2.0, -0.1, 0.3, -0.1, 0.5]);
        let v = DVector::from_column_slice(&[0.3, -1.0, 2.0]);
        let w = DVector::from_column_slice(&[1.5, 0.5, -0.7]);
        assert!(wedge_substitution_residual(&ric, &v, &w).abs < 1e-15);
    }

    #[test]
    fn volume_form_needs_surface() {
        let s = FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(3, 1.0)).unwrap();
        let r = soliton_uw_checks(
            &s,
            &TwoFormField::VolumeForm(1.0),
            &Point::new([0.0, 0.0, 0.0], 0.1),
            5,
            1e-9,
        );
        assert!(r.is_err());
    }

    #[test]
    fn cigar_uw_relations() {
        for name in ["cigar_static", "cigar_flow"] {
            let s = FlowSolution::make(name, &SolutionParams::default()).unwrap();
            let r = soliton_uw_checks(
                &s,
                &TwoFormField::VolumeForm(1.0),
                &Point::new([1.0, 0.0], 0.1),
                5,
                1e-9,
            )
            .unwrap();
            assert!(r.w_gradient.passes(1e-9), "{name} {r:?}");
            assert!(r.display_equivalence.passes(1e-9), "{name} {r:?}");
            if let Some(h) = r.heat {
                assert!(h.passes(1e-9), "{name} {r:?}");
                assert!(r.heat_display.unwrap().passes(1e-9));
            }
        }
    }
}
