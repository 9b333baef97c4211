//! The degenerate space-time metric and its connection.
//!
//! Space-time indices run over `0..=n` with index 0 for time; spatial index
//! `i` of the underlying solution becomes space-time index `i + 1`. Every
//! quantity at `(x, t)` with offset `τ` is built from the solution at
//! `(x, t + τ)`:
//!
//! * `g̃^{ij} = g^{ij}`, `g̃^{0•} = g̃^{•0} = 0`
//! * `Γ̃^k_{ij} = Γ^k_{ij}`, `Γ̃^0_{••} = 0`
//! * `Γ̃^k_{i0} = Γ̃^k_{0i} = −R_i^k + ∇_i∇^k f`
//! * `Γ̃^k_{00} = ∇^k(−½R + ∂_t f − ½|∇f|²)`
//!
//! with `f ≡ 0` for plain Ricci flows. The curvature is available by direct
//! differentiation of `Γ̃` and by closed forms assembled from spatial
//! quantities, so each identity is checked between two code paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::harnack::{HarnackData, HarnackTensors, OneFormField, TwoFormField};
use crate::jets::Jet;
use crate::residual::Residual;
use crate::solutions::{FlowSolution, Geometry, Point};
use crate::tensor::{
    contract_leading, covariant_derivative, curvature_from_connection, index_tuples, laplacian,
    raise, ricci, trace_with, Connection, IndexRange, Tensor, Variance,
};

/// The connection `Γ̃_τ` at one space-time point, with its direct curvature.
#[derive(Debug, Clone)]
pub struct SpacetimeConnection {
    pub tau: f64,
    /// The space-time point `(x, t)`.
    pub point: Point,
    /// Spatial geometry at `(x, t + τ)`.
    pub geo: Geometry,
    /// `g̃^{ab}`.
    pub g_inv: Tensor<Jet>,
    pub conn: Connection,
    /// `R̃_{abc}^d` from differentiating `Γ̃`.
    pub riem: Tensor<Jet>,
    /// `R̃_{bc} = Σ_a R̃_{abc}^a`.
    pub ric: Tensor<Jet>,
}

pub fn build_spacetime_connection(
    s: &FlowSolution,
    p: &Point,
    tau: f64,
    order: usize,
) -> Result<SpacetimeConnection> {
    if !(tau >= 0.0) {
        return Err(LabError::Domain(format!(
            "offset τ = {tau} must be non-negative"
        )));
    }
    let geo = s.geometry(&p.shifted(tau), order)?;
    SpacetimeConnection::from_geometry(p.clone(), tau, geo)
}

impl SpacetimeConnection {
    pub fn from_geometry(point: Point, tau: f64, geo: Geometry) -> Result<Self> {
        let n = geo.dim();
        let range = IndexRange::Spacetime(n);
        let zero = geo.zero();
        let f = geo.potential_or_zero();
        let gi = geo.g_inv();
        let g_inv = Tensor::from_fn(range, vec![Variance::Up; 2], |ix| {
            if ix[0] == 0 || ix[1] == 0 {
                zero.clone()
            } else {
                gi.get(&[ix[0] - 1, ix[1] - 1]).clone()
            }
        });

        // −R_i^k + ∇_i∇^k f at (i, k)
        let hess_f_mixed = raise(&geo.hessian(&f)?, 1, gi);
        let ric_mixed = geo.ric_mixed();
        let d3 = Tensor::from_fn(geo.range(), vec![Variance::Down, Variance::Up], |ix| {
            hess_f_mixed.get(ix) - ric_mixed.get(ix)
        });
        // ∇^k(−½R + ∂_t f − ½|∇f|²)
        let df = geo.gradient(&f)?;
        let grad_sq = trace_with(
            &Tensor::from_fn(geo.range(), vec![Variance::Down; 2], |ix| {
                df.get(&[ix[0]]) * df.get(&[ix[1]])
            }),
            gi,
        );
        let phi = geo.scalar.scale(-0.5) + f.diff(0)? - grad_sq.scale(0.5);
        let d4 = raise(&geo.gradient(&phi)?, 0, gi);

        let coeffs = Tensor::from_fn(
            range,
            vec![Variance::Up, Variance::Down, Variance::Down],
            |ix| match (ix[0], ix[1], ix[2]) {
                (0, _, _) => zero.clone(),
                (k, 0, 0) => d4.get(&[k - 1]).clone(),
                (k, 0, j) | (k, j, 0) => d3.get(&[j - 1, k - 1]).clone(),
                (k, i, j) => geo.conn.get(k - 1, i - 1, j - 1).clone(),
            },
        );
        let conn = Connection::new(coeffs)?;
        let riem = curvature_from_connection(&conn)?;
        let ric = ricci(&riem)?;
        Ok(SpacetimeConnection {
            tau,
            point,
            geo,
            g_inv,
            conn,
            riem,
            ric,
        })
    }

    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    pub fn range(&self) -> IndexRange {
        IndexRange::Spacetime(self.dim())
    }

    pub fn has_potential(&self) -> bool {
        self.geo.potential.is_some()
    }

    fn require_plain(&self, what: &str) -> Result<()> {
        if self.has_potential() {
            return Err(LabError::Config(format!(
                "{what} is only stated for plain Ricci flows (f ≡ 0)"
            )));
        }
        Ok(())
    }

    pub fn nabla(&self, t: &Tensor<Jet>) -> Result<Tensor<Jet>> {
        covariant_derivative(t, &self.conn)
    }

    /// `R̃ = g̃^{jk} R̃_{jk}`.
    pub fn scalar(&self) -> Jet {
        trace_with(&self.ric, &self.g_inv)
    }

    /// `∇̃_a ∇̃_b f`.
    pub fn hessian_f(&self) -> Result<Tensor<Jet>> {
        let f = self.geo.potential_or_zero();
        let range = self.range();
        let df = Tensor::try_from_fn(range, vec![Variance::Down], |ix| f.diff(range.var(ix[0])))?;
        self.nabla(&df)
    }

    /// Invariants of the degenerate metric: the time row and column vanish
    /// and the spatial block is `g^{-1}(x, t + τ)`.
    pub fn metric_defect(&self) -> f64 {
        let gi = self.geo.g_inv().values();
        let mut worst: f64 = 0.0;
        for (ix, v) in self.g_inv.values().iter_indexed() {
            let expect = if ix[0] == 0 || ix[1] == 0 {
                0.0
            } else {
                *gi.get(&[ix[0] - 1, ix[1] - 1])
            };
            worst = worst.max((v - expect).abs());
        }
        worst
    }
}

/// Point values of the spatial quantities entering the closed forms.
#[derive(Debug, Clone)]
pub struct SpatialValues {
    pub n: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `R_{ijk}^l`.
    pub riem: Tensor<f64>,
    pub ric: DMatrix<f64>,
    /// `R_i^l` at `(i, l)`.
    pub ric_mixed: DMatrix<f64>,
    /// `∇_a R_{ik}`.
    pub nabla_ric: Tensor<f64>,
    /// `∇_a R_i^l`.
    pub nabla_ric_mixed: Tensor<f64>,
    /// `∂_t R_i^l`.
    pub dt_ric_mixed: DMatrix<f64>,
    /// `ΔR_i^l`.
    pub lap_ric_mixed: DMatrix<f64>,
    /// `∇_i ∇^l R`.
    pub hess_r_mixed: DMatrix<f64>,
    pub grad_r: DVector<f64>,
    pub lap_r: f64,
    pub scalar: f64,
    pub dt_scalar: f64,
    /// `∇^p f`.
    pub grad_f_up: DVector<f64>,
    /// `∇_i ∇^l f`.
    pub hess_f_mixed: DMatrix<f64>,
}

impl SpatialValues {
    pub fn new(geo: &Geometry) -> Result<Self> {
        let n = geo.dim();
        let gi = geo.g_inv();
        let f = geo.potential_or_zero();
        let ric_mixed_j = geo.ric_mixed();
        let grad_r = geo.gradient(&geo.scalar)?;
        let lap_r = trace_with(&geo.hessian(&geo.scalar)?, gi).value();
        let dt_ric_mixed =
            Tensor::try_from_fn(geo.range(), vec![Variance::Down, Variance::Up], |ix| {
                ric_mixed_j.get(ix).diff(0)
            })?;
        Ok(SpatialValues {
            n,
            g: geo.g().values().to_matrix(),
            g_inv: gi.values().to_matrix(),
            riem: geo.riem.values(),
            ric: geo.ric.values().to_matrix(),
            ric_mixed: ric_mixed_j.values().to_matrix(),
            nabla_ric: geo.nabla(&geo.ric)?.values(),
            nabla_ric_mixed: geo.nabla(&ric_mixed_j)?.values(),
            dt_ric_mixed: dt_ric_mixed.values().to_matrix(),
            lap_ric_mixed: geo.laplacian(&ric_mixed_j)?.values().to_matrix(),
            hess_r_mixed: raise(&geo.hessian(&geo.scalar)?, 1, gi)
                .values()
                .to_matrix(),
            grad_r: DVector::from_column_slice(grad_r.values().components()),
            lap_r,
            scalar: geo.scalar.value(),
            dt_scalar: geo.scalar.diff(0)?.value(),
            grad_f_up: DVector::from_column_slice(
                raise(&geo.gradient(&f)?, 0, gi).values().components(),
            ),
            hess_f_mixed: raise(&geo.hessian(&f)?, 1, gi).values().to_matrix(),
        })
    }

    fn r(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        *self.riem.get(&[i, j, k, l])
    }

    /// `∇^l R_{ik} = g^{lm} ∇_m R_{ik}`.
    pub fn nabla_up_ric(&self, l: usize, i: usize, k: usize) -> f64 {
        (0..self.n)
            .map(|m| self.g_inv[(l, m)] * self.nabla_ric.get(&[m, i, k]))
            .sum()
    }

    fn dric(&self, a: usize, i: usize, l: usize) -> f64 {
        *self.nabla_ric_mixed.get(&[a, i, l])
    }

    /// `P_{ipq} = ∇_i R_{pq} − ∇_p R_{iq}`.
    fn p(&self, i: usize, p: usize, q: usize) -> f64 {
        self.nabla_ric.get(&[i, p, q]) - self.nabla_ric.get(&[p, i, q])
    }

    /// `|Ric|² = R_i^l R_l^i`.
    pub fn ric_norm_sq(&self) -> f64 {
        (&self.ric_mixed * &self.ric_mixed).trace()
    }

    /// `R_{ijp}^l ∇^p f`.
    fn riem_grad_f(&self, i: usize, j: usize, l: usize) -> f64 {
        (0..self.n)
            .map(|p| self.r(i, j, p, l) * self.grad_f_up[p])
            .sum()
    }

    /// `−∇_i R_j^l + ∇_j R_i^l`.
    pub fn b3(&self, i: usize, j: usize, l: usize) -> f64 {
        -self.dric(i, j, l) + self.dric(j, i, l)
    }

    /// `−∇^l R_{ik} + ∇_k R_i^l`.
    pub fn b4(&self, i: usize, k: usize, l: usize) -> f64 {
        -self.nabla_up_ric(l, i, k) + self.dric(k, i, l)
    }

    /// `2 g^{lm} R_{pim}^q R_q^p`.
    fn quad(&self, i: usize, l: usize) -> f64 {
        let n = self.n;
        let mut acc = 0.0;
        for m in 0..n {
            let mut inner = 0.0;
            for p in 0..n {
                for q in 0..n {
                    inner += self.r(p, i, m, q) * self.ric_mixed[(q, p)];
                }
            }
            acc += self.g_inv[(l, m)] * inner;
        }
        2.0 * acc
    }

    /// `ΔR_i^l − ½∇_i∇^l R + 2g^{lm} R_{pim}^q R_q^p − R_m^l R_i^m`.
    pub fn b5_elliptic(&self, i: usize, l: usize) -> f64 {
        let rr = (&self.ric_mixed * &self.ric_mixed)[(i, l)];
        self.lap_ric_mixed[(i, l)] - 0.5 * self.hess_r_mixed[(i, l)] + self.quad(i, l) - rr
    }

    /// `∂_t R_i^l − ½∇_i∇^l R − R_i^m R_m^l`.
    pub fn b5_parabolic(&self, i: usize, l: usize) -> f64 {
        let rr = (&self.ric_mixed * &self.ric_mixed)[(i, l)];
        self.dt_ric_mixed[(i, l)] - 0.5 * self.hess_r_mixed[(i, l)] - rr
    }

    pub fn e3(&self, i: usize, j: usize, l: usize) -> f64 {
        self.b3(i, j, l) + self.riem_grad_f(i, j, l)
    }

    /// `−∇^l R_{ik} + ∇_k R_i^l + R_{ipk}^l ∇^p f`.
    pub fn e3_prime(&self, i: usize, k: usize, l: usize) -> f64 {
        let extra: f64 = (0..self.n)
            .map(|p| self.r(i, p, k, l) * self.grad_f_up[p])
            .sum();
        self.b4(i, k, l) + extra
    }

    /// `R_{ipq}^l ∇^p f ∇^q f`.
    fn riem_ff(&self, i: usize, l: usize) -> f64 {
        let (n, df) = (self.n, &self.grad_f_up);
        let mut acc = 0.0;
        for p in 0..n {
            for q in 0..n {
                acc += self.r(i, p, q, l) * df[p] * df[q];
            }
        }
        acc
    }

    /// First (parabolic) expression for `R̃_{i00}^l` with a potential.
    pub fn e4_parabolic(&self, i: usize, l: usize) -> f64 {
        let (n, df) = (self.n, &self.grad_f_up);
        let rr = (&self.ric_mixed * &self.ric_mixed)[(i, l)];
        let mut acc = self.dt_ric_mixed[(i, l)] - 0.5 * self.hess_r_mixed[(i, l)] - rr;
        for p in 0..n {
            acc -= df[p] * self.dric(p, i, l);
            acc -= (self.dric(i, p, l) - self.dric(p, i, l)) * df[p];
            acc -= (self.nabla_up_ric(l, i, p) - self.dric(p, i, l)) * df[p];
            acc += self.ric_mixed[(i, p)] * self.hess_f_mixed[(p, l)];
            acc -= self.ric_mixed[(p, l)] * self.hess_f_mixed[(i, p)];
        }
        acc + self.riem_ff(i, l)
    }

    /// Second (elliptic) expression for `R̃_{i00}^l` with a potential.
    pub fn e4_elliptic(&self, i: usize, l: usize) -> f64 {
        let (n, df) = (self.n, &self.grad_f_up);
        let mut acc = self.b5_elliptic(i, l);
        for p in 0..n {
            for q in 0..n {
                acc -= self.g_inv[(q, l)] * (self.p(i, p, q) + self.p(q, p, i)) * df[p];
            }
        }
        acc + self.riem_ff(i, l)
    }

    /// `½∇_j R + R_{jp} ∇^p f`.
    pub fn f2(&self, j: usize) -> f64 {
        0.5 * self.grad_r[j]
            + (0..self.n)
                .map(|p| self.ric[(j, p)] * self.grad_f_up[p])
                .sum::<f64>()
    }

    fn grad_r_dot_grad_f(&self) -> f64 {
        self.grad_r.dot(&self.grad_f_up)
    }

    fn ric_ff(&self) -> f64 {
        self.grad_f_up.dot(&(&self.ric * &self.grad_f_up))
    }

    /// `½∂_t R + R_{pq}∇^p f∇^q f + ∇^p R ∇_p f`, as printed.
    pub fn f3_parabolic(&self) -> f64 {
        0.5 * self.dt_scalar + self.ric_ff() + self.grad_r_dot_grad_f()
    }

    /// `½∂_t R + R_{pq}∇^p f∇^q f + ½∇^p R ∇_p f`, the value the trace of the
    /// parabolic `R̃_{i00}^l` expression actually produces.
    pub fn f3_parabolic_traced(&self) -> f64 {
        0.5 * self.dt_scalar + self.ric_ff() + 0.5 * self.grad_r_dot_grad_f()
    }

    /// `½ΔR + |Ric|² + ∇^p R ∇_p f + R_{pq}∇^p f∇^q f`.
    pub fn f3_elliptic(&self) -> f64 {
        0.5 * self.lap_r + self.ric_norm_sq() + self.grad_r_dot_grad_f() + self.ric_ff()
    }
}

/// Which closed-form family to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosedForm {
    /// Plain-flow expressions; they ignore the potential.
    Plain,
    /// Expressions including the potential terms.
    Modified,
}

/// Which of the two displayed expressions to use for `R̃_{i00}^l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeForm {
    /// Uses `ΔR_i^l` and `P`.
    Elliptic,
    /// Uses `∂_t R_i^l`.
    Parabolic,
}

/// Block of a curvature component `R̃_{abc}^d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CurvatureBlock {
    /// All indices spatial.
    Spatial,
    /// Upper index 0.
    UpperTime,
    /// `(i, j, 0)`.
    Mixed,
    /// `(i, 0, k)` and `(0, i, k)`.
    MixedPrime,
    /// `(i, 0, 0)` and `(0, i, 0)`.
    TimeTime,
    /// `(0, 0, •)`, zero by antisymmetry.
    Degenerate,
}

pub fn curvature_block(ix: &[usize]) -> CurvatureBlock {
    let t = |a: usize| a == 0;
    match (t(ix[0]), t(ix[1]), t(ix[2]), t(ix[3])) {
        (_, _, _, true) => CurvatureBlock::UpperTime,
        (true, true, _, _) => CurvatureBlock::Degenerate,
        (false, false, false, _) => CurvatureBlock::Spatial,
        (false, false, true, _) => CurvatureBlock::Mixed,
        (_, _, false, _) => CurvatureBlock::MixedPrime,
        (_, _, true, _) => CurvatureBlock::TimeTime,
    }
}

/// Closed-form `R̃_{abc}^d` assembled from spatial quantities.
pub fn closed_form_curvature(
    c: &SpacetimeConnection,
    family: ClosedForm,
    time_form: TimeForm,
) -> Result<Tensor<f64>> {
    let sv = SpatialValues::new(&c.geo)?;
    Ok(closed_form_from_values(&sv, c.range(), family, time_form))
}

pub fn closed_form_from_values(
    sv: &SpatialValues,
    range: IndexRange,
    family: ClosedForm,
    time_form: TimeForm,
) -> Tensor<f64> {
    let modified = family == ClosedForm::Modified;
    let mixed = |i: usize, j: usize, l: usize| {
        if modified {
            sv.e3(i, j, l)
        } else {
            sv.b3(i, j, l)
        }
    };
    let mixed_prime = |i: usize, k: usize, l: usize| {
        if modified {
            sv.e3_prime(i, k, l)
        } else {
            sv.b4(i, k, l)
        }
    };
    let time_time = |i: usize, l: usize| match (modified, time_form) {
        (false, TimeForm::Elliptic) => sv.b5_elliptic(i, l),
        (false, TimeForm::Parabolic) => sv.b5_parabolic(i, l),
        (true, TimeForm::Elliptic) => sv.e4_elliptic(i, l),
        (true, TimeForm::Parabolic) => sv.e4_parabolic(i, l),
    };
    Tensor::from_fn(
        range,
        vec![Variance::Down, Variance::Down, Variance::Down, Variance::Up],
        |ix| {
            let (a, b, cc, d) = (ix[0], ix[1], ix[2], ix[3]);
            if d == 0 {
                return 0.0;
            }
            let l = d - 1;
            match (a, b, cc) {
                (0, 0, _) => 0.0,
                (i, 0, 0) => time_time(i - 1, l),
                (0, i, 0) => -time_time(i - 1, l),
                (i, j, 0) => mixed(i - 1, j - 1, l),
                (i, 0, k) => mixed_prime(i - 1, k - 1, l),
                (0, j, k) => -mixed_prime(j - 1, k - 1, l),
                (i, j, k) => *sv.riem.get(&[i - 1, j - 1, k - 1, l]),
            }
        },
    )
}

/// Per-block comparison of two curvature tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureComparison {
    pub blocks: Vec<(CurvatureBlock, Residual)>,
}

impl CurvatureComparison {
    pub fn new(a: &Tensor<f64>, b: &Tensor<f64>) -> Self {
        let mut map: std::collections::BTreeMap<CurvatureBlock, Vec<(f64, f64)>> =
            Default::default();
        for (ix, v) in a.iter_indexed() {
            map.entry(curvature_block(&ix))
                .or_default()
                .push((*v, *b.get(&ix)));
        }
        CurvatureComparison {
            blocks: map
                .into_iter()
                .map(|(k, pairs)| (k, Residual::from_pairs(pairs)))
                .collect(),
        }
    }

    pub fn block(&self, which: CurvatureBlock) -> Residual {
        self.blocks
            .iter()
            .find(|(k, _)| *k == which)
            .map(|(_, r)| *r)
            .unwrap_or(Residual::ZERO)
    }

    pub fn worst(&self) -> Residual {
        self.blocks.iter().map(|(_, r)| *r).collect()
    }
}

/// Direct curvature against the closed forms appropriate to the solution.
pub fn compare_curvature(
    c: &SpacetimeConnection,
    time_form: TimeForm,
) -> Result<CurvatureComparison> {
    let family = if c.has_potential() {
        ClosedForm::Modified
    } else {
        ClosedForm::Plain
    };
    let closed = closed_form_curvature(c, family, time_form)?;
    Ok(CurvatureComparison::new(&c.riem.values(), &closed))
}

/// Space-time Ricci tensor against its closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RicciResiduals {
    /// Spatial block against `R_{ij}`.
    pub spatial: Residual,
    /// `R̃_{0j}` and `R̃_{j0}` against `½∇_j R + R_{jp}∇^p f`.
    pub mixed: Residual,
    /// `R̃_{00}` against the parabolic expression as printed.
    pub time_parabolic: Residual,
    /// `R̃_{00}` against `½∂_t R + R(∇f, ∇f) + ½⟨∇R, ∇f⟩`.
    pub time_parabolic_traced: Residual,
    /// `R̃_{00}` against the elliptic expression.
    pub time_elliptic: Residual,
    /// `g̃^{jk} R̃_{jk}` against `R(x, t + τ)`.
    pub scalar: Residual,
}

pub fn spacetime_ricci(c: &SpacetimeConnection) -> Result<RicciResiduals> {
    let sv = SpatialValues::new(&c.geo)?;
    let n = c.dim();
    let ric = c.ric.values();
    let spatial = Residual::from_pairs(
        index_tuples(n, 2).map(|ix| (*ric.get(&[ix[0] + 1, ix[1] + 1]), sv.ric[(ix[0], ix[1])])),
    );
    let mixed = Residual::from_pairs((0..n).flat_map(|j| {
        [
            (*ric.get(&[0, j + 1]), sv.f2(j)),
            (*ric.get(&[j + 1, 0]), sv.f2(j)),
        ]
    }));
    let r00 = *ric.get(&[0, 0]);
    Ok(RicciResiduals {
        spatial,
        mixed,
        time_parabolic: Residual::from_pairs([(r00, sv.f3_parabolic())]),
        time_parabolic_traced: Residual::from_pairs([(r00, sv.f3_parabolic_traced())]),
        time_elliptic: Residual::from_pairs([(r00, sv.f3_elliptic())]),
        scalar: Residual::from_pairs([(c.scalar().value(), sv.scalar)]),
    })
}

/// Metric compatibility `|∇̃ g̃|` and torsion of `Γ̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompatibilityResiduals {
    pub compatibility: Residual,
    pub torsion: f64,
    /// `Γ̃^0_{ab}`, which must vanish.
    pub time_christoffel: f64,
}

pub fn compatibility_and_torsion(c: &SpacetimeConnection) -> Result<CompatibilityResiduals> {
    let ng = c.nabla(&c.g_inv)?.values();
    let compatibility = Residual::from_pairs(ng.components().iter().map(|v| (*v, 0.0)));
    let len = c.range().len();
    let time_christoffel = index_tuples(len, 2)
        .map(|ix| c.conn.get(0, ix[0], ix[1]).value().abs())
        .fold(0.0, f64::max);
    Ok(CompatibilityResiduals {
        compatibility,
        torsion: c.conn.torsion(),
        time_christoffel,
    })
}

/// The four blocks of `Γ̃` against values assembled independently: the
/// spatial block against `½g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij)` from metric
/// partials, `Γ̃^0_{ab}` against zero, `Γ̃^k_{i0}` against
/// `−R_i^k + ∇_i∇^k f` and `Γ̃^k_{00}` against
/// `−½∇^k R + ∇^k ∂_t f − ∇^p f ∇_p∇^k f`.
pub fn connection_blocks(c: &SpacetimeConnection) -> Result<[Residual; 4]> {
    let n = c.dim();
    let geo = &c.geo;
    let sv = SpatialValues::new(geo)?;
    let g = geo.g();
    let mut dg = vec![0.0; n * n * n];
    for a in 0..n {
        for i in 0..n {
            for j in 0..n {
                dg[(a * n + i) * n + j] = g.get(&[i, j]).diff(a + 1)?.value();
            }
        }
    }
    let d = |a: usize, i: usize, j: usize| dg[(a * n + i) * n + j];
    let value = |k: usize, i: usize, j: usize| c.conn.get(k, i, j).value();
    let mut spatial = Vec::new();
    let mut time = Vec::new();
    let mut mixed = Vec::new();
    for ix in index_tuples(n, 3) {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        let expect: f64 = (0..n)
            .map(|l| 0.5 * sv.g_inv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j)))
            .sum();
        spatial.push((value(k + 1, i + 1, j + 1), expect));
    }
    for ix in index_tuples(n + 1, 2) {
        time.push((value(0, ix[0], ix[1]), 0.0));
    }
    for ix in index_tuples(n, 2) {
        let (i, k) = (ix[0], ix[1]);
        let expect = sv.hess_f_mixed[(i, k)] - sv.ric_mixed[(i, k)];
        mixed.push((value(k + 1, i + 1, 0), expect));
        mixed.push((value(k + 1, 0, i + 1), expect));
    }
    let f = geo.potential_or_zero();
    let dt_f = f.diff(0)?;
    let grad_dt_f = DVector::from_iterator(
        n,
        (0..n)
            .map(|l| dt_f.diff(l + 1).map(|j| j.value()))
            .collect::<Result<Vec<_>>>()?,
    );
    let grad_dt_f_up = &sv.g_inv * grad_dt_f;
    let grad_r_up = &sv.g_inv * &sv.grad_r;
    let double = (0..n)
        .map(|k| {
            let quad: f64 = (0..n)
                .map(|p| sv.hess_f_mixed[(p, k)] * sv.grad_f_up[p])
                .sum();
            let expect = -0.5 * grad_r_up[k] + grad_dt_f_up[k] - quad;
            (value(k + 1, 0, 0), expect)
        })
        .collect::<Vec<_>>();
    Ok([
        Residual::from_pairs(spatial),
        Residual::from_pairs(time),
        Residual::from_pairs(mixed),
        Residual::from_pairs(double),
    ])
}

/// Residuals of the degenerate (modified) Ricci flow system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegenerateFlowResiduals {
    /// `∂_t g̃^{ij} − 2g̃^{ik}g̃^{jl}(R̃_{kl} − ∇̃_k∇̃_l f)`.
    pub metric: Residual,
    /// Connection equation, all lower indices spatial.
    pub spatial: Residual,
    /// Connection equation with exactly one lower index 0.
    pub case1: Residual,
    /// Connection equation with both lower indices 0.
    pub case2: Residual,
    /// Connection equation for the upper index 0 (both sides vanish).
    pub upper_time: Residual,
}

pub fn degenerate_flow_residual(c: &SpacetimeConnection) -> Result<DegenerateFlowResiduals> {
    let len = c.range().len();
    let hess = c.hessian_f()?;
    let s_t = Tensor::from_fn(c.range(), vec![Variance::Down; 2], |ix| {
        c.ric.get(ix) - hess.get(ix)
    });
    let s = s_t.values();
    let ns = c.nabla(&s_t)?.values();
    let gi = c.g_inv.values();

    let mut metric_pairs = Vec::new();
    for ix in index_tuples(len, 2) {
        let (i, j) = (ix[0], ix[1]);
        let lhs = c.g_inv.get(&ix).diff(0)?.value();
        let mut rhs = 0.0;
        for kl in index_tuples(len, 2) {
            rhs += 2.0 * gi.get(&[i, kl[0]]) * gi.get(&[j, kl[1]]) * s.get(&kl);
        }
        metric_pairs.push((lhs, rhs));
    }

    let (mut spatial, mut case1, mut case2, mut upper) = (vec![], vec![], vec![], vec![]);
    for ix in index_tuples(len, 3) {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        let lhs = c.conn.get(k, i, j).diff(0)?.value();
        let mut rhs = 0.0;
        for l in 0..len {
            rhs -= gi.get(&[k, l]) * (ns.get(&[i, j, l]) + ns.get(&[j, i, l]) - ns.get(&[l, i, j]));
        }
        let bucket = match (k, i == 0, j == 0) {
            (0, _, _) => &mut upper,
            (_, false, false) => &mut spatial,
            (_, true, true) => &mut case2,
            _ => &mut case1,
        };
        bucket.push((lhs, rhs));
    }
    let field = s.max_abs();
    let scaled = |pairs: Vec<(f64, f64)>| Residual::from_pairs(pairs).with_magnitude(field);
    Ok(DegenerateFlowResiduals {
        metric: Residual::from_pairs(metric_pairs),
        spatial: scaled(spatial),
        case1: scaled(case1),
        case2: scaled(case2),
        upper_time: scaled(upper),
    })
}

/// `R̃m(T, T)` against `Z`, with `T = U ⊕ W` embedded as
/// `T_i^j = g^{jp} U_{ip}`, `T_i^0 = W_i`, `T_0^• = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackCurvature {
    pub rm_tt: f64,
    pub z: f64,
    pub difference: Residual,
    /// The four-term split by time/space blocks, against `rm_tt`.
    pub expansion: Residual,
    /// The four terms rebuilt from spatial closed forms, against `rm_tt`.
    pub closed_expansion: Residual,
}

/// `T_a^b` as an `(n+1) × (n+1)` matrix.
pub fn embed_t(d: &HarnackData, g_inv: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.w.len();
    let ug = &d.u * g_inv;
    DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, _) => 0.0,
        (i, 0) => d.w[i - 1],
        (i, j) => ug[(i - 1, j - 1)],
    })
}

/// `Σ g̃^{ip} R̃_{pjk}^l T_i^j T_l^k`, with the partial sums split by
/// whether `j` and `k` are 0.
pub fn curvature_pairing(
    riem: &Tensor<f64>,
    g_inv: &Tensor<f64>,
    t: &DMatrix<f64>,
) -> (f64, [f64; 4]) {
    let len = t.nrows();
    let mut blocks = [0.0f64; 4];
    let mut total = 0.0;
    for ix in index_tuples(len, 4) {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let (tij, tlk) = (t[(i, j)], t[(l, k)]);
        if tij == 0.0 || tlk == 0.0 {
            continue;
        }
        let raised: f64 = (0..len)
            .map(|p| g_inv.get(&[i, p]) * riem.get(&[p, j, k, l]))
            .sum();
        let term = raised * tij * tlk;
        total += term;
        blocks[(j == 0) as usize * 2 + (k == 0) as usize] += term;
    }
    (total, blocks)
}

pub fn harnack_equals_curvature(
    c: &SpacetimeConnection,
    d: &HarnackData,
) -> Result<HarnackCurvature> {
    c.require_plain("the curvature/Harnack identity")?;
    let n = c.dim();
    if d.w.len() != n {
        return Err(LabError::Shape(
            "Harnack data has the wrong dimension".into(),
        ));
    }
    let sv = SpatialValues::new(&c.geo)?;
    let t = embed_t(d, &sv.g_inv);
    let (rm_tt, blocks) = curvature_pairing(&c.riem.values(), &c.g_inv.values(), &t);
    let expansion_sum: f64 = blocks.iter().sum();

    // the same four terms from spatial closed forms
    let gi = &sv.g_inv;
    let u_mixed = t.view((1, 1), (n, n)).into_owned();
    let w = &d.w;
    let mut closed = [0.0f64; 4];
    for ix in index_tuples(n, 4) {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let r_up: f64 = (0..n)
            .map(|p| gi[(i, p)] * sv.riem.get(&[p, j, k, l]))
            .sum();
        closed[0] += r_up * u_mixed[(i, j)] * u_mixed[(l, k)];
    }
    // ∇^i R_j^l and ∇_j R^{il}
    let up_a = |i: usize, j: usize, l: usize| -> f64 {
        (0..n)
            .map(|a| gi[(i, a)] * sv.nabla_ric_mixed.get(&[a, j, l]))
            .sum()
    };
    let r_up_up = |j: usize, i: usize, l: usize| -> f64 {
        (0..n)
            .map(|m| gi[(m, i)] * sv.nabla_ric_mixed.get(&[j, m, l]))
            .sum()
    };
    for ix in index_tuples(n, 3) {
        let (i, j, l) = (ix[0], ix[1], ix[2]);
        closed[1] += (-up_a(i, j, l) + r_up_up(j, i, l)) * u_mixed[(i, j)] * w[l];
        let k = j;
        closed[2] += (-up_a(l, k, i) + r_up_up(k, i, l)) * w[i] * u_mixed[(l, k)];
    }
    for ix in index_tuples(n, 2) {
        let (i, l) = (ix[0], ix[1]);
        let m_up: f64 = (0..n).map(|a| gi[(i, a)] * sv.b5_elliptic(a, l)).sum();
        closed[3] += m_up * w[i] * w[l];
    }
    let closed_sum: f64 = closed.iter().sum();

    let z = HarnackTensors::from_geometry(&c.geo)?.z(d, false)?;
    let terms = blocks
        .iter()
        .chain(&closed)
        .map(|v| v.abs())
        .fold(rm_tt.abs(), f64::max);
    Ok(HarnackCurvature {
        rm_tt,
        z,
        difference: Residual::from_pairs([(rm_tt, z)]),
        expansion: Residual::vanishing(rm_tt - expansion_sum, [terms]),
        closed_expansion: Residual::vanishing(rm_tt - closed_sum, [terms]),
    })
}

/// Residuals of the Bianchi-type identities on space-time.
#[derive(Debug, Clone, PartialEq)]
pub struct BianchiResiduals {
    /// The five members of the contracted chain
    /// `½∂_t R = ½∇̃_0 R̃ = g̃^{ij}∇̃_i R̃_{j0} = ∇^j(½∇_j R) − g^{ij}Γ̃^m_{i0}R̃_{jm} = ½ΔR + |Ric|²`;
    /// plain flows only.
    pub scalar_chain: Option<[f64; 5]>,
    pub scalar: Option<Residual>,
    /// `∇̃_0 R̃_{ijk}^l + ∇̃_i R̃_{j0k}^l + ∇̃_j R̃_{0ik}^l`.
    pub second: Residual,
    /// The four commutation identities for `R̃_{•0•}^k`, as equalities.
    pub lemma: [Residual; 4],
    /// Items 3 and 4 compared with zero: `(left side, right side)` each.
    pub lemma_zero: [Residual; 2],
    /// The four derivative-symmetry identities for `R̃ic − ∇̃∇̃f`.
    pub corollary: [Residual; 4],
    /// The unified form over all space-time indices.
    pub unified: Residual,
}

pub fn bianchi_identity_residuals(c: &SpacetimeConnection) -> Result<BianchiResiduals> {
    let n = c.dim();
    let len = n + 1;
    let sv = SpatialValues::new(&c.geo)?;
    let riem = c.riem.values();
    let nr = c.nabla(&c.riem)?.values();
    let gt = c.g_inv.values();
    let ric_mixed_t = raise(&c.ric, 1, &c.g_inv);
    let n_ric = c.nabla(&c.ric)?.values();
    let n_ric_mixed = c.nabla(&ric_mixed_t)?.values();
    let df = &sv.grad_f_up;
    let g = &sv.g;

    let scalar_chain = if c.has_potential() {
        None
    } else {
        let half_dt = 0.5 * sv.dt_scalar;
        let half_nabla0 = 0.5 * c.scalar().diff(0)?.value();
        let mut div_r0 = 0.0;
        for ix in index_tuples(len, 2) {
            div_r0 += gt.get(&ix) * n_ric.get(&[ix[0], ix[1], 0]);
        }
        let ric_t = c.ric.values();
        let mut expanded = 0.5 * sv.lap_r;
        for ix in index_tuples(n, 2) {
            let (i, j) = (ix[0], ix[1]);
            for m in 1..len {
                expanded -=
                    sv.g_inv[(i, j)] * c.conn.get(m, i + 1, 0).value() * ric_t.get(&[j + 1, m]);
            }
        }
        let evolved = 0.5 * sv.lap_r + sv.ric_norm_sq();
        Some([half_dt, half_nabla0, div_r0, expanded, evolved])
    };
    let scalar = scalar_chain.map(|v| Residual::from_pairs(v[1..].iter().map(|x| (v[0], *x))));

    let mut second = Vec::new();
    for ix in index_tuples(n, 2) {
        let (i, j) = (ix[0] + 1, ix[1] + 1);
        for kl in index_tuples(len, 2) {
            let (k, l) = (kl[0], kl[1]);
            let terms = [
                *nr.get(&[0, i, j, k, l]),
                *nr.get(&[i, j, 0, k, l]),
                *nr.get(&[j, 0, i, k, l]),
            ];
            second.push(Residual::vanishing(terms.iter().sum(), terms));
        }
    }
    let riem_size = riem.max_abs();
    let second = second
        .into_iter()
        .collect::<Residual>()
        .with_magnitude(riem_size);

    // rhs(i, j, k) = ∇̃_j R̃_i^k − ∇̃^k R̃_{ij} + Σ_p R̃_{ipj}^k ∇^p f, with k spatial
    let rhs = |i: usize, j: usize, k: usize| -> f64 {
        let up: f64 = (0..len)
            .map(|m| gt.get(&[k, m]) * n_ric.get(&[m, i, j]))
            .sum();
        let f_term: f64 = (0..n).map(|p| riem.get(&[i, p + 1, j, k]) * df[p]).sum();
        n_ric_mixed.get(&[j, i, k]) - up + f_term
    };
    let mut lemma_pairs: [Vec<(f64, f64)>; 4] = Default::default();
    for ix in index_tuples(len, 3) {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        if k == 0 {
            continue;
        }
        let item = match (i == 0, j == 0) {
            (false, false) => 0,
            (false, true) => 1,
            (true, false) => 2,
            (true, true) => 3,
        };
        lemma_pairs[item].push((*riem.get(&[i, 0, j, k]), rhs(i, j, k)));
    }
    let ric_size = c.ric.values().max_abs();
    let lemma = lemma_pairs
        .clone()
        .map(|pairs| Residual::from_pairs(pairs).with_magnitude(ric_size));
    let zero_of = |pairs: &Vec<(f64, f64)>| {
        Residual::from_pairs(pairs.iter().flat_map(|(a, b)| [(*a, 0.0), (*b, 0.0)]))
            .with_magnitude(ric_size)
    };
    let lemma_zero = [zero_of(&lemma_pairs[2]), zero_of(&lemma_pairs[3])];

    let hess = c.hessian_f()?;
    let s_t = Tensor::from_fn(c.range(), vec![Variance::Down; 2], |ix| {
        c.ric.get(ix) - hess.get(ix)
    });
    let ns = c.nabla(&s_t)?.values();
    let s_size = s_t.values().max_abs();
    // R̃_{kj0i} = g_{pi} R̃_{kj0}^p for spatial i, 0 for i = 0
    let lowered = |k: usize, j: usize, i: usize| -> f64 {
        if i == 0 {
            0.0
        } else {
            (0..n)
                .map(|p| g[(p, i - 1)] * riem.get(&[k, j, 0, p + 1]))
                .sum()
        }
    };
    let mut unified = Vec::new();
    let mut items: [Vec<(f64, f64)>; 4] = Default::default();
    for ix in index_tuples(len, 3) {
        let (i, j, k) = (ix[0], ix[1], ix[2]);
        let lhs = *ns.get(&[j, k, i]);
        let rhs_u = ns.get(&[k, j, i]) + lowered(k, j, i);
        unified.push((lhs, rhs_u));
        if k == 0 {
            continue;
        }
        match (i == 0, j == 0) {
            (false, false) => items[0].push((lhs, rhs_u)),
            (false, true) => {
                // ∇̃_0 S_{ki} = ∇̃_k S_{0i} + g_{pk} R̃_{i00}^p
                let tt: f64 = (0..n)
                    .map(|p| g[(p, k - 1)] * riem.get(&[i, 0, 0, p + 1]))
                    .sum();
                items[1].push((*ns.get(&[0, k, i]), ns.get(&[k, 0, i]) + tt));
            }
            (true, false) => items[2].push((*ns.get(&[j, 0, k]), *ns.get(&[k, 0, j]))),
            (true, true) => items[3].push((*ns.get(&[0, 0, k]), *ns.get(&[k, 0, 0]))),
        }
    }
    Ok(BianchiResiduals {
        scalar_chain,
        scalar,
        second,
        lemma,
        lemma_zero,
        corollary: items.map(|pairs| Residual::from_pairs(pairs).with_magnitude(s_size)),
        unified: Residual::from_pairs(unified).with_magnitude(s_size),
    })
}

/// Space-time derivatives of `T = U ⊕ W` against the spatial expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TDerivativeResiduals {
    /// `∇̃_a T_{ij}` against `∇_a U_{ij}`.
    pub u_gradient: Residual,
    /// `∇̃_a T_{i0}` against `∇_a W_i + R_a^p U_{ip}`.
    pub w_gradient: Residual,
    /// `(D_t − Δ̃)T_{ij}` against `∂_t U_ij + R_i^m U_mj + R_j^m U_im − ΔU_ij`.
    pub u_heat: Residual,
    /// `(D_t − Δ̃)T_{i0}` against `∂_t W_i + R_i^m W_m − ΔW_i − ½∇^p R U_{ip}`.
    pub w_heat: Residual,
    /// `max |∇U|`; the time blocks coincide only for parallel `U`.
    pub u_parallel: f64,
}

/// Compares space-time derivatives of `T` with the spatial equations for
/// `U` and `W`. `T` is treated as the space-time 2-form `T_{ij} = U_{ij}`,
/// `T_{i0} = −T_{0i} = W_i`. Time derivatives are taken in a frame that
/// moves with the metric, so spatial slots pick up `R_i^m` terms while the
/// time slot does not.
pub fn spacetime_t_derivatives(
    c: &SpacetimeConnection,
    u_field: &TwoFormField,
    w_field: &OneFormField,
) -> Result<TDerivativeResiduals> {
    c.require_plain("the U/W heat-equation correspondence")?;
    let n = c.dim();
    let len = n + 1;
    let geo = &c.geo;
    let u = u_field.build(geo)?;
    let w = w_field.build(geo)?;
    let zero = geo.zero();
    let t = Tensor::from_fn(c.range(), vec![Variance::Down; 2], |ix| {
        match (ix[0], ix[1]) {
            (0, 0) => zero.clone(),
            (i, 0) => w.get(&[i - 1]).clone(),
            (0, j) => -w.get(&[j - 1]),
            (i, j) => u.get(&[i - 1, j - 1]).clone(),
        }
    });
    let nt = c.nabla(&t)?.values();
    let lap_t = contract_leading(&c.nabla(&c.nabla(&t)?)?, &c.g_inv).values();
    // frame time derivative: ∂_t T_bc − Σ_{m ≥ 1} (Γ̃^m_{0b} T_mc + Γ̃^m_{0c} T_bm), spatial slots only
    let dt_frame = Tensor::try_from_fn(c.range(), vec![Variance::Down; 2], |ix| {
        let (b, cc) = (ix[0], ix[1]);
        let mut acc = t.get(ix).diff(0)?.value();
        for m in 1..len {
            if b != 0 {
                acc -= c.conn.get(m, 0, b).value() * t.get(&[m, cc]).value();
            }
            if cc != 0 {
                acc -= c.conn.get(m, 0, cc).value() * t.get(&[b, m]).value();
            }
        }
        Ok(acc)
    })?;

    let sv = SpatialValues::new(geo)?;
    let nu = geo.nabla(&u)?.values();
    let nw = geo.nabla(&w)?.values();
    let lap_u = geo.laplacian(&u)?.values();
    let lap_w = geo.laplacian(&w)?.values();
    let uv = u.values().to_matrix();
    let wv = DVector::from_column_slice(w.values().components());
    let rm = &sv.ric_mixed;
    let grad_r_up = &sv.g_inv * &sv.grad_r;

    let mut u_grad = Vec::new();
    let mut w_grad = Vec::new();
    for ix in index_tuples(n, 3) {
        let (a, i, j) = (ix[0], ix[1], ix[2]);
        u_grad.push((*nt.get(&[a + 1, i + 1, j + 1]), *nu.get(&[a, i, j])));
    }
    for ix in index_tuples(n, 2) {
        let (a, i) = (ix[0], ix[1]);
        let expect = nw.get(&[a, i]) + (0..n).map(|p| rm[(a, p)] * uv[(i, p)]).sum::<f64>();
        w_grad.push((*nt.get(&[a + 1, i + 1, 0]), expect));
    }

    let mut u_heat = Vec::new();
    for ix in index_tuples(n, 2) {
        let (i, j) = (ix[0], ix[1]);
        let lhs = dt_frame.get(&[i + 1, j + 1]) - lap_t.get(&[i + 1, j + 1]);
        let frame: f64 = (0..n)
            .map(|m| rm[(i, m)] * uv[(m, j)] + rm[(j, m)] * uv[(i, m)])
            .sum();
        let rhs = u.get(&[i, j]).diff(0)?.value() + frame - lap_u.get(&[i, j]);
        u_heat.push((lhs, rhs));
    }
    let mut w_heat = Vec::new();
    for i in 0..n {
        let lhs = dt_frame.get(&[i + 1, 0]) - lap_t.get(&[i + 1, 0]);
        let frame: f64 = (0..n).map(|m| rm[(i, m)] * wv[m]).sum();
        let source: f64 = (0..n).map(|p| grad_r_up[p] * uv[(i, p)]).sum();
        let rhs = w.get(&[i]).diff(0)?.value() + frame - lap_w.get(&[i]) - 0.5 * source;
        w_heat.push((lhs, rhs));
    }
    Ok(TDerivativeResiduals {
        u_gradient: Residual::from_pairs(u_grad),
        w_gradient: Residual::from_pairs(w_grad),
        u_heat: Residual::from_pairs(u_heat),
        w_heat: Residual::from_pairs(w_heat),
        u_parallel: nu.max_abs(),
    })
}

/// Laplacian of a space-time tensor with respect to `g̃`.
pub fn spacetime_laplacian(c: &SpacetimeConnection, t: &Tensor<Jet>) -> Result<Tensor<Jet>> {
    laplacian(t, &c.conn, &c.g_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::SolutionParams;

    fn sphere(n: usize) -> FlowSolution {
        FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(n, 1.0)).unwrap()
    }

    fn cigar_static() -> FlowSolution {
        FlowSolution::make("cigar_static", &SolutionParams::default()).unwrap()
    }

    #[test]
    fn sphere_mixed_christoffels() {
        let c =
            build_spacetime_connection(&sphere(2), &Point::new([0.3, 0.1], 0.0), 0.0, 5).unwrap();
        for i in 1..3 {
            for k in 1..3 {
                let expect = if i == k { -1.0 } else { 0.0 };
                assert!((c.conn.get(k, i, 0).value() - expect).abs() < 1e-12);
            }
        }
        assert!(c.metric_defect() < 1e-12);
    }

    #[test]
    fn connection_blocks_match_independent_values() {
        let cases = [
            (sphere(2), Point::new([0.3, 0.1], 0.1)),
            (sphere(3), Point::new([0.3, 0.1, -0.2], 0.05)),
            (cigar_static(), Point::new([1.0, 0.4], 0.0)),
        ];
        for (s, p) in cases {
            let c = build_spacetime_connection(&s, &p, 0.05, 5).unwrap();
            for r in connection_blocks(&c).unwrap() {
                assert!(r.passes(1e-12), "{} {r:?}", s.name);
            }
        }
    }

    #[test]
    fn flat_affine_time_christoffel_vanishes() {
        let s =
            FlowSolution::make("flat", &SolutionParams::flat(2, Some(vec![0.5, -1.0]))).unwrap();
        let c = build_spacetime_connection(&s, &Point::new([0.3, 0.1], 0.2), 0.0, 5).unwrap();
        for k in 0..3 {
            assert_eq!(c.conn.get(k, 0, 0).value(), 0.0);
        }
        assert_eq!(c.riem.values().max_abs(), 0.0);
    }

    #[test]
    fn curvature_forms_agree() {
        let p = Point::new([0.4, -0.2], 0.1);
        let c = build_spacetime_connection(&sphere(2), &p, 0.05, 5).unwrap();
        for form in [TimeForm::Elliptic, TimeForm::Parabolic] {
            let cmp = compare_curvature(&c, form).unwrap();
            assert!(cmp.worst().passes(1e-9), "{form:?} {cmp:?}");
        }
        let c = build_spacetime_connection(&cigar_static(), &Point::new([1.0, 0.5], 0.0), 0.0, 5)
            .unwrap();
        for form in [TimeForm::Elliptic, TimeForm::Parabolic] {
            let cmp = compare_curvature(&c, form).unwrap();
            assert!(cmp.worst().passes(1e-9), "{form:?} {cmp:?}");
        }
    }

    #[test]
    fn ricci_closed_forms() {
        let c = build_spacetime_connection(&cigar_static(), &Point::new([1.0, 0.0], 0.0), 0.0, 5)
            .unwrap();
        let r = spacetime_ricci(&c).unwrap();
        assert!(r.spatial.passes(1e-9), "{r:?}");
        assert!(r.mixed.passes(1e-9), "{r:?}");
        assert!(r.time_elliptic.passes(1e-9), "{r:?}");
        assert!(r.time_parabolic_traced.passes(1e-9), "{r:?}");
        assert!(r.scalar.passes(1e-10), "{r:?}");
    }

    #[test]
    fn degenerate_flow_holds() {
        for (s, p) in [
            (sphere(3), Point::new([0.3, 0.1, -0.5], 0.1)),
            (cigar_static(), Point::new([0.7, -0.4], 0.0)),
        ] {
            let c = build_spacetime_connection(&s, &p, 0.0, 5).unwrap();
            let d = degenerate_flow_residual(&c).unwrap();
            for r in [d.metric, d.spatial, d.case1, d.case2, d.upper_time] {
                assert!(r.passes(1e-9), "{} {d:?}", s.name);
            }
            let k = compatibility_and_torsion(&c).unwrap();
            assert!(k.compatibility.passes(1e-10));
            assert_eq!(k.torsion, 0.0);
        }
    }

    #[test]
    fn order_four_is_not_enough_for_the_flow_system() {
        let c =
            build_spacetime_connection(&sphere(2), &Point::new([0.3, 0.1], 0.1), 0.0, 4).unwrap();
        assert!(matches!(
            degenerate_flow_residual(&c),
            Err(LabError::OrderExceeded { .. })
        ));
    }

    #[test]
    fn bianchi_on_sphere_and_cigar() {
        let c =
            build_spacetime_connection(&sphere(2), &Point::new([0.0, 0.0], 0.0), 0.0, 5).unwrap();
        let b = bianchi_identity_residuals(&c).unwrap();
        let chain = b.scalar_chain.unwrap();
        for v in chain {
            assert!((v - 2.0).abs() < 1e-9, "{chain:?}");
        }
        assert!(b.second.passes(1e-8));
        let c = build_spacetime_connection(&cigar_static(), &Point::new([0.6, 0.8], 0.0), 0.0, 5)
            .unwrap();
        let b = bianchi_identity_residuals(&c).unwrap();
        for r in b.lemma.iter().chain(&b.lemma_zero).chain(&b.corollary) {
            assert!(r.passes(1e-8), "{b:?}");
        }
        assert!(b.unified.passes(1e-8), "{b:?}");
    }

    #[test]
    fn curvature_equals_z_on_sphere() {
        let c =
            build_spacetime_connection(&sphere(3), &Point::new([0.2, 0.5, -0.1], 0.05), 0.05, 5)
                .unwrap();
        let u = crate::harnack::antisymmetrize(&DMatrix::from_row_slice(
            3,
            3,
            &[0.0, 1.0, -0.5, 0.3, 0.0, 2.0, 0.1, -0.7, 0.0],
        ));
        let d = HarnackData::new(u, DVector::from_column_slice(&[0.4, -1.2, 0.8])).unwrap();
        let h = harnack_equals_curvature(&c, &d).unwrap();
        assert!(h.difference.passes(1e-9), "{h:?}");
        assert!(h.expansion.passes(1e-12), "{h:?}");
        assert!(h.closed_expansion.passes(1e-9), "{h:?}");
    }

    #[test]
    fn t_derivatives_on_cigar_flow() {
        let s = FlowSolution::make("cigar_flow", &SolutionParams::default()).unwrap();
        let c = build_spacetime_connection(&s, &Point::new([1.0, 0.3], 0.05), 0.0, 5).unwrap();
        let u = TwoFormField::EvolvingVolumeForm(1.0);
        let r = spacetime_t_derivatives(&c, &u, &OneFormField::Interior(u.clone())).unwrap();
        assert!(r.u_gradient.passes(1e-8), "{r:?}");
        assert!(r.w_gradient.passes(1e-8), "{r:?}");
        assert!(r.u_heat.passes(1e-8), "{r:?}");
        assert!(r.w_heat.passes(1e-8), "{r:?}");
    }
}
