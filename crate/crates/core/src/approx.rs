//! Nondegenerate space-time metrics `g̃_{ε,δ} = g + (R + ε/(2(t+δ))) dt²`
//! and their limits.
//!
//! The metric is only defined over plain Ricci flows. Its Levi-Civita
//! connection and curvature are computed by differentiating jets and compared
//! with closed forms; the ε-terms use the denominator `4(t+δ)²` that direct
//! differentiation of `g̃_{00}` produces.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};
use crate::harnack::{HarnackData, HarnackTensors};
use crate::jets::Jet;
use crate::residual::Residual;
use crate::solutions::{FlowSolution, Geometry, Point};
use crate::spacetime::{build_spacetime_connection, curvature_pairing, embed_t, SpatialValues};
use crate::tensor::{
    christoffel, covariant_derivative, curvature_from_connection, index_tuples, Connection,
    IndexRange, MetricSample, Tensor, Variance,
};

/// The family `g̃_{ε,δ}` over a base solution.
#[derive(Debug, Clone)]
pub struct ApproxMetric {
    pub solution: FlowSolution,
    pub epsilon: f64,
    pub delta: f64,
}

/// `g̃_{ε,δ}` at one point with its connection and curvature.
#[derive(Debug, Clone)]
pub struct ApproxSample {
    pub epsilon: f64,
    pub delta: f64,
    pub geo: Geometry,
    /// `D = R + ε/(2(t+δ))`.
    pub d: Jet,
    pub metric: MetricSample,
    pub conn: Connection,
    /// `R̃_{abc}^d`.
    pub riem: Tensor<Jet>,
}

pub fn approx_metric(s: &FlowSolution, epsilon: f64, delta: f64) -> Result<ApproxMetric> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(LabError::Config(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(LabError::Config(format!(
            "delta = {delta} must be positive"
        )));
    }
    if s.mode.is_modified() {
        return Err(LabError::Config(format!(
            "approximating metrics are defined over plain Ricci flows, not {}",
            s.name
        )));
    }
    Ok(ApproxMetric {
        solution: s.clone(),
        epsilon,
        delta,
    })
}

impl ApproxMetric {
    fn time_entry(&self, geo: &Geometry) -> Result<Jet> {
        let shifted = geo.coords.t.add_scalar(self.delta);
        Ok(&geo.scalar + &shifted.recip()?.scale(0.5 * self.epsilon))
    }

    /// `g̃_{00}` at a point.
    pub fn time_entry_value(&self, p: &Point) -> Result<f64> {
        let geo = self.solution.geometry(p, 2)?;
        Ok(self.time_entry(&geo)?.value())
    }

    pub fn sample(&self, p: &Point, order: usize) -> Result<ApproxSample> {
        let geo = self.solution.geometry(p, order)?;
        let d = self.time_entry(&geo)?;
        if !(d.value() > 0.0) {
            return Err(LabError::Definiteness(format!(
                "g̃_00 = {} is not positive at {p:?}",
                d.value()
            )));
        }
        let n = geo.dim();
        let zero = geo.zero();
        let g = geo.g();
        let gt = Tensor::from_fn(
            IndexRange::Spacetime(n),
            vec![Variance::Down; 2],
            |ix| match (ix[0], ix[1]) {
                (0, 0) => d.clone(),
                (0, _) | (_, 0) => zero.clone(),
                (i, j) => g.get(&[i - 1, j - 1]).clone(),
            },
        );
        let metric = MetricSample::new(gt)?;
        let conn = christoffel(&metric)?;
        let riem = curvature_from_connection(&conn)?;
        Ok(ApproxSample {
            epsilon: self.epsilon,
            delta: self.delta,
            geo,
            d,
            metric,
            conn,
            riem,
        })
    }
}

impl ApproxSample {
    pub fn dim(&self) -> usize {
        self.geo.dim()
    }

    pub fn t(&self) -> f64 {
        self.geo.point.t
    }

    /// `ε / (4(t+δ)²)`.
    fn eps_term(&self) -> f64 {
        let s = self.t() + self.delta;
        self.epsilon / (4.0 * s * s)
    }

    /// `ε / (4t²)`, the alternative reading of the same term.
    fn eps_term_unshifted(&self) -> f64 {
        self.epsilon / (4.0 * self.t() * self.t())
    }

    /// Largest deviation of the spatial block and mixed entries of `g̃` from
    /// `g` and 0.
    pub fn block_defect(&self) -> f64 {
        let g = self.geo.g().values();
        let gt = self.metric.g.values();
        gt.iter_indexed()
            .filter(|(ix, _)| ix[0] != 0 || ix[1] != 0)
            .map(|(ix, v)| {
                let expect = if ix[0] == 0 || ix[1] == 0 {
                    0.0
                } else {
                    *g.get(&[ix[0] - 1, ix[1] - 1])
                };
                (v - expect).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `Γ̃^0_{00}`.
    pub fn gamma000(&self) -> f64 {
        self.conn.get(0, 0, 0).value()
    }
}

/// Levi-Civita connection of `g̃_{ε,δ}` against the six closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxConnectionResiduals {
    /// `Γ̃^k_{ij} = Γ^k_{ij}`, `Γ̃^0_{ij} = R_{ij}/D`, `Γ̃^k_{i0} = −R_i^k`,
    /// `Γ̃^k_{00} = −½∇^k R`, `Γ̃^0_{i0} = ∇_i R/(2D)`,
    /// `Γ̃^0_{00} = ∂_t R/(2D) − ε/(4(t+δ)²D)`.
    pub items: [Residual; 6],
    /// `Γ̃^0_{00}` with `4t²` in place of `4(t+δ)²`.
    pub item6_unshifted: Residual,
    pub compatibility: Residual,
    pub torsion: f64,
}

impl ApproxConnectionResiduals {
    pub fn worst(&self) -> Residual {
        self.items.iter().copied().collect()
    }
}

pub fn approx_connection_check(a: &ApproxSample) -> Result<ApproxConnectionResiduals> {
    let n = a.dim();
    let sv = SpatialValues::new(&a.geo)?;
    let d = a.d.value();
    let grad_r_up = &sv.g_inv * &sv.grad_r;
    let c = |k: usize, i: usize, j: usize| a.conn.get(k, i, j).value();
    let mut items: [Vec<(f64, f64)>; 6] = Default::default();
    for ix in index_tuples(n, 3) {
        let (k, i, j) = (ix[0], ix[1], ix[2]);
        items[0].push((c(k + 1, i + 1, j + 1), a.geo.conn.get(k, i, j).value()));
    }
    for ix in index_tuples(n, 2) {
        let (i, j) = (ix[0], ix[1]);
        items[1].push((c(0, i + 1, j + 1), sv.ric[(i, j)] / d));
        // ix = (i, k)
        let k = j;
        items[2].push((c(k + 1, i + 1, 0), -sv.ric_mixed[(i, k)]));
        items[2].push((c(k + 1, 0, i + 1), -sv.ric_mixed[(i, k)]));
    }
    for k in 0..n {
        items[3].push((c(k + 1, 0, 0), -0.5 * grad_r_up[k]));
        items[4].push((c(0, k + 1, 0), sv.grad_r[k] / (2.0 * d)));
        items[4].push((c(0, 0, k + 1), sv.grad_r[k] / (2.0 * d)));
    }
    let item6 = |eps_term: f64| sv.dt_scalar / (2.0 * d) - eps_term / d;
    items[5].push((a.gamma000(), item6(a.eps_term())));
    let item6_unshifted = Residual::from_pairs([(a.gamma000(), item6(a.eps_term_unshifted()))]);

    let ng = covariant_derivative(&a.metric.g, &a.conn)?.values();
    Ok(ApproxConnectionResiduals {
        items: items.map(Residual::from_pairs),
        item6_unshifted,
        compatibility: Residual::from_pairs(ng.components().iter().map(|v| (*v, 0.0))),
        torsion: a.conn.torsion(),
    })
}

/// Curvature of `g̃_{ε,δ}` against the three closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxCurvatureResiduals {
    /// `R̃_{ijk}^l`, `R̃_{0jk}^l`, `R̃_{i00}^l`.
    pub items: [Residual; 3],
    /// `R̃_{i00}^l` with `4t²` in place of `4(t+δ)²`.
    pub item3_unshifted: Residual,
    /// `max |(R_i^l R_{jk} − R_j^l R_{ik})/D|`, the ε-dependent part of item 1.
    pub item1_correction: f64,
}

impl ApproxCurvatureResiduals {
    pub fn worst(&self) -> Residual {
        self.items.iter().copied().collect()
    }
}

pub fn approx_curvature_check(a: &ApproxSample) -> Result<ApproxCurvatureResiduals> {
    let n = a.dim();
    let sv = SpatialValues::new(&a.geo)?;
    let d = a.d.value();
    let riem = a.riem.values();
    let rm = &sv.ric_mixed;
    let grad_r_up = &sv.g_inv * &sv.grad_r;
    let mut items: [Vec<(f64, f64)>; 3] = Default::default();
    let mut correction: f64 = 0.0;
    for ix in index_tuples(n, 4) {
        let (i, j, k, l) = (ix[0], ix[1], ix[2], ix[3]);
        let corr = (rm[(i, l)] * sv.ric[(j, k)] - rm[(j, l)] * sv.ric[(i, k)]) / d;
        correction = correction.max(corr.abs());
        items[0].push((
            *riem.get(&[i + 1, j + 1, k + 1, l + 1]),
            sv.riem.get(&ix) - corr,
        ));
    }
    for ix in index_tuples(n, 3) {
        let (j, k, l) = (ix[0], ix[1], ix[2]);
        let expect = -sv.nabla_ric_mixed.get(&[k, j, l]) + sv.nabla_up_ric(l, j, k)
            - 0.5 * (sv.ric[(j, k)] * grad_r_up[l] - rm[(j, l)] * sv.grad_r[k]) / d;
        items[1].push((*riem.get(&[0, j + 1, k + 1, l + 1]), expect));
    }
    let item3 = |i: usize, l: usize, eps_term: f64| {
        let rr = (rm * rm)[(i, l)];
        sv.dt_ric_mixed[(i, l)]
            - 0.5 * sv.hess_r_mixed[(i, l)]
            - rr
            - ((0.5 * sv.dt_scalar - eps_term) * rm[(i, l)] - 0.25 * sv.grad_r[i] * grad_r_up[l])
                / d
    };
    let mut unshifted = Vec::new();
    for ix in index_tuples(n, 2) {
        let (i, l) = (ix[0], ix[1]);
        let direct = *riem.get(&[i + 1, 0, 0, l + 1]);
        items[2].push((direct, item3(i, l, a.eps_term())));
        unshifted.push((direct, item3(i, l, a.eps_term_unshifted())));
    }
    Ok(ApproxCurvatureResiduals {
        items: items.map(Residual::from_pairs),
        item3_unshifted: Residual::from_pairs(unshifted),
        item1_correction: correction,
    })
}

/// Which limit a schedule approaches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepRegime {
    /// `ε = δ → ∞` together.
    Joint,
    /// `ε → ∞` at fixed `δ`, then `δ → 0`.
    EpsilonThenDelta,
    /// `ε = δ² → ∞`, which drives `D → ∞` while `δ → ∞`.
    Quadratic,
}

/// A sequence of `(ε, δ)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub regime: SweepRegime,
    pub pairs: Vec<(f64, f64)>,
}

impl Schedule {
    /// `ε = δ = 2^k` for `k` in `lo..=hi`.
    pub fn joint(lo: i32, hi: i32) -> Self {
        Schedule {
            regime: SweepRegime::Joint,
            pairs: (lo..=hi).map(|k| (2f64.powi(k), 2f64.powi(k))).collect(),
        }
    }

    /// `ε = 2^k` for `k` in `lo..=hi` at `δ = 1`, then `δ = 2^{-j}` for `j` in
    /// `1..=delta_pow` at `ε = 2^hi`.
    pub fn epsilon_then_delta(lo: i32, hi: i32, delta_pow: i32) -> Self {
        let eps_max = 2f64.powi(hi);
        let mut pairs: Vec<(f64, f64)> = (lo..=hi).map(|k| (2f64.powi(k), 1.0)).collect();
        pairs.extend((1..=delta_pow).map(|j| (eps_max, 2f64.powi(-j))));
        Schedule {
            regime: SweepRegime::EpsilonThenDelta,
            pairs,
        }
    }

    /// `δ = 2^k`, `ε = 4^k` for `k` in `lo..=hi`.
    pub fn quadratic(lo: i32, hi: i32) -> Self {
        Schedule {
            regime: SweepRegime::Quadratic,
            pairs: (lo..=hi).map(|k| (4f64.powi(k), 2f64.powi(k))).collect(),
        }
    }

    /// Every step must move toward the limit: `ε` never decreases, `δ` moves
    /// in one direction only, and consecutive pairs differ.
    pub fn validate(&self) -> Result<()> {
        if self.pairs.is_empty() {
            return Err(LabError::Config("empty sweep schedule".into()));
        }
        let steps: Vec<_> = self.pairs.windows(2).map(|w| (w[0], w[1])).collect();
        let delta_up = steps.iter().any(|(a, b)| b.1 > a.1);
        let delta_down = steps.iter().any(|(a, b)| b.1 < a.1);
        let monotone = steps
            .iter()
            .all(|(a, b)| b.0 >= a.0 && (b.0 > a.0 || b.1 != a.1));
        if !monotone || (delta_up && delta_down) {
            return Err(LabError::Config(
                "sweep schedule is not monotone in the swept parameter".into(),
            ));
        }
        Ok(())
    }
}

/// One schedule entry of a limit sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub delta: f64,
    /// `max |Γ̃_{ε,δ} − Γ̃|` over all components.
    pub conn_err: f64,
    /// Worst normalized curvature closed-form residual.
    pub curv_form_err: f64,
    pub gamma000: f64,
    /// `|R̃m_{ε,δ}(T, T) − (Z + R(W, W)/(2t))|`.
    pub target_gap: f64,
    /// `|R̃m_{ε,δ}(T, T) − (Z + R(W, W)/(2(t+δ)))|`, the gap to the limit at
    /// fixed `δ`.
    pub shifted_gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub regime: SweepRegime,
    pub point: Point,
    pub rows: Vec<SweepRow>,
}

pub fn limit_sweep(
    s: &FlowSolution,
    p: &Point,
    d: &HarnackData,
    schedule: &Schedule,
    order: usize,
) -> Result<SweepResult> {
    schedule.validate()?;
    if !(p.t > 0.0) {
        return Err(LabError::Domain("limit sweeps need t > 0".into()));
    }
    if d.w.len() != s.dim {
        return Err(LabError::Shape(
            "Harnack data has the wrong dimension".into(),
        ));
    }
    let target = build_spacetime_connection(s, p, 0.0, order)?;
    let target_conn = target.conn.coeffs.values();
    let harnack = HarnackTensors::from_geometry(&target.geo)?;
    let z = harnack.z(d, false)?;
    let z_timed = harnack.z(d, true)?;
    // R(W, W) recovered from the time term R(W, W)/(2t)
    let ric_ww = 2.0 * p.t * (z_timed - z);
    let mut rows = Vec::with_capacity(schedule.pairs.len());
    for &(epsilon, delta) in &schedule.pairs {
        let a = approx_metric(s, epsilon, delta)?.sample(p, order)?;
        let conn_err = a.conn.coeffs.values().max_diff(&target_conn);
        let curv_form_err = approx_curvature_check(&a)?.worst().normalized();
        let g_inv = a.metric.g_inv.values();
        let t = embed_t(d, &a.geo.g_inv().values().to_matrix());
        let (rm_tt, _) = curvature_pairing(&a.riem.values(), &g_inv, &t);
        rows.push(SweepRow {
            epsilon,
            delta,
            conn_err,
            curv_form_err,
            gamma000: a.gamma000(),
            target_gap: (rm_tt - z_timed).abs(),
            shifted_gap: (rm_tt - z - ric_ww / (2.0 * (p.t + delta))).abs(),
        });
    }
    Ok(SweepResult {
        regime: schedule.regime,
        point: p.clone(),
        rows,
    })
}

impl SweepResult {
    /// `conn_err[k+1] / conn_err[k]` over the last `count` rows.
    pub fn halving_ratios(&self, count: usize) -> Vec<f64> {
        let tail = &self.rows[self.rows.len().saturating_sub(count)..];
        tail.windows(2)
            .map(|w| w[1].conn_err / w[0].conn_err)
            .collect()
    }

    /// Whether every ratio over the last `count` rows is within `tol` of ½.
    pub fn halves(&self, count: usize, tol: f64) -> bool {
        let ratios = self.halving_ratios(count);
        !ratios.is_empty() && ratios.iter().all(|r| (r - 0.5).abs() <= tol * 0.5)
    }

    /// Least-squares slope of `log₂ conn_err` against `log₂ ε` over the last
    /// `count` rows.
    pub fn decay_rate(&self, count: usize) -> f64 {
        let tail = &self.rows[self.rows.len().saturating_sub(count)..];
        let pts: Vec<(f64, f64)> = tail
            .iter()
            .map(|r| (r.epsilon.log2(), r.conn_err.log2()))
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let (num, den) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
            (a + (x - mx) * (y - my), b + (x - mx) * (x - mx))
        });
        num / den
    }

    /// Smallest `C` with `|Γ̃^0_{00} + 1/(2(t+δ))| ≤ C/ε` on every row.
    pub fn gap_constant(&self) -> f64 {
        let t = self.point.t;
        self.rows
            .iter()
            .map(|r| r.epsilon * (r.gamma000 + 1.0 / (2.0 * (t + r.delta))).abs())
            .fold(0.0, f64::max)
    }
}

/// Limit gap `|Γ̃^0_{00}(ε, δ) + 1/(2(t+δ))|` for one pair; `t` may be 0.
pub fn gamma000_gap(
    s: &FlowSolution,
    p: &Point,
    epsilon: f64,
    delta: f64,
    order: usize,
) -> Result<f64> {
    let a = approx_metric(s, epsilon, delta)?.sample(p, order)?;
    Ok((a.gamma000() + 1.0 / (2.0 * (p.t + delta))).abs())
}

/// How the time-like part of a space-time 2-form is rescaled into a 1-form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lambda2Scaling {
    /// `dx^γ ∧ dt ↦ D^{-1/2} dx^γ`, as displayed.
    Literal,
    /// `dx^γ ∧ dt ↦ dx^γ`.
    Unscaled,
}

impl Lambda2Scaling {
    /// Factor `c` with `α_{γ0} = c W_γ`.
    fn factor(self, d: f64) -> f64 {
        match self {
            Lambda2Scaling::Literal => d.sqrt(),
            Lambda2Scaling::Unscaled => 1.0,
        }
    }
}

fn check_form(alpha: &DMatrix<f64>) -> Result<usize> {
    let len = alpha.nrows();
    if len < 2 || alpha.ncols() != len {
        return Err(LabError::Shape(
            "2-form must be a square matrix of size n+1".into(),
        ));
    }
    if (alpha + alpha.transpose()).amax() > 0.0 {
        return Err(LabError::Shape("2-form must be antisymmetric".into()));
    }
    Ok(len - 1)
}

/// Splits a space-time 2-form `α` into `(U, W)` with `U = α_{ij}` and
/// `W_γ = α_{γ0} / √D`.
pub fn lambda2_decomposition(
    m: &ApproxMetric,
    p: &Point,
    alpha: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = check_form(alpha)?;
    if n != m.solution.dim {
        return Err(LabError::Shape("2-form has the wrong dimension".into()));
    }
    let d = m.time_entry_value(p)?;
    if !(d > 0.0) {
        return Err(LabError::Definiteness(format!(
            "g̃_00 = {d} is not positive"
        )));
    }
    Ok(split(alpha, Lambda2Scaling::Literal.factor(d)))
}

fn split(alpha: &DMatrix<f64>, c: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = alpha.nrows() - 1;
    let u = alpha.view((1, 1), (n, n)).into_owned();
    let w = DVector::from_fn(n, |i, _| alpha[(i + 1, 0)] / c);
    (u, w)
}

fn compose(u: &DMatrix<f64>, w: &DVector<f64>, c: f64) -> DMatrix<f64> {
    let n = w.len();
    DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, 0) => 0.0,
        (i, 0) => c * w[i - 1],
        (0, j) => -c * w[j - 1],
        (i, j) => u[(i - 1, j - 1)],
    })
}

/// A 2-form and 1-form `(U, W)`.
pub type Pair = (DMatrix<f64>, DVector<f64>);

/// Bracket `βG̃α − αG̃β` and inner product `g̃^{ac}g̃^{bd}α_{ab}β_{cd}` of
/// `g̃_{ε,δ}` transported to pairs `(U, W)` through `scaling`.
pub fn induced_bracket_and_inner(
    m: &ApproxMetric,
    p: &Point,
    (u, w): (&DMatrix<f64>, &DVector<f64>),
    (v, x): (&DMatrix<f64>, &DVector<f64>),
    scaling: Lambda2Scaling,
) -> Result<(Pair, f64)> {
    let geo = m.solution.geometry(p, 2)?;
    let d = m.time_entry(&geo)?.value();
    if !(d > 0.0) {
        return Err(LabError::Definiteness(format!(
            "g̃_00 = {d} is not positive"
        )));
    }
    let n = geo.dim();
    if w.len() != n || x.len() != n {
        return Err(LabError::Shape("pair has the wrong dimension".into()));
    }
    let gi = geo.g_inv().values().to_matrix();
    let gt = DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, 0) => 1.0 / d,
        (0, _) | (_, 0) => 0.0,
        (i, j) => gi[(i - 1, j - 1)],
    });
    let c = scaling.factor(d);
    let alpha = compose(u, w, c);
    let beta = compose(v, x, c);
    let br = &beta * &gt * &alpha - &alpha * &gt * &beta;
    let inner = (&gt * &alpha * &gt).component_mul(&beta).sum();
    Ok((split(&br, c), inner))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::SolutionParams;

    fn sphere(n: usize) -> FlowSolution {
        FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(n, 1.0)).unwrap()
    }

    #[test]
    fn sphere_time_entry() {
        let m = approx_metric(&sphere(2), 10.0, 1.0).unwrap();
        let p = Point::new([0.3, -0.2], 0.0);
        assert!((m.time_entry_value(&p).unwrap() - 7.0).abs() < 1e-12);
        let a = m.sample(&p, 5).unwrap();
        assert_eq!(a.block_defect(), 0.0);
        assert!(matches!(
            approx_metric(&sphere(2), -1.0, 1.0),
            Err(LabError::Config(_))
        ));
    }

    #[test]
    fn connection_and_curvature_closed_forms() {
        for (s, p) in [
            (sphere(2), Point::new([0.3, -0.2], 0.0)),
            (sphere(3), Point::new([0.1, 0.4, -0.3], 0.1)),
            (
                FlowSolution::make("cigar_flow", &SolutionParams::default()).unwrap(),
                Point::new([0.8, 0.3], 0.05),
            ),
        ] {
            for eps in [1.0, 10.0, 100.0] {
                let a = approx_metric(&s, eps, 0.5).unwrap().sample(&p, 5).unwrap();
                let c = approx_connection_check(&a).unwrap();
                assert!(c.worst().passes(1e-9), "{} {eps} {c:?}", s.name);
                assert!(c.compatibility.passes(1e-10));
                let r = approx_curvature_check(&a).unwrap();
                assert!(r.worst().passes(1e-9), "{} {eps} {r:?}", s.name);
            }
        }
    }

    #[test]
    fn flat_items_vanish() {
        let s = FlowSolution::make("flat", &SolutionParams::flat(2, None)).unwrap();
        let a = approx_metric(&s, 3.0, 0.5)
            .unwrap()
            .sample(&Point::new([0.1, 0.2], 0.3), 5)
            .unwrap();
        let c = approx_connection_check(&a).unwrap();
        assert!(c.worst().passes(1e-12));
        // Γ̃^0_00 = −ε/(4(t+δ)²D) with D = ε/(2(t+δ)) is −1/(2(t+δ))
        assert!((a.gamma000() + 1.0 / 1.6).abs() < 1e-12);
        assert_eq!(a.riem.values().max_abs(), 0.0);
    }

    #[test]
    fn literal_split_of_time_form() {
        let m = approx_metric(&sphere(2), 10.0, 1.0).unwrap();
        let p = Point::new([0.0, 0.0], 0.0);
        let mut alpha = DMatrix::zeros(3, 3);
        alpha[(1, 0)] = 1.0;
        alpha[(0, 1)] = -1.0;
        let (u, w) = lambda2_decomposition(&m, &p, &alpha).unwrap();
        assert_eq!(u.amax(), 0.0);
        assert!((w[0] - 7f64.powf(-0.5)).abs() < 1e-15 && w[1] == 0.0);
        let mut spatial = DMatrix::zeros(3, 3);
        spatial[(1, 2)] = 2.0;
        spatial[(2, 1)] = -2.0;
        let (u, w) = lambda2_decomposition(&m, &p, &spatial).unwrap();
        assert_eq!(u, spatial.view((1, 1), (2, 2)).into_owned());
        assert_eq!(w.amax(), 0.0);
    }
}
