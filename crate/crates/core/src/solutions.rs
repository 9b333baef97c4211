//! Closed-form exact solutions used as ground truth.
//!
//! | name               | n      | metric                                   | mode           |
//! |--------------------|--------|------------------------------------------|----------------|
//! | `flat`             | any    | `δ_ij`, optional affine potential `a·x`  | plain/modified |
//! | `shrinking_sphere` | 2, 3   | `4c(t)(1+|x|²)^{-2} δ_ij`, `c = c₀ − 2(n−1)t` | plain     |
//! | `cigar_flow`       | 2      | `δ_ij / (e^{4t} + |x|²)`                 | plain          |
//! | `cigar_static`     | 2      | `δ_ij / (1 + |x|²)`, `f = log(1+|x|²)`   | steady soliton |
//!
//! The potential `f` enters the modified flow `∂_t g = −2Ric + 2∇∇f`. A
//! solution may additionally carry a *soliton* potential (with `V = df` and
//! `Ric = ∇V`) without being a modified flow: the evolving cigar is a plain
//! Ricci flow whose every time slice is a steady soliton for
//! `f = log(e^{4t} + |x|²)`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::jets::{Jet, JetSpace};
use crate::residual::Residual;
use crate::tensor::{
    self, christoffel, covariant_derivative, curvature_from_connection, hodge_laplacian_one_form,
    laplacian, lower, raise, ricci, trace_with, Connection, IndexRange, MetricSample, Tensor,
    Variance,
};

/// A space-time sample point `(x, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: Vec<f64>,
    pub t: f64,
}

impl Point {
    pub fn new(x: impl Into<Vec<f64>>, t: f64) -> Self {
        Point { x: x.into(), t }
    }

    pub fn shifted(&self, dt: f64) -> Point {
        Point {
            x: self.x.clone(),
            t: self.t + dt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    PlainFlow,
    ModifiedFlow,
    SteadySoliton,
}

impl FlowMode {
    /// Whether the metric evolves by `∂_t g = −2Ric + 2∇∇f`.
    pub fn is_modified(&self) -> bool {
        !matches!(self, FlowMode::PlainFlow)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolutionKind {
    Flat { affine: Option<Vec<f64>> },
    ShrinkingSphere { c0: f64 },
    CigarFlow,
    CigarStatic,
}

/// Spatial ball `|x| <= r_max` times the time interval `[t_min, t_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub r_max: f64,
    pub t_min: f64,
    pub t_max: f64,
}

/// Parameters accepted by [`FlowSolution::make`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionParams {
    pub n: Option<usize>,
    pub c0: Option<f64>,
    pub affine: Option<Vec<f64>>,
}

impl SolutionParams {
    pub fn sphere(n: usize, c0: f64) -> Self {
        SolutionParams {
            n: Some(n),
            c0: Some(c0),
            affine: None,
        }
    }

    pub fn flat(n: usize, affine: Option<Vec<f64>>) -> Self {
        SolutionParams {
            n: Some(n),
            c0: None,
            affine,
        }
    }
}

pub const SOLUTION_NAMES: [&str; 4] = ["flat", "shrinking_sphere", "cigar_flow", "cigar_static"];

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    pub name: String,
    pub kind: SolutionKind,
    pub dim: usize,
    pub mode: FlowMode,
    pub domain: Domain,
}

/// Seeded coordinate jets at a point.
#[derive(Debug, Clone)]
pub struct Coords {
    pub t: Jet,
    pub x: Vec<Jet>,
}

impl Coords {
    pub fn new(p: &Point, order: usize) -> Coords {
        let n = p.x.len();
        let space = JetSpace::get(n + 1, order);
        Coords {
            t: Jet::seed_in(&space, 0, p.t),
            x: (0..n)
                .map(|i| Jet::seed_in(&space, i + 1, p.x[i]))
                .collect(),
        }
    }

    pub fn space(&self) -> &std::sync::Arc<JetSpace> {
        self.t.space()
    }

    pub fn constant(&self, v: f64) -> Jet {
        Jet::constant(self.space(), v)
    }

    pub fn radius_sq(&self) -> Jet {
        let sq: Vec<Jet> = self.x.iter().map(|x| x * x).collect();
        crate::jets::sum(&sq).unwrap_or_else(|| self.constant(0.0))
    }
}

fn conformal(n: usize, u: &Jet) -> Tensor<Jet> {
    let zero = Jet::zero(u.space());
    Tensor::from_fn(IndexRange::Spatial(n), vec![Variance::Down; 2], |ix| {
        if ix[0] == ix[1] {
            u.clone()
        } else {
            zero.clone()
        }
    })
}

impl FlowSolution {
    pub fn make(name: &str, params: &SolutionParams) -> Result<FlowSolution> {
        let bad = |msg: String| Err(LabError::Config(msg));
        match name {
            "flat" => {
                let n = params.n.unwrap_or(2);
                if !(1..=3).contains(&n) {
                    return bad(format!("flat: n = {n} outside 1..=3"));
                }
                if params.c0.is_some() {
                    return bad("flat: c0 is not a parameter".into());
                }
                if let Some(a) = &params.affine {
                    if a.len() != n {
                        return bad(format!("flat: affine has {} entries, need {n}", a.len()));
                    }
                }
                let mode = if params.affine.is_some() {
                    FlowMode::ModifiedFlow
                } else {
                    FlowMode::PlainFlow
                };
                Ok(FlowSolution {
                    name: name.into(),
                    kind: SolutionKind::Flat {
                        affine: params.affine.clone(),
                    },
                    dim: n,
                    mode,
                    domain: Domain {
                        r_max: 2.0,
                        t_min: 0.0,
                        t_max: 1.0,
                    },
                })
            }
            "shrinking_sphere" => {
                let n = params.n.unwrap_or(2);
                let c0 = params.c0.unwrap_or(1.0);
                if !(2..=3).contains(&n) {
                    return bad(format!("shrinking_sphere: n = {n} outside {{2, 3}}"));
                }
                if !(c0 > 0.0 && c0.is_finite()) {
                    return bad(format!("shrinking_sphere: c0 = {c0} must be positive"));
                }
                if params.affine.is_some() {
                    return bad("shrinking_sphere: affine is not a parameter".into());
                }
                Ok(FlowSolution {
                    name: name.into(),
                    kind: SolutionKind::ShrinkingSphere { c0 },
                    dim: n,
                    mode: FlowMode::PlainFlow,
                    domain: Domain {
                        r_max: 2.0,
                        t_min: 0.0,
                        t_max: c0 / (2.0 * (n as f64 - 1.0)),
                    },
                })
            }
            "cigar_flow" | "cigar_static" => {
                if params.n.is_some_and(|n| n != 2) {
                    return bad(format!("{name}: only n = 2 is available"));
                }
                if params.c0.is_some() || params.affine.is_some() {
                    return bad(format!("{name}: takes no parameters besides n = 2"));
                }
                let (kind, mode) = if name == "cigar_flow" {
                    (SolutionKind::CigarFlow, FlowMode::PlainFlow)
                } else {
                    (SolutionKind::CigarStatic, FlowMode::SteadySoliton)
                };
                Ok(FlowSolution {
                    name: name.into(),
                    kind,
                    dim: 2,
                    mode,
                    domain: Domain {
                        r_max: 2.0,
                        t_min: 0.0,
                        t_max: 1.0,
                    },
                })
            }
            other => bad(format!(
                "unknown solution '{other}' (expected one of {SOLUTION_NAMES:?})"
            )),
        }
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        if p.x.len() != self.dim {
            return Err(LabError::Shape(format!(
                "point has {} coordinates, solution has dimension {}",
                p.x.len(),
                self.dim
            )));
        }
        let r = p.x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let d = &self.domain;
        if r > d.r_max * (1.0 + 1e-12) || p.t < d.t_min || p.t >= d.t_max || !p.t.is_finite() {
            return Err(LabError::Domain(format!(
                "{}: (x = {:?}, t = {}) outside |x| <= {}, t in [{}, {})",
                self.name, p.x, p.t, d.r_max, d.t_min, d.t_max
            )));
        }
        Ok(())
    }

    /// Metric components as jets.
    pub fn metric_jets(&self, c: &Coords) -> Result<Tensor<Jet>> {
        let n = self.dim;
        let r2 = c.radius_sq();
        let u = match &self.kind {
            SolutionKind::Flat { .. } => c.constant(1.0),
            SolutionKind::ShrinkingSphere { c0 } => {
                let ct = c.t.scale(-2.0 * (n as f64 - 1.0)).add_scalar(*c0);
                &ct.scale(4.0) * &r2.add_scalar(1.0).powi(-2)?
            }
            SolutionKind::CigarFlow => (c.t.scale(4.0).exp() + &r2).recip()?,
            SolutionKind::CigarStatic => r2.add_scalar(1.0).recip()?,
        };
        Ok(conformal(n, &u))
    }

    /// Potential of the modified flow, `None` for plain flows.
    pub fn flow_potential(&self, c: &Coords) -> Result<Option<Jet>> {
        if !self.mode.is_modified() {
            return Ok(None);
        }
        self.soliton_potential(c)
    }

    /// Potential `f` with `Ric = ∇∇f`, when the solution is a gradient soliton.
    pub fn soliton_potential(&self, c: &Coords) -> Result<Option<Jet>> {
        Ok(match &self.kind {
            SolutionKind::Flat { affine } => Some(match affine {
                Some(a) => {
                    let terms: Vec<Jet> = c.x.iter().zip(a).map(|(x, a)| x.scale(*a)).collect();
                    crate::jets::sum(&terms).unwrap_or_else(|| c.constant(0.0))
                }
                None => c.constant(0.0),
            }),
            SolutionKind::ShrinkingSphere { .. } => None,
            SolutionKind::CigarFlow => Some((c.t.scale(4.0).exp() + c.radius_sq()).ln()?),
            SolutionKind::CigarStatic => Some(c.radius_sq().add_scalar(1.0).ln()?),
        })
    }

    pub fn has_soliton_potential(&self) -> bool {
        !matches!(self.kind, SolutionKind::ShrinkingSphere { .. })
    }

    /// All spatial geometry at a point, as jets of the given order.
    pub fn geometry(&self, p: &Point, order: usize) -> Result<Geometry> {
        self.check_point(p)?;
        let coords = Coords::new(p, order);
        let metric = MetricSample::new(self.metric_jets(&coords)?)?;
        let potential = self.flow_potential(&coords)?;
        let soliton = self.soliton_potential(&coords)?;
        Geometry::from_metric(p.clone(), coords, metric, potential, soliton)
    }
}

/// Metric, Levi-Civita connection and curvature of a solution at one point.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub point: Point,
    pub coords: Coords,
    pub metric: MetricSample,
    pub conn: Connection,
    /// `R_{ijk}^l` at index `(i, j, k, l)`.
    pub riem: Tensor<Jet>,
    pub ric: Tensor<Jet>,
    pub scalar: Jet,
    /// Modified-flow potential; `None` means `f ≡ 0`.
    pub potential: Option<Jet>,
    pub soliton_potential: Option<Jet>,
}

impl Geometry {
    pub fn from_metric(
        point: Point,
        coords: Coords,
        metric: MetricSample,
        potential: Option<Jet>,
        soliton_potential: Option<Jet>,
    ) -> Result<Geometry> {
        let conn = christoffel(&metric)?;
        let riem = curvature_from_connection(&conn)?;
        let ric = ricci(&riem)?;
        let scalar = trace_with(&ric, &metric.g_inv);
        Ok(Geometry {
            point,
            coords,
            metric,
            conn,
            riem,
            ric,
            scalar,
            potential,
            soliton_potential,
        })
    }

    pub fn dim(&self) -> usize {
        self.point.x.len()
    }

    pub fn range(&self) -> IndexRange {
        IndexRange::Spatial(self.dim())
    }

    pub fn g(&self) -> &Tensor<Jet> {
        &self.metric.g
    }

    pub fn g_inv(&self) -> &Tensor<Jet> {
        &self.metric.g_inv
    }

    pub fn nabla(&self, t: &Tensor<Jet>) -> Result<Tensor<Jet>> {
        covariant_derivative(t, &self.conn)
    }

    pub fn laplacian(&self, t: &Tensor<Jet>) -> Result<Tensor<Jet>> {
        laplacian(t, &self.conn, self.g_inv())
    }

    pub fn scalar_field(&self, f: &Jet) -> Tensor<Jet> {
        Tensor::from_fn(self.range(), vec![], |_| f.clone())
    }

    /// `∂_i f` as a 1-form.
    pub fn gradient(&self, f: &Jet) -> Result<Tensor<Jet>> {
        let range = self.range();
        Tensor::try_from_fn(range, vec![Variance::Down], |ix| f.diff(range.var(ix[0])))
    }

    /// `∇_i ∇_j f`.
    pub fn hessian(&self, f: &Jet) -> Result<Tensor<Jet>> {
        self.nabla(&self.gradient(f)?)
    }

    /// `R_i^k` at index `(i, k)`.
    pub fn ric_mixed(&self) -> Tensor<Jet> {
        raise(&self.ric, 1, self.g_inv())
    }

    /// `R_{ijkl} = g_{lm} R_{ijk}^m`.
    pub fn riem_lowered(&self) -> Tensor<Jet> {
        lower(&self.riem, 3, self.g())
    }

    pub fn zero(&self) -> Jet {
        self.coords.constant(0.0)
    }

    /// Modified-flow potential, with `f ≡ 0` for plain flows.
    pub fn potential_or_zero(&self) -> Jet {
        self.potential.clone().unwrap_or_else(|| self.zero())
    }

    /// `∂_t g_ij`.
    pub fn metric_time_derivative(&self) -> Result<Tensor<Jet>> {
        Tensor::try_from_fn(self.range(), vec![Variance::Down; 2], |ix| {
            self.g().get(ix).diff(0)
        })
    }
}

/// `∂_t g_ij + 2R_ij` (plain) or `∂_t g_ij + 2R_ij − 2∇_i∇_j f` (modified).
#[derive(Debug, Clone)]
pub struct FlowResidual {
    pub residual: Tensor<f64>,
    pub fit: Residual,
}

pub fn flow_residual(s: &FlowSolution, p: &Point, order: usize) -> Result<FlowResidual> {
    let geo = s.geometry(p, order.max(3))?;
    let dg = geo.metric_time_derivative()?.values();
    let ric = geo.ric.values();
    let hess = match &geo.potential {
        Some(f) => Some(geo.hessian(f)?.values()),
        None => None,
    };
    let mut pairs = Vec::new();
    let residual = Tensor::from_fn(geo.range(), vec![Variance::Down; 2], |ix| {
        let lhs = *dg.get(ix);
        let mut rhs = -2.0 * ric.get(ix);
        if let Some(h) = &hess {
            rhs += 2.0 * h.get(ix);
        }
        pairs.push((lhs, rhs));
        lhs - rhs
    });
    Ok(FlowResidual {
        residual,
        fit: Residual::from_pairs(pairs),
    })
}

/// Residuals of the steady gradient soliton relations for `V = df`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolitonResiduals {
    /// `R_ij − ∇_i V_j`.
    pub ric_hessian: Residual,
    /// `½∇_j R + R_jk V^k`.
    pub divergence: Residual,
    /// `R − div V`.
    pub trace: Residual,
    /// `dV`.
    pub closed: Residual,
    /// `∂_t V_j − ΔV_j + R_j^l V_l`; only defined on plain Ricci flows.
    pub heat: Option<Residual>,
    /// `Δ_d V_j − (ΔV_j − R_j^l V_l)`.
    pub hodge: Residual,
}

pub fn soliton_residuals(s: &FlowSolution, p: &Point, order: usize) -> Result<SolitonResiduals> {
    let geo = s.geometry(p, order.max(4))?;
    let f = geo.soliton_potential.clone().ok_or_else(|| {
        LabError::MissingPotential(format!("{} has no soliton potential", s.name))
    })?;
    let n = geo.dim();
    let v = geo.gradient(&f)?;
    let nabla_v = geo.nabla(&v)?;
    let nv = nabla_v.values();
    let ric = geo.ric.values();
    let v_up = raise(&v, 0, geo.g_inv()).values();
    let ric_mixed = geo.ric_mixed().values();
    let grad_r = geo.gradient(&geo.scalar)?.values();

    let ric_hessian =
        Residual::from_pairs(tensor::index_tuples(n, 2).map(|ix| (*ric.get(&ix), *nv.get(&ix))));
    let divergence = (0..n)
        .map(|j| {
            let a = 0.5 * grad_r.get(&[j]);
            let b: f64 = (0..n).map(|k| ric.get(&[j, k]) * v_up.get(&[k])).sum();
            Residual::vanishing(a + b, [a, b])
        })
        .collect();
    let div_v = trace_with(&nabla_v, geo.g_inv()).value();
    let trace = Residual::from_pairs([(geo.scalar.value(), div_v)]);
    let closed = Residual::from_pairs(
        tensor::index_tuples(n, 2).map(|ix| (*nv.get(&ix), *nv.get(&[ix[1], ix[0]]))),
    );

    let lap_v = geo.laplacian(&v)?.values();
    let ric_v: Vec<f64> = (0..n)
        .map(|j| {
            (0..n)
                .map(|l| ric_mixed.get(&[j, l]) * v.get(&[l]).value())
                .sum()
        })
        .collect();
    let heat = if s.mode.is_modified() {
        None
    } else {
        let dt_v: Vec<f64> = (0..n)
            .map(|j| v.get(&[j]).diff(0).map(|d| d.value()))
            .collect::<Result<_>>()?;
        Some(Residual::from_pairs(
            (0..n).map(|j| (dt_v[j], lap_v.get(&[j]) - ric_v[j])),
        ))
    };
    let hodge_v = hodge_laplacian_one_form(&v, &geo.conn, geo.g_inv())?.values();
    let hodge =
        Residual::from_pairs((0..n).map(|j| (*hodge_v.get(&[j]), lap_v.get(&[j]) - ric_v[j])));
    Ok(SolitonResiduals {
        ric_hessian,
        divergence,
        trace,
        closed,
        heat,
        hodge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere(n: usize, c0: f64) -> FlowSolution {
        FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(n, c0)).unwrap()
    }

    #[test]
    fn make_validates_names_and_params() {
        assert!(matches!(
            FlowSolution::make("torus", &SolutionParams::default()),
            Err(LabError::Config(_))
        ));
        assert!(FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(4, 1.0)).is_err());
        assert!(FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(2, -1.0)).is_err());
        assert!(FlowSolution::make(
            "cigar_flow",
            &SolutionParams {
                n: Some(3),
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn sphere_domain_ends_when_radius_vanishes() {
        let s = sphere(2, 1.0);
        assert_eq!(s.domain.t_min, 0.0);
        assert!((s.domain.t_max - 0.5).abs() < 1e-15);
        assert!(s.check_point(&Point::new([0.0, 0.0], 0.5)).is_err());
        assert!(s.check_point(&Point::new([0.0, 0.0], 0.49)).is_ok());
        assert!(s.check_point(&Point::new([3.0, 0.0], 0.1)).is_err());
    }

    #[test]
    fn flat_residual_is_exactly_zero() {
        let s = FlowSolution::make("flat", &SolutionParams::flat(2, None)).unwrap();
        let r = flow_residual(&s, &Point::new([0.3, -0.2], 0.1), 4).unwrap();
        assert_eq!(r.residual.max_abs(), 0.0);
    }

    #[test]
    fn cigar_static_potential_is_critical_at_origin() {
        let s = FlowSolution::make("cigar_static", &SolutionParams::default()).unwrap();
        let c = Coords::new(&Point::new([0.0, 0.0], 0.0), 2);
        let f = s.soliton_potential(&c).unwrap().unwrap();
        assert_eq!(f.partial(&[0, 1, 0]).unwrap(), 0.0);
        assert_eq!(f.partial(&[0, 0, 1]).unwrap(), 0.0);
    }

    #[test]
    fn sphere_flow_residual_small() {
        let s = sphere(2, 1.0);
        for (x, t) in [([0.3, 0.5], 0.05), ([-1.2, 0.7], 0.4), ([0.0, 0.0], 0.2)] {
            let r = flow_residual(&s, &Point::new(x, t), 4).unwrap();
            assert!(r.fit.passes(1e-10), "{:?}", r.fit);
        }
    }

    #[test]
    fn cigar_flow_residual_small() {
        let s = FlowSolution::make("cigar_flow", &SolutionParams::default()).unwrap();
        let r = flow_residual(&s, &Point::new([1.0, 0.0], 0.1), 4).unwrap();
        assert!(r.residual.max_abs() < 1e-10);
    }

    #[test]
    fn cigar_static_soliton_spot_values() {
        let s = FlowSolution::make("cigar_static", &SolutionParams::default()).unwrap();
        let geo = s.geometry(&Point::new([1.0, 0.0], 0.0), 4).unwrap();
        let grad_r = geo.gradient(&geo.scalar).unwrap();
        assert!((grad_r.get(&[0]).value() + 2.0).abs() < 1e-12);
        assert!((geo.ric_mixed().get(&[0, 0]).value() - 1.0).abs() < 1e-12);
        let res = soliton_residuals(&s, &Point::new([1.0, 0.0], 0.0), 4).unwrap();
        assert!(res.divergence.passes(1e-12));
        assert!(res.ric_hessian.passes(1e-12));
        assert!(res.heat.is_none());
    }

    #[test]
    fn soliton_on_sphere_is_missing_potential() {
        let s = sphere(2, 1.0);
        assert!(matches!(
            soliton_residuals(&s, &Point::new([0.0, 0.0], 0.0), 4),
            Err(LabError::MissingPotential(_))
        ));
    }

    #[test]
    fn sphere_time_shift_coherence() {
        let s = sphere(3, 1.0);
        let shifted = sphere(3, 1.0 - 4.0 * 0.1);
        let a = s.geometry(&Point::new([0.2, -0.4, 0.9], 0.15), 3).unwrap();
        let b = shifted
            .geometry(&Point::new([0.2, -0.4, 0.9], 0.05), 3)
            .unwrap();
        assert!(a.metric.g.values().max_diff(&b.metric.g.values()) < 1e-12);
        assert!(a.ric.values().max_diff(&b.ric.values()) < 1e-12);
    }
}
