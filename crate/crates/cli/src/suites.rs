//! The verification suites. Each suite measures a list of named checks at
//! seeded sample points; the worst value per check is reported.

use std::collections::BTreeMap;

use harnack_lab::approx::{
    approx_connection_check, approx_curvature_check, approx_metric, induced_bracket_and_inner,
    lambda2_decomposition, limit_sweep, Lambda2Scaling, Schedule, SweepResult,
};
use harnack_lab::harnack::{
    p_identities, soliton_uw_checks, wedge_substitution_residual, HarnackData, HarnackTensors,
    OneFormField, TwoFormField,
};
use harnack_lab::lie::{
    bracket_parts, jacobi_residual, sharp_square, structure_constants, two_form_inner, BracketMode,
    LieBasis,
};
use harnack_lab::sampling::{
    aux_rng, random_antisymmetric, random_block_orthogonal, random_symmetric, random_vector,
    sample_points,
};
use harnack_lab::solutions::{flow_residual, soliton_residuals, SolutionKind};
use harnack_lab::spacetime::{
    bianchi_identity_residuals, build_spacetime_connection, compare_curvature,
    compatibility_and_torsion, connection_blocks, degenerate_flow_residual,
    harnack_equals_curvature, spacetime_ricci, spacetime_t_derivatives, CurvatureBlock,
    SpacetimeConnection, TimeForm,
};
use harnack_lab::{FlowSolution, LabError, Point, Residual, Result};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{RunConfig, ALL_SUITES};

/// Check name and normalized residual at one sample.
type Obs = Vec<(&'static str, f64)>;

/// Worst value of one check over a suite's samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Measured {
    pub check: &'static str,
    pub residual: f64,
    pub point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOutcome {
    pub checks: Vec<Measured>,
    pub notes: BTreeMap<String, f64>,
    pub sweeps: Vec<(String, SweepResult)>,
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    s: &'a FlowSolution,
    stream: u64,
}

impl Ctx<'_> {
    fn order(&self) -> usize {
        self.cfg.order
    }

    fn n(&self) -> usize {
        self.s.dim
    }

    /// Sample points whose shifted time `t + τ` stays inside the domain.
    fn points(&self, count: usize, t_lo: f64, t_hi: f64) -> Vec<Point> {
        let top = 0.9 * (self.s.domain.t_max - self.cfg.tau);
        sample_points(self.s, count, self.cfg.seed, t_lo.min(top), t_hi.min(top))
    }

    fn general_points(&self) -> Vec<Point> {
        self.points(self.cfg.points, 0.0, f64::INFINITY)
    }

    /// Independent random stream per (suite, sample).
    fn rng(&self, sample: usize) -> ChaCha8Rng {
        aux_rng(self.cfg.seed, (self.stream << 32) | sample as u64)
    }

    fn connection(&self, p: &Point) -> Result<SpacetimeConnection> {
        build_spacetime_connection(self.s, p, self.cfg.tau, self.order())
    }
}

fn norm(r: Residual) -> f64 {
    r.normalized()
}

/// How far `v` falls below zero.
fn below_zero(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        (-v).max(0.0)
    }
}

/// `max |r − ½| / ½` over consecutive ratios of `values`; pairs that are
/// both at roundoff level count as converged.
fn halving_defect(values: &[f64], floor: f64) -> f64 {
    values
        .windows(2)
        .map(|w| {
            if w[0].abs() <= floor && w[1].abs() <= floor {
                0.0
            } else {
                let r = w[1] / w[0];
                if r.is_nan() {
                    f64::INFINITY
                } else {
                    (r - 0.5).abs() / 0.5
                }
            }
        })
        .fold(0.0, f64::max)
}

fn point_vec(p: &Point) -> Vec<f64> {
    let mut v = p.x.clone();
    v.push(p.t);
    v
}

/// Keeps the worst value per check, in order of first appearance.
fn merge(samples: Vec<(Option<Vec<f64>>, Obs)>) -> Vec<Measured> {
    let mut out: Vec<Measured> = Vec::new();
    for (point, obs) in samples {
        for (check, value) in obs {
            let value = if value.is_nan() { f64::INFINITY } else { value };
            match out.iter_mut().find(|m| m.check == check) {
                Some(m) if value > m.residual => {
                    m.residual = value;
                    m.point = point.clone();
                }
                Some(_) => {}
                None => out.push(Measured {
                    check,
                    residual: value,
                    point: point.clone(),
                }),
            }
        }
    }
    out
}

/// Evaluates `f` at every point in parallel and merges in point order.
fn per_point<F>(points: &[Point], f: F) -> Result<Vec<Measured>>
where
    F: Fn(usize, &Point) -> Result<Obs> + Sync,
{
    let samples = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| f(i, p).map(|obs| (Some(point_vec(p)), obs)))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge(samples))
}

fn random_data(rng: &mut impl Rng, n: usize) -> Result<HarnackData> {
    HarnackData::new(random_antisymmetric(rng, n), random_vector(rng, n))
}

pub fn run_suite(cfg: &RunConfig, s: &FlowSolution, name: &str) -> Result<SuiteOutcome> {
    let stream = ALL_SUITES.iter().position(|k| *k == name).unwrap_or(0) as u64;
    let ctx = Ctx { cfg, s, stream };
    let checks = match name {
        "flow" => flow(&ctx)?,
        "soliton" => soliton(&ctx)?,
        "harnack-defs" => harnack_defs(&ctx)?,
        "harnack-ineq" => harnack_ineq(&ctx)?,
        "spacetime-conn" => spacetime_conn(&ctx)?,
        "spacetime-curv" => spacetime_curv(&ctx)?,
        "deg-flow" => deg_flow(&ctx)?,
        "bianchi" => bianchi(&ctx)?,
        "harnack-curvature" => harnack_curvature(&ctx)?,
        "approx-conn" => approx_conn(&ctx)?,
        "approx-curv" => approx_curv(&ctx)?,
        "limits" => return limits(&ctx),
        other => return Err(LabError::Config(format!("unknown suite '{other}'"))),
    };
    Ok(SuiteOutcome {
        checks,
        ..SuiteOutcome::default()
    })
}

fn flow(ctx: &Ctx) -> Result<Vec<Measured>> {
    let id = if ctx.s.mode.is_modified() {
        "modified_flow"
    } else {
        "ricci_flow"
    };
    per_point(&ctx.general_points(), |_, p| {
        Ok(vec![(id, norm(flow_residual(ctx.s, p, ctx.order())?.fit))])
    })
}

fn soliton(ctx: &Ctx) -> Result<Vec<Measured>> {
    let n = ctx.n();
    let flat = matches!(ctx.s.kind, SolutionKind::Flat { .. });
    let parallel_tol = ctx.cfg.tolerance("soliton.u_parallel", 1e-8);
    per_point(&ctx.general_points(), |i, p| {
        let mut rng = ctx.rng(i);
        let r = soliton_residuals(ctx.s, p, ctx.order())?;
        let mut obs = vec![
            ("ric_hessian", norm(r.ric_hessian)),
            ("closed", norm(r.closed)),
            ("trace", norm(r.trace)),
            ("divergence", norm(r.divergence)),
        ];
        if let Some(h) = r.heat {
            obs.push(("heat", norm(h)));
        }
        obs.push(("hodge", norm(r.hodge)));

        // constant forms are parallel only on flat space
        let field = if flat {
            TwoFormField::Constant(random_antisymmetric(&mut rng, n))
        } else {
            TwoFormField::VolumeForm(1.0)
        };
        match soliton_uw_checks(ctx.s, &field, p, ctx.order(), parallel_tol) {
            Ok(uw) => {
                obs.push(("u_parallel", norm(uw.parallel)));
                obs.push(("w_gradient", norm(uw.w_gradient)));
                obs.push(("w_derivation", norm(uw.display_equivalence)));
                if let (Some(h), Some(d)) = (uw.heat, uw.heat_display) {
                    obs.push(("w_heat", norm(h.worst(d))));
                }
            }
            Err(LabError::NotParallel(v)) => obs.push(("u_parallel", v)),
            Err(e) => return Err(e),
        }

        let ric = random_symmetric(&mut rng, n);
        let v = random_vector(&mut rng, n);
        let w = random_vector(&mut rng, n);
        obs.push(("wedge", norm(wedge_substitution_residual(&ric, &v, &w))));
        Ok(obs)
    })
}

fn harnack_defs(ctx: &Ctx) -> Result<Vec<Measured>> {
    let n = ctx.n();
    per_point(&ctx.general_points(), |i, p| {
        let mut rng = ctx.rng(i);
        let ht = HarnackTensors::at(ctx.s, p, ctx.order())?;
        let (cyclic, anti) = p_identities(&ht.p);
        let m = &ht.m;
        let m_sym = Residual::from_pairs(
            (0..n)
                .flat_map(|a| (0..n).map(move |b| (a, b)))
                .map(|(a, b)| (m[(a, b)], m[(b, a)])),
        );

        let d = random_data(&mut rng, n)?;
        let lambda = rng.gen_range(0.5..2.0);
        let z = ht.z(&d, false)?;
        let z_scaled = ht.z(&d.scaled(lambda), false)?;
        let d0 = HarnackData::new(DMatrix::zeros(n, n), d.w.clone())?;
        let w_up = &ht.g_inv * &d.w;
        let mww = w_up.dot(&(&ht.m * &w_up));

        let mut obs = vec![
            ("p_antisymmetry", norm(anti)),
            ("p_cyclic", norm(cyclic)),
            ("m_symmetry", norm(m_sym)),
            (
                "z_quadratic",
                norm(Residual::from_pairs([(z_scaled, lambda * lambda * z)])),
            ),
            (
                "z_u_zero",
                norm(Residual::from_pairs([(ht.z(&d0, false)?, mww)])),
            ),
        ];
        obs.extend(algebra(&mut rng, &ht.g, &ht.g_inv)?);
        Ok(obs)
    })
}

/// Bracket, inner product and `#` checks at the metric `g`.
fn algebra(rng: &mut ChaCha8Rng, g: &DMatrix<f64>, g_inv: &DMatrix<f64>) -> Result<Obs> {
    let n = g.nrows();
    let elems: Vec<(DMatrix<f64>, DVector<f64>)> = (0..3)
        .map(|_| (random_antisymmetric(rng, n), random_vector(rng, n)))
        .collect();
    let as_ref = |k: usize| (&elems[k].0, &elems[k].1);
    let mut obs = Obs::new();
    for (mode, id) in [
        (BracketMode::Direct, "jacobi_direct"),
        (BracketMode::Spacetime, "jacobi_spacetime"),
        (BracketMode::Mixed, "jacobi_mixed"),
    ] {
        let r = jacobi_residual(as_ref(0), as_ref(1), as_ref(2), g, g_inv, mode);
        obs.push((id, norm(r)));
    }
    let ((u0, w0), i0) = bracket_parts(as_ref(0), as_ref(1), g, g_inv, BracketMode::Direct);
    for (mode, id) in [
        (BracketMode::Spacetime, "modes_spacetime"),
        (BracketMode::Mixed, "modes_mixed"),
    ] {
        let ((u1, w1), i1) = bracket_parts(as_ref(0), as_ref(1), g, g_inv, mode);
        let pairs = u1
            .iter()
            .zip(u0.iter())
            .chain(w1.iter().zip(w0.iter()))
            .map(|(a, b)| (*a, *b))
            .chain([(i1, i0)]);
        obs.push((id, norm(Residual::from_pairs(pairs))));
    }
    let u_sq = two_form_inner(&elems[0].0, &elems[0].0, g_inv);
    let inner_free = [BracketMode::Spacetime, BracketMode::Mixed]
        .into_iter()
        .map(|mode| {
            let (_, inner) = bracket_parts(as_ref(0), as_ref(0), g, g_inv, mode);
            Residual::from_pairs([(inner, u_sq)])
        })
        .collect::<Residual>();
    obs.push(("inner_w_free", norm(inner_free)));

    let basis = LieBasis::new(g)?;
    let len = basis.len();
    let c = structure_constants(&basis, BracketMode::Direct);
    let q = random_symmetric(rng, len);
    let qs = sharp_square(&q, &c)?;
    let sym = Residual::from_pairs(qs.iter().zip(qs.transpose().iter()).map(|(a, b)| (*a, *b)));
    obs.push(("sharp_symmetry", norm(sym)));

    let o = random_block_orthogonal(rng, basis.two.len(), basis.one.len());
    let rotated = basis.transformed(&o)?;
    let c_rot = structure_constants(&rotated, BracketMode::Direct);
    let lhs = sharp_square(&(&o * &q * o.transpose()), &c_rot)?;
    let rhs = &o * &qs * o.transpose();
    let rot = Residual::from_pairs(lhs.iter().zip(rhs.iter()).map(|(a, b)| (*a, *b)));
    obs.push(("sharp_rotation", norm(rot)));

    let c_mixed = structure_constants(&basis, BracketMode::Mixed);
    let qm = sharp_square(&q, &c_mixed)?;
    let modes = Residual::from_pairs(qm.iter().zip(qs.iter()).map(|(a, b)| (*a, *b)));
    obs.push(("sharp_modes", norm(modes)));
    Ok(obs)
}

fn harnack_ineq(ctx: &Ctx) -> Result<Vec<Measured>> {
    let n = ctx.n();
    let points = ctx.points(ctx.cfg.points, 0.05, 0.4);
    per_point(&points, |i, p| {
        let mut rng = ctx.rng(i);
        let geo = ctx.s.geometry(p, ctx.order())?;
        let ht = HarnackTensors::from_geometry(&geo)?;
        let mut trace_worst: f64 = 0.0;
        let mut z_worst: f64 = 0.0;
        for _ in 0..ctx.cfg.draws {
            let v = random_vector(&mut rng, n) * 2.0;
            trace_worst = trace_worst.max(below_zero(ht.trace(&v, true)?));
            let d = random_data(&mut rng, n)?;
            z_worst = z_worst.max(below_zero(ht.z(&d, true)?));
        }
        let mut obs = vec![("trace", trace_worst), ("z", z_worst)];
        if let Some(f) = &geo.soliton_potential {
            let df = DVector::from_column_slice(geo.gradient(f)?.values().components());
            let v = &ht.g_inv * df;
            let value = ht.trace(&v, false)?;
            let terms = [
                ht.dt_scalar,
                2.0 * ht.grad_scalar.dot(&v),
                2.0 * v.dot(&(&ht.ric * &v)),
            ];
            obs.push(("steady_equality", norm(Residual::vanishing(value, terms))));
        }
        Ok(obs)
    })
}

/// `U` and `W` fields for the space-time derivative comparison, and whether
/// `U` is parallel so that the heat blocks apply.
fn t_fields(ctx: &Ctx, rng: &mut ChaCha8Rng) -> (TwoFormField, OneFormField, bool) {
    let n = ctx.n();
    match ctx.s.kind {
        SolutionKind::CigarFlow => {
            let u = TwoFormField::EvolvingVolumeForm(1.0);
            (u.clone(), OneFormField::Interior(u), true)
        }
        SolutionKind::Flat { .. } => (
            TwoFormField::Constant(random_antisymmetric(rng, n)),
            OneFormField::Constant(random_vector(rng, n)),
            true,
        ),
        _ => (
            TwoFormField::Affine {
                constant: random_antisymmetric(rng, n),
                linear: (0..n).map(|_| random_antisymmetric(rng, n)).collect(),
            },
            OneFormField::Affine {
                constant: random_vector(rng, n),
                linear: DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0)),
            },
            false,
        ),
    }
}

fn spacetime_conn(ctx: &Ctx) -> Result<Vec<Measured>> {
    let plain = !ctx.s.mode.is_modified();
    per_point(&ctx.general_points(), |i, p| {
        let mut rng = ctx.rng(i);
        let c = ctx.connection(p)?;
        let [spatial, upper, mixed, time] = connection_blocks(&c)?;
        let comp = compatibility_and_torsion(&c)?;
        let mut obs = vec![
            ("metric", c.metric_defect()),
            ("spatial_block", norm(spatial)),
            ("upper_time", norm(upper)),
            ("mixed_block", norm(mixed)),
            ("time_block", norm(time)),
            ("compatibility", norm(comp.compatibility)),
            ("torsion", comp.torsion),
        ];
        if plain {
            let (u, w, parallel) = t_fields(ctx, &mut rng);
            let r = spacetime_t_derivatives(&c, &u, &w)?;
            obs.push(("u_gradient", norm(r.u_gradient)));
            obs.push(("w_gradient", norm(r.w_gradient)));
            if parallel {
                obs.push(("u_heat", norm(r.u_heat)));
                obs.push(("w_heat", norm(r.w_heat)));
            }
        }
        Ok(obs)
    })
}

fn spacetime_curv(ctx: &Ctx) -> Result<Vec<Measured>> {
    per_point(&ctx.general_points(), |_, p| {
        let c = ctx.connection(p)?;
        let ell = compare_curvature(&c, TimeForm::Elliptic)?;
        let par = compare_curvature(&c, TimeForm::Parabolic)?;
        let ric = spacetime_ricci(&c)?;
        Ok(vec![
            ("spatial", norm(ell.block(CurvatureBlock::Spatial))),
            ("upper_time", norm(ell.block(CurvatureBlock::UpperTime))),
            ("mixed", norm(ell.block(CurvatureBlock::Mixed))),
            ("mixed_prime", norm(ell.block(CurvatureBlock::MixedPrime))),
            ("time_elliptic", norm(ell.block(CurvatureBlock::TimeTime))),
            ("time_parabolic", norm(par.block(CurvatureBlock::TimeTime))),
            ("degenerate", norm(ell.block(CurvatureBlock::Degenerate))),
            ("ricci_spatial", norm(ric.spatial)),
            ("ricci_mixed", norm(ric.mixed)),
            ("ricci_time", norm(ric.time_parabolic_traced)),
            ("ricci_time_elliptic", norm(ric.time_elliptic)),
            ("scalar", norm(ric.scalar)),
        ])
    })
}

fn deg_flow(ctx: &Ctx) -> Result<Vec<Measured>> {
    per_point(&ctx.general_points(), |_, p| {
        let r = degenerate_flow_residual(&ctx.connection(p)?)?;
        Ok(vec![
            ("metric", norm(r.metric)),
            ("spatial", norm(r.spatial)),
            ("case1", norm(r.case1)),
            ("case2", norm(r.case2)),
            ("upper_time", norm(r.upper_time)),
        ])
    })
}

fn bianchi(ctx: &Ctx) -> Result<Vec<Measured>> {
    const LEMMA: [&str; 4] = ["lemma_1", "lemma_2", "lemma_3", "lemma_4"];
    const COROLLARY: [&str; 4] = ["corollary_1", "corollary_2", "corollary_3", "corollary_4"];
    per_point(&ctx.general_points(), |_, p| {
        let b = bianchi_identity_residuals(&ctx.connection(p)?)?;
        let mut obs = Obs::new();
        if let Some(r) = b.scalar {
            obs.push(("scalar", norm(r)));
        }
        obs.push(("second", norm(b.second)));
        obs.extend(LEMMA.iter().zip(b.lemma).map(|(id, r)| (*id, norm(r))));
        obs.push(("lemma_3_zero", norm(b.lemma_zero[0])));
        obs.push(("lemma_4_zero", norm(b.lemma_zero[1])));
        obs.extend(
            COROLLARY
                .iter()
                .zip(b.corollary)
                .map(|(id, r)| (*id, norm(r))),
        );
        obs.push(("unified", norm(b.unified)));
        Ok(obs)
    })
}

fn harnack_curvature(ctx: &Ctx) -> Result<Vec<Measured>> {
    let n = ctx.n();
    per_point(&ctx.general_points(), |i, p| {
        let mut rng = ctx.rng(i);
        let h = harnack_equals_curvature(&ctx.connection(p)?, &random_data(&mut rng, n)?)?;
        Ok(vec![
            ("identity", norm(h.difference)),
            ("expansion", norm(h.expansion)),
            ("closed_expansion", norm(h.closed_expansion)),
        ])
    })
}

fn approx_conn(ctx: &Ctx) -> Result<Vec<Measured>> {
    const ITEMS: [&str; 6] = ["item_1", "item_2", "item_3", "item_4", "item_5", "item_6"];
    let delta = ctx.cfg.approx.delta;
    per_point(&ctx.general_points(), |_, p| {
        let mut obs = Obs::new();
        for &eps in &ctx.cfg.approx.epsilons {
            let a = approx_metric(ctx.s, eps, delta)?.sample(p, ctx.order())?;
            let expect = a.geo.scalar.value() + eps / (2.0 * (p.t + delta));
            obs.push((
                "metric",
                norm(Residual::from_pairs([(a.d.value(), expect)])),
            ));
            obs.push(("block", a.block_defect()));
            let r = approx_connection_check(&a)?;
            obs.extend(ITEMS.iter().zip(r.items).map(|(id, r)| (*id, norm(r))));
            obs.push(("compatibility", norm(r.compatibility)));
        }
        Ok(obs)
    })
}

fn approx_curv(ctx: &Ctx) -> Result<Vec<Measured>> {
    const ITEMS: [&str; 3] = ["item_1", "item_2", "item_3"];
    let delta = ctx.cfg.approx.delta;
    let rate_eps = ctx.cfg.approx.rate_epsilon;
    per_point(&ctx.general_points(), |_, p| {
        let mut obs = Obs::new();
        for &eps in &ctx.cfg.approx.epsilons {
            let a = approx_metric(ctx.s, eps, delta)?.sample(p, ctx.order())?;
            let r = approx_curvature_check(&a)?;
            obs.extend(ITEMS.iter().zip(r.items).map(|(id, r)| (*id, norm(r))));
        }
        let corrections = [rate_eps, 2.0 * rate_eps]
            .iter()
            .map(|e| {
                let a = approx_metric(ctx.s, *e, delta)?.sample(p, ctx.order())?;
                Ok(approx_curvature_check(&a)?.item1_correction)
            })
            .collect::<Result<Vec<f64>>>()?;
        obs.push(("correction_rate", halving_defect(&corrections, 1e-14)));
        Ok(obs)
    })
}

struct LimitPoint {
    obs: Obs,
    sweeps: [SweepResult; 3],
    gap_c: f64,
}

fn limits(ctx: &Ctx) -> Result<SuiteOutcome> {
    let cfg = &ctx.cfg.sweep;
    let points = ctx.points(cfg.points, 0.05, f64::INFINITY);
    let schedules = [
        Schedule::joint(cfg.joint[0], cfg.joint[1]),
        Schedule::epsilon_then_delta(cfg.epsilon[0], cfg.epsilon[1], cfg.delta_pow),
        Schedule::quadratic(cfg.quadratic[0], cfg.quadratic[1]),
    ];
    let results = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| limit_point(ctx, &schedules, i, p))
        .collect::<Result<Vec<_>>>()?;

    let mut outcome = SuiteOutcome::default();
    let mut samples = Vec::new();
    for (k, (p, r)) in points.iter().zip(results).enumerate() {
        samples.push((Some(point_vec(p)), r.obs));
        if k == 0 {
            let [joint, eps_delta, quadratic] = r.sweeps;
            let last = eps_delta.rows.last().copied();
            outcome.notes.insert("gamma_gap_constant".into(), r.gap_c);
            if let Some(row) = last {
                outcome
                    .notes
                    .insert("final_target_gap".into(), row.target_gap);
                outcome
                    .notes
                    .insert("final_shifted_gap".into(), row.shifted_gap);
            }
            let w = cfg.window;
            if let Some(q) = quadratic.halving_ratios(w).last() {
                outcome.notes.insert("quadratic_last_ratio".into(), *q);
            }
            if let Some(j) = joint.halving_ratios(w).last() {
                outcome.notes.insert("joint_last_ratio".into(), *j);
            }
            outcome.sweeps = vec![
                ("limits_joint".into(), joint),
                ("limits_epsilon_delta".into(), eps_delta),
                ("limits_quadratic".into(), quadratic),
            ];
        }
    }
    outcome.checks = merge(samples);
    Ok(outcome)
}

fn limit_point(ctx: &Ctx, schedules: &[Schedule; 3], i: usize, p: &Point) -> Result<LimitPoint> {
    let n = ctx.n();
    let order = ctx.order();
    let window = ctx.cfg.sweep.window;
    let mut rng = ctx.rng(i);

    // U = 0 and a unit W, so that the limit is M(W,W) + R(W,W)/(2t)
    let geo = ctx.s.geometry(p, 2)?;
    let g_inv = geo.g_inv().values().to_matrix();
    let mut w = random_vector(&mut rng, n);
    w /= w.dot(&(&g_inv * &w)).sqrt();
    let d = HarnackData::new(DMatrix::zeros(n, n), w)?;

    let sweep = |k: usize| limit_sweep(ctx.s, p, &d, &schedules[k], order);
    let (joint, eps_delta, quadratic) = (sweep(0)?, sweep(1)?, sweep(2)?);

    let conn: Vec<f64> = joint.rows.iter().map(|r| r.conn_err).collect();
    let joint_defect = halving_defect(&conn[conn.len().saturating_sub(window)..], 0.0);

    let at_unit_delta: Vec<_> = eps_delta.rows.iter().filter(|r| r.delta == 1.0).collect();
    let gaps: Vec<f64> = at_unit_delta
        .iter()
        .map(|r| (r.gamma000 + 1.0 / (2.0 * (p.t + 1.0))).abs())
        .collect();
    let gap_defect = halving_defect(&gaps[gaps.len().saturating_sub(window)..], 1e-13);
    let gap_c = at_unit_delta
        .iter()
        .zip(&gaps)
        .map(|(r, g)| r.epsilon * g)
        .fold(0.0, f64::max);

    let curv = [&joint, &eps_delta, &quadratic]
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| r.curv_form_err))
        .fold(0.0, f64::max);
    let target_gap = eps_delta
        .rows
        .last()
        .map_or(f64::INFINITY, |r| r.target_gap);

    // Λ² split with the displayed D^{-1/2} scaling, then the induced inner
    // product of 0⊕W without it, which decays like 1/ε
    let delta = ctx.cfg.approx.delta;
    let m = approx_metric(ctx.s, ctx.cfg.approx.epsilons[0], delta)?;
    let root_d = m.time_entry_value(p)?.sqrt();
    let u = random_antisymmetric(&mut rng, n);
    let x = random_vector(&mut rng, n);
    let alpha = DMatrix::from_fn(n + 1, n + 1, |a, b| match (a, b) {
        (0, 0) => 0.0,
        (i, 0) => root_d * x[i - 1],
        (0, j) => -root_d * x[j - 1],
        (i, j) => u[(i - 1, j - 1)],
    });
    let (u2, x2) = lambda2_decomposition(&m, p, &alpha)?;
    let split = Residual::from_pairs(
        u2.iter()
            .zip(u.iter())
            .chain(x2.iter().zip(x.iter()))
            .map(|(a, b)| (*a, *b)),
    );
    let zero = DMatrix::zeros(n, n);
    let inners = [10, 11]
        .iter()
        .map(|k| {
            let m = approx_metric(ctx.s, 2f64.powi(*k), delta)?;
            let (_, inner) = induced_bracket_and_inner(
                &m,
                p,
                (&zero, &x),
                (&zero, &x),
                Lambda2Scaling::Unscaled,
            )?;
            Ok(inner)
        })
        .collect::<Result<Vec<f64>>>()?;

    Ok(LimitPoint {
        obs: vec![
            ("joint_halving", joint_defect),
            ("gamma_gap_rate", gap_defect),
            ("curvature_forms", curv),
            ("target_gap", target_gap),
            ("lambda2_split", norm(split)),
            ("lambda2_rate", halving_defect(&inners, 0.0)),
        ],
        sweeps: [joint, eps_delta, quadratic],
        gap_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_defect_measures_ratio_distance_from_one_half() {
        assert_eq!(halving_defect(&[8.0, 4.0, 2.0], 0.0), 0.0);
        assert!((halving_defect(&[1.0, 0.6], 0.0) - 0.2).abs() < 1e-15);
        assert_eq!(halving_defect(&[1.0, 1.0], 0.0), 1.0);
        assert_eq!(halving_defect(&[1e-15, 1e-15], 1e-13), 0.0);
        assert_eq!(halving_defect(&[0.0, 0.0], 0.0), 0.0);
        assert_eq!(halving_defect(&[1.0, f64::NAN], 0.0), f64::INFINITY);
    }

    #[test]
    fn merge_keeps_the_worst_sample_per_check() {
        let a = (Some(vec![0.0]), vec![("x", 1.0), ("y", 5.0)]);
        let b = (Some(vec![1.0]), vec![("x", 3.0), ("y", f64::NAN)]);
        let m = merge(vec![a, b]);
        assert_eq!(m[0].check, "x");
        assert_eq!((m[0].residual, m[0].point.clone()), (3.0, Some(vec![1.0])));
        assert_eq!(m[1].residual, f64::INFINITY);
    }

    #[test]
    fn below_zero_is_the_deficit() {
        assert_eq!(below_zero(2.0), 0.0);
        assert_eq!(below_zero(-0.5), 0.5);
        assert_eq!(below_zero(f64::NAN), f64::INFINITY);
    }
}
