use harnack_lab::approx::{approx_metric, gamma000_gap, induced_bracket_and_inner, Lambda2Scaling};
use harnack_lab::harnack::compute_p;
use harnack_lab::{FlowSolution, Point, SolutionParams};
use nalgebra::{DMatrix, DVector};

fn solution(name: &str, params: SolutionParams) -> FlowSolution {
    FlowSolution::make(name, &params).unwrap()
}

/// `R_{jk}` at a point from a low-order geometry.
fn ricci_at(s: &FlowSolution, x: [f64; 2]) -> DMatrix<f64> {
    s.geometry(&Point::new(x, 0.0), 2)
        .unwrap()
        .ric
        .values()
        .to_matrix()
}

#[test]
fn p_matches_finite_differences_on_the_static_cigar() {
    let s = solution("cigar_static", SolutionParams::default());
    let base = [1.0, 0.0];
    let h = 1e-3;
    let geo = s.geometry(&Point::new(base, 0.0), 2).unwrap();
    let ric = geo.ric.values().to_matrix();
    let gamma = |k: usize, i: usize, j: usize| geo.conn.get(k, i, j).value();

    // ∂_i R_jk by central differences
    let d_ric: Vec<DMatrix<f64>> = (0..2)
        .map(|i| {
            let mut plus = base;
            let mut minus = base;
            plus[i] += h;
            minus[i] -= h;
            (ricci_at(&s, plus) - ricci_at(&s, minus)) / (2.0 * h)
        })
        .collect();
    let nabla = |i: usize, j: usize, k: usize| {
        let mut v = d_ric[i][(j, k)];
        for m in 0..2 {
            v -= gamma(m, i, j) * ric[(m, k)] + gamma(m, i, k) * ric[(j, m)];
        }
        v
    };

    let p = compute_p(&s, &Point::new(base, 0.0), 5).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                let fd = nabla(i, j, k) - nabla(j, i, k);
                worst = worst.max((p.get(&[i, j, k]) - fd).abs());
            }
        }
    }
    assert!(p.max_abs() > 1e-2, "P vanishes at the test point");
    assert!(worst <= 1e-6, "P vs finite differences: {worst:e}");
}

#[test]
fn unscaled_inner_product_of_time_forms_decays_like_one_over_epsilon() {
    let s = solution("shrinking_sphere", SolutionParams::sphere(2, 1.0));
    let p = Point::new([0.4, -0.3], 0.1);
    let zero = DMatrix::zeros(2, 2);
    let w = DVector::from_vec(vec![0.7, -1.2]);
    let inner = |k: i32, scaling| {
        let m = approx_metric(&s, 2f64.powi(k), 1.0).unwrap();
        induced_bracket_and_inner(&m, &p, (&zero, &w), (&zero, &w), scaling)
            .unwrap()
            .1
    };
    for k in 10..14 {
        let ratio = inner(k + 1, Lambda2Scaling::Unscaled) / inner(k, Lambda2Scaling::Unscaled);
        assert!((ratio - 0.5).abs() <= 0.5 * 0.01, "k = {k}: ratio {ratio}");
    }
    // the displayed scaling keeps the pairing at |W|² in the limit
    let geo = s.geometry(&p, 2).unwrap();
    let w_sq = w.dot(&(geo.g_inv().values().to_matrix() * &w));
    let literal = inner(20, Lambda2Scaling::Literal);
    assert!(
        (literal - 2.0 * w_sq).abs() <= 1e-12 * literal.abs(),
        "{literal} vs {w_sq}"
    );
}

#[test]
fn time_christoffel_gap_is_below_ten_over_epsilon_at_time_zero() {
    let s = solution("shrinking_sphere", SolutionParams::sphere(2, 1.0));
    let p = Point::new([0.5, 0.2], 0.0);
    for k in 4..16 {
        let eps = 2f64.powi(k);
        let gap = gamma000_gap(&s, &p, eps, 1.0, 5).unwrap();
        assert!(gap <= 10.0 / eps, "ε = 2^{k}: gap {gap:e}");
        // ε · gap → (t+δ)∂_t R + R = 4 + 2
        if k >= 12 {
            assert!(
                (eps * gap - 6.0).abs() < 0.05,
                "ε = 2^{k}: ε·gap {}",
                eps * gap
            );
        }
    }
}
