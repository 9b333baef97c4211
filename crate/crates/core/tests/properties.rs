use harnack_lab::harnack::{HarnackData, HarnackTensors};
use harnack_lab::jets::Jet;
use harnack_lab::lie::{
    jacobi_residual, sharp_square, structure_constants, BracketMode, LieBasis, BRACKET_MODES,
};
use harnack_lab::sampling::{
    aux_rng, random_antisymmetric, random_block_orthogonal, random_symmetric, random_vector,
};
use harnack_lab::{FlowSolution, Point, Residual, SolutionParams};
use nalgebra::DMatrix;
use proptest::prelude::*;

const ORDER: usize = 5;

fn vars(x: f64, y: f64) -> (Jet, Jet) {
    (
        Jet::seed(0, x, 2, ORDER).unwrap(),
        Jet::seed(1, y, 2, ORDER).unwrap(),
    )
}

/// `ln(2 + x² + y) · sqrt(3 + xy) + exp(x − y)`.
fn sample_fn(x: &Jet, y: &Jet) -> Jet {
    let a = (x * x + y).add_scalar(2.0).ln().unwrap();
    let b = (x * y).add_scalar(3.0).sqrt().unwrap();
    &a * &b + (x - y).exp()
}

fn sample_value(x: f64, y: f64) -> f64 {
    (2.0 + x * x + y).ln() * (3.0 + x * y).sqrt() + (x - y).exp()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn spd(seed: u64, n: usize) -> DMatrix<f64> {
    let mut rng = aux_rng(seed, 1);
    let a = DMatrix::from_fn(n, n, |_, _| rand::Rng::gen_range(&mut rng, -1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        failure_persistence: None,
        ..ProptestConfig::with_cases(cases)
    }
}

proptest! {
    #![proptest_config(config(64))]

    #[test]
    fn product_rule_holds_coefficientwise(x in -0.9f64..0.9, y in -0.9f64..0.9) {
        let (u, v) = vars(x, y);
        let f = (&u * &v).add_scalar(1.5).ln().unwrap();
        let g = (&u - &v * 0.5).exp();
        let fg = &f * &g;
        for var in 0..2 {
            let lhs = fg.diff(var).unwrap();
            let rhs = &f.diff(var).unwrap() * &g.truncate(ORDER - 1)
                + &f.truncate(ORDER - 1) * &g.diff(var).unwrap();
            for (a, b) in lhs.coeffs().iter().zip(rhs.coeffs()) {
                prop_assert!(close(*a, *b, 1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn first_and_second_partials_match_finite_differences(
        x in -0.8f64..0.8,
        y in -0.8f64..0.8,
    ) {
        let (u, v) = vars(x, y);
        let f = sample_fn(&u, &v);
        prop_assert!(close(f.value(), sample_value(x, y), 1e-14));
        let h = 1e-4;
        let dx = (sample_value(x + h, y) - sample_value(x - h, y)) / (2.0 * h);
        let dy = (sample_value(x, y + h) - sample_value(x, y - h)) / (2.0 * h);
        let dxy = (sample_value(x + h, y + h) - sample_value(x + h, y - h)
            - sample_value(x - h, y + h)
            + sample_value(x - h, y - h))
            / (4.0 * h * h);
        prop_assert!(close(f.partial(&[1, 0]).unwrap(), dx, 1e-7));
        prop_assert!(close(f.partial(&[0, 1]).unwrap(), dy, 1e-7));
        prop_assert!(close(f.partial(&[1, 1]).unwrap(), dxy, 1e-5));
    }

    #[test]
    fn exp_inverts_ln(x in -0.9f64..0.9, y in -0.9f64..0.9) {
        let (u, v) = vars(x, y);
        let f = (&u * &u + &v * 0.3).add_scalar(1.2);
        let back = f.ln().unwrap().exp();
        for (a, b) in back.coeffs().iter().zip(f.coeffs()) {
            prop_assert!(close(*a, *b, 1e-12), "{a} vs {b}");
        }
        let sq = f.sqrt().unwrap();
        let again = &sq * &sq;
        for (a, b) in again.coeffs().iter().zip(f.coeffs()) {
            prop_assert!(close(*a, *b, 1e-12), "{a} vs {b}");
        }
    }

    #[test]
    fn brackets_satisfy_jacobi(seed in any::<u64>(), n in 2usize..5) {
        let g = spd(seed, n);
        let g_inv = g.clone().try_inverse().unwrap();
        let mut rng = aux_rng(seed, 2);
        let e: Vec<_> = (0..3)
            .map(|_| (random_antisymmetric(&mut rng, n), random_vector(&mut rng, n)))
            .collect();
        for mode in BRACKET_MODES {
            let r = jacobi_residual(
                (&e[0].0, &e[0].1),
                (&e[1].0, &e[1].1),
                (&e[2].0, &e[2].1),
                &g,
                &g_inv,
                mode,
            );
            prop_assert!(r.passes(1e-12), "{mode:?}: {r:?}");
        }
    }

    #[test]
    fn sharp_square_is_symmetric_and_rotation_invariant(seed in any::<u64>(), n in 2usize..5) {
        let g = spd(seed, n);
        let basis = LieBasis::new(&g).unwrap();
        let mut rng = aux_rng(seed, 3);
        let c = structure_constants(&basis, BracketMode::Direct);
        let q = random_symmetric(&mut rng, basis.len());
        let qs = sharp_square(&q, &c).unwrap();
        let sym = Residual::from_pairs(qs.iter().zip(qs.transpose().iter()).map(|(a, b)| (*a, *b)));
        prop_assert!(sym.passes(1e-12), "{sym:?}");

        let o = random_block_orthogonal(&mut rng, basis.two.len(), basis.one.len());
        let rotated = basis.transformed(&o).unwrap();
        let lhs = sharp_square(
            &(&o * &q * o.transpose()),
            &structure_constants(&rotated, BracketMode::Direct),
        )
        .unwrap();
        let rhs = &o * &qs * o.transpose();
        let rot = Residual::from_pairs(lhs.iter().zip(rhs.iter()).map(|(a, b)| (*a, *b)));
        prop_assert!(rot.passes(1e-12), "{rot:?}");
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn z_is_quadratic_in_the_pair(
        x in -1.0f64..1.0,
        y in -1.0f64..1.0,
        t in 0.05f64..0.4,
        lambda in -3.0f64..3.0,
        seed in any::<u64>(),
    ) {
        let s = FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(2, 1.0)).unwrap();
        let ht = HarnackTensors::at(&s, &Point::new([x, y], t), ORDER).unwrap();
        let mut rng = aux_rng(seed, 4);
        let d = HarnackData::new(random_antisymmetric(&mut rng, 2), random_vector(&mut rng, 2))
            .unwrap();
        for with_time in [false, true] {
            let z = ht.z(&d, with_time).unwrap();
            let zs = ht.z(&d.scaled(lambda), with_time).unwrap();
            prop_assert!(close(zs, lambda * lambda * z, 1e-12), "{zs} vs {}", lambda * lambda * z);
        }
    }

    #[test]
    fn harnack_quantities_are_nonnegative_on_the_cigar(
        r in 0.0f64..1.9,
        angle in 0.0f64..std::f64::consts::TAU,
        t in 0.05f64..0.4,
        seed in any::<u64>(),
    ) {
        let s = FlowSolution::make("cigar_flow", &SolutionParams::default()).unwrap();
        let p = Point::new([r * angle.cos(), r * angle.sin()], t);
        let ht = HarnackTensors::at(&s, &p, ORDER).unwrap();
        let mut rng = aux_rng(seed, 5);
        let d = HarnackData::new(random_antisymmetric(&mut rng, 2), random_vector(&mut rng, 2))
            .unwrap();
        prop_assert!(ht.z(&d, true).unwrap() >= -1e-9);
        prop_assert!(ht.trace(&random_vector(&mut rng, 2), true).unwrap() >= -1e-9);
    }
}
