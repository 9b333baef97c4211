//! Seeded low-discrepancy sampling inside a solution's domain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::solutions::{FlowSolution, Point};

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// Halton sequence with a seeded Cranley–Patterson rotation.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    next: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "halton dimension too large");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Halton {
            shift: (0..dim).map(|_| rng.gen::<f64>()).collect(),
            next: 1,
        }
    }

    /// Next point of the unit cube.
    pub fn next_unit(&mut self) -> Vec<f64> {
        let i = self.next;
        self.next += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, b)| (radical_inverse(i, b) + s).fract())
            .collect()
    }
}

/// `count` points with `|x| <= r_max` and `t` in `[t_lo, t_hi]`.
pub fn sample_points(
    solution: &FlowSolution,
    count: usize,
    seed: u64,
    t_lo: f64,
    t_hi: f64,
) -> Vec<Point> {
    let n = solution.dim;
    let half = solution.domain.r_max / (n as f64).sqrt();
    let mut seq = Halton::new(n + 1, seed);
    (0..count)
        .map(|_| {
            let u = seq.next_unit();
            Point {
                t: t_lo + u[0] * (t_hi - t_lo),
                x: u[1..].iter().map(|v| (2.0 * v - 1.0) * half).collect(),
            }
        })
        .collect()
}

/// Deterministic source of auxiliary random data (U, W, V samples).
pub fn aux_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Vector with entries uniform in `[-1, 1)`.
pub fn random_vector(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

/// Matrix with entries uniform in `[-1, 1)`.
pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Exactly antisymmetric matrix with entries in `[-1, 1)`.
pub fn random_antisymmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.gen_range(-1.0..1.0);
            u[(i, j)] = v;
            u[(j, i)] = -v;
        }
    }
    u
}

/// Exactly symmetric matrix with entries in `[-1, 1)`.
pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = random_matrix(rng, n, n);
    (&a + a.transpose()) * 0.5
}

/// Orthogonal matrix from the QR factorization of a random matrix.
pub fn random_orthogonal(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    random_matrix(rng, n, n).qr().q()
}

/// Block-diagonal orthogonal matrix with blocks of sizes `a` and `b`.
pub fn random_block_orthogonal(rng: &mut impl Rng, a: usize, b: usize) -> DMatrix<f64> {
    let mut o = DMatrix::zeros(a + b, a + b);
    if a > 0 {
        o.view_mut((0, 0), (a, a))
            .copy_from(&random_orthogonal(rng, a));
    }
    if b > 0 {
        o.view_mut((a, a), (b, b))
            .copy_from(&random_orthogonal(rng, b));
    }
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{FlowSolution, SolutionParams};

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
    }

    #[test]
    fn samples_are_seeded_and_inside_domain() {
        let s = FlowSolution::make("shrinking_sphere", &SolutionParams::sphere(3, 1.0)).unwrap();
        let a = sample_points(&s, 32, 7, 0.0, 0.2);
        let b = sample_points(&s, 32, 7, 0.0, 0.2);
        let c = sample_points(&s, 32, 8, 0.0, 0.2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        for p in &a {
            assert!(s.check_point(p).is_ok());
            assert!((0.0..=0.2).contains(&p.t));
        }
    }

    #[test]
    fn random_matrices_have_their_symmetry() {
        let mut rng = aux_rng(3, 1);
        let u = random_antisymmetric(&mut rng, 4);
        assert_eq!(&u + u.transpose(), DMatrix::zeros(4, 4));
        let q = random_symmetric(&mut rng, 4);
        assert_eq!(&q - q.transpose(), DMatrix::zeros(4, 4));
        let o = random_orthogonal(&mut rng, 5);
        assert!((&o * o.transpose() - DMatrix::identity(5, 5)).amax() < 1e-14);
    }
}
