//! Truncated multivariate Taylor series ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients of a scalar function of
//! `num_vars` variables around a fixed base point, up to a total degree.
//! Coefficients live in a dense vector in graded order: every multi-index of
//! degree `d` precedes every multi-index of degree `d + 1`. Truncating a jet
//! to a lower order is therefore a prefix operation, which is what makes the
//! order bookkeeping cheap: differentiating an order-`k` jet yields an
//! order-`k - 1` jet, and binary operations work at the smaller of the two
//! orders.
//!
//! Variable 0 is time throughout the crate; variables `1..=n` are the spatial
//! chart coordinates.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{LabError, Result};

/// Default truncation order: enough for the deepest identity checked, which
/// differentiates the metric five times.
pub const DEFAULT_ORDER: usize = 5;

/// Orders accepted from configuration.
pub const ORDER_RANGE: std::ops::RangeInclusive<usize> = 4..=6;

/// Precomputed multi-index tables for a fixed `(num_vars, max_order)`.
pub struct JetSpace {
    num_vars: usize,
    max_order: usize,
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    /// `sizes[k]` = number of multi-indices of degree `<= k`.
    sizes: Vec<usize>,
    /// Product table `(a, b, out)`, sorted by `out`.
    mul: Vec<(u32, u32, u32)>,
    /// Per-variable derivative tables `(src, dst, factor)`, sorted by `dst`.
    diff: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("num_vars", &self.num_vars)
            .field("max_order", &self.max_order)
            .field("len", &self.indices.len())
            .finish()
    }
}

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

fn enumerate_degree(num_vars: usize, degree: usize, out: &mut Vec<Vec<u8>>) {
    fn rec(pos: usize, left: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos + 1 == cur.len() {
            cur[pos] = left as u8;
            out.push(cur.clone());
            return;
        }
        for v in (0..=left).rev() {
            cur[pos] = v as u8;
            rec(pos + 1, left - v, cur, out);
        }
    }
    let mut cur = vec![0u8; num_vars];
    rec(0, degree, &mut cur, out);
}

impl JetSpace {
    fn build(num_vars: usize, max_order: usize) -> Self {
        let mut indices = Vec::new();
        let mut sizes = Vec::with_capacity(max_order + 1);
        for d in 0..=max_order {
            enumerate_degree(num_vars, d, &mut indices);
            sizes.push(indices.len());
        }
        debug_assert_eq!(indices.len(), binomial(num_vars + max_order, max_order));
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let degree = |a: &[u8]| a.iter().map(|&v| v as usize).sum::<usize>();

        let mut mul = Vec::new();
        let mut sum = vec![0u8; num_vars];
        for (ia, a) in indices.iter().enumerate() {
            let da = degree(a);
            for (ib, b) in indices.iter().enumerate() {
                if da + degree(b) > max_order {
                    continue;
                }
                for v in 0..num_vars {
                    sum[v] = a[v] + b[v];
                }
                mul.push((ia as u32, ib as u32, lookup[&sum] as u32));
            }
        }
        mul.sort_by_key(|&(a, b, o)| (o, a, b));

        let mut diff = vec![Vec::new(); num_vars];
        for (src, a) in indices.iter().enumerate() {
            for v in 0..num_vars {
                if a[v] == 0 {
                    continue;
                }
                let mut lowered = a.clone();
                lowered[v] -= 1;
                diff[v].push((src as u32, lookup[&lowered] as u32, a[v] as f64));
            }
        }
        for table in &mut diff {
            table.sort_by_key(|&(_, dst, _)| dst);
        }

        Self {
            num_vars,
            max_order,
            indices,
            lookup,
            sizes,
            mul,
            diff,
        }
    }

    /// Shared space for `(num_vars, max_order)`; tables are built once per process.
    pub fn get(num_vars: usize, max_order: usize) -> Arc<JetSpace> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry((num_vars, max_order))
            .or_insert_with(|| Arc::new(JetSpace::build(num_vars, max_order)))
            .clone()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    /// Number of coefficients stored by a jet of the given order.
    pub fn size(&self, order: usize) -> usize {
        self.sizes[order]
    }

    pub fn multi_index(&self, pos: usize) -> &[u8] {
        &self.indices[pos]
    }

    pub fn position(&self, idx: &[u8]) -> Option<usize> {
        self.lookup.get(idx).copied()
    }
}

/// Elementary functions that can be composed with a jet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementaryFn {
    Exp,
    Log,
    Sqrt,
    Pow(f64),
    Recip,
}

/// Truncated Taylor expansion of a scalar at a point.
#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    order: usize,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.order)
            .field("value", &self.value())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Jet {
        let order = space.max_order;
        let mut coeffs = vec![0.0; space.size(order)];
        coeffs[0] = value;
        Jet {
            space: space.clone(),
            order,
            coeffs,
        }
    }

    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet::constant(space, 0.0)
    }

    /// Jet of the coordinate function `x^var` at a point where it equals `value`.
    pub fn seed(var: usize, value: f64, num_vars: usize, order: usize) -> Result<Jet> {
        if var >= num_vars {
            return Err(LabError::Config(format!(
                "seed variable {var} out of range for {num_vars} variables"
            )));
        }
        let space = JetSpace::get(num_vars, order);
        Ok(Jet::seed_in(&space, var, value))
    }

    pub fn seed_in(space: &Arc<JetSpace>, var: usize, value: f64) -> Jet {
        let mut jet = Jet::constant(space, value);
        if space.max_order >= 1 {
            let mut idx = vec![0u8; space.num_vars];
            idx[var] = 1;
            let pos = space.position(&idx).expect("unit multi-index");
            jet.coeffs[pos] = 1.0;
        }
        jet
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// Current truncation order.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_vars(&self) -> usize {
        self.space.num_vars
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Raw Taylor coefficient of a multi-index (zero beyond the current order).
    pub fn coeff(&self, idx: &[u8]) -> f64 {
        match self.space.position(idx) {
            Some(p) if p < self.coeffs.len() => self.coeffs[p],
            _ => 0.0,
        }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order);
        Jet {
            space: self.space.clone(),
            order,
            coeffs: self.coeffs[..self.space.size(order)].to_vec(),
        }
    }

    /// The same function with variable `var` held at its base value: every
    /// coefficient whose multi-index involves `var` is dropped.
    pub fn freeze(&self, var: usize) -> Jet {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(pos, c)| {
                if self.space.multi_index(pos)[var] == 0 {
                    *c
                } else {
                    0.0
                }
            })
            .collect();
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs,
        }
    }

    /// Fails unless the jet still carries derivatives up to `order`.
    pub fn require(&self, order: usize) -> Result<()> {
        if self.order < order {
            Err(LabError::OrderExceeded {
                needed: order,
                available: self.order,
            })
        } else {
            Ok(())
        }
    }

    /// Partial derivative with respect to one variable; the order drops by one.
    pub fn diff(&self, var: usize) -> Result<Jet> {
        if var >= self.space.num_vars {
            return Err(LabError::Shape(format!("no variable {var}")));
        }
        self.require(1)?;
        let order = self.order - 1;
        let len = self.space.size(order);
        let mut coeffs = vec![0.0; len];
        for &(src, dst, factor) in &self.space.diff[var] {
            let dst = dst as usize;
            if dst >= len {
                break;
            }
            coeffs[dst] += factor * self.coeffs[src as usize];
        }
        Ok(Jet {
            space: self.space.clone(),
            order,
            coeffs,
        })
    }

    /// Partial derivative `∂^idx` evaluated at the base point.
    pub fn partial(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.space.num_vars {
            return Err(LabError::Shape(format!(
                "multi-index of length {} for {} variables",
                idx.len(),
                self.space.num_vars
            )));
        }
        let degree: usize = idx.iter().sum();
        self.require(degree)?;
        let key: Vec<u8> = idx.iter().map(|&v| v as u8).collect();
        let pos = self.space.position(&key).expect("index within order");
        let factorials: f64 = idx
            .iter()
            .map(|&v| (1..=v).map(|k| k as f64).product::<f64>())
            .product();
        Ok(self.coeffs[pos] * factorials)
    }

    pub fn scale(&self, s: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    fn check_space(&self, other: &Jet) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space)
                || (self.space.num_vars == other.space.num_vars
                    && self.space.max_order == other.space.max_order),
            "jets from different spaces"
        );
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        self.check_space(other);
        let order = self.order.min(other.order);
        let len = self.space.size(order);
        let coeffs = (0..len)
            .map(|i| f(self.coeffs[i], other.coeffs[i]))
            .collect();
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        self.check_space(other);
        let order = self.order.min(other.order);
        let len = self.space.size(order);
        let mut coeffs = vec![0.0; len];
        for &(a, b, o) in &self.space.mul {
            let o = o as usize;
            if o >= len {
                break;
            }
            coeffs[o] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet {
            space: self.space.clone(),
            order,
            coeffs,
        }
    }

    /// Composition `fn ∘ self` via the univariate Taylor series of `fn`
    /// around the constant term.
    pub fn map(&self, func: ElementaryFn) -> Result<Jet> {
        let a0 = self.value();
        let k = self.order;
        let mut series = Vec::with_capacity(k + 1);
        match func {
            ElementaryFn::Exp => {
                let e = a0.exp();
                let mut fact = 1.0;
                for m in 0..=k {
                    if m > 0 {
                        fact *= m as f64;
                    }
                    series.push(e / fact);
                }
            }
            ElementaryFn::Log => {
                if !(a0 > 0.0) {
                    return Err(LabError::DerivativeDomain {
                        function: "log",
                        value: a0,
                    });
                }
                series.push(a0.ln());
                for m in 1..=k {
                    let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
                    series.push(sign / (m as f64 * a0.powi(m as i32)));
                }
            }
            ElementaryFn::Sqrt => return self.power(0.5, "sqrt"),
            ElementaryFn::Pow(p) => return self.power(p, "pow"),
            ElementaryFn::Recip => {
                if a0 == 0.0 {
                    return Err(LabError::DerivativeDomain {
                        function: "recip",
                        value: a0,
                    });
                }
                let inv = 1.0 / a0;
                let mut term = inv;
                for _ in 0..=k {
                    series.push(term);
                    term *= -inv;
                }
            }
        }
        Ok(self.compose(&series))
    }

    fn power(&self, p: f64, name: &'static str) -> Result<Jet> {
        let a0 = self.value();
        let integral = p.fract() == 0.0;
        if (!integral && !(a0 > 0.0)) || (p < 0.0 && a0 == 0.0) {
            return Err(LabError::DerivativeDomain {
                function: name,
                value: a0,
            });
        }
        let mut series = Vec::with_capacity(self.order + 1);
        // binom(p, m) a0^(p - m)
        let mut binom = 1.0;
        for m in 0..=self.order {
            if m > 0 {
                binom *= (p - (m as f64 - 1.0)) / m as f64;
            }
            let base = if integral {
                if binom == 0.0 {
                    0.0
                } else {
                    a0.powi((p as i64 - m as i64) as i32)
                }
            } else {
                a0.powf(p - m as f64)
            };
            series.push(binom * base);
        }
        Ok(self.compose(&series))
    }

    /// `Σ_m series[m] (self - a0)^m`, truncated at the jet's order.
    fn compose(&self, series: &[f64]) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut out = Jet {
            space: self.space.clone(),
            order: self.order,
            coeffs: vec![0.0; self.coeffs.len()],
        };
        out.coeffs[0] = series[0];
        let mut power = h.clone();
        for (m, &c) in series.iter().enumerate().skip(1) {
            if m > 1 {
                power = power.product(&h);
            }
            if c != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += c * p;
                }
            }
        }
        out
    }

    pub fn exp(&self) -> Jet {
        self.map(ElementaryFn::Exp).expect("exp is entire")
    }

    pub fn ln(&self) -> Result<Jet> {
        self.map(ElementaryFn::Log)
    }

    pub fn sqrt(&self) -> Result<Jet> {
        self.map(ElementaryFn::Sqrt)
    }

    pub fn powf(&self, p: f64) -> Result<Jet> {
        self.map(ElementaryFn::Pow(p))
    }

    pub fn powi(&self, p: i32) -> Result<Jet> {
        self.map(ElementaryFn::Pow(p as f64))
    }

    pub fn recip(&self) -> Result<Jet> {
        self.map(ElementaryFn::Recip)
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet> {
        Ok(self.product(&other.recip()?))
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.order == other.order
            && self.space.num_vars == other.space.num_vars
            && self.coeffs == other.coeffs
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
binop!(Mul, mul, |a, b| a.product(b));

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.add_scalar(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Sum of jets; `None` for an empty iterator.
pub fn sum<'a>(jets: impl IntoIterator<Item = &'a Jet>) -> Option<Jet> {
    let mut iter = jets.into_iter();
    let first = iter.next()?.clone();
    Some(iter.fold(first, |acc, j| &acc + j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn space_size_matches_binomial() {
        for (nv, k) in [(2, 2), (3, 5), (4, 5), (4, 6)] {
            let space = JetSpace::get(nv, k);
            assert_eq!(space.size(k), binomial(nv + k, k));
        }
        assert_eq!(JetSpace::get(4, 5).size(5), 126);
    }

    #[test]
    fn seed_is_identity_expansion() {
        let x = Jet::seed(0, 3.0, 2, 2).unwrap();
        assert_eq!(x.value(), 3.0);
        assert_eq!(x.coeff(&[1, 0]), 1.0);
        assert_eq!(x.coeff(&[0, 1]), 0.0);
        assert_eq!(x.coeff(&[2, 0]), 0.0);
        let nonzero = x.coeffs().iter().filter(|c| **c != 0.0).count();
        assert_eq!(nonzero, 2);

        let t = Jet::seed(1, 0.0, 2, 3).unwrap();
        assert_eq!(t.coeff(&[0, 1]), 1.0);
        assert_eq!(t.value(), 0.0);
    }

    #[test]
    fn seed_rejects_bad_variable() {
        assert!(matches!(Jet::seed(2, 0.0, 2, 2), Err(LabError::Config(_))));
    }

    #[test]
    fn square_derivative() {
        let x = Jet::seed(0, 3.0, 2, 2).unwrap();
        let sq = &x * &x;
        assert_eq!(sq.partial(&[1, 0]).unwrap(), 6.0);
        assert_eq!(sq.partial(&[2, 0]).unwrap(), 2.0);
    }

    #[test]
    fn exp_series() {
        let x = Jet::seed(0, 0.0, 1, 3).unwrap();
        let e = x.exp();
        let c: Vec<f64> = (0..=3).map(|d| e.coeff(&[d])).collect();
        assert!(close(c[0], 1.0, 1e-15));
        assert!(close(c[1], 1.0, 1e-15));
        assert!(close(c[2], 0.5, 1e-15));
        assert!(close(c[3], 1.0 / 6.0, 1e-15));
    }

    #[test]
    fn log_mixed_partial() {
        let x = Jet::seed(0, 0.0, 2, 3).unwrap();
        let t = Jet::seed(1, 0.0, 2, 3).unwrap();
        let l = (&x + &t).add_scalar(1.0).ln().unwrap();
        // -1/(1+x+t)^2 at the origin
        assert!(close(l.coeff(&[1, 1]), -1.0, 1e-14));
        assert!(close(l.partial(&[1, 1]).unwrap(), -1.0, 1e-14));
    }

    #[test]
    fn domain_errors() {
        let z = Jet::seed(0, 0.0, 1, 2).unwrap();
        assert!(matches!(
            z.recip(),
            Err(LabError::DerivativeDomain {
                function: "recip",
                ..
            })
        ));
        assert!(z.ln().is_err());
        assert!(z.add_scalar(-1.0).sqrt().is_err());
    }

    #[test]
    fn extract_partial_cases() {
        let space = JetSpace::get(2, 3);
        let c = Jet::constant(&space, 4.0);
        assert_eq!(c.partial(&[1, 0]).unwrap(), 0.0);
        let t = Jet::seed(1, 0.0, 2, 3).unwrap();
        let e = t.scale(2.0).exp();
        assert!(close(e.partial(&[0, 3]).unwrap(), 8.0, 1e-14));
        assert!(matches!(
            e.partial(&[2, 2]),
            Err(LabError::OrderExceeded {
                needed: 4,
                available: 3
            })
        ));
    }

    #[test]
    fn diff_lowers_order() {
        let x = Jet::seed(0, 2.0, 2, 3).unwrap();
        let cube = &(&x * &x) * &x;
        let d = cube.diff(0).unwrap();
        assert_eq!(d.order(), 2);
        assert!(close(d.value(), 12.0, 1e-15));
        let d3 = d.diff(0).unwrap().diff(0).unwrap();
        assert_eq!(d3.order(), 0);
        assert!(close(d3.value(), 6.0, 1e-15));
        assert!(matches!(d3.diff(0), Err(LabError::OrderExceeded { .. })));
    }

    #[test]
    fn mixed_order_arithmetic_truncates() {
        let x = Jet::seed(0, 1.0, 1, 4).unwrap();
        let low = x.truncate(2);
        let p = &x * &low;
        assert_eq!(p.order(), 2);
        assert_eq!((&x + &low).order(), 2);
    }

    #[test]
    fn powers_and_recip() {
        let x = Jet::seed(0, 2.0, 1, 4).unwrap();
        let r = x.recip().unwrap();
        // d^k/dx^k (1/x) = (-1)^k k! / x^(k+1)
        assert!(close(r.partial(&[3]).unwrap(), -6.0 / 16.0, 1e-14));
        let s = x.sqrt().unwrap();
        assert!(close(s.partial(&[1]).unwrap(), 0.5 / 2f64.sqrt(), 1e-14));
        let p = x.powi(-2).unwrap();
        assert!(close(p.partial(&[2]).unwrap(), 6.0 / 16.0, 1e-14));
        let q = x.powi(3).unwrap();
        assert!(close(q.partial(&[3]).unwrap(), 6.0, 1e-14));
        assert!(close(q.partial(&[4]).unwrap(), 0.0, 1e-14));
    }
}
