//! Truncated multivariate Taylor scalars (jets).
//!
//! A [`JetScalar`] stores the Taylor coefficients of a smooth function germ at
//! a point, over `dim` variables up to total degree `order`. Arithmetic and
//! the smooth primitives propagate coefficients exactly at the truncation
//! order, so mixed partial derivatives of any evaluated expression come out
//! to machine precision. One flat coefficient vector per scalar keeps mixed
//! partials canonical (`∂a∂b` and `∂b∂a` are the same slot) and avoids the
//! blowup of recursively nested duals.
//!
//! Every jet carries a `valid` order: the largest total degree whose
//! coefficients are still exact. Differentiation shifts coefficients down and
//! lowers `valid` by one; binary operations take the minimum. Reading past
//! `valid` is a bug in the caller's derivative budget and panics.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use crate::expr::{EvalEnv, ExprAst};
use crate::scalar::{NumericError, Scalar};

/// Requested jet order and variable count for a verification run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JetConfig {
    /// Maximal total derivative order, at most [`MAX_ORDER`].
    pub order: usize,
    /// Number of variables (2n for a point of the cotangent bundle).
    pub dim: usize,
}

/// Deepest derivative tower any operation needs: value levels for
/// g (2), nonlinear connection (3), its fiber derivative (4), Levi-Civita
/// blocks (4), curvature (5), covariant derivative of curvature (6).
pub const MAX_ORDER: usize = 6;

impl JetConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.order > MAX_ORDER {
            return Err(format!(
                "jet order {} exceeds supported maximum {MAX_ORDER}",
                self.order
            ));
        }
        if self.dim == 0 {
            return Err("jet dimension must be positive".into());
        }
        Ok(())
    }
}

/// Shared tables for one (dim, order) jet algebra: the graded monomial
/// basis, the truncated multiplication pairing, and per-direction
/// differentiation shifts.
pub struct JetSpace {
    dim: usize,
    order: usize,
    monomials: Vec<Box<[u8]>>,
    index: HashMap<Box<[u8]>, u32>,
    /// `degree_offset[d]` = index of the first monomial of total degree `d`.
    degree_offset: Vec<usize>,
    /// Ordered pairs `(i, j, k)` with `mono[i] + mono[j] = mono[k]`, sorted by
    /// (degree of k, k), so both multiplication prefixes and the division
    /// recurrence can walk them in one pass.
    mul_pairs: Vec<(u32, u32, u32)>,
    /// Prefix of `mul_pairs` whose output degree is ≤ d.
    mul_bound: Vec<usize>,
    /// Per direction: `(src, dst, factor)` with `mono[dst] = mono[src] - e_dir`
    /// and `factor = mono[src][dir]`, sorted by src.
    diff_tables: Vec<Vec<(u32, u32, f64)>>,
}

fn enumerate_monomials(dim: usize, order: usize) -> Vec<Box<[u8]>> {
    let mut all = Vec::new();
    let mut current = vec![0u8; dim];
    for degree in 0..=order {
        fill(&mut all, &mut current, 0, degree as u8);
    }
    fn fill(all: &mut Vec<Box<[u8]>>, current: &mut Vec<u8>, pos: usize, remaining: u8) {
        if pos + 1 == current.len() {
            current[pos] = remaining;
            all.push(current.clone().into_boxed_slice());
            return;
        }
        for take in (0..=remaining).rev() {
            current[pos] = take;
            fill(all, current, pos + 1, remaining - take);
        }
        current[pos] = 0;
    }
    all
}

impl JetSpace {
    pub fn shared(dim: usize, order: usize) -> Arc<JetSpace> {
        assert!(order <= MAX_ORDER, "jet order budget is {MAX_ORDER}");
        let monomials = enumerate_monomials(dim, order);
        let mut index = HashMap::with_capacity(monomials.len());
        let mut degree_offset = vec![0usize; order + 2];
        for (i, m) in monomials.iter().enumerate() {
            index.insert(m.clone(), i as u32);
            let d = m.iter().map(|&e| e as usize).sum::<usize>();
            degree_offset[d + 1] = i + 1;
        }
        for d in 1..degree_offset.len() {
            if degree_offset[d] == 0 {
                degree_offset[d] = degree_offset[d - 1];
            }
        }

        let degree_of = |i: u32| -> usize {
            monomials[i as usize]
                .iter()
                .map(|&e| e as usize)
                .sum::<usize>()
        };

        let mut mul_pairs = Vec::new();
        let mut sum = vec![0u8; dim];
        for i in 0..monomials.len() {
            let di = degree_of(i as u32);
            for j in 0..monomials.len() {
                let dj = degree_of(j as u32);
                if di + dj > order {
                    continue;
                }
                for (s, (&a, &b)) in sum
                    .iter_mut()
                    .zip(monomials[i].iter().zip(monomials[j].iter()))
                    .map(|(s, ab)| (s, ab))
                {
                    *s = a + b;
                }
                let k = index[sum.as_slice()];
                mul_pairs.push((i as u32, j as u32, k));
            }
        }
        mul_pairs.sort_unstable_by_key(|&(_, _, k)| k);
        let mut mul_bound = vec![0usize; order + 1];
        for d in 0..=order {
            let limit = degree_offset[d + 1] as u32;
            mul_bound[d] = mul_pairs.partition_point(|&(_, _, k)| k < limit);
        }

        let mut diff_tables = Vec::with_capacity(dim);
        for dir in 0..dim {
            let mut table = Vec::new();
            for (src, m) in monomials.iter().enumerate() {
                if m[dir] == 0 {
                    continue;
                }
                let mut lowered = m.clone();
                lowered[dir] -= 1;
                let dst = index[&lowered];
                table.push((src as u32, dst, m[dir] as f64));
            }
            diff_tables.push(table);
        }

        Arc::new(JetSpace {
            dim,
            order,
            monomials,
            index,
            degree_offset,
            mul_pairs,
            mul_bound,
            diff_tables,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of coefficients (monomials of total degree ≤ order).
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn prefix_len(&self, degree: usize) -> usize {
        self.degree_offset[degree.min(self.order) + 1]
    }

    fn degree_of_len(&self, len: usize) -> usize {
        self.degree_offset
            .iter()
            .position(|&off| off == len)
            .map(|d| d.saturating_sub(1))
            .unwrap_or(self.order)
    }

    fn factorial_of(&self, idx: usize) -> f64 {
        self.monomials[idx]
            .iter()
            .map(|&e| (1..=e as u64).product::<u64>())
            .product::<u64>() as f64
    }
}

/// One truncated Taylor scalar. Trailing coefficients that are exactly zero
/// may be left unstored; `valid` alone bounds which degrees are trustworthy.
#[derive(Clone)]
pub struct JetScalar {
    space: Arc<JetSpace>,
    valid: usize,
    coeff: Vec<f64>,
}

impl std::fmt::Debug for JetScalar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("JetScalar")
            .field("value", &self.value())
            .field("valid", &self.valid)
            .field("len", &self.coeff.len())
            .finish()
    }
}

impl PartialEq for JetScalar {
    fn eq(&self, other: &Self) -> bool {
        if !Arc::ptr_eq(&self.space, &other.space) || self.valid != other.valid {
            return false;
        }
        let len = self.coeff.len().max(other.coeff.len());
        (0..len).all(|i| self.get(i) == other.get(i))
    }
}

impl JetScalar {
    pub fn constant_in(space: &Arc<JetSpace>, v: f64) -> JetScalar {
        JetScalar {
            space: space.clone(),
            valid: space.order,
            coeff: vec![v],
        }
    }

    /// The coordinate jet for variable `dir` at value `v`: unit first-order
    /// coefficient in its own direction, zero elsewhere.
    pub fn coordinate(space: &Arc<JetSpace>, dir: usize, v: f64) -> JetScalar {
        assert!(dir < space.dim);
        if space.order == 0 {
            return JetScalar::constant_in(space, v);
        }
        let mut coeff = vec![0.0; space.prefix_len(1)];
        coeff[0] = v;
        // monomial e_dir sits right after the constant slot, in enumeration order
        let mut mono = vec![0u8; space.dim];
        mono[dir] = 1;
        let idx = space.index[mono.as_slice()] as usize;
        coeff[idx] = 1.0;
        JetScalar {
            space: space.clone(),
            valid: space.order,
            coeff,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn valid_order(&self) -> usize {
        self.valid
    }

    fn get(&self, idx: usize) -> f64 {
        self.coeff.get(idx).copied().unwrap_or(0.0)
    }

    fn top_degree(&self) -> usize {
        self.space.degree_of_len(self.coeff.len())
    }

    /// Taylor coefficient for a multi-index (not the derivative itself).
    pub fn coefficient(&self, multi: &[u8]) -> f64 {
        let idx = self.space.index[multi] as usize;
        self.get(idx)
    }

    /// Mixed partial derivative for a multi-index: coefficient times the
    /// multi-index factorial. Panics past the valid order.
    pub fn partial(&self, multi: &[u8]) -> f64 {
        let total: usize = multi.iter().map(|&e| e as usize).sum();
        assert!(
            total <= self.valid,
            "requested order-{total} derivative from a jet valid to order {}",
            self.valid
        );
        let idx = self.space.index[multi] as usize;
        self.get(idx) * self.space.factorial_of(idx)
    }

    /// Formal derivative along `dir`; exact one order lower.
    pub fn diff(&self, dir: usize) -> JetScalar {
        assert!(
            self.valid > 0,
            "jet order budget exceeded: differentiating an order-0 jet"
        );
        let valid = self.valid - 1;
        let out_top = valid.min(self.top_degree().saturating_sub(1));
        let mut coeff = vec![0.0; self.space.prefix_len(out_top)];
        let limit = self.coeff.len() as u32;
        for &(src, dst, factor) in &self.space.diff_tables[dir] {
            if src >= limit {
                break;
            }
            if (dst as usize) < coeff.len() {
                coeff[dst as usize] = factor * self.coeff[src as usize];
            }
        }
        JetScalar {
            space: self.space.clone(),
            valid,
            coeff,
        }
    }

    /// Cap the valid order (dropping stored coefficients above it); used to
    /// keep deep pipelines from paying full-order multiplication costs.
    pub fn truncated(&self, order: usize) -> JetScalar {
        if order >= self.valid {
            return self.clone();
        }
        let len = self.space.prefix_len(order).min(self.coeff.len());
        JetScalar {
            space: self.space.clone(),
            valid: order,
            coeff: self.coeff[..len].to_vec(),
        }
    }

    fn zero_like(&self, valid: usize, len: usize) -> JetScalar {
        JetScalar {
            space: self.space.clone(),
            valid,
            coeff: vec![0.0; len],
        }
    }

    fn check_space(&self, other: &JetScalar) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jets from different spaces"
        );
    }

    fn add_impl(&self, other: &JetScalar, sign: f64) -> JetScalar {
        self.check_space(other);
        let valid = self.valid.min(other.valid);
        let len = self
            .coeff
            .len()
            .max(other.coeff.len())
            .min(self.space.prefix_len(valid));
        let mut out = self.zero_like(valid, len);
        for i in 0..len {
            out.coeff[i] = self.get(i) + sign * other.get(i);
        }
        out
    }

    fn mul_impl(&self, other: &JetScalar) -> JetScalar {
        self.check_space(other);
        let valid = self.valid.min(other.valid);
        // scaling by a constant keeps the other factor's sparsity
        if self.coeff.len() == 1 || other.coeff.len() == 1 {
            let (scalar, jet) = if self.coeff.len() == 1 {
                (self.get(0), other)
            } else {
                (other.get(0), self)
            };
            let len = jet.coeff.len().min(self.space.prefix_len(valid));
            let mut out = self.zero_like(valid, len);
            for i in 0..len {
                out.coeff[i] = scalar * jet.coeff[i];
            }
            return out;
        }
        let top = valid.min(self.top_degree() + other.top_degree());
        let len = self.space.prefix_len(top);
        let mut out = self.zero_like(valid, len);
        let bound = self.space.mul_bound[top];
        let la = self.coeff.len() as u32;
        let lb = other.coeff.len() as u32;
        for &(i, j, k) in &self.space.mul_pairs[..bound] {
            if i < la && j < lb {
                out.coeff[k as usize] += self.coeff[i as usize] * other.coeff[j as usize];
            }
        }
        out
    }

    /// Truncated long division, computed degree by degree so the value slot
    /// is the plain `a/b` quotient bit for bit.
    fn div_impl(&self, other: &JetScalar) -> Result<JetScalar, NumericError> {
        self.check_space(other);
        let b0 = other.get(0);
        if b0 == 0.0 {
            return Err(NumericError::DivisionByZero);
        }
        let valid = self.valid.min(other.valid);
        let len = self.space.prefix_len(valid);
        let mut out = self.zero_like(valid, len);
        let bound = self.space.mul_bound[valid];
        let lb = other.coeff.len() as u32;
        let mut k_current: u32 = 0;
        let mut acc = self.get(0);
        for &(i, j, k) in &self.space.mul_pairs[..bound] {
            if k != k_current {
                out.coeff[k_current as usize] = acc / b0;
                k_current = k;
                acc = self.get(k as usize);
            }
            // skip the b-constant term: those are the q coefficients being solved for
            if i != 0 && i < lb {
                acc -= other.coeff[i as usize] * out.coeff[j as usize];
            }
        }
        out.coeff[k_current as usize] = acc / b0;
        Ok(out)
    }

    /// Analytic composition `f(self)` from the scaled derivatives
    /// `derivs[k] = f^(k)(value)/k!`, by Horner evaluation in `self - value`.
    fn compose(&self, derivs: &[f64]) -> JetScalar {
        if self.valid == 0 || self.coeff.len() == 1 {
            let mut out = self.zero_like(self.valid, 1);
            out.coeff[0] = derivs[0];
            return out;
        }
        let mut centered = self.clone();
        centered.coeff[0] = 0.0;
        let mut result = JetScalar::constant_in(&self.space, derivs[self.valid]);
        for k in (0..self.valid).rev() {
            result = result.mul_impl(&centered);
            result.coeff[0] += derivs[k];
        }
        result.valid = self.valid;
        result
    }
}

impl Scalar for JetScalar {
    fn constant(&self, v: f64) -> Self {
        JetScalar::constant_in(&self.space, v)
    }

    fn value(&self) -> f64 {
        self.get(0)
    }

    fn try_div(&self, rhs: &Self) -> Result<Self, NumericError> {
        self.div_impl(rhs)
    }

    fn try_sqrt(&self) -> Result<Self, NumericError> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(NumericError::Domain(format!("sqrt of {a0}")));
        }
        let mut derivs = vec![0.0; self.valid + 1];
        derivs[0] = a0.sqrt();
        for k in 1..=self.valid {
            derivs[k] = derivs[k - 1] * (1.5 - k as f64) / (k as f64 * a0);
        }
        Ok(self.compose(&derivs))
    }

    fn try_ln(&self) -> Result<Self, NumericError> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(NumericError::Domain(format!("log of {a0}")));
        }
        let mut derivs = vec![0.0; self.valid + 1];
        derivs[0] = a0.ln();
        if self.valid >= 1 {
            derivs[1] = 1.0 / a0;
            for k in 2..=self.valid {
                derivs[k] = -derivs[k - 1] * (k as f64 - 1.0) / (k as f64 * a0);
            }
        }
        Ok(self.compose(&derivs))
    }

    fn exp(&self) -> Self {
        let mut derivs = vec![0.0; self.valid + 1];
        derivs[0] = self.value().exp();
        for k in 1..=self.valid {
            derivs[k] = derivs[k - 1] / k as f64;
        }
        self.compose(&derivs)
    }

    fn sin(&self) -> Self {
        self.trig(true)
    }

    fn cos(&self) -> Self {
        self.trig(false)
    }

    fn try_powi(&self, n: i64) -> Result<Self, NumericError> {
        if self.value() == 0.0 && n < 0 {
            return Err(NumericError::DivisionByZero);
        }
        let mut base = self.clone();
        let mut k = n.unsigned_abs();
        let mut acc = JetScalar::constant_in(&self.space, 1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul_impl(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul_impl(&base);
            }
        }
        if n < 0 {
            acc = JetScalar::constant_in(&self.space, 1.0).div_impl(&acc)?;
        }
        Ok(acc)
    }

    fn try_powf(&self, e: f64) -> Result<Self, NumericError> {
        let a0 = self.value();
        if a0 <= 0.0 {
            return Err(NumericError::Domain(format!("{a0} ^ {e}")));
        }
        let mut derivs = vec![0.0; self.valid + 1];
        derivs[0] = a0.powf(e);
        for k in 1..=self.valid {
            derivs[k] = derivs[k - 1] * (e - k as f64 + 1.0) / (k as f64 * a0);
        }
        Ok(self.compose(&derivs))
    }

    fn const_integer(&self) -> Option<i64> {
        if self.coeff.iter().skip(1).all(|&c| c == 0.0) {
            self.value().const_integer()
        } else {
            None
        }
    }
}

impl JetScalar {
    fn trig(&self, sine: bool) -> JetScalar {
        let a0 = self.value();
        let cycle = [a0.sin(), a0.cos(), -a0.sin(), -a0.cos()];
        let phase = if sine { 0 } else { 1 };
        let mut derivs = vec![0.0; self.valid + 1];
        let mut factorial = 1.0;
        for (k, d) in derivs.iter_mut().enumerate() {
            if k > 0 {
                factorial *= k as f64;
            }
            *d = cycle[(phase + k) % 4] / factorial;
        }
        self.compose(&derivs)
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $impl:ident $(, $arg:expr)?) => {
        impl $trait for JetScalar {
            type Output = JetScalar;
            fn $method(self, rhs: JetScalar) -> JetScalar {
                self.$impl(&rhs $(, $arg)?)
            }
        }
        impl $trait for &JetScalar {
            type Output = JetScalar;
            fn $method(self, rhs: &JetScalar) -> JetScalar {
                self.$impl(rhs $(, $arg)?)
            }
        }
    };
}

jet_binop!(Add, add, add_impl, 1.0);
jet_binop!(Sub, sub, add_impl, -1.0);
jet_binop!(Mul, mul, mul_impl);

impl Neg for JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        -&self
    }
}

impl Neg for &JetScalar {
    type Output = JetScalar;
    fn neg(self) -> JetScalar {
        let mut out = self.clone();
        for c in &mut out.coeff {
            *c = -*c;
        }
        out
    }
}

/// Seed an evaluation environment for a cotangent point with a fresh jet
/// space of the configured order.
pub fn seed(
    point: &crate::cartan::CotangentPoint,
    cfg: JetConfig,
) -> Result<EvalEnv<JetScalar>, String> {
    cfg.validate()?;
    if cfg.dim != 2 * point.dim() {
        return Err(format!(
            "jet dimension {} does not match the 2n = {} coordinates",
            cfg.dim,
            2 * point.dim()
        ));
    }
    let space = JetSpace::shared(cfg.dim, cfg.order);
    Ok(seed_env(&space, &point.x, &point.p))
}

/// Seed an evaluation environment with identity jets for all 2n directions:
/// x directions first, then p directions.
pub fn seed_env(space: &Arc<JetSpace>, x: &[f64], p: &[f64]) -> EvalEnv<JetScalar> {
    assert_eq!(space.dim(), x.len() + p.len());
    let n = x.len();
    EvalEnv {
        x: x.iter()
            .enumerate()
            .map(|(i, &v)| JetScalar::coordinate(space, i, v))
            .collect(),
        p: p.iter()
            .enumerate()
            .map(|(i, &v)| JetScalar::coordinate(space, n + i, v))
            .collect(),
    }
}

/// Exact mixed partial of an expression at a point. `multi` runs over the 2n
/// directions (x first, then p).
pub fn partial(
    ast: &ExprAst,
    x: &[f64],
    p: &[f64],
    multi: &[u8],
) -> Result<f64, crate::expr::EvalError> {
    let order: usize = multi.iter().map(|&e| e as usize).sum();
    let space = JetSpace::shared(x.len() + p.len(), order);
    let env = seed_env(&space, x, p);
    let jet = ast.eval(&env)?;
    Ok(jet.partial(multi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::oracle;

    #[test]
    fn monomial_counts_match_binomials() {
        // C(dim + order, order) monomials of degree ≤ order
        let space = JetSpace::shared(4, 6);
        assert_eq!(space.len(), 210);
        let space3 = JetSpace::shared(6, 6);
        assert_eq!(space3.len(), 924);
    }

    #[test]
    fn seed_validates_its_config() {
        let pt = crate::cartan::CotangentPoint::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        assert!(seed(&pt, JetConfig { order: 2, dim: 4 }).is_ok());
        assert!(seed(&pt, JetConfig { order: 9, dim: 4 }).is_err());
        assert!(seed(&pt, JetConfig { order: 2, dim: 6 }).is_err());
    }

    #[test]
    fn primitives_match_finite_differences() {
        // every primitive, orders 1..=3 against the central-difference oracle
        let cases = [
            "sqrt(x1^2 + p1^2 + 0.5)",
            "exp(0.4*x2)",
            "log(p2^2 + 1.2)",
            "sin(x1*p1)",
            "cos(p2 + x2)",
            "pow(p1^2 + 0.7, 1.3)",
            "p1 / (x2^2 + 0.8)",
            "x1*p2 + p1*p1",
        ];
        let x = [0.55, 0.35];
        let p = [0.65, 0.45];
        for source in cases {
            let ast = parse(source, 2).unwrap();
            for multi in [
                [1u8, 0, 0, 0],
                [0, 0, 1, 0],
                [1, 0, 1, 0],
                [0, 2, 0, 0],
                [0, 0, 2, 1],
                [1, 1, 1, 0],
            ] {
                let exact = partial(&ast, &x, &p, &multi).unwrap();
                let order: u8 = multi.iter().sum();
                let h = if order == 3 { 2e-3 } else { 1e-3 };
                let fd = oracle::fd_partial_richardson(&ast, &x, &p, &multi, h).unwrap();
                let bound = (1e-3 * exact.abs()).max(1e-6);
                assert!(
                    (exact - fd).abs() <= bound,
                    "{source} {multi:?}: jet {exact} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn seeding_shape() {
        let space = JetSpace::shared(4, 1);
        let env = seed_env(&space, &[0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(env.x.len() + env.p.len(), 4);
        for (dir, jet) in env.x.iter().chain(env.p.iter()).enumerate() {
            let mut unit = vec![0u8; 4];
            unit[dir] = 1;
            assert_eq!(jet.coefficient(&unit), 1.0);
            let mut other = vec![0u8; 4];
            other[(dir + 1) % 4] = 1;
            assert_eq!(jet.coefficient(&other), 0.0);
        }
    }

    #[test]
    fn order_zero_jets_are_plain_values() {
        let space = JetSpace::shared(4, 0);
        let env = seed_env(&space, &[0.3, -0.2], &[3.0, 4.0]);
        let ast = parse("sqrt(p1^2+p2^2)", 2).unwrap();
        let jet = ast.eval(&env).unwrap();
        assert_eq!(jet.coeff.len(), 1);
        assert_eq!(jet.value(), 5.0);
    }

    #[test]
    fn order_six_slot_count() {
        let space = JetSpace::shared(4, 6);
        let env = seed_env(&space, &[0.1, 0.2], &[1.0, 0.5]);
        let ast = parse("exp(x1)*sqrt(p1^2+p2^2)", 2).unwrap();
        let jet = ast.eval(&env).unwrap();
        // 209 coefficient slots besides the value
        assert_eq!(space.len() - 1, 209);
        assert!(jet.coeff.len() <= 210);
    }

    #[test]
    fn quadratic_momentum_hessian() {
        let ast = parse("p1^2+p2^2", 2).unwrap();
        let x = [0.4, -1.0];
        let p = [0.7, -0.3];
        assert_eq!(partial(&ast, &x, &p, &[0, 0, 2, 0]).unwrap(), 2.0);
        assert_eq!(partial(&ast, &x, &p, &[0, 0, 1, 1]).unwrap(), 0.0);
        // third fiber derivative of a quadratic vanishes
        assert_eq!(partial(&ast, &x, &p, &[0, 0, 2, 1]).unwrap(), 0.0);
    }

    #[test]
    fn half_plane_fiber_hessian_matches_finite_differences() {
        let ast = parse("x2^2*(p1^2+p2^2)", 2).unwrap();
        let x = [0.0, 2.0];
        let p = [1.0, 0.5];
        let exact = partial(&ast, &x, &p, &[0, 0, 2, 0]).unwrap();
        assert_eq!(exact, 8.0);
        let fd = oracle::fd_partial(&ast, &x, &p, &[0, 0, 2, 0], 1e-4).unwrap();
        assert!((exact - fd).abs() < 1e-6, "fd {fd}");
    }

    #[test]
    fn division_value_is_bit_exact() {
        let space = JetSpace::shared(2, 3);
        let a = JetScalar::coordinate(&space, 0, 0.7281963);
        let b = JetScalar::coordinate(&space, 1, 1.913177);
        let q = a.try_div(&b).unwrap();
        assert_eq!(q.value(), 0.7281963f64 / 1.913177f64);
        // q * b recovers a up to the truncation order
        let back = q.mul_impl(&b);
        for i in 0..back.coeff.len() {
            assert!((back.get(i) - a.get(i)).abs() < 1e-15);
        }
    }

    #[test]
    fn mixed_partials_are_order_independent() {
        let ast = parse("exp(x1*p2)*sqrt(p1^2+p2^2)", 2).unwrap();
        let space = JetSpace::shared(4, 3);
        let env = seed_env(&space, &[0.3, 0.0], &[1.2, 0.8]);
        let jet = ast.eval(&env).unwrap();
        let d_ab = jet.diff(0).diff(3);
        let d_ba = jet.diff(3).diff(0);
        assert_eq!(d_ab.valid_order(), d_ba.valid_order());
        let len = d_ab.coeff.len().max(d_ba.coeff.len());
        for i in 0..len {
            assert_eq!(d_ab.get(i), d_ba.get(i));
        }
    }

    #[test]
    fn linearity_of_partials() {
        let f = parse("sin(x1)*p1^2", 2).unwrap();
        let g = parse("sqrt(p1^2+p2^2)*exp(x2)", 2).unwrap();
        let sum = parse("sin(x1)*p1^2 + sqrt(p1^2+p2^2)*exp(x2)", 2).unwrap();
        let x = [0.5, 0.25];
        let p = [0.8, 0.6];
        for multi in [[1u8, 0, 1, 0], [0, 1, 0, 2], [1, 1, 1, 0]] {
            let lhs = partial(&sum, &x, &p, &multi).unwrap();
            let rhs = partial(&f, &x, &p, &multi).unwrap() + partial(&g, &x, &p, &multi).unwrap();
            let scale = lhs.abs().max(rhs.abs()).max(1.0);
            assert!((lhs - rhs).abs() <= 1e-12 * scale, "{multi:?}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn high_orders_match_nested_finite_differences_of_low_order_jets() {
        // orders 4..6: finite-difference an order-3 jet partial over the
        // remaining directions and compare with the one-shot order-6 jet
        let ast = parse("sqrt(p1^2+p2^2)*exp(0.3*x1) + sin(x2)*p1", 2).unwrap();
        let x = [0.4, 0.7];
        let p = [0.8, 0.6];
        let space = JetSpace::shared(4, 6);
        let env = seed_env(&space, &x, &p);
        let jet = ast.eval(&env).unwrap();
        let cases: [([u8; 4], [u8; 4]); 4] = [
            ([2, 0, 1, 0], [0, 1, 1, 1]), // order 6 = 3 + 3
            ([1, 1, 1, 0], [0, 0, 1, 1]), // order 5 = 3 + 2
            ([0, 2, 1, 0], [1, 0, 0, 0]), // order 4 = 3 + 1
            ([3, 0, 0, 0], [0, 0, 3, 0]), // order 6 = 3 + 3
        ];
        for (alpha, beta) in cases {
            let mut full = [0u8; 4];
            for d in 0..4 {
                full[d] = alpha[d] + beta[d];
            }
            let exact = jet.partial(&full);
            let inner_ast = ast.clone();
            let low_order = move |coords: &[f64]| -> f64 {
                let space = JetSpace::shared(4, 3);
                let env = seed_env(&space, &coords[..2], &coords[2..]);
                inner_ast.eval(&env).unwrap().partial(&alpha)
            };
            let mut base = x.to_vec();
            base.extend_from_slice(&p);
            let nested = oracle::fd_scalar_richardson(&low_order, &base, &beta, 1e-2);
            assert!(
                (exact - nested).abs() < 1e-4,
                "{full:?}: jet {exact} vs nested fd {nested}"
            );
        }
    }

    #[test]
    fn truncation_reduces_cost_not_values() {
        let ast = parse("sqrt(p1^2+p2^2)*exp(x1)", 2).unwrap();
        let space = JetSpace::shared(4, 5);
        let env = seed_env(&space, &[0.2, 0.0], &[1.0, 2.0]);
        let full = ast.eval(&env).unwrap();
        let cut = full.truncated(2);
        assert_eq!(cut.valid_order(), 2);
        assert_eq!(cut.value(), full.value());
        assert_eq!(cut.partial(&[1, 0, 1, 0]), full.partial(&[1, 0, 1, 0]));
    }
}
