//! Recursive bilinear matrix multiplication over exact or floating scalars.
//!
//! Each recursion level splits the operands into `n0 x n0` blocks, forms the
//! `m` encoded operand pairs, recurses on each pair, then decodes. Below the
//! cutoff the classical triple loop is used. Every linear combination is one
//! primitive operation, which lets a recording scalar emit the executed DAG in
//! the same collapsed form the graph builders produce.

use std::cell::RefCell;
use std::fmt;
use std::rc::Rc;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cdag::{Cdag, CdagError, GraphBuilder, Layout, Meta, Part, VertexKind};
use crate::scheme::{BilinearScheme, Coeff};

#[derive(Debug, Error)]
pub enum MmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("fixed-width integer overflow")]
    Overflow,
    #[error("coefficient {0} is not an integer; use rational or floating mode")]
    NonInteger(String),
    #[error("malformed matrix text: {0}")]
    Parse(String),
    #[error("strategy: {0}")]
    Strategy(String),
    #[error(transparent)]
    Cdag(#[from] CdagError),
}

/// Where a value sits in the recursive computation: `(part, level, slot)` in
/// the numbering of [`Layout`].
pub type Key = (Part, usize, usize);

pub trait Scalar: Clone + fmt::Debug {
    fn zeroed() -> Self;
    /// `sum_i c_i * x_i` as one operation.
    fn lincomb(terms: &[(&Coeff, &Self)], key: Key) -> Result<Self, MmError>;
    fn mul(a: &Self, b: &Self, key: Key) -> Result<Self, MmError>;
    /// Whether a coefficient can be applied in this scalar domain.
    fn accepts(c: &Coeff) -> bool;
}

impl Scalar for BigInt {
    fn zeroed() -> Self {
        Zero::zero()
    }
    fn lincomb(terms: &[(&Coeff, &Self)], _: Key) -> Result<Self, MmError> {
        let mut acc = BigInt::zero();
        for (c, x) in terms {
            if c.is_one() {
                acc += *x;
            } else if (-*c).is_one() {
                acc -= *x;
            } else {
                acc += c.to_integer() * *x;
            }
        }
        Ok(acc)
    }
    fn mul(a: &Self, b: &Self, _: Key) -> Result<Self, MmError> {
        Ok(a * b)
    }
    fn accepts(c: &Coeff) -> bool {
        c.is_integer()
    }
}

impl Scalar for i64 {
    fn zeroed() -> Self {
        0
    }
    fn lincomb(terms: &[(&Coeff, &Self)], _: Key) -> Result<Self, MmError> {
        let mut acc: i64 = 0;
        for (c, x) in terms {
            let c = c.to_integer().to_i64().ok_or(MmError::Overflow)?;
            acc = c.checked_mul(**x).and_then(|t| acc.checked_add(t)).ok_or(MmError::Overflow)?;
        }
        Ok(acc)
    }
    fn mul(a: &Self, b: &Self, _: Key) -> Result<Self, MmError> {
        a.checked_mul(*b).ok_or(MmError::Overflow)
    }
    fn accepts(c: &Coeff) -> bool {
        c.is_integer()
    }
}

impl Scalar for f64 {
    fn zeroed() -> Self {
        0.0
    }
    fn lincomb(terms: &[(&Coeff, &Self)], _: Key) -> Result<Self, MmError> {
        Ok(terms.iter().map(|(c, x)| c.to_f64().unwrap_or(f64::NAN) * **x).sum())
    }
    fn mul(a: &Self, b: &Self, _: Key) -> Result<Self, MmError> {
        Ok(a * b)
    }
    fn accepts(_: &Coeff) -> bool {
        true
    }
}

impl Scalar for BigRational {
    fn zeroed() -> Self {
        Zero::zero()
    }
    fn lincomb(terms: &[(&Coeff, &Self)], _: Key) -> Result<Self, MmError> {
        Ok(terms.iter().map(|(c, x)| *c * *x).sum())
    }
    fn mul(a: &Self, b: &Self, _: Key) -> Result<Self, MmError> {
        Ok(a * b)
    }
    fn accepts(_: &Coeff) -> bool {
        true
    }
}

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Clone> Matrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                data.push(f(r, c));
            }
        }
        Self { n, data }
    }

    pub fn get(&self, r: usize, c: usize) -> &T {
        &self.data[r * self.n + c]
    }

    pub fn map<U: Clone>(&self, f: impl Fn(&T) -> U) -> Matrix<U> {
        Matrix { n: self.n, data: self.data.iter().map(f).collect() }
    }

    fn block(&self, br: usize, bc: usize, size: usize) -> Matrix<T> {
        Matrix::from_fn(size, |r, c| self.get(br * size + r, bc * size + c).clone())
    }

    fn padded(&self, n: usize, zero: T) -> Matrix<T> {
        Matrix::from_fn(n, |r, c| {
            if r < self.n && c < self.n {
                self.get(r, c).clone()
            } else {
                zero.clone()
            }
        })
    }

    fn truncated(&self, n: usize) -> Matrix<T> {
        Matrix::from_fn(n, |r, c| self.get(r, c).clone())
    }
}

impl Matrix<BigInt> {
    pub fn identity(n: usize) -> Self {
        Matrix::from_fn(n, |r, c| if r == c { BigInt::one() } else { BigInt::zero() })
    }

    /// Entries drawn uniformly from `[lo, hi]` by a seeded generator.
    pub fn random(seed: u64, n: usize, lo: i64, hi: i64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, |_, _| BigInt::from(rng.random_range(lo..=hi)))
    }

    pub fn to_i64(&self) -> Option<Matrix<i64>> {
        let data = self.data.iter().map(ToPrimitive::to_i64).collect::<Option<Vec<_>>>()?;
        Some(Matrix { n: self.n, data })
    }
}

impl<T: fmt::Display> fmt::Display for Matrix<T> {
    /// Dimension on the first line, then one whitespace-separated row per line.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.n)?;
        for r in 0..self.n {
            let row: Vec<String> = (0..self.n).map(|c| self.data[r * self.n + c].to_string()).collect();
            writeln!(f, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

impl<T: FromStr + Clone> FromStr for Matrix<T> {
    type Err = MmError;
    fn from_str(s: &str) -> Result<Self, MmError> {
        let mut lines = s.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let n: usize = lines
            .next()
            .ok_or_else(|| MmError::Parse("missing dimension header".into()))?
            .parse()
            .map_err(|_| MmError::Parse("dimension header is not an integer".into()))?;
        let mut data = Vec::with_capacity(n * n);
        for r in 0..n {
            let line = lines.next().ok_or_else(|| MmError::Parse(format!("missing row {r}")))?;
            let row: Vec<T> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| MmError::Parse(format!("bad entry `{t}` in row {r}"))))
                .collect::<Result<_, _>>()?;
            if row.len() != n {
                return Err(MmError::Parse(format!("row {r} has {} entries, expected {n}", row.len())));
            }
            data.extend(row);
        }
        if lines.next().is_some() {
            return Err(MmError::Parse(format!("more than {n} rows")));
        }
        Ok(Matrix { n, data })
    }
}

/// Which scheme to apply at each recursion level, and when to stop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Strategy {
    /// One scheme applied at every level (stationary) or an explicit per-level list.
    pub schemes: Vec<BilinearScheme>,
    pub stationary: bool,
    /// Recursion stops once the dimension is at most this value.
    pub cutoff: usize,
}

impl Strategy {
    pub fn stationary(scheme: BilinearScheme, cutoff: usize) -> Self {
        Self { schemes: vec![scheme], stationary: true, cutoff: cutoff.max(1) }
    }

    pub fn levels(schemes: Vec<BilinearScheme>, cutoff: usize) -> Self {
        Self { schemes, stationary: false, cutoff: cutoff.max(1) }
    }

    /// Classical triple loop at the top level.
    pub fn naive() -> Self {
        Self::levels(Vec::new(), usize::MAX)
    }

    /// Per-level schemes and padded dimension for an `n x n` problem.
    pub fn plan(&self, n: usize) -> (Vec<BilinearScheme>, usize) {
        let mut levels = Vec::new();
        let mut scale = 1usize;
        loop {
            if n.div_ceil(scale) <= self.cutoff {
                break;
            }
            let next = if self.stationary {
                self.schemes.first()
            } else {
                self.schemes.get(levels.len())
            };
            let Some(s) = next else { break };
            levels.push(s.clone());
            scale *= s.n0;
        }
        let padded = n.div_ceil(scale) * scale;
        (levels, padded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelOps {
    pub level: usize,
    pub scheme: String,
    pub subproblems: u64,
    pub additions: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpCount {
    pub multiplications: u64,
    /// Additions and subtractions; a combination of `z` terms costs `z - 1`.
    pub additions: u64,
    /// Terms whose coefficient is neither 1 nor -1.
    pub scalings: u64,
    pub padded_n: usize,
    pub profile: Vec<LevelOps>,
}

#[derive(Debug, Clone)]
pub struct Product<T> {
    pub c: Matrix<T>,
    pub ops: OpCount,
}

struct Run<'a> {
    levels: &'a [BilinearScheme],
    dims: Vec<usize>,
    ops: OpCount,
}

fn lincomb_counted<T: Scalar>(
    ops: &mut OpCount,
    level: Option<usize>,
    terms: &[(&Coeff, &T)],
    key: Key,
) -> Result<T, MmError> {
    let adds = terms.len().saturating_sub(1) as u64;
    ops.additions += adds;
    ops.scalings += terms.iter().filter(|(c, _)| c.abs() != Coeff::one()).count() as u64;
    if let Some(l) = level {
        ops.profile[l - 1].additions += adds;
    }
    T::lincomb(terms, key)
}

impl Run<'_> {
    /// Multiply level-`level` operands of subproblem `path`.
    fn rec<T: Scalar>(&mut self, a: &Matrix<T>, b: &Matrix<T>, level: usize, path: usize) -> Result<Matrix<T>, MmError> {
        if level > self.levels.len() {
            return self.leaf(a, b, level, path);
        }
        let s = &self.levels[level - 1];
        let n0 = s.n0;
        let size = a.n / n0;
        let d2 = size * size;
        self.ops.profile[level - 1].subproblems += 1;
        let blocks_a: Vec<Matrix<T>> = (0..n0 * n0).map(|p| a.block(p / n0, p % n0, size)).collect();
        let blocks_b: Vec<Matrix<T>> = (0..n0 * n0).map(|p| b.block(p / n0, p % n0, size)).collect();
        let mut products = Vec::with_capacity(s.m);
        for j in 0..s.m {
            let child = path * s.m + j;
            let ta = self.encode(&s.u[j], &blocks_a, Part::EncA, level, child, d2)?;
            let tb = self.encode(&s.v[j], &blocks_b, Part::EncB, level, child, d2)?;
            products.push(self.rec(&ta, &tb, level + 1, child)?);
        }
        let dim = a.n;
        let mut out = vec![T::zeroed(); dim * dim];
        for (o, row) in s.w.iter().enumerate() {
            let terms_idx: Vec<(usize, &Coeff)> =
                row.iter().enumerate().filter(|(_, c)| !c.is_zero()).collect();
            let (orow, ocol) = (o / n0, o % n0);
            for e in 0..d2 {
                let (r, c) = (orow * size + e / size, ocol * size + e % size);
                let slot = path * dim * dim + r * dim + c;
                let terms: Vec<(&Coeff, &T)> =
                    terms_idx.iter().map(|&(j, coef)| (coef, &products[j].data[e])).collect();
                out[r * dim + c] = lincomb_counted(&mut self.ops, Some(level), &terms, (Part::Dec, level, slot))?;
            }
        }
        Ok(Matrix { n: dim, data: out })
    }

    fn encode<T: Scalar>(
        &mut self,
        row: &[Coeff],
        blocks: &[Matrix<T>],
        part: Part,
        level: usize,
        child: usize,
        d2: usize,
    ) -> Result<Matrix<T>, MmError> {
        let nz: Vec<(usize, &Coeff)> = row.iter().enumerate().filter(|(_, c)| !c.is_zero()).collect();
        if nz.len() == 1 && nz[0].1.is_one() {
            return Ok(blocks[nz[0].0].clone());
        }
        let size = blocks[0].n;
        let mut data = Vec::with_capacity(d2);
        for e in 0..d2 {
            let terms: Vec<(&Coeff, &T)> = nz.iter().map(|&(p, c)| (c, &blocks[p].data[e])).collect();
            let slot = child * d2 + e;
            data.push(lincomb_counted(&mut self.ops, Some(level), &terms, (part, level + 1, slot))?);
        }
        Ok(Matrix { n: size, data })
    }

    /// Classical product of a leaf block, written as the classical bilinear
    /// scheme: products `(i, j, t)` in that order, then `C_ij = sum_t`.
    fn leaf<T: Scalar>(&mut self, a: &Matrix<T>, b: &Matrix<T>, level: usize, path: usize) -> Result<Matrix<T>, MmError> {
        let n = a.n;
        debug_assert_eq!(n, self.dims[level]);
        if n == 1 {
            self.ops.multiplications += 1;
            return Ok(Matrix { n: 1, data: vec![T::mul(&a.data[0], &b.data[0], (Part::Dec, level, path))?] });
        }
        let one = Coeff::one();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut prods = Vec::with_capacity(n);
                for t in 0..n {
                    let slot = path * n * n * n + (i * n + j) * n + t;
                    prods.push(T::mul(a.get(i, t), b.get(t, j), (Part::Dec, level + 1, slot))?);
                }
                self.ops.multiplications += n as u64;
                let terms: Vec<(&Coeff, &T)> = prods.iter().map(|p| (&one, p)).collect();
                out.push(lincomb_counted(&mut self.ops, None, &terms, (Part::Dec, level, path * n * n + i * n + j))?);
            }
        }
        Ok(Matrix { n, data: out })
    }
}

fn check_inputs<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, levels: &[BilinearScheme]) -> Result<(), MmError> {
    if a.n != b.n || a.data.len() != a.n * a.n || b.data.len() != b.n * b.n {
        return Err(MmError::Dimension(format!("{0}x{0} times {1}x{1}", a.n, b.n)));
    }
    if a.n == 0 {
        return Err(MmError::Dimension("empty matrices".into()));
    }
    for s in levels {
        s.check_shape().map_err(|e| MmError::Strategy(e.to_string()))?;
        for c in s.u.iter().chain(&s.v).chain(&s.w).flatten() {
            if !c.is_zero() && !T::accepts(c) {
                return Err(MmError::NonInteger(c.to_string()));
            }
        }
    }
    Ok(())
}

fn run<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, levels: &[BilinearScheme], padded: usize) -> Result<Product<T>, MmError> {
    let mut dims = vec![padded];
    for s in levels {
        let last = *dims.last().unwrap();
        dims.push(last / s.n0);
    }
    // dims is indexed by level starting at 1.
    dims.insert(0, 0);
    let profile = levels
        .iter()
        .enumerate()
        .map(|(i, s)| LevelOps { level: i + 1, scheme: s.name.clone(), subproblems: 0, additions: 0 })
        .collect();
    let mut r = Run { levels, dims, ops: OpCount { padded_n: padded, profile, ..OpCount::default() } };
    let n = a.n;
    let (pa, pb) = if padded == n { (a.clone(), b.clone()) } else { (a.padded(padded, T::zeroed()), b.padded(padded, T::zeroed())) };
    let c = r.rec(&pa, &pb, 1, 0)?;
    let c = if padded == n { c } else { c.truncated(n) };
    Ok(Product { c, ops: r.ops })
}

/// `C = A * B` under a strategy; the result is exact for integer and rational scalars.
pub fn multiply<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, strategy: &Strategy) -> Result<Product<T>, MmError> {
    let (levels, padded) = strategy.plan(a.n);
    check_inputs(a, b, &levels)?;
    run(a, b, &levels, padded)
}

/// Classical triple loop, used as an oracle.
pub fn naive<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>, MmError> {
    check_inputs(a, b, &[])?;
    let n = a.n;
    let one = Coeff::one();
    let key = (Part::Custom, 0, 0);
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let prods: Vec<T> = (0..n).map(|t| T::mul(a.get(i, t), b.get(t, j), key)).collect::<Result<_, _>>()?;
            let terms: Vec<(&Coeff, &T)> = prods.iter().map(|p| (&one, p)).collect();
            data.push(T::lincomb(&terms, key)?);
        }
    }
    Ok(Matrix { n, data })
}

/// Operation counts from the recurrence alone, without touching any matrix.
pub fn count_ops(n: usize, strategy: &Strategy) -> OpCount {
    let (levels, padded) = strategy.plan(n);
    let mut ops = OpCount { padded_n: padded, ..OpCount::default() };
    let mut subproblems = 1u64;
    let mut dim = padded as u64;
    for (i, s) in levels.iter().enumerate() {
        let block = (dim / s.n0 as u64).pow(2);
        let mut adds = 0u64;
        let mut scal = 0u64;
        for row in s.u.iter().chain(&s.v) {
            let nz: Vec<&Coeff> = row.iter().filter(|c| !c.is_zero()).collect();
            if nz.len() == 1 && nz[0].is_one() {
                continue;
            }
            adds += nz.len() as u64 - 1;
            scal += nz.iter().filter(|c| c.abs() != Coeff::one()).count() as u64;
        }
        for row in &s.w {
            let nz: Vec<&Coeff> = row.iter().filter(|c| !c.is_zero()).collect();
            adds += nz.len() as u64 - 1;
            scal += nz.iter().filter(|c| c.abs() != Coeff::one()).count() as u64;
        }
        ops.additions += subproblems * block * adds;
        ops.scalings += subproblems * block * scal;
        ops.profile.push(LevelOps {
            level: i + 1,
            scheme: s.name.clone(),
            subproblems,
            additions: subproblems * block * adds,
        });
        subproblems *= s.m as u64;
        dim /= s.n0 as u64;
    }
    ops.multiplications = subproblems * dim.pow(3);
    ops.additions += subproblems * dim * dim * (dim - 1);
    ops
}

#[derive(Debug, Default)]
struct Recorder {
    keys: Vec<Key>,
    kinds: Vec<VertexKind>,
    operands: Vec<Vec<usize>>,
}

impl Recorder {
    fn push(&mut self, key: Key, kind: VertexKind, operands: Vec<usize>) -> usize {
        self.keys.push(key);
        self.kinds.push(kind);
        self.operands.push(operands);
        self.keys.len() - 1
    }
}

/// A scalar that records every operation performed on it.
#[derive(Clone)]
pub struct Traced {
    id: usize,
    rec: Rc<RefCell<Recorder>>,
}

impl fmt::Debug for Traced {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.id)
    }
}

thread_local! {
    static ZERO_SINK: Rc<RefCell<Recorder>> = Rc::new(RefCell::new(Recorder::default()));
}

impl Scalar for Traced {
    fn zeroed() -> Self {
        Traced { id: usize::MAX, rec: ZERO_SINK.with(Rc::clone) }
    }
    fn lincomb(terms: &[(&Coeff, &Self)], key: Key) -> Result<Self, MmError> {
        let rec = Rc::clone(&terms[0].1.rec);
        let ops = terms.iter().map(|(_, x)| x.id).collect();
        let id = rec.borrow_mut().push(key, VertexKind::Add, ops);
        Ok(Traced { id, rec })
    }
    fn mul(a: &Self, b: &Self, key: Key) -> Result<Self, MmError> {
        let rec = Rc::clone(&a.rec);
        let id = rec.borrow_mut().push(key, VertexKind::Product, vec![a.id, b.id]);
        Ok(Traced { id, rec })
    }
    fn accepts(_: &Coeff) -> bool {
        true
    }
}

#[derive(Debug, Clone)]
pub struct Trace {
    /// The executed DAG in canonical numbering.
    pub cdag: Cdag,
    /// Non-input vertices in execution order.
    pub execution_order: Vec<usize>,
    pub ops: OpCount,
}

/// Execute the strategy on symbolic `n x n` inputs and return the executed DAG.
///
/// `n` must be the product of the per-level block sizes times the leaf size
/// (no padding). A leaf of size `b > 1` appears as an extra classical level.
pub fn trace(n: usize, strategy: &Strategy) -> Result<Trace, MmError> {
    let (mut levels, padded) = strategy.plan(n);
    if padded != n {
        return Err(MmError::Dimension(format!("trace needs n = {padded} without padding, got {n}")));
    }
    if levels.is_empty() && n == 1 {
        return Err(MmError::Strategy("a trace needs at least one recursion level".into()));
    }
    let rec = Rc::new(RefCell::new(Recorder::default()));
    let inputs = |part: Part| -> Matrix<Traced> {
        Matrix::from_fn(n, |r, c| {
            let id = rec.borrow_mut().push((part, 1, r * n + c), VertexKind::Input, Vec::new());
            Traced { id, rec: Rc::clone(&rec) }
        })
    };
    let a = inputs(Part::EncA);
    let b = inputs(Part::EncB);
    check_inputs(&a, &b, &levels)?;
    let product = run(&a, &b, &levels, padded)?;
    drop((a, b, product.c));
    let leaf = levels.iter().fold(n, |d, s| d / s.n0);
    if leaf > 1 {
        levels.push(BilinearScheme::classical(leaf));
    }
    let k = levels.len();
    let layout = Layout::new(&levels, k, Part::Full, true)?;
    let rec = Rc::try_unwrap(rec).map_err(|_| MmError::Strategy("trace values still alive".into()))?.into_inner();
    let total = rec.keys.len();
    if total != layout.num_vertices() {
        return Err(MmError::Strategy(format!(
            "trace has {total} vertices, layout expects {}",
            layout.num_vertices()
        )));
    }
    let canon: Vec<usize> = rec.keys.iter().map(|&(p, l, s)| layout.id_of(p, l, s)).collect();
    let mut inverse = vec![usize::MAX; total];
    for (t, &c) in canon.iter().enumerate() {
        if inverse[c] != usize::MAX {
            return Err(MmError::Strategy(format!("two trace values map to vertex {c}")));
        }
        inverse[c] = t;
    }
    let mut bld = GraphBuilder::with_capacity(total, 3 * total);
    for &t in &inverse {
        let (part, level, _) = rec.keys[t];
        let kind = match (rec.kinds[t], part, level) {
            (VertexKind::Add, Part::Dec, 1) => VertexKind::Output,
            (kind, _, _) => kind,
        };
        let preds: Vec<usize> = rec.operands[t].iter().map(|&o| canon[o]).collect();
        bld.push(kind, Some(level), part, &preds);
    }
    let schemes = if strategy.stationary && leaf == 1 { vec![levels[0].clone()] } else { levels.clone() };
    let meta = Meta {
        schemes,
        k,
        part: Part::Full,
        identify_unit_rows: true,
        expanded: None,
        regular_degree: None,
    };
    let cdag = bld.finish(meta, layout.output_ids())?;
    let execution_order = (0..total)
        .filter(|&t| rec.kinds[t] != VertexKind::Input)
        .map(|t| canon[t])
        .collect();
    Ok(Trace { cdag, execution_order, ops: product.ops })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdag::{build_full, BuildOptions};

    fn strassen(cutoff: usize) -> Strategy {
        Strategy::stationary(BilinearScheme::strassen(), cutoff)
    }

    #[test]
    fn identity_times_identity() {
        let i = Matrix::identity(4);
        assert_eq!(multiply(&i, &i, &strassen(1)).unwrap().c, i);
    }

    #[test]
    fn agrees_with_naive_on_random_inputs() {
        let strategies = [
            strassen(1),
            strassen(2),
            Strategy::stationary(BilinearScheme::winograd(), 1),
            Strategy::stationary(BilinearScheme::classical(2), 1),
            Strategy::levels(vec![BilinearScheme::strassen(), BilinearScheme::winograd()], 1),
        ];
        for seed in 0..50 {
            let a = Matrix::random(2 * seed, 8, -9, 9);
            let b = Matrix::random(2 * seed + 1, 8, -9, 9);
            let want = naive(&a, &b).unwrap();
            for s in &strategies {
                assert_eq!(multiply(&a, &b, s).unwrap().c, want);
            }
        }
    }

    #[test]
    fn padding_and_odd_sizes() {
        let a = Matrix::random(1, 7, -5, 5);
        let b = Matrix::random(2, 7, -5, 5);
        let p = multiply(&a, &b, &strassen(1)).unwrap();
        assert_eq!(p.c, naive(&a, &b).unwrap());
        assert_eq!(p.ops.padded_n, 8);
        let p = multiply(&a, &b, &strassen(2)).unwrap();
        assert_eq!(p.ops.padded_n, 8);
        let c3 = Strategy::stationary(BilinearScheme::classical(3), 1);
        let p = multiply(&a, &b, &c3).unwrap();
        assert_eq!((p.c, p.ops.padded_n), (naive(&a, &b).unwrap(), 9));
    }

    #[test]
    fn multiplication_count_law() {
        for k in 1..=5u32 {
            for j in 0..=k {
                let n = 1usize << k;
                let a = Matrix::random(k as u64, n, -3, 3).to_i64().unwrap();
                let p = multiply(&a, &a, &strassen(1 << j)).unwrap();
                assert_eq!(p.ops.multiplications, 7u64.pow(k - j) * 8u64.pow(j));
                assert_eq!(p.ops, count_ops(n, &strassen(1 << j)));
            }
        }
        let mixed = Strategy::levels(
            vec![BilinearScheme::strassen(), BilinearScheme::classical(2), BilinearScheme::winograd()],
            1,
        );
        let a = Matrix::random(3, 8, -3, 3);
        assert_eq!(multiply(&a, &a, &mixed).unwrap().ops.multiplications, 7 * 8 * 7);
    }

    #[test]
    fn strassen_one_level_additions() {
        let a = Matrix::random(5, 2, -3, 3);
        assert_eq!(multiply(&a, &a, &strassen(1)).unwrap().ops.additions, 18);
    }

    #[test]
    fn fixed_width_overflow_is_reported() {
        let big = Matrix { n: 2, data: vec![i64::MAX / 2; 4] };
        assert!(matches!(multiply(&big, &big, &strassen(1)), Err(MmError::Overflow)));
    }

    #[test]
    fn rational_coefficients_need_rational_mode() {
        let mut s = BilinearScheme::strassen();
        let half = Coeff::new(BigInt::from(1), BigInt::from(2));
        s.u[0] = vec![half.clone(), Coeff::zero(), Coeff::zero(), half];
        s.w[0][0] = Coeff::from_integer(BigInt::from(2));
        s.w[3][0] = Coeff::from_integer(BigInt::from(2));
        let strat = Strategy::stationary(s, 1);
        let a = Matrix::random(8, 4, -9, 9);
        assert!(matches!(multiply(&a, &a, &strat), Err(MmError::NonInteger(_))));
        let q = a.map(|x| BigRational::from_integer(x.clone()));
        let want = naive(&q, &q).unwrap();
        assert_eq!(multiply(&q, &q, &strat).unwrap().c, want);
    }

    #[test]
    fn dimension_mismatch() {
        let a = Matrix::random(1, 4, 0, 1);
        let b = Matrix::random(1, 2, 0, 1);
        assert!(matches!(multiply(&a, &b, &strassen(1)), Err(MmError::Dimension(_))));
    }

    #[test]
    fn matrix_text_round_trip() {
        let a = Matrix::random(11, 5, -100, 100);
        let back: Matrix<BigInt> = a.to_string().parse().unwrap();
        assert_eq!(back, a);
        assert!("2\n1 2\n3".parse::<Matrix<BigInt>>().is_err());
        assert!("x".parse::<Matrix<BigInt>>().is_err());
    }

    #[test]
    fn trace_equals_builder() {
        for k in 1..=4 {
            let t = trace(1 << k, &strassen(1)).unwrap();
            let g = build_full(&[BilinearScheme::strassen()], k, BuildOptions::default()).unwrap();
            assert_eq!(t.cdag, g);
            assert_eq!(t.execution_order.len(), g.num_vertices() - g.inputs().len());
        }
        let t = trace(2, &strassen(1)).unwrap();
        assert_eq!(t.cdag.count_kind(VertexKind::Product), 7);
        // Leaf of size 2 becomes a classical level.
        let t = trace(8, &strassen(2)).unwrap();
        let levels = vec![BilinearScheme::strassen(), BilinearScheme::strassen(), BilinearScheme::classical(2)];
        let g = build_full(&levels, 3, BuildOptions::default()).unwrap();
        assert_eq!(t.cdag, g);
    }
}
