//! Closed-form communication bounds, evaluated with all hidden constants set to 1.
//!
//! Values are computed in log2 space so that exponent relations (for example
//! the doubling ratio `f(2n) / f(n) = 2^omega0`) hold exactly for powers of two.
//! When the scheme's `(n0, m)` are known and `n / sqrt(M)` is an exact power of
//! `n0`, the bandwidth bound is also returned as an exact integer.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("n, M and p must be positive")]
    NonPositive,
    #[error("omega0 = {0} outside (2, 3]")]
    Exponent(f64),
    #[error("replication factor c = {c} outside [1, p^(1/3)] for p = {p}")]
    Replication { c: f64, p: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundQuery {
    pub n: u64,
    /// Fast (or local) memory size in words.
    pub m_words: u64,
    pub p: u64,
    pub omega0: f64,
    /// Memory replication factor for the third memory regime.
    pub c: f64,
    /// Base case `(n0, m)` enabling exact integer evaluation.
    pub base: Option<(u64, u64)>,
}

impl BoundQuery {
    pub fn new(n: u64, m_words: u64, omega0: f64) -> Self {
        Self { n, m_words, p: 1, omega0, c: 1.0, base: None }
    }

    pub fn strassen(n: u64, m_words: u64) -> Self {
        Self { base: Some((2, 7)), ..Self::new(n, m_words, 7f64.log2()) }
    }

    pub fn classical(n: u64, m_words: u64) -> Self {
        Self { base: Some((2, 8)), ..Self::new(n, m_words, 3.0) }
    }

    pub fn with_p(mut self, p: u64) -> Self {
        self.p = p;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<(), BoundError> {
        if self.n == 0 || self.m_words == 0 || self.p == 0 {
            return Err(BoundError::NonPositive);
        }
        if !(self.omega0 > 2.0 && self.omega0 <= 3.0) {
            return Err(BoundError::Exponent(self.omega0));
        }
        Ok(())
    }

    /// The regime where the inputs do not fit in fast memory: `3 n^2 > M`.
    pub fn in_regime(&self) -> bool {
        3 * (self.n as u128) * (self.n as u128) > self.m_words as u128
    }

    /// `lg n - lg sqrt(M)`: the exponent base of the recursion count.
    fn log2_ratio(&self) -> f64 {
        (self.n as f64).log2() - 0.5 * (self.m_words as f64).log2()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub log2: f64,
    pub exact: Option<u128>,
    /// Evaluated inside the regime `3 n^2 > M`.
    pub in_regime: bool,
}

impl BoundValue {
    fn from_log2(log2: f64, exact: Option<u128>, in_regime: bool) -> Self {
        Self { value: log2.exp2(), log2, exact, in_regime }
    }
}

fn exact_sequential(q: &BoundQuery) -> Option<u128> {
    let (n0, m) = q.base?;
    let root = (q.m_words as f64).sqrt().round() as u64;
    if root * root != q.m_words || !q.n.is_multiple_of(root) {
        return None;
    }
    let mut ratio = q.n / root;
    let mut j = 0u32;
    while ratio > 1 {
        if !ratio.is_multiple_of(n0) {
            return None;
        }
        ratio /= n0;
        j += 1;
    }
    (m as u128).checked_pow(j)?.checked_mul(q.m_words as u128)
}

/// `(n / sqrt(M))^omega0 * M`.
pub fn sequential_lower(q: &BoundQuery) -> Result<BoundValue, BoundError> {
    q.validate()?;
    let log2 = q.omega0 * q.log2_ratio() + (q.m_words as f64).log2();
    Ok(BoundValue::from_log2(log2, exact_sequential(q), q.in_regime()))
}

/// Same expression as the lower bound: attained by the recursive algorithm up to constants.
pub fn upper_bound(q: &BoundQuery) -> Result<BoundValue, BoundError> {
    sequential_lower(q)
}

/// `(n / sqrt(M))^omega0 * M / p`.
pub fn parallel_lower(q: &BoundQuery) -> Result<BoundValue, BoundError> {
    let s = sequential_lower(q)?;
    let p = q.p as u128;
    let exact = s.exact.filter(|x| x % p == 0).map(|x| x / p);
    Ok(BoundValue::from_log2(s.log2 - (q.p as f64).log2(), exact, s.in_regime))
}

/// Messages: bandwidth divided by the largest message size `M`.
pub fn latency_lower(q: &BoundQuery) -> Result<BoundValue, BoundError> {
    let s = sequential_lower(q)?;
    let m = q.m_words as u128;
    let exact = s.exact.map(|x| x / m);
    Ok(BoundValue::from_log2(s.log2 - (q.m_words as f64).log2(), exact, s.in_regime))
}

/// `lg(f(2n)) - lg(f(n))` for the sequential bound.
pub fn doubling_log2_ratio(q: &BoundQuery) -> Result<f64, BoundError> {
    q.validate()?;
    let step = (2.0 * q.n as f64).log2() - (q.n as f64).log2();
    Ok(q.omega0 * step)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `M = n^2 / p`.
    TwoD,
    /// `M = n^2 / p^(2/3)`.
    ThreeD,
    /// `M = c n^2 / p`.
    Replicated,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::TwoD, Regime::ThreeD, Regime::Replicated];

    pub fn label(self) -> &'static str {
        match self {
            Regime::TwoD => "M = n^2/p",
            Regime::ThreeD => "M = n^2/p^(2/3)",
            Regime::Replicated => "M = c n^2/p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableEntry {
    pub regime: Regime,
    /// Local memory size the regime assumes.
    pub memory: f64,
    /// Always `n^2`, independent of the exponent.
    pub numerator: f64,
    pub denominator: f64,
    pub value: f64,
}

fn denominator(regime: Regime, omega0: f64, p: f64, c: f64) -> f64 {
    match regime {
        Regime::TwoD => p.powf(2.0 - omega0 / 2.0),
        Regime::ThreeD => p.powf((5.0 - omega0) / 3.0),
        Regime::Replicated => c.powf(omega0 / 2.0 - 1.0) * p.powf(2.0 - omega0 / 2.0),
    }
}

/// Parallel bandwidth lower bounds under the three memory regimes.
pub fn memory_constrained_table(q: &BoundQuery) -> Result<[TableEntry; 3], BoundError> {
    q.validate()?;
    let p = q.p as f64;
    if !(q.c >= 1.0 && q.c <= p.cbrt() * (1.0 + 1e-12)) {
        return Err(BoundError::Replication { c: q.c, p: q.p });
    }
    let n2 = (q.n as f64) * (q.n as f64);
    Ok(Regime::ALL.map(|regime| {
        let memory = match regime {
            Regime::TwoD => n2 / p,
            Regime::ThreeD => n2 / p.powf(2.0 / 3.0),
            Regime::Replicated => q.c * n2 / p,
        };
        let denominator = denominator(regime, q.omega0, p, q.c);
        TableEntry { regime, memory, numerator: n2, denominator, value: n2 / denominator }
    }))
}

/// Parallel bound at a real-valued memory size (used to cross-check the table).
pub fn parallel_lower_at(n: f64, memory: f64, p: f64, omega0: f64) -> f64 {
    (n / memory.sqrt()).powf(omega0) * memory / p
}

#[cfg(test)]
mod tests {
    use super::*;

    const LG7: f64 = 2.807354922057604;

    #[test]
    fn headline_values() {
        let q = BoundQuery::strassen(1 << 10, 1 << 10);
        let v = sequential_lower(&q).unwrap();
        assert_eq!(v.exact, Some(17_210_368));
        assert!((v.value / 17_210_368.0 - 1.0).abs() < 1e-12);
        let q = BoundQuery::strassen(512, 64);
        assert_eq!(upper_bound(&q).unwrap().exact, Some(7_529_536));
        assert_eq!(latency_lower(&q).unwrap().exact, Some(7u128.pow(6)));
    }

    #[test]
    fn classical_exponent() {
        let q = BoundQuery::new(256, 64, 3.0);
        let v = sequential_lower(&q).unwrap().value;
        assert!((v / (256f64.powi(3) / 8.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitting_memory_gives_n_squared() {
        let q = BoundQuery::new(64, 64 * 64, LG7);
        let v = sequential_lower(&q).unwrap();
        assert!((v.value - 4096.0).abs() < 1e-6);
        assert!(v.in_regime); // 3 n^2 > n^2
        let q = BoundQuery::new(64, 3 * 64 * 64, LG7);
        assert!(!sequential_lower(&q).unwrap().in_regime);
    }

    #[test]
    fn doubling_ratio_is_exact() {
        for omega in [LG7, 2.5, 3.0, 2.3728639] {
            for e in 3..20 {
                let q = BoundQuery::new(1 << e, 64, omega);
                assert_eq!(doubling_log2_ratio(&q).unwrap(), omega);
                let a = sequential_lower(&q).unwrap().log2;
                let b = sequential_lower(&BoundQuery { n: 2 << e, ..q }).unwrap().log2;
                assert!((b - a - omega).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn table_reductions() {
        let q = BoundQuery::new(4096, 1, 3.0).with_p(512).with_c(4.0);
        let t = memory_constrained_table(&q).unwrap();
        let n2 = 4096f64 * 4096.0;
        let classical = [n2 / 512f64.sqrt(), n2 / 512f64.powf(2.0 / 3.0), n2 / (2.0 * 512f64.sqrt())];
        for (e, want) in t.iter().zip(classical) {
            assert!((e.value / want - 1.0).abs() < 1e-12);
            assert_eq!(e.numerator, n2);
        }
        let s = memory_constrained_table(&BoundQuery::new(4096, 1, LG7).with_p(64)).unwrap();
        assert!((s[0].denominator.log(64.0) - (2.0 - LG7 / 2.0)).abs() < 1e-12);
        assert!((2.0 - LG7 / 2.0 - 0.596).abs() < 1e-3);
        assert!((s[2].value - s[0].value).abs() < 1e-9 * s[0].value);
    }

    #[test]
    fn errors() {
        assert_eq!(sequential_lower(&BoundQuery::new(0, 4, LG7)), Err(BoundError::NonPositive));
        assert_eq!(sequential_lower(&BoundQuery::new(8, 4, 2.0)), Err(BoundError::Exponent(2.0)));
        let q = BoundQuery::new(8, 4, LG7).with_p(8).with_c(3.0);
        assert!(matches!(memory_constrained_table(&q), Err(BoundError::Replication { .. })));
    }
}
