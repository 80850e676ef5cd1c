//! Base-case bilinear schemes for recursive matrix multiplication.
//!
//! A scheme `<n0, m, U, V, W>` multiplies two `n0 x n0` matrices with `m`
//! products: product `j` is `(U[j] . vec(A)) * (V[j] . vec(B))` and output
//! entry `i` of `vec(C)` is `W[i] . (products)`. `vec` is row-major
//! flattening, so entry `(r, c)` sits at index `r * n0 + c`.
//!
//! Coefficients are exact rationals and every check in this module is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::Value;
use thiserror::Error;

pub type Coeff = BigRational;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("unknown scheme `{0}` (expected strassen, winograd, classical2x2 or a scheme file path)")]
    Unknown(String),
    #[error("malformed scheme document: {0}")]
    Malformed(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("scheme `{name}` does not satisfy the bilinear identity")]
    Invalid { name: String },
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A base case `<n0, m>` with encoding matrices `u`, `v` (m x n0^2) and
/// decoding matrix `w` (n0^2 x m).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilinearScheme {
    pub name: String,
    pub n0: usize,
    pub m: usize,
    pub u: Vec<Vec<Coeff>>,
    pub v: Vec<Vec<Coeff>>,
    pub w: Vec<Vec<Coeff>>,
}

/// A pair of integer matrices on which a scheme disagrees with the classical product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub a: Vec<Vec<BigInt>>,
    pub b: Vec<Vec<BigInt>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeReport {
    pub name: String,
    pub n0: usize,
    pub m: usize,
    pub valid: bool,
    pub omega0: f64,
    /// Additions after greedy sharing of repeated pairwise partial sums.
    pub additions: usize,
    /// Additions when every row of `u`, `v`, `w` is evaluated on its own (z - 1 per row).
    pub naive_additions: usize,
    /// Nonzero coefficients other than +1 / -1.
    pub non_unit_coefficients: usize,
    pub dec1_connected: bool,
    pub dec1_components: usize,
    pub io_disjoint: bool,
    pub witness: Option<Witness>,
}

/// `b` in `classicalBxB` or `classicalB`.
fn classical_size(name: &str) -> Option<usize> {
    let rest = name.strip_prefix("classical")?;
    let b = rest.split_once('x').map_or(rest, |(a, c)| if a == c { a } else { "" });
    b.parse().ok().filter(|&b| b >= 2)
}

fn int(v: i64) -> Coeff {
    Coeff::from_integer(BigInt::from(v))
}

fn rows(data: &[&[i64]]) -> Vec<Vec<Coeff>> {
    data.iter().map(|r| r.iter().map(|&x| int(x)).collect()).collect()
}

impl BilinearScheme {
    /// Look up a builtin scheme by name, or load a scheme document from a path.
    ///
    /// Builtins are validated before they are returned.
    pub fn builtin(name: &str) -> Result<Self, SchemeError> {
        let scheme = match name {
            "strassen" => Self::strassen(),
            "winograd" => Self::winograd(),
            "classical2x2" | "classical" => Self::classical(2).renamed("classical2x2"),
            other => match classical_size(other) {
                Some(b) => Self::classical(b),
                None if Path::new(other).exists() => return Self::load(Path::new(other)),
                None => return Err(SchemeError::Unknown(other.to_string())),
            },
        };
        let report = scheme.validate()?;
        if !report.valid {
            return Err(SchemeError::Invalid { name: scheme.name });
        }
        Ok(scheme)
    }

    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }

    /// Strassen's 2x2 scheme with 7 products.
    pub fn strassen() -> Self {
        // vec(A) = [A11, A12, A21, A22]
        let u = rows(&[
            &[1, 0, 0, 1],  // M1 = (A11 + A22)
            &[0, 0, 1, 1],  // M2 = (A21 + A22)
            &[1, 0, 0, 0],  // M3 = A11
            &[0, 0, 0, 1],  // M4 = A22
            &[1, 1, 0, 0],  // M5 = (A11 + A12)
            &[-1, 0, 1, 0], // M6 = (A21 - A11)
            &[0, 1, 0, -1], // M7 = (A12 - A22)
        ]);
        let v = rows(&[
            &[1, 0, 0, 1],  // (B11 + B22)
            &[1, 0, 0, 0],  // B11
            &[0, 1, 0, -1], // (B12 - B22)
            &[-1, 0, 1, 0], // (B21 - B11)
            &[0, 0, 0, 1],  // B22
            &[1, 1, 0, 0],  // (B11 + B12)
            &[0, 0, 1, 1],  // (B21 + B22)
        ]);
        let w = rows(&[
            &[1, 0, 0, 1, -1, 0, 1], // C11 = M1 + M4 - M5 + M7
            &[0, 0, 1, 0, 1, 0, 0],  // C12 = M3 + M5
            &[0, 1, 0, 1, 0, 0, 0],  // C21 = M2 + M4
            &[1, -1, 1, 0, 0, 1, 0], // C22 = M1 - M2 + M3 + M6
        ]);
        Self { name: "strassen".into(), n0: 2, m: 7, u, v, w }
    }

    /// Winograd's variant of Strassen's scheme, flattened to (u, v, w) form.
    pub fn winograd() -> Self {
        let u = rows(&[
            &[1, 0, 0, 0],    // A11
            &[0, 1, 0, 0],    // A12
            &[1, 1, -1, -1],  // S4 = A12 - S2
            &[0, 0, 0, 1],    // A22
            &[0, 0, 1, 1],    // S1 = A21 + A22
            &[-1, 0, 1, 1],   // S2 = S1 - A11
            &[1, 0, -1, 0],   // S3 = A11 - A21
        ]);
        let v = rows(&[
            &[1, 0, 0, 0],    // B11
            &[0, 0, 1, 0],    // B21
            &[0, 0, 0, 1],    // B22
            &[1, -1, -1, 1],  // T4 = T2 - B21
            &[-1, 1, 0, 0],   // T1 = B12 - B11
            &[1, -1, 0, 1],   // T2 = B22 - T1
            &[0, -1, 0, 1],   // T3 = B22 - B12
        ]);
        let w = rows(&[
            &[1, 1, 0, 0, 0, 0, 0],  // C11 = M1 + M2
            &[1, 0, 1, 0, 1, 1, 0],  // C12 = M1 + M6 + M5 + M3
            &[1, 0, 0, -1, 0, 1, 1], // C21 = M1 + M6 + M7 - M4
            &[1, 0, 0, 0, 1, 1, 1],  // C22 = M1 + M6 + M7 + M5
        ]);
        Self { name: "winograd".into(), n0: 2, m: 7, u, v, w }
    }

    /// The classical `b x b` scheme: product `(i * b + j) * b + t` is `A[i][t] * B[t][j]`.
    pub fn classical(b: usize) -> Self {
        let nn = b * b;
        let m = b * b * b;
        let mut u = vec![vec![Coeff::zero(); nn]; m];
        let mut v = vec![vec![Coeff::zero(); nn]; m];
        let mut w = vec![vec![Coeff::zero(); m]; nn];
        for i in 0..b {
            for j in 0..b {
                for t in 0..b {
                    let p = (i * b + j) * b + t;
                    u[p][i * b + t] = Coeff::one();
                    v[p][t * b + j] = Coeff::one();
                    w[i * b + j][p] = Coeff::one();
                }
            }
        }
        Self { name: format!("classical{b}x{b}"), n0: b, m, u, v, w }
    }

    /// Shape checks: matrix dimensions against `(n0, m)` and no all-zero rows.
    pub fn check_shape(&self) -> Result<(), SchemeError> {
        let nn = self.n0 * self.n0;
        if self.n0 == 0 || self.m == 0 {
            return Err(SchemeError::Dimension(format!(
                "n0 = {} and m = {} must be positive",
                self.n0, self.m
            )));
        }
        let check = |label: &str, mat: &[Vec<Coeff>], r: usize, c: usize| {
            if mat.len() != r {
                return Err(SchemeError::Dimension(format!(
                    "{label} has {} rows, expected {r}",
                    mat.len()
                )));
            }
            for (i, row) in mat.iter().enumerate() {
                if row.len() != c {
                    return Err(SchemeError::Dimension(format!(
                        "{label} row {i} has {} entries, expected {c}",
                        row.len()
                    )));
                }
                if row.iter().all(Zero::is_zero) {
                    return Err(SchemeError::Dimension(format!("{label} row {i} is all zero")));
                }
            }
            Ok(())
        };
        check("u", &self.u, self.m, nn)?;
        check("v", &self.v, self.m, nn)?;
        check("w", &self.w, nn, self.m)?;
        Ok(())
    }

    pub fn omega0(&self) -> f64 {
        let m = self.m as f64;
        if self.n0.is_power_of_two() {
            m.log2() / f64::from(self.n0.trailing_zeros())
        } else {
            m.ln() / (self.n0 as f64).ln()
        }
    }

    /// Full report: exact bilinear identity check, exponent, addition counts and
    /// the structural checks on the decoding graph.
    pub fn validate(&self) -> Result<SchemeReport, SchemeError> {
        self.check_shape()?;
        let failure = self.first_identity_failure();
        let witness = failure.map(|(p, q)| self.witness_for(p, q));
        let (dec1_components, _) = self.dec1_components();
        Ok(SchemeReport {
            name: self.name.clone(),
            n0: self.n0,
            m: self.m,
            valid: witness.is_none(),
            omega0: self.omega0(),
            additions: self.shared_additions(),
            naive_additions: self.naive_additions(),
            non_unit_coefficients: [&self.u, &self.v, &self.w]
                .iter()
                .flat_map(|mat| mat.iter().flatten())
                .filter(|c| !c.is_zero() && c.abs() != Coeff::one())
                .count(),
            dec1_connected: dec1_components == 1,
            dec1_components,
            io_disjoint: self.check_io_disjoint(),
            witness,
        })
    }

    /// Symbolic check: for output `(r, c)` the coefficient of `a_p * b_q` must be 1
    /// exactly when `p = (r, t)` and `q = (t, c)`, and 0 otherwise. Returns the
    /// first failing monomial `(p, q)`.
    fn first_identity_failure(&self) -> Option<(usize, usize)> {
        let n0 = self.n0;
        let nn = n0 * n0;
        for out in 0..nn {
            let (r, c) = (out / n0, out % n0);
            for p in 0..nn {
                for q in 0..nn {
                    let mut acc = Coeff::zero();
                    for j in 0..self.m {
                        let wj = &self.w[out][j];
                        if wj.is_zero() || self.u[j][p].is_zero() || self.v[j][q].is_zero() {
                            continue;
                        }
                        acc += wj * &self.u[j][p] * &self.v[j][q];
                    }
                    let expected = p / n0 == r && q % n0 == c && p % n0 == q / n0;
                    let ok = if expected { acc.is_one() } else { acc.is_zero() };
                    if !ok {
                        return Some((p, q));
                    }
                }
            }
        }
        None
    }

    fn witness_for(&self, p: usize, q: usize) -> Witness {
        let n0 = self.n0;
        let unit = |idx: usize| {
            let mut mat = vec![vec![BigInt::zero(); n0]; n0];
            mat[idx / n0][idx % n0] = BigInt::one();
            mat
        };
        Witness { a: unit(p), b: unit(q) }
    }

    /// Apply one level of the scheme to scalar matrices, exactly.
    pub fn apply(&self, a: &[Vec<Coeff>], b: &[Vec<Coeff>]) -> Vec<Vec<Coeff>> {
        let n0 = self.n0;
        let va: Vec<&Coeff> = a.iter().flatten().collect();
        let vb: Vec<&Coeff> = b.iter().flatten().collect();
        let products: Vec<Coeff> = (0..self.m)
            .map(|j| {
                let l: Coeff = self.u[j].iter().zip(&va).map(|(c, x)| c * *x).sum();
                let r: Coeff = self.v[j].iter().zip(&vb).map(|(c, x)| c * *x).sum();
                l * r
            })
            .collect();
        (0..n0)
            .map(|r| {
                (0..n0)
                    .map(|c| self.w[r * n0 + c].iter().zip(&products).map(|(x, y)| x * y).sum())
                    .collect()
            })
            .collect()
    }

    pub fn naive_additions(&self) -> usize {
        [&self.u, &self.v, &self.w]
            .iter()
            .flat_map(|mat| mat.iter())
            .map(|row| row.iter().filter(|c| !c.is_zero()).count().saturating_sub(1))
            .sum()
    }

    /// Additions needed when repeated pairwise partial sums are computed once.
    ///
    /// Greedy: repeatedly pick the pair of terms `(x_a, r * x_b)` occurring in the
    /// most rows (up to a common scale), replace it by a fresh variable and pay one
    /// addition. Encoders and the decoder are processed independently since they
    /// act on different operands.
    pub fn shared_additions(&self) -> usize {
        shared_additions(&self.u) + shared_additions(&self.v) + shared_additions(&self.w)
    }

    /// Connected components of the undirected bipartite graph with `m` product
    /// vertices, `n0^2` output vertices and one edge per nonzero of `w`.
    /// Returns the component count and the component label of each vertex
    /// (products first, then outputs).
    pub fn dec1_components(&self) -> (usize, Vec<usize>) {
        let n = self.m + self.n0 * self.n0;
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (i, row) in self.w.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    let (a, b) = (find(&mut parent, j), find(&mut parent, self.m + i));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut labels = BTreeMap::new();
        let comp: Vec<usize> = (0..n)
            .map(|x| {
                let root = find(&mut parent, x);
                let next = labels.len();
                *labels.entry(root).or_insert(next)
            })
            .collect();
        (labels.len(), comp)
    }

    pub fn check_dec1_connected(&self) -> bool {
        self.dec1_components().0 == 1
    }

    /// True iff no output entry is literally one product with coefficient 1.
    pub fn check_io_disjoint(&self) -> bool {
        !self.w.iter().any(|row| unit_position(row).is_some())
    }

    /// Index of the single nonzero entry when `row` is a unit vector with coefficient 1.
    pub(crate) fn unit_row(row: &[Coeff]) -> Option<usize> {
        unit_position(row)
    }

    pub fn load(path: &Path) -> Result<Self, SchemeError> {
        let text = std::fs::read_to_string(path).map_err(|source| SchemeError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Parse a scheme document (see [`BilinearScheme::to_document`]).
    pub fn parse(text: &str) -> Result<Self, SchemeError> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| SchemeError::Malformed(e.to_string()))?;
        Self::from_json(&value)
    }

    pub(crate) fn from_json(value: &Value) -> Result<Self, SchemeError> {
        let obj = value
            .as_object()
            .ok_or_else(|| SchemeError::Malformed("expected a JSON object".into()))?;
        let field = |k: &str| {
            obj.get(k)
                .ok_or_else(|| SchemeError::Malformed(format!("missing field `{k}`")))
        };
        let name = field("name")?
            .as_str()
            .ok_or_else(|| SchemeError::Malformed("`name` must be a string".into()))?
            .to_string();
        let size = |k: &str| -> Result<usize, SchemeError> {
            field(k)?
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| SchemeError::Malformed(format!("`{k}` must be a nonnegative integer")))
        };
        let n0 = size("n0")?;
        let m = size("m")?;
        let matrix = |k: &str| -> Result<Vec<Vec<Coeff>>, SchemeError> {
            let rows = field(k)?
                .as_array()
                .ok_or_else(|| SchemeError::Malformed(format!("`{k}` must be an array of rows")))?;
            rows.iter()
                .map(|row| {
                    row.as_array()
                        .ok_or_else(|| SchemeError::Malformed(format!("`{k}` rows must be arrays")))?
                        .iter()
                        .map(parse_coeff)
                        .collect()
                })
                .collect()
        };
        let scheme = Self { name, n0, m, u: matrix("u")?, v: matrix("v")?, w: matrix("w")? };
        Ok(scheme)
    }

    /// Scheme document: a JSON object with fields `name`, `n0`, `m`, `u`, `v`, `w`.
    /// Matrix entries are integers or strings `"p/q"`; one matrix row per line.
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{{");
        let _ = writeln!(out, "  \"name\": {},", Value::String(self.name.clone()));
        let _ = writeln!(out, "  \"n0\": {},", self.n0);
        let _ = writeln!(out, "  \"m\": {},", self.m);
        let mats = [("u", &self.u), ("v", &self.v), ("w", &self.w)];
        for (mi, (label, mat)) in mats.iter().enumerate() {
            let _ = writeln!(out, "  \"{label}\": [");
            for (ri, row) in mat.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(format_coeff).collect();
                let sep = if ri + 1 < mat.len() { "," } else { "" };
                let _ = writeln!(out, "    [{}]{sep}", cells.join(", "));
            }
            let sep = if mi + 1 < mats.len() { "," } else { "" };
            let _ = writeln!(out, "  ]{sep}");
        }
        out.push_str("}\n");
        out
    }

    pub(crate) fn to_json(&self) -> Value {
        let mat = |m: &[Vec<Coeff>]| {
            Value::Array(
                m.iter()
                    .map(|r| Value::Array(r.iter().map(coeff_json).collect()))
                    .collect(),
            )
        };
        serde_json::json!({
            "name": self.name,
            "n0": self.n0,
            "m": self.m,
            "u": mat(&self.u),
            "v": mat(&self.v),
            "w": mat(&self.w),
        })
    }
}

fn unit_position(row: &[Coeff]) -> Option<usize> {
    let mut nz = row.iter().enumerate().filter(|(_, c)| !c.is_zero());
    match (nz.next(), nz.next()) {
        (Some((i, c)), None) if c.is_one() => Some(i),
        _ => None,
    }
}

fn coeff_json(c: &Coeff) -> Value {
    if c.is_integer() {
        if let Some(x) = c.to_integer().to_i64() {
            return Value::from(x);
        }
    }
    Value::String(c.to_string())
}

fn format_coeff(c: &Coeff) -> String {
    coeff_json(c).to_string()
}

fn parse_coeff(v: &Value) -> Result<Coeff, SchemeError> {
    match v {
        Value::Number(n) => n
            .as_i64()
            .map(int)
            .ok_or_else(|| SchemeError::Malformed(format!("coefficient {n} is not an integer"))),
        Value::String(s) => parse_rational(s),
        other => Err(SchemeError::Malformed(format!("bad coefficient {other}"))),
    }
}

fn parse_rational(s: &str) -> Result<Coeff, SchemeError> {
    let bad = || SchemeError::Malformed(format!("bad rational `{s}`"));
    let s = s.trim();
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Coeff::new(p, q))
        }
        None => Ok(Coeff::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

fn shared_additions(mat: &[Vec<Coeff>]) -> usize {
    // Each row as a sparse linear form over variables; fresh variables get new indices.
    let mut forms: Vec<BTreeMap<usize, Coeff>> = mat
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (i, c.clone()))
                .collect()
        })
        .collect();
    let mut next_var = mat.first().map_or(0, Vec::len);
    let mut additions = 0;
    loop {
        let mut counts: BTreeMap<(usize, usize, Coeff), usize> = BTreeMap::new();
        for form in &forms {
            let terms: Vec<(&usize, &Coeff)> = form.iter().collect();
            for x in 0..terms.len() {
                for y in x + 1..terms.len() {
                    let ratio = terms[y].1 / terms[x].1;
                    *counts.entry((*terms[x].0, *terms[y].0, ratio)).or_default() += 1;
                }
            }
        }
        // BTreeMap iteration order makes ties resolve to the smallest key.
        let best = counts
            .into_iter()
            .filter(|(_, c)| *c >= 2)
            .fold(None::<((usize, usize, Coeff), usize)>, |acc, (key, c)| match acc {
                Some((_, bc)) if bc >= c => acc,
                _ => Some((key, c)),
            });
        let Some(((a, b, ratio), _)) = best else { break };
        let fresh = next_var;
        next_var += 1;
        additions += 1;
        for form in &mut forms {
            let matches = match (form.get(&a), form.get(&b)) {
                (Some(ca), Some(cb)) => cb / ca == ratio,
                _ => false,
            };
            if matches {
                let ca = form.remove(&a).unwrap();
                form.remove(&b);
                form.insert(fresh, ca);
            }
        }
    }
    additions + forms.iter().map(|f| f.len().saturating_sub(1)).sum::<usize>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &[Vec<Coeff>], b: &[Vec<Coeff>]) -> Vec<Vec<Coeff>> {
        let n = a.len();
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|t| &a[i][t] * &b[t][j]).sum()).collect())
            .collect()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<Coeff>> {
        (0..n).map(|_| (0..n).map(|_| int(rng.random_range(-9..=9))).collect()).collect()
    }

    #[test]
    fn builtins_match_naive_product_on_random_integers() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in ["strassen", "winograd", "classical2x2"] {
            let s = BilinearScheme::builtin(name).unwrap();
            for _ in 0..100 {
                let a = random_matrix(&mut rng, 2);
                let b = random_matrix(&mut rng, 2);
                assert_eq!(s.apply(&a, &b), naive(&a, &b), "{name}");
            }
        }
    }

    #[test]
    fn builtin_reports() {
        let s = BilinearScheme::builtin("strassen").unwrap().validate().unwrap();
        assert!(s.valid && s.dec1_connected && s.io_disjoint);
        assert_eq!((s.n0, s.m, s.additions, s.naive_additions), (2, 7, 18, 18));
        assert_eq!(s.omega0, 7f64.log2());

        let w = BilinearScheme::builtin("winograd").unwrap().validate().unwrap();
        assert!(w.valid && w.dec1_connected && w.io_disjoint);
        assert_eq!((w.m, w.additions), (7, 15));
        assert_eq!(w.naive_additions, 24);

        let c = BilinearScheme::builtin("classical2x2").unwrap().validate().unwrap();
        assert!(c.valid && !c.dec1_connected && c.io_disjoint);
        assert_eq!((c.m, c.dec1_components), (8, 4));
        assert_eq!(c.omega0, 3.0);
    }

    #[test]
    fn flipped_sign_yields_integer_witness() {
        let mut s = BilinearScheme::strassen();
        s.w[0][6] = -s.w[0][6].clone();
        let report = s.validate().unwrap();
        assert!(!report.valid);
        let wit = report.witness.unwrap();
        let to_q = |m: &Vec<Vec<BigInt>>| -> Vec<Vec<Coeff>> {
            m.iter().map(|r| r.iter().map(|x| Coeff::from_integer(x.clone())).collect()).collect()
        };
        let (a, b) = (to_q(&wit.a), to_q(&wit.b));
        assert_ne!(s.apply(&a, &b), naive(&a, &b));

        // Independent route: random search also finds a disagreement quickly.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let found = (0..1000).any(|_| {
            let a = random_matrix(&mut rng, 2);
            let b = random_matrix(&mut rng, 2);
            s.apply(&a, &b) != naive(&a, &b)
        });
        assert!(found);
    }

    #[test]
    fn dimension_mismatch_is_distinct_from_identity_failure() {
        let mut s = BilinearScheme::strassen();
        s.w.pop();
        assert!(matches!(s.validate(), Err(SchemeError::Dimension(_))));
        let mut s = BilinearScheme::strassen();
        s.u[2] = vec![Coeff::zero(); 4];
        assert!(matches!(s.validate(), Err(SchemeError::Dimension(_))));
    }

    #[test]
    fn io_disjoint_detects_unit_decoding_row() {
        let mut s = BilinearScheme::strassen();
        s.w[1] = rows(&[&[0, 0, 0, 0, 1, 0, 0]]).remove(0);
        assert!(!s.check_io_disjoint());
        assert!(BilinearScheme::classical(2).check_io_disjoint());
    }

    #[test]
    fn unknown_and_malformed() {
        assert!(matches!(
            BilinearScheme::builtin("no-such-scheme"),
            Err(SchemeError::Unknown(_))
        ));
        assert!(matches!(BilinearScheme::parse("{\"name\": 3}"), Err(SchemeError::Malformed(_))));
        assert!(matches!(BilinearScheme::parse("not json"), Err(SchemeError::Malformed(_))));
    }

    #[test]
    fn rational_entries_round_trip() {
        let mut s = BilinearScheme::strassen();
        s.name = "scaled".into();
        let half = Coeff::new(BigInt::from(1), BigInt::from(2));
        s.u[0][0] = half.clone();
        s.u[0][3] = half;
        s.w[0][0] = int(2);
        s.w[3][0] = int(2);
        let doc = s.to_document();
        assert!(doc.contains("\"1/2\""));
        let back = BilinearScheme::parse(&doc).unwrap();
        assert_eq!(back, s);
        let report = back.validate().unwrap();
        assert!(report.valid);
        assert_eq!(report.non_unit_coefficients, 4);
    }

    #[test]
    fn larger_classical_scheme_is_valid() {
        let c3 = BilinearScheme::classical(3).validate().unwrap();
        assert!(c3.valid);
        assert_eq!(c3.m, 27);
        assert!((c3.omega0 - 3.0).abs() < 1e-15);
    }
}
