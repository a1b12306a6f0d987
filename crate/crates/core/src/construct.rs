//! Upper-bound constructions: Z_pq expressions, their compilation to depth-2
//! open circuits, the `t_{q^ν}` building block, the fully symmetric depth-2
//! AND_n circuit, and the nested block-symmetric depth-2h circuit.
//!
//! `t_{q^ν}` is synthesized by exact linear algebra over F_q. For a Boolean
//! input with `z` zero entries, the quantity
//!
//! ```text
//!   M_{w,σ}(z) = #{ T ⊆ [n] : |T| = w, (zeros of x̄ inside T) ≡ σ (mod p) }
//! ```
//!
//! is realizable by one `b(linear form mod p)` term per `w`-subset plus a
//! constant, with a coefficient scheme constant on Sym_n-orbits. The solver
//! finds `λ` with `Σ λ_{w,σ}·M_{w,σ}(z) + λ_0 ≡ [q^ν ∤ z] (mod q)` for every
//! `z ∈ [0, n]` and verifies the identity exactly, which certifies the built
//! expression on all `2^n` inputs. Weight-`n/2` subsets are avoided whenever
//! a solution without them exists, so the compiled gates keep uniquely
//! defined supports.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, CircuitBuilder, GateId, OpenCircuit, OutputWire};
use crate::error::{Error, Result};
use crate::groups::BlockTree;
use crate::numtheory::{binomial, binomial_mod, checked_pow, factorize, is_prime};

/// Cap on materialized gates for the explicit builders.
pub const BUILD_GATE_CAP: u64 = 2_000_000;

/// One term `α · b(Σ β_i x_i + c mod p)` of a Z_pq expression.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZpqTerm {
    pub alpha: u64,
    pub beta: Vec<u64>,
    pub c: u64,
}

/// A Z_q-linear combination of `b(linear form mod p)` terms, where `b` maps
/// 0 to 0 and every nonzero residue to 1.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZpqExpression {
    pub p: u64,
    pub q: u64,
    pub arity: usize,
    pub terms: Vec<ZpqTerm>,
}

impl ZpqExpression {
    pub fn validate(&self) -> Result<()> {
        if !is_prime(self.p) || !is_prime(self.q) || self.p == self.q {
            return Err(Error::InvalidArgument(format!(
                "p={} and q={} must be distinct primes",
                self.p, self.q
            )));
        }
        for t in &self.terms {
            if t.alpha == 0 || t.alpha >= self.q {
                return Err(Error::InvalidArgument(format!(
                    "coefficient {} outside Z_{} \\ {{0}}",
                    t.alpha, self.q
                )));
            }
            if t.beta.len() != self.arity {
                return Err(Error::InvalidArgument("beta length != arity".into()));
            }
            if t.beta.iter().any(|&b| b >= self.p) || t.c >= self.p {
                return Err(Error::InvalidArgument("beta/c outside Z_p".into()));
            }
        }
        Ok(())
    }

    /// Whether the coefficients are constant on Sym_n-orbits of `(β, c)`:
    /// terms sharing an entry multiset of β and the same c carry one α, and
    /// the whole orbit is present whenever one member is.
    pub fn has_symmetric_scheme(&self) -> bool {
        // (entry multiset of β, c) → (α, members seen)
        type OrbitKey = (Vec<(u64, usize)>, u64);
        let mut groups: HashMap<OrbitKey, (u64, u64)> = HashMap::new();
        for t in &self.terms {
            let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
            for &b in &t.beta {
                *counts.entry(b).or_default() += 1;
            }
            let key = (counts.into_iter().collect::<Vec<_>>(), t.c);
            let entry = groups.entry(key).or_insert((t.alpha, 0));
            if entry.0 != t.alpha {
                return false;
            }
            entry.1 += 1;
        }
        for ((counts, _), (_, seen)) in &groups {
            let mut orbit = BigUint::from(1u32);
            let mut rest = self.arity as u64;
            for &(_, mult) in counts {
                orbit *= binomial(rest, mult as u64);
                rest -= mult as u64;
            }
            if orbit != BigUint::from(*seen) {
                return false;
            }
        }
        true
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("expression serialization")
    }

    pub fn from_json(s: &str) -> Result<ZpqExpression> {
        serde_json::from_str(s).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// `Σ α · b((Σ β_i a_i + c) mod p) mod q` with `b(0)=0`, `b(≠0)=1`.
pub fn eval_zpq(e: &ZpqExpression, a: &crate::circuit::Assignment) -> Result<u64> {
    if a.len() != e.arity {
        return Err(Error::InvalidAssignment {
            expected: e.arity,
            got: a.len(),
        });
    }
    let mut total = 0u64;
    for t in &e.terms {
        let mut inner = t.c % e.p;
        for (i, &b) in t.beta.iter().enumerate() {
            if a.get(i + 1) {
                inner = (inner + b) % e.p;
            }
        }
        if inner != 0 {
            total = (total + t.alpha) % e.q;
        }
    }
    Ok(total)
}

/// Accepting set realizing `b(ρ + c)` on a gate whose incoming sum is
/// `(m/p)·ρ mod m`: accept `(m/p)·t` for every `t ≠ −c (mod p)`.
fn b_gate_accept(m: u64, p: u64, c: u64) -> BTreeSet<u64> {
    let scale = m / p;
    let reject = (p - c % p) % p;
    (0..p)
        .filter(|&t| t != reject)
        .map(|t| (scale * t) % m)
        .collect()
}

/// Compiles a Z_pq expression into a depth-2 MOD_m circuit of output type q:
/// one gate per distinct `(β, c)` with nonzero aggregate coefficient, input
/// wires of multiplicity `(m/p)·β_i mod m`, and output wires carrying the
/// aggregate coefficients.
pub fn compile_zpq(e: &ZpqExpression, m: u64) -> Result<OpenCircuit> {
    e.validate()?;
    if !m.is_multiple_of(e.p) || !m.is_multiple_of(e.q) {
        return Err(Error::IncompatibleModulus { m, p: e.p, q: e.q });
    }
    let mut agg: BTreeMap<(Vec<u64>, u64), u64> = BTreeMap::new();
    for t in &e.terms {
        let entry = agg.entry((t.beta.clone(), t.c)).or_insert(0);
        *entry = (*entry + t.alpha) % e.q;
    }
    let mut b = CircuitBuilder::new(m, e.arity);
    let scale = m / e.p;
    let mut outputs = Vec::new();
    for ((beta, c), alpha) in agg {
        if alpha == 0 {
            continue;
        }
        let gate = b.add_mod(b_gate_accept(m, e.p, c));
        for (i, &bi) in beta.iter().enumerate() {
            let mult = (scale * bi) % m;
            if mult != 0 {
                b.wire(b.input(i + 1), gate, mult);
            }
        }
        outputs.push(OutputWire { gate, mult: alpha });
    }
    let oc = OpenCircuit {
        body: b.finish()?,
        outputs,
        output_modulus: e.q,
    };
    oc.validate()?;
    Ok(oc)
}

// ---------------------------------------------------------------------------
// t_{q^ν} synthesis

/// Solution of the F_q system: `t(z) = λ_0 + Σ λ_{w,σ}·M_{w,σ}(z)` for every
/// `z ∈ [0, n]`, where `t(z) = 0` iff `q^ν | z`, and `t(z) = 1` off the zero
/// set in strict mode.
#[derive(Clone, Debug)]
struct TqSolution {
    p: u64,
    q: u64,
    n: usize,
    lam_const: u64,
    /// `(w, σ, λ)` with `λ ≠ 0`
    groups: Vec<(usize, u64, u64)>,
    strict: bool,
    used_half_weight: bool,
}

/// Build metadata recorded alongside a `t_{q^ν}` expression.
#[derive(Clone, Debug, Serialize)]
pub struct TqInfo {
    pub p: u64,
    pub q: u64,
    pub nu: u32,
    pub arity: usize,
    /// Exact {0,1}-valued contract (as opposed to the relaxed ≡0/≢0 one).
    pub strict: bool,
    pub term_count: usize,
    pub max_weight: usize,
    /// Weight-n/2 subsets had to be used; the compiled gates then have no
    /// uniquely defined support.
    pub used_half_weight: bool,
}

fn mod_inv(a: u64, q: u64) -> u64 {
    // q prime, a ≠ 0 mod q
    let mut result = 1u64;
    let mut base = a % q;
    let mut exp = q - 2;
    while exp > 0 {
        if exp & 1 == 1 {
            result = result * base % q;
        }
        base = base * base % q;
        exp >>= 1;
    }
    result
}

/// Solve `columns · x = target` over F_q; free variables get 0.
#[allow(clippy::needless_range_loop)] // row/column index arithmetic
fn solve_linear_mod_q(columns: &[Vec<u64>], target: &[u64], q: u64) -> Option<Vec<u64>> {
    let rows = target.len();
    let cols = columns.len();
    let mut a: Vec<Vec<u64>> = (0..rows)
        .map(|r| {
            let mut row: Vec<u64> = columns.iter().map(|col| col[r] % q).collect();
            row.push(target[r] % q);
            row
        })
        .collect();
    let mut pivot_of_col: Vec<Option<usize>> = vec![None; cols];
    let mut rank = 0usize;
    for col in 0..cols {
        let Some(pr) = (rank..rows).find(|&r| a[r][col] != 0) else {
            continue;
        };
        a.swap(rank, pr);
        let inv = mod_inv(a[rank][col], q);
        for v in a[rank].iter_mut() {
            *v = *v * inv % q;
        }
        for r in 0..rows {
            if r != rank && a[r][col] != 0 {
                let f = a[r][col];
                for k in col..=cols {
                    let sub = f * a[rank][k] % q;
                    a[r][k] = (a[r][k] + q - sub) % q;
                }
            }
        }
        pivot_of_col[col] = Some(rank);
        rank += 1;
        if rank == rows {
            break;
        }
    }
    for r in rank..rows {
        if a[r][cols] != 0 {
            return None;
        }
    }
    let mut x = vec![0u64; cols];
    for (col, pr) in pivot_of_col.iter().enumerate() {
        if let Some(r) = pr {
            x[col] = a[*r][cols];
        }
    }
    Some(x)
}

/// `M_{w,σ}` evaluated at every `z ∈ [0, n]`, mod q.
fn subset_count_column(
    n: usize,
    p: u64,
    q: u64,
    w: usize,
    sigma: u64,
    binom: &[Vec<u64>],
) -> Vec<u64> {
    (0..=n)
        .map(|z| {
            let mut acc = 0u64;
            for u in 0..=w.min(z) {
                if (u as u64) % p != sigma || w - u > n - z {
                    continue;
                }
                acc = (acc + binom[z][u] * binom[n - z][w - u]) % q;
            }
            acc
        })
        .collect()
}

fn solve_tq(p: u64, q: u64, nu: u32, n: usize) -> Result<TqSolution> {
    if !is_prime(p) || !is_prime(q) || p == q {
        return Err(Error::InvalidArgument(format!(
            "p={p} and q={q} must be distinct primes"
        )));
    }
    if nu == 0 {
        return Err(Error::InvalidArgument("nu must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("arity must be positive".into()));
    }
    // target: t(z) = 0 iff q^ν | z, for z ∈ [0, n]
    let qnu = checked_pow(q, nu);
    let target: Vec<u64> = (0..=n as u64)
        .map(|z| match qnu {
            Some(v) => u64::from(z % v != 0),
            None => u64::from(z != 0), // q^ν exceeds u64; only z = 0 is divisible
        })
        .collect();
    let w_cap = match qnu {
        Some(v) if (v as usize).saturating_sub(1) <= n => v as usize - 1,
        _ => n,
    };

    // binom[a][b] mod q for a, b ≤ n
    let binom = {
        let mut t = vec![vec![0u64; n + 1]; n + 1];
        for a in 0..=n {
            t[a][0] = 1 % q;
            for b in 1..=a {
                t[a][b] = (t[a - 1][b - 1] + t[a - 1][b]) % q;
            }
        }
        t
    };

    let make_columns = |weights: &[usize]| -> (Vec<Vec<u64>>, Vec<(usize, u64)>) {
        let mut cols: Vec<Vec<u64>> = vec![vec![1 % q; n + 1]];
        let mut labels: Vec<(usize, u64)> = vec![(0, 0)]; // constant column
        for &w in weights {
            for sigma in 0..p {
                cols.push(subset_count_column(n, p, q, w, sigma, &binom));
                labels.push((w, sigma));
            }
        }
        (cols, labels)
    };
    // solver output: (λ_0, nonzero (w, σ, λ) groups)
    type Solved = (u64, Vec<(usize, u64, u64)>);
    let to_groups = |labels: &[(usize, u64)], x: &[u64]| -> Vec<(usize, u64, u64)> {
        labels
            .iter()
            .zip(x.iter())
            .skip(1)
            .filter(|&(_, &lam)| lam != 0)
            .map(|(&(w, sigma), &lam)| (w, sigma, lam))
            .collect()
    };
    let attempt = |weights: &[usize]| -> Option<Solved> {
        let (cols, labels) = make_columns(weights);
        let x = solve_linear_mod_q(&cols, &target, q)?;
        Some((x[0], to_groups(&labels, &x)))
    };

    // prefer solutions without weight-n/2 subsets, widening the pool if needed
    let preferred: Vec<usize> = (1..=w_cap).filter(|&w| 2 * w != n).collect();
    if let Some((lam_const, groups)) = attempt(&preferred) {
        return Ok(TqSolution {
            p,
            q,
            n,
            lam_const,
            groups,
            strict: true,
            used_half_weight: false,
        });
    }
    let widened: Vec<usize> = (1..=n).filter(|&w| 2 * w != n).collect();
    if widened.len() > preferred.len() {
        if let Some((lam_const, groups)) = attempt(&widened) {
            return Ok(TqSolution {
                p,
                q,
                n,
                lam_const,
                groups,
                strict: true,
                used_half_weight: false,
            });
        }
    }
    // The strict target needs weight-n/2 subsets. The relaxed contract (zero
    // exactly on the divisible zero counts, any nonzero residue elsewhere) is
    // a disjunctive condition, so search the reachable column space for a
    // vector with the right zero pattern.
    if q > 2 {
        let (cols, labels) = make_columns(&widened);
        if let Some(x) = search_zero_pattern(&cols, &target, q) {
            return Ok(TqSolution {
                p,
                q,
                n,
                lam_const: x[0],
                groups: to_groups(&labels, &x),
                strict: false,
                used_half_weight: false,
            });
        }
    }
    let full: Vec<usize> = (1..=n).collect();
    let (lam_const, groups) =
        attempt(&full).expect("the full subset-count basis spans every function of the zero count");
    Ok(TqSolution {
        p,
        q,
        n,
        lam_const,
        groups,
        strict: true,
        used_half_weight: true,
    })
}

/// Cap on the column-space enumeration for the relaxed zero-pattern search.
const ZERO_PATTERN_ENUM_CAP: u64 = 2_000_000;

/// Looks for coefficients `x` with `(cols·x)[z] = 0` exactly where
/// `pattern[z] = 0`. Enumerates the column space over the pivot coordinates
/// in lexicographic order, so the result is deterministic.
fn search_zero_pattern(cols: &[Vec<u64>], pattern: &[u64], q: u64) -> Option<Vec<u64>> {
    let rows = pattern.len();
    // independent (pivot) columns via elimination on a working copy
    let mut work: Vec<Vec<u64>> = cols.to_vec();
    let mut pivots: Vec<usize> = Vec::new();
    let mut eliminated: Vec<(usize, Vec<u64>)> = Vec::new(); // (row, reduced col)
    for (ci, col) in work.iter_mut().enumerate() {
        for &(r, ref basis) in &eliminated {
            let f = col[r] % q;
            if f != 0 {
                for z in 0..rows {
                    col[z] = (col[z] + (q - f) * basis[z]) % q;
                }
            }
        }
        if let Some(r) = (0..rows).find(|&z| col[z] % q != 0) {
            let inv = mod_inv(col[r] % q, q);
            let basis: Vec<u64> = col.iter().map(|&v| v % q * inv % q).collect();
            eliminated.push((r, basis));
            pivots.push(ci);
        }
    }
    let d = pivots.len();
    let total = (q as u128).checked_pow(d as u32)?;
    if total > ZERO_PATTERN_ENUM_CAP as u128 {
        return None;
    }
    let mut digits = vec![0u64; d];
    let mut y = vec![0u64; rows];
    'outer: for _ in 0..total {
        if (0..rows).all(|z| (y[z] == 0) == (pattern[z] == 0)) {
            let mut x = vec![0u64; cols.len()];
            for (k, &ci) in pivots.iter().enumerate() {
                x[ci] = digits[k];
            }
            return Some(x);
        }
        // increment the digit vector, updating y incrementally
        for k in 0..d {
            let col = &cols[pivots[k]];
            digits[k] += 1;
            for z in 0..rows {
                y[z] = (y[z] + col[z]) % q;
            }
            if digits[k] < q {
                continue 'outer;
            }
            digits[k] = 0;
        }
        break;
    }
    None
}

impl TqSolution {
    /// Per-gate-shape list `(w, c, α)` in Z_q: the b-term coefficients, with
    /// the aggregated constant attached as a `(0, 1, K)` entry (`b(1) = 1`).
    fn gate_coefficients(&self) -> Vec<(usize, u64, u64)> {
        let mut out = Vec::new();
        let mut konst = self.lam_const;
        for &(w, sigma, lam) in &self.groups {
            // λ·M_{w,σ} = λ·binom(n,w) − λ·Σ_T b(z_T − σ)
            konst = (konst + lam * binomial_mod(self.n as u64, w as u64, self.q)) % self.q;
            let c = ((w as u64) % self.p + self.p - sigma) % self.p;
            out.push((w, c, self.q - lam));
        }
        if konst != 0 {
            out.push((0, 1, konst));
        }
        out
    }

    fn term_count(&self) -> BigUint {
        let mut total = BigUint::from(0u32);
        for (w, _, _) in self.gate_coefficients() {
            total += binomial(self.n as u64, w as u64);
        }
        total
    }

    fn max_weight(&self) -> usize {
        self.groups.iter().map(|&(w, _, _)| w).max().unwrap_or(0)
    }

    /// Expands into an explicit expression (one term per subset).
    fn expand(&self) -> Result<ZpqExpression> {
        let count = self.term_count();
        if count > BigUint::from(BUILD_GATE_CAP) {
            return Err(Error::TooLarge(format!(
                "expression with {count} terms exceeds the materialization cap"
            )));
        }
        let mut terms = Vec::new();
        for (w, c, alpha) in self.gate_coefficients() {
            for subset in subsets(self.n, w) {
                let mut beta = vec![0u64; self.n];
                for &i in &subset {
                    beta[i] = self.p - 1;
                }
                terms.push(ZpqTerm { alpha, beta, c });
            }
        }
        Ok(ZpqExpression {
            p: self.p,
            q: self.q,
            arity: self.n,
            terms,
        })
    }
}

/// Lexicographic `w`-subsets of `{0, …, n-1}`.
fn subsets(n: usize, w: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if w > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..w).collect();
    loop {
        out.push(idx.clone());
        if w == 0 {
            return out;
        }
        let mut i = w;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - w {
                idx[i] += 1;
                for j in i + 1..w {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `t_{q^ν}` as a Z_pq expression: evaluates to 0 iff `q^ν` divides the
/// number of 0-entries of the input, and to 1 otherwise. The coefficient
/// scheme is symmetric; correctness is certified exactly during the solve
/// and, for `n ≤ 10`, cross-checked against an exhaustive input sweep.
pub fn build_tq(p: u64, q: u64, nu: u32, n: usize) -> Result<ZpqExpression> {
    build_tq_with_info(p, q, nu, n).map(|(e, _)| e)
}

pub fn build_tq_with_info(p: u64, q: u64, nu: u32, n: usize) -> Result<(ZpqExpression, TqInfo)> {
    let sol = solve_tq(p, q, nu, n)?;
    let expr = sol.expand()?;
    let info = TqInfo {
        p,
        q,
        nu,
        arity: n,
        strict: sol.strict,
        term_count: expr.terms.len(),
        max_weight: sol.max_weight(),
        used_half_weight: sol.used_half_weight,
    };
    if n <= 10 {
        let qnu = checked_pow(q, nu);
        for idx in 0..(1u64 << n) {
            let a = crate::circuit::Assignment::from_index(n, idx);
            let zeros = (n - a.weight()) as u64;
            let divisible = match qnu {
                Some(v) => zeros.is_multiple_of(v),
                None => zeros == 0,
            };
            let got = eval_zpq(&expr, &a)?;
            assert_eq!(got == 0, divisible, "t oracle mismatch at input {idx}");
            if sol.strict {
                assert!(got <= 1, "strict t produced {got} at input {idx}");
            }
        }
    }
    Ok((expr, info))
}

// ---------------------------------------------------------------------------
// depth-2 AND construction

/// The unique ν with `p^{r(ν−1)} ≤ n < p^{rν}`, i.e. `p^{ν−1} ≤ n^{1/r} < p^ν`,
/// decided by exact integer comparisons.
pub fn select_nu(p: u64, r: u32, n: usize) -> u32 {
    let n = n as u128;
    let p = p as u128;
    let mut nu = 1u32;
    loop {
        let bound = p.checked_pow(r * nu).expect("nu selection overflow");
        if n < bound {
            return nu;
        }
        nu += 1;
    }
}

/// One merged gate shape of the depth-2 plan: all `w`-subsets with inner
/// prime `p` and shift `c`, wired into the root with multiplicity `root_mult`.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GateGroup {
    p: u64,
    w: usize,
    c: u64,
    root_mult: u64,
}

/// Fully resolved construction plan for `AND_n` at modulus `m`: enough to
/// materialize the circuit, or to compute its exact size without
/// materializing anything.
#[derive(Clone, Debug)]
pub struct Depth2Plan {
    m: u64,
    n: usize,
    nus: Vec<(u64, u32)>,
    aux_primes: Vec<(u64, u64)>,
    /// `(prime, strict)`: whether each t block kept the exact {0,1} contract.
    tq_strict: Vec<(u64, bool)>,
    groups: Vec<GateGroup>,
    used_half_weight: bool,
}

/// Summary facts about a depth-2 build.
#[derive(Clone, Debug, Serialize)]
pub struct Depth2Info {
    pub m: u64,
    pub n: usize,
    /// `(prime, ν)` per prime divisor of m.
    pub nus: Vec<(u64, u32)>,
    /// `(prime, auxiliary inner prime)` per prime divisor of m.
    pub aux_primes: Vec<(u64, u64)>,
    /// `(prime, strict)`: contract mode of each t block.
    pub tq_strict: Vec<(u64, bool)>,
    pub used_half_weight: bool,
}

pub fn depth2_plan(m: u64, n: usize) -> Result<Depth2Plan> {
    let fact = factorize(m)?;
    let r = fact.num_distinct_primes() as u32;
    if r < 2 {
        return Err(Error::UnsupportedModulus(m));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("arity must be positive".into()));
    }
    let primes: Vec<u64> = fact.distinct_primes().collect();
    let mut nus = Vec::new();
    let mut aux_primes = Vec::new();
    let mut tq_strict = Vec::new();
    let mut merged: BTreeMap<(u64, usize, u64), u64> = BTreeMap::new();
    let mut used_half_weight = false;
    let mut nu_product = BigUint::from(1u32);
    for &qj in &primes {
        let nu = select_nu(qj, r, n);
        nus.push((qj, nu));
        nu_product *= BigUint::from(qj).pow(nu);
        let p_aux = *primes.iter().find(|&&p| p != qj).expect("r >= 2");
        aux_primes.push((qj, p_aux));
        let sol = solve_tq(p_aux, qj, nu, n)?;
        tq_strict.push((qj, sol.strict));
        used_half_weight |= sol.used_half_weight;
        // (m/q_j)·q_j ≡ 0 (mod m) makes folding the Z_{q_j} value sound
        let scale = m / qj;
        for (w, c, alpha) in sol.gate_coefficients() {
            let entry = merged.entry((p_aux, w, c)).or_insert(0);
            *entry = (*entry + scale % m * (alpha % m)) % m;
        }
    }
    // the divisibility argument needs ∏ p_j^{ν_j} > n
    assert!(nu_product > BigUint::from(n), "nu selection must exceed n");
    let groups = merged
        .into_iter()
        .filter(|&(_, root_mult)| root_mult != 0)
        .map(|((p, w, c), root_mult)| GateGroup { p, w, c, root_mult })
        .collect();
    Ok(Depth2Plan {
        m,
        n,
        nus,
        aux_primes,
        tq_strict,
        groups,
        used_half_weight,
    })
}

impl Depth2Plan {
    pub fn info(&self) -> Depth2Info {
        Depth2Info {
            m: self.m,
            n: self.n,
            nus: self.nus.clone(),
            aux_primes: self.aux_primes.clone(),
            tq_strict: self.tq_strict.clone(),
            used_half_weight: self.used_half_weight,
        }
    }

    /// Number of modular gates below the root.
    pub fn b_gate_count(&self) -> BigUint {
        let mut total = BigUint::from(0u32);
        for g in &self.groups {
            total += binomial(self.n as u64, g.w as u64);
        }
        total
    }

    /// Exact size (gates + wires with multiplicities) of the circuit this
    /// plan materializes over fresh inputs.
    pub fn exact_size(&self) -> BigUint {
        let mut size = BigUint::from(self.n as u64 + 1); // inputs + root
        for g in &self.groups {
            let count = binomial(self.n as u64, g.w as u64);
            let input_mult = (self.m / g.p) * (g.p - 1) % self.m;
            let per_gate = 1 + g.w as u64 * input_mult + g.root_mult;
            size += count * BigUint::from(per_gate);
        }
        size
    }

    /// Appends the plan's gates on top of `inputs` (existing gates serving as
    /// the AND arguments) and returns the fresh root gate accepting `{0}`.
    /// Constant gates are shared across instantiations through
    /// `shared_consts`.
    fn materialize_onto(
        &self,
        b: &mut CircuitBuilder,
        inputs: &[GateId],
        shared_consts: &mut HashMap<(u64, u64), GateId>,
    ) -> GateId {
        assert_eq!(inputs.len(), self.n);
        let root = b.add_mod([0].into());
        for g in &self.groups {
            let input_mult = (self.m / g.p) * (g.p - 1) % self.m;
            if g.w == 0 {
                let gate = *shared_consts
                    .entry((g.p, g.c))
                    .or_insert_with(|| b.add_mod(b_gate_accept(self.m, g.p, g.c)));
                b.wire(gate, root, g.root_mult);
                continue;
            }
            for subset in subsets(self.n, g.w) {
                let gate = b.add_mod(b_gate_accept(self.m, g.p, g.c));
                for &i in &subset {
                    b.wire(inputs[i], gate, input_mult);
                }
                b.wire(gate, root, g.root_mult);
            }
        }
        root
    }
}

/// The fully symmetric depth-2 `AND_n` circuit over `MOD_m` gates, for any
/// `m` with at least two distinct prime factors: one `t_{p_j^{ν_j}}` block
/// per prime divisor, folded into a single root gate accepting `{0}`.
pub fn build_and_depth2(m: u64, n: usize) -> Result<Circuit> {
    build_and_depth2_with_info(m, n).map(|(c, _)| c)
}

pub fn build_and_depth2_with_info(m: u64, n: usize) -> Result<(Circuit, Depth2Info)> {
    let plan = depth2_plan(m, n)?;
    let gate_estimate = plan.b_gate_count() + BigUint::from(n as u64 + 1);
    if gate_estimate > BigUint::from(BUILD_GATE_CAP) {
        return Err(Error::TooLarge(format!(
            "materializing {gate_estimate} gates exceeds the cap; use the size calculator"
        )));
    }
    let mut b = CircuitBuilder::new(m, n);
    let inputs: Vec<GateId> = (1..=n).map(|v| b.input(v)).collect();
    let mut shared = HashMap::new();
    let root = plan.materialize_onto(&mut b, &inputs, &mut shared);
    b.set_root(root);
    let c = b.finish()?;
    Ok((c, plan.info()))
}

/// Exact size of `build_and_depth2(m, n)` computed from the plan alone;
/// usable far beyond the materialization cap.
pub fn and_depth2_size(m: u64, n: usize) -> Result<(BigUint, Depth2Info)> {
    let plan = depth2_plan(m, n)?;
    Ok((plan.exact_size(), plan.info()))
}

/// The nested block-symmetric circuit: one depth-2 AND block per sibling
/// block of the tree, composed level by level. Computes `AND_n`, has depth
/// `2h`, and is symmetric under the tree automorphism group.
pub fn build_and_nested(m: u64, t: &BlockTree) -> Result<Circuit> {
    let n = t.leaf_count();
    let mut plans = Vec::new();
    let mut gate_estimate = BigUint::from(n as u64);
    for level in 1..=t.height() {
        let k = t.branching()[level - 1];
        let plan = depth2_plan(m, k)?;
        let instances = t.level_nodes(level).count() as u64;
        gate_estimate += (plan.b_gate_count() + BigUint::from(1u32)) * BigUint::from(instances);
        plans.push(plan);
    }
    if gate_estimate > BigUint::from(BUILD_GATE_CAP) {
        return Err(Error::TooLarge(format!(
            "materializing {gate_estimate} gates exceeds the cap"
        )));
    }
    let mut b = CircuitBuilder::new(m, n);
    let mut shared = HashMap::new();
    // outputs[v] = gate computing the AND of all leaves under node v
    let mut outputs: HashMap<crate::groups::NodeId, GateId> =
        t.level_nodes(0).map(|v| (v, b.input(v.0 + 1))).collect();
    for level in 1..=t.height() {
        let plan = &plans[level - 1];
        for v in t.level_nodes(level) {
            let child_outputs: Vec<GateId> = t.children(v).iter().map(|c| outputs[c]).collect();
            let root_v = plan.materialize_onto(&mut b, &child_outputs, &mut shared);
            outputs.insert(v, root_v);
        }
    }
    b.set_root(outputs[&t.root()]);
    b.finish()
}
