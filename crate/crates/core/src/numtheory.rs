//! Exact integer and modular arithmetic: factorizations, integer roots,
//! binomial coefficients and the minimal period of `n ↦ binom(n,x) mod m`.
//!
//! Everything here is computed with exact integer comparisons; no floating
//! point is used anywhere (root and log boundaries are equality-sensitive
//! downstream).

use num_bigint::BigUint;

use crate::error::{Error, Result};

/// Prime factorization of a modulus `m ≥ 2`, primes sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    modulus: u64,
    primes: Vec<(u64, u32)>,
}

impl Factorization {
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `(p_i, e_i)` pairs with distinct ascending primes.
    pub fn primes(&self) -> &[(u64, u32)] {
        &self.primes
    }

    /// Number of distinct prime divisors (`r` in the bound formulas).
    pub fn num_distinct_primes(&self) -> usize {
        self.primes.len()
    }

    pub fn distinct_primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.primes.iter().map(|&(p, _)| p)
    }
}

/// Factorize `m ≥ 2` by trial division.
pub fn factorize(m: u64) -> Result<Factorization> {
    if m < 2 {
        return Err(Error::InvalidModulus(m));
    }
    let mut primes = Vec::new();
    let mut rest = m;
    let mut p = 2u64;
    while p * p <= rest {
        if rest.is_multiple_of(p) {
            let mut e = 0u32;
            while rest.is_multiple_of(p) {
                rest /= p;
                e += 1;
            }
            primes.push((p, e));
        }
        p += 1;
    }
    if rest > 1 {
        primes.push((rest, 1));
    }
    Ok(Factorization { modulus: m, primes })
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// `base^exp` if it fits in `u64`.
pub fn checked_pow(base: u64, exp: u32) -> Option<u64> {
    base.checked_pow(exp)
}

/// `⌊n^{1/r}⌋` for `r ≥ 1`, by binary search on `k^r ≤ n`.
pub fn integer_root(n: u64, r: u32) -> u64 {
    assert!(r >= 1, "root index must be positive");
    if r == 1 || n <= 1 {
        return n;
    }
    let mut lo = 0u64;
    let mut hi = n.min(1 << (64 / r).min(63)) + 1;
    // invariant: lo^r ≤ n < hi^r
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        match checked_pow(mid, r) {
            Some(v) if v <= n => lo = mid,
            _ => hi = mid,
        }
    }
    lo
}

/// Largest `e ≥ 0` with `base^e ≤ x`; exact integer form of `⌊log_base(x)⌋`.
///
/// Requires `base ≥ 2` and `x ≥ 1`.
pub fn floor_log(base: u64, x: u64) -> u32 {
    assert!(base >= 2 && x >= 1);
    let mut e = 0u32;
    let mut acc = 1u64;
    while acc <= x / base {
        acc *= base;
        e += 1;
    }
    e
}

/// Exact `binom(n, k)` as a big integer.
pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut res = BigUint::from(1u32);
    for i in 0..k {
        res = res * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    res
}

/// `binom(n, k) mod m` via a Pascal-row recurrence carried out mod `m`.
///
/// Additions only, so reducing mod `m` at every step is exact.
pub fn binomial_mod(n: u64, k: u64, m: u64) -> u64 {
    assert!(m >= 2);
    if k > n {
        return 0;
    }
    let k = k as usize;
    let mut row = vec![0u64; k + 1];
    row[0] = 1 % m;
    for _ in 0..n {
        for j in (1..=k).rev() {
            row[j] = (row[j] + row[j - 1]) % m;
        }
    }
    row[k]
}

/// Minimal period `ℓ(m,x) = m · ∏ p_i^{⌊log_{p_i}(x)⌋}` of `n ↦ binom(n,x) mod m`.
pub fn binomial_period_formula(m: u64, x: u64) -> Result<u64> {
    if x == 0 {
        // binom(n,0) is constant; the log in the formula is undefined.
        return Err(Error::InvalidArgument(
            "binomial period formula requires x >= 1".into(),
        ));
    }
    let fact = factorize(m)?;
    let mut period = m;
    for p in fact.distinct_primes() {
        period *= checked_pow(p, floor_log(p, x)).expect("period overflow");
    }
    Ok(period)
}

/// Brute-force minimal period of `n ↦ binom(n,x) mod m` on `[0, horizon]`.
///
/// Returns the smallest `ℓ ≥ 1` such that `binom(n,x) ≡ binom(n+ℓ,x) (mod m)`
/// for all `n ∈ [0, horizon−ℓ]`, or `None` if no `ℓ ≤ horizon/2` works. This
/// is the independent oracle for [`binomial_period_formula`] and deliberately
/// shares no code with it.
pub fn binomial_period_bruteforce(m: u64, x: u64, horizon: u64) -> Option<u64> {
    assert!(m >= 2 && horizon >= 1);
    let len = horizon as usize + 1;
    // Sliding Pascal rows give binom(n, x) mod m for n = 0..=horizon.
    let table: Vec<u64> = {
        let k = x as usize;
        let mut row = vec![0u64; k + 1];
        row[0] = 1 % m;
        let mut out = Vec::with_capacity(len);
        out.push(*row.last().unwrap());
        for _ in 0..horizon {
            for j in (1..=k).rev() {
                row[j] = (row[j] + row[j - 1]) % m;
            }
            out.push(*row.last().unwrap());
        }
        out
    };
    for ell in 1..=(horizon / 2) as usize {
        if (0..len - ell).all(|n| table[n] == table[n + ell]) {
            return Some(ell as u64);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorize_examples() {
        assert_eq!(factorize(6).unwrap().primes(), &[(2, 1), (3, 1)]);
        assert_eq!(factorize(12).unwrap().primes(), &[(2, 2), (3, 1)]);
        assert_eq!(factorize(7).unwrap().primes(), &[(7, 1)]);
        assert!(matches!(factorize(1), Err(Error::InvalidModulus(1))));
    }

    #[test]
    fn factorize_reconstructs_modulus() {
        for m in 2..500u64 {
            let f = factorize(m).unwrap();
            let prod: u64 = f
                .primes()
                .iter()
                .map(|&(p, e)| checked_pow(p, e).unwrap())
                .product();
            assert_eq!(prod, m);
            for &(p, _) in f.primes() {
                assert!(is_prime(p));
            }
        }
    }

    #[test]
    fn integer_root_examples() {
        assert_eq!(integer_root(8, 2), 2);
        assert_eq!(integer_root(9, 2), 3);
        assert_eq!(integer_root(24, 2), 4);
    }

    #[test]
    fn integer_root_brackets() {
        for n in 0..2000u64 {
            for r in 1..5u32 {
                let k = integer_root(n, r);
                assert!(checked_pow(k, r).unwrap() <= n);
                assert!(checked_pow(k + 1, r).is_none_or(|v| v > n));
            }
        }
    }

    #[test]
    fn floor_log_exact() {
        assert_eq!(floor_log(2, 1), 0);
        assert_eq!(floor_log(2, 2), 1);
        assert_eq!(floor_log(2, 3), 1);
        assert_eq!(floor_log(2, 4), 2);
        assert_eq!(floor_log(3, 8), 1);
        assert_eq!(floor_log(3, 9), 2);
    }

    #[test]
    fn binomial_mod_examples() {
        assert_eq!(binomial_mod(4, 2, 6), 0);
        assert_eq!(binomial_mod(5, 2, 6), 4);
        assert_eq!(binomial_mod(3, 5, 6), 0);
    }

    #[test]
    fn binomial_mod_matches_big_integer() {
        for n in 0..=60u64 {
            for k in 0..=n {
                for m in [2u64, 6, 10, 12, 15] {
                    let exact = binomial(n, k) % BigUint::from(m);
                    let got = binomial_mod(n, k, m);
                    assert_eq!(BigUint::from(got), exact, "n={n} k={k} m={m}");
                }
            }
        }
    }

    #[test]
    fn period_formula_examples() {
        assert_eq!(binomial_period_formula(6, 1).unwrap(), 6);
        assert_eq!(binomial_period_formula(6, 2).unwrap(), 12);
        assert_eq!(binomial_period_formula(6, 3).unwrap(), 36);
        assert!(binomial_period_formula(6, 0).is_err());
    }

    #[test]
    fn period_bruteforce_examples() {
        assert_eq!(binomial_period_bruteforce(6, 2, 60), Some(12));
        assert_eq!(binomial_period_bruteforce(12, 4, 600), Some(144));
        assert_eq!(binomial_period_bruteforce(6, 1, 30), Some(6));
    }

    #[test]
    fn period_formula_matches_bruteforce() {
        for m in [6u64, 10, 12, 15] {
            for x in 1..=6u64 {
                let formula = binomial_period_formula(m, x).unwrap();
                let oracle = binomial_period_bruteforce(m, x, 4 * formula);
                assert_eq!(oracle, Some(formula), "m={m} x={x}");
            }
        }
    }
}
