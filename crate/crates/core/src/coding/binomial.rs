//! Exact binomial coefficients.
//!
//! Small arguments come from a Pascal table of `u128`. Large ones are built from
//! their prime factorisation (Legendre's formula) followed by a balanced
//! product tree, which keeps the cost close to a handful of big multiplications.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_bigint::BigUint;
use num_traits::{One, Zero};

/// Largest `n` whose full row of binomials fits in a `u128`.
pub const SMALL_N: usize = 128;

/// Binomials with `n` up to this bound are memoised process-wide.
const CACHE_N: u64 = 2048;

fn pascal() -> &'static [[u128; SMALL_N + 1]; SMALL_N + 1] {
    static TABLE: OnceLock<Box<[[u128; SMALL_N + 1]; SMALL_N + 1]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Box::new([[0u128; SMALL_N + 1]; SMALL_N + 1]);
        for n in 0..=SMALL_N {
            t[n][0] = 1;
            for k in 1..=n {
                t[n][k] = t[n - 1][k - 1] + if k < n { t[n - 1][k] } else { 0 };
            }
        }
        t
    })
}

/// `C(n, k)` for `n <= 128`. Returns 0 when `k > n`.
#[inline]
pub fn small(n: usize, k: usize) -> u128 {
    debug_assert!(n <= SMALL_N);
    if k > n {
        0
    } else {
        pascal()[n][k]
    }
}

fn primes_up_to(n: u64) -> Arc<Vec<u32>> {
    static PRIMES: OnceLock<RwLock<Arc<Vec<u32>>>> = OnceLock::new();
    let lock = PRIMES.get_or_init(|| RwLock::new(Arc::new(Vec::new())));
    {
        let cur = lock.read().expect("prime table poisoned");
        if sieve_limit(&cur) >= n {
            return Arc::clone(&cur);
        }
    }
    let limit = n.max(1 << 16).next_power_of_two();
    let fresh = Arc::new(sieve(limit));
    let mut w = lock.write().expect("prime table poisoned");
    if sieve_limit(&w) < limit {
        *w = Arc::clone(&fresh);
    }
    Arc::clone(&w)
}

// The sieve always runs to a power of two, recorded implicitly by the table
// length; an empty table covers nothing.
fn sieve_limit(primes: &[u32]) -> u64 {
    match primes.last() {
        None => 0,
        Some(&p) => u64::from(p).next_power_of_two(),
    }
}

fn sieve(limit: u64) -> Vec<u32> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut out = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            out.push(i as u32);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

fn legendre(mut n: u64, p: u64) -> u64 {
    let mut e = 0;
    while n > 0 {
        n /= p;
        e += n;
    }
    e
}

pub(crate) fn product_tree(mut xs: Vec<BigUint>) -> BigUint {
    if xs.is_empty() {
        return BigUint::one();
    }
    while xs.len() > 1 {
        let mut next = Vec::with_capacity(xs.len().div_ceil(2));
        let mut it = xs.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a * b),
                None => next.push(a),
            }
        }
        xs = next;
    }
    xs.pop().expect("non-empty")
}

fn compute(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    if n as usize <= SMALL_N {
        return BigUint::from(small(n as usize, k as usize));
    }
    if k == 0 {
        return BigUint::one();
    }
    let primes = primes_up_to(n);
    let mut words: Vec<BigUint> = Vec::new();
    let mut acc: u64 = 1;
    for &p in primes.iter() {
        let p = u64::from(p);
        if p > n {
            break;
        }
        let e = legendre(n, p) - legendre(k, p) - legendre(n - k, p);
        for _ in 0..e {
            match acc.checked_mul(p) {
                Some(v) => acc = v,
                None => {
                    words.push(BigUint::from(acc));
                    acc = p;
                }
            }
        }
    }
    words.push(BigUint::from(acc));
    product_tree(words)
}

type Cache = RwLock<HashMap<(u64, u64), Arc<BigUint>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Spacing of the memoised grid `C(n, GRID * j)` for large `n`.
const GRID: u64 = 64;

/// Upper bound on memoised limbs; past it new values are computed but not kept.
const CACHE_LIMBS: usize = 1 << 25;

fn cached(n: u64, k: u64, make: impl FnOnce() -> BigUint) -> Arc<BigUint> {
    static LIMBS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);
    use std::sync::atomic::Ordering;

    if let Some(v) = cache().read().expect("binomial cache poisoned").get(&(n, k)) {
        return Arc::clone(v);
    }
    let v = Arc::new(make());
    let limbs = v.iter_u64_digits().len();
    if LIMBS.load(Ordering::Relaxed) + limbs <= CACHE_LIMBS {
        LIMBS.fetch_add(limbs, Ordering::Relaxed);
        cache()
            .write()
            .expect("binomial cache poisoned")
            .insert((n, k), Arc::clone(&v));
    }
    v
}

/// `C(n, to)` from a known `C(n, from)` by multiplying the ratio run.
pub fn shift(n: u64, from: u64, to: u64, value: &BigUint) -> BigUint {
    if from == to {
        return value.clone();
    }
    let (nums, dens): (Vec<BigUint>, Vec<BigUint>) = if to > from {
        (from..to)
            .map(|j| (BigUint::from(n - j), BigUint::from(j + 1)))
            .unzip()
    } else {
        (to + 1..=from)
            .map(|j| (BigUint::from(j), BigUint::from(n - j + 1)))
            .unzip()
    };
    value * product_tree(nums) / product_tree(dens)
}

/// Exact `C(n, k)`; zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> Arc<BigUint> {
    if k > n {
        return Arc::new(BigUint::zero());
    }
    let k = k.min(n - k);
    if n as usize <= SMALL_N {
        return Arc::new(BigUint::from(small(n as usize, k as usize)));
    }
    if n <= CACHE_N {
        return cached(n, k, || compute(n, k));
    }
    let anchor = ((k + GRID / 2) / GRID * GRID).min(n / 2);
    let base = cached(n, anchor, || compute(n, anchor));
    if anchor == k {
        base
    } else {
        Arc::new(shift(n, anchor, k, &base))
    }
}

/// `ceil(lg x)` for `x >= 1`, with `ceil(lg 1) = 0`.
pub fn ceil_lg(x: &BigUint) -> u64 {
    if x.is_zero() || x.is_one() {
        0
    } else {
        (x - 1u32).bits()
    }
}

/// `ceil(lg(v))` for a machine integer `v >= 1`.
pub fn ceil_lg_u64(v: u64) -> u64 {
    if v <= 1 {
        0
    } else {
        u64::from(64 - (v - 1).leading_zeros())
    }
}

/// `lg x` of a big integer as a float (`x > 0`).
pub fn lg(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        let v: u64 = x.iter_u64_digits().next().unwrap_or(0);
        return (v as f64).log2();
    }
    let shift = bits - 64;
    let top: u64 = (x >> shift).iter_u64_digits().next().unwrap_or(0);
    (top as f64).log2() + shift as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(n: u64, k: u64) -> BigUint {
        // multiplicative formula, independent of the factorisation path
        let mut acc = BigUint::one();
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }

    #[test]
    fn pascal_row_edges() {
        assert_eq!(small(0, 0), 1);
        assert_eq!(small(64, 32), 1_832_624_140_942_590_534);
        assert_eq!(small(5, 6), 0);
    }

    #[test]
    fn factorised_matches_multiplicative() {
        for &(n, k) in &[(65, 3), (100, 50), (1000, 62), (3000, 1499), (70, 0), (70, 70)] {
            assert_eq!(*binomial(n, k), naive(n, k.min(n - k)), "C({n},{k})");
        }
    }

    #[test]
    fn ceil_lg_values() {
        assert_eq!(ceil_lg(&BigUint::from(1u32)), 0);
        assert_eq!(ceil_lg(&BigUint::from(2u32)), 1);
        assert_eq!(ceil_lg(&BigUint::from(5u32)), 3);
        assert_eq!(ceil_lg(&BigUint::from(8u32)), 3);
        assert_eq!(ceil_lg_u64(101), 7);
        assert_eq!(ceil_lg_u64(1), 0);
        assert_eq!(ceil_lg(&binomial(100, 50)), 97);
    }

    #[test]
    fn lg_of_large_binomial() {
        let c = binomial(1000, 62);
        let exact: f64 = (0..62u64)
            .map(|i| ((1000 - i) as f64).log2() - ((i + 1) as f64).log2())
            .sum();
        assert!((lg(&c) - exact).abs() < 1e-9);
    }
}
