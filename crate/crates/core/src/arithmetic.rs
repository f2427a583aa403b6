//! Exact integer and prime machinery: sieves, the k-free predicate on
//! integers, zeta values with certified truncation, certified tails of
//! Euler-type products, and a componentwise CRT solver.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::CompensatedSum;

const EPS: f64 = f64::EPSILON;

/// Increasing list of all primes up to `limit`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeTable {
    limit: u64,
    primes: Vec<u64>,
}

impl PrimeTable {
    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn len(&self) -> usize {
        self.primes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.primes.iter().copied()
    }
}

/// Sieve of Eratosthenes.
pub fn sieve_primes(limit: u64) -> Result<PrimeTable> {
    if limit < 2 {
        return Err(Error::EmptyPrimeTable { limit });
    }
    let n = usize::try_from(limit)
        .map_err(|_| Error::InvalidArgument(format!("sieve limit {limit} too large")))?;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    Ok(PrimeTable { limit, primes })
}

/// The `count` smallest primes.
pub fn first_primes(count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    // Rosser: p_n < n (ln n + ln ln n) for n >= 6
    let c = count.max(6) as f64;
    let mut limit = (c * (c.ln() + c.ln().ln())).ceil() as u64 + 10;
    loop {
        let table = sieve_primes(limit).expect("limit >= 2");
        if table.len() >= count {
            return table.primes[..count].to_vec();
        }
        limit *= 2;
    }
}

/// `true` iff no prime `p` has `p^k | m`. For `k = 1` only `m = 1` passes.
pub fn is_kfree_integer(m: u128, k: u32) -> Result<bool> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if m == 0 {
        return Err(Error::ZeroArgument);
    }
    if m == 1 {
        return Ok(true);
    }
    if k == 1 {
        return Ok(false);
    }
    let mut rest = m;
    let mut p: u128 = 2;
    loop {
        // every prime factor of `rest` is now >= p
        match p.checked_pow(k) {
            Some(pk) if pk <= rest => {}
            _ => return Ok(true),
        }
        if rest.is_multiple_of(p) {
            let mut e = 0;
            while rest.is_multiple_of(p) {
                rest /= p;
                e += 1;
            }
            if e >= k {
                return Ok(false);
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
}

/// Lookup table of the k-free predicate on `1..=limit`.
#[derive(Clone, Debug)]
pub struct KFreeSieve {
    k: u32,
    flags: Vec<bool>,
}

impl KFreeSieve {
    pub fn new(limit: u64, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let n = usize::try_from(limit)
            .map_err(|_| Error::InvalidArgument(format!("sieve limit {limit} too large")))?;
        let mut flags = vec![k != 1; n + 1];
        flags[0] = false;
        if n >= 1 {
            flags[1] = true;
        }
        if k >= 2 {
            let root = integer_root(limit, k);
            if root >= 2 {
                for p in sieve_primes(root)?.iter() {
                    let pk = p.pow(k) as usize;
                    let mut j = pk;
                    while j <= n {
                        flags[j] = false;
                        j += pk;
                    }
                }
            }
        }
        Ok(Self { k, flags })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn limit(&self) -> u64 {
        (self.flags.len() - 1) as u64
    }

    /// `None` when `m` is 0 or beyond the table.
    pub fn get(&self, m: u128) -> Option<bool> {
        if m == 0 {
            return None;
        }
        usize::try_from(m)
            .ok()
            .and_then(|i| self.flags.get(i).copied())
    }
}

/// Largest `r` with `r^k <= x`.
pub(crate) fn integer_root(x: u64, k: u32) -> u64 {
    if k == 1 {
        return x;
    }
    let mut r = (x as f64).powf(1.0 / k as f64).round() as u64;
    while r > 0 && r.checked_pow(k).is_none_or(|v| v > x) {
        r -= 1;
    }
    while (r + 1).checked_pow(k).is_some_and(|v| v <= x) {
        r += 1;
    }
    r
}

/// gcd of the absolute values; 0 for the zero vector.
pub fn coord_gcd(coords: &[i128]) -> u128 {
    coords.iter().fold(0u128, |g, &c| g.gcd(&c.unsigned_abs()))
}

pub(crate) fn bit_length(x: u128) -> u32 {
    128 - x.leading_zeros()
}

/// Moebius function.
pub fn moebius(mut r: u64) -> i8 {
    if r == 0 {
        return 0;
    }
    let mut sign = 1i8;
    let mut p = 2u64;
    while p * p <= r {
        if r.is_multiple_of(p) {
            r /= p;
            if r.is_multiple_of(p) {
                return 0;
            }
            sign = -sign;
        }
        p += 1;
    }
    if r > 1 {
        sign = -sign;
    }
    sign
}

/// Distinct prime divisors in increasing order.
pub fn prime_divisors(mut q: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= q {
        if q.is_multiple_of(p) {
            out.push(p);
            while q.is_multiple_of(p) {
                q /= p;
            }
        }
        p += 1;
    }
    if q > 1 {
        out.push(q);
    }
    out
}

/// Closed real interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted bracket [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    fn scale(self, c: f64) -> Self {
        if c >= 0.0 {
            Self::new(self.lo * c, self.hi * c)
        } else {
            Self::new(self.hi * c, self.lo * c)
        }
    }
}

/// Riemann zeta at an integer argument with a certified error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZetaValue {
    pub s: u32,
    pub value: f64,
    pub truncation_error: f64,
}

impl ZetaValue {
    pub fn reciprocal(&self) -> f64 {
        1.0 / self.value
    }

    pub fn bracket(&self) -> Bracket {
        Bracket::new(
            self.value - self.truncation_error,
            self.value + self.truncation_error,
        )
    }
}

/// `zeta(s)` for integer `s >= 2`.
///
/// The partial sum up to `N` is completed by the convexity bracket
/// `int_{N+1}^inf x^-s dx + (N+1)^-s / 2 <= sum_{n>N} n^-s <= int_{N+1/2}^inf x^-s dx`,
/// `N` doubling until the half-width is below `1e-16` relative to `2^-s`.
pub fn zeta(s: u32) -> Result<ZetaValue> {
    let tail = zeta_minus_one(s)?;
    let value = 1.0 + tail.mid();
    Ok(ZetaValue {
        s,
        value,
        truncation_error: tail.half_width() + EPS * value,
    })
}

/// Certified bracket for `zeta(s) - 1 = sum_{n>=2} n^-s`, accurate relative
/// to its own size so it stays useful when `s` is large.
pub fn zeta_minus_one(s: u32) -> Result<Bracket> {
    if s < 2 {
        return Err(Error::Divergent { s });
    }
    let sf = s as f64;
    let tail = |n: f64| {
        let lo = (n + 1.0).powf(1.0 - sf) / (sf - 1.0) + 0.5 * (n + 1.0).powf(-sf);
        let hi = (n + 0.5).powf(1.0 - sf) / (sf - 1.0);
        (lo, hi)
    };
    let target = 4e-16 * 2f64.powf(-sf);
    let mut n: u64 = 16;
    while n < (1 << 22) {
        let (lo, hi) = tail(n as f64);
        if 0.5 * (hi - lo) <= target {
            break;
        }
        n *= 2;
    }
    let mut acc = CompensatedSum::new();
    for j in (2..=n).rev() {
        acc.add((j as f64).powf(-sf));
    }
    let (lo, hi) = tail(n as f64);
    let partial = acc.value();
    let rounding = 4.0 * EPS * (partial + hi);
    Ok(Bracket::new(
        partial + lo - rounding,
        partial + hi + rounding,
    ))
}

/// Upper bound for `sum_{n > cutoff} n^-tau`.
fn integer_tail_upper(tau: f64, cutoff: u64) -> f64 {
    (cutoff as f64 + 0.5).powf(1.0 - tau) / (tau - 1.0)
}

/// Bracket for `L(tau) = -sum_{p > cutoff} log(1 - p^-tau)`, i.e. the log of
/// the Euler product of zeta(tau) restricted to primes beyond the cutoff.
fn euler_log_tail(tau: u32, primes: &[u64], cutoff: u64) -> Result<Bracket> {
    let t = tau as f64;
    let upper = integer_tail_upper(t, cutoff) / (1.0 - (cutoff as f64 + 1.0).powf(-t));
    let zm1 = zeta_minus_one(tau)?;
    let mut acc = CompensatedSum::new();
    let head = zm1.mid().ln_1p();
    acc.add(head);
    let mut magnitude = head.abs();
    for &p in primes {
        let term = (-(p as f64).powf(-t)).ln_1p();
        acc.add(term);
        magnitude += term.abs();
    }
    let v = acc.value();
    let err = zm1.half_width() + 8.0 * EPS * magnitude;
    let lo = (v - err).max(0.0);
    let hi = (v + err).min(upper);
    Ok(if lo <= hi {
        Bracket::new(lo, hi)
    } else {
        Bracket::new(0.0, upper)
    })
}

/// Bracket for the prime zeta tail `Q(sigma) = sum_{p > cutoff} p^-sigma`,
/// by Moebius inversion of `L(r sigma) = sum_j Q(j r sigma) / j`.
fn prime_zeta_tail(sigma: u32, primes: &[u64], cutoff: u64) -> Result<Bracket> {
    let upper_l =
        |tau: f64| integer_tail_upper(tau, cutoff) / (1.0 - (cutoff as f64 + 1.0).powf(-tau));
    let mut lo = 0.0;
    let mut hi = 0.0;
    let mut r: u32 = 1;
    loop {
        let mu = moebius(r as u64);
        if mu != 0 {
            let tau = r
                .checked_mul(sigma)
                .ok_or_else(|| Error::InvalidArgument("exponent overflow".into()))?;
            let b = euler_log_tail(tau, primes, cutoff)?.scale(mu as f64 / r as f64);
            lo += b.lo;
            hi += b.hi;
        }
        let remainder = 2.0 * upper_l(((r + 1) * sigma) as f64);
        if remainder < 1e-40 || r >= 64 {
            lo -= remainder;
            hi += remainder;
            break;
        }
        r += 1;
    }
    let cap = integer_tail_upper(sigma as f64, cutoff);
    let lo = (lo * (1.0 - 4.0 * EPS)).max(0.0);
    let hi = (hi * (1.0 + 4.0 * EPS)).min(cap);
    Ok(Bracket::new(lo.min(hi), hi))
}

/// Certified brackets for `prod_{p > cutoff} (1 - m p^-s)`, `0 <= m <= max_m`.
///
/// The logarithm expands as `-sum_j m^j/j * Q(j s)` with `Q` the prime zeta
/// tail; the series is cut once the geometric remainder is negligible and
/// that remainder is folded into the lower end of the bracket.
#[derive(Clone, Debug)]
pub struct EulerTail {
    s: u32,
    cutoff: u64,
    max_m: u64,
    /// `q[j-1]` brackets `Q(j s)`.
    q: Vec<Bracket>,
}

impl EulerTail {
    pub fn new(s: u32, cutoff: u64, max_m: u64) -> Result<Self> {
        if s < 2 {
            return Err(Error::Divergent { s });
        }
        let y_max = max_m as f64 * (cutoff as f64 + 1.0).powf(-(s as f64));
        if y_max > 0.5 {
            return Err(Error::InvalidArgument(format!(
                "prime cutoff {cutoff} too small for {max_m} sites at exponent {s}"
            )));
        }
        let primes = if cutoff >= 2 {
            sieve_primes(cutoff)?.primes
        } else {
            Vec::new()
        };
        let mut q = Vec::new();
        let mut j: u32 = 1;
        loop {
            q.push(prime_zeta_tail(j * s, &primes, cutoff)?);
            if Self::remainder_bound(s, cutoff, max_m, j) < 1e-40 || j >= 64 {
                break;
            }
            j += 1;
        }
        Ok(Self {
            s,
            cutoff,
            max_m,
            q,
        })
    }

    fn remainder_bound(s: u32, cutoff: u64, m: u64, terms: u32) -> f64 {
        if m == 0 {
            return 0.0;
        }
        let y = m as f64 * (cutoff as f64 + 1.0).powf(-(s as f64));
        let next = (terms + 1) as f64;
        (m as f64).powf(next) * integer_tail_upper(next * s as f64, cutoff) / (next * (1.0 - y))
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    pub fn exponent(&self) -> u32 {
        self.s
    }

    pub fn product_tail(&self, m: u64) -> Result<Bracket> {
        if m == 0 {
            return Ok(Bracket::point(1.0));
        }
        if m > self.max_m {
            return Err(Error::InvalidArgument(format!(
                "site count {m} exceeds the tail table size {}",
                self.max_m
            )));
        }
        let mf = m as f64;
        let mut lo_log = 0.0;
        let mut hi_log = 0.0;
        for (idx, q) in self.q.iter().enumerate() {
            let j = (idx + 1) as f64;
            let coeff = mf.powf(j) / j;
            lo_log -= coeff * q.hi;
            hi_log -= coeff * q.lo;
        }
        lo_log -= Self::remainder_bound(self.s, self.cutoff, m, self.q.len() as u32);
        let slack = 8.0 * EPS * (self.q.len() as f64 + 2.0);
        let lo = lo_log.exp() * (1.0 - slack);
        let hi = (hi_log.exp() * (1.0 + slack)).min(1.0);
        Ok(Bracket::new(lo, hi))
    }
}

/// Simultaneous congruences `x = target_i (mod modulus_i)`, componentwise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrtSystem {
    residues: Vec<(u128, Vec<i128>)>,
}

impl CrtSystem {
    pub fn new(residues: Vec<(u128, Vec<i128>)>) -> Result<Self> {
        let Some((_, first)) = residues.first() else {
            return Err(Error::InvalidArgument("empty congruence system".into()));
        };
        let dim = first.len();
        for (m, t) in &residues {
            if *m == 0 {
                return Err(Error::InvalidArgument("modulus 0".into()));
            }
            if *m > i128::MAX as u128 {
                return Err(Error::Budget {
                    required_bits: bit_length(*m),
                    available_bits: 127,
                });
            }
            if t.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: t.len(),
                });
            }
        }
        for (i, (a, _)) in residues.iter().enumerate() {
            for (b, _) in &residues[i + 1..] {
                if a.gcd(b) != 1 {
                    return Err(Error::NonCoprime { a: *a, b: *b });
                }
            }
        }
        Ok(Self { residues })
    }

    pub fn residues(&self) -> &[(u128, Vec<i128>)] {
        &self.residues
    }

    pub fn dimension(&self) -> usize {
        self.residues[0].1.len()
    }

    /// Product of the moduli, or a budget error if it leaves `i128`.
    pub fn modulus_product(&self) -> Result<u128> {
        let mut prod: u128 = 1;
        let mut overflow = false;
        for (m, _) in &self.residues {
            match prod.checked_mul(*m) {
                Some(p) if p <= i128::MAX as u128 => prod = p,
                _ => overflow = true,
            }
        }
        if overflow {
            let bits: f64 = self.residues.iter().map(|(m, _)| (*m as f64).log2()).sum();
            return Err(Error::Budget {
                required_bits: bits.ceil() as u32 + 1,
                available_bits: 127,
            });
        }
        Ok(prod)
    }
}

fn mul_mod(a: u128, b: u128, m: u128) -> u128 {
    if let Some(p) = a.checked_mul(b) {
        return p % m;
    }
    let (mut a, mut b) = (a % m, b % m);
    let mut acc: u128 = 0;
    while b > 0 {
        if b & 1 == 1 {
            acc = add_mod(acc, a, m);
        }
        a = add_mod(a, a, m);
        b >>= 1;
    }
    acc
}

fn add_mod(a: u128, b: u128, m: u128) -> u128 {
    if a >= m - b {
        a - (m - b)
    } else {
        a + b
    }
}

fn inverse_mod(a: u128, m: u128) -> u128 {
    if m == 1 {
        return 0;
    }
    let g = (a as i128).extended_gcd(&(m as i128));
    debug_assert_eq!(g.gcd, 1);
    g.x.rem_euclid(m as i128) as u128
}

/// Solves the system componentwise. Each output component lies in
/// `[0, prod modulus_i)`.
pub fn crt_solve(system: &CrtSystem) -> Result<Vec<i128>> {
    system.modulus_product()?;
    let dim = system.dimension();
    let mut x = vec![0u128; dim];
    let mut big_m: u128 = 1;
    for (m, target) in &system.residues {
        let m = *m;
        let inv = inverse_mod(big_m % m, m);
        for (xi, &ti) in x.iter_mut().zip(target) {
            let want = ti.rem_euclid(m as i128) as u128;
            let have = *xi % m;
            let diff = if want >= have {
                want - have
            } else {
                m - (have - want)
            };
            let step = mul_mod(diff % m, inv, m);
            *xi += big_m * step;
        }
        big_m *= m;
    }
    Ok(x.into_iter().map(|v| v as i128).collect())
}
