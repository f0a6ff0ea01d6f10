//! Integer and multiplicative-function primitives shared by all modules.

use crate::error::{Error, Result};
use num::rational::BigRational;
use num::{BigInt, One};

/// Exact split `n = p^nu * unit_part` with `gcd(unit_part, p) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValuationSplit {
    pub nu: u32,
    pub unit_part: u64,
}

/// p-adic order of `n != 0`, applied to `|n|`.
pub fn valuation(n: i64, p: u64) -> Result<ValuationSplit> {
    if n == 0 {
        return Err(Error::InvalidArgument("valuation of 0 is undefined".into()));
    }
    if p < 2 {
        return Err(Error::InvalidArgument(format!("{p} is not a prime")));
    }
    let mut u = n.unsigned_abs();
    let mut nu = 0;
    while u % p == 0 {
        u /= p;
        nu += 1;
    }
    Ok(ValuationSplit { nu, unit_part: u })
}

/// Jacobi symbol (a/q) for odd positive q.
pub fn jacobi(a: i64, q: u64) -> Result<i8> {
    if q == 0 || q % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "Jacobi symbol needs odd positive q, got {q}"
        )));
    }
    // (a/q) is periodic in a with period q; this also settles negative a,
    // consistently with the Kronecker rule (-1/q) = (-1)^((q-1)/2).
    let mut a = a.rem_euclid(q as i64) as u64;
    let mut q = q;
    let mut sign = 1i8;
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            if matches!(q % 8, 3 | 5) {
                sign = -sign;
            }
        }
        std::mem::swap(&mut a, &mut q);
        if a % 4 == 3 && q % 4 == 3 {
            sign = -sign;
        }
        a %= q;
    }
    Ok(if q == 1 { sign } else { 0 })
}

/// Kronecker symbol (a/n) for positive n, extending Jacobi to even n.
pub fn kronecker(a: i64, n: u64) -> i8 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut n = n;
    let mut sign = 1i8;
    while n % 2 == 0 {
        n /= 2;
        match a.rem_euclid(8) {
            1 | 7 => {}
            3 | 5 => sign = -sign,
            _ => return 0, // a even
        }
    }
    sign * jacobi(a, n).expect("n odd after removing twos")
}

/// The real character chi(q) = (4D/q) attached to a form of discriminant D.
///
/// Zero whenever gcd(q, 4D) > 1; negative D goes through the Kronecker
/// extension.
pub fn chi(four_d: i64, q: u64) -> i8 {
    kronecker(four_d, q)
}

/// 1 iff n is a perfect cube.
pub fn cube_indicator(n: u64) -> bool {
    icbrt(n).is_some()
}

/// Exact integer cube root: Some(c) iff n = c^3.
pub fn icbrt(n: u64) -> Option<u64> {
    let c = (n as f64).cbrt().round() as u64;
    for cand in c.saturating_sub(1)..=c + 1 {
        if cand.checked_pow(3) == Some(n) {
            return Some(cand);
        }
    }
    None
}

/// Trial-division factorization of n >= 1 as (prime, exponent) pairs.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            let mut e = 0;
            while n % d == 0 {
                n /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// All divisors of n, unsorted order of generation.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, e) in factorize(n) {
        let len = divs.len();
        let mut pk = 1u64;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs
}

/// Mobius function.
pub fn mobius(n: u64) -> i8 {
    if n == 0 {
        return 0;
    }
    let mut mu = 1i8;
    for (_, e) in factorize(n) {
        if e > 1 {
            return 0;
        }
        mu = -mu;
    }
    mu
}

/// sigma_{1-k}(n, chi) = sum over d | n of chi(d) d^{1-k}, exact.
///
/// The character is (4D/d); multiplicative in n.
pub fn sigma_chi(n: u64, k: u32, four_d: i64) -> Result<BigRational> {
    if n == 0 || k < 2 {
        return Err(Error::InvalidArgument(format!(
            "sigma_chi needs n >= 1 and k >= 2, got n={n}, k={k}"
        )));
    }
    // Multiplicative: per prime power, sum_{j<=e} chi(p)^j p^{-j(k-1)}.
    let mut total = BigRational::one();
    for (p, e) in factorize(n) {
        let c = chi(four_d, p);
        if c == 0 {
            continue; // those divisors contribute only d = p^0
        }
        let mut factor = BigRational::one();
        let step = BigRational::new(BigInt::from(c), BigInt::from(p).pow(k - 1));
        let mut term = BigRational::one();
        for _ in 0..e {
            term *= &step;
            factor += &term;
        }
        total *= factor;
    }
    Ok(total)
}

/// Primes up to and including `bound`, by sieve.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut is_comp = vec![false; n + 1];
    let mut primes = Vec::new();
    for i in 2..=n {
        if !is_comp[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= n {
                is_comp[j] = true;
                j += i;
            }
        }
    }
    primes
}

/// Floor of the r-th root of n, exact.
pub fn iroot(n: u64, r: u32) -> u64 {
    if n == 0 {
        return 0;
    }
    let mut x = (n as f64).powf(1.0 / r as f64).round() as u64 + 1;
    while x.checked_pow(r).map_or(true, |v| v > n) {
        x -= 1;
    }
    x
}

/// gcd of two non-negative integers.
pub fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn gcd_i64(a: i64, b: i64) -> i64 {
    gcd(a.unsigned_abs(), b.unsigned_abs()) as i64
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{ToPrimitive, Zero};

    #[test]
    fn jacobi_examples() {
        assert_eq!(jacobi(1, 3).unwrap(), 1);
        assert_eq!(jacobi(2, 15).unwrap(), 1);
        // (64/3): 64 = 8^2 is a perfect square and 64 = 1 mod 3.
        assert_eq!(jacobi(64, 3).unwrap(), 1);
        assert!(jacobi(3, 4).is_err());
        assert!(jacobi(5, 0).is_err());
    }

    #[test]
    fn jacobi_multiplicative_in_a() {
        for q in (1..1000u64).step_by(2) {
            for a in [-7i64, -2, 2, 3, 5, 10] {
                for b in [-5i64, 3, 4, 9] {
                    let ab = jacobi(a * b, q).unwrap();
                    let a_ = jacobi(a, q).unwrap();
                    let b_ = jacobi(b, q).unwrap();
                    assert_eq!(ab, a_ * b_, "a={a} b={b} q={q}");
                }
            }
        }
    }

    #[test]
    fn jacobi_multiplicative_in_q() {
        for q1 in (1..100u64).step_by(2) {
            for q2 in (1..100u64).step_by(2) {
                for a in [-3i64, 2, 7, 30] {
                    assert_eq!(
                        jacobi(a, q1 * q2).unwrap(),
                        jacobi(a, q1).unwrap() * jacobi(a, q2).unwrap()
                    );
                }
            }
        }
    }

    #[test]
    fn kronecker_negative_and_even() {
        // (-1/q) = (-1)^((q-1)/2)
        for q in (1..200u64).step_by(2) {
            let expect = if q % 4 == 1 { 1 } else { -1 };
            assert_eq!(kronecker(-1, q), expect);
        }
        // (a/2) table
        assert_eq!(kronecker(7, 2), 1);
        assert_eq!(kronecker(3, 2), -1);
        assert_eq!(kronecker(4, 2), 0);
        // chi for the six-squares discriminant: 4D = -256, character mod 4.
        for q in (1..100u64).step_by(2) {
            let expect = if q % 4 == 1 { 1 } else { -1 };
            assert_eq!(chi(-256, q), expect, "q={q}");
        }
        assert_eq!(chi(-256, 2), 0);
        assert_eq!(chi(-256, 6), 0);
    }

    #[test]
    fn valuation_examples_and_roundtrip() {
        assert_eq!(
            valuation(12, 2).unwrap(),
            ValuationSplit {
                nu: 2,
                unit_part: 3
            }
        );
        assert_eq!(
            valuation(7, 3).unwrap(),
            ValuationSplit {
                nu: 0,
                unit_part: 7
            }
        );
        assert_eq!(
            valuation(54, 3).unwrap(),
            ValuationSplit {
                nu: 3,
                unit_part: 2
            }
        );
        assert!(valuation(0, 2).is_err());
        for p in [2u64, 3, 5, 7] {
            for n in 1..=100_000i64 {
                let v = valuation(n, p).unwrap();
                assert_eq!(p.pow(v.nu) * v.unit_part, n as u64);
                assert_eq!(v.unit_part % p, v.unit_part % p % p);
                assert_ne!(v.unit_part % p, 0);
            }
        }
    }

    #[test]
    fn cube_indicator_examples() {
        assert!(cube_indicator(1));
        assert!(cube_indicator(8));
        assert!(!cube_indicator(12));
        assert!(cube_indicator(27_000_000));
        // multiplicative on coprime arguments
        for a in 1..=200u64 {
            for b in 1..=200u64 {
                if gcd(a, b) == 1 {
                    assert_eq!(
                        cube_indicator(a * b),
                        cube_indicator(a) && cube_indicator(b),
                        "a={a} b={b}"
                    );
                }
            }
        }
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius(1), 1);
        assert_eq!(mobius(6), 1);
        assert_eq!(mobius(12), 0);
        assert_eq!(mobius(30), -1);
        // sum over divisors of mu is the unit function
        for n in 2..=300u64 {
            let s: i64 = divisors(n).into_iter().map(|d| mobius(d) as i64).sum();
            assert_eq!(s, 0, "n={n}");
        }
    }

    #[test]
    fn sigma_chi_examples() {
        let one = BigRational::one();
        assert_eq!(sigma_chi(1, 2, 64).unwrap(), one);
        // n=3, k=2, 4D=64: 1 + chi(3)/3 with chi(3) = (64/3) = 1.
        assert_eq!(
            sigma_chi(3, 2, 64).unwrap(),
            BigRational::new(BigInt::from(4), BigInt::from(3))
        );
        // n=4: chi(2) = chi(4) = 0.
        assert_eq!(sigma_chi(4, 2, 64).unwrap(), one);
    }

    #[test]
    fn sigma_chi_multiplicative() {
        // Direct divisor-sum oracle against the factored implementation.
        let direct = |n: u64, k: u32, four_d: i64| -> BigRational {
            let mut s = BigRational::zero();
            for d in divisors(n) {
                let c = chi(four_d, d);
                if c != 0 {
                    s += BigRational::new(BigInt::from(c), BigInt::from(d).pow(k - 1));
                }
            }
            s
        };
        for four_d in [64i64, -256, 144, 192] {
            for n in 1..=200u64 {
                assert_eq!(sigma_chi(n, 2, four_d).unwrap(), direct(n, 2, four_d));
            }
        }
        for m in 1..=200u64 {
            for n in 1..=200u64 {
                if gcd(m, n) == 1 {
                    let lhs = sigma_chi(m * n, 3, -256).unwrap();
                    let rhs = sigma_chi(m, 3, -256).unwrap() * sigma_chi(n, 3, -256).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn root_helpers() {
        for n in 0..5000u64 {
            let c = iroot(n, 3);
            assert!(c.pow(3) <= n && (c + 1).pow(3) > n);
        }
        assert_eq!(icbrt(343), Some(7));
        assert_eq!(icbrt(344), None);
        assert_eq!(iroot(u64::MAX, 2), u32::MAX as u64);
    }

    #[test]
    fn primes_sieve() {
        let ps = primes_up_to(50);
        assert_eq!(
            ps,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]
        );
    }

    #[test]
    fn sigma_chi_values_are_finite_rationals() {
        let v = sigma_chi(720, 4, -256).unwrap();
        assert!(v.to_f64().unwrap().is_finite());
    }
}
