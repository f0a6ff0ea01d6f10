//! Numeric evaluation of zeta and L-values, the Euler products behind the
//! leading constants, and machine verification of the constant identities.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};

use crate::arith;
use crate::density::{rat_pow_p, DensityContext};
use crate::error::{Error, Result};
use crate::qform::QuadraticForm;

/// A floating value with a rigorous error bound (truncation + rounding).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounded {
    pub value: f64,
    pub error: f64,
}

const EPS: f64 = 4e-16;

impl Bounded {
    pub fn exact(value: f64) -> Self {
        Bounded {
            value,
            error: value.abs() * EPS,
        }
    }

    pub fn new(value: f64, error: f64) -> Self {
        Bounded { value, error }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        let v = rational_to_f64(r);
        Bounded {
            value: v,
            error: v.abs() * EPS + f64::MIN_POSITIVE,
        }
    }

    pub fn add(self, o: Bounded) -> Self {
        let v = self.value + o.value;
        Bounded {
            value: v,
            error: self.error + o.error + v.abs() * EPS,
        }
    }

    pub fn sub(self, o: Bounded) -> Self {
        self.add(Bounded {
            value: -o.value,
            error: o.error,
        })
    }

    pub fn mul(self, o: Bounded) -> Self {
        let v = self.value * o.value;
        let e = self.value.abs() * o.error + o.value.abs() * self.error + self.error * o.error;
        Bounded {
            value: v,
            error: e + v.abs() * EPS,
        }
    }

    pub fn div(self, o: Bounded) -> Self {
        assert!(
            o.value.abs() > o.error,
            "division by an interval containing 0"
        );
        let v = self.value / o.value;
        let denom = o.value.abs() - o.error;
        let e = (self.error + v.abs() * o.error) / denom;
        Bounded {
            value: v,
            error: e + v.abs() * EPS,
        }
    }

    pub fn scale(self, c: f64) -> Self {
        Bounded {
            value: self.value * c,
            error: self.error * c.abs() + (self.value * c).abs() * EPS,
        }
    }

    /// Widen by a multiplicative factor between exp(-t) and exp(t).
    pub fn widen_log(self, t: f64) -> Self {
        let grow = t.exp() - 1.0;
        Bounded {
            value: self.value,
            error: self.error + self.value.abs() * grow,
        }
    }

    pub fn abs(self) -> Self {
        Bounded {
            value: self.value.abs(),
            error: self.error,
        }
    }

    /// Upper endpoint of the enclosure.
    pub fn upper(self) -> f64 {
        self.value + self.error
    }

    pub fn lower(self) -> f64 {
        self.value - self.error
    }

    pub fn contains(self, x: f64) -> bool {
        self.lower() <= x && x <= self.upper()
    }
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // fall back through a scaled division for extreme numerators
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

// ---------------------------------------------------------------------------
// zeta and L(s, chi)
// ---------------------------------------------------------------------------

const SERIES_CUTOFF: u64 = 2_000_000;

fn zeta_uncached(s: f64) -> Result<Bounded> {
    if s <= 1.0 {
        return Err(Error::Domain(format!("zeta needs s > 1, got {s}")));
    }
    let n = SERIES_CUTOFF;
    let mut sum = 0.0f64;
    for q in (1..=n).rev() {
        sum += (q as f64).powf(-s);
    }
    // integral enclosure of the tail sum_{q > N} q^{-s}
    let hi = (n as f64).powf(1.0 - s) / (s - 1.0);
    let lo = ((n + 1) as f64).powf(1.0 - s) / (s - 1.0);
    let value = sum + 0.5 * (hi + lo);
    let error = 0.5 * (hi - lo) + sum * (n as f64).log2() * 1e-16 + value.abs() * EPS;
    Ok(Bounded { value, error })
}

/// Riemann zeta for real s > 1, with a rigorous enclosure.
pub fn zeta(s: f64) -> Result<Bounded> {
    static CACHE: OnceLock<Mutex<HashMap<u64, Bounded>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&s.to_bits()) {
        return Ok(*v);
    }
    let v = zeta_uncached(s)?;
    cache.lock().unwrap().insert(s.to_bits(), v);
    Ok(v)
}

fn l_chi_uncached(s: f64, four_d: i64) -> Result<Bounded> {
    if s <= 1.0 {
        return Err(Error::Domain(format!("L(s, chi) needs s > 1, got {s}")));
    }
    let period = four_d.unsigned_abs();
    let table: Vec<i8> = (0..period).map(|r| arith::chi(four_d, r)).collect();
    let n = SERIES_CUTOFF;
    let mut sum = 0.0f64;
    for q in (1..=n).rev() {
        let c = table[(q % period) as usize];
        if c != 0 {
            sum += c as f64 * (q as f64).powf(-s);
        }
    }
    // |tail| <= integral bound regardless of sign pattern
    let tail = (n as f64).powf(1.0 - s) / (s - 1.0);
    let error = tail + sum.abs() * (n as f64).log2() * 1e-16 + sum.abs() * EPS + 1e-300;
    Ok(Bounded { value: sum, error })
}

/// Dirichlet L(s, chi_{4D}) by direct character sum with an integral tail
/// bound; chi evaluated through the Kronecker symbol.
pub fn l_chi(s: f64, four_d: i64) -> Result<Bounded> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, i64), Bounded>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&(s.to_bits(), four_d)) {
        return Ok(*v);
    }
    let v = l_chi_uncached(s, four_d)?;
    cache.lock().unwrap().insert((s.to_bits(), four_d), v);
    Ok(v)
}

/// L(s, chi) for the character attached to a form.
pub fn l_chi_form(s: f64, q: &QuadraticForm) -> Result<Bounded> {
    let four_d = (4 * q.invariants().disc) as i64;
    l_chi(s, four_d)
}

// ---------------------------------------------------------------------------
// Euler products for the leading coefficients
// ---------------------------------------------------------------------------

/// Truncated Euler product with a tail estimate.
#[derive(Debug, Clone)]
pub struct EulerProductReport {
    pub cutoff: u64,
    pub partial: Bounded,
    /// Bound on |log(tail)| from the 1 - 3/p^2 + ... factor shape.
    pub tail_log_bound: f64,
    pub result: Bounded,
}

/// The generic factor (1 - 1/p)^2 (1 + 2/p + 3chi/p^{m/2} + 2chi^2/p^{m-1}
/// + chi^2/p^m), exact.
fn generic_factor(p: u64, m: usize, chi_p: i64) -> BigRational {
    let one = BigRational::one();
    let head = (&one - rat_pow_p(p, -1)) * (&one - rat_pow_p(p, -1));
    let c = BigRational::from_integer(BigInt::from(chi_p));
    let c2 = &c * &c;
    let body = &one
        + rat_pow_p(p, -1) * BigRational::from_integer(BigInt::from(2))
        + &c * rat_pow_p(p, -((m / 2) as i64)) * BigRational::from_integer(BigInt::from(3))
        + &c2 * rat_pow_p(p, -(m as i64 - 1)) * BigRational::from_integer(BigInt::from(2))
        + &c2 * rat_pow_p(p, -(m as i64));
    head * body
}

const BAD_BLOCK_DMAX: i64 = 60;

/// The bad-prime block (1 - 1/p)^4 sum_{d >= 0} p^{-d} sum_{nu <= 3d}
/// delta_p(p^nu, Q), exact up to a geometrically small tail.
fn bad_prime_block(ctx: &DensityContext, p: u64) -> Result<(BigRational, f64)> {
    let mut deltas: Vec<BigRational> = Vec::with_capacity(3 * BAD_BLOCK_DMAX as usize + 4);
    for nu in 0..=(3 * BAD_BLOCK_DMAX as u32) {
        deltas.push(ctx.delta_bad_prime_power(p, nu)?);
    }
    let mut sup: f64 = 1.0;
    for d in &deltas {
        sup = sup.max(rational_to_f64(d));
    }
    let mut block = BigRational::zero();
    let mut partial = BigRational::zero();
    for d in 0..=BAD_BLOCK_DMAX {
        if d == 0 {
            partial = deltas[0].clone();
        } else {
            for nu in (3 * (d - 1) + 1)..=(3 * d) {
                partial += &deltas[nu as usize];
            }
        }
        block += &partial * rat_pow_p(p, -d);
    }
    let head = BigRational::one() - rat_pow_p(p, -1);
    let head4 = &head * &head * &head * &head;
    block *= head4;
    // tail: sum_{d > dmax} (3d + 1) sup / p^d
    let x = 1.0 / p as f64;
    let dm = BAD_BLOCK_DMAX as f64;
    let tail =
        sup * x.powf(dm + 1.0) * ((3.0 * dm + 4.0) / (1.0 - x) + 3.0 * x / ((1.0 - x) * (1.0 - x)));
    Ok((block, tail))
}

/// Leading Euler product of S_W: over all primes.
pub fn frak_c_w(q: &QuadraticForm, cutoff: u64) -> Result<EulerProductReport> {
    let inv = q.invariants();
    let m = q.m();
    let four_d = (4 * inv.disc) as i64;
    let l1 = l_chi((3 * m) as f64 / 2.0 - 2.0, four_d)?;
    let mut prod = Bounded::exact(1.0);
    for p in arith::primes_up_to(cutoff) {
        let f = generic_factor(p, m, arith::chi(four_d, p) as i64);
        prod = prod.mul(Bounded::from_rational(&f));
    }
    let tail_log = 4.0 / (cutoff as f64 - 1.0);
    let partial = l1.mul(prod).scale(1.0 / (6 * m - 8) as f64);
    let result = partial.widen_log(tail_log);
    Ok(EulerProductReport {
        cutoff,
        partial,
        tail_log_bound: tail_log,
        result,
    })
}

/// Leading Euler product of S_Q: generic factors away from 2D, the
/// delta-series blocks at bad primes. Needs a locally determined form.
pub fn frak_c_q(ctx: &DensityContext, cutoff: u64) -> Result<EulerProductReport> {
    let report = ctx.ld_condition()?;
    if !report.satisfied {
        return Err(Error::ConditionNotSatisfied(format!(
            "frak_c_q needs a locally determined form: {:?}",
            report.witness
        )));
    }
    let q = ctx.form();
    let inv = ctx.invariants();
    let m = q.m();
    let four_d = (4 * inv.disc) as i64;
    let two_d = 2 * inv.disc;

    let l_num = l_chi((3 * m) as f64 / 2.0 - 2.0, four_d)?;
    let l_den = l_chi(m as f64 / 2.0, four_d)?;

    let mut prod = Bounded::exact(1.0);
    for p in arith::primes_up_to(cutoff) {
        if two_d.rem_euclid(p as i128) == 0 {
            continue;
        }
        let f = generic_factor(p, m, arith::chi(four_d, p) as i64);
        prod = prod.mul(Bounded::from_rational(&f));
    }
    let tail_log = 4.0 / (cutoff as f64 - 1.0);
    for p in ctx.bad_primes() {
        let (block, tail) = bad_prime_block(ctx, p)?;
        let mut b = Bounded::from_rational(&block);
        b.error += tail;
        prod = prod.mul(b);
    }
    let partial = l_num.div(l_den).mul(prod).scale(1.0 / (6 * m - 8) as f64);
    let result = partial.widen_log(tail_log);
    Ok(EulerProductReport {
        cutoff,
        partial,
        tail_log_bound: tail_log,
        result,
    })
}

// ---------------------------------------------------------------------------
// leading constants
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LeadingConstants {
    /// 2 (2 pi)^{m/2} / (Gamma(m/2) sqrt(|A|)).
    pub c_star: Bounded,
    /// c_star / ((m-1)^2 zeta(m-1)).
    pub c: Bounded,
    /// c_star / L(m/2, chi).
    pub c_prime_star: Bounded,
    pub c_prime: Bounded,
    /// c_star * frak_c_q, when the form is locally determined.
    pub predicted_nstar_leading: Option<Bounded>,
}

/// Gamma(m/2) = (m/2 - 1)! for even m, exact.
fn gamma_half_m(m: usize) -> f64 {
    let mut f = 1.0f64;
    for j in 1..(m / 2) {
        f *= j as f64;
    }
    f
}

pub fn c_star(q: &QuadraticForm) -> Bounded {
    let m = q.m();
    let det = q.invariants().det_a as f64;
    let v = 2.0 * (2.0 * PI).powi((m / 2) as i32) / (gamma_half_m(m) * det.sqrt());
    Bounded::exact(v)
}

pub fn leading_constants(ctx: &DensityContext, cutoff: u64) -> Result<LeadingConstants> {
    let q = ctx.form();
    let m = q.m();
    let cs = c_star(q);
    let z = zeta((m - 1) as f64)?;
    let c = cs.div(z.scale(((m - 1) * (m - 1)) as f64));
    let l = l_chi_form(m as f64 / 2.0, q)?;
    let cps = cs.div(l);
    let cp = cps.div(z.scale(((m - 1) * (m - 1)) as f64));
    let predicted = if ctx.ld_condition()?.satisfied {
        Some(cs.mul(frak_c_q(ctx, cutoff)?.result))
    } else {
        None
    };
    Ok(LeadingConstants {
        c_star: cs,
        c,
        c_prime_star: cps,
        c_prime: cp,
        predicted_nstar_leading: predicted,
    })
}

// ---------------------------------------------------------------------------
// identity checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct LevelOneReport {
    /// |lhs - rhs| / rhs for the full constant identity.
    pub discrepancy: Bounded,
    /// Exact series value of the dyadic block sum (truncated at d_max = 60).
    pub series: BigRational,
    /// The closed form 4 (1 - 2^{-m/2}) (1 - 2^{-(3m/2-2)})^{-1} (1 + 2/2 +
    /// 3 2^{-m/2} + 2 2^{1-m} + 2^{-m}).
    pub closed: BigRational,
}

/// Full check of the level-one constant identity.
pub fn verify_level_one(ctx: &DensityContext, cutoff: u64) -> Result<LevelOneReport> {
    let q = ctx.form();
    let inv = ctx.invariants();
    if inv.level != 1 {
        return Err(Error::NotLevelOne(inv.level));
    }
    let m = q.m();

    // intermediate identity: the delta series against its closed form
    let mut series = BigRational::zero();
    let mut partial = BigRational::zero();
    for d in 0..=BAD_BLOCK_DMAX {
        if d == 0 {
            partial = ctx.delta_bad_prime_power(2, 0)?;
        } else {
            for nu in (3 * (d - 1) + 1)..=(3 * d) {
                partial += ctx.delta_bad_prime_power(2, nu as u32)?;
            }
        }
        series += &partial * rat_pow_p(2, -d);
    }
    let one = BigRational::one();
    let hm = (m / 2) as i64;
    let closed = BigRational::from_integer(BigInt::from(4)) * (&one - rat_pow_p(2, -hm))
        / (&one - rat_pow_p(2, -(3 * hm - 2)))
        * (&one
            + BigRational::one()
            + rat_pow_p(2, -hm) * BigRational::from_integer(BigInt::from(3))
            + rat_pow_p(2, 1 - m as i64) * BigRational::from_integer(BigInt::from(2))
            + rat_pow_p(2, -(m as i64)));

    // full identity: C*_Q frakC_Q against the closed-form C*_E
    let lhs = c_star(q).mul(frak_c_q(ctx, cutoff)?.result);
    let zn = zeta((3 * m) as f64 / 2.0 - 2.0)?;
    let zd = zeta(m as f64 / 2.0)?;
    let mut prod = Bounded::exact(1.0);
    for p in arith::primes_up_to(cutoff) {
        prod = prod.mul(Bounded::from_rational(&generic_factor(p, m, 1)));
    }
    let prod = prod.widen_log(4.0 / (cutoff as f64 - 1.0));
    let c_star_e =
        Bounded::exact((2.0 * PI).powi((m / 2) as i32) / ((3 * m - 4) as f64 * gamma_half_m(m)))
            .mul(zn)
            .div(zd)
            .mul(prod);
    let discrepancy = lhs.sub(c_star_e).div(c_star_e).abs();
    Ok(LevelOneReport {
        discrepancy,
        series,
        closed,
    })
}

#[derive(Debug, Clone)]
pub struct SumSquaresReport {
    pub a: BigRational,
    pub b: BigRational,
    /// |bad block - G_2(1, 2k-1)| (exact, should be at tail scale).
    pub block_vs_g2: BigRational,
    /// Largest |lhs/rhs - 1| over the odd-prime factor identity, p <= 50.
    pub factor_mismatch: BigRational,
    /// Relative discrepancy of the full constant identity.
    pub discrepancy: Bounded,
}

/// G_2(s, w) of the sum-of-squares analysis at integer arguments, exact.
fn g2_exact(s: i64, w: i64, k: i64, a: &BigRational, b: &BigRational) -> BigRational {
    let one = BigRational::one();
    let mut head = BigRational::one();
    for j in 1..=3i64 {
        head *= &one - rat_pow_p(2, -(s + j * w - j * (2 * k - 1)));
    }
    let num1 = &one + rat_pow_p(2, -w + 2 * k - 1) + rat_pow_p(2, -2 * w + 2 * (2 * k - 1));
    let den1 = rat_pow_p(2, s + w - (2 * k - 1)) - rat_pow_p(2, -2 * w + 2 * (2 * k - 1));
    let num2 = rat_pow_p(2, -s - w) * (&one + rat_pow_p(2, -w) + rat_pow_p(2, -2 * w));
    let den2 = &one - rat_pow_p(2, -s - 3 * w);
    head * (&one + a * num1 / den1 - b * num2 / den2)
}

/// G_p(s, w) for odd p at integer arguments, exact.
fn gp_exact(p: u64, s: i64, w: i64, k: i64) -> BigRational {
    let one = BigRational::one();
    let body = &one
        + (rat_pow_p(p, 2 * k - 1) + &one) * rat_pow_p(p, -(s + w))
        + (rat_pow_p(p, 2 * (2 * k - 1)) + rat_pow_p(p, 2 * k - 1) + &one)
            * rat_pow_p(p, -(s + 2 * w))
        + (rat_pow_p(p, 4 * k - 2) + rat_pow_p(p, 2 * k - 1)) * rat_pow_p(p, -(s + 3 * w))
        + rat_pow_p(p, 4 * k - 2) * rat_pow_p(p, -(2 * s + 4 * w));
    let t1 = &one - rat_pow_p(p, 2 * k - 1) * rat_pow_p(p, -(s + w));
    let t2 = &one - rat_pow_p(p, 2 * (2 * k - 1)) * rat_pow_p(p, -(s + 2 * w));
    let t3 = &one - rat_pow_p(p, -(s + 3 * w));
    body * t1 * t2 / t3
}

/// Full check of the sum-of-squares constant identity for m in {4, 8}.
pub fn verify_sum_squares(m: usize, cutoff: u64) -> Result<SumSquaresReport> {
    if m != 4 && m != 8 {
        return Err(Error::UnsupportedM(m));
    }
    let k = (m / 4) as i64; // the multiple in m = 4k
    let one = BigRational::one();
    let sign = if k % 2 == 0 {
        one.clone()
    } else {
        -one.clone()
    };
    let a = &one - &sign / (&one - rat_pow_p(2, 2 * k - 1));
    let b = &sign * (&one - rat_pow_p(2, 2 * k)) / (&one - rat_pow_p(2, 2 * k - 1));

    let q = crate::fixtures::sum_of_squares(m);
    let ctx = DensityContext::new(q.clone());

    // (1-1/2)^4 * delta series = G_2(1, 2k-1), exactly up to truncation
    let (block, _tail) = bad_prime_block(&ctx, 2)?;
    let g2 = g2_exact(1, 2 * k - 1, k, &a, &b);
    let block_vs_g2 = (&block - &g2).abs();

    // odd-prime factor identity, exact, p <= 50
    let mut factor_mismatch = BigRational::zero();
    for p in arith::primes_up_to(50).into_iter().filter(|&p| p > 2) {
        let lhs = generic_factor(p, m, 1) / (&one - rat_pow_p(p, -(3 * (m as i64) / 2 - 2)));
        let rhs = gp_exact(p, 1, 2 * k - 1, k);
        let rel = ((lhs / rhs) - &one).abs();
        if rel > factor_mismatch {
            factor_mismatch = rel;
        }
    }

    // full identity
    let lhs = c_star(&q).mul(frak_c_q(&ctx, cutoff)?.result);
    let mut prod = Bounded::from_rational(&g2);
    for p in arith::primes_up_to(cutoff).into_iter().filter(|&p| p > 2) {
        prod = prod.mul(Bounded::from_rational(&gp_exact(p, 1, 2 * k - 1, k)));
    }
    let prod = prod.widen_log(4.0 / (cutoff as f64 - 1.0));
    let zd = zeta(m as f64 / 2.0)?;
    let scale = PI.powi((m / 2) as i32)
        / ((1.0 - 0.5f64.powi((m / 2) as i32)) * gamma_half_m(m) * (3 * m - 4) as f64);
    let rhs = Bounded::exact(scale).div(zd).mul(prod);
    let discrepancy = lhs.sub(rhs).div(rhs).abs();

    Ok(SumSquaresReport {
        a,
        b,
        block_vs_g2,
        factor_mismatch,
        discrepancy,
    })
}

// ---------------------------------------------------------------------------
// Euler factors of the two-variable Dirichlet series
// ---------------------------------------------------------------------------

/// Check that (s, w) lies in the absolute-convergence region.
fn check_region(m: usize, s: f64, w: f64) -> Result<()> {
    let k = (m / 2) as f64;
    let min = (0..=3)
        .map(|j| (3 - j) as f64 * s + j as f64 * (w - k + 1.0))
        .fold(f64::INFINITY, f64::min);
    if min < 0.5 + 1e-9 {
        return Err(Error::Domain(format!(
            "(s, w) = ({s}, {w}) outside the convergence region (min exponent {min})"
        )));
    }
    Ok(())
}

/// Euler factor of the Dirichlet series F(s, w) at one prime (real
/// arguments).
pub fn euler_factor_gp(ctx: &DensityContext, p: u64, s: f64, w: f64) -> Result<Bounded> {
    let q = ctx.form();
    let m = q.m();
    check_region(m, s, w)?;
    let k = (m / 2) as f64;
    let inv = ctx.invariants();
    let four_d = (4 * inv.disc) as i64;
    if (2 * inv.disc).rem_euclid(p as i128) != 0 {
        let c = arith::chi(four_d, p) as f64;
        let pf = p as f64;
        let e1 = pf.powf(-(2.0 * s + w - k + 1.0));
        let e2 = pf.powf(-(s + 2.0 * (w - k + 1.0)));
        let body = 1.0
            + e1
            + e2
            + c * pf.powf(-(2.0 * s + w))
            + c * pf.powf(-(s + 2.0 * w - k + 1.0))
            + c * pf.powf(-(3.0 * w - 2.0 * k + 2.0))
            + c * c * pf.powf(-(s + 2.0 * w))
            + c * c * pf.powf(-(3.0 * w - k + 1.0))
            + c * c * pf.powf(-(2.0 * s + 4.0 * w - 2.0 * k + 2.0));
        Ok(Bounded::exact((1.0 - e1) * (1.0 - e2) * body))
    } else {
        // bad prime: product of the four zeta-factor heads times the
        // truncated delta double series
        let pf = p as f64;
        let mut head = 1.0f64;
        for j in 0..=3 {
            head *= 1.0 - pf.powf(-((3 - j) as f64 * s + j as f64 * (w - k + 1.0)));
        }
        let mut series = 0.0f64;
        let mut sup: f64 = 1.0;
        for d in 0..=BAD_BLOCK_DMAX {
            for nu in 0..=(3 * d) {
                let delta = rational_to_f64(&ctx.delta_bad_prime_power(p, nu as u32)?);
                sup = sup.max(delta);
                series += delta * pf.powf(-((3 * d - nu) as f64 * s + nu as f64 * (w - k + 1.0)));
            }
        }
        // tail: each d > dmax contributes at most (3d+1) sup p^{-min exponent * 3d / 3 ...}
        let decay = pf.powf(-3.0 * s.min(w - k + 1.0));
        let dm = BAD_BLOCK_DMAX as f64;
        let tail = sup * decay.powf(dm + 1.0) * (3.0 * dm + 4.0) / (1.0 - decay).max(1e-9);
        let mut b = Bounded::exact(head * series);
        b.error += head.abs() * tail;
        Ok(b)
    }
}

#[derive(Debug, Clone)]
pub struct DirichletReport {
    pub lhs: Bounded,
    pub rhs: Bounded,
    pub discrepancy: f64,
}

/// Compares the truncated double Dirichlet sum of 1_3(an) n^{k-1} S(n, Q)
/// a^{-s} n^{-w} against the factored form zeta-product x G(s, w).
pub fn dirichlet_check(
    ctx: &DensityContext,
    s: f64,
    w: f64,
    n_cut: u64,
) -> Result<DirichletReport> {
    let q = ctx.form();
    let m = q.m();
    check_region(m, s, w)?;
    let k = q.k();
    let inv = ctx.invariants();
    let four_d = (4 * inv.disc) as i64;
    let l_k = l_chi(k as f64, four_d)?;

    // left side: sum over pairs (a, n) with a n a perfect cube
    let mut lhs_sum = 0.0f64;
    let cmax = arith::iroot(n_cut.saturating_mul(n_cut), 3) + 1;
    for c in 1..=cmax {
        let cube = c
            .checked_pow(3)
            .ok_or(Error::ResourceLimit("cube overflow".into()))?;
        if cube > n_cut * n_cut {
            continue;
        }
        for a in arith::divisors(cube) {
            let n = cube / a;
            if a > n_cut || n > n_cut {
                continue;
            }
            let sigma = arith::sigma_chi(n, k, four_d)?;
            let varpi = ctx.varpi(n)?;
            let rational_part = rational_to_f64(&(sigma * varpi));
            let sfrak = rational_part / l_k.value;
            lhs_sum +=
                (n as f64).powi(k as i32 - 1) * sfrak / ((a as f64).powf(s) * (n as f64).powf(w));
        }
    }
    let lhs = Bounded::new(lhs_sum, lhs_sum.abs() * 1e-10);

    // right side
    let kf = k as f64;
    let mut rhs = Bounded::exact(1.0);
    for j in 0..=3 {
        rhs = rhs.mul(zeta((3 - j) as f64 * s + j as f64 * (w - kf + 1.0))?);
    }
    let l3w = l_chi(3.0 * w, four_d)?;
    rhs = rhs.mul(l3w).div(l_k);
    let prime_cut = 10_000u64;
    for p in arith::primes_up_to(prime_cut) {
        rhs = rhs.mul(euler_factor_gp(ctx, p, s, w)?);
    }
    let rhs = rhs.widen_log(8.0 / (prime_cut as f64 - 1.0));

    let discrepancy = ((lhs.value - rhs.value) / rhs.value).abs();
    Ok(DirichletReport {
        lhs,
        rhs,
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn zeta_classical_values() {
        let z2 = zeta(2.0).unwrap();
        assert!(z2.contains(PI * PI / 6.0));
        assert!(z2.error < 1e-9);
        let z3 = zeta(3.0).unwrap();
        assert!((z3.value - 1.2020569031595942).abs() < 1e-10);
        let z4 = zeta(4.0).unwrap();
        assert!(z4.contains(PI.powi(4) / 90.0));
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn l_chi_e8_collapses_to_even_zeta() {
        // chi mod 4 is trivial on odd numbers for the E8 form.
        let q = fixtures::e8();
        let l4 = l_chi_form(4.0, &q).unwrap();
        let expect = (1.0 - 0.0625) * zeta(4.0).unwrap().value;
        assert!((l4.value - expect).abs() < 1e-9);
    }

    #[test]
    fn l_chi_four_squares() {
        // chi mod 64 is 1 on odd q: L(2) = (1 - 1/4) zeta(2) = pi^2 / 8.
        let q = fixtures::sum_of_squares(4);
        let l2 = l_chi_form(2.0, &q).unwrap();
        assert!((l2.value - PI * PI / 8.0).abs() < 1e-6, "{}", l2.value);
    }

    #[test]
    fn l_chi_six_squares_is_catalan_like() {
        // chi = (-1/q): L(2, chi) is Catalan's constant.
        let q = fixtures::sum_of_squares(6);
        let l2 = l_chi_form(2.0, &q).unwrap();
        assert!((l2.value - 0.9159655941772190).abs() < 1e-6, "{}", l2.value);
    }

    #[test]
    fn bounded_enclosures_nest() {
        // recomputing zeta at a larger cutoff lands inside the bound
        let a = zeta_uncached(2.0).unwrap();
        assert!(a.contains(PI * PI / 6.0));
        let b = Bounded::exact(2.0).mul(Bounded::exact(3.0));
        assert!(b.contains(6.0));
        let c = b.div(Bounded::exact(4.0));
        assert!(c.contains(1.5));
    }

    #[test]
    fn generating_function_identity() {
        // sum_d (3d+1) x^d = (1 + 2x) / (1-x)^2: replacing delta == 1 in the
        // bad block reproduces the generic-factor shape.
        let x = BigRational::new(BigInt::from(1), BigInt::from(7));
        let one = BigRational::one();
        let mut lhs = BigRational::zero();
        let mut xd = BigRational::one();
        for d in 0..400i64 {
            lhs += BigRational::from_integer(BigInt::from(3 * d + 1)) * &xd;
            xd *= &x;
        }
        let rhs = (&one + &x + &x) / ((&one - &x) * (&one - &x));
        let diff = (lhs - rhs).abs();
        assert!(diff < BigRational::new(BigInt::from(1), BigInt::from(10).pow(40)));

        // full block shape: (1-1/p)^4 sum_d (3d+1) p^-d = (1-1/p)^2 (1+2/p),
        // the generic factor at chi(p) = 0, for any m
        for p in [2u64, 3, 5] {
            let xp = BigRational::new(BigInt::one(), BigInt::from(p));
            let head = (&one - &xp) * (&one - &xp);
            let mut series = BigRational::zero();
            let mut xd = BigRational::one();
            for d in 0..300i64 {
                series += BigRational::from_integer(BigInt::from(3 * d + 1)) * &xd;
                xd *= &xp;
            }
            let block = &head * &head * series;
            let generic = generic_factor(p, 4, 0);
            assert!(
                (block - generic).abs()
                    < BigRational::new(BigInt::one(), BigInt::from(10).pow(30)),
                "p={p}"
            );
        }
    }

    #[test]
    fn c_star_examples() {
        let c4 = c_star(&fixtures::sum_of_squares(4));
        assert!((c4.value - 2.0 * PI * PI).abs() < 1e-9);
        let ce8 = c_star(&fixtures::e8());
        assert!((ce8.value - 32.0 * PI.powi(4) / 6.0).abs() < 1e-7);
    }

    #[test]
    fn leading_constant_ratios() {
        let ctx = DensityContext::new(fixtures::sum_of_squares(4));
        let lc = leading_constants(&ctx, 2000).unwrap();
        let ratio = lc.c.value / lc.c_star.value;
        let expect = 1.0 / (9.0 * zeta(3.0).unwrap().value);
        assert!((ratio - expect).abs() < 1e-12);
        assert!(lc.predicted_nstar_leading.is_some());
    }

    #[test]
    fn ab_coefficients() {
        let r4 = verify_sum_squares(4, 2000).unwrap();
        assert_eq!(r4.a, BigRational::zero());
        assert_eq!(r4.b, BigRational::from_integer(BigInt::from(-3)));
        let r8 = verify_sum_squares(8, 2000).unwrap();
        assert_eq!(r8.a, BigRational::new(BigInt::from(8), BigInt::from(7)));
        assert_eq!(r8.b, BigRational::new(BigInt::from(15), BigInt::from(7)));
    }

    #[test]
    fn sum_squares_identity_small_cutoff() {
        let r = verify_sum_squares(4, 5000).unwrap();
        // exact algebraic pieces
        let tol = BigRational::new(BigInt::one(), BigInt::from(2).pow(40));
        assert!(r.block_vs_g2 < tol, "{}", r.block_vs_g2);
        assert_eq!(r.factor_mismatch, BigRational::zero());
        assert!(r.discrepancy.value < 2e-3, "{}", r.discrepancy.value);
        assert!(verify_sum_squares(6, 100).is_err());
    }

    #[test]
    fn level_one_identity_small_cutoff() {
        let ctx = DensityContext::new(fixtures::e8());
        let r = verify_level_one(&ctx, 5000).unwrap();
        let tol = BigRational::new(BigInt::one(), BigInt::from(2).pow(40));
        assert!((&r.series - &r.closed).abs() < tol);
        assert!(r.discrepancy.value < 2e-3, "{}", r.discrepancy.value);

        let bad = DensityContext::new(fixtures::sum_of_squares(4));
        assert!(matches!(
            verify_level_one(&bad, 100),
            Err(Error::NotLevelOne(4))
        ));
    }

    #[test]
    fn good_euler_factor_near_one() {
        let ctx = DensityContext::new(fixtures::sum_of_squares(4));
        let k = 2.0;
        for p in [11u64, 13, 17, 19, 101] {
            let g = euler_factor_gp(&ctx, p, 2.0, k + 1.0).unwrap();
            assert!(
                (g.value - 1.0).abs() <= 10.0 / p as f64,
                "p={p}: {}",
                g.value
            );
        }
    }

    #[test]
    fn euler_products_positive_and_nested() {
        // doubling the cutoff lands inside the previous enclosure
        for q in fixtures::battery() {
            let cw1 = frak_c_w(&q, 2_000).unwrap();
            let cw2 = frak_c_w(&q, 20_000).unwrap();
            assert!(cw1.result.value > 0.0);
            assert!(
                cw1.result.contains(cw2.result.value),
                "m={}: {:?} does not contain {}",
                q.m(),
                cw1.result,
                cw2.result.value
            );
            let ctx = DensityContext::new(q);
            if ctx.ld_condition().unwrap().satisfied {
                let cq1 = frak_c_q(&ctx, 2_000).unwrap();
                let cq2 = frak_c_q(&ctx, 20_000).unwrap();
                assert!(cq1.result.value > 0.0);
                assert!(cq1.result.contains(cq2.result.value));
            }
        }
        // non-locally-determined forms are rejected by frak_c_q
        let six = DensityContext::new(fixtures::sum_of_squares(6));
        assert!(matches!(
            frak_c_q(&six, 100),
            Err(Error::ConditionNotSatisfied(_))
        ));
    }

    #[test]
    fn dirichlet_trend_on_e8() {
        let ctx = DensityContext::new(fixtures::e8());
        let d1 = dirichlet_check(&ctx, 2.0, 5.0, 100).unwrap().discrepancy;
        let d2 = dirichlet_check(&ctx, 2.0, 5.0, 1000).unwrap().discrepancy;
        assert!(d2 <= d1, "{d1} {d2}");
        assert!(d2 < 0.01, "{d2}");
    }

    #[test]
    fn dirichlet_rejects_outside_convergence_region() {
        let ctx = DensityContext::new(fixtures::sum_of_squares(4));
        assert!(matches!(
            dirichlet_check(&ctx, 0.05, 1.0, 100),
            Err(Error::Domain(_))
        ));
    }
}
