//! Exact representation counts r(n, Q), the height-bounded point counters
//! N*_Q(B) and N_Q(B), and the partial sums S_Q, S_W with trend fits.
//!
//! Enumeration bounds are exact: scaled-integer LDL^t pivots with integer
//! square roots, no floating-point pruning.

use num::rational::BigRational;
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::arith;
use crate::constants::{l_chi, Bounded};
use crate::density::DensityContext;
use crate::error::{Error, Result};
use crate::qform::QuadraticForm;

const MAXM: usize = 16;
const ENUM_POINT_BUDGET: f64 = 4e9;

// ---------------------------------------------------------------------------
// exact lattice enumeration
// ---------------------------------------------------------------------------

/// Enumerator for one positive definite integer form (not necessarily
/// primitive), over the Siegel matrix `a`.
struct LatticeEnumerator {
    m: usize,
    a: Vec<i64>,
    /// Common denominator of the LDL data.
    g: i128,
    /// d_i * g, with d_i the LDL pivot of coordinate i.
    dhat: Vec<i128>,
    /// l_ij * g for j > i (row-major m x m).
    lhat: Vec<i128>,
}

#[derive(Clone, Copy)]
struct NodeState {
    chat: [i128; MAXM],
    lin: [i64; MAXM],
    qsuf: i64,
    shat: i128,
}

impl NodeState {
    fn root() -> Self {
        NodeState {
            chat: [0; MAXM],
            lin: [0; MAXM],
            qsuf: 0,
            shat: 0,
        }
    }
}

fn floor_div(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -((-a).div_euclid(b))
}

impl LatticeEnumerator {
    fn new(a: &[i64], m: usize) -> Result<Self> {
        assert!(m >= 1 && m <= MAXM && a.len() == m * m);
        // LDL of M = A/2 over the rationals
        let mut w: Vec<BigRational> = a
            .iter()
            .map(|&v| BigRational::new(BigInt::from(v), BigInt::from(2)))
            .collect();
        let mut d = vec![BigRational::zero(); m];
        let mut l = vec![BigRational::zero(); m * m];
        for i in 0..m {
            let di = w[i * m + i].clone();
            if !di.is_positive() {
                return Err(Error::NotPositiveDefinite(i + 1));
            }
            for j in i + 1..m {
                l[i * m + j] = &w[i * m + j] / &di;
            }
            for r in i + 1..m {
                for c in i + 1..m {
                    let delta = &di * &l[i * m + r] * &l[i * m + c];
                    w[r * m + c] -= delta;
                }
            }
            d[i] = di;
        }
        // common scale
        let mut g = BigInt::one();
        for x in d.iter().chain(l.iter()) {
            g = num::integer::lcm(g, x.denom().clone());
        }
        let g128 = g
            .to_i128()
            .ok_or(Error::ResourceLimit("LDL scale overflow".into()))?;
        let to_scaled = |x: &BigRational| -> Result<i128> {
            let v = x * BigRational::from_integer(g.clone());
            debug_assert!(v.is_integer());
            v.to_integer()
                .to_i128()
                .ok_or(Error::ResourceLimit("LDL entry overflow".into()))
        };
        let dhat = d.iter().map(to_scaled).collect::<Result<Vec<_>>>()?;
        let lhat = l.iter().map(to_scaled).collect::<Result<Vec<_>>>()?;
        Ok(LatticeEnumerator {
            m,
            a: a.to_vec(),
            g: g128,
            dhat,
            lhat,
        })
    }

    fn from_form(q: &QuadraticForm) -> Result<Self> {
        Self::new(q.matrix(), q.m())
    }

    /// Range of the coordinate at `level` given the node state.
    fn coord_range(&self, level: usize, st: &NodeState, nhat: i128) -> (i64, i64) {
        let budget = nhat - st.shat;
        debug_assert!(budget >= 0);
        let q = budget / self.dhat[level];
        let t = (q as u128).isqrt() as i128;
        let c = st.chat[level];
        let lo = ceil_div(-c - t, self.g);
        let hi = floor_div(t - c, self.g);
        (lo as i64, hi as i64)
    }

    fn child(&self, level: usize, st: &NodeState, y: i64) -> NodeState {
        let mut ch = *st;
        let y128 = y as i128;
        let u = y128 * self.g + st.chat[level];
        // term * g^3 = (d g)(y g + c g)^2, an exact integer
        ch.shat += self.dhat[level] * u * u;
        for i in 0..level {
            ch.chat[i] += self.lhat[i * self.m + level] * y128;
            ch.lin[i] += self.a[i * self.m + level] * y;
        }
        ch.qsuf += (self.a[level * self.m + level] / 2) * y * y + st.lin[level] * y;
        ch
    }

    /// Histogram of Q over {y : 0 <= Q(y) <= n_max}, counts[v] = #points.
    fn histogram(&self, n_max: i64) -> Result<Vec<u64>> {
        self.check_budget(n_max)?;
        let nhat = self.nhat(n_max);
        let root = NodeState::root();
        let top = self.m - 1;
        if self.m == 1 {
            let mut hist = vec![0u64; n_max as usize + 1];
            self.leaf_loop(&root, nhat, n_max, &mut hist);
            return Ok(hist);
        }
        let (lo, hi) = self.coord_range(top, &root, nhat);
        // parallel over top-level slabs when the workload warrants it
        let est = self.volume_estimate(n_max);
        if est > 2e7 && hi >= lo {
            let ys: Vec<i64> = (lo..=hi).collect();
            let hist = ys
                .par_chunks(((ys.len() / 64) + 1).max(1))
                .map(|chunk| {
                    let mut h = vec![0u64; n_max as usize + 1];
                    for &y in chunk {
                        let ch = self.child(top, &root, y);
                        self.descend(top - 1, &ch, nhat, n_max, &mut h);
                    }
                    h
                })
                .reduce(
                    || vec![0u64; n_max as usize + 1],
                    |mut a, b| {
                        for (x, y) in a.iter_mut().zip(b) {
                            *x += y;
                        }
                        a
                    },
                );
            Ok(hist)
        } else {
            let mut hist = vec![0u64; n_max as usize + 1];
            for y in lo..=hi {
                let ch = self.child(top, &root, y);
                self.descend(top - 1, &ch, nhat, n_max, &mut hist);
            }
            Ok(hist)
        }
    }

    fn descend(&self, level: usize, st: &NodeState, nhat: i128, n_max: i64, hist: &mut [u64]) {
        if level == 0 {
            self.leaf_loop(st, nhat, n_max, hist);
            return;
        }
        let (lo, hi) = self.coord_range(level, st, nhat);
        for y in lo..=hi {
            let ch = self.child(level, st, y);
            self.descend(level - 1, &ch, nhat, n_max, hist);
        }
    }

    #[inline]
    fn leaf_loop(&self, st: &NodeState, nhat: i128, n_max: i64, hist: &mut [u64]) {
        let (lo, hi) = self.coord_range(0, st, nhat);
        if hi < lo {
            return;
        }
        let a0 = self.a[0] / 2;
        let b = st.lin[0];
        let mut n = a0 * lo * lo + b * lo + st.qsuf;
        let mut step = a0 * (2 * lo + 1) + b;
        for _ in lo..=hi {
            debug_assert!(n >= 0 && n <= n_max);
            hist[n as usize] += 1;
            n += step;
            step += 2 * a0;
        }
    }

    /// Visits every point with 0 <= Q(y) <= n_max, passing (y, Q(y)).
    fn visit_points<F: FnMut(&[i64], i64)>(&self, n_max: i64, f: &mut F) -> Result<()> {
        self.check_budget(n_max)?;
        let nhat = self.nhat(n_max);
        let mut y = vec![0i64; self.m];
        self.visit_rec(self.m - 1, &NodeState::root(), nhat, n_max, &mut y, f);
        Ok(())
    }

    fn visit_rec<F: FnMut(&[i64], i64)>(
        &self,
        level: usize,
        st: &NodeState,
        nhat: i128,
        n_max: i64,
        y: &mut Vec<i64>,
        f: &mut F,
    ) {
        let (lo, hi) = self.coord_range(level, st, nhat);
        if level == 0 {
            let a0 = self.a[0] / 2;
            let b = st.lin[0];
            for v in lo..=hi {
                let n = a0 * v * v + b * v + st.qsuf;
                y[0] = v;
                f(y, n);
            }
            return;
        }
        for v in lo..=hi {
            y[level] = v;
            let ch = self.child(level, st, v);
            self.visit_rec(level - 1, &ch, nhat, n_max, y, f);
        }
    }

    fn nhat(&self, n_max: i64) -> i128 {
        n_max as i128 * self.g * self.g * self.g
    }

    fn volume_estimate(&self, n_max: i64) -> f64 {
        let m = self.m;
        let mut det = 1.0f64;
        for i in 0..m {
            det *= self.dhat[i] as f64 / self.g as f64 * 2.0;
        }
        let mut gamma = 1.0f64;
        for j in 1..=(m / 2) {
            gamma *= j as f64;
        }
        let half_extra = if m % 2 == 1 {
            (m as f64 / 2.0).sqrt()
        } else {
            1.0
        };
        (2.0 * std::f64::consts::PI * n_max as f64).powf(m as f64 / 2.0)
            / (gamma * half_extra * det.sqrt())
    }

    fn check_budget(&self, n_max: i64) -> Result<()> {
        if self.volume_estimate(n_max) > ENUM_POINT_BUDGET {
            return Err(Error::ResourceLimit(format!(
                "enumeration of ~{:.2e} lattice points exceeds the budget",
                self.volume_estimate(n_max)
            )));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// representation tables
// ---------------------------------------------------------------------------

/// `counts[n]` = r(n, Q) for 1 <= n <= n_max; `counts[0]` = 1 is the origin.
#[derive(Debug, Clone)]
pub struct RepTable {
    pub n_max: u64,
    pub counts: Vec<u64>,
}

impl RepTable {
    pub fn r(&self, n: u64) -> u64 {
        self.counts[n as usize]
    }

    /// Total number of lattice points with Q <= n_max, origin included.
    pub fn census(&self) -> u128 {
        self.counts.iter().map(|&c| c as u128).sum()
    }
}

fn connected_components(q: &QuadraticForm) -> Vec<Vec<usize>> {
    let m = q.m();
    let mut seen = vec![false; m];
    let mut comps = Vec::new();
    for start in 0..m {
        if seen[start] {
            continue;
        }
        let mut stack = vec![start];
        let mut comp = Vec::new();
        seen[start] = true;
        while let Some(i) = stack.pop() {
            comp.push(i);
            for j in 0..m {
                if j != i && !seen[j] && q.a(i, j) != 0 {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        comp.sort();
        comps.push(comp);
    }
    comps
}

fn submatrix(q: &QuadraticForm, idx: &[usize]) -> Vec<i64> {
    let k = idx.len();
    let mut a = vec![0i64; k * k];
    for (r, &ir) in idx.iter().enumerate() {
        for (c, &ic) in idx.iter().enumerate() {
            a[r * k + c] = q.a(ir, ic);
        }
    }
    a
}

fn convolve_truncated(acc: Vec<u64>, h: &[u64]) -> Vec<u64> {
    let n = acc.len() - 1;
    let nz: Vec<(usize, u64)> = h
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0)
        .map(|(v, &c)| (v, c))
        .collect();
    if (n + 1) as u128 * nz.len() as u128 > 1 << 28 {
        // out[x] = sum over v <= x of cnt_v acc[x - v], chunked over x
        let mut out = vec![0u64; n + 1];
        out.par_chunks_mut(1 << 14)
            .enumerate()
            .for_each(|(chunk_idx, chunk)| {
                let base = chunk_idx << 14;
                for (off, slot) in chunk.iter_mut().enumerate() {
                    let x = base + off;
                    let mut s = 0u64;
                    for &(v, cnt) in &nz {
                        if v > x {
                            break;
                        }
                        s += acc[x - v] * cnt;
                    }
                    *slot = s;
                }
            });
        out
    } else {
        let mut out = vec![0u64; n + 1];
        for &(v, cnt) in &nz {
            for t in 0..=(n - v) {
                out[t + v] += acc[t] * cnt;
            }
        }
        out
    }
}

/// Exact counts r(n, Q) for all n <= n_max.
///
/// Orthogonal components (blocks of the Siegel matrix) are enumerated
/// separately and their value histograms convolved; a single recursive
/// enumeration over the whole lattice would visit every point.
pub fn rep_table(q: &QuadraticForm, n_max: u64) -> Result<RepTable> {
    if n_max >= 1 << 27 {
        return Err(Error::ResourceLimit(format!(
            "representation table with {n_max} entries"
        )));
    }
    let comps = connected_components(q);
    let n = n_max as i64;
    let mut acc: Vec<u64> = vec![0; n_max as usize + 1];
    acc[0] = 1;
    for comp in &comps {
        let sub = submatrix(q, comp);
        let en = LatticeEnumerator::new(&sub, comp.len())?;
        let h = en.histogram(n)?;
        acc = convolve_truncated(acc, &h);
    }
    Ok(RepTable { n_max, counts: acc })
}

/// Independent census of {y : Q(y) <= n_max} by a plain box scan; test
/// oracle for the enumeration engine (small m only).
pub fn census_box(q: &QuadraticForm, n_max: u64) -> Result<u128> {
    let m = q.m();
    let det = q.invariants().det_a;
    let mut radii = Vec::with_capacity(m);
    for i in 0..m {
        let adj = q.adjugate_entry(i, i);
        let bound = 2 * n_max as i128 * adj / det;
        radii.push((bound.max(0) as u128).isqrt() as i64);
    }
    let total: f64 = radii.iter().map(|&r| (2 * r + 1) as f64).product();
    if total > 3e8 {
        return Err(Error::ResourceLimit(format!("box of {total:.1e} points")));
    }
    let mut count = 0u128;
    let mut y = vec![0i64; m];
    fn rec(
        q: &QuadraticForm,
        radii: &[i64],
        depth: usize,
        y: &mut Vec<i64>,
        n_max: i64,
        count: &mut u128,
    ) {
        if depth == q.m() {
            if q.evaluate(y).unwrap() <= n_max {
                *count += 1;
            }
            return;
        }
        for v in -radii[depth]..=radii[depth] {
            y[depth] = v;
            rec(q, radii, depth + 1, y, n_max, count);
        }
    }
    rec(q, &radii, 0, &mut y, n_max as i64, &mut count);
    Ok(count)
}

// ---------------------------------------------------------------------------
// point counters
// ---------------------------------------------------------------------------

/// N*_Q at a real height parameter x = t/d: the two constraints floor
/// separately, z <= floor(x) and n <= floor(x^2).
fn n_star_rational_height(rep: &RepTable, t: u64, d: u64) -> Result<u64> {
    let a_max = t / d;
    let n_max = (t * t) / (d * d);
    if n_max > rep.n_max {
        return Err(Error::InvalidArgument(format!(
            "table covers n <= {}, need {n_max}",
            rep.n_max
        )));
    }
    let mut total: u64 = 0;
    let mut c = 1u64;
    while c * c * c <= a_max * n_max {
        let cube = c * c * c;
        // divisors of c^3 from the factorization of c
        let mut divs = vec![1u64];
        for (p, e) in arith::factorize(c) {
            let len = divs.len();
            let mut pk = 1u64;
            for _ in 0..3 * e {
                pk *= p;
                for i in 0..len {
                    divs.push(divs[i] * pk);
                }
            }
        }
        for a in divs {
            let n = cube / a;
            if a <= a_max && n <= n_max {
                total += rep.r(n);
            }
        }
        c += 1;
    }
    Ok(2 * total)
}

/// N*_Q(B) from a representation table covering B^2.
pub fn n_star_from_table(rep: &RepTable, b: u64) -> Result<u64> {
    if b == 0 {
        return Ok(0);
    }
    n_star_rational_height(rep, b, 1)
}

/// N*_Q(B) = 2 sum_{a <= B} sum_{n <= B^2} 1_3(a n) r(n, Q).
pub fn n_star(q: &QuadraticForm, b: u64) -> Result<u64> {
    if b == 0 {
        return Ok(0);
    }
    let rep = rep_table(q, b * b)?;
    n_star_from_table(&rep, b)
}

/// Cube-of-z weights: w[n] = #{1 <= z <= B : n z is a cube}.
fn cube_weights(b: u64) -> Vec<u32> {
    let n_max = b * b;
    let mut w = vec![0u32; n_max as usize + 1];
    for n in 1..=n_max {
        for z in 1..=b {
            if arith::cube_indicator(n * z) {
                w[n as usize] += 1;
            }
        }
    }
    w
}

/// Independent route to N*_Q(B): direct enumeration of y and z with the
/// accepted pairs counted per point. Both routes must agree exactly.
pub fn n_star_direct(q: &QuadraticForm, b: u64) -> Result<u64> {
    if b == 0 {
        return Ok(0);
    }
    let w = cube_weights(b);
    let n_max = (b * b) as i64;
    let mut total: u64 = 0;
    if q.m() == 4 {
        // plain box scan, fully independent of the LDL enumerator
        let det = q.invariants().det_a;
        let mut radii = Vec::new();
        for i in 0..q.m() {
            let adj = q.adjugate_entry(i, i);
            let bound = 2 * n_max as i128 * adj / det;
            radii.push((bound.max(0) as u128).isqrt() as i64);
        }
        let mut y = vec![0i64; 4];
        for y0 in -radii[0]..=radii[0] {
            y[0] = y0;
            for y1 in -radii[1]..=radii[1] {
                y[1] = y1;
                for y2 in -radii[2]..=radii[2] {
                    y[2] = y2;
                    for y3 in -radii[3]..=radii[3] {
                        y[3] = y3;
                        let n = q.evaluate(&y)?;
                        if n >= 1 && n <= n_max {
                            total += w[n as usize] as u64;
                        }
                    }
                }
            }
        }
    } else {
        let en = LatticeEnumerator::from_form(q)?;
        let h = en.histogram(n_max)?;
        for n in 1..=n_max as usize {
            total += h[n] * w[n] as u64;
        }
    }
    // z < 0 mirrors z > 0 with x -> -x
    Ok(2 * total)
}

/// N_Q(B) by Mobius inversion over N*_Q.
pub fn n_rational(q: &QuadraticForm, b: u64) -> Result<i64> {
    let t = arith::iroot(b, (q.m() - 1) as u32);
    n_rational_t(q, t)
}

/// Same with the inner height parameter T = B^{1/(m-1)} given directly.
pub fn n_rational_t(q: &QuadraticForm, t: u64) -> Result<i64> {
    if t == 0 {
        return Ok(0);
    }
    let rep = rep_table(q, t * t)?;
    n_rational_from_table(&rep, t)
}

/// Mobius inversion against a shared representation table (covering t^2).
///
/// The inner counts sit at the real height t/d: both constraints floor
/// separately (z <= floor(t/d), n <= floor(t^2/d^2)), following the height
/// definition verbatim.
pub fn n_rational_from_table(rep: &RepTable, t: u64) -> Result<i64> {
    let mut acc: i64 = 0;
    for d in 1..=t {
        let mu = arith::mobius(d);
        if mu != 0 {
            acc += mu as i64 * n_star_rational_height(rep, t, d)? as i64;
        }
    }
    Ok(acc)
}

/// n_star_direct for every B <= b_max in one sweep: the value histogram of
/// the direct scan is shared, only the z-weights vary with B.
pub fn n_star_direct_sweep(q: &QuadraticForm, b_max: u64) -> Result<Vec<u64>> {
    if b_max == 0 {
        return Ok(vec![0]);
    }
    let n_max = (b_max * b_max) as i64;
    let hist: Vec<u64> = if q.m() == 4 {
        let det = q.invariants().det_a;
        let mut radii = Vec::new();
        for i in 0..q.m() {
            let adj = q.adjugate_entry(i, i);
            let bound = 2 * n_max as i128 * adj / det;
            radii.push((bound.max(0) as u128).isqrt() as i64);
        }
        let mut h = vec![0u64; n_max as usize + 1];
        let mut y = vec![0i64; 4];
        for y0 in -radii[0]..=radii[0] {
            y[0] = y0;
            for y1 in -radii[1]..=radii[1] {
                y[1] = y1;
                for y2 in -radii[2]..=radii[2] {
                    y[2] = y2;
                    for y3 in -radii[3]..=radii[3] {
                        y[3] = y3;
                        let n = q.evaluate(&y)?;
                        if n <= n_max {
                            h[n as usize] += 1;
                        }
                    }
                }
            }
        }
        h
    } else {
        LatticeEnumerator::from_form(q)?.histogram(n_max)?
    };
    let mut out = vec![0u64; b_max as usize + 1];
    for (b, slot) in out.iter_mut().enumerate().skip(1) {
        let b = b as u64;
        let w = cube_weights(b);
        let mut total = 0u64;
        for n in 1..=(b * b) as usize {
            total += hist[n] * w[n] as u64;
        }
        *slot = 2 * total;
    }
    Ok(out)
}

/// Direct census of projective points: primitive tuples (x, y, z) with
/// x^3 = Q(y) z, H* <= T, x z != 0, up to the sign identification.
pub fn n_projective_t(q: &QuadraticForm, t: u64) -> Result<u64> {
    if t == 0 {
        return Ok(0);
    }
    let en = LatticeEnumerator::from_form(q)?;
    let n_max = (t * t) as i64;
    let mut count = 0u64;
    en.visit_points(n_max, &mut |y: &[i64], n: i64| {
        if n < 1 {
            return;
        }
        let mut gy = 0u64;
        for &v in y {
            gy = arith::gcd(gy, v.unsigned_abs());
        }
        for z in 1..=t {
            let cube = n as u64 * z;
            if let Some(x) = arith::icbrt(cube) {
                if x <= t && arith::gcd(gy, arith::gcd(x, z)) == 1 {
                    count += 1;
                }
            }
        }
    })?;
    Ok(count)
}

pub fn n_projective(q: &QuadraticForm, b: u64) -> Result<u64> {
    n_projective_t(q, arith::iroot(b, (q.m() - 1) as u32))
}

/// All point counters at one height parameter, with the cross-check flags.
#[derive(Debug, Clone)]
pub struct CountReport {
    /// The H* height parameter (T for the rational/projective counts).
    pub b: u64,
    pub n_star: u64,
    pub n_star_direct: u64,
    pub n_rational: i64,
    pub n_projective: u64,
    /// n_star = n_star_direct and n_rational = 2 n_projective.
    pub consistent: bool,
}

pub fn count_report(q: &QuadraticForm, b: u64) -> Result<CountReport> {
    let rep = rep_table(q, b * b)?;
    let n_star = n_star_from_table(&rep, b)?;
    let n_star_direct = n_star_direct(q, b)?;
    let n_rational = n_rational_from_table(&rep, b)?;
    let n_projective = n_projective_t(q, b)?;
    let consistent = n_star == n_star_direct && n_rational == 2 * n_projective as i64;
    Ok(CountReport {
        b,
        n_star,
        n_star_direct,
        n_rational,
        n_projective,
        consistent,
    })
}

// ---------------------------------------------------------------------------
// the partial sums S_Q and S_W
// ---------------------------------------------------------------------------

/// Iterate the cube-coupled grid {(a, n) : a <= x, n <= y, a n a cube}.
fn for_cube_pairs<F: FnMut(u64, u64) -> Result<()>>(x: u64, y: u64, mut f: F) -> Result<()> {
    let cmax = arith::iroot(x.saturating_mul(y), 3);
    for c in 1..=cmax {
        let cube = c * c * c;
        for a in arith::divisors(cube) {
            let n = cube / a;
            if a <= x && n <= y {
                f(a, n)?;
            }
        }
    }
    Ok(())
}

/// S_W(x, y) = sum 1_3(a n) n^{k-1} sigma_{1-k}(n, chi), exact.
pub fn s_w_sum_exact(q: &QuadraticForm, x: u64, y: u64) -> Result<BigRational> {
    let k = q.k();
    let four_d = (4 * q.invariants().disc) as i64;
    let mut acc = BigRational::zero();
    for_cube_pairs(x, y, |_a, n| {
        let term =
            arith::sigma_chi(n, k, four_d)? * BigRational::from_integer(BigInt::from(n).pow(k - 1));
        acc += term;
        Ok(())
    })?;
    Ok(acc)
}

pub fn s_w_sum(q: &QuadraticForm, x: u64, y: u64) -> Result<Bounded> {
    Ok(Bounded::from_rational(&s_w_sum_exact(q, x, y)?))
}

/// S_Q(x, y) with the L-value factored out: sum 1_3(a n) n^{k-1}
/// sigma_{1-k}(n, chi) varpi(n, Q), exact.
pub fn s_q_sum_exact(ctx: &DensityContext, x: u64, y: u64) -> Result<BigRational> {
    let q = ctx.form();
    let k = q.k();
    let four_d = ctx.four_d();
    let mut acc = BigRational::zero();
    for_cube_pairs(x, y, |_a, n| {
        let term = arith::sigma_chi(n, k, four_d)?
            * ctx.varpi(n)?
            * BigRational::from_integer(BigInt::from(n).pow(k - 1));
        acc += term;
        Ok(())
    })?;
    Ok(acc)
}

/// S_Q(x, y) = (exact part) / L(k, chi), the L-value reapplied once.
pub fn s_q_sum(ctx: &DensityContext, x: u64, y: u64) -> Result<Bounded> {
    let exact = s_q_sum_exact(ctx, x, y)?;
    let l = l_chi(ctx.form().k() as f64, ctx.four_d())?;
    Ok(Bounded::from_rational(&exact).div(l))
}

// ---------------------------------------------------------------------------
// asymptotic trend fit
// ---------------------------------------------------------------------------

/// Least-squares fit of N/B^{m-1} against a quadratic in log B.
///
/// Returns (c2, c1, c0, residual).
pub fn fit_leading(b_values: &[u64], n_values: &[f64], m: usize) -> Result<(f64, f64, f64, f64)> {
    if b_values.len() != n_values.len() || b_values.len() < 6 {
        return Err(Error::InvalidArgument(
            "fit_leading needs at least 6 samples".into(),
        ));
    }
    if b_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("B values must increase".into()));
    }
    let rows: Vec<(f64, f64)> = b_values
        .iter()
        .zip(n_values)
        .map(|(&b, &n)| {
            let l = (b as f64).ln();
            (l, n / (b as f64).powi(m as i32 - 1))
        })
        .collect();
    // normal equations for [c2, c1, c0] against [l^2, l, 1]
    let mut ata = [[0.0f64; 3]; 3];
    let mut aty = [0.0f64; 3];
    for &(l, v) in &rows {
        let basis = [l * l, l, 1.0];
        for i in 0..3 {
            for j in 0..3 {
                ata[i][j] += basis[i] * basis[j];
            }
            aty[i] += basis[i] * v;
        }
    }
    let sol = solve3(ata, aty).ok_or(Error::DegenerateDesignMatrix)?;
    let mut resid = 0.0f64;
    for &(l, v) in &rows {
        let fitv = sol[0] * l * l + sol[1] * l + sol[2];
        resid += (v - fitv) * (v - fitv);
    }
    Ok((sol[0], sol[1], sol[2], resid.sqrt()))
}

fn solve3(mut a: [[f64; 3]; 3], mut y: [f64; 3]) -> Option<[f64; 3]> {
    let scale = a.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    for col in 0..3 {
        let piv =
            (col..3).max_by(|&r1, &r2| a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap())?;
        if a[piv][col].abs() < 1e-12 * scale.max(1.0) {
            return None;
        }
        a.swap(col, piv);
        y.swap(col, piv);
        for r in 0..3 {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in 0..3 {
                    a[r][c] -= f * a[col][c];
                }
                y[r] -= f * y[col];
            }
        }
    }
    Some([y[0] / a[0][0], y[1] / a[1][1], y[2] / a[2][2]])
}
