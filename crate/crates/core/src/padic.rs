//! Jordan normalization of the Gram matrix M = A/2 over Z_p, with verified
//! unimodular transforms.
//!
//! For odd p the form diagonalizes as diag(eps_h p^{alpha_h}). At p = 2 the
//! normal form mixes diagonal terms eps 2^a x^2, hyperbolic planes
//! eps' 2^b (x y), and plus planes eps'' 2^c (x^2 + x y + y^2); pairs of plus
//! planes at equal scale are rewritten as pairs of hyperbolic planes, and the
//! binary units are normalized to 1, so the block counts match the usual
//! canonical shape.

use crate::error::{Error, Result};
use crate::qform::QuadraticForm;

/// Jordan data over Z_p for odd p.
#[derive(Debug, Clone)]
pub struct JordanOdd {
    pub p: u64,
    /// Congruences are asserted mod p^k.
    pub k: u32,
    /// (alpha_h, eps_h mod p), sorted by alpha.
    pub blocks: Vec<(u32, u64)>,
    /// Column transform with U^t M U = diag, entries reduced mod p^ka.
    pub u: Vec<i128>,
    /// Exact M-scale diagonal entries mod p^ka, aligned with `blocks`.
    diag_m: Vec<i128>,
    pub(crate) ka: u32,
}

/// Jordan data over Z_2.
#[derive(Debug, Clone)]
pub struct JordanTwo {
    /// Congruences are asserted mod 2^k in M-scale.
    pub k: u32,
    /// (tilde alpha_h, tilde eps_h mod 8), sorted.
    pub diag: Vec<(u32, u8)>,
    /// (beta_i, eps'_i mod 8); units normalized to 1.
    pub hyper: Vec<(u32, u8)>,
    /// (gamma_j, eps''_j mod 8); units normalized to 1.
    pub three: Vec<(u32, u8)>,
    /// Column transform, entries reduced mod 2^ka (A-scale exponent).
    pub u: Vec<i128>,
    /// Exact M-scale diagonal entries for the R part, aligned with `diag`.
    diag_m: Vec<i128>,
    pub(crate) ka: u32,
}

/// Either decomposition, for the generic verifier.
#[derive(Debug, Clone)]
pub enum JordanDecomposition {
    Odd(JordanOdd),
    Two(JordanTwo),
}

impl From<JordanOdd> for JordanDecomposition {
    fn from(j: JordanOdd) -> Self {
        JordanDecomposition::Odd(j)
    }
}

impl From<JordanTwo> for JordanDecomposition {
    fn from(j: JordanTwo) -> Self {
        JordanDecomposition::Two(j)
    }
}

/// Re-checks the normal-form congruence and the unit determinant.
pub fn verify_equivalence(q: &QuadraticForm, dec: &JordanDecomposition) -> bool {
    match dec {
        JordanDecomposition::Odd(j) => j.verify(q),
        JordanDecomposition::Two(j) => j.verify(q),
    }
}

// ---------------------------------------------------------------------------
// modular scalar helpers (residues kept in [0, pk))
// ---------------------------------------------------------------------------

fn pow_u128(p: u64, k: u32) -> Option<i128> {
    let mut acc: i128 = 1;
    for _ in 0..k {
        acc = acc.checked_mul(p as i128)?;
        if acc > (1i128 << 62) {
            return None;
        }
    }
    Some(acc)
}

fn modn(x: i128, pk: i128) -> i128 {
    x.rem_euclid(pk)
}

fn mul(a: i128, b: i128, pk: i128) -> i128 {
    modn(a * b, pk)
}

/// Valuation of a residue; None means the residue is 0 mod pk.
fn nu(x: i128, p: u64, pk: i128) -> Option<u32> {
    let mut x = modn(x, pk);
    if x == 0 {
        return None;
    }
    let mut v = 0;
    while x % p as i128 == 0 {
        x /= p as i128;
        v += 1;
    }
    Some(v)
}

/// Inverse of a unit mod pk by extended Euclid.
fn inv_mod(a: i128, pk: i128) -> i128 {
    let (mut r0, mut r1) = (pk, modn(a, pk));
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    assert!(r0 == 1 || r0 == -1, "inverse of non-unit");
    modn(t0 * r0.signum(), pk)
}

// ---------------------------------------------------------------------------
// symmetric congruence transformer
// ---------------------------------------------------------------------------

struct SymState {
    m: usize,
    p: u64,
    pk: i128,
    /// A-scale matrix mod pk.
    a: Vec<i128>,
    /// Accumulated column transform mod pk.
    u: Vec<i128>,
}

impl SymState {
    fn new(q: &QuadraticForm, p: u64, pk: i128) -> Self {
        let m = q.m();
        let a = q.matrix().iter().map(|&v| modn(v as i128, pk)).collect();
        let mut u = vec![0i128; m * m];
        for i in 0..m {
            u[i * m + i] = 1;
        }
        SymState { m, p, pk, a, u }
    }

    fn at(&self, i: usize, j: usize) -> i128 {
        self.a[i * self.m + j]
    }

    /// col_i += s * col_j and the symmetric row operation.
    fn add_mul(&mut self, i: usize, j: usize, s: i128) {
        let m = self.m;
        assert_ne!(i, j);
        for r in 0..m {
            self.a[r * m + i] = modn(self.a[r * m + i] + s * self.a[r * m + j], self.pk);
        }
        for c in 0..m {
            self.a[i * m + c] = modn(self.a[i * m + c] + s * self.a[j * m + c], self.pk);
        }
        for r in 0..m {
            self.u[r * m + i] = modn(self.u[r * m + i] + s * self.u[r * m + j], self.pk);
        }
    }

    /// Right-multiply the columns `idx` by a small square matrix `t`
    /// (len(idx) x len(idx), column-major action: new_col_c = sum_r old_col_r t[r][c]).
    fn apply_block(&mut self, idx: &[usize], t: &[i128]) {
        let m = self.m;
        let n = idx.len();
        // columns of A and U
        for row in 0..m {
            let olda: Vec<i128> = idx.iter().map(|&c| self.a[row * m + c]).collect();
            let oldu: Vec<i128> = idx.iter().map(|&c| self.u[row * m + c]).collect();
            for c in 0..n {
                let mut acca = 0i128;
                let mut accu = 0i128;
                for r in 0..n {
                    acca = modn(acca + olda[r] * t[r * n + c], self.pk);
                    accu = modn(accu + oldu[r] * t[r * n + c], self.pk);
                }
                self.a[row * m + idx[c]] = acca;
                self.u[row * m + idx[c]] = accu;
            }
        }
        // rows of A
        for col in 0..m {
            let old: Vec<i128> = idx.iter().map(|&r| self.a[r * m + col]).collect();
            for c in 0..n {
                let mut acc = 0i128;
                for r in 0..n {
                    acc = modn(acc + old[r] * t[r * n + c], self.pk);
                }
                self.a[idx[c] * m + col] = acc;
            }
        }
    }

    fn nu_at(&self, i: usize, j: usize) -> Option<u32> {
        nu(self.at(i, j), self.p, self.pk)
    }
}

/// Pivot choice: minimal-valuation entry among `remaining`, diagonal preferred.
fn find_pivot(st: &SymState, remaining: &[usize]) -> Option<(u32, usize, usize)> {
    let mut best: Option<(u32, usize, usize)> = None;
    for &i in remaining {
        if let Some(v) = st.nu_at(i, i) {
            if best.map_or(true, |(bv, bi, bj)| v < bv || (v == bv && bi != bj)) {
                best = Some((v, i, i));
            }
        }
    }
    for (a, &i) in remaining.iter().enumerate() {
        for &j in &remaining[a + 1..] {
            if let Some(v) = st.nu_at(i, j) {
                if best.map_or(true, |(bv, _, _)| v < bv) {
                    best = Some((v, i, j));
                }
            }
        }
    }
    best
}

// ---------------------------------------------------------------------------
// odd p
// ---------------------------------------------------------------------------

/// Jordan decomposition over Z_p, p odd.
///
/// `k` is the requested assertion exponent; it is clamped from below to
/// nu_p(2|A|) + 4 so the congruences always carry at least the default
/// precision.
pub fn jordan_odd(q: &QuadraticForm, p: u64, k: Option<u32>) -> Result<JordanOdd> {
    if p < 3 || p % 2 == 0 {
        return Err(Error::WrongBranch {
            p,
            what: "jordan_odd needs an odd prime",
        });
    }
    let inv = q.invariants();
    let va = nu_i128(inv.det_a, p);
    let k = k.unwrap_or(0).max(va + 4);
    // elimination erodes at most va digits; +2 keeps a margin
    let ka = k + va + 2;
    let pk = pow_u128(p, ka).ok_or(Error::ResourceLimit(format!(
        "p^ka = {p}^{ka} exceeds the modular word size"
    )))?;

    let m = q.m();
    let mut st = SymState::new(q, p, pk);
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut order: Vec<(u32, usize)> = Vec::new();

    while !remaining.is_empty() {
        let (v, i, j) = find_pivot(&st, &remaining).ok_or(Error::PrecisionTooLow { p, k })?;
        let i = if i != j {
            // Make a diagonal entry of the same valuation; one of the signs works.
            let mut done = None;
            for s in [1i128, -1] {
                let cand = modn(st.at(i, i) + st.at(j, j) + 2 * s * st.at(i, j), pk);
                if nu(cand, p, pk) == Some(v) {
                    st.add_mul(i, j, s);
                    done = Some(i);
                    break;
                }
            }
            done.ok_or(Error::PrecisionTooLow { p, k })?
        } else {
            i
        };
        // clear row/column i against the other remaining indices
        let piv = st.at(i, i);
        let piv_unit = piv / pow_u128(p, v).unwrap();
        let piv_inv = inv_mod(piv_unit, pk);
        for &r in remaining.clone().iter() {
            if r == i {
                continue;
            }
            let x = st.at(i, r);
            if x == 0 {
                continue;
            }
            let xv = nu(x, p, pk).unwrap();
            debug_assert!(xv >= v);
            let f = mul(x / pow_u128(p, v).unwrap(), piv_inv, pk);
            st.add_mul(r, i, modn(-f, pk));
        }
        order.push((v, i));
        remaining.retain(|&r| r != i);
    }

    // alpha sorted ascending; permute U columns accordingly
    order.sort();
    let perm: Vec<usize> = order.iter().map(|&(_, i)| i).collect();
    let u = permute_columns(&st.u, m, &perm);

    let half = inv_mod(2, pk);
    let mut blocks = Vec::with_capacity(m);
    let mut diag_m = Vec::with_capacity(m);
    let mut alpha_sum = 0u32;
    for &(v, i) in &order {
        let d_m = mul(st.at(i, i), half, pk);
        let eps = modn(d_m / pow_u128(p, v).unwrap(), p as i128) as u64;
        blocks.push((v, eps));
        diag_m.push(d_m);
        alpha_sum += v;
    }
    if alpha_sum != va {
        return Err(Error::PrecisionTooLow { p, k });
    }

    let dec = JordanOdd {
        p,
        k,
        blocks,
        u,
        diag_m,
        ka,
    };
    if !dec.verify(q) {
        return Err(Error::PrecisionTooLow { p, k });
    }
    Ok(dec)
}

fn nu_i128(x: i128, p: u64) -> u32 {
    let mut x = x.abs();
    assert!(x != 0);
    let mut v = 0;
    while x % p as i128 == 0 {
        x /= p as i128;
        v += 1;
    }
    v
}

fn permute_columns(u: &[i128], m: usize, perm: &[usize]) -> Vec<i128> {
    let mut out = vec![0i128; m * m];
    for (new, &old) in perm.iter().enumerate() {
        for r in 0..m {
            out[r * m + new] = u[r * m + old];
        }
    }
    out
}

/// U^t A U mod pk.
fn transformed(q: &QuadraticForm, u: &[i128], pk: i128) -> Vec<i128> {
    let m = q.m();
    let mut au = vec![0i128; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0i128;
            for l in 0..m {
                acc = modn(acc + q.a(i, l) as i128 * u[l * m + j], pk);
            }
            au[i * m + j] = acc;
        }
    }
    let mut w = vec![0i128; m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = 0i128;
            for l in 0..m {
                acc = modn(acc + u[l * m + i] * au[l * m + j], pk);
            }
            w[i * m + j] = acc;
        }
    }
    w
}

/// Determinant of U mod p (unit test: nonzero).
fn det_unit_mod_p(u: &[i128], m: usize, p: u64) -> bool {
    let p = p as i128;
    let mut a: Vec<i128> = u.iter().map(|&x| x.rem_euclid(p)).collect();
    let mut det = 1i128;
    for col in 0..m {
        let piv = (col..m).find(|&r| a[r * m + col] % p != 0);
        let Some(piv) = piv else { return false };
        if piv != col {
            for j in 0..m {
                a.swap(col * m + j, piv * m + j);
            }
            det = -det;
        }
        let inv = inv_mod(a[col * m + col], p);
        det = (det * a[col * m + col]).rem_euclid(p);
        for r in col + 1..m {
            let f = (a[r * m + col] * inv).rem_euclid(p);
            for j in col..m {
                a[r * m + j] = (a[r * m + j] - f * a[col * m + j]).rem_euclid(p);
            }
        }
    }
    det.rem_euclid(p) != 0
}

impl JordanOdd {
    /// Exact M-scale diagonal units (mod p^ka), aligned with `blocks`.
    pub fn diag_m_entries(&self) -> &[i128] {
        &self.diag_m
    }

    pub fn modulus(&self) -> i128 {
        pow_u128(self.p, self.ka).unwrap()
    }

    pub fn verify(&self, q: &QuadraticForm) -> bool {
        let m = q.m();
        if self.blocks.len() != m || self.u.len() != m * m {
            return false;
        }
        let pk = self.modulus();
        let pcheck = pow_u128(self.p, self.k).unwrap();
        let w = transformed(q, &self.u, pk);
        for i in 0..m {
            for j in 0..m {
                if i != j && w[i * m + j] % pcheck != 0 {
                    return false;
                }
            }
        }
        let half = inv_mod(2, pk);
        for (h, &(alpha, eps)) in self.blocks.iter().enumerate() {
            let d_m = mul(w[h * m + h], half, pk);
            if nu(d_m, self.p, pk) != Some(alpha) {
                return false;
            }
            let unit = modn(d_m / pow_u128(self.p, alpha).unwrap(), self.p as i128) as u64;
            if unit != eps % self.p {
                return false;
            }
        }
        det_unit_mod_p(&self.u, m, self.p)
    }
}

// ---------------------------------------------------------------------------
// p = 2
// ---------------------------------------------------------------------------

/// Scalar Newton lift for f(x) = a x^2 + b x + c over Z/2^ka, given a start
/// with nu(f) >= 2 nu(f') + 1 and nu(f') constant (0 or 1 here).
fn newton_quadratic(a: i128, b: i128, c: i128, x0: i128, pk: i128) -> Option<i128> {
    let (a, b, c) = (modn(a, pk), modn(b, pk), modn(c, pk));
    let f = |x: i128| modn(mul(mul(a, x, pk), x, pk) + mul(b, x, pk) + c, pk);
    let fp = |x: i128| modn(mul(2 * a, x, pk) + b, pk);
    let mut x = modn(x0, pk);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0 {
            return Some(x);
        }
        let d = fp(x);
        let (num, den) = if d % 2 == 0 {
            if fx % 2 != 0 {
                return None;
            }
            (fx / 2, d / 2)
        } else {
            (fx, d)
        };
        if den % 2 == 0 {
            return None;
        }
        x = modn(x - mul(num, inv_mod(den, pk), pk), pk);
    }
    None
}

/// F(x, y) = c11 x^2 + 2 c12 x y + c22 y^2 mod pk, the A-scale value.
fn val2(c11: i128, c12: i128, c22: i128, x: i128, y: i128, pk: i128) -> i128 {
    let t1 = mul(mul(c11, x, pk), x, pk);
    let t2 = mul(mul(modn(2 * c12, pk), x, pk), y, pk);
    let t3 = mul(mul(c22, y, pk), y, pk);
    modn(t1 + t2 + t3, pk)
}

/// A-scale bilinear pairing a^t C b mod pk.
fn pair2(c11: i128, c12: i128, c22: i128, a: (i128, i128), b: (i128, i128), pk: i128) -> i128 {
    let t1 = mul(mul(c11, a.0, pk), b.0, pk);
    let t2 = mul(mul(c12, a.0, pk), b.1, pk);
    let t3 = mul(mul(c12, a.1, pk), b.0, pk);
    let t4 = mul(mul(c22, a.1, pk), b.1, pk);
    modn(t1 + t2 + t3 + t4, pk)
}

/// Canonicalize an even 2x2 block C (unit content: odd off-diagonal, even
/// diagonal, det = -1 mod 8) to [[0,1],[1,0]] mod pk. Returns the 2x2
/// transform, column-major action as in `apply_block`.
fn canon_hyperbolic(c11: i128, c12: i128, c22: i128, pk: i128) -> Option<[i128; 4]> {
    // Isotropic vector with one coordinate 1.
    let mut e: Option<(i128, i128)> = None;
    for x0 in 0..16 {
        if val2(c11, c12, c22, x0, 1, pk) % 16 == 0 {
            if let Some(x) = newton_quadratic(c11, 2 * c12, c22, x0, pk) {
                e = Some((x, 1));
                break;
            }
        }
    }
    if e.is_none() {
        for y0 in 0..16 {
            if val2(c11, c12, c22, 1, y0, pk) % 16 == 0 {
                if let Some(y) = newton_quadratic(c22, 2 * c12, c11, y0, pk) {
                    e = Some((1, y));
                    break;
                }
            }
        }
    }
    let (ex, ey) = e?;
    // Complementary basis vector.
    let (wx, wy) = if ey % 2 != 0 { (1, 0) } else { (0, 1) };
    let sigma = pair2(c11, c12, c22, (ex, ey), (wx, wy), pk);
    if sigma % 2 == 0 {
        return None;
    }
    let fw = val2(c11, c12, c22, wx, wy, pk);
    debug_assert_eq!(fw % 2, 0);
    let lambda = modn(-mul(fw / 2, inv_mod(sigma, pk), pk), pk);
    let (mut fx, mut fy) = (
        modn(wx + mul(lambda, ex, pk), pk),
        modn(wy + mul(lambda, ey, pk), pk),
    );
    let t = pair2(c11, c12, c22, (ex, ey), (fx, fy), pk);
    if t % 2 == 0 {
        return None;
    }
    let tinv = inv_mod(t, pk);
    fx = mul(fx, tinv, pk);
    fy = mul(fy, tinv, pk);
    // Columns (e, f); row-major [e_x, f_x, e_y, f_y].
    Some([ex, fx, ey, fy])
}

/// Canonicalize an even 2x2 block C with det = 3 mod 8 to [[2,1],[1,2]] mod pk.
fn canon_plus_plane(c11: i128, c12: i128, c22: i128, pk: i128) -> Option<[i128; 4]> {
    let value = |x: i128, y: i128| val2(c11, c12, c22, x, y, pk);
    let inner =
        |ax: i128, ay: i128, bx: i128, by: i128| pair2(c11, c12, c22, (ax, ay), (bx, by), pk);
    // v1 with F(v1) = 2 exactly: search mod 8, lift the coordinate with odd
    // gradient.
    let mut v1: Option<(i128, i128)> = None;
    'outer: for y0 in 0..8i128 {
        for x0 in 0..8i128 {
            if x0 % 2 == 0 && y0 % 2 == 0 {
                continue;
            }
            if modn(value(x0, y0) - 2, 8) != 0 {
                continue;
            }
            if y0 % 2 != 0 {
                // f(x) = c11 x^2 + 2 c12 y0 x + c22 y0^2 - 2, unit derivative
                if let Some(x) = newton_quadratic(c11, 2 * c12 * y0, c22 * y0 * y0 - 2, x0, pk) {
                    v1 = Some((x, y0));
                    break 'outer;
                }
            }
            if x0 % 2 != 0 {
                if let Some(y) = newton_quadratic(c22, 2 * c12 * x0, c11 * x0 * x0 - 2, y0, pk) {
                    v1 = Some((x0, y));
                    break 'outer;
                }
            }
        }
    }
    let (ax, ay) = v1?;
    let (wx, wy) = if ay % 2 != 0 { (1, 0) } else { (0, 1) };
    let sigma = inner(ax, ay, wx, wy);
    if sigma % 2 == 0 {
        return None;
    }
    let fw2 = value(wx, wy) / 2; // odd in a genuine plus plane
                                 // g(t) = (1-2t)^2 (F(w)/2) - sigma^2 (t^2 - t + 1) = 0, unit derivative.
    let a = modn(4 * fw2 - sigma * sigma, pk);
    let b = modn(-4 * fw2 + sigma * sigma, pk);
    let c = modn(fw2 - sigma * sigma, pk);
    let t = newton_quadratic(a, b, c, 0, pk).or_else(|| newton_quadratic(a, b, c, 1, pk))?;
    let s = mul(modn(1 - 2 * t, pk), inv_mod(sigma, pk), pk);
    let bx = modn(s * wx + t * ax, pk);
    let by = modn(s * wy + t * ay, pk);
    Some([ax, bx, ay, by])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Diag,
    Hyper,
    Three,
}

#[derive(Debug, Clone)]
struct Block2 {
    kind: BlockKind,
    scale: u32,
    idx: Vec<usize>,
}

/// Jordan decomposition over Z_2.
///
/// `k` is the requested M-scale assertion exponent, clamped from below to
/// nu_2(2|A|) + 4.
pub fn jordan_two(q: &QuadraticForm, k: Option<u32>) -> Result<JordanTwo> {
    let inv = q.invariants();
    let va = nu_i128(inv.det_a, 2); // A-scale determinant valuation
    let k = k.unwrap_or(0).max(va + 1 + 4);
    // A-scale working exponent; M-scale assertions at k need A-scale k+1,
    // elimination erodes at most va digits, and the Hensel searches want a
    // few extra bits
    let ka = k + 1 + va + 4;
    let pk = pow_u128(2, ka).ok_or(Error::ResourceLimit(format!(
        "2^{ka} exceeds the modular word size"
    )))?;

    let m = q.m();
    let mut st = SymState::new(q, 2, pk);
    let mut remaining: Vec<usize> = (0..m).collect();
    let mut blocks: Vec<Block2> = Vec::new();

    while !remaining.is_empty() {
        let (v, i, j) = find_pivot(&st, &remaining).ok_or(Error::PrecisionTooLow { p: 2, k })?;
        if i == j {
            // 1x1 pivot
            let piv = st.at(i, i);
            let piv_unit = piv >> v;
            let piv_inv = inv_mod(piv_unit, pk);
            for &r in remaining.clone().iter() {
                if r == i {
                    continue;
                }
                let x = st.at(i, r);
                if x == 0 {
                    continue;
                }
                let f = mul(x >> v, piv_inv, pk);
                st.add_mul(r, i, modn(-f, pk));
            }
            blocks.push(Block2 {
                kind: BlockKind::Diag,
                scale: v,
                idx: vec![i],
            });
            remaining.retain(|&r| r != i);
        } else {
            // 2x2 pivot: strictly smaller valuation than every diagonal entry.
            let two_v = pow_u128(2, v).unwrap();
            let (b11, b12, b22) = (st.at(i, i), st.at(i, j), st.at(j, j));
            let det = modn(b11 * b22 - b12 * b12, pk);
            // clear the other rows/columns through the block inverse
            for &r in remaining.clone().iter() {
                if r == i || r == j {
                    continue;
                }
                let (ari, arj) = (st.at(r, i), st.at(r, j));
                if ari == 0 && arj == 0 {
                    continue;
                }
                let det_unit = det / (two_v * two_v);
                let det_inv = inv_mod(det_unit, pk);
                let nx = modn(b22 * ari - b12 * arj, pk);
                let ny = modn(b11 * arj - b12 * ari, pk);
                debug_assert_eq!(modn(nx, two_v * two_v), 0);
                debug_assert_eq!(modn(ny, two_v * two_v), 0);
                let x = mul(nx / (two_v * two_v), det_inv, pk);
                let y = mul(ny / (two_v * two_v), det_inv, pk);
                st.add_mul(r, i, modn(-x, pk));
                st.add_mul(r, j, modn(-y, pk));
            }
            // classify and canonicalize the unit content
            let (c11, c12, c22) = (b11 >> v, b12 >> v, b22 >> v);
            let cdet = modn(c11 * c22 - c12 * c12, 8);
            let kind = match cdet {
                7 => BlockKind::Hyper,
                3 => BlockKind::Three,
                _ => return Err(Error::PrecisionTooLow { p: 2, k }),
            };
            let t = match kind {
                BlockKind::Hyper => canon_hyperbolic(c11, c12, c22, pk),
                BlockKind::Three => canon_plus_plane(c11, c12, c22, pk),
                BlockKind::Diag => unreachable!(),
            }
            .ok_or(Error::PrecisionTooLow { p: 2, k })?;
            st.apply_block(&[i, j], &t);
            blocks.push(Block2 {
                kind,
                scale: v,
                idx: vec![i, j],
            });
            remaining.retain(|&r| r != i && r != j);
        }
    }

    // Fuse pairs of plus planes at equal scale into hyperbolic pairs.
    fuse_plus_pairs(&mut st, &mut blocks, pk)?;

    // Canonical order: diagonal (by scale), hyperbolic, plus.
    blocks.sort_by_key(|b| {
        let rank = match b.kind {
            BlockKind::Diag => 0,
            BlockKind::Hyper => 1,
            BlockKind::Three => 2,
        };
        (rank, b.scale)
    });
    let perm: Vec<usize> = blocks.iter().flat_map(|b| b.idx.iter().copied()).collect();
    let u = permute_columns(&st.u, m, &perm);

    let mut diag = Vec::new();
    let mut diag_m = Vec::new();
    let mut hyper = Vec::new();
    let mut three = Vec::new();
    let mut det_check = 0u32;
    for b in &blocks {
        match b.kind {
            BlockKind::Diag => {
                let d = st.at(b.idx[0], b.idx[0]);
                let alpha = b.scale - 1; // M-scale exponent
                let eps = (modn(d >> b.scale, 8)) as u8;
                diag.push((alpha, eps));
                diag_m.push(d >> 1); // exact half of an even residue
                det_check += alpha + 1;
            }
            BlockKind::Hyper => {
                hyper.push((b.scale, 1u8));
                det_check += 2 * b.scale;
            }
            BlockKind::Three => {
                three.push((b.scale, 1u8));
                det_check += 2 * b.scale;
            }
        }
    }
    if det_check != va {
        return Err(Error::PrecisionTooLow { p: 2, k });
    }

    let dec = JordanTwo {
        k,
        diag,
        hyper,
        three,
        u,
        diag_m,
        ka,
    };
    if !dec.verify(q) {
        return Err(Error::PrecisionTooLow { p: 2, k });
    }
    Ok(dec)
}

fn fuse_plus_pairs(st: &mut SymState, blocks: &mut Vec<Block2>, pk: i128) -> Result<()> {
    loop {
        let mut pair: Option<(usize, usize)> = None;
        'search: for a in 0..blocks.len() {
            if blocks[a].kind != BlockKind::Three {
                continue;
            }
            for b in a + 1..blocks.len() {
                if blocks[b].kind == BlockKind::Three && blocks[b].scale == blocks[a].scale {
                    pair = Some((a, b));
                    break 'search;
                }
            }
        }
        let Some((a, b)) = pair else { return Ok(()) };
        let scale = blocks[a].scale;
        let idx = [
            blocks[a].idx[0],
            blocks[a].idx[1],
            blocks[b].idx[0],
            blocks[b].idx[1],
        ];
        let t = fuse_transform(pk).ok_or(Error::PrecisionTooLow { p: 2, k: 0 })?;
        st.apply_block(&idx, &t);
        blocks[a] = Block2 {
            kind: BlockKind::Hyper,
            scale,
            idx: vec![idx[0], idx[1]],
        };
        blocks[b] = Block2 {
            kind: BlockKind::Hyper,
            scale,
            idx: vec![idx[2], idx[3]],
        };
    }
}

/// The 4x4 transform taking [[2,1],[1,2]] (+) [[2,1],[1,2]] to two hyperbolic
/// planes mod 2^ka. Independent of the common scale.
fn fuse_transform(pk: i128) -> Option<[i128; 16]> {
    let n = 4usize;
    let c: [i128; 16] = [2, 1, 0, 0, 1, 2, 0, 0, 0, 0, 2, 1, 0, 0, 1, 2];
    let inner = |u: &[i128; 4], w: &[i128; 4]| {
        let mut acc = 0i128;
        for r in 0..n {
            for s in 0..n {
                acc = modn(acc + u[r] * c[r * n + s] % pk * w[s], pk);
            }
        }
        acc
    };
    let value = |u: &[i128; 4]| inner(u, u);

    // Isotropic v1 = (x, 1, 1, 1) with x^2 + x + 4 = 0 (F = 2(x^2+x+4)).
    let x = newton_quadratic(1, 1, 4, 3, pk)?;
    let v1 = [x, 1, 1, 1];
    debug_assert_eq!(value(&v1), 0);
    let w1 = [1i128, 0, 0, 0];
    let sigma = inner(&v1, &w1);
    if sigma % 2 == 0 {
        return None;
    }
    let lambda = modn(-(value(&w1) / 2) * inv_mod(sigma, pk), pk);
    let mut f1 = [0i128; 4];
    for r in 0..4 {
        f1[r] = modn(w1[r] + lambda * v1[r], pk);
    }
    let t = inner(&v1, &f1);
    let tinv = inv_mod(t, pk);
    for r in 0..4 {
        f1[r] = mul(f1[r], tinv, pk);
    }
    // project the standard vectors onto the orthogonal complement
    let proj = |e: &[i128; 4]| {
        let a = inner(e, &f1);
        let b = inner(e, &v1);
        let mut out = [0i128; 4];
        for r in 0..4 {
            out[r] = modn(e[r] - a * v1[r] - b * f1[r], pk);
        }
        out
    };
    let cands = [
        proj(&[0, 1, 0, 0]),
        proj(&[0, 0, 1, 0]),
        proj(&[0, 0, 0, 1]),
    ];
    for a in 0..cands.len() {
        for b in a + 1..cands.len() {
            let (g1, g2) = (cands[a], cands[b]);
            let det4 = det4_mod2(&[v1, f1, g1, g2]);
            if det4 % 2 == 0 {
                continue;
            }
            // complement Gram, then hyperbolic canonicalization
            let (h11, h12, h22) = (value(&g1), inner(&g1, &g2), value(&g2));
            if modn(h11 * h22 - h12 * h12, 8) != 7 {
                continue;
            }
            let Some(r) = canon_hyperbolic(h11, h12, h22, pk) else {
                continue;
            };
            let h1 = [
                modn(g1[0] * r[0] + g2[0] * r[2], pk),
                modn(g1[1] * r[0] + g2[1] * r[2], pk),
                modn(g1[2] * r[0] + g2[2] * r[2], pk),
                modn(g1[3] * r[0] + g2[3] * r[2], pk),
            ];
            let h2 = [
                modn(g1[0] * r[1] + g2[0] * r[3], pk),
                modn(g1[1] * r[1] + g2[1] * r[3], pk),
                modn(g1[2] * r[1] + g2[2] * r[3], pk),
                modn(g1[3] * r[1] + g2[3] * r[3], pk),
            ];
            // columns v1, f1, h1, h2
            let mut out = [0i128; 16];
            for r_ in 0..4 {
                out[r_ * 4] = v1[r_];
                out[r_ * 4 + 1] = f1[r_];
                out[r_ * 4 + 2] = h1[r_];
                out[r_ * 4 + 3] = h2[r_];
            }
            return Some(out);
        }
    }
    None
}

fn det4_mod2(cols: &[[i128; 4]; 4]) -> i128 {
    // permutation expansion mod 2 over 4 columns
    let a = |r: usize, c: usize| cols[c][r].rem_euclid(2);
    let mut det = 0i128;
    let perms: [[usize; 4]; 24] = {
        let mut out = [[0usize; 4]; 24];
        let mut i = 0;
        let items = [0usize, 1, 2, 3];
        for p0 in 0..4 {
            for p1 in 0..4 {
                if p1 == p0 {
                    continue;
                }
                for p2 in 0..4 {
                    if p2 == p0 || p2 == p1 {
                        continue;
                    }
                    let p3 = 6 - p0 - p1 - p2;
                    out[i] = [items[p0], items[p1], items[p2], items[p3]];
                    i += 1;
                }
            }
        }
        out
    };
    for perm in perms {
        det += a(0, perm[0]) * a(1, perm[1]) * a(2, perm[2]) * a(3, perm[3]);
    }
    det % 2
}

impl JordanTwo {
    pub fn r_count(&self) -> usize {
        self.diag.len()
    }
    pub fn s_count(&self) -> usize {
        self.hyper.len()
    }
    pub fn t_count(&self) -> usize {
        self.three.len()
    }

    pub fn modulus(&self) -> i128 {
        pow_u128(2, self.ka).unwrap()
    }

    /// Exact M-scale diagonal entries (mod 2^{ka-1}), aligned with `diag`.
    pub fn diag_m_entries(&self) -> &[i128] {
        &self.diag_m
    }

    pub fn verify(&self, q: &QuadraticForm) -> bool {
        let m = q.m();
        if self.diag.len() + 2 * (self.hyper.len() + self.three.len()) != m {
            return false;
        }
        let pk = self.modulus();
        // M-scale congruence at 2^k means A-scale at 2^{k+1}.
        let pcheck = pow_u128(2, self.k + 1).unwrap();
        let w = transformed(q, &self.u, pk);
        let r = self.diag.len();

        // block-diagonal structure
        let mut spans: Vec<(usize, usize)> = (0..r).map(|i| (i, i + 1)).collect();
        let mut pos = r;
        for _ in &self.hyper {
            spans.push((pos, pos + 2));
            pos += 2;
        }
        for _ in &self.three {
            spans.push((pos, pos + 2));
            pos += 2;
        }
        for (bi, &(s1, e1)) in spans.iter().enumerate() {
            for (bj, &(s2, e2)) in spans.iter().enumerate() {
                if bi == bj {
                    continue;
                }
                for i in s1..e1 {
                    for j in s2..e2 {
                        if w[i * m + j] % pcheck != 0 {
                            return false;
                        }
                    }
                }
            }
        }
        // R part: valuations and units mod 8
        for (h, &(alpha, eps)) in self.diag.iter().enumerate() {
            let d = w[h * m + h];
            if nu(d, 2, pk) != Some(alpha + 1) {
                return false;
            }
            if modn(d >> (alpha + 1), 8) as u8 != eps % 8 {
                return false;
            }
        }
        // S part: exact hyperbolic blocks (unit 1)
        let mut pos = r;
        for &(beta, eps) in &self.hyper {
            let s = pow_u128(2, beta).unwrap() * eps as i128;
            let ok = w[pos * m + pos] % pcheck == 0
                && w[(pos + 1) * m + pos + 1] % pcheck == 0
                && modn(w[pos * m + pos + 1] - s, pcheck) == 0;
            if !ok {
                return false;
            }
            pos += 2;
        }
        // T part: exact plus-plane blocks (unit 1)
        for &(gamma, eps) in &self.three {
            let s = pow_u128(2, gamma).unwrap() * eps as i128;
            let ok = modn(w[pos * m + pos] - 2 * s, pcheck) == 0
                && modn(w[(pos + 1) * m + pos + 1] - 2 * s, pcheck) == 0
                && modn(w[pos * m + pos + 1] - s, pcheck) == 0;
            if !ok {
                return false;
            }
            pos += 2;
        }
        det_unit_mod_p(&self.u, m, 2)
    }
}

// ---------------------------------------------------------------------------
// blockwise value distributions (shared with the density oracle)
// ---------------------------------------------------------------------------

/// A canonical block viewed as an integer-valued quadratic form.
#[derive(Debug, Clone)]
pub enum CanonicalBlock {
    /// c x^2 with the exact M-scale unit content.
    Unary { coef: i128 },
    /// 2^beta x y.
    Hyper { scale: u32 },
    /// 2^gamma (x^2 + x y + y^2).
    Three { scale: u32 },
}

impl JordanOdd {
    pub fn canonical_blocks(&self) -> Vec<CanonicalBlock> {
        self.diag_m
            .iter()
            .map(|&c| CanonicalBlock::Unary { coef: c })
            .collect()
    }
}

impl JordanTwo {
    pub fn canonical_blocks(&self) -> Vec<CanonicalBlock> {
        let mut out: Vec<CanonicalBlock> = self
            .diag_m
            .iter()
            .map(|&c| CanonicalBlock::Unary { coef: c })
            .collect();
        out.extend(
            self.hyper
                .iter()
                .map(|&(b, _)| CanonicalBlock::Hyper { scale: b }),
        );
        out.extend(
            self.three
                .iter()
                .map(|&(g, _)| CanonicalBlock::Three { scale: g }),
        );
        out
    }
}

/// Value distribution of one block over (Z/p^nu)^dim.
pub fn block_histogram(block: &CanonicalBlock, p: u64, nu: u32) -> Vec<u128> {
    let q = (p as usize).pow(nu);
    let qi = q as i128;
    let mut h = vec![0u128; q];
    match *block {
        CanonicalBlock::Unary { coef } => {
            let c = coef.rem_euclid(qi);
            for x in 0..qi {
                h[(c * x % qi * x % qi) as usize] += 1;
            }
        }
        CanonicalBlock::Hyper { scale } => {
            let s = (1i128 << scale).rem_euclid(qi);
            for x in 0..qi {
                let sx = s * x % qi;
                for y in 0..qi {
                    h[(sx * y % qi) as usize] += 1;
                }
            }
        }
        CanonicalBlock::Three { scale } => {
            let s = (1i128 << scale).rem_euclid(qi);
            for x in 0..qi {
                for y in 0..qi {
                    h[(s * ((x * x + x * y + y * y) % qi) % qi) as usize] += 1;
                }
            }
        }
    }
    h
}

/// Distribution of the full canonical form over (Z/p^nu)^m by cyclic
/// convolution of the block histograms.
pub fn blocks_value_distribution(blocks: &[CanonicalBlock], p: u64, nu: u32) -> Vec<u128> {
    use rayon::prelude::*;
    let q = (p as usize).pow(nu);
    let mut acc = vec![0u128; q];
    acc[0] = 1;
    for b in blocks {
        let h = block_histogram(b, p, nu);
        let nz: Vec<(usize, u128)> = h
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0)
            .map(|(i, &v)| (i, v))
            .collect();
        let next: Vec<u128> = if q as u128 * nz.len() as u128 > 1 << 24 {
            (0..q)
                .into_par_iter()
                .map(|t| {
                    let mut s = 0u128;
                    for &(j, hj) in &nz {
                        let i = if t >= j { t - j } else { t + q - j };
                        s += acc[i] * hj;
                    }
                    s
                })
                .collect()
        } else {
            let mut out = vec![0u128; q];
            for (i, &ai) in acc.iter().enumerate() {
                if ai == 0 {
                    continue;
                }
                for &(j, hj) in &nz {
                    let t = i + j;
                    let t = if t >= q { t - q } else { t };
                    out[t] += ai * hj;
                }
            }
            out
        };
        acc = next;
    }
    acc
}

/// Value distribution of Q over (Z/p^nu)^m by direct enumeration,
/// cost p^(nu m).
pub fn direct_value_distribution(q: &QuadraticForm, p: u64, nu: u32) -> Vec<u128> {
    let modulus = (p as i64).pow(nu);
    let m = q.m();
    let mut dist = vec![0u128; modulus as usize];

    fn rec(
        q: &QuadraticForm,
        depth: usize,
        val: i64,
        lin: &mut [i64],
        modulus: i64,
        dist: &mut [u128],
    ) {
        let m = q.m();
        if depth == m {
            dist[val as usize] += 1;
            return;
        }
        let cdd = (q.a(depth, depth) / 2).rem_euclid(modulus);
        for v in 0..modulus {
            let newval = (val + (cdd * v % modulus + lin[depth]) * v).rem_euclid(modulus);
            rec(q, depth + 1, newval, lin, modulus, dist);
            // advance the linear forms for v -> v+1; after the full cycle the
            // net change is modulus * a_dj = 0 mod modulus
            for j in depth + 1..m {
                lin[j] = (lin[j] + q.a(depth, j)).rem_euclid(modulus);
            }
        }
    }
    let mut lin = vec![0i64; m];
    rec(q, 0, 0, &mut lin, modulus, &mut dist);
    dist
}
