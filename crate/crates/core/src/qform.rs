//! Primitive positive definite integral quadratic forms in Siegel notation.
//!
//! Q(y) = (1/2) y^t A y with A symmetric, even diagonal. The polynomial
//! coefficients are c_ii = a_ii/2 and c_ij = a_ij for i < j.

use crate::arith::gcd_i64;
use crate::error::{Error, Result};
use serde::Deserialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadraticForm {
    m: usize,
    /// Siegel matrix A, row-major.
    a: Vec<i64>,
}

/// Exact invariants of a form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormInvariants {
    /// |A| > 0.
    pub det_a: i128,
    /// D = (-1)^(m/2) |A| for even m.
    pub disc: i128,
    /// ||Q|| = max |a_ij|.
    pub norm: i64,
    /// Smallest nu >= 1 with nu A^{-1} integral with even diagonal.
    pub level: u64,
    /// m ||Q||, an upper bound for the largest eigenvalue of A.
    pub lambda_bound: i64,
}

impl FormInvariants {
    /// Bad primes: prime divisors of 2D.
    pub fn bad_primes(&self) -> Vec<u64> {
        let two_d = (2 * self.disc).unsigned_abs() as u64;
        crate::arith::factorize(two_d)
            .into_iter()
            .map(|(p, _)| p)
            .collect()
    }
}

/// One polynomial coefficient record: the coefficient of y_i y_j (i <= j).
#[derive(Debug, Clone, Copy, Deserialize)]
pub struct Coefficient {
    pub i: usize,
    pub j: usize,
    pub c: i64,
}

#[derive(Debug, Deserialize)]
struct FormFile {
    m: usize,
    coefficients: Vec<Coefficient>,
}

/// Build a validated form from polynomial coefficients (1-based indices).
pub fn build_form(m: usize, coefficients: &[Coefficient]) -> Result<QuadraticForm> {
    if m == 0 || m % 2 != 0 {
        return Err(Error::OddDimension(m));
    }
    let mut a = vec![0i64; m * m];
    for &Coefficient { i, j, c } in coefficients {
        if i == 0 || j == 0 || i > j || j > m {
            return Err(Error::InvalidArgument(format!(
                "coefficient index ({i},{j}) out of range for m={m}"
            )));
        }
        let (i, j) = (i - 1, j - 1);
        if i == j {
            a[i * m + i] = 2 * c;
        } else {
            a[i * m + j] = c;
            a[j * m + i] = c;
        }
    }
    let form = QuadraticForm { m, a };

    // Primitivity is about polynomial coefficients, not matrix entries.
    let mut g = 0i64;
    for i in 0..m {
        g = gcd_i64(g, form.a[i * m + i] / 2);
        for j in i + 1..m {
            g = gcd_i64(g, form.a[i * m + j]);
        }
    }
    if g != 1 {
        return Err(Error::NotPrimitive(g));
    }

    // Positive definiteness via exact leading principal minors.
    for k in 1..=m {
        if leading_minor(&form, k) <= 0 {
            return Err(Error::NotPositiveDefinite(k));
        }
    }
    Ok(form)
}

/// Parse the form file format: TOML with `m` and `coefficients = [{i,j,c},...]`.
pub fn parse_form_file(text: &str) -> Result<QuadraticForm> {
    let file: FormFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("form file: {e}")))?;
    build_form(file.m, &file.coefficients)
}

fn leading_minor(q: &QuadraticForm, k: usize) -> i128 {
    let sub: Vec<i128> = (0..k)
        .flat_map(|i| (0..k).map(move |j| q.a[i * q.m + j] as i128))
        .collect();
    det_bareiss(sub, k)
}

/// Fraction-free (Bareiss) determinant of a k x k integer matrix.
pub(crate) fn det_bareiss(mut m: Vec<i128>, k: usize) -> i128 {
    if k == 0 {
        return 1;
    }
    let mut sign = 1i128;
    let mut prev = 1i128;
    for col in 0..k - 1 {
        if m[col * k + col] == 0 {
            let pivot_row = (col + 1..k).find(|&r| m[r * k + col] != 0);
            match pivot_row {
                None => return 0,
                Some(r) => {
                    for j in 0..k {
                        m.swap(col * k + j, r * k + j);
                    }
                    sign = -sign;
                }
            }
        }
        for i in col + 1..k {
            for j in col + 1..k {
                let num = m[i * k + j] * m[col * k + col] - m[i * k + col] * m[col * k + j];
                m[i * k + j] = num / prev;
            }
            m[i * k + col] = 0;
        }
        prev = m[col * k + col];
    }
    sign * m[(k - 1) * k + (k - 1)]
}

impl QuadraticForm {
    pub fn m(&self) -> usize {
        self.m
    }

    /// k = m/2.
    pub fn k(&self) -> u32 {
        (self.m / 2) as u32
    }

    /// Siegel matrix entry a_ij (0-based).
    pub fn a(&self, i: usize, j: usize) -> i64 {
        self.a[i * self.m + j]
    }

    pub fn matrix(&self) -> &[i64] {
        &self.a
    }

    /// Exact value Q(y) = (1/2) y^t A y.
    pub fn evaluate(&self, y: &[i64]) -> Result<i64> {
        if y.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: y.len(),
            });
        }
        let mut acc: i128 = 0;
        for i in 0..self.m {
            acc += (self.a[i * self.m + i] as i128 / 2) * (y[i] as i128) * (y[i] as i128);
            for j in i + 1..self.m {
                acc += self.a[i * self.m + j] as i128 * y[i] as i128 * y[j] as i128;
            }
        }
        Ok(acc as i64)
    }

    /// All exact invariants.
    pub fn invariants(&self) -> FormInvariants {
        let m = self.m;
        let det_a = leading_minor(self, m);
        debug_assert!(det_a > 0);
        let disc = if (m / 2) % 2 == 0 { det_a } else { -det_a };
        let norm = self.a.iter().map(|v| v.abs()).max().unwrap_or(0);

        // Level: smallest nu with nu A^{-1} integral, even diagonal.
        // A^{-1} = adj(A)/|A|; the conditions are nu*adj_ij = 0 mod |A| and
        // nu*adj_ii = 0 mod 2|A|.
        let mut level: i128 = 1;
        for i in 0..m {
            for j in 0..m {
                let adj = self.adjugate_entry(i, j);
                let modulus = if i == j { 2 * det_a } else { det_a };
                let need = modulus / gcd_i128(modulus, adj);
                level = lcm_i128(level, need);
            }
        }
        FormInvariants {
            det_a,
            disc,
            norm,
            level: level as u64,
            lambda_bound: m as i64 * norm,
        }
    }

    /// Cofactor-based adjugate entry adj(A)_{ij} (so that A * adj = |A| I).
    pub fn adjugate_entry(&self, i: usize, j: usize) -> i128 {
        let m = self.m;
        // adj_{ij} = (-1)^{i+j} * minor_{ji}; A symmetric so minor_{ji} = minor_{ij}.
        let mut sub = Vec::with_capacity((m - 1) * (m - 1));
        for r in 0..m {
            if r == j {
                continue;
            }
            for c in 0..m {
                if c == i {
                    continue;
                }
                sub.push(self.a[r * m + c] as i128);
            }
        }
        let sign = if (i + j) % 2 == 0 { 1 } else { -1 };
        sign * det_bareiss(sub, m - 1)
    }
}

fn gcd_i128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm_i128(a: i128, b: i128) -> i128 {
    a / gcd_i128(a, b) * b
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};

    #[test]
    fn build_sum_of_four_squares() {
        let q = fixtures::sum_of_squares(4);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(q.a(i, j), if i == j { 2 } else { 0 });
            }
        }
    }

    #[test]
    fn build_example3() {
        let q = fixtures::example3();
        assert_eq!(q.a(0, 0), 2);
        assert_eq!(q.a(1, 1), 6);
        assert_eq!(q.a(2, 3), 1);
        assert_eq!(q.a(3, 2), 1);
        assert_eq!(q.a(3, 3), 2);
    }

    #[test]
    fn imprimitive_rejected() {
        let coeffs: Vec<Coefficient> = (1..=4).map(|i| Coefficient { i, j: i, c: 2 }).collect();
        match build_form(4, &coeffs) {
            Err(Error::NotPrimitive(2)) => {}
            other => panic!("expected NotPrimitive(2), got {other:?}"),
        }
    }

    #[test]
    fn indefinite_rejected() {
        let coeffs = vec![
            Coefficient { i: 1, j: 1, c: 1 },
            Coefficient { i: 2, j: 2, c: -1 },
            Coefficient { i: 3, j: 3, c: 1 },
            Coefficient { i: 4, j: 4, c: 1 },
        ];
        assert!(matches!(
            build_form(4, &coeffs),
            Err(Error::NotPositiveDefinite(_))
        ));
    }

    #[test]
    fn odd_dimension_rejected() {
        let coeffs = vec![
            Coefficient { i: 1, j: 1, c: 1 },
            Coefficient { i: 2, j: 2, c: 1 },
            Coefficient { i: 3, j: 3, c: 1 },
        ];
        assert!(matches!(
            build_form(3, &coeffs),
            Err(Error::OddDimension(3))
        ));
    }

    #[test]
    fn invariants_examples() {
        let inv3 = fixtures::example3().invariants();
        assert_eq!(inv3.det_a, 36);
        assert_eq!(inv3.disc, 36);

        let inv4 = fixtures::sum_of_squares(4).invariants();
        assert_eq!(inv4.det_a, 16);
        assert_eq!(inv4.disc, 16);
        assert_eq!(inv4.level, 4);

        let inv8 = fixtures::e8().invariants();
        assert_eq!(inv8.det_a, 1);
        assert_eq!(inv8.level, 1);

        let inv6 = fixtures::sum_of_squares(6).invariants();
        assert_eq!(inv6.disc, -64);
        assert_eq!(inv6.bad_primes(), vec![2]);

        assert_eq!(fixtures::diag_1113().invariants().det_a, 48);
        assert_eq!(fixtures::example3().invariants().bad_primes(), vec![2, 3]);
    }

    #[test]
    fn evaluate_examples() {
        let q4 = fixtures::sum_of_squares(4);
        assert_eq!(q4.evaluate(&[1, 0, 0, 0]).unwrap(), 1);
        assert_eq!(q4.evaluate(&[0, 0, 0, 0]).unwrap(), 0);
        let q3 = fixtures::example3();
        assert_eq!(q3.evaluate(&[0, 0, 1, 1]).unwrap(), 3);
        assert_eq!(q3.evaluate(&[1, 1, 0, 0]).unwrap(), 4);
        assert!(q3.evaluate(&[1, 1]).is_err());
    }

    #[test]
    fn determinant_two_ways_small() {
        // Cofactor expansion oracle for m <= 4.
        fn det_cofactor(a: &[i128], n: usize) -> i128 {
            if n == 1 {
                return a[0];
            }
            let mut acc = 0i128;
            for j in 0..n {
                let mut sub = Vec::with_capacity((n - 1) * (n - 1));
                for r in 1..n {
                    for c in 0..n {
                        if c != j {
                            sub.push(a[r * n + c]);
                        }
                    }
                }
                let term = a[j] * det_cofactor(&sub, n - 1);
                if j % 2 == 0 {
                    acc += term;
                } else {
                    acc -= term;
                }
            }
            acc
        }
        for q in [
            fixtures::sum_of_squares(4),
            fixtures::example3(),
            fixtures::diag_1113(),
        ] {
            let a: Vec<i128> = q.matrix().iter().map(|&v| v as i128).collect();
            assert_eq!(det_cofactor(&a, 4), q.invariants().det_a);
        }
    }

    #[test]
    fn positivity_on_random_vectors() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for q in fixtures::battery() {
            for _ in 0..10_000 {
                let y: Vec<i64> = (0..q.m()).map(|_| rng.gen_range(-30..=30)).collect();
                if y.iter().any(|&v| v != 0) {
                    assert!(q.evaluate(&y).unwrap() > 0);
                }
            }
        }
    }

    #[test]
    fn lambda_bound_dominates_rayleigh() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for q in fixtures::battery() {
            let bound = q.invariants().lambda_bound;
            for _ in 0..1000 {
                let y: Vec<i64> = (0..q.m()).map(|_| rng.gen_range(-9..=9)).collect();
                let norm2: i64 = y.iter().map(|v| v * v).sum();
                if norm2 == 0 {
                    continue;
                }
                // y^t A y / y^t y = 2 Q(y) / |y|^2 <= lambda_max <= m ||Q||.
                let quad = 2 * q.evaluate(&y).unwrap();
                assert!(quad <= bound * norm2, "Rayleigh quotient exceeds bound");
            }
        }
    }

    #[test]
    fn parse_form_file_roundtrip() {
        let text = r#"
m = 4
coefficients = [
  { i = 1, j = 1, c = 1 },
  { i = 2, j = 2, c = 3 },
  { i = 3, j = 3, c = 1 },
  { i = 3, j = 4, c = 1 },
  { i = 4, j = 4, c = 1 },
]
"#;
        let q = parse_form_file(text).unwrap();
        assert_eq!(q, fixtures::example3());
        assert!(parse_form_file("m = 4").is_err());
        assert!(parse_form_file("nonsense = true").is_err());
    }
}
