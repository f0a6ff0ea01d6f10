//! The reference forms used throughout the test and verification suites.

use crate::qform::{build_form, Coefficient, QuadraticForm};

/// y_1^2 + ... + y_m^2.
pub fn sum_of_squares(m: usize) -> QuadraticForm {
    let coeffs: Vec<Coefficient> = (1..=m).map(|i| Coefficient { i, j: i, c: 1 }).collect();
    build_form(m, &coeffs).expect("sum of squares is valid")
}

/// y_1^2 + 3 y_2^2 + y_3^2 + y_3 y_4 + y_4^2.
pub fn example3() -> QuadraticForm {
    build_form(
        4,
        &[
            Coefficient { i: 1, j: 1, c: 1 },
            Coefficient { i: 2, j: 2, c: 3 },
            Coefficient { i: 3, j: 3, c: 1 },
            Coefficient { i: 3, j: 4, c: 1 },
            Coefficient { i: 4, j: 4, c: 1 },
        ],
    )
    .expect("example 3 is valid")
}

/// y_1^2 + y_2^2 + y_3^2 + 3 y_4^2, the odd-ell calibration form.
pub fn diag_1113() -> QuadraticForm {
    build_form(
        4,
        &[
            Coefficient { i: 1, j: 1, c: 1 },
            Coefficient { i: 2, j: 2, c: 1 },
            Coefficient { i: 3, j: 3, c: 1 },
            Coefficient { i: 4, j: 4, c: 3 },
        ],
    )
    .expect("diag(1,1,1,3) is valid")
}

/// The E8 root lattice form, Q(y) = |sum y_i alpha_i|^2 / 2 in the root basis.
///
/// A is the E8 Cartan matrix (Bourbaki numbering: chain 1-3-4-5-6-7-8 with 2
/// attached to 4); |A| = 1 and the level is one.
pub fn e8() -> QuadraticForm {
    let edges = [(1, 3), (3, 4), (2, 4), (4, 5), (5, 6), (6, 7), (7, 8)];
    let mut coeffs: Vec<Coefficient> = (1..=8).map(|i| Coefficient { i, j: i, c: 1 }).collect();
    coeffs.extend(edges.iter().map(|&(i, j)| Coefficient { i, j, c: -1 }));
    build_form(8, &coeffs).expect("E8 is valid")
}

/// The full acceptance battery.
pub fn battery() -> Vec<QuadraticForm> {
    vec![
        sum_of_squares(4),
        sum_of_squares(6),
        sum_of_squares(8),
        example3(),
        diag_1113(),
        e8(),
    ]
}

/// Battery entries with names, for reporting.
pub fn named_battery() -> Vec<(&'static str, QuadraticForm)> {
    vec![
        ("sum-of-4-squares", sum_of_squares(4)),
        ("sum-of-6-squares", sum_of_squares(6)),
        ("sum-of-8-squares", sum_of_squares(8)),
        ("example-3", example3()),
        ("diag-1-1-1-3", diag_1113()),
        ("e8", e8()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e8_is_even_unimodular() {
        let q = e8();
        let inv = q.invariants();
        assert_eq!(inv.det_a, 1);
        assert_eq!(inv.level, 1);
        assert_eq!(inv.disc, 1);
        // All diagonal polynomial coefficients are 1, so roots have Q = 1.
        let mut e1 = vec![0i64; 8];
        e1[0] = 1;
        assert_eq!(q.evaluate(&e1).unwrap(), 1);
    }
}
