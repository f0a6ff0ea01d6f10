//! Trend ties between the exact partial sums and the Euler-product leading
//! coefficients: S_W(x, x^2) / (C_W x^{m-1} log^2 x) and its S_Q analogue
//! drift towards 1 from above as x grows.

use num::ToPrimitive;
use qcubic::density::DensityContext;
use qcubic::{constants, counting, fixtures};

fn ratios_w(q: &qcubic::QuadraticForm, xs: &[u64]) -> Vec<f64> {
    let cw = constants::frak_c_w(q, 20_000).unwrap().result.value;
    let m = q.m() as i32;
    xs.iter()
        .map(|&x| {
            let s = counting::s_w_sum_exact(q, x, x * x)
                .unwrap()
                .to_f64()
                .unwrap();
            let l = (x as f64).ln();
            s / (cw * (x as f64).powi(m - 1) * l * l)
        })
        .collect()
}

#[test]
fn s_w_growth_matches_euler_product() {
    for (name, q, xs) in [
        ("sum-of-4-squares", fixtures::sum_of_squares(4), vec![50u64, 100, 200, 400, 800]),
        ("example-3", fixtures::example3(), vec![50, 100, 200, 400, 800]),
        ("sum-of-6-squares", fixtures::sum_of_squares(6), vec![50, 100, 200]),
    ] {
        let ratios = ratios_w(&q, &xs);
        assert!(
            ratios.windows(2).all(|w| w[1] < w[0]),
            "{name}: {ratios:?} not decreasing"
        );
        let (first, last) = (ratios[0], *ratios.last().unwrap());
        assert!(
            (last - 1.0).abs() < (first - 1.0).abs() && last > 1.0,
            "{name}: {first} -> {last}"
        );
    }
}

#[test]
fn s_q_growth_matches_euler_product() {
    let q = fixtures::sum_of_squares(4);
    let ctx = DensityContext::new(q.clone());
    let cq = constants::frak_c_q(&ctx, 20_000).unwrap().result.value;
    let xs = [50u64, 100, 200, 400, 800];
    let ratios: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let s = counting::s_q_sum(&ctx, x, x * x).unwrap().value;
            let l = (x as f64).ln();
            s / (cq * (x as f64).powi(3) * l * l)
        })
        .collect();
    assert!(ratios.windows(2).all(|w| w[1] < w[0]), "{ratios:?}");
    assert!((ratios.last().unwrap() - 1.0).abs() < (ratios[0] - 1.0).abs());
}
