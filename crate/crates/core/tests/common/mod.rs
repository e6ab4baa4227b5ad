//! Independent reference implementations used to check the library.
//!
//! Nothing here calls into the crate's numeric code: utilities, emissions
//! fits and the argmax are re-derived from the closed forms.
#![allow(dead_code)]

pub const SLOPE: f64 = 0.19 / 0.0302;

/// Quadratic through (0.12, 0.19) and (0.28, 0.26) in (d - 1, r), by Cramer's rule.
pub fn quad() -> (f64, f64) {
    let (x1, r1, x2, r2) = (0.12f64, 0.19, 0.28f64, 0.26);
    let det = x1 * x1 * x2 - x2 * x2 * x1;
    let c2 = (r1 * x2 - r2 * x1) / det;
    let c1 = (x1 * x1 * r2 - x2 * x2 * r1) / det;
    (c1, c2)
}

pub fn u_acc(a: f64, b: f64) -> f64 {
    1.0 - (2.0 / (1.0 - 6.5 * (1.0 - a)) - 1.0).log10() / b
}

pub fn u_lat(d: f64, x: f64) -> f64 {
    1.0 - 1.0 / (1.0 + (7.0 - 70.0 * (d - x)).exp())
}

pub fn reduction(a: f64, d: f64) -> f64 {
    let (c1, c2) = quad();
    let y = d - 1.0;
    (SLOPE * (1.0 - a) + (c2 * y * y + c1 * y).max(0.0)).min(0.8)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub a: f64,
    pub d: f64,
    pub r: f64,
    pub nb: f64,
}

/// Exhaustive argmax over `n_a × n_d` evenly spaced points on the
/// [0.88, 1] × [1, 1.28] box, with the same tie-breaking rule.
pub fn brute_force(lambda: f64, b: f64, x: f64, p: f64, a_step: f64, d_step: f64) -> Pick {
    let n_a = (0.12 / a_step).round() as usize;
    let n_d = (0.28 / d_step).round() as usize;
    let a_vals: Vec<f64> = (0..=n_a).map(|i| if i == n_a { 0.88 } else { 1.0 - i as f64 * a_step }).collect();
    let d_vals: Vec<f64> = (0..=n_d).map(|j| if j == n_d { 1.28 } else { 1.0 + j as f64 * d_step }).collect();
    let mut best: Option<Pick> = None;
    for &a in &a_vals {
        for &d in &d_vals {
            let r = reduction(a, d);
            let u = lambda * u_acc(a, b) + (1.0 - lambda) * u_lat(d, x);
            let nb = u - p * (1.0 - r);
            let cand = Pick { a, d, r, nb };
            best = Some(match best {
                None => cand,
                Some(cur) => {
                    let key = |k: &Pick| (k.nb, k.r, k.a, -k.d);
                    if key(&cand).partial_cmp(&key(&cur)) == Some(std::cmp::Ordering::Greater) {
                        cand
                    } else {
                        cur
                    }
                }
            });
        }
    }
    best.unwrap()
}

/// Seeded generator so sampled cases are the same on every run.
pub fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::SeedableRng::seed_from_u64(seed)
}
