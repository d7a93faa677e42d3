// SPDX-License-Identifier: Apache-2.0

//! Integer-order Bessel `J_n` and Anger–Weber `E_n` functions in their
//! integral form, `(1/π)∫₀^π {cos, sin}(nθ − x sin θ) dθ`.
//!
//! Moderate arguments use Gauss–Legendre quadrature with a node count that
//! grows with `x`. Large arguments (long-time correlators reach `x ≈ 10⁵`)
//! switch to the Hankel asymptotic expansions, where `E_n` is obtained from
//! `Y_n` plus the asymptotic series of the Struve-type remainder.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::{Arc, Mutex, OnceLock};

/// Above this argument (plus `n²`) the asymptotic branch is used.
const ASYMPTOTIC_FROM: f64 = 40.0;

struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    fn new(n: usize) -> Self {
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                if n == 1 {
                    p0 = 1.0;
                }
                dp = nf * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }
}

fn rule(n: usize) -> Arc<GaussLegendre> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let r = Arc::new(GaussLegendre::new(n));
    cache.lock().unwrap().entry(n).or_insert(r).clone()
}

/// Gauss–Legendre `∫_a^b f` with `n` nodes.
pub(crate) fn integrate(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let gl = rule(n);
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    half * gl.nodes.iter().zip(&gl.weights).map(|(&z, &w)| w * f(mid + half * z)).sum::<f64>()
}

/// Default node count: `max(32, ⌈1.5·(|x| + |n|)⌉) + 32`, rounded up to a
/// multiple of 32 so that rules are shared between nearby arguments.
pub fn default_nodes(n: i64, x: f64) -> usize {
    let base = (1.5 * (x.abs() + n.unsigned_abs() as f64)).ceil().max(32.0) as usize + 32;
    base.div_ceil(32) * 32
}

/// `(J_n(x), E_n(x))` by `nodes`-point Gauss–Legendre quadrature.
pub fn bessel_weber_quadrature(n: i64, x: f64, nodes: usize) -> (f64, f64) {
    let gl = rule(nodes);
    let nf = n as f64;
    let (mut j, mut e) = (0.0, 0.0);
    for (&z, &w) in gl.nodes.iter().zip(&gl.weights) {
        let theta = FRAC_PI_2 * (z + 1.0);
        let (s, c) = (nf * theta - x * theta.sin()).sin_cos();
        j += w * c;
        e += w * s;
    }
    // (1/π)·(π/2)·Σ
    (0.5 * j, 0.5 * e)
}

fn use_asymptotic(n: u64, x: f64) -> bool {
    x >= ASYMPTOTIC_FROM + (n * n) as f64
}

/// Hankel expansion: `(J_n(x), Y_n(x))` for `n ≥ 0`, large `x > 0`.
fn hankel_jy(n: u64, x: f64) -> (f64, f64) {
    let mu = 4.0 * (n * n) as f64;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        term *= (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * x);
        if term.abs() > last || term == 0.0 {
            break;
        }
        last = term.abs();
        // a_k/x^k enters P with sign (−1)^{k/2} (k even) and Q with (−1)^{(k−1)/2} (k odd)
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
        if last < 1e-17 {
            break;
        }
    }
    let (sx, cx) = x.sin_cos();
    let phi = n as f64 * FRAC_PI_2 + FRAC_PI_4;
    let (sp, cp) = phi.sin_cos();
    // ω = x − φ
    let cw = cx * cp + sx * sp;
    let sw = sx * cp - cx * sp;
    let amp = (2.0 / (PI * x)).sqrt();
    (amp * (p * cw - q * sw), amp * (p * sw + q * cw))
}

/// Γ(m + ½) for integer `m`.
fn gamma_half(m: i64) -> f64 {
    let mut g = PI.sqrt();
    if m >= 0 {
        for k in 0..m {
            g *= k as f64 + 0.5;
        }
    } else {
        for k in (m..0).rev() {
            g /= k as f64 + 0.5;
        }
    }
    g
}

/// Large-`x` `E_n(x)`, `n ≥ 0`: `−Y_n(x) − (1/π)Σ_{k≥k₀} Γ(k+½)(x/2)^{n−2k−1}/Γ(n+½−k)`.
fn weber_asymptotic(n: u64, y: f64, x: f64) -> f64 {
    let ni = n as i64;
    let k0 = if n == 0 { 0 } else { (ni - 1) / 2 + 1 };
    let h = 0.5 * x;
    let mut term = gamma_half(k0) * h.powi((ni - 2 * k0 - 1) as i32) / gamma_half(ni - k0);
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut k = k0;
    loop {
        if term.abs() > last {
            break;
        }
        sum += term;
        last = term.abs();
        if last <= 1e-17 * sum.abs() || k > k0 + 200 {
            break;
        }
        let kf = k as f64;
        term *= (kf + 0.5) * (n as f64 - 0.5 - kf) / (h * h);
        k += 1;
    }
    -y - sum / PI
}

fn sign(odd: bool) -> f64 {
    if odd {
        -1.0
    } else {
        1.0
    }
}

/// `(J_n(x), E_n(x))`, absolute accuracy ≈ 1e−12 or better.
pub fn bessel_weber(n: i64, x: f64) -> (f64, f64) {
    let na = n.unsigned_abs();
    if !use_asymptotic(na, x.abs()) {
        return bessel_weber_quadrature(n, x, default_nodes(n, x));
    }
    // J_{−n} = (−1)ⁿJ_n, E_{−n} = (−1)ⁿE_n, J_n(−x) = (−1)ⁿJ_n(x), E_n(−x) = −(−1)ⁿE_n(x)
    let xa = x.abs();
    let (j, y) = hankel_jy(na, xa);
    let e = weber_asymptotic(na, y, xa);
    let odd = na % 2 == 1;
    let (mut j, mut e) = (j, e);
    if n < 0 {
        j *= sign(odd);
        e *= sign(odd);
    }
    if x < 0.0 {
        j *= sign(odd);
        e *= -sign(odd);
    }
    (j, e)
}

pub fn bessel_j(n: i64, x: f64) -> f64 {
    bessel_weber(n, x).0
}

pub fn weber_e(n: i64, x: f64) -> f64 {
    bessel_weber(n, x).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Power series Σ (−1)^k (x/2)^{2k+n} / (k!(k+n)!), summed with compensation.
    fn j_series(n: u32, x: f64) -> f64 {
        let h = x / 2.0;
        let mut term = h.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>();
        let mut sum = 0.0;
        for k in 0..200 {
            sum += term;
            term *= -h * h / ((k + 1) as f64 * (k + 1 + n) as f64);
        }
        sum
    }

    /// Struve series H_0, H_1; E_0 = −H_0 and E_1 = 2/π − H_1.
    fn struve(n: u32, x: f64) -> f64 {
        let h = x / 2.0;
        (0..80)
            .map(|k| {
                let sg = if k % 2 == 0 { 1.0 } else { -1.0 };
                sg * h.powi(2 * k + 1 + n as i32) / (gamma_half(k as i64 + 1) * gamma_half(k as i64 + 1 + n as i64))
            })
            .sum()
    }

    #[test]
    fn closed_form_values() {
        assert!((bessel_j(0, 0.0) - 1.0).abs() < 1e-15);
        assert!(bessel_j(1, 0.0).abs() < 1e-15);
        assert!(weber_e(0, 0.0).abs() < 1e-15);
        assert!((weber_e(1, 0.0) - 2.0 / PI).abs() < 1e-14);
        assert!((weber_e(-1, 0.0) + 2.0 / PI).abs() < 1e-14);
        assert!(bessel_j(0, 2.4048255577).abs() < 1e-9);
    }

    #[test]
    fn quadrature_matches_power_series() {
        for n in 0..6u32 {
            for &x in &[0.1, 1.0, 2.5, 7.0, 12.0] {
                let want = j_series(n, x);
                assert!((bessel_j(n as i64, x) - want).abs() < 1e-12, "J_{n}({x})");
                assert!((bessel_j(-(n as i64), x) - sign(n % 2 == 1) * want).abs() < 1e-12);
            }
        }
        for &x in &[0.3, 1.0, 4.0, 9.0] {
            assert!((weber_e(0, x) + struve(0, x)).abs() < 1e-12, "E_0({x})");
            assert!((weber_e(1, x) - 2.0 / PI + struve(1, x)).abs() < 1e-12, "E_1({x})");
            assert!((weber_e(-1, x) + weber_e(1, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn asymptotic_branch_matches_quadrature() {
        for n in -5..=5i64 {
            for &x in &[66.0, 120.0, 480.5, 2000.0, 6001.25] {
                let (jq, eq) = bessel_weber_quadrature(n, x, default_nodes(n, x) * 2);
                let (ja, ea) = bessel_weber(n, x);
                assert!(use_asymptotic(n.unsigned_abs(), x));
                assert!((jq - ja).abs() < 1e-13, "J_{n}({x}): {jq} vs {ja}");
                assert!((eq - ea).abs() < 1e-13, "E_{n}({x}): {eq} vs {ea}");
            }
        }
    }

    #[test]
    fn negative_arguments_follow_parity() {
        for n in -4..=4i64 {
            for &x in &[0.7, 30.0, 150.0] {
                let (jp, ep) = bessel_weber(n, x);
                let (jm, em) = bessel_weber(n, -x);
                let s = sign(n.rem_euclid(2) == 1);
                assert!((jm - s * jp).abs() < 1e-13);
                assert!((em + s * ep).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn node_doubling_converged_to_t_1000() {
        // x = 2Γt with Γ = 1/2 covers t up to 1000
        for &x in &[0.0, 3.3, 47.0, 333.3, 999.9] {
            for n in -1..=1i64 {
                let a = bessel_weber_quadrature(n, x, default_nodes(n, x));
                let b = bessel_weber_quadrature(n, x, 2 * default_nodes(n, x));
                assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let gl = GaussLegendre::new(7);
        let int: f64 = gl.nodes.iter().zip(&gl.weights).map(|(z, w)| w * z.powi(12)).sum();
        assert!((int - 2.0 / 13.0).abs() < 1e-15);
        assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn recurrence_holds(n in -6i64..6, x in 0.5f64..3000.0) {
            // J_{n−1} + J_{n+1} = (2n/x) J_n ;  E_{n−1} + E_{n+1} = (2n/x) E_n − (2/(πx))(1 − cos nπ)
            let (jm, em) = bessel_weber(n - 1, x);
            let (j0, e0) = bessel_weber(n, x);
            let (jp, ep) = bessel_weber(n + 1, x);
            let nf = n as f64;
            prop_assert!((jm + jp - 2.0 * nf / x * j0).abs() < 2e-12);
            let c = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            prop_assert!((em + ep - 2.0 * nf / x * e0 + 2.0 / (PI * x) * (1.0 - c)).abs() < 2e-12);
        }
    }
}
