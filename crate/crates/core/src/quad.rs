//! Small quadrature and special-function helpers.

use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = x;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss-Legendre rule on `[a, b]` with `panels` panels of `order` nodes.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((mid + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

/// Bessel function of the first kind of integer order 0 or 1.
pub fn bessel_j(order: u32, z: f64) -> f64 {
    let sign = if order == 1 && z < 0.0 { -1.0 } else { 1.0 };
    let z = z.abs();
    let n = order as f64;
    if z > 30.0 {
        // Hankel asymptotic expansion; 14 terms are accurate to roughly 1e-15 here.
        let mu = 4.0 * n * n;
        let (mut p, mut q) = (0.0, 0.0);
        let mut term = 1.0;
        for k in 0..14 {
            if k > 0 {
                let odd = (2 * k - 1) as f64;
                term *= (mu - odd * odd) / (k as f64 * 8.0 * z);
            }
            let s = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                p += s * term;
            } else {
                q += s * term;
            }
        }
        let chi = z - (0.5 * n + 0.25) * PI;
        return sign * (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin());
    }
    // Trapezoid rule over a full period is spectrally accurate for this integrand.
    let m = 2 * (z.ceil() as usize) + 40;
    let mut acc = 0.0;
    for i in 0..m {
        let theta = 2.0 * PI * i as f64 / m as f64;
        acc += (n * theta - z * theta.sin()).cos();
    }
    sign * acc / m as f64
}

/// Pairwise (cascade) summation; deterministic and more accurate than a fold.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let rule = composite_rule(0.0, 2.0, 3, 8);
        let v: f64 = rule.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn bessel_matches_reference_values() {
        // Reference values from standard tables.
        assert!((bessel_j(0, 1.0) - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((bessel_j(1, 1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j(0, 10.0) - (-0.245_935_764_451_348_3)).abs() < 1e-14);
        assert!((bessel_j(1, 50.0) - (-0.097_511_828_125_175_6)).abs() < 1e-13);
        assert!((bessel_j(0, 35.0) - (-0.126_845_682_756_312_7)).abs() < 1e-13);
        assert!((bessel_j(1, 25.0) - (-0.125_350_249_580_289_8)).abs() < 1e-13);
    }
}
