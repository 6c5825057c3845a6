//! Threshold energies `{Omega(P-k) + omega(k) : grad Omega(P-k) = grad omega(k)}`.
//!
//! For radial functions, `a (P - k) = b k` with `a = Omega'(|P-k|)/|P-k|` and
//! `b = omega'(|k|)/|k|`. Either `k` lies on the line through `P`, or
//! `a = b = 0`, i.e. `|k|` is a critical radius of `omega` and `|P - k|` one of
//! `Omega`. The first family is found by a 1-D root scan, the second by
//! pairing critical radii under the triangle inequality.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{radius, DispersionModel, FieldDispersion, MatterDispersion};

/// Initial number of scan points on the axis.
pub const INITIAL_SCAN: usize = 4096;
const MAX_DOUBLINGS: usize = 8;
const DEDUP_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Axis,
    DegenerateRing,
    Origin,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdWitness {
    pub momentum: Vec<f64>,
    pub kind: CriticalKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub p: Vec<f64>,
    /// Sorted and deduplicated.
    pub energies: Vec<f64>,
    /// One witness per energy.
    pub witnesses: Vec<ThresholdWitness>,
    /// Final scan resolution used to certify the root count.
    pub scan_points: usize,
}

/// Radii where a radial profile is stationary.
#[derive(Clone, Debug, PartialEq)]
pub enum CriticalRadii {
    Finite(Vec<f64>),
    /// The profile is constant.
    All,
}

pub fn matter_critical_radii(m: &MatterDispersion) -> CriticalRadii {
    match m {
        MatterDispersion::Constant { .. } => CriticalRadii::All,
        _ => CriticalRadii::Finite(vec![0.0]),
    }
}

pub fn field_critical_radii(f: &FieldDispersion) -> CriticalRadii {
    match f {
        FieldDispersion::Constant { .. } => CriticalRadii::All,
        FieldDispersion::Relativistic { .. } => CriticalRadii::Finite(vec![0.0]),
    }
}

/// Axis through `P`: `k = t u` with `u = P/|P|` (or the first unit vector at `P = 0`).
struct Axis<'a> {
    model: &'a DispersionModel,
    p_norm: f64,
    unit: Vec<f64>,
}

impl<'a> Axis<'a> {
    fn new(model: &'a DispersionModel, p: &[f64]) -> Self {
        let p_norm = radius(p);
        let unit = if p_norm > 0.0 {
            p.iter().map(|v| v / p_norm).collect()
        } else {
            let mut u = vec![0.0; p.len()];
            u[0] = 1.0;
            u
        };
        Self { model, p_norm, unit }
    }

    /// Fiber energy at `k = t u`.
    fn energy(&self, t: f64) -> f64 {
        let rel = self.p_norm - t;
        self.model.field.jet(t.abs()).value + self.model.matter.jet(rel.abs()).value
    }

    /// `(grad Omega(P - k) - grad omega(k)) . u` at `k = t u`.
    fn stationarity(&self, t: f64) -> f64 {
        let rel = self.p_norm - t;
        rel * self.model.matter.jet(rel.abs()).d1_over_r - t * self.model.field.jet(t.abs()).d1_over_r
    }

    fn point(&self, t: f64) -> Vec<f64> {
        self.unit.iter().map(|u| t * u).collect()
    }

    fn samples(&self, r: f64, n: usize) -> impl Iterator<Item = f64> {
        let h = 2.0 * r / (n - 1) as f64;
        (0..n).map(move |i| if i == n - 1 { r } else { -r + i as f64 * h })
    }
}

enum Crossing {
    Exact(f64),
    Bracket(f64, f64),
}

fn crossings(f: impl Fn(f64) -> f64, ts: impl Iterator<Item = f64>) -> Vec<Crossing> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for t in ts {
        let v = f(t);
        if v == 0.0 {
            out.push(Crossing::Exact(t));
        } else if let Some((pt, pv)) = prev {
            if pv != 0.0 && (pv < 0.0) != (v < 0.0) {
                out.push(Crossing::Bracket(pt, t));
            }
        }
        prev = Some((t, v));
    }
    out
}

/// Bisection on a sign-change bracket down to adjacent doubles.
fn refine_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mid <= a.min(b) || mid >= a.max(b) {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
        } else {
            b = mid;
        }
    }
    if f(a).abs() <= f(b).abs() {
        a
    } else {
        b
    }
}

/// Brent's parabolic/golden minimization on `[a, b]`.
pub(crate) fn brent_minimize(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    const GOLD: f64 = 0.381_966_011_250_105;
    let mut x = a + GOLD * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x);
    let (mut fw, mut fv) = (fx, fx);
    let (mut d, mut e): (f64, f64) = (0.0, 0.0);
    for _ in 0..500 {
        let xm = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-15;
        let tol2 = 2.0 * tol1;
        if (x - xm).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if xm >= x { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x >= xm { a - x } else { b - x };
            d = GOLD * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = f(u);
        if fu <= fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            (v, fv, w, fw, x, fx) = (w, fw, x, fx, u, fu);
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                (v, fv, w, fw) = (w, fw, u, fu);
            } else if fu <= fv || v == x || v == w {
                (v, fv) = (u, fu);
            }
        }
    }
    (x, fx)
}

/// A search radius comfortably beyond the region where the gradients can balance.
pub fn default_search_radius(model: &DispersionModel, p: &[f64]) -> f64 {
    let mass = match model.matter {
        MatterDispersion::NonRelativistic { mass } => mass,
        _ => 1.0,
    };
    2.0 * radius(p) + 20.0 * mass.max(1.0)
}

struct Candidate {
    energy: f64,
    witness: ThresholdWitness,
}

fn degenerate_candidates(model: &DispersionModel, p: &[f64]) -> Vec<Candidate> {
    let axis = Axis::new(model, p);
    let pn = axis.p_norm;
    let field = |r: f64| model.field.jet(r).value;
    let matter = |r: f64| model.matter.jet(r).value;
    let mut out = Vec::new();
    let mut push = |energy: f64, momentum: Vec<f64>| {
        let kind = if radius(&momentum) == 0.0 { CriticalKind::Origin } else { CriticalKind::DegenerateRing };
        out.push(Candidate { energy, witness: ThresholdWitness { momentum, kind } });
    };
    match (field_critical_radii(&model.field), matter_critical_radii(&model.matter)) {
        (CriticalRadii::Finite(rw), CriticalRadii::Finite(rm)) => {
            for &a in &rw {
                for &b in &rm {
                    let tol = 1e-12 * (1.0 + pn + a + b);
                    if (pn - a).abs() > b + tol || b > pn + a + tol {
                        continue;
                    }
                    let k = if a == 0.0 {
                        vec![0.0; p.len()]
                    } else if pn == 0.0 {
                        axis.point(a)
                    } else {
                        let c = ((a * a + pn * pn - b * b) / (2.0 * pn * a)).clamp(-1.0, 1.0);
                        let s = (1.0 - c * c).sqrt();
                        let mut k = axis.point(a * c);
                        if p.len() > 1 && s > 0.0 {
                            let perp = perpendicular(&axis.unit);
                            for (ki, e) in k.iter_mut().zip(&perp) {
                                *ki += a * s * e;
                            }
                        }
                        k
                    };
                    push(field(a) + matter(b), k);
                }
            }
        }
        (CriticalRadii::All, CriticalRadii::Finite(rm)) => {
            for &b in &rm {
                push(field(0.0) + matter(b), axis.point(pn - b));
            }
        }
        (CriticalRadii::Finite(rw), CriticalRadii::All) => {
            for &a in &rw {
                push(field(a) + matter(0.0), axis.point(a));
            }
        }
        (CriticalRadii::All, CriticalRadii::All) => push(field(0.0) + matter(0.0), p.to_vec()),
    }
    out
}

fn perpendicular(u: &[f64]) -> Vec<f64> {
    // Gram-Schmidt against the coordinate vector least aligned with u.
    let (imin, _) = u.iter().enumerate().min_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).expect("nonempty");
    let mut e = vec![0.0; u.len()];
    e[imin] = 1.0;
    let dot: f64 = u[imin];
    for (ei, ui) in e.iter_mut().zip(u) {
        *ei -= dot * ui;
    }
    let n = radius(&e);
    e.iter().map(|v| v / n).collect()
}

fn both_flat(model: &DispersionModel) -> bool {
    matches!(model.matter, MatterDispersion::Constant { .. }) && matches!(model.field, FieldDispersion::Constant { .. })
}

/// Threshold set `theta(P)` with one critical momentum per energy.
pub fn threshold_set(model: &DispersionModel, p: &[f64], search_radius: f64) -> Result<ThresholdSet> {
    threshold_set_with_scan(model, p, search_radius, INITIAL_SCAN)
}

/// [`threshold_set`] with the axis scan starting at `initial_scan` points.
pub fn threshold_set_with_scan(
    model: &DispersionModel,
    p: &[f64],
    search_radius: f64,
    initial_scan: usize,
) -> Result<ThresholdSet> {
    if initial_scan < 2 {
        return Err(Error::config("the threshold scan needs at least two points"));
    }
    if p.len() != model.nu {
        return Err(Error::Dimension { expected: model.nu, got: p.len() });
    }
    if !(search_radius.is_finite() && search_radius > 0.0) {
        return Err(Error::config(format!("search radius must be positive, got {search_radius}")));
    }
    let axis = Axis::new(model, p);
    let mut candidates = degenerate_candidates(model, p);
    let mut scan_points = 0;

    if !both_flat(model) {
        let g = |t: f64| axis.stationarity(t);
        let mut counts = Vec::new();
        let mut n = initial_scan;
        let found = loop {
            let c = crossings(g, axis.samples(search_radius, n));
            counts.push(c.len());
            let stable = counts.len() >= 3 && counts[counts.len() - 3..].iter().all(|&x| x == c.len());
            if stable {
                scan_points = n;
                break c;
            }
            if counts.len() > MAX_DOUBLINGS {
                let intervals: Vec<String> = c
                    .iter()
                    .map(|x| match x {
                        Crossing::Exact(t) => format!("[{t}, {t}]"),
                        Crossing::Bracket(a, b) => format!("[{a}, {b}]"),
                    })
                    .collect();
                return Err(Error::numerical(format!(
                    "root count did not stabilize ({counts:?}); unresolved intervals: {}",
                    intervals.join(", ")
                )));
            }
            n *= 2;
        };
        for c in found {
            let t = match c {
                Crossing::Exact(t) => t,
                Crossing::Bracket(a, b) => refine_root(g, a, b),
            };
            let kind = if t == 0.0 || (axis.p_norm == 0.0 && t.abs() < 1e-300) {
                CriticalKind::Origin
            } else if axis.p_norm == 0.0 {
                CriticalKind::DegenerateRing
            } else {
                CriticalKind::Axis
            };
            let kind = if kind == CriticalKind::Axis || t.abs() > 1e-15 { kind } else { CriticalKind::Origin };
            candidates.push(Candidate {
                energy: axis.energy(t),
                witness: ThresholdWitness { momentum: axis.point(t), kind },
            });
        }
    }

    candidates.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    let mut energies: Vec<f64> = Vec::new();
    let mut witnesses = Vec::new();
    for c in candidates {
        if let Some(last) = energies.last() {
            if (c.energy - last).abs() <= DEDUP_TOLERANCE * last.abs().max(1.0) {
                continue;
            }
        }
        energies.push(c.energy);
        witnesses.push(c.witness);
    }
    Ok(ThresholdSet { p: p.to_vec(), energies, witnesses, scan_points })
}

/// `Sigma_ess(P)`: minimum of the fiber energy over critical points, refined by
/// Brent minimization around the scan minima on the axis.
pub fn essential_bottom(model: &DispersionModel, p: &[f64]) -> Result<f64> {
    if p.len() != model.nu {
        return Err(Error::Dimension { expected: model.nu, got: p.len() });
    }
    let axis = Axis::new(model, p);
    let mut best = degenerate_candidates(model, p).iter().map(|c| c.energy).fold(f64::INFINITY, f64::min);
    if both_flat(model) {
        return Ok(best);
    }
    let mut r = default_search_radius(model, p);
    for _ in 0..6 {
        let n = INITIAL_SCAN;
        let ts: Vec<f64> = axis.samples(r, n).collect();
        let fs: Vec<f64> = ts.iter().map(|&t| axis.energy(t)).collect();
        let mut edge = false;
        let mut local = best;
        for i in 0..n {
            let left = if i > 0 { fs[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < n { fs[i + 1] } else { f64::INFINITY };
            if fs[i] <= left && fs[i] <= right {
                if i == 0 || i == n - 1 {
                    edge = true;
                    local = local.min(fs[i]);
                    continue;
                }
                let (_, fmin) = brent_minimize(|t| axis.energy(t), ts[i - 1], ts[i + 1], 1e-10);
                local = local.min(fmin.min(fs[i]));
            }
        }
        if !edge {
            best = best.min(local);
            if !best.is_finite() {
                return Err(Error::numerical("fiber energy minimization produced no finite value"));
            }
            return Ok(best);
        }
        r *= 4.0;
    }
    Err(Error::numerical(format!(
        "fiber energy keeps decreasing at the scan boundary (radius {r}); Omega and omega may not be admissible"
    )))
}

/// A momentum on the energy shell `omega(k) + Omega(P - k) = lambda` along the
/// axis through `P`, chosen with the largest `|k|`. At a minimum of the fiber
/// energy the tangent point is returned.
pub fn energy_shell_point(model: &DispersionModel, p: &[f64], lambda: f64) -> Option<Vec<f64>> {
    let axis = Axis::new(model, p);
    let r = default_search_radius(model, p) * 4.0;
    let f = |t: f64| axis.energy(t) - lambda;
    let n = 16 * INITIAL_SCAN;
    let mut best: Option<f64> = None;
    for c in crossings(f, axis.samples(r, n)) {
        let t = match c {
            Crossing::Exact(t) => t,
            Crossing::Bracket(a, b) => refine_root(f, a, b),
        };
        if best.is_none_or(|b| t.abs() > b.abs()) {
            best = Some(t);
        }
    }
    if best.is_none() {
        let ts: Vec<f64> = axis.samples(r, n).collect();
        let i = (0..n).min_by(|&a, &b| f(ts[a]).abs().total_cmp(&f(ts[b]).abs()))?;
        if i > 0 && i + 1 < n {
            let (t, v) = brent_minimize(|t| axis.energy(t), ts[i - 1], ts[i + 1], 1e-12);
            if (v - lambda).abs() <= 1e-9 * lambda.abs().max(1.0) {
                best = Some(t);
            }
        }
    }
    best.map(|t| axis.point(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Coupling;

    #[test]
    fn flat_field_has_single_threshold() {
        let m = DispersionModel::polaron(1);
        for p in [0.0, 0.5, 2.0, -3.0] {
            let set = threshold_set(&m, &[p], 30.0).unwrap();
            assert_eq!(set.energies.len(), 1, "P={p}: {:?}", set.energies);
            assert!((set.energies[0] - 1.0).abs() < 1e-12);
            assert!((set.witnesses[0].momentum[0] - p).abs() < 1e-10);
        }
    }

    #[test]
    fn nelson_at_rest_has_origin_threshold() {
        let m = DispersionModel::nelson(1);
        let set = threshold_set(&m, &[0.0], 30.0).unwrap();
        assert_eq!(set.energies, vec![1.0]);
        assert_eq!(set.witnesses[0].kind, CriticalKind::Origin);
    }

    #[test]
    fn bottom_is_the_smallest_threshold() {
        for m in [DispersionModel::nelson(1), DispersionModel::relativistic(2)] {
            for p in [0.0, 0.7, 1.9, 4.0] {
                let mut pv = vec![0.0; m.nu];
                pv[0] = p;
                let set = threshold_set(&m, &pv, default_search_radius(&m, &pv)).unwrap();
                let bottom = essential_bottom(&m, &pv).unwrap();
                assert!((set.energies[0] - bottom).abs() < 1e-8, "{p}: {set:?} {bottom}");
            }
        }
    }

    #[test]
    fn flat_matter_threshold_is_at_the_origin() {
        let m = DispersionModel {
            matter: MatterDispersion::Constant { value: 0.5 },
            field: FieldDispersion::Relativistic { mass: 1.0 },
            coupling: Coupling::Gaussian { g: 0.1, sigma: 1.0 },
            ..DispersionModel::polaron(2)
        };
        let set = threshold_set(&m, &[1.0, 0.0], 20.0).unwrap();
        assert_eq!(set.energies, vec![1.5]);
        assert_eq!(essential_bottom(&m, &[1.0, 0.0]).unwrap(), 1.5);
    }

    #[test]
    fn brent_finds_a_parabola_minimum() {
        let (x, f) = brent_minimize(|t| (t - 0.3).powi(2) + 2.0, -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((f - 2.0).abs() < 1e-15);
    }

    #[test]
    fn shell_point_prefers_the_far_root() {
        let m = DispersionModel::polaron(1);
        let k = energy_shell_point(&m, &[3.0], 1.3).unwrap();
        assert!((k[0] - (3.0 + 0.6f64.sqrt())).abs() < 1e-10);
    }
}
