//! Adaptive composite Gauss quadrature on log-spaced panels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::domain::Interval;
use crate::error::{Error, Result};

const GAUSS_ORDER: usize = 15;

/// Tolerance and panel budget for the adaptive integrator.
///
/// `rel_tol` is measured against the integrand's panelwise L1 mass rather
/// than the (possibly cancelling) signed total, so inner products of
/// near-orthogonal functions still converge to a meaningful absolute
/// accuracy.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureRule {
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            max_panels: 4096,
        }
    }
}

fn gauss_nodes() -> &'static ([f64; GAUSS_ORDER], [f64; GAUSS_ORDER]) {
    static NODES: OnceLock<([f64; GAUSS_ORDER], [f64; GAUSS_ORDER])> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GAUSS_ORDER;
        let mut x = [0.0; GAUSS_ORDER];
        let mut w = [0.0; GAUSS_ORDER];
        for i in 1..=n.div_ceil(2) {
            // Newton iteration on the Legendre polynomial, standard cosine
            // initial guess.
            let mut z = (std::f64::consts::PI * (i as f64 - 0.25) / (n as f64 + 0.5)).cos();
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = 1.0;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    p1 = (((2 * j - 1) as f64) * z * p2 - ((j - 1) as f64) * p3) / j as f64;
                }
                pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-16 {
                    break;
                }
            }
            x[i - 1] = -z;
            x[n - i] = z;
            let wi = 2.0 / ((1.0 - z * z) * pp * pp);
            w[i - 1] = wi;
            w[n - i] = wi;
        }
        (x, w)
    })
}

fn gauss_panel(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let (xs, ws) = gauss_nodes();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in xs.iter().zip(ws) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

struct Panel {
    a: f64,
    b: f64,
    /// Sum of the two half-panel estimates (the value this panel reports).
    value: f64,
    /// |single-panel estimate - half-panel sum|.
    err: f64,
    l1: f64,
    left_half: f64,
    right_half: f64,
}

impl Panel {
    fn build(f: &impl Fn(f64) -> f64, a: f64, b: f64, whole: f64) -> Self {
        let mid = 0.5 * (a + b);
        let left = gauss_panel(f, a, mid);
        let right = gauss_panel(f, mid, b);
        Panel {
            a,
            b,
            value: left + right,
            err: (whole - (left + right)).abs(),
            l1: left.abs() + right.abs(),
            left_half: left,
            right_half: right,
        }
    }
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn initial_breakpoints(on: Interval) -> Vec<f64> {
    let (a, b) = (on.lo(), on.hi());
    if a > 0.0 && b / a > 10.0 {
        // Log-spaced panels resolve integrands that live on many decades.
        let decades = (b / a).ln();
        let n = (decades.ceil() as usize).clamp(4, 40);
        let mut pts = Vec::with_capacity(n + 1);
        pts.push(a);
        for i in 1..n {
            pts.push(a * (b / a).powf(i as f64 / n as f64));
        }
        pts.push(b);
        pts
    } else {
        let n = 4;
        (0..=n)
            .map(|i| a + (b - a) * i as f64 / n as f64)
            .collect()
    }
}

/// Integrates `f` over the interval to the rule's tolerance.
pub fn integrate(f: impl Fn(f64) -> f64, on: Interval, rule: &QuadratureRule) -> Result<f64> {
    Ok(integrate_inner(f, on, rule)?.0)
}

/// Like [`integrate`], additionally returning the final panel breakpoints.
/// Re-running nearby integrands on this frozen partition (via
/// [`integrate_fixed`]) yields values that vary smoothly with the
/// integrand's parameters, which derivative-based refinement relies on.
pub fn integrate_with_partition(
    f: impl Fn(f64) -> f64,
    on: Interval,
    rule: &QuadratureRule,
) -> Result<(f64, Vec<f64>)> {
    integrate_inner(f, on, rule)
}

/// Composite Gauss on a fixed partition (no adaptivity, no failure path).
pub fn integrate_fixed(f: impl Fn(f64) -> f64, breaks: &[f64]) -> f64 {
    breaks
        .windows(2)
        .map(|w| gauss_panel(&f, w[0], w[1]))
        .sum()
}

fn integrate_inner(
    f: impl Fn(f64) -> f64,
    on: Interval,
    rule: &QuadratureRule,
) -> Result<(f64, Vec<f64>)> {
    let breaks = initial_breakpoints(on);
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut total_l1 = 0.0;
    for pair in breaks.windows(2) {
        let whole = gauss_panel(&f, pair[0], pair[1]);
        let p = Panel::build(&f, pair[0], pair[1], whole);
        total += p.value;
        total_err += p.err;
        total_l1 += p.l1;
        heap.push(p);
    }

    while total_err > rule.rel_tol * total_l1.max(f64::MIN_POSITIVE) {
        if heap.len() >= rule.max_panels {
            return Err(Error::QuadratureFailure {
                estimate: total,
                panels: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap never empty here");
        // Splitting at machine resolution means the estimate will not move.
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            return Err(Error::QuadratureFailure {
                estimate: total,
                panels: heap.len() + 1,
            });
        }
        total -= worst.value;
        total_err -= worst.err;
        total_l1 -= worst.l1;
        for (a, b, whole) in [
            (worst.a, mid, worst.left_half),
            (mid, worst.b, worst.right_half),
        ] {
            let p = Panel::build(&f, a, b, whole);
            total += p.value;
            total_err += p.err;
            total_l1 += p.l1;
            heap.push(p);
        }
        // Running sums drift; rebuild them when the budget is large.
        if heap.len() % 1024 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.err).sum();
            total_l1 = heap.iter().map(|p| p.l1).sum();
        }
    }
    let mut partition: Vec<f64> = heap.iter().map(|p| p.a).collect();
    partition.push(on.hi());
    partition.sort_by(f64::total_cmp);
    Ok((total, partition))
}

/// L2 inner product `(u, v) = int_a^b u v dz` to the rule's tolerance.
pub fn inner_product(
    u: impl Fn(f64) -> f64,
    v: impl Fn(f64) -> f64,
    on: Interval,
    rule: &QuadratureRule,
) -> Result<f64> {
    integrate(|z| u(z) * v(z), on, rule)
}

/// L2 norm of `u` over the interval.
pub fn l2_norm(u: impl Fn(f64) -> f64, on: Interval, rule: &QuadratureRule) -> Result<f64> {
    Ok(integrate(|z| u(z) * u(z), on, rule)?.max(0.0).sqrt())
}
