//! Step-6 landscape of the Ex2 greedy objective.
use rational_greedy::analysis::{inner_product, project, QuadratureRule};
use rational_greedy::{DictionarySpec, Interval, PoleWindow, TargetFunction};

fn main() {
    let on = Interval::new(1e-6, 1.0).unwrap();
    let f = TargetFunction::two_term_frac(0.1, 1.0, 0.5, -0.5).unwrap();
    let dict = DictionarySpec::NormalizedPole {
        window: PoleWindow::new(-100.0, -1e-9).unwrap(),
        fit: on,
    };
    let quad = QuadratureRule::default();
    // My run's first five poles.
    let poles = [-1.00e2, -2.83e-2, -1.40e-3, -2.51e-1, -6.16e-5];
    let basis: Vec<_> = poles.iter().map(|&p| dict.element(p).unwrap()).collect();
    let proj = project(&f, &basis, on, &quad).unwrap();
    println!("gram truncated: {}", proj.truncated);
    let coeffs = proj.coeffs.clone();

    let obj = |p: f64| {
        let g = dict.element(p).unwrap();
        let mut v = inner_product(|z| f.eval(z), |z| g.eval(z), on, &quad).unwrap();
        for (c, gi) in coeffs.iter().zip(&basis) {
            v -= c * inner_product(|z| gi.eval(z), |z| g.eval(z), on, &quad).unwrap();
        }
        v
    };
    for p in [-2.08e-6, -6.6e-3, -0.99, -9.9e-1, -4.0, -1e-8, -1e-7, -1e-5, -1e-4] {
        println!("obj({p:+.3e}) = {:+.6e}", obj(p));
    }
    // Coarse log scan for the global |obj| max.
    let mut best = (0.0f64, 0.0f64);
    for i in 0..2000 {
        let u = -9.0 + 11.0 * i as f64 / 1999.0;
        let p = -(10f64.powf(u));
        let v = obj(p).abs();
        if v > best.1 {
            best = (p, v);
        }
    }
    println!("scan argmax {:+.4e} -> {:.6e}", best.0, best.1);
}
