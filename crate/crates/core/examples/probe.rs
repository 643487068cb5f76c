//! Scratch driver: runs the benchmark approximation targets and prints
//! per-iteration errors and timings.

use std::time::Instant;

use rational_greedy::greedy::{
    run_improved_oga, run_oga, run_wcga, MinimaxMode, PsoConfig, RunSettings, WcgaConfig,
};
use rational_greedy::{DictionarySpec, Interval, PoleWindow, TargetFunction};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "ex1".into());
    match which.as_str() {
        "ex1" => ex1(),
        "ex1w" => ex1_wcga(),
        "ex2" => ex2(),
        "ex3" => ex3(),
        _ => eprintln!("unknown probe {which}"),
    }
}

fn dump(label: &str, trace: &rational_greedy::GreedyTrace, t0: Instant) {
    println!("== {label} ({:.1?})", t0.elapsed());
    for (j, it) in trace.iterations.iter().enumerate() {
        println!(
            "  j={:2}  param={:+.3e}  uniform={:.3e}  l2={:.3e}",
            j + 1,
            it.param,
            it.uniform_error,
            it.l2_error
        );
    }
}

fn ex1() {
    let fit = Interval::new(1e-8, 1.0).unwrap();
    let eval = Interval::new(1e-6, 1.0).unwrap();
    let dict = DictionarySpec::NormalizedPole {
        window: PoleWindow::default(),
        fit,
    };
    let f = TargetFunction::inverse_power(0.5).unwrap();
    let settings = RunSettings {
        eval: Some(eval),
        ..Default::default()
    };
    let pso = PsoConfig::default();

    let t0 = Instant::now();
    let plain = run_oga(&f, &dict, fit, 12, &pso, &settings).unwrap();
    dump("ex1 plain OGA", &plain, t0);

    let t0 = Instant::now();
    let improved = run_improved_oga(
        &f,
        &dict,
        fit,
        12,
        &pso,
        MinimaxMode::FinalOnly,
        &settings,
    )
    .unwrap();
    dump("ex1 improved OGA (final only)", &improved, t0);
}

fn ex1_wcga() {
    let on = Interval::new(1e-6, 1.0).unwrap();
    let dict = DictionarySpec::PlainPole {
        window: PoleWindow::default(),
    };
    let f = TargetFunction::inverse_power(0.5).unwrap();
    let t0 = Instant::now();
    let trace = run_wcga(&f, &dict, on, &WcgaConfig::new(12), &RunSettings::default()).unwrap();
    dump("ex1 WCGA", &trace, t0);
}

fn ex2() {
    let on = Interval::new(1e-6, 1.0).unwrap();
    let f = TargetFunction::two_term_frac(0.1, 1.0, 0.5, -0.5).unwrap();
    let window = std::env::args()
        .nth(2)
        .map(|s| {
            let mut it = s.split(',');
            PoleWindow::new(
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
            .unwrap()
        })
        .unwrap_or_default();
    let dict = DictionarySpec::NormalizedPole { window, fit: on };
    let pso = PsoConfig::default();
    let settings = RunSettings::default();

    let t0 = Instant::now();
    let improved =
        run_improved_oga(&f, &dict, on, 7, &pso, MinimaxMode::FinalOnly, &settings).unwrap();
    dump("ex2 improved OGA", &improved, t0);

    let dict = DictionarySpec::PlainPole {
        window: PoleWindow::default(),
    };
    let t0 = Instant::now();
    let trace = run_wcga(&f, &dict, on, &WcgaConfig::new(7), &settings).unwrap();
    dump("ex2 WCGA", &trace, t0);
}

fn ex3() {
    let on = Interval::new(1e-6, 1.0).unwrap();
    let f = TargetFunction::two_term_frac(0.1, 1.0, 0.4, 0.6).unwrap();
    let dict = DictionarySpec::negative_power(1e-8, 1.0 - 1e-8).unwrap();
    let pso = PsoConfig::default();
    let settings = RunSettings::default();

    let t0 = Instant::now();
    let improved =
        run_improved_oga(&f, &dict, on, 10, &pso, MinimaxMode::FinalOnly, &settings).unwrap();
    dump("ex3 improved OGA (powers)", &improved, t0);

    let t0 = Instant::now();
    let trace = run_wcga(&f, &dict, on, &WcgaConfig::new(18), &settings).unwrap();
    dump("ex3 WCGA (powers)", &trace, t0);
}
