use std::sync::Arc;

use hawkes_core::estimate::{
    fit_bcb, fit_mle, laplace_evidence, optimize_hyperparams, FittedBackground, HyperParams, ModelSpec,
};
use hawkes_core::likelihood::compensator;
use hawkes_core::simulate::{scenario_news_shock, scenario_ushape, simulate, simulate_replicates};
use hawkes_core::{EventSequence, ExponentialKernel, NaturalTimeBasis, ObservationWindow, PiecewiseLinearBackground};

fn ushape_session(seed: u64) -> EventSequence {
    let window = ObservationWindow::new(0.0, 1500.0).unwrap();
    let bg = scenario_ushape(window, 0.5).unwrap();
    simulate(&bg, &ExponentialKernel::new(vec![0.4], vec![1.5]).unwrap(), seed).unwrap()
}

fn rescale(seq: &EventSequence, c: f64) -> EventSequence {
    let w = seq.window();
    EventSequence::new(
        seq.times().iter().map(|t| t / c).collect(),
        ObservationWindow::new(w.start() / c, w.end() / c).unwrap(),
    )
    .unwrap()
}

#[test]
fn hyperparameter_search_improves_on_start() {
    let seq = ushape_session(1);
    let basis = Arc::new(NaturalTimeBasis::build(seq.len(), 50).unwrap());
    let init = HyperParams::initial(&seq, 1).unwrap();
    let start = laplace_evidence(&seq, &init, &basis, None).unwrap();
    let fit = optimize_hyperparams(&seq, &basis, &init).unwrap();
    assert!(fit.evidence.log_marginal_likelihood >= start.log_marginal_likelihood);
    assert!(!fit.trace.is_empty());
    for pair in fit.trace.windows(2) {
        assert!(pair[1] >= pair[0], "trace not monotone: {pair:?}");
    }
    let last = *fit.trace.last().unwrap();
    assert!((last - fit.evidence.log_marginal_likelihood).abs() < 1e-9);
}

#[test]
fn bcb_fit_is_time_unit_invariant() {
    let seq = ushape_session(2);
    let minutes = rescale(&seq, 60.0);
    let a = fit_bcb(&seq, 1, 50).unwrap();
    let b = fit_bcb(&minutes, 1, 50).unwrap();
    let (ka, kb) = (&a.kernel, &b.kernel);
    assert!((ka.alphas()[0] - kb.alphas()[0]).abs() < 1e-3, "{ka:?} vs {kb:?}");
    let beta_ratio = kb.betas()[0] / (60.0 * ka.betas()[0]);
    assert!((beta_ratio - 1.0).abs() < 1e-3, "{ka:?} vs {kb:?}");
    // the density of event times picks up a factor 60 per event
    let shift = seq.len() as f64 * 60f64.ln();
    let la = a.log_marginal_likelihood.unwrap();
    let lb = b.log_marginal_likelihood.unwrap();
    assert!((lb - la - shift).abs() < 1e-4 * (1.0 + la.abs()), "{la} {lb} {shift}");
}

#[test]
fn bcb_smoke_fit() {
    let seq = ushape_session(3);
    let fit = fit_bcb(&seq, 2, 50).unwrap();
    assert_eq!(fit.label, "BCB");
    assert_eq!(fit.num_parameters, 6);
    assert!(fit.branching_ratio > 0.0 && fit.branching_ratio < 1.0);
    assert_eq!(fit.background_curve.len(), seq.len() + 2);
    match &fit.background {
        FittedBackground::Spline { coeffs, m, k, .. } => {
            assert_eq!(*m, coeffs.len());
            assert_eq!(*k, Some(50));
        }
        other => panic!("{other:?}"),
    }
    let round = hawkes_core::estimate::FitResult::from_json(&fit.to_json().unwrap()).unwrap();
    assert_eq!(round.to_json().unwrap(), fit.to_json().unwrap());
}

#[test]
fn step_background_favours_bcb() {
    let window = ObservationWindow::new(0.0, 4000.0).unwrap();
    let bg = scenario_news_shock(window, 1000.0, 0.4).unwrap();
    let kernel = ExponentialKernel::new(vec![0.4], vec![1.0]).unwrap();
    for seed in 0..3 {
        let seq = simulate(&bg, &kernel, 70 + seed).unwrap();
        let cons = fit_mle(&seq, &ModelSpec::Const, 1).unwrap();
        let knots = PiecewiseLinearBackground::regular_knots(window, 1000.0).unwrap();
        let pl = fit_mle(&seq, &ModelSpec::PiecewiseLinear { knots }, 1).unwrap();
        let bcb = fit_bcb(&seq, 1, 50).unwrap();
        assert!(pl.log_likelihood >= cons.log_likelihood - 1e-6);
        assert!(bcb.score > cons.score, "bcb {} const {}", bcb.score, cons.score);
        assert!(bcb.score > pl.score, "bcb {} pl {}", bcb.score, pl.score);
        assert!(cons.branching_ratio > bcb.branching_ratio);
    }
}

#[test]
fn compensator_matches_expected_count() {
    let window = ObservationWindow::new(0.0, 500.0).unwrap();
    let bg = scenario_ushape(window, 0.4).unwrap();
    let kernel = ExponentialKernel::new(vec![0.35, 0.2], vec![2.0, 0.3]).unwrap();
    let runs = simulate_replicates(&bg, &kernel, 99, 200).unwrap();
    // E[N(T)] = E[Λ(T)] by the martingale property of N − Λ
    let counts: Vec<f64> = runs.iter().map(|s| s.len() as f64).collect();
    let comps: Vec<f64> = runs
        .iter()
        .map(|s| compensator(s, &kernel, &bg, 0.0, 500.0).unwrap())
        .collect();
    let diffs: Vec<f64> = counts.iter().zip(&comps).map(|(n, c)| n - c).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    let se = (var / diffs.len() as f64).sqrt();
    assert!(mean.abs() < 4.0 * se, "mean N − Λ = {mean}, se {se}");
}
