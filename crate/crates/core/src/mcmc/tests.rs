use super::*;
use crate::covariance::{assemble_covariance, KernelParams};
use crate::darcy::BoundaryConditions;
use crate::grid::Grid2D;
use crate::kle::{solve_kle, KleBasis, Truncation};
use crate::kriging::MeasurementSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn basis() -> KleBasis {
    let grid = Grid2D::new(16, 16).unwrap();
    let params = KernelParams::default();
    solve_kle(&assemble_covariance(&grid, &params), &grid, Truncation::Modes(20)).unwrap()
}

fn reference_theta() -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..20).map(|_| rng.sample(StandardNormal)).collect()
}

fn model(likelihood: LikelihoodParams) -> InversionModel {
    let basis = basis();
    let reference = basis.synthesize(&reference_theta()).unwrap();
    let ms = MeasurementSet::sample(&reference, MeasurementSet::default_lattice()).unwrap();
    let cond = Conditioning::from_measurements(&basis, &ms, &KernelParams::default()).unwrap();
    InversionModel::new(
        basis,
        Some(cond),
        Grid2D::new(8, 8).unwrap(),
        BoundaryConditions::default(),
        likelihood,
        &reference,
    )
    .unwrap()
}

fn flat() -> LikelihoodParams {
    LikelihoodParams {
        sigma_c2: 1e12,
        sigma_f2: 1e12,
    }
}

#[test]
fn params_validation() {
    assert!(LikelihoodParams::default().validate().is_ok());
    assert!(LikelihoodParams { sigma_c2: 0.0, sigma_f2: 1.0 }.validate().is_err());
    let cfg = ChainConfig { beta: 1.5, ..Default::default() };
    assert!(cfg.validate().is_err());
    let cfg = ChainConfig { beta: -0.1, ..Default::default() };
    assert!(cfg.validate().is_err());
}

#[test]
fn flat_likelihood_accepts_everything() {
    let m = model(flat());
    let cfg = ChainConfig {
        iterations: 300,
        ..Default::default()
    };
    let t = run_chain(&cfg, &m).unwrap();
    assert_eq!(t.len(), 300);
    assert_eq!(t.fine_accepts(), t.coarse_accepts());
    assert!(t.overall_rate() > 0.99, "rate {}", t.overall_rate());
}

#[test]
fn tiny_step_from_reference_is_accepted() {
    let m = model(LikelihoodParams::default());
    let cfg = ChainConfig {
        beta: 1e-6,
        iterations: 200,
        initial_theta: Some(reference_theta()),
        ..Default::default()
    };
    let t = run_chain(&cfg, &m).unwrap();
    assert!(t.overall_rate() >= 0.95, "rate {}", t.overall_rate());
    assert!(t.logliks()[0] > -1e-3);
}

#[test]
fn rejected_iterations_repeat_state() {
    let m = model(LikelihoodParams::default());
    let cfg = ChainConfig {
        iterations: 200,
        seed: 5,
        ..Default::default()
    };
    let t = run_chain(&cfg, &m).unwrap();
    for it in 1..t.len() {
        if !t.fine_accepted()[it] {
            assert_eq!(t.theta(it), t.theta(it - 1));
            assert_eq!(t.logliks()[it], t.logliks()[it - 1]);
        }
        if !t.coarse_accepted()[it] {
            assert!(!t.fine_accepted()[it]);
        }
    }
}

#[test]
fn conditioned_chain_honors_data_every_iteration() {
    let m = model(LikelihoodParams::default());
    let cond = m.conditioning.clone().unwrap();
    for store_projected in [false, true] {
        let cfg = ChainConfig {
            iterations: 150,
            conditioned: true,
            store_projected,
            seed: 9,
            ..Default::default()
        };
        let t = run_chain(&cfg, &m).unwrap();
        for it in 0..t.len() {
            let f = m.field(t.theta(it), true).unwrap().field;
            for (&c, &v) in cond.cells.iter().zip(&cond.values) {
                assert!((f.values()[c] - v).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn snapshots_are_kept_at_requested_iterations() {
    let m = model(LikelihoodParams::default());
    let cfg = ChainConfig {
        iterations: 50,
        snapshots: vec![40, 1, 40, 99],
        ..Default::default()
    };
    let t = run_chain(&cfg, &m).unwrap();
    let its: Vec<usize> = t.snapshots.iter().map(|(i, _)| *i).collect();
    assert_eq!(its, vec![1, 40]);
    let f40 = m.field(t.theta(39), false).unwrap().field;
    assert_eq!(t.snapshots[1].1, f40);
}

#[test]
fn same_seed_reproduces_trace() {
    let m = model(LikelihoodParams::default());
    let cfg = ChainConfig {
        iterations: 100,
        seed: 77,
        ..Default::default()
    };
    assert_eq!(run_chain(&cfg, &m).unwrap(), run_chain(&cfg, &m).unwrap());
    let other = ChainConfig { seed: 78, ..cfg.clone() };
    assert_ne!(run_chain(&cfg, &m).unwrap(), run_chain(&other, &m).unwrap());
}

#[test]
fn study_is_independent_of_thread_count() {
    let m = model(LikelihoodParams::default());
    let cfg = ChainConfig {
        iterations: 60,
        ..Default::default()
    };
    let seeds = study_seeds(10, 4);
    assert_eq!(seeds, vec![10, 11, 12, 13]);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_study(&cfg, &seeds, &m).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one[0], run_chain(&ChainConfig { seed: 10, ..cfg.clone() }, &m).unwrap());
    let dup = run_study(&cfg, &[3, 3], &m).unwrap();
    assert_eq!(dup[0], dup[1]);
    assert!(run_study(&cfg, &[], &m).is_err());
}

#[test]
fn single_stage_uses_fine_likelihood_only() {
    let m = model(flat());
    let cfg = ChainConfig {
        iterations: 200,
        two_stage: false,
        ..Default::default()
    };
    let t = run_chain(&cfg, &m).unwrap();
    assert_eq!(t.coarse_accepts(), 200);
    assert!(t.overall_rate() > 0.99);
}

#[test]
fn explicit_ratio_matches_cancelled_form() {
    let m = model(LikelihoodParams::default());
    for single in [true, false] {
        let cfg = ChainConfig {
            iterations: 80,
            single_component: single,
            seed: 21,
            ..Default::default()
        };
        let explicit = ChainConfig {
            explicit_prior_ratio: true,
            ..cfg.clone()
        };
        let a = run_chain(&cfg, &m).unwrap();
        let b = run_chain(&explicit, &m).unwrap();
        assert_eq!(a.fine_accepted(), b.fine_accepted());
    }
}

#[test]
fn flat_chain_preserves_prior_moments() {
    let m = model(flat());
    let cfg = ChainConfig {
        iterations: 20_000,
        single_component: false,
        seed: 3,
        ..Default::default()
    };
    let t = run_chain(&cfg, &m).unwrap();
    let l = t.len() as f64;
    for k in 0..t.n() {
        let mean = (0..t.len()).map(|it| t.theta(it)[k]).sum::<f64>() / l;
        let var = (0..t.len()).map(|it| (t.theta(it)[k] - mean).powi(2)).sum::<f64>() / l;
        assert!(mean.abs() < 0.1, "mode {k} mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "mode {k} var {var}");
    }
}

#[test]
fn bad_initial_state_and_missing_conditioning() {
    let m = model(LikelihoodParams::default());
    let cfg = ChainConfig {
        iterations: 1,
        initial_theta: Some(vec![0.0; 3]),
        ..Default::default()
    };
    assert!(run_chain(&cfg, &m).is_err());
    let mut bare = m.clone();
    bare.conditioning = None;
    let cfg = ChainConfig {
        iterations: 1,
        conditioned: true,
        ..Default::default()
    };
    assert!(run_chain(&cfg, &bare).is_err());
}
