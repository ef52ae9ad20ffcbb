use holofocus::losses::CandidateSet;
use holofocus::network::AutoencoderSpec;
use holofocus::optics::{synthesize_hologram, transmittance_from_image, Hologram, ObjectModel, OpticalConfig};
use holofocus::runner::samples::bar_target;
use holofocus::strategies::{
    derived_seed, evaluate_against, random_distance_expectation, reconstruct, RandomMode, ReconstructionConfig,
    StrategyKind,
};
use holofocus::tensor::AdamConfig;
use holofocus::Plane;

const N: usize = 32;
const Z: f64 = 5e-3;

fn setup() -> (Hologram, Plane, CandidateSet) {
    let optics = OpticalConfig::new(532e-9, 2e-6, N, N).unwrap();
    let t = transmittance_from_image(&bar_target(N), &optics, ObjectModel::default()).unwrap();
    let holo = synthesize_hologram(&t, Z).unwrap().normalized();
    let candidates = CandidateSet::new(vec![4.8e-3, 5e-3, 5.2e-3], None).unwrap().with_true_distance(Z).unwrap();
    (holo, t.amplitude(), candidates)
}

fn small_config(epochs: usize) -> ReconstructionConfig {
    ReconstructionConfig {
        network: AutoencoderSpec { encoder_channels: vec![4, 8], ..AutoencoderSpec::desk(N, N) },
        adam: AdamConfig::default(),
        epochs,
        seed: 11,
        log_every: None,
    }
}

#[test]
fn reverse_attention_with_one_candidate_is_the_known_distance_run() {
    let (holo, _, _) = setup();
    let single = CandidateSet::single(Z);
    let cfg = small_config(8);
    let known = reconstruct::<f32>(&holo, &single, StrategyKind::KnownDistance, &cfg).unwrap();
    let ra = reconstruct::<f32>(&holo, &single, StrategyKind::ReverseAttention, &cfg).unwrap();
    assert_eq!(known.object_estimate, ra.object_estimate);
    for (k, r) in known.trace.iter().zip(&ra.trace) {
        assert_eq!(k.losses, r.losses);
        assert_eq!(r.weights, vec![1.0]);
    }
}

#[test]
fn runs_are_deterministic_in_the_seed() {
    let (holo, _, candidates) = setup();
    let cfg = small_config(4);
    let a = reconstruct::<f32>(&holo, &candidates, StrategyKind::ReverseAttention, &cfg).unwrap();
    let b = reconstruct::<f32>(&holo, &candidates, StrategyKind::ReverseAttention, &cfg).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.object_estimate, b.object_estimate);
    let c = reconstruct::<f32>(&holo, &candidates, StrategyKind::ReverseAttention, &ReconstructionConfig { seed: 12, ..cfg })
        .unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn every_strategy_reports_a_consistent_trace() {
    let (holo, _, candidates) = setup();
    let cfg = small_config(5);
    for strategy in [
        StrategyKind::KnownDistance,
        StrategyKind::RandomDistance { index: 2 },
        StrategyKind::NonWeightedIntegration,
        StrategyKind::AlternatingDescent,
        StrategyKind::ReverseAttention,
    ] {
        let r = reconstruct::<f64>(&holo, &candidates, strategy, &cfg).unwrap();
        assert_eq!(r.trace.len(), 5, "{strategy}");
        for (epoch, report) in r.trace.iter().enumerate() {
            assert_eq!(report.epoch, epoch);
            assert_eq!(report.losses.len(), r.trace_distances.len());
            assert!((report.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let mixed: f64 = report.weights.iter().zip(&report.losses).map(|(w, l)| w * l).sum();
            assert!((mixed - report.total).abs() <= 1e-9 * report.total.abs(), "{strategy}");
        }
        match strategy {
            StrategyKind::NonWeightedIntegration => assert_eq!(r.predicted_index, None),
            StrategyKind::KnownDistance => assert_eq!(r.predicted_index, Some(1)),
            StrategyKind::RandomDistance { index } => {
                assert_eq!(r.predicted_index, Some(index));
                assert_eq!(r.trace_distances, vec![candidates.distances()[index]]);
            }
            StrategyKind::AlternatingDescent => {
                let last = r.trace.last().unwrap();
                assert_eq!(last.weights.iter().filter(|&&w| w == 1.0).count(), 1);
            }
            StrategyKind::ReverseAttention => assert_eq!(r.trace_distances.len(), 3),
        }
    }
}

#[test]
fn training_lowers_the_hologram_loss() {
    let (holo, truth, candidates) = setup();
    let r = reconstruct::<f32>(&holo, &candidates, StrategyKind::KnownDistance, &small_config(60)).unwrap();
    assert!(r.trace.last().unwrap().total < 0.5 * r.trace[0].total);
    let scores = evaluate_against(&r.object_estimate, &truth).unwrap();
    assert!(scores.psnr.is_finite() && scores.ssim > -1.0 && scores.ssim <= 1.0);
}

#[test]
fn exploding_learning_rate_is_reported_with_partial_trace() {
    let (holo, _, candidates) = setup();
    let cfg = ReconstructionConfig { adam: AdamConfig::with_learning_rate(1e30), ..small_config(10) };
    match reconstruct::<f32>(&holo, &candidates, StrategyKind::ReverseAttention, &cfg) {
        Err(holofocus::Error::Diverged { epoch, trace, .. }) => {
            assert!(epoch >= 1);
            assert_eq!(trace.len(), epoch);
        }
        other => panic!("expected divergence, got {:?}", other.map(|r| r.trace.len())),
    }
}

#[test]
fn mismatched_network_grid_is_rejected() {
    let (holo, _, candidates) = setup();
    let cfg = ReconstructionConfig { network: AutoencoderSpec::desk(64, 64), ..small_config(1) };
    let err = reconstruct::<f32>(&holo, &candidates, StrategyKind::KnownDistance, &cfg).unwrap_err();
    assert_eq!(err.kind(), "shape");
    let err = reconstruct::<f32>(&holo, &candidates, StrategyKind::RandomDistance { index: 9 }, &small_config(1)).unwrap_err();
    assert_eq!(err.kind(), "invalid_argument");
}

#[test]
fn random_expectation_covers_eligible_candidates() {
    let (holo, truth, candidates) = setup();
    let cfg = small_config(2);
    let summary = random_distance_expectation::<f32>(&holo, &candidates, RandomMode::Exclude, &cfg, &truth).unwrap();
    let indices: Vec<usize> = summary.runs.iter().map(|r| r.index).collect();
    assert_eq!(indices, vec![0, 2]);
    assert_eq!(summary.runs[1].seed, derived_seed(cfg.seed, 2));
    let mean = (summary.runs[0].scores.psnr + summary.runs[1].scores.psnr) / 2.0;
    assert!((summary.mean.psnr - mean).abs() < 1e-12);

    let all = random_distance_expectation::<f32>(&holo, &candidates, RandomMode::Include, &cfg, &truth).unwrap();
    assert_eq!(all.runs.len(), 3);
}
