use proptest::prelude::*;
use tiedfactor_core::adaptation::{build_ubm, enrol, enrol_factor, AdaptMethod, StatsFactors};
use tiedfactor_core::head::{accumulate_stats, augment};
use tiedfactor_core::network::{forward, DropoutMask};
use tiedfactor_core::scoring::{score_trial, score_trial_mc};
use tiedfactor_core::synth::generate;
use tiedfactor_core::trainer::{init, train};
use tiedfactor_core::{
    Architecture, Matrix, NetworkParams, Rng, SpeakerModel, SufficientStats, SynthConfig,
    TrainConfig, UbmModel,
};

fn net(seed: u64, dim: usize, hidden: usize, r1: usize, r2: usize) -> NetworkParams {
    let mut cfg = TrainConfig::new(Architecture::symmetric(dim, hidden, 1, 2, r1, r2));
    cfg.prior_theta = 0.5;
    cfg.seed = seed;
    init(&cfg, 1, 1).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zero_factors_reduce_to_the_plain_network(
        seed in 0u64..1000,
        x in prop::collection::vec(-4.0f64..4.0, 5),
    ) {
        let p = net(seed, 5, 6, 3, 2);
        let plain = p.without_factors();
        let a = forward(&p, &x, &[0.0; 3], &[0.0; 2], None).unwrap();
        let b = forward(&plain, &x, &[0.0; 3], &[0.0; 2], None).unwrap();
        prop_assert_eq!(a.output(), b.output());
        prop_assert_eq!(a.penultimate(), b.penultimate());
    }

    #[test]
    fn zero_dropout_is_a_no_op(seed in 0u64..1000, x in prop::collection::vec(-4.0f64..4.0, 5)) {
        let p = net(seed, 5, 6, 1, 1);
        let mask = DropoutMask::sample(&p, 0.0, &mut Rng::new(seed)).unwrap();
        let a = forward(&p, &x, &[0.3], &[-0.2], Some(&mask)).unwrap();
        let b = forward(&p, &x, &[0.3], &[-0.2], None).unwrap();
        prop_assert_eq!(a.output(), b.output());
    }

    #[test]
    fn stats_are_additive_on_exact_data(
        rows in prop::collection::vec((prop::collection::vec(-8i32..8, 2), -8i32..8), 1..30),
        split in 0usize..30,
    ) {
        // small integers keep every product and partial sum exact
        let split = split.min(rows.len());
        let mk = |r: &[(Vec<i32>, i32)]| {
            let mut st = SufficientStats::zeros(3, 1);
            for (y, x) in r {
                let y: Vec<f64> = y.iter().map(|&v| v as f64).collect();
                st.add_frame(&augment(&y), &[*x as f64]).unwrap();
            }
            st
        };
        let whole = mk(&rows);
        let merged = mk(&rows[..split]).merge(&mk(&rows[split..])).unwrap();
        prop_assert_eq!(whole, merged);
    }
}

#[test]
fn batch_and_streaming_stats_agree() {
    let mut rng = Rng::new(1);
    let ys = Matrix::from_vec(30, 4, rng.gaussian(120, 1.0)).unwrap();
    let xs = Matrix::from_vec(30, 2, rng.gaussian(60, 1.0)).unwrap();
    let aug: Vec<f64> = (0..30).flat_map(|t| augment(ys.row(t))).collect();
    let batch = accumulate_stats(&Matrix::from_vec(30, 5, aug).unwrap(), &xs).unwrap();
    let mut stream = SufficientStats::zeros(5, 2);
    for t in 0..30 {
        stream.add_frame(&augment(ys.row(t)), xs.row(t)).unwrap();
    }
    assert_eq!(batch, stream);
}

fn small_pipeline() -> (UbmModel, tiedfactor_core::SynthCorpus) {
    let sc = SynthConfig {
        dim: 6,
        speakers: 6,
        sessions_per_speaker: 5,
        frames_per_session: 40,
        speaker_rank: 2,
        session_rank: 2,
        ..SynthConfig::default()
    };
    let corpus = generate(&sc).unwrap();
    let mut arch = Architecture::symmetric(6, 8, 1, 2, 2, 2);
    arch.dropout_sites = vec![0, 2];
    let mut cfg = TrainConfig::new(arch);
    cfg.epochs = 3;
    cfg.batch_size = 32;
    let out = train(&cfg, &corpus.train).unwrap();
    let ubm = build_ubm(
        out.params,
        out.factors,
        &corpus.train,
        1.0,
        StatsFactors::Trained,
    )
    .unwrap();
    (ubm, corpus)
}

#[test]
fn null_enrollments_score_exactly_zero() {
    let (ubm, corpus) = small_pipeline();
    let empty = Matrix::zeros(0, 6);
    let by_map = enrol(&ubm, "a", &empty, AdaptMethod::MapPrior).unwrap();
    let by_alpha = enrol(
        &ubm,
        "b",
        &corpus.enrol[0].frames,
        AdaptMethod::Interpolated {
            alpha: 1.0,
            normalize: false,
        },
    )
    .unwrap();
    let null = SpeakerModel::from_ubm("c", &ubm);
    for u in &corpus.test {
        for m in [&by_map, &by_alpha, &null] {
            assert_eq!(score_trial(m, &ubm, &u.frames).unwrap().llr, 0.0);
        }
    }
}

#[test]
fn factor_enrollment_lowers_enrollment_reconstruction_error() {
    let (ubm, corpus) = small_pipeline();
    let frames = &corpus.enrol[0].frames;
    let before = ubm.clone();
    let spk = enrol_factor(&ubm, "a", frames, 20, 0.02).unwrap();
    assert_eq!(ubm, before);
    let z = spk.z_speaker.unwrap();
    let mse = |z2: &[f64]| {
        (0..frames.rows())
            .map(|t| {
                let a = forward(&ubm.params, frames.row(t), &[0.0; 2], z2, None).unwrap();
                tiedfactor_core::network::mse_cost(a.output(), frames.row(t))
                    .unwrap()
                    .0
            })
            .sum::<f64>()
    };
    assert!(mse(&z) < mse(&[0.0, 0.0]));
}

#[test]
fn more_samples_bring_mc_scores_closer_to_a_long_run() {
    let (ubm, corpus) = small_pipeline();
    let spk = enrol(
        &ubm,
        "a",
        &corpus.enrol[0].frames,
        AdaptMethod::Interpolated {
            alpha: 0.5,
            normalize: true,
        },
    )
    .unwrap();
    let mut closer = 0;
    let trials = 20;
    for i in 0..trials {
        let u = &corpus.test[i % corpus.test.len()].frames;
        let short = Matrix::from_vec(5, 6, u.as_slice()[i..i + 30].to_vec()).unwrap();
        let run = |l: usize, seed: u64| {
            score_trial_mc(&spk, &ubm, &short, 0.05, l, false, &mut Rng::new(seed))
                .unwrap()
                .llr
        };
        let reference = run(512, 1000 + i as u64);
        let (s8, s64) = (run(8, i as u64), run(64, i as u64));
        if (s64 - reference).abs() < (s8 - reference).abs() {
            closer += 1;
        }
    }
    assert!(closer * 10 >= trials * 7, "only {closer} of {trials}");
}
