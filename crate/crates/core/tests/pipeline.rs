use engage_rank::ahp::{AhpPreset, ScaleTable};
use engage_rank::gbrt::TrainConfig;
use engage_rank::importance::{PermutationConfig, Scorer};
use engage_rank::pipeline::{self, PipelineConfig, PipelineError, PresetConfig};
use engage_rank::survey::{self, SynthSpec, Target};
use proptest::prelude::*;

fn quick_config(seed: u64) -> PipelineConfig {
    PipelineConfig {
        synth: Some(SynthSpec::calibrated(240, seed)),
        train: TrainConfig {
            n_stages: 60,
            learning_rate: 0.1,
            ..TrainConfig::default()
        },
        permutation: PermutationConfig {
            repeats: 4,
            ..PermutationConfig::default()
        },
        seed,
        ..PipelineConfig::default()
    }
}

#[test]
fn single_stages_reproduce_the_full_run() {
    let config = quick_config(21);
    let report = pipeline::run_pipeline(&config).unwrap();
    let prepared = pipeline::prepare(&config).unwrap();
    for target in Target::ALL {
        let trained = pipeline::train_target(&config, &prepared, target).unwrap();
        let in_report = report.target(target).unwrap();
        assert_eq!(trained.curve.to_csv(), in_report.loss_curve.to_csv());
        let stage = pipeline::importance_stage(&config, &trained).unwrap();
        assert_eq!(stage.mdi, in_report.mdi);
        assert_eq!(stage.permutation, in_report.permutation);
        assert_eq!(stage.ranking, in_report.ranking);
        assert_eq!(in_report.train_seed, config.train_seed(target));
    }
}

#[test]
fn provenance_echoes_the_protocol() {
    let mut config = quick_config(3);
    config.train = TrainConfig::default();
    config.synth = Some(SynthSpec::calibrated(120, 3));
    config.out_dir = Some("somewhere".into());
    let report = pipeline::run_pipeline(&config).unwrap();
    let p = &report.provenance;
    assert_eq!(p.config.train_fraction, 0.8);
    assert_eq!(p.config.train.n_stages, 500);
    assert_eq!(p.config.train.learning_rate, 0.01);
    assert_eq!(p.config.train.max_depth, 4);
    assert_eq!(p.config.out_dir, None);
    assert_eq!((p.n_rows, p.n_train, p.n_test), (120, 96, 24));
    assert_eq!(p.master_seed, 3);
    assert_eq!(p.sub_seeds["split"], config.split_seed());
    assert_eq!(p.sub_seeds.len(), 7);

    let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
    let echoed: PipelineConfig =
        serde_json::from_value(json["provenance"]["config"].clone()).unwrap();
    assert_eq!(echoed.train, config.train);
    assert_eq!(echoed.synth, config.synth);
}

#[test]
fn csv_input_matches_the_synthetic_source() {
    let config = quick_config(8);
    let table = survey::synthesize(config.synth.as_ref().unwrap()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("survey.csv");
    survey::write_survey_csv(&table, std::fs::File::create(&path).unwrap()).unwrap();

    let from_file = PipelineConfig {
        input: Some(path),
        synth: None,
        ..config.clone()
    };
    let a = pipeline::run_pipeline(&config).unwrap();
    let b = pipeline::run_pipeline(&from_file).unwrap();
    assert_eq!(a.stats, b.stats);
    assert_eq!(a.targets, b.targets);
}

#[test]
fn inconsistent_custom_matrix_is_an_outcome() {
    let mut config = quick_config(5);
    config.presets = PresetConfig {
        be: AhpPreset::Custom {
            cuts: vec![2, 4],
            scales: ScaleTable::new(vec![vec![9, 9], vec![9]]),
        },
        ..PresetConfig::default()
    };
    let report = pipeline::run_pipeline(&config).unwrap();
    let be = report.target(Target::Be).unwrap();
    assert!(!be.ahp.consistent, "CR {}", be.ahp.cr);
    assert!(be.ahp.cr >= 0.1);
    assert_eq!(report.inconsistent_targets(), vec![Target::Be]);
}

#[test]
fn custom_preset_that_cannot_fit_names_the_stage() {
    let mut config = quick_config(5);
    config.presets.ce = AhpPreset::Custom {
        cuts: vec![1, 40],
        scales: ScaleTable::new(vec![vec![3, 5], vec![3]]),
    };
    let err = pipeline::run_pipeline(&config).unwrap_err();
    assert!(
        matches!(&err, PipelineError::Stage { stage, .. } if stage == "ahp[ce]"),
        "{err}"
    );
}

#[test]
fn emitted_files_match_the_report() {
    let report = pipeline::run_pipeline(&quick_config(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested").join("out");
    let written = pipeline::emit_report(&report, &out).unwrap();
    let expected = pipeline::report_files(&report).unwrap();
    assert_eq!(written.len(), expected.len());
    for (name, contents) in expected {
        assert_eq!(
            std::fs::read_to_string(out.join(&name)).unwrap(),
            contents,
            "{name}"
        );
    }
    let leftovers: Vec<_> = std::fs::read_dir(out.parent().unwrap())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("out")]);
}

fn arb_preset() -> impl Strategy<Value = AhpPreset> {
    prop_oneof![
        Just(AhpPreset::BeStyle),
        Just(AhpPreset::CeEeStyle),
        (2u8..=9).prop_map(|a| AhpPreset::Custom {
            cuts: vec![2],
            scales: ScaleTable::new(vec![vec![a]]),
        }),
    ]
}

fn arb_config() -> impl Strategy<Value = PipelineConfig> {
    (
        (1usize..5000, any::<u64>(), 0.01f64..0.99, 0.0f64..5.0),
        0.05f64..0.95,
        (
            1usize..2000,
            1e-4f64..=1.0,
            1usize..8,
            1usize..10,
            0.1f64..=1.0,
            any::<u64>(),
        ),
        (1usize..50, any::<u64>(), prop::bool::ANY),
        (arb_preset(), arb_preset(), arb_preset()),
        any::<u64>(),
        prop::option::of("[a-z]{1,8}"),
    )
        .prop_map(
            |(synth, train_fraction, train, perm, presets, seed, out_dir)| {
                let mut spec = SynthSpec::calibrated(synth.0, synth.1);
                spec.bl_probability = synth.2;
                spec.bl_effect = synth.3;
                PipelineConfig {
                    input: None,
                    synth: Some(spec),
                    train_fraction,
                    train: TrainConfig {
                        n_stages: train.0,
                        learning_rate: train.1,
                        max_depth: train.2,
                        min_samples_leaf: train.3,
                        subsample: train.4,
                        seed: train.5,
                    },
                    permutation: PermutationConfig {
                        repeats: perm.0,
                        seed: perm.1,
                        scorer: if perm.2 { Scorer::R2 } else { Scorer::NegMse },
                    },
                    presets: PresetConfig {
                        be: presets.0,
                        ce: presets.1,
                        ee: presets.2,
                    },
                    seed,
                    out_dir: out_dir.map(Into::into),
                }
            },
        )
}

proptest! {
    #[test]
    fn config_round_trips(config in arb_config()) {
        let parsed = PipelineConfig::from_json(&config.to_json()).unwrap();
        prop_assert_eq!(&parsed, &config);
        prop_assert!(parsed.validate().is_ok());
    }

    #[test]
    fn sub_seeds_depend_only_on_master_and_label(a in any::<u64>(), b in any::<u64>()) {
        let ca = PipelineConfig { seed: a, ..PipelineConfig::default() };
        let cb = PipelineConfig { seed: b, train_fraction: 0.5, ..PipelineConfig::default() };
        prop_assert_eq!(ca.split_seed() == cb.split_seed(), a == b);
        let mut seeds = vec![ca.split_seed()];
        for t in Target::ALL {
            seeds.push(ca.train_seed(t));
            seeds.push(ca.permutation_seed(t));
        }
        seeds.sort_unstable();
        seeds.dedup();
        prop_assert_eq!(seeds.len(), 7);
    }
}
