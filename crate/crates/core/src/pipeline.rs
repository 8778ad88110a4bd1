//! End-to-end orchestration: load or synthesize, summarize, split, then per
//! target fit, score importance, rank and weight with AHP.
//!
//! Randomness comes from labeled sub-seeds of the master seed (see
//! [`crate::seed::derive_seed`]):
//!
//! | stage            | labels                          |
//! |------------------|---------------------------------|
//! | train/test split | `["split"]`                     |
//! | boosting         | `["train", <be/ce/ee>]`         |
//! | permutation      | `["permutation", <be/ce/ee>]`   |
//!
//! The synthetic generator keeps its own `seed` field, since it defines the
//! data rather than the analysis.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ahp::{self, AhpError, AhpPreset, AhpResult, PairwiseMatrix};
use crate::gbrt::{self, BoostedEnsemble, GbrtError, LossCurve, TrainConfig};
use crate::importance::{
    self, ImportanceError, ImportanceVector, PermutationConfig, PermutationOutcome, Ranking,
};
use crate::seed::derive_seed;
use crate::survey::{
    self, Column, RegressionProblem, StatsTable, SurveyError, SurveyTable, SynthSpec, Target,
};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Survey(#[from] SurveyError),
    #[error(transparent)]
    Model(#[from] GbrtError),
    #[error(transparent)]
    Importance(#[from] ImportanceError),
    #[error(transparent)]
    Ahp(#[from] AhpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: StageError,
    },
    #[error("report is incomplete: expected targets BE, CE, EE")]
    Incomplete,
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    fn stage(stage: impl Into<String>) -> impl FnOnce(StageError) -> PipelineError {
        let stage = stage.into();
        move |source| PipelineError::Stage { stage, source }
    }

    /// The underlying data/model error, if any.
    pub fn stage_error(&self) -> Option<&StageError> {
        match self {
            PipelineError::Stage { source, .. } => Some(source),
            _ => None,
        }
    }
}

fn at<T, E: Into<StageError>>(
    stage: impl Into<String>,
    r: Result<T, E>,
) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::stage(stage)(e.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PresetConfig {
    pub be: AhpPreset,
    pub ce: AhpPreset,
    pub ee: AhpPreset,
}

impl Default for PresetConfig {
    fn default() -> Self {
        Self {
            be: AhpPreset::BeStyle,
            ce: AhpPreset::CeEeStyle,
            ee: AhpPreset::CeEeStyle,
        }
    }
}

impl PresetConfig {
    pub fn for_target(&self, target: Target) -> &AhpPreset {
        match target {
            Target::Be => &self.be,
            Target::Ce => &self.ce,
            Target::Ee => &self.ee,
        }
    }
}

/// JSON-serializable run description. Exactly one of `input` and `synth`
/// must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub synth: Option<SynthSpec>,
    pub train_fraction: f64,
    pub train: TrainConfig,
    pub permutation: PermutationConfig,
    pub presets: PresetConfig,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            input: None,
            synth: Some(SynthSpec::default()),
            train_fraction: 0.8,
            train: TrainConfig::default(),
            permutation: PermutationConfig::default(),
            presets: PresetConfig::default(),
            seed: 0,
            out_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        match (&self.input, &self.synth) {
            (Some(_), Some(_)) => {
                return Err(PipelineError::Config(
                    "set either `input` or `synth`, not both".into(),
                ))
            }
            (None, None) => {
                return Err(PipelineError::Config(
                    "one of `input` or `synth` is required".into(),
                ))
            }
            (None, Some(spec)) => spec
                .validate()
                .map_err(|e| PipelineError::Config(e.to_string()))?,
            (Some(_), None) => {}
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(PipelineError::Config(format!(
                "train_fraction {} not in (0, 1)",
                self.train_fraction
            )));
        }
        self.train
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.permutation.repeats == 0 {
            return Err(PipelineError::Config(
                "permutation.repeats must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        derive_seed(self.seed, &["split"])
    }

    pub fn train_seed(&self, target: Target) -> u64 {
        derive_seed(self.seed, &["train", target.key()])
    }

    pub fn permutation_seed(&self, target: Target) -> u64 {
        derive_seed(self.seed, &["permutation", target.key()])
    }
}

/// Reads the configured CSV or generates the synthetic table; composites
/// are always derived.
pub fn load_table(config: &PipelineConfig) -> Result<SurveyTable, PipelineError> {
    config.validate()?;
    let table = match (&config.input, &config.synth) {
        (Some(path), _) => {
            let file = fs::File::open(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            at(
                "load",
                survey::parse_survey_csv(std::io::BufReader::new(file)),
            )?
        }
        (None, Some(spec)) => at("synthesize", survey::synthesize(spec))?,
        (None, None) => unreachable!("validated"),
    };
    if table.is_empty() {
        return Err(PipelineError::stage("load")(SurveyError::Empty.into()));
    }
    Ok(survey::compute_composites(&table))
}

/// Data shared by every target: the full table, its summary and the split.
pub struct Prepared {
    pub table: SurveyTable,
    pub stats: StatsTable,
    pub train: SurveyTable,
    pub test: SurveyTable,
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared, PipelineError> {
    let table = load_table(config)?;
    let stats = at("stats", survey::descriptive_stats(&table))?;
    let (train, test) = at(
        "split",
        survey::split(&table, config.train_fraction, config.split_seed()),
    )?;
    Ok(Prepared {
        table,
        stats,
        train,
        test,
    })
}

pub struct TrainedTarget {
    pub train: RegressionProblem,
    pub test: RegressionProblem,
    pub ensemble: BoostedEnsemble,
    pub curve: LossCurve,
}

/// Fits one target with its labeled training seed and traces deviance.
pub fn train_target(
    config: &PipelineConfig,
    prepared: &Prepared,
    target: Target,
) -> Result<TrainedTarget, PipelineError> {
    let label = |s: &str| format!("{s}[{}]", target.key());
    let train = at(label("view"), survey::target_view(&prepared.train, target))?;
    let test = at(label("view"), survey::target_view(&prepared.test, target))?;
    let train_config = TrainConfig {
        seed: config.train_seed(target),
        ..config.train.clone()
    };
    let ensemble = at(
        label("train"),
        gbrt::fit_ensemble(&train.x, &train.y, &train.feature_names(), &train_config),
    )?;
    let curve = at(
        label("deviance"),
        gbrt::staged_deviance(&ensemble, (&train.x, &train.y), (&test.x, &test.y)),
    )?;
    Ok(TrainedTarget {
        train,
        test,
        ensemble,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetReport {
    pub target: Target,
    pub features: Vec<String>,
    pub train_seed: u64,
    pub permutation_seed: u64,
    pub loss_curve: LossCurve,
    pub mdi: ImportanceVector,
    pub permutation: PermutationOutcome,
    pub ranking: Ranking,
    /// Ranked features that enter the AHP matrix (composites removed).
    pub ahp_features: Vec<String>,
    pub preset: AhpPreset,
    pub pairwise: PairwiseMatrix,
    pub ahp: AhpResult,
}

pub struct ImportanceStage {
    pub mdi: ImportanceVector,
    pub permutation: PermutationOutcome,
    pub ranking: Ranking,
}

pub fn importance_stage(
    config: &PipelineConfig,
    trained: &TrainedTarget,
) -> Result<ImportanceStage, PipelineError> {
    let target = trained.train.target;
    let label = format!("importance[{}]", target.key());
    let mdi = at(label.as_str(), importance::mdi(&trained.ensemble))?;
    let perm_config = PermutationConfig {
        seed: config.permutation_seed(target),
        ..config.permutation.clone()
    };
    let permutation = at(
        label.as_str(),
        importance::permutation_importance(
            &trained.ensemble,
            &trained.test.x,
            &trained.test.y,
            &perm_config,
        ),
    )?;
    let ranking = at(
        label.as_str(),
        importance::combined_ranking(&mdi, &permutation.importance),
    )?;
    Ok(ImportanceStage {
        mdi,
        permutation,
        ranking,
    })
}

/// Ranked feature names minus the engagement composites.
pub fn ahp_candidates(ranking: &Ranking) -> Vec<String> {
    ranking
        .order()
        .into_iter()
        .filter(|name| !Column::from_label(name).is_some_and(Column::is_composite))
        .map(str::to_string)
        .collect()
}

pub fn analyze_target(
    config: &PipelineConfig,
    prepared: &Prepared,
    target: Target,
) -> Result<TargetReport, PipelineError> {
    let trained = train_target(config, prepared, target)?;
    let ImportanceStage {
        mdi,
        permutation,
        ranking,
    } = importance_stage(config, &trained)?;

    let label = format!("ahp[{}]", target.key());
    let ahp_features = ahp_candidates(&ranking);
    let preset = config.presets.for_target(target).clone();
    let tiers = at(label.as_str(), ahp::assign_tiers(&ahp_features, &preset))?;
    let pairwise = at(label.as_str(), ahp::build_pairwise(&tiers))?;
    // an inconsistent matrix is an outcome, recorded through `ahp.consistent`
    let result = at(label.as_str(), ahp::assess(&pairwise))?;

    Ok(TargetReport {
        target,
        features: trained.train.feature_names(),
        train_seed: config.train_seed(target),
        permutation_seed: config.permutation_seed(target),
        loss_curve: trained.curve,
        mdi,
        permutation,
        ranking,
        ahp_features,
        preset,
        pairwise,
        ahp: result,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub master_seed: u64,
    pub sub_seeds: BTreeMap<String, u64>,
    pub n_rows: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Run config, with `out_dir` cleared so reports do not depend on where
    /// they are written.
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub provenance: Provenance,
    pub stats: StatsTable,
    /// BE, CE, EE in that order.
    pub targets: Vec<TargetReport>,
}

impl PipelineReport {
    pub fn target(&self, target: Target) -> Option<&TargetReport> {
        self.targets.iter().find(|t| t.target == target)
    }

    pub fn inconsistent_targets(&self) -> Vec<Target> {
        self.targets
            .iter()
            .filter(|t| !t.ahp.consistent)
            .map(|t| t.target)
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    fn is_complete(&self) -> bool {
        self.targets.iter().map(|t| t.target).eq(Target::ALL)
    }
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport, PipelineError> {
    let prepared = prepare(config)?;
    let targets = Target::ALL
        .par_iter()
        .map(|&t| analyze_target(config, &prepared, t))
        .collect::<Result<Vec<_>, _>>()?;

    let mut sub_seeds = BTreeMap::new();
    sub_seeds.insert("split".to_string(), config.split_seed());
    for t in Target::ALL {
        sub_seeds.insert(format!("train.{}", t.key()), config.train_seed(t));
        sub_seeds.insert(
            format!("permutation.{}", t.key()),
            config.permutation_seed(t),
        );
    }
    Ok(PipelineReport {
        provenance: Provenance {
            tool: "engage-rank",
            version: env!("CARGO_PKG_VERSION"),
            master_seed: config.seed,
            sub_seeds,
            n_rows: prepared.table.len(),
            n_train: prepared.train.len(),
            n_test: prepared.test.len(),
            config: PipelineConfig {
                out_dir: None,
                ..config.clone()
            },
        },
        stats: prepared.stats,
        targets,
    })
}

/// Feature columns of the evaluation matrix, in reference-table order.
const EVALUATION_COLUMNS: [Column; 10] = [
    Column::Bl,
    Column::BAct,
    Column::BInt,
    Column::BGro,
    Column::CMgt,
    Column::CCom,
    Column::EInt,
    Column::ESat,
    Column::Gender,
    Column::AgeBand,
];

/// Weight Score and Percentage rows per target, three decimals, empty cells
/// for features outside a target's matrix.
pub fn evaluation_matrix_csv(targets: &[TargetReport]) -> String {
    let mut out = String::from("target,row");
    for c in EVALUATION_COLUMNS {
        out.push(',');
        out.push_str(c.label());
    }
    out.push('\n');
    for t in targets {
        for (row, values) in [
            ("Weight Score", &t.ahp.weight_scores),
            ("Percentage", &t.ahp.percentages),
        ] {
            out.push_str(t.target.label());
            out.push(',');
            out.push_str(row);
            for c in EVALUATION_COLUMNS {
                out.push(',');
                if let Some(i) = t.ahp.labels.iter().position(|l| l == c.label()) {
                    out.push_str(&format!("{:.3}", values[i]));
                }
            }
            out.push('\n');
        }
    }
    out
}

/// File name to contents for every artifact of a report.
pub fn report_files(report: &PipelineReport) -> Result<Vec<(String, String)>, PipelineError> {
    if !report.is_complete() {
        return Err(PipelineError::Incomplete);
    }
    let mut files = vec![
        ("report.json".to_string(), report.to_json()),
        ("stats.csv".to_string(), report.stats.to_csv()),
    ];
    for t in &report.targets {
        let key = t.target.key();
        files.push((format!("deviance_{key}.csv"), t.loss_curve.to_csv()));
        files.push((format!("importance_{key}.csv"), t.ranking.to_csv()));
        files.push((
            format!("permutation_raw_{key}.csv"),
            t.permutation.repeats_csv(),
        ));
        files.push((format!("pairwise_{key}.csv"), t.pairwise.to_csv()));
    }
    files.push((
        "evaluation_matrix.csv".to_string(),
        evaluation_matrix_csv(&report.targets),
    ));
    Ok(files)
}

/// Writes every artifact into a staging directory next to `out_dir`, then
/// moves the set into place. Nothing lands in `out_dir` unless every file
/// was written.
pub fn emit_report(report: &PipelineReport, out_dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let files = report_files(report)?;
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| PipelineError::Io { path, source }
    };
    let parent = match out_dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(io_err(&parent))?;
    let staging = tempfile::Builder::new()
        .prefix(".engage-rank-staging-")
        .tempdir_in(&parent)
        .map_err(io_err(&parent))?;
    for (name, contents) in &files {
        let path = staging.path().join(name);
        fs::write(&path, contents).map_err(io_err(&path))?;
    }

    if !out_dir.exists() {
        let staged = staging.keep();
        fs::rename(&staged, out_dir).map_err(io_err(out_dir))?;
    } else {
        for (name, _) in &files {
            let target = out_dir.join(name);
            fs::rename(staging.path().join(name), &target).map_err(io_err(&target))?;
        }
    }
    Ok(files.iter().map(|(name, _)| out_dir.join(name)).collect())
}
