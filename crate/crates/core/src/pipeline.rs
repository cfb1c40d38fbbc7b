//! End-to-end orchestration, ground-truth diagnostics and the exact
//! identifiability check.

use std::fmt;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::binning::{bin_sites, select_abundant, BinAssignment, BinningError, BinningParams};
use crate::clustering::{
    agreement_matrix, certify, close_pairs, expected_statistic, site_statistics, sparsify, ClusteringError,
    ClusteringThresholds, PairSet, SparsityCertificate,
};
use crate::distance::{
    bin_agreement, distorted_metric, verify_distortion, DistanceError, DistortedMetric, DistortionReport,
};
use crate::model::{
    check_assumption, exact_leaf_distribution, Alignment, AssumptionReport, ModelError, RateDistribution,
    SimulatedAlignment, SubstitutionModel,
};
use crate::reconstruct::{reconstruct_topology, ReconstructionConfig, ReconstructionError};
use crate::tree::{robinson_foulds, Phylogeny, RegularityParams, Topology, TreeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Assumption,
    Agreement,
    ClosePairs,
    Sparsify,
    Statistic,
    Binning,
    Abundance,
    Distances,
    Reconstruction,
    Evaluation,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Assumption => "assumption",
            Stage::Agreement => "agreement",
            Stage::ClosePairs => "close_pairs",
            Stage::Sparsify => "sparsify",
            Stage::Statistic => "statistic",
            Stage::Binning => "binning",
            Stage::Abundance => "abundance",
            Stage::Distances => "distances",
            Stage::Reconstruction => "reconstruction",
            Stage::Evaluation => "evaluation",
        }
    }

    fn hint(self) -> &'static str {
        match self {
            Stage::Assumption => "raise M or choose a rate distribution with less mass near 0",
            Stage::Agreement | Stage::Statistic => "check that the alignment matches the tree and model",
            Stage::ClosePairs => "no leaf pair looks close; check g or increase k",
            Stage::Sparsify => "check g or increase k",
            Stage::Binning => "lower gamma_U",
            Stage::Abundance => "increase k",
            Stage::Distances => "increase k",
            Stage::Reconstruction => "increase k, or adjust the trust cap and tau",
            Stage::Evaluation => "check that the truth tree has the alignment's leaves",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StageFailure {
    #[error("Phi^-1(e^-6g) = {phi_inv_6g} exceeds M = {big_m}")]
    AssumptionFailed { phi_inv_6g: f64, big_m: f64 },
    #[error("alignment has {alignment} leaves but {labels} labels were given")]
    LabelCount { alignment: usize, labels: usize },
    #[error("alignment alphabet size {alignment} differs from the model's {model}")]
    AlphabetMismatch { alignment: usize, model: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
    #[error(transparent)]
    Binning(#[from] BinningError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    Reconstruction(#[from] ReconstructionError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// A stage error with the stage name and a remediation hint.
#[derive(Debug, Error, PartialEq)]
#[error("stage {stage} failed: {failure} (hint: {hint})")]
pub struct PipelineError {
    pub stage: Stage,
    pub hint: &'static str,
    #[source]
    pub failure: StageFailure,
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn at<T, E: Into<StageFailure>>(stage: Stage, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| PipelineError {
        stage,
        hint: stage.hint(),
        failure: e.into(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub params: RegularityParams,
    pub model: SubstitutionModel,
    /// Only used to check the model assumption; inference never sees it.
    pub rates: RateDistribution,
    pub gamma_u: Option<f64>,
    /// Derived from the distance estimates when absent.
    pub reconstruction: Option<ReconstructionConfig>,
    /// Leaf labels for alignment columns; `leaf_<j>` when absent.
    pub labels: Option<Vec<String>>,
    /// Stop after the per-site statistic.
    pub stats_only: bool,
}

impl PipelineConfig {
    pub fn new(params: RegularityParams, model: SubstitutionModel, rates: RateDistribution) -> Self {
        PipelineConfig {
            params,
            model,
            rates,
            gamma_u: None,
            reconstruction: None,
            labels: None,
            stats_only: false,
        }
    }
}

/// Results of the distance and reconstruction stages.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeStages {
    pub binning: BinningParams,
    pub assignment: BinAssignment,
    pub abundant_bin: usize,
    pub dhat: DistortedMetric,
    pub reconstruction: ReconstructionConfig,
    pub topology: Topology,
}

/// Checks that need the true tree or the hidden rates.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleDiagnostics {
    pub rf: Option<usize>,
    pub certificate: SparsityCertificate,
    /// Mean hidden rate over the abundant bin.
    pub lambda_star: Option<f64>,
    pub distortion: Option<DistortionReport>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineReport {
    pub n: usize,
    pub k: usize,
    pub assumption: AssumptionReport,
    pub thresholds: ClusteringThresholds,
    pub close_pair_count: usize,
    pub pairs: PairSet,
    /// Size check only; see [`OracleDiagnostics`] for the full certificate.
    pub certificate: SparsityCertificate,
    pub u_values: Vec<f64>,
    /// `None` when the run stopped after the statistic.
    pub tree: Option<TreeStages>,
    pub oracle: Option<OracleDiagnostics>,
    pub timings: Vec<(Stage, Duration)>,
}

impl PipelineReport {
    pub fn topology(&self) -> Option<&Topology> {
        self.tree.as_ref().map(|t| &t.topology)
    }

    pub fn k_star(&self) -> Option<usize> {
        self.tree.as_ref().map(|t| t.dhat.k_star)
    }
}

struct Clock {
    timings: Vec<(Stage, Duration)>,
    last: Instant,
}

impl Clock {
    fn lap(&mut self, stage: Stage) {
        let now = Instant::now();
        self.timings.push((stage, now - self.last));
        self.last = now;
    }
}

/// Runs every inference stage on the alignment alone.
pub fn run_pipeline(a: &Alignment, cfg: &PipelineConfig) -> Result<PipelineReport> {
    let mut clock = Clock {
        timings: Vec::new(),
        last: Instant::now(),
    };
    let assumption = at(Stage::Assumption, check_assumption(&cfg.rates, &cfg.params))?;
    if !assumption.holds {
        return at(
            Stage::Assumption,
            Err(StageFailure::AssumptionFailed {
                phi_inv_6g: assumption.phi_inv_6g,
                big_m: cfg.params.big_m,
            }),
        );
    }
    if a.r() != cfg.model.r() {
        return at(
            Stage::Agreement,
            Err(StageFailure::AlphabetMismatch {
                alignment: a.r(),
                model: cfg.model.r(),
            }),
        );
    }
    if let Some(labels) = &cfg.labels {
        if labels.len() != a.n() {
            return at(
                Stage::Agreement,
                Err(StageFailure::LabelCount {
                    alignment: a.n(),
                    labels: labels.len(),
                }),
            );
        }
    }
    clock.lap(Stage::Assumption);

    let q = agreement_matrix(a, &cfg.model);
    clock.lap(Stage::Agreement);
    let thresholds = ClusteringThresholds::from_g(cfg.params.g);
    let candidates = close_pairs(&q, &thresholds);
    clock.lap(Stage::ClosePairs);
    let pairs = at(Stage::Sparsify, sparsify(&candidates, &q, &thresholds))?;
    let certificate = SparsityCertificate::size_only(&pairs, a.n(), &cfg.params);
    clock.lap(Stage::Sparsify);
    let u_values = at(Stage::Statistic, site_statistics(a, &pairs, &cfg.model))?;
    clock.lap(Stage::Statistic);

    let mut report = PipelineReport {
        n: a.n(),
        k: a.k(),
        assumption,
        thresholds,
        close_pair_count: candidates.len(),
        pairs,
        certificate,
        u_values,
        tree: None,
        oracle: None,
        timings: Vec::new(),
    };
    if !cfg.stats_only {
        report.tree = Some(tree_stages(a, cfg, &report.u_values, &mut clock)?);
    }
    report.timings = clock.timings;
    Ok(report)
}

fn tree_stages(a: &Alignment, cfg: &PipelineConfig, u_values: &[f64], clock: &mut Clock) -> Result<TreeStages> {
    let binning = at(Stage::Binning, BinningParams::derive(&cfg.params, a.n(), cfg.gamma_u))?;
    let assignment = at(Stage::Binning, bin_sites(u_values, &binning))?;
    clock.lap(Stage::Binning);
    let abundant_bin = at(Stage::Abundance, select_abundant(&assignment))?;
    clock.lap(Stage::Abundance);
    let bin = &assignment.bins[abundant_bin];
    let qstar = at(Stage::Distances, bin_agreement(a, bin, &cfg.model))?;
    let mut dhat = distorted_metric(&qstar);
    if let Some(labels) = &cfg.labels {
        dhat = at(Stage::Distances, dhat.with_labels(labels.clone()))?;
    }
    dhat.source_bin = Some(abundant_bin);
    dhat.k_star = bin.len();
    clock.lap(Stage::Distances);
    let reconstruction = match cfg.reconstruction {
        Some(c) => c,
        None => at(Stage::Reconstruction, ReconstructionConfig::from_data(&dhat))?,
    };
    let topology = at(Stage::Reconstruction, reconstruct_topology(&dhat, &reconstruction))?;
    clock.lap(Stage::Reconstruction);
    Ok(TreeStages {
        binning,
        assignment,
        abundant_bin,
        dhat,
        reconstruction,
        topology,
    })
}

/// Compares a finished report with the true tree and, when given, the
/// hidden rates. Alignment column `j` must be leaf `j` of `truth`.
pub fn evaluate_against_truth(
    report: &PipelineReport,
    truth: &Phylogeny,
    params: &RegularityParams,
    hidden_lambdas: Option<&[f64]>,
) -> Result<OracleDiagnostics> {
    let certificate = at(Stage::Evaluation, certify(&report.pairs, truth, params))?;
    let mut diag = OracleDiagnostics {
        rf: None,
        certificate,
        lambda_star: None,
        distortion: None,
    };
    let Some(stages) = &report.tree else {
        return Ok(diag);
    };
    diag.rf = Some(at(
        Stage::Evaluation,
        robinson_foulds(truth.topology(), &stages.topology),
    )?);
    if let Some(hidden) = hidden_lambdas {
        let bin = &stages.assignment.bins[stages.abundant_bin];
        let lambda_star = bin.iter().map(|&i| hidden[i]).sum::<f64>() / bin.len() as f64;
        let n = report.n as f64;
        let tau = lambda_star * params.f / 5.0;
        let psi = 5.0 * lambda_star * params.g * n.ln();
        let scaled = truth.tree_metric().scaled(lambda_star);
        diag.lambda_star = Some(lambda_star);
        diag.distortion = Some(verify_distortion(&stages.dhat, &scaled, tau, psi));
    }
    Ok(diag)
}

/// Total variation distance between the exact leaf distributions of two
/// small models; leaves are matched by label.
pub fn identifiability_witness(
    p1: &Phylogeny,
    p2: &Phylogeny,
    rates1: &RateDistribution,
    rates2: &RateDistribution,
    model: &SubstitutionModel,
) -> std::result::Result<f64, ModelError> {
    let d1 = exact_leaf_distribution(p1, model, rates1)?;
    let d2 = exact_leaf_distribution(p2, model, rates2)?;
    d1.total_variation(&d2)
}

/// Slow/fast classification of sites by thresholding the statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    pub slow: f64,
    pub fast: f64,
    pub threshold: f64,
    /// `confusion[truth][called]`, index 0 = slow, 1 = fast.
    pub confusion: [[usize; 2]; 2],
}

impl ClassificationReport {
    pub fn accuracy(&self) -> f64 {
        let c = &self.confusion;
        let total: usize = c.iter().flatten().sum();
        (c[0][0] + c[1][1]) as f64 / total as f64
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ClassificationError {
    #[error("hidden rates are missing or have the wrong length")]
    MissingSidecar,
    #[error(transparent)]
    Clustering(#[from] ClusteringError),
}

/// Thresholds the statistic midway between its conditional means at the
/// smallest and largest hidden rate, and scores the calls against the
/// hidden rates (a site is fast when its rate is above the midpoint).
pub fn site_classification_report(
    sim: &SimulatedAlignment,
    pairs: &PairSet,
    truth: &Phylogeny,
    model: &SubstitutionModel,
) -> std::result::Result<ClassificationReport, ClassificationError> {
    let hidden = &sim.hidden_lambdas;
    if hidden.is_empty() || hidden.len() != sim.alignment.k() {
        return Err(ClassificationError::MissingSidecar);
    }
    let slow = hidden.iter().copied().fold(f64::INFINITY, f64::min);
    let fast = hidden.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let u = site_statistics(&sim.alignment, pairs, model)?;
    let metric = truth.tree_metric();
    let threshold = (expected_statistic(&metric, pairs, slow) + expected_statistic(&metric, pairs, fast)) / 2.0;
    let rate_mid = (slow + fast) / 2.0;
    let mut confusion = [[0usize; 2]; 2];
    for (&x, &lambda) in u.iter().zip(hidden) {
        let is_fast = (lambda > rate_mid) as usize;
        // Fast sites agree less.
        let called_fast = (x < threshold) as usize;
        confusion[is_fast][called_fast] += 1;
    }
    Ok(ClassificationReport {
        slow,
        fast,
        threshold,
        confusion,
    })
}
