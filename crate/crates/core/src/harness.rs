//! Sweeps, bound reports and constant estimates (f64 only).
//!
//! A sweep point is one fully specified model. For every requested family
//! and every metric regime the harness computes the exact discrepancy
//! between the law of the sum and the approximation, and divides it by the
//! constant-free right-hand side of the matching inequality. The maximum of
//! that ratio over points where the hypotheses hold is the empirical
//! constant.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{poisson, ApproximationFamily, FamilyParams, SignedMeasure};
use crate::metrics::{nonuniform_kolmogorov, nonuniform_local, wasserstein_norm};
use crate::models::{
    exact_sum_distribution, k1k2_events_model, poisson_binomial_model, two_runs_model,
    OneDependentModel,
};
use crate::moments::MomentSummary;

/// The three discrepancy regimes in which every family is bounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Weighted sup of cdf differences.
    Kolmogorov,
    /// `‖·‖_W`.
    Wasserstein,
    /// Weighted sup of point-mass differences.
    Local,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Kolmogorov, Metric::Wasserstein, Metric::Local];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Kolmogorov => "kolmogorov",
            Metric::Wasserstein => "wasserstein",
            Metric::Local => "local",
        }
    }

    /// Power of `λ` by which the Kolmogorov template is multiplied.
    fn lambda_shift(self) -> f64 {
        match self {
            Metric::Kolmogorov => 0.0,
            Metric::Wasserstein => 0.5,
            Metric::Local => -0.5,
        }
    }

    /// Exact left-hand side.
    pub fn lhs(
        self,
        law: &SignedMeasure<f64>,
        approx: &SignedMeasure<f64>,
        lambda: f64,
    ) -> Result<(f64, Option<i64>)> {
        Ok(match self {
            Metric::Kolmogorov => {
                let d = nonuniform_kolmogorov(law, approx, lambda);
                (d.value, d.argmax_x)
            }
            Metric::Wasserstein => (wasserstein_norm(law, approx)?.value, None),
            Metric::Local => {
                let d = nonuniform_local(law, approx, lambda);
                (d.value, d.argmax_x)
            }
        })
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

/// Moment quantities appearing in the numerators of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    R0,
    R0Squared,
    R1,
    R1PlusAbsGamma2,
    DeltaTilde,
    Gamma2Squared,
}

impl Quantity {
    fn eval(self, s: &MomentSummary<f64>) -> f64 {
        match self {
            Quantity::R0 => s.r0,
            Quantity::R0Squared => s.r0 * s.r0,
            Quantity::R1 => s.r1,
            Quantity::R1PlusAbsGamma2 => s.r1 + s.gamma2.abs(),
            Quantity::DeltaTilde => s.delta_tilde,
            Quantity::Gamma2Squared => s.gamma2 * s.gamma2,
        }
    }
}

use ApproximationFamily as F;
use Quantity as Q;

/// Kolmogorov-regime templates as sums of `quantity / λ^power`.
const KOLMOGOROV_TEMPLATES: [(ApproximationFamily, &[(Quantity, f64)]); 6] = [
    (F::Poisson, &[(Q::R0, 1.0)]),
    (F::PoissonSecondOrder, &[(Q::R0Squared, 2.0), (Q::R1, 1.5)]),
    (F::CompoundPoisson, &[(Q::R1, 1.5)]),
    (
        F::TranslatedPoisson,
        &[(Q::R1PlusAbsGamma2, 1.5), (Q::DeltaTilde, 1.0)],
    ),
    (
        F::NegativeBinomial,
        &[(Q::R1, 1.5), (Q::Gamma2Squared, 2.5)],
    ),
    (F::Binomial, &[(Q::R1, 1.5), (Q::Gamma2Squared, 2.5)]),
];

/// One inequality: a family, a metric and its constant-free right-hand side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Template {
    pub family: ApproximationFamily,
    pub metric: Metric,
    terms: &'static [(Quantity, f64)],
}

impl Template {
    /// All eighteen inequalities, ordered by family then metric.
    pub fn all() -> Vec<Template> {
        KOLMOGOROV_TEMPLATES
            .iter()
            .flat_map(|&(family, terms)| {
                Metric::ALL.into_iter().map(move |metric| Template {
                    family,
                    metric,
                    terms,
                })
            })
            .collect()
    }

    pub fn get(family: ApproximationFamily, metric: Metric) -> Template {
        let (_, terms) = KOLMOGOROV_TEMPLATES
            .iter()
            .find(|(f, _)| *f == family)
            .copied()
            .expect("every family has a template");
        Template {
            family,
            metric,
            terms,
        }
    }

    /// Right-hand side without the absolute constant.
    pub fn rhs(&self, s: &MomentSummary<f64>) -> f64 {
        let shift = self.metric.lambda_shift();
        self.terms
            .iter()
            .map(|&(q, power)| q.eval(s) / s.lambda.powf(power - shift))
            .sum()
    }

    /// Powers of `λ` in the denominators, for display.
    pub fn powers(&self) -> Vec<f64> {
        let shift = self.metric.lambda_shift();
        self.terms.iter().map(|&(_, p)| p - shift).collect()
    }
}

/// Model kinds understood by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PoissonBinomial,
    TwoRuns,
    K1k2,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PoissonBinomial => "poisson_binomial",
            ModelKind::TwoRuns => "two_runs",
            ModelKind::K1k2 => "k1k2",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson_binomial" => Ok(ModelKind::PoissonBinomial),
            "two_runs" => Ok(ModelKind::TwoRuns),
            "k1k2" => Ok(ModelKind::K1k2),
            other => Err(Error::Config(format!("unknown model `{other}`"))),
        }
    }
}

/// A fully specified model instance.
///
/// Textual form: `kind:key=value,...`, for example `two_runs:n=100,p=0.05`,
/// `k1k2:n=60,k1=2,k2=2,p=0.1`, `poisson_binomial:n=50,p=0.02` or
/// `poisson_binomial:probs=0.1;0.2;0.05`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    PoissonBinomial {
        probs: Vec<f64>,
    },
    TwoRuns {
        n: usize,
        p: f64,
    },
    K1k2 {
        n: usize,
        k1: usize,
        k2: usize,
        p: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<OneDependentModel<f64>> {
        match self {
            ModelSpec::PoissonBinomial { probs } => poisson_binomial_model(probs),
            ModelSpec::TwoRuns { n, p } => two_runs_model(*n, *p),
            ModelSpec::K1k2 { n, k1, k2, p } => {
                Ok(k1k2_events_model(*n, *k1, *k2, *p)?.into_model())
            }
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::PoissonBinomial { .. } => ModelKind::PoissonBinomial,
            ModelSpec::TwoRuns { .. } => ModelKind::TwoRuns,
            ModelSpec::K1k2 { .. } => ModelKind::K1k2,
        }
    }

    fn point(&self) -> PointKey {
        match self {
            ModelSpec::PoissonBinomial { probs } => {
                let p = probs.iter().copied().fold(0.0, f64::max);
                PointKey {
                    model: self.kind(),
                    n: probs.len(),
                    p,
                    k1: None,
                    k2: None,
                }
            }
            ModelSpec::TwoRuns { n, p } => PointKey {
                model: self.kind(),
                n: *n,
                p: *p,
                k1: None,
                k2: None,
            },
            ModelSpec::K1k2 { n, k1, k2, p } => PointKey {
                model: self.kind(),
                n: *n,
                p: *p,
                k1: Some(*k1),
                k2: Some(*k2),
            },
        }
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let kind: ModelKind = kind.trim().parse()?;
        let mut fields = BTreeMap::new();
        for pair in rest.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let mut take = |key: &str| fields.remove(key);
        fn num<V: FromStr>(key: &str, raw: Option<String>) -> Result<V> {
            let raw = raw.ok_or_else(|| Error::Config(format!("missing `{key}`")))?;
            raw.parse()
                .map_err(|_| Error::Config(format!("cannot parse `{key}` from `{raw}`")))
        }
        let spec = match kind {
            ModelKind::PoissonBinomial => {
                if let Some(list) = take("probs") {
                    let probs = list
                        .split(';')
                        .map(|v| num::<f64>("probs", Some(v.trim().to_string())))
                        .collect::<Result<Vec<_>>>()?;
                    ModelSpec::PoissonBinomial { probs }
                } else {
                    let n: usize = num("n", take("n"))?;
                    let p: f64 = num("p", take("p"))?;
                    ModelSpec::PoissonBinomial { probs: vec![p; n] }
                }
            }
            ModelKind::TwoRuns => ModelSpec::TwoRuns {
                n: num("n", take("n"))?,
                p: num("p", take("p"))?,
            },
            ModelKind::K1k2 => ModelSpec::K1k2 {
                n: num("n", take("n"))?,
                k1: num("k1", take("k1"))?,
                k2: num("k2", take("k2"))?,
                p: num("p", take("p"))?,
            },
        };
        if let Some(extra) = fields.keys().next() {
            return Err(Error::Config(format!(
                "unexpected key `{extra}` for {}",
                kind.name()
            )));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

fn default_families() -> Vec<ApproximationFamily> {
    ApproximationFamily::ALL.to_vec()
}

fn default_truncation_eps() -> f64 {
    crate::measures::DEFAULT_TRUNCATION_EPS
}

/// Sweep description, read from TOML.
///
/// The sweep is the Cartesian product `n × p`; `k1`/`k2` are required for
/// `k1k2` and rejected otherwise. Poisson binomial points use `p_i ≡ p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: Vec<usize>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub k1: Option<usize>,
    #[serde(default)]
    pub k2: Option<usize>,
    #[serde(default = "default_families")]
    pub families: Vec<ApproximationFamily>,
    #[serde(default = "default_truncation_eps")]
    pub truncation_eps: f64,
    #[serde(default)]
    pub format: OutputFormat,
    /// Report destination; standard output when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut config = Self::from_toml(&std::fs::read_to_string(path)?)?;
        if let (Some(out), Some(dir)) = (config.output.as_mut(), path.parent()) {
            if out.is_relative() {
                *out = dir.join(&*out);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n.is_empty() || self.p.is_empty() {
            return Err(Error::Config("`n` and `p` must be nonempty".into()));
        }
        if self.families.is_empty() {
            return Err(Error::Config("`families` must be nonempty".into()));
        }
        if let Some(p) = self.p.iter().find(|p| !p.is_finite()) {
            return Err(Error::Config(format!("non-finite p {p}")));
        }
        if !(self.truncation_eps > 0.0 && self.truncation_eps.is_finite()) {
            return Err(Error::Config("`truncation_eps` must be positive".into()));
        }
        match (self.model, self.k1, self.k2) {
            (ModelKind::K1k2, Some(_), Some(_)) => Ok(()),
            (ModelKind::K1k2, _, _) => Err(Error::Config("k1k2 needs `k1` and `k2`".into())),
            (_, None, None) => Ok(()),
            _ => Err(Error::Config("`k1`/`k2` only apply to k1k2".into())),
        }
    }

    /// Sweep points in row-major `n × p` order.
    pub fn points(&self) -> Vec<ModelSpec> {
        let mut out = Vec::with_capacity(self.n.len() * self.p.len());
        for &n in &self.n {
            for &p in &self.p {
                out.push(match self.model {
                    ModelKind::PoissonBinomial => ModelSpec::PoissonBinomial { probs: vec![p; n] },
                    ModelKind::TwoRuns => ModelSpec::TwoRuns { n, p },
                    ModelKind::K1k2 => ModelSpec::K1k2 {
                        n,
                        k1: self.k1.unwrap_or(0),
                        k2: self.k2.unwrap_or(0),
                        p,
                    },
                });
            }
        }
        out
    }
}

/// Identifies a sweep point in report rows.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
struct PointKey {
    model: ModelKind,
    n: usize,
    p: f64,
    k1: Option<usize>,
    k2: Option<usize>,
}

/// One (point, family, metric) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub model: ModelKind,
    pub n: usize,
    /// Largest per-summand success probability.
    pub p: f64,
    pub k1: Option<usize>,
    pub k2: Option<usize>,
    pub lambda: f64,
    pub gamma2: f64,
    pub delta_tilde: f64,
    pub r0: f64,
    pub r1: f64,
    pub c0: u32,
    pub family: ApproximationFamily,
    pub metric: Metric,
    pub lhs: f64,
    /// Right-hand side without the absolute constant.
    pub rhs: f64,
    pub ratio: f64,
    pub conditions_pass: bool,
    pub argmax_x: Option<i64>,
}

/// A family that could not be built at a sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkippedFamily {
    pub model: ModelKind,
    pub n: usize,
    pub p: f64,
    pub family: ApproximationFamily,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BoundReport {
    pub rows: Vec<BoundRow>,
    pub skipped: Vec<SkippedFamily>,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Evaluates every requested family and metric at one model.
pub fn evaluate_model(
    spec: &ModelSpec,
    families: &[ApproximationFamily],
    truncation_eps: f64,
) -> Result<BoundReport> {
    let model = spec.build()?;
    let law = exact_sum_distribution(&model)?;
    let summary = MomentSummary::compute(&model);
    let key = spec.point();
    let pass = summary.conditions.all_pass();
    let params =
        FamilyParams::new(summary.lambda, summary.gamma2).with_truncation_eps(truncation_eps);

    let mut report = BoundReport::default();
    for &family in families {
        let approx = match family.build(&params) {
            Ok(m) => m,
            Err(Error::Domain { quantity, reason }) => {
                report.skipped.push(SkippedFamily {
                    model: key.model,
                    n: key.n,
                    p: key.p,
                    family,
                    reason: format!("{quantity}: {reason}"),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        for metric in Metric::ALL {
            let (lhs, argmax_x) = metric.lhs(&law, &approx, summary.lambda)?;
            let rhs = Template::get(family, metric).rhs(&summary);
            report.rows.push(BoundRow {
                model: key.model,
                n: key.n,
                p: key.p,
                k1: key.k1,
                k2: key.k2,
                lambda: summary.lambda,
                gamma2: summary.gamma2,
                delta_tilde: summary.delta_tilde,
                r0: summary.r0,
                r1: summary.r1,
                c0: summary.c0_bound,
                family,
                metric,
                lhs,
                rhs,
                ratio: ratio(lhs, rhs),
                conditions_pass: pass,
                argmax_x,
            });
        }
    }
    Ok(report)
}

fn row_order(a: &BoundRow, b: &BoundRow) -> std::cmp::Ordering {
    (a.model, a.k1, a.k2, a.n)
        .cmp(&(b.model, b.k1, b.k2, b.n))
        .then(a.p.total_cmp(&b.p))
        .then((a.family, a.metric).cmp(&(b.family, b.metric)))
}

/// Runs the whole sweep in parallel; row order is deterministic.
pub fn evaluate_bounds(config: &ExperimentConfig) -> Result<BoundReport> {
    config.validate()?;
    let parts = config
        .points()
        .par_iter()
        .map(|spec| evaluate_model(spec, &config.families, config.truncation_eps))
        .collect::<Result<Vec<_>>>()?;
    let mut report = BoundReport::default();
    for part in parts {
        report.rows.extend(part.rows);
        report.skipped.extend(part.skipped);
    }
    report.rows.sort_by(row_order);
    report.skipped.sort_by(|a, b| {
        (a.model, a.n, a.family)
            .cmp(&(b.model, b.n, b.family))
            .then(a.p.total_cmp(&b.p))
    });
    Ok(report)
}

/// Largest finite ratio over rows whose hypotheses hold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantEstimate {
    pub family: ApproximationFamily,
    pub metric: Metric,
    pub c0: u32,
    pub value: f64,
    pub rows_used: usize,
    /// Configuration attaining the maximum.
    pub argmax: BoundRow,
}

/// Maximum ratio over passing rows, or `None` when no row qualifies.
pub fn estimate_constant<'a>(
    rows: impl IntoIterator<Item = &'a BoundRow>,
) -> Option<ConstantEstimate> {
    let mut best: Option<&BoundRow> = None;
    let mut used = 0;
    for row in rows {
        if !row.conditions_pass || !row.ratio.is_finite() {
            continue;
        }
        used += 1;
        if best.is_none_or(|b| row.ratio > b.ratio) {
            best = Some(row);
        }
    }
    best.map(|b| ConstantEstimate {
        family: b.family,
        metric: b.metric,
        c0: b.c0,
        value: b.ratio,
        rows_used: used,
        argmax: b.clone(),
    })
}

/// One estimate per (family, metric, C₀) group.
pub fn estimate_constants(rows: &[BoundRow]) -> Vec<ConstantEstimate> {
    let mut groups: BTreeMap<(ApproximationFamily, Metric, u32), Vec<&BoundRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.family, row.metric, row.c0))
            .or_default()
            .push(row);
    }
    groups.into_values().filter_map(estimate_constant).collect()
}

/// `1/√(2π)`.
pub const SHARP_LIMIT: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpConstantRow {
    pub n: usize,
    pub p: f64,
    pub lambda: f64,
    /// `Σ p_i²`.
    pub lambda2: f64,
    pub wasserstein: f64,
    /// `√λ/λ₂ · ‖L(W) − Π‖_W`.
    pub normalized: f64,
    pub deviation: f64,
    /// `max p_i + 1/√λ`.
    pub rate: f64,
    /// `max p_i ≤ 1/20` and `λ ≥ 1`.
    pub regime_ok: bool,
}

/// Normalised Wasserstein distance between a Poisson binomial law and the
/// Poisson law with the same mean.
pub fn sharp_constant_row(probs: &[f64]) -> Result<SharpConstantRow> {
    let model = poisson_binomial_model(probs)?;
    let law = exact_sum_distribution(&model)?;
    let lambda: f64 = crate::scalar::compensated_sum(probs.iter().copied());
    let lambda2: f64 = crate::scalar::compensated_sum(probs.iter().map(|p| p * p));
    let pi = poisson(&FamilyParams::new(lambda, 0.0))?;
    let w = wasserstein_norm(&law, &pi)?.value;
    let normalized = lambda.sqrt() / lambda2 * w;
    let p_max = probs.iter().copied().fold(0.0, f64::max);
    Ok(SharpConstantRow {
        n: probs.len(),
        p: p_max,
        lambda,
        lambda2,
        wasserstein: w,
        normalized,
        deviation: (normalized - SHARP_LIMIT).abs(),
        rate: p_max + 1.0 / lambda.sqrt(),
        regime_ok: p_max <= 1.0 / 20.0 && lambda >= 1.0,
    })
}

/// One row per `n` with `p_i ≡ p`.
pub fn sharp_constant_experiment(n_list: &[usize], p: f64) -> Result<Vec<SharpConstantRow>> {
    n_list
        .par_iter()
        .map(|&n| sharp_constant_row(&vec![p; n]))
        .collect()
}

/// Writes serialisable rows as CSV with a header line.
pub fn write_csv<S: Serialize>(rows: &[S], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a value as pretty JSON followed by a newline.
pub fn write_json<S: Serialize + ?Sized>(value: &S, mut out: impl Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Writes a report in the configured format.
pub fn write_report(report: &BoundReport, format: OutputFormat, out: impl Write) -> Result<()> {
    match format {
        OutputFormat::Csv => write_csv(&report.rows, out),
        OutputFormat::Json => write_json(report, out),
    }
}
