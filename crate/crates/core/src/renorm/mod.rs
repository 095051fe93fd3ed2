//! Renormalized limits of corrugated short embeddings of the flat torus.
//!
//! A sequence `u_q` is built by stacking normal corrugations on a short
//! torus. Each stage is measured for its curvature scale `η_q` (the sup of
//! the 2-jet) and isometric defect `δ_q`; the renormalized fields
//! `h = H/η`, `γ`, `Q/η` and `Γ/η` are then paired, in rescaled coordinates
//! `z = η_q x`, against a fixed dictionary of bumps and the pairings are
//! checked for decay in `q`.

pub mod corrugation;
pub mod fields;
pub mod import;
pub mod limit;
pub mod pairing;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chart::{eval_jet, Chart};
use crate::error::{Error, Result};
use crate::geometry::geometry_from_jet;

pub use corrugation::{CorrugatedTorus, Layer, Schedule};
pub use fields::{Jet2, PointFields, COMPONENTS, COMPONENT_NAMES, FIELD_GROUPS};
pub use pairing::{dictionary, BumpShape, TestFunction};

/// Bound on `sup |h_ij|` implied by the curvature scale: `|H_ij| ≤ |∂_i∂_j u|`,
/// and the Euclidean norm of a 3-vector is at most `√3` times its largest
/// component.
pub const H_BOUND: f64 = 1.732_050_807_568_877_2;

/// Relative slack on [`H_BOUND`].
pub const H_BOUND_SLACK: f64 = 1e-9;

/// Builds stages `q = 0..=Q`; stage 0 is the bare base torus.
pub fn synthetic_sequence(base_a: f64, base_c: f64, schedule: &Schedule) -> Result<Vec<CorrugatedTorus>> {
    schedule.validate(base_a, base_c)?;
    let layers = schedule.layers();
    Ok((0..=layers.len()).map(|q| CorrugatedTorus::new(base_a, base_c, layers[..q].to_vec())).collect())
}

/// Radical inverse of `i` in `base`.
pub fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Lattice `m×m` over `[0, 1]²` (endpoints included) plus `halton` points
/// of the (3, 5) Halton sequence. The Halton part keeps dyadic corrugation
/// frequencies from aliasing onto the lattice.
pub fn measurement_points(lattice: usize, halton: usize) -> Vec<[f64; 2]> {
    let mut pts = Vec::with_capacity(lattice * lattice + halton);
    if lattice >= 2 {
        let h = 1.0 / (lattice - 1) as f64;
        for i in 0..lattice {
            for j in 0..lattice {
                pts.push([i as f64 * h, j as f64 * h]);
            }
        }
    }
    pts.extend((1..=halton).map(|i| [radical_inverse(i, 3), radical_inverse(i, 5)]));
    pts
}

/// Sup-norm statistics of one stage over the measurement set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageMeasure {
    /// Curvature scale used for renormalization.
    pub eta: f64,
    /// Measured `sup |u|, |∂u|, |∂²u|`.
    pub c2_sup: f64,
    pub delta_sup: f64,
    pub delta_mean: f64,
    /// `sup ‖h‖∞` after renormalization.
    pub h_sup: f64,
    /// Largest eigenvalue of the metric; below 1 means short.
    pub metric_max_eig: f64,
}

pub fn measure_stage(chart: &dyn Chart<f64>, points: &[[f64; 2]], eta: Option<f64>) -> Result<StageMeasure> {
    let jets: Vec<Jet2> = points.par_iter().map(|&x| Jet2::from_chart(chart, x)).collect();
    measure_jets(&jets, eta)
}

/// Stage statistics from precomputed 2-jets; `eta = None` uses the measured scale.
pub fn measure_jets(jets: &[Jet2], eta: Option<f64>) -> Result<StageMeasure> {
    if jets.is_empty() {
        return Err(Error::InvalidInput("empty measurement set".into()));
    }
    let c2_sup = jets.iter().map(Jet2::c2_norm).fold(0.0, f64::max);
    let eta = eta.unwrap_or(c2_sup);
    let mut m = StageMeasure { eta, c2_sup, ..Default::default() };
    let mut sum = 0.0;
    for j in jets {
        let d = j.isometric_defect();
        m.delta_sup = m.delta_sup.max(d);
        sum += d;
        let g = j.metric();
        let tr = 0.5 * (g[0] + g[3]);
        let disc = (0.25 * (g[0] - g[3]).powi(2) + g[1] * g[1]).sqrt();
        m.metric_max_eig = m.metric_max_eig.max(tr + disc);
        m.h_sup = m.h_sup.max(PointFields::new(j, eta)?.h_sup());
    }
    m.delta_mean = sum / jets.len() as f64;
    Ok(m)
}

/// Structure-equation residuals of the renormalized fields on a point subset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StageChecks {
    /// `sup |det h − det g · K/η²|` with `K` from the intrinsic curvature.
    pub gauss: f64,
    /// `sup |∂_i h_jk − ∂_j h_ik − Q_ijk/η|`.
    pub codazzi: f64,
    /// `codazzi` over `sup |∂h|`.
    pub codazzi_relative: f64,
    /// `sup |Q| / (η sup |h|)`, the constant in the lower-order bound.
    pub q_bound: f64,
}

pub fn stage_checks(chart: &dyn Chart<f64>, points: &[[f64; 2]], eta: f64) -> Result<StageChecks> {
    let per: Vec<[f64; 5]> = points
        .par_iter()
        .map(|&x| {
            let s = geometry_from_jet(&eval_jet(chart, &x)?, None)?;
            let f = PointFields::new(&Jet2::from_chart(chart, x), eta)?;
            let gauss = (f.h[0] * f.h[3] - f.h[1] * f.h[2] - f.det_g * s.kappa() / (eta * eta)).abs();
            let mut codazzi = 0.0f64;
            let mut dh = 0.0f64;
            for k in 0..2 {
                let lhs = (s.dh_at(0, 0, 1, k) - s.dh_at(0, 1, 0, k)) / (eta * eta);
                codazzi = codazzi.max((lhs - f.q[k]).abs());
            }
            for v in &s.dh {
                dh = dh.max(v.abs() / (eta * eta));
            }
            let q = f.q[0].abs().max(f.q[1].abs());
            Ok([gauss, codazzi, dh, q, f.h_sup()])
        })
        .collect::<Result<_>>()?;
    let sup = |i: usize| per.iter().map(|r| r[i]).fold(0.0, f64::max);
    let (dh, hs) = (sup(2), sup(4));
    Ok(StageChecks {
        gauss: sup(0),
        codazzi: sup(1),
        codazzi_relative: if dh > 0.0 { sup(1) / dh } else { 0.0 },
        q_bound: if hs > 0.0 { sup(3) / hs } else { 0.0 },
    })
}

/// Pairings of every component with every test function at one stage.
pub fn stage_pairings(
    chart: &dyn Chart<f64>,
    dict: &[TestFunction],
    eta: f64,
    cells: usize,
    finest_wavelength: f64,
) -> Result<Vec<[f64; COMPONENTS]>> {
    dict.par_iter()
        .map(|phi| {
            pairing::pair_components(phi, eta, cells, finest_wavelength, |x| {
                Ok(PointFields::new(&Jet2::from_chart(chart, x), eta)?.components())
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail { field: String },
    NotApplicable,
}

/// Decay statistics of one field group against one test function.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trend {
    pub phi: usize,
    /// Sup over the group's components of `|⟨field_q, Φ⟩|`, per stage.
    pub values: Vec<f64>,
    /// Final over initial value.
    pub ratio: f64,
    /// Least-squares slope of `ln value` against `q`.
    pub slope: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldTrend {
    pub field: String,
    pub trends: Vec<Trend>,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VanishingReport {
    /// Whether `‖h_q‖∞ ≤ √3` held at every stage.
    pub h_bound: bool,
    pub fields: Vec<FieldTrend>,
    pub verdict: Verdict,
}

/// Final value at most this fraction of the first counts as decay.
pub const DECAY_FRACTION: f64 = 0.25;

fn ls_slope(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let ys: Vec<f64> = values.iter().map(|v| v.max(1e-300).ln()).collect();
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (y - ym);
        sxx += dx * dx;
    }
    if sxx > 0.0 {
        sxy / sxx
    } else {
        0.0
    }
}

fn trend(phi: usize, values: Vec<f64>, field: &str) -> Trend {
    let first = values[0];
    let last = *values.last().unwrap();
    let max = values.iter().cloned().fold(0.0, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let slope = ls_slope(&values);
    let ratio = if first > 0.0 { last / first } else if last > 0.0 { f64::INFINITY } else { 0.0 };
    let verdict = if values.len() < 2 || max - min <= 1e-12 * max.max(1e-300) {
        Verdict::NotApplicable
    } else if last <= DECAY_FRACTION * first && slope < 0.0 {
        Verdict::Pass
    } else {
        Verdict::Fail { field: field.to_string() }
    };
    Trend { phi, values, ratio, slope, verdict }
}

/// Judges decay of the paired fields across stages.
///
/// `pairings[q][phi]` holds all components; `h_sup[q]` is the renormalized
/// sup norm. The claims are conditional on `‖h_q‖∞ ≤ √3`: if that premise
/// fails the verdict is `Fail { field: "h_bound" }`.
pub fn verify_vanishing_claims(pairings: &[Vec<[f64; COMPONENTS]>], h_sup: &[f64]) -> VanishingReport {
    let h_bound = h_sup.iter().all(|&h| h <= H_BOUND * (1.0 + H_BOUND_SLACK));
    let nphi = pairings.first().map_or(0, Vec::len);
    let fields: Vec<FieldTrend> = if pairings.len() == h_sup.len() && !pairings.is_empty() {
        FIELD_GROUPS
            .iter()
            .map(|(name, range)| {
                let trends: Vec<Trend> = (0..nphi)
                    .map(|p| {
                        let values = pairings
                            .iter()
                            .map(|stage| stage[p][range.clone()].iter().fold(0.0f64, |m, v| m.max(v.abs())))
                            .collect();
                        trend(p, values, name)
                    })
                    .collect();
                let verdict = if let Some(t) = trends.iter().find(|t| matches!(t.verdict, Verdict::Fail { .. })) {
                    t.verdict.clone()
                } else if trends.iter().all(|t| t.verdict == Verdict::NotApplicable) {
                    Verdict::NotApplicable
                } else {
                    Verdict::Pass
                };
                FieldTrend { field: name.to_string(), trends, verdict }
            })
            .collect()
    } else {
        Vec::new()
    };
    let verdict = if !h_bound {
        Verdict::Fail { field: "h_bound".into() }
    } else if let Some(f) = fields.iter().find(|f| matches!(f.verdict, Verdict::Fail { .. })) {
        f.verdict.clone()
    } else if fields.is_empty() || fields.iter().all(|f| f.verdict == Verdict::NotApplicable) {
        Verdict::NotApplicable
    } else {
        Verdict::Pass
    };
    VanishingReport { h_bound, fields, verdict }
}

/// Sweep configuration; defaults give the dyadic eight-stage sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormConfig {
    pub base_a: f64,
    pub base_c: f64,
    pub schedule: Schedule,
    pub shape: BumpShape,
    /// Quadrature cells per axis over a test function's support.
    pub cells: usize,
    /// Lattice side of the measurement set.
    pub lattice: usize,
    /// Halton points added to the measurement set.
    pub halton: usize,
    /// Points used for the structure-equation checks.
    pub check_points: usize,
    /// Keep `η` at its stage-0 value (negative control).
    pub freeze_eta: bool,
    /// Test functions replacing the default dictionary.
    pub dictionary: Option<Vec<TestFunction>>,
}

impl Default for RenormConfig {
    fn default() -> Self {
        RenormConfig {
            base_a: 0.2,
            base_c: 0.4,
            schedule: Schedule::dyadic(8),
            shape: BumpShape::Smooth,
            cells: 256,
            lattice: 257,
            halton: 65536,
            check_points: 1024,
            freeze_eta: false,
            dictionary: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: usize,
    pub measure: StageMeasure,
    pub checks: StageChecks,
    /// Per test function, in [`COMPONENT_NAMES`] order. Empty when the
    /// renormalized bound fails and the pairings are not meaningful.
    pub pairings: Vec<[f64; COMPONENTS]>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenormReport {
    pub dictionary: Vec<TestFunction>,
    pub stages: Vec<StageReport>,
    pub claims: VanishingReport,
}

impl RenormReport {
    pub fn eta(&self) -> Vec<f64> {
        self.stages.iter().map(|s| s.measure.eta).collect()
    }

    /// `δ_q` as sup and mean over the measurement set.
    pub fn delta(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.stages.iter().map(|s| s.measure.delta_sup).collect(),
            self.stages.iter().map(|s| s.measure.delta_mean).collect(),
        )
    }
}

/// Builds the sequence, measures every stage, checks the renormalized
/// structure equations and pairs the fields with the dictionary.
pub fn run_renorm(cfg: &RenormConfig) -> Result<RenormReport> {
    if cfg.cells < 4 || cfg.check_points == 0 {
        return Err(Error::InvalidInput("cells must be at least 4 and check_points positive".into()));
    }
    let seq = synthetic_sequence(cfg.base_a, cfg.base_c, &cfg.schedule)?;
    let points = measurement_points(cfg.lattice, cfg.halton);
    // offset so the checks avoid the lattice and the measurement Halton prefix
    let check: Vec<[f64; 2]> = (0..cfg.check_points)
        .map(|i| [radical_inverse(i + 7919, 2), radical_inverse(i + 7919, 7)])
        .collect();
    let mut measures = Vec::with_capacity(seq.len());
    for stage in &seq {
        let frozen = if cfg.freeze_eta { measures.first().map(|m: &StageMeasure| m.eta) } else { None };
        measures.push(measure_stage(stage, &points, frozen)?);
    }
    let h_sup: Vec<f64> = measures.iter().map(|m| m.h_sup).collect();
    let premise = h_sup.iter().all(|&h| h <= H_BOUND * (1.0 + H_BOUND_SLACK));
    let dict = cfg.dictionary.clone().unwrap_or_else(|| dictionary(measures[0].eta, cfg.shape));
    let mut stages = Vec::with_capacity(seq.len());
    for (q, (stage, m)) in seq.iter().zip(measures).enumerate() {
        let checks = stage_checks(stage, &check, m.eta)?;
        let pairings = if premise {
            // products of corrugations carry doubled frequencies
            let finest = 0.5 / stage.finest_frequency();
            stage_pairings(stage, &dict, m.eta, cfg.cells, finest)?
        } else {
            Vec::new()
        };
        stages.push(StageReport { stage: q, measure: m, checks, pairings });
    }
    let claims = if premise {
        let p: Vec<_> = stages.iter().map(|s| s.pairings.clone()).collect();
        verify_vanishing_claims(&p, &h_sup)
    } else {
        verify_vanishing_claims(&[], &h_sup)
    };
    Ok(RenormReport { dictionary: dict, stages, claims })
}
