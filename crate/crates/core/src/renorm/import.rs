//! Externally computed sequences sampled on uniform periodic grids.
//!
//! Each stage is a CSV with header `x1,x2,y1,y2,y3` covering the unit cell
//! `[0, 1)²` on a tensor grid. Derivatives come from fourth-order periodic
//! central differences; pairings are node sums over the data grid.

use std::io::Read;

use serde::Deserialize;

use super::fields::{Jet2, PointFields, COMPONENTS};
use super::pairing::{BumpShape, TestFunction};
use super::{dictionary, measure_jets, verify_vanishing_claims, RenormReport, StageChecks, StageReport};
use crate::error::{Error, Result};
use crate::geometry::{gauss_curvature, riemann};

#[derive(Deserialize)]
struct Row {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
    y3: f64,
}

/// Embedding samples `u[i*n2 + j] = u(i/n1, j/n2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledStage {
    pub n1: usize,
    pub n2: usize,
    pub u: Vec<[f64; 3]>,
}

fn grid_index(x: f64, n: usize, axis: usize) -> Result<usize> {
    let t = x * n as f64;
    let i = t.round();
    if (t - i).abs() > 1e-6 || i < 0.0 || i >= n as f64 {
        return Err(Error::InvalidInput(format!("x{} = {x} is not a node of a uniform {n}-point grid on [0, 1)", axis + 1)));
    }
    Ok(i as usize)
}

/// Parses one stage; rows may come in any order but must fill the grid.
pub fn read_stage_csv(reader: impl Read) -> Result<SampledStage> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::InvalidInput(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x1", "x2", "y1", "y2", "y3"] {
        return Err(Error::InvalidInput(format!("expected header x1,x2,y1,y2,y3, got {}", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let rows: Vec<Row> = rdr.deserialize().collect::<std::result::Result<_, _>>().map_err(|e| Error::InvalidInput(e.to_string()))?;
    let count = |sel: fn(&Row) -> f64| {
        let mut v: Vec<f64> = rows.iter().map(sel).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        v.len()
    };
    let (n1, n2) = (count(|r| r.x1), count(|r| r.x2));
    if n1 < 5 || n2 < 5 || rows.len() != n1 * n2 {
        return Err(Error::InvalidInput(format!("{} rows do not form a tensor grid of at least 5×5 ({n1}×{n2})", rows.len())));
    }
    let mut u = vec![[f64::NAN; 3]; n1 * n2];
    for r in &rows {
        let idx = grid_index(r.x1, n1, 0)? * n2 + grid_index(r.x2, n2, 1)?;
        if !u[idx][0].is_nan() {
            return Err(Error::InvalidInput(format!("duplicate node ({}, {})", r.x1, r.x2)));
        }
        u[idx] = [r.y1, r.y2, r.y3];
    }
    Ok(SampledStage { n1, n2, u })
}

/// Fourth-order periodic derivative along `axis` of a field on the `n1×n2` grid.
fn d4<const C: usize>(f: &[[f64; C]], n1: usize, n2: usize, axis: usize) -> Vec<[f64; C]> {
    let (n, h) = if axis == 0 { (n1, 1.0 / n1 as f64) } else { (n2, 1.0 / n2 as f64) };
    let at = |i: usize, j: usize, s: isize| {
        if axis == 0 {
            f[((i as isize + s).rem_euclid(n as isize) as usize) * n2 + j]
        } else {
            f[i * n2 + (j as isize + s).rem_euclid(n as isize) as usize]
        }
    };
    (0..n1 * n2)
        .map(|flat| {
            let (i, j) = (flat / n2, flat % n2);
            let (m2, m1, p1, p2) = (at(i, j, -2), at(i, j, -1), at(i, j, 1), at(i, j, 2));
            let mut out = [0.0; C];
            for c in 0..C {
                out[c] = (m2[c] - 8.0 * m1[c] + 8.0 * p1[c] - p2[c]) / (12.0 * h);
            }
            out
        })
        .collect()
}

impl SampledStage {
    pub fn nodes(&self) -> Vec<[f64; 2]> {
        (0..self.n1 * self.n2).map(|f| [(f / self.n2) as f64 / self.n1 as f64, (f % self.n2) as f64 / self.n2 as f64]).collect()
    }

    /// 2-jets at every node.
    pub fn jets(&self) -> Vec<Jet2> {
        let (n1, n2) = (self.n1, self.n2);
        let d = [d4(&self.u, n1, n2, 0), d4(&self.u, n1, n2, 1)];
        let dd = [[d4(&d[0], n1, n2, 0), d4(&d[0], n1, n2, 1)], [d4(&d[1], n1, n2, 0), d4(&d[1], n1, n2, 1)]];
        (0..n1 * n2)
            .map(|f| {
                let mixed = dd[0][1][f].iter().zip(&dd[1][0][f]).map(|(a, b)| 0.5 * (a + b));
                let mut m = [0.0; 3];
                for (mi, v) in m.iter_mut().zip(mixed) {
                    *mi = v;
                }
                Jet2 { u: self.u[f], du: [d[0][f], d[1][f]], ddu: [[dd[0][0][f], m], [m, dd[1][1][f]]] }
            })
            .collect()
    }

    /// Renormalized Gauss and Codazzi residuals with all derivatives of
    /// `Γ` and `h` taken by differences on the data grid.
    pub fn checks(&self, fields: &[PointFields], eta: f64) -> StageChecks {
        let (n1, n2) = (self.n1, self.n2);
        let chr: Vec<[f64; 8]> = fields.iter().map(|f| f.christoffel.map(|v| v * eta)).collect();
        let dchr = [d4(&chr, n1, n2, 0), d4(&chr, n1, n2, 1)];
        let h: Vec<[f64; 4]> = fields.iter().map(|f| f.h).collect();
        let dh = [d4(&h, n1, n2, 0), d4(&h, n1, n2, 1)];
        let mut out = StageChecks::default();
        let (mut dh_sup, mut q_sup, mut h_sup) = (0.0f64, 0.0f64, 0.0f64);
        for (idx, f) in fields.iter().enumerate() {
            let mut dgamma = vec![0.0; 16];
            for l in 0..2 {
                dgamma[l * 8..(l + 1) * 8].copy_from_slice(&dchr[l][idx]);
            }
            let r = riemann(&chr[idx], &dgamma, &f.g, 2);
            let k = gauss_curvature(&r, &f.g);
            out.gauss = out.gauss.max((f.h[0] * f.h[3] - f.h[1] * f.h[2] - f.det_g * k / (eta * eta)).abs());
            for kk in 0..2 {
                let lhs = (dh[0][idx][2 + kk] - dh[1][idx][kk]) / eta;
                out.codazzi = out.codazzi.max((lhs - f.q[kk]).abs());
            }
            dh_sup = dh[0][idx].iter().chain(&dh[1][idx]).fold(dh_sup, |m, v| m.max(v.abs() / eta));
            q_sup = q_sup.max(f.q[0].abs()).max(f.q[1].abs());
            h_sup = h_sup.max(f.h_sup());
        }
        out.codazzi_relative = if dh_sup > 0.0 { out.codazzi / dh_sup } else { 0.0 };
        out.q_bound = if h_sup > 0.0 { q_sup / h_sup } else { 0.0 };
        out
    }
}

/// Node-sum pairing on the data grid; the support of `phi` must cover at
/// least four nodes per axis.
pub fn pair_on_grid(
    phi: &TestFunction,
    eta: f64,
    nodes: &[[f64; 2]],
    counts: [usize; 2],
    values: &[[f64; COMPONENTS]],
) -> Result<[f64; COMPONENTS]> {
    for &n in &counts {
        let span = 2.0 * phi.half_width / eta;
        let cells = span * n as f64;
        if cells < 4.0 {
            return Err(Error::QuadratureUnderResolved { wavelength: span, cells });
        }
    }
    let dz = eta * eta / (counts[0] * counts[1]) as f64;
    let wrap = |d: f64| d - d.round();
    let mut acc = [0.0; COMPONENTS];
    for (x, v) in nodes.iter().zip(values) {
        let w = phi.eval([eta * wrap(x[0] - phi.center[0] / eta), eta * wrap(x[1] - phi.center[1] / eta)]);
        if w != 0.0 {
            for (a, vi) in acc.iter_mut().zip(v) {
                *a += w * dz * vi;
            }
        }
    }
    Ok(acc)
}

/// Measurements, checks, pairings and verdicts for an imported sequence.
/// Without an explicit dictionary the default one is scaled by the first
/// stage's `η`.
pub fn renorm_from_samples(
    stages: &[SampledStage],
    shape: BumpShape,
    custom: Option<&[TestFunction]>,
) -> Result<RenormReport> {
    if stages.len() < 2 {
        return Err(Error::InvalidInput("a sequence needs at least two stages".into()));
    }
    let mut reports = Vec::with_capacity(stages.len());
    let mut dict = Vec::new();
    for (q, st) in stages.iter().enumerate() {
        let jets = st.jets();
        let measure = measure_jets(&jets, None)?;
        if q == 0 {
            dict = custom.map_or_else(|| dictionary(measure.eta, shape), <[_]>::to_vec);
        }
        let fields: Vec<PointFields> = jets.iter().map(|j| PointFields::new(j, measure.eta)).collect::<Result<_>>()?;
        let values: Vec<[f64; COMPONENTS]> = fields.iter().map(PointFields::components).collect();
        let nodes = st.nodes();
        let pairings = dict
            .iter()
            .map(|phi| pair_on_grid(phi, measure.eta, &nodes, [st.n1, st.n2], &values))
            .collect::<Result<_>>()?;
        let checks = st.checks(&fields, measure.eta);
        reports.push(StageReport { stage: q, measure, checks, pairings });
    }
    let h_sup: Vec<f64> = reports.iter().map(|s| s.measure.h_sup).collect();
    let pairings: Vec<_> = reports.iter().map(|s| s.pairings.clone()).collect();
    let claims = verify_vanishing_claims(&pairings, &h_sup);
    Ok(RenormReport { dictionary: dict, stages: reports, claims })
}
