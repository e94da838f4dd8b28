//! Split-conformal construction of the uncertainty set.
//!
//! Observations are split into a training part, used to fit one ridge regression
//! per region, and a calibration part, whose residuals give the local scores
//! `|u_i - f_i(w)|` and the global score `|sum_i (u_i - f_i(w))|`. Interval
//! half-widths are conformal order statistics of those scores. The global
//! predictor is the sum of the regional ones.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::solve_dense;
use crate::model::UncertaintySet;

/// Default ridge weight on standardized features.
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// One historical sample: an `n x p` feature matrix (row-major) and the outages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub sample_id: u64,
    pub w: Vec<f64>,
    pub u: Vec<f64>,
}

impl Observation {
    /// Features of region `i`.
    pub fn region(&self, i: usize, p: usize) -> &[f64] {
        &self.w[i * p..(i + 1) * p]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    n: usize,
    p: usize,
    records: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::Data(format!(
                "need n >= 1 and p >= 1, got n = {n}, p = {p}"
            )));
        }
        Ok(Self {
            n,
            p,
            records: Vec::new(),
        })
    }

    pub fn from_records(n: usize, p: usize, records: Vec<Observation>) -> Result<Self> {
        let mut set = Self::new(n, p)?;
        for r in records {
            set.push(r)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, record: Observation) -> Result<()> {
        check_len("feature matrix", self.n * self.p, record.w.len())?;
        check_len("outage vector", self.n, record.u.len())?;
        if let Some(v) = record.u.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Data(format!(
                "sample {}: outage value {v} is not a finite nonnegative number",
                record.sample_id
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Observation] {
        &self.records
    }

    /// The records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            n: self.n,
            p: self.p,
            records: indices.iter().map(|&k| self.records[k].clone()).collect(),
        }
    }

    /// CSV with header `sample_id,region_id,u,f1..fp`, one row per region.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["sample_id".to_string(), "region_id".into(), "u".into()];
        header.extend((1..=self.p).map(|k| format!("f{k}")));
        wtr.write_record(&header)?;
        for rec in &self.records {
            for i in 0..self.n {
                let mut row = vec![
                    rec.sample_id.to_string(),
                    i.to_string(),
                    rec.u[i].to_string(),
                ];
                row.extend(rec.region(i, self.p).iter().map(|v| v.to_string()));
                wtr.write_record(&row)?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses the CSV written by [`write_csv`](Self::write_csv). Samples keep
    /// their order of first appearance; every sample must list regions `0..n`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.len() < 4
            || &header[0] != "sample_id"
            || &header[1] != "region_id"
            || &header[2] != "u"
        {
            return Err(Error::Data(
                "expected header sample_id,region_id,u,f1..fp".into(),
            ));
        }
        let p = header.len() - 3;
        let mut order: Vec<u64> = Vec::new();
        let mut rows: BTreeMap<u64, BTreeMap<usize, (f64, Vec<f64>)>> = BTreeMap::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec[k].parse::<f64>().map_err(|e| {
                    Error::Data(format!("row {}: column {}: {e}", line + 2, &header[k]))
                })
            };
            let sid: u64 = rec[0]
                .parse()
                .map_err(|e| Error::Data(format!("row {}: sample_id: {e}", line + 2)))?;
            let rid: usize = rec[1]
                .parse()
                .map_err(|e| Error::Data(format!("row {}: region_id: {e}", line + 2)))?;
            let u = parse(2)?;
            let f = (3..3 + p).map(parse).collect::<Result<Vec<_>>>()?;
            let entry = rows.entry(sid).or_insert_with(|| {
                order.push(sid);
                BTreeMap::new()
            });
            if entry.insert(rid, (u, f)).is_some() {
                return Err(Error::Data(format!("sample {sid}: region {rid} repeated")));
            }
        }
        let n = rows.values().next().map_or(0, BTreeMap::len);
        let mut set = Self::new(n, p)?;
        for sid in order {
            let regions = rows.remove(&sid).unwrap_or_default();
            if regions.len() != n || regions.keys().enumerate().any(|(k, &r)| k != r) {
                return Err(Error::Data(format!(
                    "sample {sid}: expected regions 0..{n}, found {:?}",
                    regions.keys().collect::<Vec<_>>()
                )));
            }
            let mut w = Vec::with_capacity(n * p);
            let mut u = Vec::with_capacity(n);
            for (ui, fi) in regions.into_values() {
                u.push(ui);
                w.extend(fi);
            }
            set.push(Observation {
                sample_id: sid,
                w,
                u,
            })?;
        }
        Ok(set)
    }
}

/// Shuffles with `seed` and cuts off `round(train_fraction * len)` training
/// records. Both parts keep the original record order.
pub fn split_observations(
    data: &ObservationSet,
    train_fraction: f64,
    seed: u64,
) -> Result<(ObservationSet, ObservationSet)> {
    let m = data.len();
    if m < 4 {
        return Err(Error::Calibration(format!(
            "need at least 4 observations, got {m}"
        )));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Calibration(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let n_train = (train_fraction * m as f64).round() as usize;
    if n_train == 0 || n_train == m {
        return Err(Error::Calibration(format!(
            "train fraction {train_fraction} leaves an empty part of {m} observations"
        )));
    }
    let mut idx: Vec<usize> = (0..m).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (a, b) = idx.split_at_mut(n_train);
    a.sort_unstable();
    b.sort_unstable();
    Ok((data.subset(a), data.subset(b)))
}

/// Per-region linear predictor `f_i(w) = a_i0 + sum_k a_ik w_ik`, clipped at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regressor {
    n: usize,
    p: usize,
    /// `n` rows of `[intercept, weights...]`, in raw feature units.
    coefficients: Vec<Vec<f64>>,
}

impl Regressor {
    pub fn from_coefficients(p: usize, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        let n = coefficients.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "regressor needs at least one region".into(),
            ));
        }
        for row in &coefficients {
            check_len("regressor coefficients", p + 1, row.len())?;
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "non-finite regressor coefficient".into(),
                ));
            }
        }
        Ok(Self { n, p, coefficients })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    /// Unclipped linear predictions.
    pub fn predict_raw(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len("feature matrix", self.n * self.p, w.len())?;
        Ok(self
            .coefficients
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a[0] + a[1..]
                    .iter()
                    .zip(&w[i * self.p..(i + 1) * self.p])
                    .map(|(c, x)| c * x)
                    .sum::<f64>()
            })
            .collect())
    }

    pub fn predict(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut f = self.predict_raw(w)?;
        for v in &mut f {
            *v = v.max(0.0);
        }
        Ok(f)
    }
}

/// Ridge fit with the default weight.
pub fn fit_regressor(train: &ObservationSet) -> Result<Regressor> {
    fit_regressor_with(train, DEFAULT_RIDGE)
}

/// Independent ridge regression per region on standardized features; the
/// intercept is not penalized. Coefficients are mapped back to raw units.
pub fn fit_regressor_with(train: &ObservationSet, ridge: f64) -> Result<Regressor> {
    let (n, p, m) = (train.n(), train.p(), train.len());
    if m < p + 2 {
        return Err(Error::Calibration(format!(
            "need at least p + 2 = {} training observations, got {m}",
            p + 2
        )));
    }
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidInput(format!("ridge weight {ridge}")));
    }
    if train
        .records()
        .iter()
        .any(|r| r.w.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::Data("non-finite feature value".into()));
    }
    let mf = m as f64;
    let mut coefficients = Vec::with_capacity(n);
    for i in 0..n {
        let feat = |r: &Observation, k: usize| r.w[i * p + k];
        let mean: Vec<f64> = (0..p)
            .map(|k| train.records().iter().map(|r| feat(r, k)).sum::<f64>() / mf)
            .collect();
        let scale: Vec<f64> = (0..p)
            .map(|k| {
                let var = train
                    .records()
                    .iter()
                    .map(|r| (feat(r, k) - mean[k]).powi(2))
                    .sum::<f64>()
                    / mf;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let ybar = train.records().iter().map(|r| r.u[i]).sum::<f64>() / mf;

        let mut gram = vec![0.0; p * p];
        let mut rhs = vec![0.0; p];
        for r in train.records() {
            let z: Vec<f64> = (0..p).map(|k| (feat(r, k) - mean[k]) / scale[k]).collect();
            let dy = r.u[i] - ybar;
            for a in 0..p {
                rhs[a] += z[a] * dy;
                for b in 0..p {
                    gram[a * p + b] += z[a] * z[b];
                }
            }
        }
        for a in 0..p {
            gram[a * p + a] += ridge;
        }
        // A zero pivot only happens with ridge = 0 and collinear features.
        let beta = solve_dense(p, gram, &rhs).unwrap_or_else(|| vec![0.0; p]);
        let mut row = Vec::with_capacity(p + 1);
        let weights: Vec<f64> = (0..p).map(|k| beta[k] / scale[k]).collect();
        row.push(ybar - weights.iter().zip(&mean).map(|(a, b)| a * b).sum::<f64>());
        row.extend(weights);
        coefficients.push(row);
    }
    Regressor::from_coefficients(p, coefficients)
}

/// Calibration residual magnitudes, one list per region plus the global list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationScores {
    pub local: Vec<Vec<f64>>,
    pub global: Vec<f64>,
}

impl CalibrationScores {
    pub fn len(&self) -> usize {
        self.global.len()
    }

    pub fn is_empty(&self) -> bool {
        self.global.is_empty()
    }

    /// Local and global conformal quantiles at level `alpha`.
    pub fn quantiles(&self, alpha: f64) -> Result<(Vec<f64>, f64)> {
        let local = self
            .local
            .iter()
            .map(|s| conformal_quantile(s, alpha))
            .collect::<Result<Vec<_>>>()?;
        Ok((local, conformal_quantile(&self.global, alpha)?))
    }
}

pub fn nonconformity_scores(model: &Regressor, cal: &ObservationSet) -> Result<CalibrationScores> {
    if cal.is_empty() {
        return Err(Error::Calibration("empty calibration set".into()));
    }
    check_len("calibration regions", model.n(), cal.n())?;
    check_len("calibration features", model.p(), cal.p())?;
    let mut local = vec![Vec::with_capacity(cal.len()); model.n()];
    let mut global = Vec::with_capacity(cal.len());
    for rec in cal.records() {
        let kappa = model.predict(&rec.w)?;
        let mut total = 0.0;
        for i in 0..model.n() {
            let r = rec.u[i] - kappa[i];
            local[i].push(r.abs());
            total += r;
        }
        global.push(total.abs());
    }
    Ok(CalibrationScores { local, global })
}

/// Rank `ceil((m + 1)(1 - alpha))` (1-based) in the sorted scores.
pub fn conformal_rank(m: usize, alpha: f64) -> usize {
    // The small offset keeps exact products such as 11 * 0.5 from rounding up.
    ((m as f64 + 1.0) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize
}

/// The finite-sample conformal quantile; `+inf` when the rank exceeds `m`.
pub fn conformal_quantile(scores: &[f64], alpha: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Calibration("no scores".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha = {alpha} must lie in (0, 1)"
        )));
    }
    let k = conformal_rank(scores.len(), alpha);
    if k > scores.len() {
        return Ok(f64::INFINITY);
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    Ok(s[k - 1])
}

/// The uncertainty set at features `w`; fails when a quantile is unattainable.
pub fn build_uncertainty_set(
    model: &Regressor,
    scores: &CalibrationScores,
    alpha: f64,
    w: &[f64],
) -> Result<UncertaintySet> {
    build_uncertainty_set_with(model, scores, alpha, w, false)
}

/// With `allow_unbounded`, unattainable quantiles produce infinite upper bounds
/// instead of an error.
pub fn build_uncertainty_set_with(
    model: &Regressor,
    scores: &CalibrationScores,
    alpha: f64,
    w: &[f64],
    allow_unbounded: bool,
) -> Result<UncertaintySet> {
    check_len("score regions", model.n(), scores.local.len())?;
    let (q_local, q_global) = scores.quantiles(alpha)?;
    if !allow_unbounded && (q_global.is_infinite() || q_local.iter().any(|q| q.is_infinite())) {
        let m = scores.len();
        return Err(Error::CoverageInfeasible {
            alpha,
            m,
            rank: conformal_rank(m, alpha),
        });
    }
    let f = model.predict(w)?;
    let lower: Vec<f64> = f
        .iter()
        .zip(&q_local)
        .map(|(f, q)| (f - q).max(0.0))
        .collect();
    let upper: Vec<f64> = f.iter().zip(&q_local).map(|(f, q)| f + q).collect();
    let f0: f64 = f.iter().sum();
    let mut g_lo = (f0 - q_global).max(0.0);
    let mut g_hi = f0 + q_global;
    let lo: f64 = lower.iter().sum();
    let hi: f64 = upper.iter().sum();
    if g_lo > hi {
        log::warn!("global interval [{g_lo}, {g_hi}] lies above the local total {hi}; widening");
        g_lo = hi;
    }
    if g_hi < lo {
        log::warn!("global interval [{g_lo}, {g_hi}] lies below the local total {lo}; widening");
        g_hi = lo;
    }
    UncertaintySet::new(alpha, lower, upper, g_lo, g_hi)
}

/// Fractions of test records covered by each local interval, the global interval
/// and the whole set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub local_rates: Vec<f64>,
    pub global_rate: f64,
    pub joint_rate: f64,
}

pub fn empirical_coverage(
    model: &Regressor,
    scores: &CalibrationScores,
    alpha: f64,
    test: &ObservationSet,
) -> Result<Coverage> {
    if test.is_empty() {
        return Err(Error::Calibration("empty test set".into()));
    }
    let n = model.n();
    let mut local = vec![0usize; n];
    let (mut global, mut joint) = (0usize, 0usize);
    for rec in test.records() {
        let omega = build_uncertainty_set_with(model, scores, alpha, &rec.w, true)?;
        let mut all = true;
        for i in 0..n {
            let ok = omega.local_lower()[i] <= rec.u[i] && rec.u[i] <= omega.local_upper()[i];
            local[i] += ok as usize;
            all &= ok;
        }
        let total: f64 = rec.u.iter().sum();
        let ok = omega.global_lower() <= total && total <= omega.global_upper();
        global += ok as usize;
        joint += (all && ok) as usize;
    }
    let m = test.len() as f64;
    Ok(Coverage {
        local_rates: local.iter().map(|&k| k as f64 / m).collect(),
        global_rate: global as f64 / m,
        joint_rate: joint as f64 / m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn linear_set(
        n: usize,
        p: usize,
        m: usize,
        seed: u64,
        noise: f64,
    ) -> (ObservationSet, Vec<Vec<f64>>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gen: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..=p)
                    .map(|k| {
                        if k == 0 {
                            rng.random_range(5.0..10.0)
                        } else {
                            rng.random_range(0.5..2.0)
                        }
                    })
                    .collect()
            })
            .collect();
        let mut set = ObservationSet::new(n, p).unwrap();
        for s in 0..m {
            let w: Vec<f64> = (0..n * p).map(|_| rng.random_range(0.0..10.0)).collect();
            let u = (0..n)
                .map(|i| {
                    let a = &gen[i];
                    let v = a[0] + (0..p).map(|k| a[k + 1] * w[i * p + k]).sum::<f64>();
                    v + noise * rng.random_range(-1.0..1.0)
                })
                .collect();
            set.push(Observation {
                sample_id: s as u64,
                w,
                u,
            })
            .unwrap();
        }
        (set, gen)
    }

    #[test]
    fn split_sizes_and_determinism() {
        let (data, _) = linear_set(2, 3, 160, 1, 0.1);
        let (a, b) = split_observations(&data, 0.5, 9).unwrap();
        assert_eq!((a.len(), b.len()), (80, 80));
        let mut ids: Vec<u64> = a
            .records()
            .iter()
            .chain(b.records())
            .map(|r| r.sample_id)
            .collect();
        ids.sort_unstable();
        assert_eq!(ids, (0..160).collect::<Vec<_>>());
        let (a2, b2) = split_observations(&data, 0.5, 9).unwrap();
        assert_eq!((a, b), (a2, b2));

        let (data, _) = linear_set(2, 3, 200, 1, 0.1);
        let (a, b) = split_observations(&data, 0.8, 3).unwrap();
        assert_eq!((a.len(), b.len()), (160, 40));

        let (tiny, _) = linear_set(1, 1, 3, 1, 0.0);
        assert!(matches!(
            split_observations(&tiny, 0.5, 0),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn constant_target_predicts_constant() {
        let (mut data, _) = linear_set(2, 2, 30, 4, 0.0);
        for r in &mut data.records {
            r.u = vec![7.0, 7.0];
        }
        let model = fit_regressor(&data).unwrap();
        let f = model.predict(&[1.0, -40.0, 3.0, 99.0]).unwrap();
        assert!(f.iter().all(|v| (v - 7.0).abs() < 1e-9), "{f:?}");
    }

    #[test]
    fn recovers_linear_generator() {
        let (data, gen) = linear_set(3, 4, 50, 11, 0.0);
        let model = fit_regressor_with(&data, 1e-8).unwrap();
        for (a, g) in model.coefficients().iter().zip(&gen) {
            for (x, y) in a.iter().zip(g) {
                assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
        for r in data.records() {
            let f = model.predict(&r.w).unwrap();
            for (fi, ui) in f.iter().zip(&r.u) {
                assert!((fi - ui).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn collinear_features_are_handled_by_ridge() {
        let mut data = ObservationSet::new(1, 2).unwrap();
        for s in 0..10 {
            let x = s as f64;
            data.push(Observation {
                sample_id: s,
                w: vec![x, 2.0 * x],
                u: vec![x + 1.0],
            })
            .unwrap();
        }
        let model = fit_regressor(&data).unwrap();
        let f = model.predict(&[4.0, 8.0]).unwrap();
        assert!((f[0] - 5.0).abs() < 1e-4);
    }

    #[test]
    fn fit_rejects_small_or_nonfinite_data() {
        let (data, _) = linear_set(1, 3, 4, 0, 0.0);
        assert!(matches!(fit_regressor(&data), Err(Error::Calibration(_))));
        let (mut data, _) = linear_set(1, 1, 5, 0, 0.0);
        data.records[2].w[0] = f64::NAN;
        assert!(matches!(fit_regressor(&data), Err(Error::Data(_))));
    }

    #[test]
    fn prediction_examples() {
        let zero = Regressor::from_coefficients(2, vec![vec![0.0; 3]; 2]).unwrap();
        assert_eq!(zero.predict(&[1.0, 2.0, 3.0, 4.0]).unwrap(), vec![0.0, 0.0]);
        let m = Regressor::from_coefficients(2, vec![vec![0.5, 1.5, -2.0]]).unwrap();
        let w = [3.25, 0.125];
        assert!((m.predict(&w).unwrap()[0] - (0.5 + 1.5 * 3.25 - 2.0 * 0.125)).abs() < 1e-12);
        let neg = Regressor::from_coefficients(1, vec![vec![-3.0, 0.0]]).unwrap();
        assert_eq!(neg.predict(&[1.0]).unwrap(), vec![0.0]);
        assert!(matches!(m.predict(&[1.0]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn score_examples() {
        let (data, _) = linear_set(2, 2, 20, 2, 0.0);
        let model = fit_regressor_with(&data, 1e-10).unwrap();
        let s = nonconformity_scores(&model, &data).unwrap();
        assert!(s.local.iter().flatten().chain(&s.global).all(|&v| v < 1e-6));

        let model = Regressor::from_coefficients(1, vec![vec![5.0, 0.0], vec![5.0, 0.0]]).unwrap();
        let cal = ObservationSet::from_records(
            2,
            1,
            vec![Observation {
                sample_id: 0,
                w: vec![0.0, 0.0],
                u: vec![8.0, 2.0],
            }],
        )
        .unwrap();
        let s = nonconformity_scores(&model, &cal).unwrap();
        assert_eq!(s.local, vec![vec![3.0], vec![3.0]]);
        assert_eq!(s.global, vec![0.0]);
    }

    #[test]
    fn scores_match_naive_loop() {
        let (data, _) = linear_set(3, 2, 40, 5, 2.0);
        let (train, cal) = split_observations(&data, 0.5, 5).unwrap();
        let model = fit_regressor(&train).unwrap();
        let s = nonconformity_scores(&model, &cal).unwrap();
        for (j, rec) in cal.records().iter().enumerate() {
            let mut total = 0.0;
            for i in 0..3 {
                let a = &model.coefficients()[i];
                let mut k = a[0];
                for f in 0..2 {
                    k += a[f + 1] * rec.w[i * 2 + f];
                }
                let k = k.max(0.0);
                assert!((s.local[i][j] - (rec.u[i] - k).abs()).abs() < 1e-12);
                total += rec.u[i] - k;
            }
            assert!((s.global[j] - total.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn quantile_examples() {
        let s: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(conformal_quantile(&s, 0.5).unwrap(), 6.0);
        assert_eq!(conformal_quantile(&[2.5; 7], 0.3).unwrap(), 2.5);
        assert_eq!(conformal_quantile(&s, 0.05).unwrap(), f64::INFINITY);
        assert!(conformal_quantile(&[], 0.1).is_err());
        assert_eq!(conformal_rank(10, 0.05), 11);
        assert_eq!(conformal_rank(80, 0.1), 73);
    }

    #[test]
    fn set_examples() {
        let model = Regressor::from_coefficients(1, vec![vec![5.0, 0.0]]).unwrap();
        let scores = CalibrationScores {
            local: vec![vec![2.0; 9]],
            global: vec![1.0; 9],
        };
        let omega = build_uncertainty_set(&model, &scores, 0.1, &[0.0]).unwrap();
        assert_eq!(omega.local_lower(), &[3.0]);
        assert_eq!(omega.local_upper(), &[7.0]);
        assert_eq!((omega.global_lower(), omega.global_upper()), (4.0, 6.0));

        let model = Regressor::from_coefficients(1, vec![vec![1.0, 0.0], vec![4.0, 0.0]]).unwrap();
        let scores = CalibrationScores {
            local: vec![vec![0.0; 9]; 2],
            global: vec![0.0; 9],
        };
        let omega = build_uncertainty_set(&model, &scores, 0.1, &[0.0, 0.0]).unwrap();
        assert_eq!(omega.local_lower(), omega.local_upper());
        assert_eq!(omega.global_lower(), 5.0);

        let scores = CalibrationScores {
            local: vec![vec![3.0; 9]; 2],
            global: vec![0.5; 9],
        };
        let omega = build_uncertainty_set(&model, &scores, 0.1, &[0.0, 0.0]).unwrap();
        assert_eq!(omega.local_lower(), &[0.0, 1.0]);

        let scores = CalibrationScores {
            local: vec![vec![1.0; 5]; 2],
            global: vec![1.0; 5],
        };
        assert!(matches!(
            build_uncertainty_set(&model, &scores, 0.1, &[0.0, 0.0]),
            Err(Error::CoverageInfeasible { m: 5, rank: 6, .. })
        ));
        let open = build_uncertainty_set_with(&model, &scores, 0.1, &[0.0, 0.0], true).unwrap();
        assert_eq!(open.global_upper(), f64::INFINITY);
    }

    #[test]
    fn clipping_widens_disjoint_global_interval() {
        // Local totals lie in [0, 2] after clipping, global residuals are large.
        let model = Regressor::from_coefficients(1, vec![vec![0.5, 0.0], vec![0.5, 0.0]]).unwrap();
        let scores = CalibrationScores {
            local: vec![vec![0.5; 9]; 2],
            global: vec![0.0; 9],
        };
        let omega = build_uncertainty_set(&model, &scores, 0.1, &[0.0, 0.0]).unwrap();
        assert_eq!((omega.global_lower(), omega.global_upper()), (1.0, 1.0));

        let model = Regressor::from_coefficients(1, vec![vec![10.0, 0.0]]).unwrap();
        let scores = CalibrationScores {
            local: vec![vec![1.0; 9]],
            global: vec![100.0; 9],
        };
        let omega = build_uncertainty_set(&model, &scores, 0.1, &[0.0]).unwrap();
        assert_eq!(omega.global_lower(), 0.0);
    }

    #[test]
    fn coverage_on_calibration_data() {
        let (data, _) = linear_set(1, 2, 120, 8, 3.0);
        let (train, cal) = split_observations(&data, 0.5, 1).unwrap();
        let model = fit_regressor(&train).unwrap();
        let scores = nonconformity_scores(&model, &cal).unwrap();
        let cov = empirical_coverage(&model, &scores, 0.1, &cal).unwrap();
        assert!(cov.joint_rate >= 0.9 - 1.0 / 60.0, "{cov:?}");
        let wide = empirical_coverage(&model, &scores, 0.01, &cal).unwrap();
        assert_eq!(wide.joint_rate, 1.0);
    }

    #[test]
    fn csv_round_trip() {
        let (data, _) = linear_set(3, 2, 5, 6, 1.0);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("sample_id,region_id,u,f1,f2\n"));
        assert_eq!(text.lines().count(), 1 + 15);
        let back = ObservationSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, data);
        assert!(ObservationSet::read_csv("a,b\n1,2\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn smaller_alpha_widens_intervals(seed in 0u64..500, a in 0.05f64..0.5, b in 0.05f64..0.5) {
            let (lo_a, hi_a) = if a < b { (a, b) } else { (b, a) };
            let (data, _) = linear_set(2, 2, 60, seed, 2.0);
            let (train, cal) = split_observations(&data, 0.5, seed).unwrap();
            let model = fit_regressor(&train).unwrap();
            let scores = nonconformity_scores(&model, &cal).unwrap();
            let w = &data.records()[0].w;
            let wide = build_uncertainty_set(&model, &scores, lo_a, w).unwrap();
            let narrow = build_uncertainty_set(&model, &scores, hi_a, w).unwrap();
            for i in 0..2 {
                prop_assert!(wide.local_lower()[i] <= narrow.local_lower()[i]);
                prop_assert!(wide.local_upper()[i] >= narrow.local_upper()[i]);
            }
            prop_assert!(wide.global_lower() <= narrow.global_lower());
            prop_assert!(wide.global_upper() >= narrow.global_upper());
        }

        #[test]
        fn quantiles_ignore_calibration_order(seed in 0u64..500, alpha in 0.05f64..0.9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s: Vec<f64> = (0..30).map(|_| rng.random_range(0.0..5.0)).collect();
            let q = conformal_quantile(&s, alpha).unwrap();
            s.shuffle(&mut rng);
            prop_assert_eq!(q, conformal_quantile(&s, alpha).unwrap());
        }
    }
}
