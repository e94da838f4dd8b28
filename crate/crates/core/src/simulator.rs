//! Synthetic outage histories from per-region SIR dynamics.
//!
//! Each region runs an independent unaffected/disrupted/recovered model whose
//! disruption rate depends on a smooth weather field over the unit square. A
//! sample's outage count is the time-integrated disrupted share plus small
//! Gaussian noise. Samples differ by a small random jitter of region coordinates.
//!
//! Randomness: sample `k` draws from ChaCha8 seeded with `seed` on stream `k`,
//! so samples are independent of evaluation order.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::conformal::{Observation, ObservationSet};
use crate::error::{check_len, Error, Result};
use crate::par;

pub const MAX_STEPS: usize = 1_000_000;
/// Stop once every region has fewer disrupted customers than this.
pub const STOP_DISRUPTED: f64 = 0.5;
/// Number of weather features per region.
pub const N_FEATURES: usize = 3;

/// Stream reserved for drawing the instance itself (populations, coordinates).
const INSTANCE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SirConfig {
    pub n: usize,
    /// Population per region.
    pub nu: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_dtau")]
    pub dtau: f64,
    #[serde(default = "default_chi")]
    pub chi: f64,
    #[serde(default = "default_initial")]
    pub initial_disrupted: f64,
    pub seed: u64,
    /// Region centers `(q, r)` in the unit square.
    pub coords: Vec<(f64, f64)>,
    /// Half-width of the per-sample coordinate jitter.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_rho() -> f64 {
    0.1
}
fn default_dtau() -> f64 {
    0.1
}
fn default_chi() -> f64 {
    0.1
}
fn default_initial() -> f64 {
    1.0
}
fn default_jitter() -> f64 {
    0.05
}

impl SirConfig {
    /// Populations uniform on `[1000, 10000]` and coordinates uniform on the unit
    /// square, both drawn from `seed`.
    pub fn default_for(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("region count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(INSTANCE_STREAM);
        let nu = (0..n).map(|_| rng.random_range(1000.0..=10000.0)).collect();
        let coords = (0..n)
            .map(|_| (rng.random::<f64>(), rng.random::<f64>()))
            .collect();
        let cfg = Self {
            n,
            nu,
            rho: default_rho(),
            dtau: default_dtau(),
            chi: default_chi(),
            initial_disrupted: default_initial(),
            seed,
            coords,
            jitter: default_jitter(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.n == 0 {
            return bad("region count must be positive".into());
        }
        check_len("populations", self.n, self.nu.len())?;
        check_len("coordinates", self.n, self.coords.len())?;
        if self.nu.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad("populations must be positive".into());
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("recovery rate {} must be positive", self.rho));
        }
        if !(self.dtau > 0.0 && self.dtau.is_finite()) {
            return bad(format!("time step {} must be positive", self.dtau));
        }
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return bad(format!("noise scale {} must be nonnegative", self.chi));
        }
        let min_nu = self.nu.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.initial_disrupted > 0.0 && self.initial_disrupted < min_nu) {
            return bad(format!(
                "initial disrupted {} must lie in (0, {min_nu})",
                self.initial_disrupted
            ));
        }
        if self
            .coords
            .iter()
            .any(|&(q, r)| !(0.0..=1.0).contains(&q) || !(0.0..=1.0).contains(&r))
        {
            return bad("coordinates must lie in the unit square".into());
        }
        if !(0.0..=0.5).contains(&self.jitter) {
            return bad(format!("jitter {} must lie in [0, 0.5]", self.jitter));
        }
        Ok(())
    }

    /// Per-region outage cost proportional to population (`h_i = nu_i`).
    pub fn outage_costs(&self) -> Vec<f64> {
        self.nu.clone()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Weather features `(temperature, wind, precipitation)` per region, row-major
/// `n x 3`.
pub fn weather_field(coords: &[(f64, f64)]) -> Vec<f64> {
    let mut w = Vec::with_capacity(coords.len() * N_FEATURES);
    for &(q, r) in coords {
        let (sq, cq) = (2.0 * PI * q).sin_cos();
        let (sr, cr) = (2.0 * PI * r).sin_cos();
        w.push(20.0 + 5.0 * sq * cr);
        w.push(10.0 + 3.0 * cq * sr);
        w.push(0.5 + 0.1 * sq * cr);
    }
    w
}

pub fn disruption_rate(w: &[f64]) -> f64 {
    let beta = 0.3 + 0.01 * (w[0] - 20.0) + 0.005 * (w[1] - 10.0) - 0.005 * (w[2] - 0.5);
    beta.max(1e-6)
}

/// Compartment sizes at every Euler step, row-major `steps x n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SirTrajectory {
    pub n: usize,
    pub dtau: f64,
    pub unaffected: Vec<f64>,
    pub disrupted: Vec<f64>,
    pub recovered: Vec<f64>,
}

impl SirTrajectory {
    /// Number of recorded states, including the initial one.
    pub fn len(&self) -> usize {
        self.disrupted.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        self.disrupted.is_empty()
    }

    pub fn state(&self, k: usize) -> (&[f64], &[f64], &[f64]) {
        let r = k * self.n..(k + 1) * self.n;
        (
            &self.unaffected[r.clone()],
            &self.disrupted[r.clone()],
            &self.recovered[r],
        )
    }

    /// `(1 / nu_i) * sum_k disrupted_i(k) * dtau` over all states before the last.
    pub fn disrupted_time(&self, nu: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n];
        for k in 0..self.len().saturating_sub(1) {
            for (a, g) in acc.iter_mut().zip(self.state(k).1) {
                *a += g;
            }
        }
        acc.iter().zip(nu).map(|(a, v)| a * self.dtau / v).collect()
    }
}

/// Forward Euler until every region has fewer than half a disrupted customer.
/// Flows are capped by the compartment they drain, which keeps the update
/// conservative and nonnegative.
pub fn simulate_sir(cfg: &SirConfig, beta: &[f64]) -> Result<SirTrajectory> {
    cfg.validate()?;
    check_len("disruption rates", cfg.n, beta.len())?;
    let n = cfg.n;
    let mut ups: Vec<f64> = cfg.nu.iter().map(|v| v - cfg.initial_disrupted).collect();
    let mut gam = vec![cfg.initial_disrupted; n];
    let mut xi = vec![0.0; n];
    let mut traj = SirTrajectory {
        n,
        dtau: cfg.dtau,
        unaffected: ups.clone(),
        disrupted: gam.clone(),
        recovered: xi.clone(),
    };
    let mut steps = 0;
    while gam.iter().any(|&g| g >= STOP_DISRUPTED) {
        if steps == MAX_STEPS {
            return Err(Error::NonConvergence {
                steps,
                max_disrupted: gam.iter().cloned().fold(0.0, f64::max),
            });
        }
        for i in 0..n {
            let infect = (cfg.dtau * beta[i] * ups[i] * gam[i] / cfg.nu[i]).clamp(0.0, ups[i]);
            let recover = (cfg.dtau * cfg.rho * gam[i]).clamp(0.0, gam[i]);
            ups[i] -= infect;
            gam[i] += infect - recover;
            xi[i] += recover;
        }
        traj.unaffected.extend_from_slice(&ups);
        traj.disrupted.extend_from_slice(&gam);
        traj.recovered.extend_from_slice(&xi);
        steps += 1;
    }
    Ok(traj)
}

/// Outage vector: the normalized disrupted time plus `Normal(0, (chi / nu_i)^2)`
/// noise, clipped at zero.
pub fn simulate_outages<R: Rng + ?Sized>(
    cfg: &SirConfig,
    traj: &SirTrajectory,
    rng: &mut R,
) -> Vec<f64> {
    traj.disrupted_time(&cfg.nu)
        .into_iter()
        .zip(&cfg.nu)
        .map(|(base, &nu)| {
            let sd = cfg.chi / nu;
            let noise = if sd > 0.0 {
                Normal::new(0.0, sd).map_or(0.0, |d| d.sample(rng))
            } else {
                0.0
            };
            (base + noise).max(0.0)
        })
        .collect()
}

fn reflect(v: f64) -> f64 {
    if v < 0.0 {
        -v
    } else if v > 1.0 {
        2.0 - v
    } else {
        v
    }
}

/// The RNG for sample `sample_id`.
pub fn sample_rng(seed: u64, sample_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_id);
    rng
}

/// One observation: jittered coordinates, their weather, the SIR run and noisy
/// outages.
pub fn simulate_sample(cfg: &SirConfig, sample_id: u64) -> Result<Observation> {
    let mut rng = sample_rng(cfg.seed, sample_id);
    let coords: Vec<(f64, f64)> = cfg
        .coords
        .iter()
        .map(|&(q, r)| {
            let dq = rng.random_range(-1.0..=1.0) * cfg.jitter;
            let dr = rng.random_range(-1.0..=1.0) * cfg.jitter;
            (reflect(q + dq), reflect(r + dr))
        })
        .collect();
    let w = weather_field(&coords);
    let beta: Vec<f64> = w.chunks(N_FEATURES).map(disruption_rate).collect();
    let traj = simulate_sir(cfg, &beta)?;
    let u = simulate_outages(cfg, &traj, &mut rng);
    Ok(Observation { sample_id, w, u })
}

/// Samples `first_id..first_id + n_samples`, generated in parallel when enabled.
pub fn generate_range(cfg: &SirConfig, first_id: u64, n_samples: usize) -> Result<ObservationSet> {
    cfg.validate()?;
    let records = par::try_map_range(n_samples, |k| simulate_sample(cfg, first_id + k as u64))?;
    ObservationSet::from_records(cfg.n, N_FEATURES, records)
}

/// Samples `0..n_samples`.
pub fn generate_dataset(cfg: &SirConfig, n_samples: usize) -> Result<ObservationSet> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("need at least one sample".into()));
    }
    generate_range(cfg, 0, n_samples)
}
