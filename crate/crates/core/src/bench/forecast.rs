use serde::{Deserialize, Serialize};

use crate::conformal::{ObservationSet, Regressor};
use crate::error::{check_len, Error, Result};
use crate::model::UncertaintySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastMethod {
    /// Historical mean.
    EmpiricalAverage,
    /// Historical mean plus 1.96 sample standard deviations.
    EmpiricalConservative,
    /// Mean regression prediction over the training records.
    ConformalAverage,
    /// Upper end of the local conformal interval.
    ConformalConservative,
}

impl ForecastMethod {
    pub const ALL: [ForecastMethod; 4] = [
        Self::EmpiricalAverage,
        Self::EmpiricalConservative,
        Self::ConformalAverage,
        Self::ConformalConservative,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::EmpiricalAverage => "empirical_average",
            Self::EmpiricalConservative => "empirical_conservative",
            Self::ConformalAverage => "conformal_average",
            Self::ConformalConservative => "conformal_conservative",
        }
    }
}

/// A point forecast of outages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub method: ForecastMethod,
    pub u_hat: Vec<f64>,
}

/// Per-region sample mean and standard deviation (denominator `m - 1`).
pub fn mean_and_sd(data: &ObservationSet) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = data.len();
    if m < 2 {
        return Err(Error::Data(format!(
            "a standard deviation needs at least 2 observations, got {m}"
        )));
    }
    let n = data.n();
    let mut mean = vec![0.0; n];
    for r in data.records() {
        for (a, u) in mean.iter_mut().zip(&r.u) {
            *a += u;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let mut var = vec![0.0; n];
    for r in data.records() {
        for i in 0..n {
            var[i] += (r.u[i] - mean[i]).powi(2);
        }
    }
    let sd = var.iter().map(|v| (v / (m - 1) as f64).sqrt()).collect();
    Ok((mean, sd))
}

/// Builds the forecast for `method`.
///
/// `data` is the history for the empirical methods and the training part for
/// [`ForecastMethod::ConformalAverage`]; the conformal methods need `model` and
/// `omega` respectively.
pub fn make_forecast(
    method: ForecastMethod,
    data: &ObservationSet,
    model: Option<&Regressor>,
    omega: Option<&UncertaintySet>,
) -> Result<Forecast> {
    let u_hat = match method {
        ForecastMethod::EmpiricalAverage => {
            if data.is_empty() {
                return Err(Error::Data("empty history".into()));
            }
            let n = data.n();
            let mut mean = vec![0.0; n];
            for r in data.records() {
                for (a, u) in mean.iter_mut().zip(&r.u) {
                    *a += u;
                }
            }
            mean.iter().map(|a| a / data.len() as f64).collect()
        }
        ForecastMethod::EmpiricalConservative => {
            let (mean, sd) = mean_and_sd(data)?;
            mean.iter().zip(&sd).map(|(m, s)| m + 1.96 * s).collect()
        }
        ForecastMethod::ConformalAverage => {
            let model = model.ok_or_else(|| {
                Error::InvalidInput("conformal average forecast needs a fitted model".into())
            })?;
            if data.is_empty() {
                return Err(Error::Data("empty training set".into()));
            }
            check_len("training regions", model.n(), data.n())?;
            let mut mean = vec![0.0; model.n()];
            for r in data.records() {
                for (a, f) in mean.iter_mut().zip(model.predict(&r.w)?) {
                    *a += f;
                }
            }
            mean.iter().map(|a| a / data.len() as f64).collect()
        }
        ForecastMethod::ConformalConservative => omega
            .ok_or_else(|| {
                Error::InvalidInput(
                    "conformal conservative forecast needs an uncertainty set".into(),
                )
            })?
            .local_upper()
            .to_vec(),
    };
    if u_hat.iter().any(|v: &f64| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Data(format!(
            "{} forecast is not finite and nonnegative",
            method.label()
        )));
    }
    Ok(Forecast { method, u_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conformal::Observation;

    fn one_region(us: &[f64]) -> ObservationSet {
        ObservationSet::from_records(
            1,
            1,
            us.iter()
                .enumerate()
                .map(|(k, &u)| Observation {
                    sample_id: k as u64,
                    w: vec![k as f64],
                    u: vec![u],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn empirical_examples() {
        let data = one_region(&[4.0, 4.0, 4.0]);
        for m in [
            ForecastMethod::EmpiricalAverage,
            ForecastMethod::EmpiricalConservative,
        ] {
            assert_eq!(
                make_forecast(m, &data, None, None).unwrap().u_hat,
                vec![4.0]
            );
        }
        let data = one_region(&[0.0, 2.0]);
        let (mean, sd) = mean_and_sd(&data).unwrap();
        assert_eq!(mean, vec![1.0]);
        assert!((sd[0] - 2f64.sqrt()).abs() < 1e-15);
        let f = make_forecast(ForecastMethod::EmpiricalConservative, &data, None, None).unwrap();
        assert!((f.u_hat[0] - (1.0 + 1.96 * 2f64.sqrt())).abs() < 1e-12);
        let single = one_region(&[3.0]);
        assert!(make_forecast(ForecastMethod::EmpiricalConservative, &single, None, None).is_err());
    }

    #[test]
    fn conformal_examples() {
        let data = one_region(&[1.0, 2.0, 3.0]);
        let model = Regressor::from_coefficients(1, vec![vec![1.0, 2.0]]).unwrap();
        let f = make_forecast(ForecastMethod::ConformalAverage, &data, Some(&model), None).unwrap();
        // Predictions 1, 3, 5 at w = 0, 1, 2.
        assert!((f.u_hat[0] - 3.0).abs() < 1e-12);
        let omega = UncertaintySet::new(0.1, vec![1.0], vec![7.5], 0.0, 9.0).unwrap();
        let f = make_forecast(
            ForecastMethod::ConformalConservative,
            &data,
            None,
            Some(&omega),
        )
        .unwrap();
        assert_eq!(f.u_hat, omega.local_upper());
        assert!(make_forecast(ForecastMethod::ConformalAverage, &data, None, None).is_err());
    }
}
