use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::lp::{solve_lp, solve_milp, LinearProgram, Relation, Sense};

/// Optimal reactive response to fixed exposures `zeta_i = h_i u_i (1 - x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecourseSolution {
    pub y: Vec<f64>,
    /// `sum_i zeta_i (1 - y_i)`.
    pub value: f64,
    /// Dual of the budget row, `<= 0`.
    pub lambda: f64,
    /// Duals of the rows `y_i <= 1`, `<= 0`.
    pub mu: Vec<f64>,
}

impl RecourseSolution {
    /// `C lambda + sum_i mu_i + sum_i zeta_i`.
    pub fn dual_value(&self, zeta: &[f64], budget: f64) -> f64 {
        budget * self.lambda + self.mu.iter().sum::<f64>() + zeta.iter().sum::<f64>()
    }
}

fn check_inputs(zeta: &[f64], c: &[f64], budget: f64) -> Result<()> {
    check_len("reactive costs", zeta.len(), c.len())?;
    if zeta.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::InvalidInput(
            "exposures must be finite and nonnegative".into(),
        ));
    }
    if c.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::InvalidInput(
            "reactive costs must be positive".into(),
        ));
    }
    if !(budget.is_finite() && budget >= 0.0) {
        return Err(Error::InvalidInput(format!("reactive budget {budget}")));
    }
    Ok(())
}

/// `min sum_i zeta_i (1 - y_i)` over `sum_i c_i y_i <= C`, `0 <= y <= 1`, with the
/// upper bounds written as explicit rows so that they carry duals.
pub fn recourse_lp(zeta: &[f64], c: &[f64], budget: f64) -> Result<RecourseSolution> {
    check_inputs(zeta, c, budget)?;
    let n = zeta.len();
    let mut lp = LinearProgram::new(Sense::Minimize, zeta.iter().map(|z| -z).collect());
    lp.add_row(c.to_vec(), Relation::Le, budget);
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        lp.add_row(row, Relation::Le, 1.0);
    }
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::InvalidInput(format!(
            "recourse LP is {:?}",
            sol.status
        )));
    }
    Ok(RecourseSolution {
        value: zeta.iter().sum::<f64>() + sol.objective,
        lambda: sol.row_duals[0],
        mu: sol.row_duals[1..].to_vec(),
        y: sol.x,
    })
}

/// Exact binary recourse by branch and bound. Returns `(y, value)`.
pub fn recourse_binary(zeta: &[f64], c: &[f64], budget: f64) -> Result<(Vec<f64>, f64)> {
    check_inputs(zeta, c, budget)?;
    let n = zeta.len();
    let mut lp = LinearProgram::new(Sense::Maximize, zeta.to_vec());
    lp.add_row(c.to_vec(), Relation::Le, budget);
    for j in 0..n {
        lp.set_binary(j);
    }
    let sol = solve_milp(&lp)?;
    if !sol.is_optimal() {
        return Err(Error::InvalidInput(format!(
            "recourse program is {:?}",
            sol.status
        )));
    }
    let value = zeta
        .iter()
        .zip(&sol.x)
        .map(|(z, y)| z * (1.0 - y))
        .sum::<f64>();
    Ok((sol.x, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(zeta: &[f64], c: &[f64], budget: f64) -> f64 {
        let n = zeta.len();
        (0u32..1 << n)
            .filter(|m| {
                (0..n)
                    .filter(|i| m >> i & 1 == 1)
                    .map(|i| c[i])
                    .sum::<f64>()
                    <= budget
            })
            .map(|m| {
                (0..n)
                    .filter(|i| m >> i & 1 == 0)
                    .map(|i| zeta[i])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn examples() {
        let s = recourse_lp(&[0.0; 3], &[1.0; 3], 1.0).unwrap();
        assert_eq!(s.value, 0.0);

        let s = recourse_lp(&[5.0, 9.0, 2.0], &[1.0; 3], 1.0).unwrap();
        assert_eq!(s.y, vec![0.0, 1.0, 0.0]);
        assert!((s.value - 7.0).abs() < 1e-12);
        assert!(s.lambda <= 0.0 && s.mu.iter().all(|&m| m <= 0.0));

        let s = recourse_lp(&[5.0, 9.0, 2.0], &[1.0; 3], 3.0).unwrap();
        assert_eq!(s.y, vec![1.0; 3]);
        assert!(s.value.abs() < 1e-12);

        let (y, v) = recourse_binary(&[10.0, 1.0], &[2.0, 1.0], 2.0).unwrap();
        assert_eq!(y, vec![1.0, 0.0]);
        assert!((v - 1.0).abs() < 1e-12);

        let (_, v) = recourse_binary(&[3.0, 3.0], &[1.0; 2], 1.0).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn strong_duality_and_lemma() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let n = rng.random_range(1..=12);
            let zeta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1e4)).collect();
            let c = vec![1.0; n];
            let budget = rng.random_range(0..=n) as f64;
            let s = recourse_lp(&zeta, &c, budget).unwrap();
            assert!((s.value - s.dual_value(&zeta, budget)).abs() <= 1e-8 * (1.0 + s.value.abs()));
            assert!(
                s.y.iter().all(|&v| v.min(1.0 - v).abs() <= 1e-6),
                "{:?}",
                s.y
            );
            let (_, bv) = recourse_binary(&zeta, &c, budget).unwrap();
            assert!(
                (s.value - bv).abs() <= 1e-9 * (1.0 + bv),
                "{} vs {bv}",
                s.value
            );
            assert!((bv - brute(&zeta, &c, budget)).abs() <= 1e-9 * (1.0 + bv));
        }
    }

    #[test]
    fn binary_matches_brute_force_for_general_costs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let zeta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..100.0)).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
            let budget = rng.random_range(0.0..6.0);
            let (y, v) = recourse_binary(&zeta, &c, budget).unwrap();
            assert!(c.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() <= budget + 1e-9);
            assert!((v - brute(&zeta, &c, budget)).abs() <= 1e-9 * (1.0 + v));
            // The relaxation can only be cheaper.
            let s = recourse_lp(&zeta, &c, budget).unwrap();
            assert!(s.value <= v + 1e-9);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(recourse_lp(&[-1.0], &[1.0], 1.0).is_err());
        assert!(recourse_lp(&[1.0], &[0.0], 1.0).is_err());
        assert!(recourse_binary(&[1.0, 2.0], &[1.0], 1.0).is_err());
    }
}
