use super::{LinearProgram, LpError, LpSolution, LpStatus, Relation, VarStatus, MAX_PIVOTS, TOL};
use crate::linalg::Lu;

const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;
const NONBASIC: usize = usize::MAX;

enum Outcome {
    Optimal,
    Unbounded { column: usize, dir: f64 },
}

/// Dense tableau over structural, slack and artificial columns.
///
/// Every row `i` reads `sum_j a_ij x_j + s_i (+/- art_i) = rhs_i`, with the slack
/// bounds encoding the relation: `Le -> [0, inf)`, `Ge -> (-inf, 0]`, `Eq -> [0, 0]`.
struct Tableau {
    m: usize,
    n: usize,
    ncols: usize,
    tab: Vec<f64>,
    orig: Vec<f64>,
    rhs: Vec<f64>,
    lo: Vec<f64>,
    up: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    row_of: Vec<usize>,
    cost: Vec<f64>,
    d: Vec<f64>,
    opt_tol: f64,
    pivots: usize,
}

/// Solves a linear program, ignoring the integrality mask.
///
/// Rows are first scaled by powers of two so their largest coefficient lies in
/// `[0.5, 1)`; the scaling is exact and undone on the duals.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    lp.validate()?;
    let scale: Vec<f64> = lp
        .rows
        .iter()
        .map(|r| {
            let big = r.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
            if big > 0.0 {
                2f64.powi(big.log2().floor() as i32 + 1)
            } else {
                1.0
            }
        })
        .collect();
    if scale.iter().all(|&s| s == 1.0) {
        return solve_scaled(lp);
    }
    let mut scaled = lp.clone();
    for (row, &s) in scaled.rows.iter_mut().zip(&scale) {
        row.coeffs.iter_mut().for_each(|c| *c /= s);
        row.rhs /= s;
    }
    let mut sol = solve_scaled(&scaled)?;
    for (y, &s) in sol.row_duals.iter_mut().zip(&scale) {
        *y /= s;
    }
    Ok(sol)
}

fn solve_scaled(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.num_vars();
    let m = lp.num_rows();
    let sign = lp.sign();

    // Structural starting point: a finite bound when there is one, else zero.
    let start: Vec<f64> = lp
        .bounds
        .iter()
        .map(|&(l, u)| {
            if l.is_finite() {
                l
            } else if u.is_finite() {
                u
            } else {
                0.0
            }
        })
        .collect();

    // Decide per row whether the slack can start basic or an artificial is needed.
    let mut slack_bounds = Vec::with_capacity(m);
    let mut slack_start = Vec::with_capacity(m);
    let mut artificial: Vec<Option<f64>> = Vec::with_capacity(m);
    for row in &lp.rows {
        let (sl, su) = match row.relation {
            Relation::Le => (0.0, f64::INFINITY),
            Relation::Ge => (f64::NEG_INFINITY, 0.0),
            Relation::Eq => (0.0, 0.0),
        };
        let r = row.rhs - super::dot(&row.coeffs, &start);
        slack_bounds.push((sl, su));
        if r >= sl && r <= su {
            slack_start.push(r);
            artificial.push(None);
        } else {
            let s = r.clamp(sl, su);
            slack_start.push(s);
            let resid = r - s;
            artificial.push(Some(resid.signum()));
        }
    }
    let nart = artificial.iter().filter(|a| a.is_some()).count();
    let ncols = n + m + nart;

    let mut orig = vec![0.0; m * ncols];
    let mut lo = Vec::with_capacity(ncols);
    let mut up = Vec::with_capacity(ncols);
    let mut x = Vec::with_capacity(ncols);
    for (j, &(l, u)) in lp.bounds.iter().enumerate() {
        lo.push(l);
        up.push(u);
        x.push(start[j]);
    }
    for i in 0..m {
        lo.push(slack_bounds[i].0);
        up.push(slack_bounds[i].1);
        x.push(slack_start[i]);
    }
    let mut basis = vec![NONBASIC; m];
    let mut art_col = n + m;
    for (i, row) in lp.rows.iter().enumerate() {
        orig[i * ncols..i * ncols + n].copy_from_slice(&row.coeffs);
        orig[i * ncols + n + i] = 1.0;
        match artificial[i] {
            None => basis[i] = n + i,
            Some(sgn) => {
                orig[i * ncols + art_col] = sgn;
                let r = row.rhs - super::dot(&row.coeffs, &start) - slack_start[i];
                lo.push(0.0);
                up.push(f64::INFINITY);
                x.push(r.abs());
                basis[i] = art_col;
                art_col += 1;
            }
        }
    }

    // B is diagonal with entries +/-1, so B^-1 A is a row scaling of A.
    let mut tab = orig.clone();
    for i in 0..m {
        let p = orig[i * ncols + basis[i]];
        if p != 1.0 {
            for v in &mut tab[i * ncols..(i + 1) * ncols] {
                *v /= p;
            }
        }
    }
    let mut row_of = vec![NONBASIC; ncols];
    for (i, &b) in basis.iter().enumerate() {
        row_of[b] = i;
    }

    let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
    let mut t = Tableau {
        m,
        n,
        ncols,
        tab,
        orig,
        rhs,
        lo,
        up,
        x,
        basis,
        row_of,
        cost: vec![0.0; ncols],
        d: vec![0.0; ncols],
        opt_tol: TOL,
        pivots: 0,
    };

    if nart > 0 {
        for j in n + m..ncols {
            t.cost[j] = 1.0;
        }
        t.opt_tol = TOL;
        t.price_from_scratch();
        match t.iterate()? {
            Outcome::Optimal => {}
            Outcome::Unbounded { .. } => return Err(LpError::Stall { pivots: t.pivots }),
        }
        let infeas: f64 = (n + m..ncols).map(|j| t.x[j]).sum();
        let scale = 1.0 + t.rhs.iter().fold(0.0f64, |a, r| a.max(r.abs()));
        if infeas > TOL * scale {
            let mut sol = LpSolution::empty(LpStatus::Infeasible, n, m);
            sol.pivots = t.pivots;
            sol.nodes = 1;
            return Ok(sol);
        }
        t.retire_artificials();
    }

    let cost_scale = 1.0 + lp.objective.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    t.cost.iter_mut().for_each(|c| *c = 0.0);
    for j in 0..n {
        t.cost[j] = sign * lp.objective[j];
    }
    t.opt_tol = TOL * cost_scale;
    t.price_from_scratch();
    match t.iterate()? {
        Outcome::Optimal => Ok(t.finish(lp)),
        Outcome::Unbounded { column, dir } => {
            let mut ray = vec![0.0; n];
            if column < n {
                ray[column] = dir;
            }
            for i in 0..m {
                let b = t.basis[i];
                if b < n {
                    ray[b] = -dir * t.tab[i * ncols + column];
                }
            }
            let mut sol = LpSolution::empty(LpStatus::Unbounded, n, m);
            sol.objective = -sign * f64::INFINITY;
            sol.x = t.x[..n].to_vec();
            sol.ray = Some(ray);
            sol.pivots = t.pivots;
            sol.nodes = 1;
            Ok(sol)
        }
    }
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.tab[i * self.ncols + j]
    }

    fn price_from_scratch(&mut self) {
        self.d.copy_from_slice(&self.cost);
        for i in 0..self.m {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.ncols..(i + 1) * self.ncols];
                for (d, &a) in self.d.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
        for &b in &self.basis {
            self.d[b] = 0.0;
        }
    }

    /// Entering column and direction (+1 increase, -1 decrease).
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        let mut best_score = 0.0;
        for j in 0..self.ncols {
            if self.row_of[j] != NONBASIC || self.lo[j] == self.up[j] {
                continue;
            }
            let d = self.d[j];
            let cand = if d < -self.opt_tol && self.x[j] < self.up[j] {
                Some(1.0)
            } else if d > self.opt_tol && self.x[j] > self.lo[j] {
                Some(-1.0)
            } else {
                None
            };
            if let Some(dir) = cand {
                if bland {
                    return Some((j, dir));
                }
                if d.abs() > best_score {
                    best_score = d.abs();
                    best = Some((j, dir));
                }
            }
        }
        best
    }

    fn iterate(&mut self) -> Result<Outcome, LpError> {
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            let Some((j, dir)) = self.price(bland) else {
                return Ok(Outcome::Optimal);
            };

            // Ratio test. `None` means the entering variable hits its own bound.
            let mut step = self.up[j] - self.lo[j];
            let mut leave: Option<usize> = None;
            let mut leave_alpha = 0.0;
            for i in 0..self.m {
                let alpha = dir * self.at(i, j);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let limit = if alpha > 0.0 {
                    if self.lo[b] == f64::NEG_INFINITY {
                        continue;
                    }
                    (self.x[b] - self.lo[b]).max(0.0) / alpha
                } else {
                    if self.up[b] == f64::INFINITY {
                        continue;
                    }
                    (self.up[b] - self.x[b]).max(0.0) / -alpha
                };
                let tie = 1e-12 * (1.0 + limit.abs());
                let better = if limit < step - tie {
                    true
                } else if limit <= step + tie {
                    match leave {
                        None => false,
                        Some(r) if bland => b < self.basis[r],
                        Some(_) => alpha.abs() > leave_alpha,
                    }
                } else {
                    false
                };
                if better {
                    step = limit;
                    leave = Some(i);
                    leave_alpha = alpha.abs();
                }
            }
            if step == f64::INFINITY {
                return Ok(Outcome::Unbounded { column: j, dir });
            }

            if step <= 1e-12 {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            let delta = dir * step;
            if delta != 0.0 {
                self.x[j] += delta;
                for i in 0..self.m {
                    let a = self.at(i, j);
                    if a != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= delta * a;
                    }
                }
            }
            match leave {
                None => {
                    self.x[j] = if dir > 0.0 { self.up[j] } else { self.lo[j] };
                }
                Some(r) => {
                    let b = self.basis[r];
                    self.x[b] = if dir * self.at(r, j) > 0.0 {
                        self.lo[b]
                    } else {
                        self.up[b]
                    };
                    self.pivot(r, j);
                }
            }

            self.pivots += 1;
            if self.pivots > MAX_PIVOTS {
                return Err(LpError::Stall {
                    pivots: self.pivots,
                });
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let nc = self.ncols;
        let p = self.tab[r * nc + j];
        let (before, rest) = self.tab.split_at_mut(r * nc);
        let (prow, after) = rest.split_at_mut(nc);
        for v in prow.iter_mut() {
            *v /= p;
        }
        prow[j] = 1.0;
        let eliminate = |row: &mut [f64]| {
            let f = row[j];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[j] = 0.0;
            }
        };
        before.chunks_exact_mut(nc).for_each(eliminate);
        after.chunks_exact_mut(nc).for_each(eliminate);
        let f = self.d[j];
        if f != 0.0 {
            for (d, &pv) in self.d.iter_mut().zip(prow.iter()) {
                *d -= f * pv;
            }
            self.d[j] = 0.0;
        }
        let old = self.basis[r];
        self.row_of[old] = NONBASIC;
        self.basis[r] = j;
        self.row_of[j] = r;
    }

    /// Fixes artificials at zero and pivots basic ones out where a replacement
    /// column exists; rows with none are redundant and keep a fixed artificial.
    fn retire_artificials(&mut self) {
        let first_art = self.n + self.m;
        for r in 0..self.m {
            let b = self.basis[r];
            if b < first_art {
                continue;
            }
            let mut best: Option<usize> = None;
            let mut best_abs = 1e-7;
            for k in 0..first_art {
                if self.row_of[k] != NONBASIC {
                    continue;
                }
                let a = self.at(r, k).abs();
                if a > best_abs {
                    best_abs = a;
                    best = Some(k);
                }
            }
            if let Some(k) = best {
                self.x[b] = 0.0;
                self.pivot(r, k);
            }
        }
        for j in first_art..self.ncols {
            self.lo[j] = 0.0;
            self.up[j] = 0.0;
            if self.row_of[j] == NONBASIC {
                self.x[j] = 0.0;
            }
        }
    }

    fn finish(mut self, lp: &LinearProgram) -> LpSolution {
        let (m, n, nc) = (self.m, self.n, self.ncols);
        let sign = lp.sign();

        // Refactorize the final basis for accurate primal values and duals.
        let mut bmat = vec![0.0; m * m];
        for i in 0..m {
            for (k, &b) in self.basis.iter().enumerate() {
                bmat[i * m + k] = self.orig[i * nc + b];
            }
        }
        let y = match Lu::factor(m, bmat, 1e-12) {
            Some(lu) => {
                let mut rhs_eff = self.rhs.clone();
                for j in 0..nc {
                    if self.row_of[j] == NONBASIC && self.x[j] != 0.0 {
                        for (i, r) in rhs_eff.iter_mut().enumerate() {
                            *r -= self.orig[i * nc + j] * self.x[j];
                        }
                    }
                }
                let xb = lu.solve(&rhs_eff);
                for (k, &b) in self.basis.iter().enumerate() {
                    self.x[b] = xb[k];
                }
                let cb: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
                lu.solve_transpose(&cb)
            }
            None => {
                log::warn!("final basis is numerically singular; using tableau duals");
                (0..m).map(|i| -self.d[n + i]).collect()
            }
        };

        let reduced: Vec<f64> = (0..n)
            .map(|j| {
                let col: f64 = (0..m).map(|i| self.orig[i * nc + j] * y[i]).sum();
                sign * (self.cost[j] - col)
            })
            .collect();
        let xs = self.x[..n].to_vec();
        let objective = super::dot(&lp.objective, &xs);
        let basis = (0..n + m)
            .map(|j| {
                if self.row_of[j] != NONBASIC {
                    VarStatus::Basic
                } else if self.lo[j] == f64::NEG_INFINITY && self.up[j] == f64::INFINITY {
                    VarStatus::Free
                } else if self.x[j] == self.lo[j] {
                    VarStatus::AtLower
                } else {
                    VarStatus::AtUpper
                }
            })
            .collect();
        LpSolution {
            status: LpStatus::Optimal,
            x: xs,
            objective,
            row_duals: y.iter().map(|v| sign * v).collect(),
            reduced_costs: reduced,
            basis,
            ray: None,
            pivots: self.pivots,
            nodes: 1,
        }
    }
}
