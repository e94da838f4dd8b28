//! Planning-problem data model: instances, uncertainty sets, decisions and the
//! tri-linear outage cost.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// A planning instance with `n` regions.
///
/// Serialized as JSON with keys `n`, `b`, `c`, `h`, `B`, `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceFile", into = "InstanceFile")]
pub struct Instance {
    n: usize,
    proactive_cost: Vec<f64>,
    reactive_cost: Vec<f64>,
    outage_cost: Vec<f64>,
    proactive_budget: f64,
    reactive_budget: f64,
}

#[derive(Serialize, Deserialize)]
#[allow(non_snake_case)]
struct InstanceFile {
    n: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    B: f64,
    C: f64,
}

impl TryFrom<InstanceFile> for Instance {
    type Error = Error;

    fn try_from(f: InstanceFile) -> Result<Self> {
        if f.b.len() != f.n || f.c.len() != f.n || f.h.len() != f.n {
            return Err(Error::InvalidInstance(format!(
                "vector lengths ({}, {}, {}) do not match n = {}",
                f.b.len(),
                f.c.len(),
                f.h.len(),
                f.n
            )));
        }
        Instance::new(f.b, f.c, f.h, f.B, f.C)
    }
}

impl From<Instance> for InstanceFile {
    fn from(i: Instance) -> Self {
        Self {
            n: i.n,
            b: i.proactive_cost,
            c: i.reactive_cost,
            h: i.outage_cost,
            B: i.proactive_budget,
            C: i.reactive_budget,
        }
    }
}

impl Instance {
    /// Builds an instance from per-region proactive costs `b`, reactive costs `c`,
    /// per-unit outage costs `h` and the two budgets.
    pub fn new(
        b: Vec<f64>,
        c: Vec<f64>,
        h: Vec<f64>,
        proactive_budget: f64,
        reactive_budget: f64,
    ) -> Result<Self> {
        let n = b.len();
        if n == 0 {
            return Err(Error::InvalidInstance(
                "region count must be positive".into(),
            ));
        }
        check_len("reactive costs", n, c.len())?;
        check_len("outage costs", n, h.len())?;
        for (name, v) in [("b", &b), ("c", &c), ("h", &h)] {
            if let Some(i) = v.iter().position(|&x| !(x.is_finite() && x > 0.0)) {
                return Err(Error::InvalidInstance(format!(
                    "{name}[{i}] = {} must be finite and strictly positive",
                    v[i]
                )));
            }
        }
        for (name, v) in [("B", proactive_budget), ("C", reactive_budget)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInstance(format!(
                    "budget {name} = {v} must be finite and nonnegative"
                )));
            }
        }
        Ok(Self {
            n,
            proactive_cost: b,
            reactive_cost: c,
            outage_cost: h,
            proactive_budget,
            reactive_budget,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Proactive action cost `b_i`.
    pub fn proactive_cost(&self) -> &[f64] {
        &self.proactive_cost
    }

    /// Reactive action cost `c_i`.
    pub fn reactive_cost(&self) -> &[f64] {
        &self.reactive_cost
    }

    /// Per-unit outage cost `h_i`.
    pub fn outage_cost(&self) -> &[f64] {
        &self.outage_cost
    }

    pub fn proactive_budget(&self) -> f64 {
        self.proactive_budget
    }

    pub fn reactive_budget(&self) -> f64 {
        self.reactive_budget
    }

    /// Copy with a different proactive budget.
    pub fn with_proactive_budget(&self, budget: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidInstance(format!("budget B = {budget}")));
        }
        out.proactive_budget = budget;
        Ok(out)
    }

    /// Copy with a different reactive budget.
    pub fn with_reactive_budget(&self, budget: f64) -> Result<Self> {
        let mut out = self.clone();
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(Error::InvalidInstance(format!("budget C = {budget}")));
        }
        out.reactive_budget = budget;
        Ok(out)
    }

    /// True when every reactive cost is exactly one and `C` is integral, the
    /// setting in which the recourse relaxation is exact.
    pub fn has_unit_reactive_costs(&self) -> bool {
        self.reactive_cost.iter().all(|&c| c == 1.0) && self.reactive_budget.fract() == 0.0
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validation failures come back as [`Error::InvalidInstance`] rather than a
    /// JSON error.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

fn is_binary(v: f64) -> bool {
    v == 0.0 || v == 1.0
}

/// `x` is binary and `sum b_i x_i <= B`.
pub fn feasible_proactive(x: &[f64], inst: &Instance) -> Result<bool> {
    check_len("proactive decision", inst.n, x.len())?;
    if !x.iter().all(|&v| is_binary(v)) {
        return Ok(false);
    }
    let spend: f64 = x.iter().zip(&inst.proactive_cost).map(|(x, b)| x * b).sum();
    Ok(spend <= inst.proactive_budget)
}

/// `sum c_i y_i <= C`.
pub fn feasible_reactive(y: &[f64], inst: &Instance) -> Result<bool> {
    check_len("reactive decision", inst.n, y.len())?;
    let spend: f64 = y.iter().zip(&inst.reactive_cost).map(|(y, c)| y * c).sum();
    Ok(spend <= inst.reactive_budget)
}

/// Total outage cost `sum_i h_i u_i (1 - x_i)(1 - y_i)`.
pub fn outage_cost(inst: &Instance, x: &[f64], u: &[f64], y: &[f64]) -> Result<f64> {
    check_len("proactive decision", inst.n, x.len())?;
    check_len("outage vector", inst.n, u.len())?;
    check_len("reactive decision", inst.n, y.len())?;
    Ok((0..inst.n)
        .map(|i| inst.outage_cost[i] * u[i] * (1.0 - x[i]) * (1.0 - y[i]))
        .sum())
}

/// A full decision triple.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
}

impl Decision {
    pub fn new(x: Vec<f64>, y: Vec<f64>, u: Vec<f64>) -> Result<Self> {
        let n = x.len();
        check_len("reactive decision", n, y.len())?;
        check_len("outage vector", n, u.len())?;
        if !x.iter().all(|&v| is_binary(v)) {
            return Err(Error::InvalidInput("proactive decision must be 0/1".into()));
        }
        if !y.iter().all(|&v| (0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidInput(
                "reactive decision must lie in [0,1]".into(),
            ));
        }
        if !u.iter().all(|&v| v >= 0.0) {
            return Err(Error::InvalidInput("outages must be nonnegative".into()));
        }
        Ok(Self { x, y, u })
    }

    pub fn cost(&self, inst: &Instance) -> Result<f64> {
        outage_cost(inst, &self.x, &self.u, &self.y)
    }
}

/// Which rows of the uncertainty set nature must respect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaVariant {
    /// Per-region intervals only.
    LocalOnly,
    /// System-wide interval only; each region may absorb the whole global budget.
    GlobalOnly,
    /// Both, i.e. the full polyhedron.
    Full,
}

impl OmegaVariant {
    pub const ALL: [OmegaVariant; 3] = [Self::LocalOnly, Self::GlobalOnly, Self::Full];

    pub fn label(self) -> &'static str {
        match self {
            Self::LocalOnly => "local_only",
            Self::GlobalOnly => "global_only",
            Self::Full => "full",
        }
    }
}

/// The polyhedron of plausible outage vectors: per-region boxes plus one bound
/// on total outages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "UncertaintySetFile", into = "UncertaintySetFile")]
pub struct UncertaintySet {
    alpha: f64,
    local_lower: Vec<f64>,
    local_upper: Vec<f64>,
    global_lower: f64,
    global_upper: f64,
}

#[derive(Serialize, Deserialize)]
struct UncertaintySetFile {
    alpha: f64,
    local_lower: Vec<f64>,
    local_upper: Vec<f64>,
    global_lower: f64,
    global_upper: f64,
}

impl TryFrom<UncertaintySetFile> for UncertaintySet {
    type Error = Error;

    fn try_from(f: UncertaintySetFile) -> Result<Self> {
        UncertaintySet::new(
            f.alpha,
            f.local_lower,
            f.local_upper,
            f.global_lower,
            f.global_upper,
        )
    }
}

impl From<UncertaintySet> for UncertaintySetFile {
    fn from(s: UncertaintySet) -> Self {
        Self {
            alpha: s.alpha,
            local_lower: s.local_lower,
            local_upper: s.local_upper,
            global_lower: s.global_lower,
            global_upper: s.global_upper,
        }
    }
}

impl UncertaintySet {
    pub fn new(
        alpha: f64,
        local_lower: Vec<f64>,
        local_upper: Vec<f64>,
        global_lower: f64,
        global_upper: f64,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidUncertaintySet(m));
        if !(alpha > 0.0 && alpha < 1.0) {
            return bad(format!("alpha = {alpha} must lie in (0, 1)"));
        }
        if local_lower.is_empty() {
            return bad("no regions".into());
        }
        check_len("local upper bounds", local_lower.len(), local_upper.len())?;
        for (i, (&l, &t)) in local_lower.iter().zip(&local_upper).enumerate() {
            if l.is_nan() || t.is_nan() || l < 0.0 || l > t {
                return bad(format!("region {i}: bounds [{l}, {t}]"));
            }
        }
        if global_lower.is_nan() || global_upper.is_nan() || global_lower < 0.0 {
            return bad(format!("global bounds [{global_lower}, {global_upper}]"));
        }
        if global_lower > global_upper {
            return bad(format!("global bounds [{global_lower}, {global_upper}]"));
        }
        let set = Self {
            alpha,
            local_lower,
            local_upper,
            global_lower,
            global_upper,
        };
        let (lo, hi) = set.local_sum_range();
        if set.global_lower > hi || set.global_upper < lo {
            return Err(Error::EmptyUncertaintySet);
        }
        Ok(set)
    }

    pub fn n(&self) -> usize {
        self.local_lower.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn local_lower(&self) -> &[f64] {
        &self.local_lower
    }

    pub fn local_upper(&self) -> &[f64] {
        &self.local_upper
    }

    pub fn global_lower(&self) -> f64 {
        self.global_lower
    }

    pub fn global_upper(&self) -> f64 {
        self.global_upper
    }

    /// `[sum_i L_i, sum_i T_i]`, the range of totals the local boxes allow.
    pub fn local_sum_range(&self) -> (f64, f64) {
        (self.local_lower.iter().sum(), self.local_upper.iter().sum())
    }

    /// The set nature faces under `variant`.
    ///
    /// Local-only replaces the global row by the redundant `[sum L, sum T]`;
    /// global-only boxes every region in `[0, T_0]`.
    pub fn variant(&self, variant: OmegaVariant) -> UncertaintySet {
        match variant {
            OmegaVariant::Full => self.clone(),
            OmegaVariant::LocalOnly => {
                let (lo, hi) = self.local_sum_range();
                UncertaintySet {
                    global_lower: lo,
                    global_upper: hi,
                    ..self.clone()
                }
            }
            OmegaVariant::GlobalOnly => UncertaintySet {
                local_lower: vec![0.0; self.n()],
                local_upper: vec![self.global_upper; self.n()],
                ..self.clone()
            },
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Validation failures keep their own error variant.
    pub fn from_json(s: &str) -> Result<Self> {
        let file: UncertaintySetFile = serde_json::from_str(s)?;
        file.try_into()
    }
}

/// Whether `u` lies in the polyhedron (exact comparisons).
pub fn membership(u: &[f64], omega: &UncertaintySet) -> Result<bool> {
    check_len("outage vector", omega.n(), u.len())?;
    let local = u
        .iter()
        .zip(omega.local_lower.iter().zip(&omega.local_upper))
        .all(|(&v, (&l, &t))| l <= v && v <= t);
    let total: f64 = u.iter().sum();
    Ok(local && omega.global_lower <= total && total <= omega.global_upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two_region() -> Instance {
        Instance::new(
            vec![100.0, 1000.0],
            vec![1.0, 1.0],
            vec![1.0, 10.0],
            1000.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn proactive_budget_examples() {
        let inst = two_region();
        assert!(feasible_proactive(&[0.0, 0.0], &inst).unwrap());
        assert!(!feasible_proactive(&[1.0, 1.0], &inst).unwrap());
        assert!(feasible_proactive(&[0.0, 1.0], &inst).unwrap());
        assert!(!feasible_proactive(&[0.5, 0.0], &inst).unwrap());
        assert!(matches!(
            feasible_proactive(&[0.0], &inst),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn reactive_budget_examples() {
        let n = 4;
        let inst = Instance::new(vec![1.0; n], vec![1.0; n], vec![1.0; n], 0.0, 1.0).unwrap();
        assert!(feasible_reactive(&[0.0; 4], &inst).unwrap());
        assert!(!feasible_reactive(&[1.0, 1.0, 0.0, 0.0], &inst).unwrap());
        let full = inst.with_reactive_budget(n as f64).unwrap();
        assert!(feasible_reactive(&[1.0; 4], &full).unwrap());
    }

    #[test]
    fn outage_cost_examples() {
        let inst = Instance::new(vec![1.0], vec![1.0], vec![2.0], 0.0, 0.0).unwrap();
        assert_eq!(outage_cost(&inst, &[0.0], &[3.0], &[0.0]).unwrap(), 6.0);
        assert_eq!(outage_cost(&inst, &[1.0], &[3.0], &[0.0]).unwrap(), 0.0);

        let inst = Instance::new(vec![1.0; 2], vec![1.0; 2], vec![1.0, 10.0], 0.0, 1.0).unwrap();
        let v = outage_cost(&inst, &[0.0, 0.0], &[5.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn rejects_degenerate_instances() {
        assert!(Instance::new(vec![], vec![], vec![], 0.0, 0.0).is_err());
        assert!(Instance::new(vec![0.0], vec![1.0], vec![1.0], 0.0, 0.0).is_err());
        assert!(Instance::new(vec![1.0], vec![1.0], vec![1.0], -1.0, 0.0).is_err());
        assert!(Instance::new(vec![1.0], vec![1.0, 2.0], vec![1.0], 0.0, 0.0).is_err());
        assert!(Instance::from_json(r#"{"n":2,"b":[1],"c":[1],"h":[1],"B":0,"C":0}"#).is_err());
    }

    #[test]
    fn instance_json_uses_documented_keys() {
        let inst = two_region();
        let json = inst.to_json().unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        for key in ["n", "b", "c", "h", "B", "C"] {
            assert!(v.get(key).is_some(), "missing key {key}");
        }
        assert_eq!(Instance::from_json(&json).unwrap(), inst);
    }

    #[test]
    fn membership_examples() {
        let omega = UncertaintySet::new(0.1, vec![1.0, 2.0], vec![4.0, 5.0], 3.0, 8.0).unwrap();
        assert!(membership(&[1.0, 2.0], &omega).unwrap());
        assert!(!membership(&[5.0, 2.0], &omega).unwrap());
        // Sum of upper bounds (9) exceeds the global cap (8).
        assert!(!membership(&[4.0, 5.0], &omega).unwrap());
        assert!(membership(&[4.0, 4.0], &omega).unwrap());
    }

    #[test]
    fn empty_sets_are_rejected() {
        let r = UncertaintySet::new(0.1, vec![0.0, 0.0], vec![1.0, 1.0], 3.0, 4.0);
        assert!(matches!(r, Err(Error::EmptyUncertaintySet)));
        assert!(UncertaintySet::new(0.1, vec![2.0], vec![1.0], 0.0, 4.0).is_err());
        assert!(UncertaintySet::new(1.0, vec![0.0], vec![1.0], 0.0, 4.0).is_err());
    }

    #[test]
    fn variants_relax_the_full_set() {
        let omega = UncertaintySet::new(0.1, vec![1.0, 2.0], vec![4.0, 5.0], 3.0, 8.0).unwrap();
        let local = omega.variant(OmegaVariant::LocalOnly);
        assert!(membership(&[4.0, 5.0], &local).unwrap());
        let global = omega.variant(OmegaVariant::GlobalOnly);
        assert!(membership(&[8.0, 0.0], &global).unwrap());
        assert!(!membership(&[8.0, 0.5], &global).unwrap());
    }

    proptest! {
        #[test]
        fn outage_cost_monotone_under_protection(
            h in prop::collection::vec(0.1f64..100.0, 1..8),
            seed in any::<u64>(),
        ) {
            let n = h.len();
            let inst = Instance::new(vec![1.0; n], vec![1.0; n], h, 0.0, 0.0).unwrap();
            let bit = |k: usize, s: u64| ((s >> (k % 64)) & 1) as f64;
            let x: Vec<f64> = (0..n).map(|i| bit(i, seed)).collect();
            let y: Vec<f64> = (0..n).map(|i| bit(i + 17, seed)).collect();
            let u: Vec<f64> = (0..n).map(|i| (i as f64 + 1.0) * 1.5).collect();
            let base = outage_cost(&inst, &x, &u, &y).unwrap();
            prop_assert!(base >= 0.0);
            for i in 0..n {
                let mut x2 = x.clone();
                x2[i] = 1.0;
                prop_assert!(outage_cost(&inst, &x2, &u, &y).unwrap() <= base);
                let mut y2 = y.clone();
                y2[i] = 1.0;
                prop_assert!(outage_cost(&inst, &x, &u, &y2).unwrap() <= base);
            }
            // Outages in protected regions are irrelevant.
            let u2: Vec<f64> = (0..n)
                .map(|i| if x[i] == 0.0 && y[i] == 0.0 { u[i] } else { u[i] + 99.0 })
                .collect();
            prop_assert_eq!(outage_cost(&inst, &x, &u2, &y).unwrap(), base);
        }

        #[test]
        fn membership_is_permutation_invariant(
            lower in prop::collection::vec(0.0f64..5.0, 2..7),
            widths in prop::collection::vec(0.0f64..5.0, 7),
            frac in prop::collection::vec(0.0f64..1.0, 7),
            rot in 0usize..7,
        ) {
            let n = lower.len();
            let upper: Vec<f64> = (0..n).map(|i| lower[i] + widths[i]).collect();
            let lo: f64 = lower.iter().sum();
            let hi: f64 = upper.iter().sum();
            let omega = UncertaintySet::new(0.1, lower.clone(), upper.clone(), lo + 0.2 * (hi - lo), lo + 0.7 * (hi - lo)).unwrap();
            let u: Vec<f64> = (0..n).map(|i| lower[i] + frac[i] * widths[i]).collect();
            let k = rot % n;
            let perm = |v: &[f64]| { let mut w = v.to_vec(); w.rotate_left(k); w };
            let permuted = UncertaintySet::new(0.1, perm(&lower), perm(&upper), omega.global_lower(), omega.global_upper()).unwrap();
            prop_assert_eq!(membership(&u, &omega).unwrap(), membership(&perm(&u), &permuted).unwrap());
        }
    }
}
