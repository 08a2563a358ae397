//! The weak thresholding greedy algorithm `G_m^{s,t}`.
//!
//! One step on a residual `R`:
//! 1. pick the `≺`-first `(Δ, j)` with the largest `|c_Δ^{(j)}(R)|`;
//! 2. grow `Δ` to the largest ancestor `Δ̃` such that every cube between
//!    them carries some coefficient of size `≥ s·|c_Δ^{(j)}(R)|`;
//! 3. at `Δ̃`, pick the index with the smallest `|c|` that clears the
//!    threshold (rule A: `(t/s)·max_i |c_Δ̃^{(i)}|`, rule B: `t·|c_Δ^{(j)}|`);
//! 4. move that term from the residual to the approximant.
//!
//! The constant term is handled as the root's index `0`: it is chosen in
//! step 1 only when strictly larger than every Haar coefficient (and then
//! steps 2–3 are skipped), and it is a step-3 candidate whenever `Δ̃` is the
//! root.

use std::collections::BTreeMap;

use crate::dyadic::{DyadicCube, HaarKey};
use crate::error::{Error, Result};
use crate::haar::{haar_count, HaarExpansion};
use crate::scalar::Scalar;

/// Step-3 selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SelectionRule {
    /// Threshold `(t/s)·max_i |c_{Δ̃}^{(i)}|`.
    A,
    /// Threshold `t·|c_{Δ}^{(j)}|`.
    B,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyParams<T> {
    pub s: T,
    pub t: T,
    pub rule: SelectionRule,
    /// `None` means `|Σ(f)| + 1`.
    pub max_steps: Option<usize>,
    pub include_constant: bool,
}

impl<T: Scalar> GreedyParams<T> {
    pub fn new(s: T, t: T) -> Result<Self> {
        let p = Self { s, t, rule: SelectionRule::A, max_steps: None, include_constant: true };
        p.validate()?;
        Ok(p)
    }

    pub fn with_rule(mut self, rule: SelectionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = Some(max_steps);
        self
    }

    pub fn with_constant(mut self, include_constant: bool) -> Self {
        self.include_constant = include_constant;
        self
    }

    /// `0 < t ≤ s ≤ 1`.
    pub fn validate(&self) -> Result<()> {
        if !(self.t > T::zero() && self.t <= self.s && self.s <= T::one()) {
            return Err(Error::InvalidParams(format!("need 0 < t <= s <= 1, got s = {}, t = {}", self.s, self.t)));
        }
        if self.max_steps == Some(0) {
            return Err(Error::InvalidParams("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// `s = 1` or `s = t`: accepted, but outside the convergent regime.
    pub fn is_boundary(&self) -> bool {
        self.s == T::one() || self.s == self.t
    }
}

/// The data produced by steps 1–3 for one residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection<T> {
    pub delta: DyadicCube,
    pub j: usize,
    pub tilde_delta: DyadicCube,
    pub i: usize,
    /// Signed coefficient of the residual at `(Δ̃, i)` before removal.
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyStepRecord<T> {
    pub m: usize,
    pub delta_m: DyadicCube,
    pub j_m: usize,
    pub tilde_delta_m: DyadicCube,
    pub i_m: usize,
    pub removed_value: T,
    pub approximant_norm: T,
    pub residual_norm: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyTrace<T> {
    pub params: GreedyParams<T>,
    pub initial: HaarExpansion<T>,
    pub initial_norm: T,
    pub steps: Vec<GreedyStepRecord<T>>,
    /// The residual reached zero.
    pub terminated: bool,
    /// Run used `s = 1` or `s = t`.
    pub boundary_regime: bool,
    pub approximant: HaarExpansion<T>,
    pub residual: HaarExpansion<T>,
}

impl<T: Scalar> GreedyTrace<T> {
    pub fn max_approximant_norm(&self) -> T {
        self.steps.iter().fold(T::zero(), |m, s| m.max_of(s.approximant_norm.clone()))
    }

    /// `max_m ‖G_m‖ / ‖f‖`, or `None` for `f = 0`.
    pub fn max_ratio(&self) -> Option<T> {
        if self.initial_norm.is_zero() {
            None
        } else {
            Some(self.max_approximant_norm() / self.initial_norm.clone())
        }
    }
}

/// Step 1: the `≺`-first pair with maximal `|c|`.
pub fn select_max<T: Scalar>(residual: &HaarExpansion<T>, include_constant: bool) -> Result<HaarKey> {
    residual.max_coefficient(include_constant).map(|(k, _)| k)
}

/// Step 2: walk ancestors of `delta` while each carries a coefficient of
/// size at least `s·|c_Δ^{(j)}|`.
pub fn grow_cube<T: Scalar>(residual: &HaarExpansion<T>, delta: &DyadicCube, j: usize, s: &T) -> DyadicCube {
    let threshold = s.clone() * residual.coefficient(delta, j).abs();
    let mut cur = delta.clone();
    while let Some(parent) = cur.parent() {
        if residual.cube_max_abs(&parent) >= threshold {
            cur = parent;
        } else {
            break;
        }
    }
    cur
}

/// Step 3: among qualifying indices at `Δ̃`, the one with the smallest `|c|`
/// (ties to the smaller index).
pub fn select_index<T: Scalar>(
    residual: &HaarExpansion<T>,
    tilde_delta: &DyadicCube,
    delta: &DyadicCube,
    j: usize,
    params: &GreedyParams<T>,
) -> Result<usize> {
    let mut candidates: Vec<(usize, T)> = (1..=haar_count(residual.dim()))
        .map(|i| (i, residual.coefficient(tilde_delta, i).abs()))
        .filter(|(_, v)| !v.is_zero())
        .collect();
    if tilde_delta.is_root() && params.include_constant && !residual.constant().is_zero() {
        candidates.insert(0, (0, residual.constant().abs()));
    }
    let threshold = match params.rule {
        SelectionRule::A => {
            let max = candidates.iter().fold(T::zero(), |m, (_, v)| m.max_of(v.clone()));
            params.t.clone() / params.s.clone() * max
        }
        SelectionRule::B => params.t.clone() * residual.coefficient(delta, j).abs(),
    };
    let mut best: Option<(usize, T)> = None;
    for (i, v) in candidates {
        if v >= threshold && best.as_ref().is_none_or(|(_, b)| v < *b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| {
        Error::NoAdmissibleIndex(format!("no coefficient at {tilde_delta} reaches threshold {threshold}"))
    })
}

/// Steps 1–3 on a residual.
pub fn select<T: Scalar>(residual: &HaarExpansion<T>, params: &GreedyParams<T>) -> Result<Selection<T>> {
    let key = select_max(residual, params.include_constant)?;
    if key.index == 0 {
        let root = key.cube;
        return Ok(Selection { delta: root.clone(), j: 0, tilde_delta: root, i: 0, value: residual.constant().clone() });
    }
    let tilde = grow_cube(residual, &key.cube, key.index, &params.s);
    let i = select_index(residual, &tilde, &key.cube, key.index, params)?;
    let value = residual.coefficient(&tilde, i);
    Ok(Selection { delta: key.cube, j: key.index, tilde_delta: tilde, i, value })
}

/// Mutable run state: `G_m` and `R_m = f − G_m`.
#[derive(Clone, Debug)]
pub struct GreedyState<T> {
    pub params: GreedyParams<T>,
    pub approximant: HaarExpansion<T>,
    pub residual: HaarExpansion<T>,
    pub m: usize,
}

impl<T: Scalar> GreedyState<T> {
    pub fn new(f: &HaarExpansion<T>, params: GreedyParams<T>) -> Result<Self> {
        params.validate()?;
        Ok(Self { params, approximant: HaarExpansion::zero(f.dim()), residual: f.clone(), m: 0 })
    }

    /// Whether step 1 has anything left to pick.
    pub fn is_exhausted(&self) -> bool {
        self.residual.spectrum_len() == 0 && (!self.params.include_constant || self.residual.constant().is_zero())
    }

    /// Step 4: move the selected term from the residual into the approximant.
    pub fn step(&mut self) -> Result<GreedyStepRecord<T>> {
        if self.is_exhausted() {
            return Err(Error::ZeroFunction);
        }
        let sel = select(&self.residual, &self.params)?;
        let key = HaarKey::new(sel.tilde_delta.clone(), sel.i);
        let removed = self.residual.take(&key)?;
        debug_assert_eq!(removed, sel.value);
        self.approximant.add_to(&key.cube, key.index, removed.clone())?;
        self.m += 1;
        Ok(GreedyStepRecord {
            m: self.m,
            delta_m: sel.delta,
            j_m: sel.j,
            tilde_delta_m: sel.tilde_delta,
            i_m: sel.i,
            removed_value: removed,
            approximant_norm: self.approximant.l1_norm(),
            residual_norm: self.residual.l1_norm(),
        })
    }
}

/// Runs until the residual is exhausted or `max_steps` is reached.
pub fn run<T: Scalar>(f: &HaarExpansion<T>, params: &GreedyParams<T>) -> Result<GreedyTrace<T>> {
    let mut state = GreedyState::new(f, params.clone())?;
    let limit = params.max_steps.unwrap_or(f.spectrum_len() + 1);
    let mut steps = Vec::new();
    while steps.len() < limit && !state.is_exhausted() {
        steps.push(state.step()?);
    }
    Ok(GreedyTrace {
        params: params.clone(),
        initial: f.clone(),
        initial_norm: f.l1_norm(),
        terminated: state.residual.is_zero(),
        boundary_regime: params.is_boundary(),
        steps,
        approximant: state.approximant,
        residual: state.residual,
    })
}

/// `C(t) = 5/t + 12`.
pub fn symmetric_lemma_constant<T: Scalar>(t: &T) -> T {
    T::from_i64(5).expect("small") / t.clone() + T::from_i64(12).expect("small")
}

/// `C(s,t) = min(s(1−s), s−t)/24`.
pub fn chain_lemma_constant<T: Scalar>(s: &T, t: &T) -> T {
    let a = s.clone() * (T::one() - s.clone());
    let b = s.clone() - t.clone();
    let m = if a < b { a } else { b };
    m / T::from_i64(24).expect("small")
}

/// `C(s,t,d) = C(t)·(1 + (2^d − 1)/C(s,t))`.
pub fn uniform_bound_constant<T: Scalar>(dim: usize, s: &T, t: &T) -> T {
    let haar = T::from_usize(haar_count(dim)).expect("small");
    symmetric_lemma_constant(t) * (T::one() + haar / chain_lemma_constant(s, t))
}

/// First-step selection tuple before and after replacing some coefficients.
///
/// Every replaced coefficient must stay strictly below `t·max|c|`, both
/// before and after; such coefficients can never clear the step-2 or step-3
/// thresholds, so the selection must be unchanged. Returns whether it is.
pub fn check_branch_greedy<T: Scalar>(
    f: &HaarExpansion<T>,
    params: &GreedyParams<T>,
    perturbation: &BTreeMap<HaarKey, T>,
) -> Result<bool> {
    params.validate()?;
    let (_, max) = f.max_coefficient(params.include_constant)?;
    let limit = params.t.clone() * max.abs();
    let mut g = f.clone();
    for (key, new_value) in perturbation {
        let old = f.coefficient_at(key);
        if old.abs() >= limit || new_value.abs() >= limit {
            return Err(Error::hypothesis(
                "sub-threshold perturbation",
                format!("coefficient at {} {} moves {} -> {} with limit {}", key.cube, key.index, old, new_value, limit),
            ));
        }
        g.set(&key.cube, key.index, new_value.clone())?;
    }
    Ok(select(f, params)? == select(&g, params)?)
}
