//! Explicit test functions: the nested-corner constructions on `[0,1)^2`
//! used to show divergence at `s = 1` and `s = t`, and the Rademacher
//! product on `[0,1)` used for the Walsh-system unboundedness bound.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::dyadic::{DyadicCube, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::greedy::{run, GreedyParams, GreedyTrace};
use crate::haar::HaarExpansion;
use crate::scalar::Scalar;
use crate::Rational;

/// `Δ_n = [0, 2^{-n})^2`.
pub fn corner_cube(n: u32) -> DyadicCube {
    DyadicCube::new(n, vec![0, 0]).expect("corner cube in range")
}

/// The nested corner chain `Δ_0 ⊃ Δ_1 ⊃ … ⊃ Δ_depth`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedCornerChain {
    pub depth: u32,
    pub cubes: Vec<DyadicCube>,
}

impl NestedCornerChain {
    pub fn new(depth: u32) -> Result<Self> {
        check_depth(depth, depth)?;
        Ok(Self { depth, cubes: (0..=depth).map(corner_cube).collect() })
    }
}

/// `n ≥ 1` with cubes (and Haar supports) no finer than `MAX_LEVEL`.
fn check_depth(n: u32, finest: u32) -> Result<()> {
    if n < 1 || finest > MAX_LEVEL {
        return Err(Error::InvalidParams(format!("depth {n} out of range: cubes would reach level {finest} > {MAX_LEVEL}")));
    }
    Ok(())
}

fn check_open_unit<T: Scalar>(name: &str, v: &T) -> Result<()> {
    if !(*v > T::zero() && *v < T::one()) {
        return Err(Error::InvalidParams(format!("{name} = {v} must lie in (0,1)")));
    }
    Ok(())
}

/// `f_N = 1 + Σ_{n<N} Σ_j h_{Δ_n}^{(j)}`, equal to `2^{2N}` on `Δ_N` and `0` elsewhere.
pub fn build_f_n<T: Scalar>(n: u32) -> Result<HaarExpansion<T>> {
    check_depth(n, n)?;
    let mut f = HaarExpansion::constant_function(2, T::one());
    for level in 0..n {
        for j in 1..=3 {
            f.set(&corner_cube(level), j, T::one())?;
        }
    }
    Ok(f)
}

/// `f_N^ε = 1 + Σ_{n<k} Σ_j (h_{Δ_{2n+1}}^{(j)} + (1−ε) h_{Δ_{2n}}^{(j)})` with `N = 2k`.
pub fn build_f_n_eps<T: Scalar>(n: u32, eps: &T) -> Result<HaarExpansion<T>> {
    check_depth(n, n)?;
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParams(format!("N = {n} must be even")));
    }
    check_open_unit("epsilon", eps)?;
    let mut f = HaarExpansion::constant_function(2, T::one());
    let damped = T::one() - eps.clone();
    for level in 0..n {
        let v = if level % 2 == 1 { T::one() } else { damped.clone() };
        for j in 1..=3 {
            f.set(&corner_cube(level), j, v.clone())?;
        }
    }
    Ok(f)
}

/// `1 + Σ_{n<k} Σ_j h_{Δ_{2n+1}}^{(j)}`: the `3k+1`-term approximant of `f_N^ε` at `s = 1`.
pub fn f_n_eps_greedy_closed_form<T: Scalar>(n: u32) -> Result<HaarExpansion<T>> {
    check_depth(n, n)?;
    let mut f = HaarExpansion::constant_function(2, T::one());
    for level in (1..n).step_by(2) {
        for j in 1..=3 {
            f.set(&corner_cube(level), j, T::one())?;
        }
    }
    Ok(f)
}

/// `g_N^ε = t(1 + Σ_{n<N} (h^{(1)} + h^{(2)} + (1−ε)h^{(3)})_{Δ_n}) + h_{Δ_N}^{(1)}`.
pub fn build_g_n_eps<T: Scalar>(n: u32, eps: &T, t: &T) -> Result<HaarExpansion<T>> {
    check_depth(n, n.saturating_add(1))?;
    check_open_unit("epsilon", eps)?;
    check_open_unit("t", t)?;
    let mut g = HaarExpansion::constant_function(2, t.clone());
    let third = t.clone() * (T::one() - eps.clone());
    for level in 0..n {
        let c = corner_cube(level);
        g.set(&c, 1, t.clone())?;
        g.set(&c, 2, t.clone())?;
        g.set(&c, 3, third.clone())?;
    }
    g.set(&corner_cube(n), 1, T::one())?;
    Ok(g)
}

/// `t(1 + Σ_{n<N} (h^{(1)} + h^{(2)})_{Δ_n})`: the `2N+1`-term approximant of `g_N^ε` at `s = t`.
pub fn g_n_eps_greedy_closed_form<T: Scalar>(n: u32, t: &T) -> Result<HaarExpansion<T>> {
    check_depth(n, n.saturating_add(1))?;
    let mut g = HaarExpansion::constant_function(2, t.clone());
    for level in 0..n {
        g.set(&corner_cube(level), 1, t.clone())?;
        g.set(&corner_cube(level), 2, t.clone())?;
    }
    Ok(g)
}

/// `k / (8(1 + 3kε))`.
pub fn s_one_ratio_bound<T: Scalar>(k: u32, eps: &T) -> T {
    let k = T::from_u32(k).expect("small");
    k.clone() / (T::from_i64(8).expect("small") * (T::one() + T::from_i64(3).expect("small") * k * eps.clone()))
}

/// `Nt / (2(1 + t + Ntε))`.
pub fn s_eq_t_ratio_bound<T: Scalar>(n: u32, eps: &T, t: &T) -> T {
    let nt = T::from_u32(n).expect("small") * t.clone();
    nt.clone() / (T::from_i64(2).expect("small") * (T::one() + t.clone() + nt * eps.clone()))
}

/// Outcome of one boundary-case divergence run.
#[derive(Clone, Debug)]
pub struct DivergenceReport<T> {
    pub function_norm: T,
    pub approximant_norm: T,
    pub ratio: T,
    pub lower_bound: T,
    pub steps: usize,
    pub matches_closed_form: bool,
    pub trace: GreedyTrace<T>,
}

impl<T: Scalar> DivergenceReport<T> {
    pub fn bound_holds(&self) -> bool {
        self.ratio >= self.lower_bound
    }
}

fn divergence_run<T: Scalar>(
    f: HaarExpansion<T>,
    params: GreedyParams<T>,
    steps: usize,
    closed_form: HaarExpansion<T>,
    lower_bound: T,
) -> Result<DivergenceReport<T>> {
    let trace = run(&f, &params.with_max_steps(steps))?;
    let function_norm = trace.initial_norm.clone();
    let approximant_norm = trace.approximant.l1_norm();
    Ok(DivergenceReport {
        ratio: approximant_norm.clone() / function_norm.clone(),
        function_norm,
        approximant_norm,
        lower_bound,
        steps: trace.steps.len(),
        matches_closed_form: trace.approximant == closed_form,
        trace,
    })
}

/// Runs `G^{1,t}_{3k+1}` on `f_{2k}^ε`.
pub fn diverge_s_one<T: Scalar>(k: u32, eps: &T, t: &T) -> Result<DivergenceReport<T>> {
    if k == 0 {
        return Err(Error::InvalidParams("k must be positive".into()));
    }
    let n = 2 * k;
    let f = build_f_n_eps(n, eps)?;
    let params = GreedyParams::new(T::one(), t.clone())?;
    divergence_run(f, params, 3 * k as usize + 1, f_n_eps_greedy_closed_form(n)?, s_one_ratio_bound(k, eps))
}

/// Runs `G^{t,t}_{2N+1}` on `g_N^ε`.
pub fn diverge_s_eq_t<T: Scalar>(n: u32, eps: &T, t: &T) -> Result<DivergenceReport<T>> {
    let g = build_g_n_eps(n, eps, t)?;
    let params = GreedyParams::new(t.clone(), t.clone())?;
    divergence_run(g, params, 2 * n as usize + 1, g_n_eps_greedy_closed_form(n, t)?, s_eq_t_ratio_bound(n, eps, t))
}

/// Rademacher `r_n` on `[0,1)` as a one-dimensional Haar expansion:
/// `r_n = 2^{-(n-1)} Σ_{|I| = 2^{-(n-1)}} h_I`.
pub fn rademacher<T: Scalar>(n: u32) -> Result<HaarExpansion<T>> {
    if !(1..=24).contains(&n) {
        return Err(Error::InvalidParams(format!("rademacher index {n} out of range 1..=24")));
    }
    let level = n - 1;
    let weight = T::pow2(-(level as i64));
    let mut r = HaarExpansion::zero(1);
    for k in 0..1u128 << level {
        r.set(&DyadicCube::new(level, vec![k])?, 1, weight.clone())?;
    }
    Ok(r)
}

/// `1 + u Σ_{n=1}^N r_n`.
pub fn rademacher_sum_plus_one<T: Scalar>(n: u32, u: &T) -> Result<HaarExpansion<T>> {
    let mut f = HaarExpansion::constant_function(1, T::one());
    for m in 1..=n {
        f = &f + &rademacher::<T>(m)?.scale(u);
    }
    Ok(f)
}

/// `∏_{n=1}^N (1 + u r_n)` as a one-dimensional Haar expansion.
///
/// On a dyadic interval `I` of level `ℓ < N` the product averages to
/// `m_I = ∏_{n≤ℓ}(1 ± u)` (later factors average to one), and the left and
/// right halves differ by the factor `(1+u)/(1−u)`, giving
/// `c_I = 2^{-ℓ}·u·m_I`.
pub fn build_rademacher_product<T: Scalar>(n: u32, u: &T) -> Result<HaarExpansion<T>> {
    if !(1..=24).contains(&n) {
        return Err(Error::InvalidParams(format!("N = {n} out of range 1..=24")));
    }
    check_open_unit("u", u)?;
    let mut f = HaarExpansion::constant_function(1, T::one());
    let plus = T::one() + u.clone();
    let minus = T::one() - u.clone();
    for level in 0..n {
        let scale = T::pow2(-(level as i64)) * u.clone();
        for k in 0..1u128 << level {
            // bit (level-1-b) of k set means interval k lies in the right half at depth b+1.
            let mean = (0..level).fold(T::one(), |m, b| {
                if (k >> (level - 1 - b)) & 1 == 0 {
                    m * plus.clone()
                } else {
                    m * minus.clone()
                }
            });
            f.set(&DyadicCube::new(level, vec![k])?, 1, scale.clone() * mean)?;
        }
    }
    Ok(f)
}

/// Walsh coefficients of `∏(1 + u r_n)`: `u^{|A|}` for every `A ⊆ {1..N}`,
/// keyed by bitmask (bit `n−1` for `r_n`).
pub fn walsh_coefficients_of_product<T: Scalar>(n: u32, u: &T) -> BTreeMap<u64, T> {
    (0..1u64 << n)
        .map(|mask| (mask, (0..mask.count_ones()).fold(T::one(), |p, _| p * u.clone())))
        .collect()
}

/// Value of `w_A = ∏_{n∈A} r_n` on cell `k` of level `level ≥ max(A)`.
pub fn walsh_value(mask: u64, level: u32, k: u128) -> i32 {
    let mut sign = 1;
    for n in 1..=level.min(64) {
        if mask >> (n - 1) & 1 == 1 && (k >> (level - n)) & 1 == 1 {
            sign = -sign;
        }
    }
    sign
}

/// A weak thresholding greedy run on a finite Walsh expansion: each step
/// takes, among the coefficients with `|c| ≥ t·max|c|` over the remainder,
/// the smallest one (ties to the smaller mask). Returns the selected terms.
pub fn walsh_weak_greedy<T: Scalar>(coeffs: &BTreeMap<u64, T>, steps: usize, t: &T) -> BTreeMap<u64, T> {
    let mut remaining: BTreeMap<u64, T> = coeffs.iter().filter(|(_, v)| !v.is_zero()).map(|(k, v)| (*k, v.clone())).collect();
    let mut chosen = BTreeMap::new();
    for _ in 0..steps {
        let Some(max) = remaining.values().map(|v| v.abs()).reduce(|a, b| a.max_of(b)) else {
            break;
        };
        let threshold = t.clone() * max;
        let pick = remaining
            .iter()
            .filter(|(_, v)| v.abs() >= threshold)
            .min_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("ordered").then(a.0.cmp(b.0)))
            .map(|(k, _)| *k)
            .expect("the maximum always qualifies");
        let v = remaining.remove(&pick).expect("present");
        chosen.insert(pick, v);
    }
    chosen
}

/// Materializes a Walsh sum over `{r_1..r_N}` as a one-dimensional Haar expansion.
pub fn walsh_sum_to_expansion<T: Scalar>(terms: &BTreeMap<u64, T>, n: u32) -> Result<HaarExpansion<T>> {
    if n > 20 || terms.keys().any(|m| *m >> n != 0) {
        return Err(Error::InvalidParams(format!("Walsh sum not representable at level {n}")));
    }
    let values = (0..1u128 << n)
        .map(|k| {
            terms.iter().fold(T::zero(), |acc, (mask, c)| {
                if walsh_value(*mask, n, k) > 0 {
                    acc + c.clone()
                } else {
                    acc - c.clone()
                }
            })
        })
        .collect();
    HaarExpansion::analysis(&crate::haar::Grid::new(1, n, values)?)
}

/// Exact `‖Σ_{n=1}^N r_n‖_{L1} = 2^{-N} Σ_j C(N,j)·|N − 2j|`.
pub fn khinchine_l1(n: u32) -> Rational {
    let mut binom = BigInt::one();
    let mut total = BigInt::zero();
    for j in 0..=n {
        total += &binom * BigInt::from((n as i64 - 2 * j as i64).abs());
        binom = binom * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    Rational::new(total, BigInt::one() << n)
}

/// Exact `‖1 + u Σ_{n=1}^N r_n‖_{L1} = 2^{-N} Σ_j C(N,j)·|1 + u(N − 2j)|`.
pub fn shifted_rademacher_sum_norm(n: u32, u: &Rational) -> Rational {
    let mut binom = BigInt::one();
    let mut total = Rational::zero();
    for j in 0..=n {
        let v = Rational::one() + u * Rational::from_integer(BigInt::from(n as i64 - 2 * j as i64));
        total += Rational::from_integer(binom.clone()) * num_traits::Signed::abs(&v);
        binom = binom * BigInt::from(n - j) / BigInt::from(j + 1);
    }
    total / Rational::from_integer(BigInt::one() << n)
}

/// Quantities reported for the Walsh unboundedness experiment.
#[derive(Clone, Debug)]
pub struct WalshReport {
    pub n: u32,
    pub u: Rational,
    pub t: Rational,
    /// `‖G_{N+1}(f_N)‖ = ‖1 + u Σ r_n‖`.
    pub greedy_norm: Rational,
    /// `u·‖Σ r_n‖ − 1`.
    pub lower_bound: Rational,
    pub khinchine: Rational,
    /// `‖Σ r_n‖/√N`.
    pub khinchine_over_sqrt_n: f64,
    /// Whether the greedy selection equals `1 + u Σ r_n` term by term.
    pub selection_is_first_order: bool,
}

/// Walsh experiment for `f_N = ∏(1 + u r_n)`, `0 < u < t < 1`.
pub fn walsh_experiment(n: u32, u: &Rational, t: &Rational) -> Result<WalshReport> {
    if !(Rational::zero() < *u && u < t && *t < Rational::one()) {
        return Err(Error::InvalidParams(format!("need 0 < u < t < 1, got u = {u}, t = {t}")));
    }
    if !(1..=40).contains(&n) {
        return Err(Error::InvalidParams(format!("N = {n} out of range 1..=40")));
    }
    let selection_is_first_order = if n <= 20 {
        let chosen = walsh_weak_greedy(&walsh_coefficients_of_product(n, u), n as usize + 1, t);
        chosen.len() == n as usize + 1
            && chosen.iter().all(|(m, v)| (*m == 0 && v.is_one()) || (m.count_ones() == 1 && v == u))
    } else {
        // Same argument, without enumerating 2^N coefficients: u^2 < t·u.
        u * u < t * u
    };
    let khinchine = khinchine_l1(n);
    Ok(WalshReport {
        n,
        u: u.clone(),
        t: t.clone(),
        greedy_norm: shifted_rademacher_sum_norm(n, u),
        lower_bound: u * &khinchine - Rational::one(),
        khinchine_over_sqrt_n: khinchine.approx_f64() / (n as f64).sqrt(),
        khinchine,
        selection_is_first_order,
    })
}
