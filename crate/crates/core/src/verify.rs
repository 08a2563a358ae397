//! Seeded instance generators and exact checkers for the norm estimates,
//! the cube-set combinatorics, the two key estimates, the symmetrization
//! properties and the uniform bound on greedy approximants.
//!
//! Every checker returns a [`LemmaVerdict`] whose witness is enough to replay
//! the instance. Suites fan trials out with rayon; each trial owns a seed
//! derived from `(seed, trial)` and results are concatenated in trial order.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::dyadic::{mgcr, DyadicCube, GeneralizedChain};
use crate::error::{Error, Result};
use crate::greedy::{chain_lemma_constant, check_branch_greedy, run, symmetric_lemma_constant, uniform_bound_constant};
use crate::greedy::{GreedyParams, SelectionRule};
use crate::haar::{haar_count, Grid, HaarExpansion, Region};
use crate::io::{expansion_to_json, grid_to_json};
use crate::scalar::{format_rational, Scalar};
use crate::symmetry::{check_second_key_hypotheses, is_symmetric_at, mgcr_fathers, symmetrize_mgcr, symmetrize_pair};
use crate::{Expansion, HaarKey, Rational, Trace};

#[allow(non_camel_case_types)]
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LemmaId {
    L3_1,
    L3_2,
    L3_3a,
    L3_3b,
    L3_3c,
    L3_4,
    L3_5,
    /// `‖P_I f‖ ≥ ‖P_J f‖` for `I ⊆ J`.
    MONO,
    /// MGCR agrees with order-independent pairwise merging and is a partition.
    MGCR,
    L4_6,
    Eq4_1,
    KEY1,
    L5_1,
    L5_2,
    KEY2,
    /// Structural properties of the symmetrized pair.
    SYM,
    BOUND,
    /// Termination with zero residual in the expected number of steps.
    CONVERGE,
    BRANCH,
    ROUNDTRIP,
}

impl LemmaId {
    pub const NORM: [LemmaId; 8] = [
        LemmaId::L3_1,
        LemmaId::L3_2,
        LemmaId::L3_3a,
        LemmaId::L3_3b,
        LemmaId::L3_3c,
        LemmaId::L3_4,
        LemmaId::L3_5,
        LemmaId::MONO,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LemmaId::L3_1 => "L3_1",
            LemmaId::L3_2 => "L3_2",
            LemmaId::L3_3a => "L3_3a",
            LemmaId::L3_3b => "L3_3b",
            LemmaId::L3_3c => "L3_3c",
            LemmaId::L3_4 => "L3_4",
            LemmaId::L3_5 => "L3_5",
            LemmaId::MONO => "MONO",
            LemmaId::MGCR => "MGCR",
            LemmaId::L4_6 => "L4_6",
            LemmaId::Eq4_1 => "Eq4_1",
            LemmaId::KEY1 => "KEY1",
            LemmaId::L5_1 => "L5_1",
            LemmaId::L5_2 => "L5_2",
            LemmaId::KEY2 => "KEY2",
            LemmaId::SYM => "SYM",
            LemmaId::BOUND => "BOUND",
            LemmaId::CONVERGE => "CONVERGE",
            LemmaId::BRANCH => "BRANCH",
            LemmaId::ROUNDTRIP => "ROUNDTRIP",
        }
    }
}

impl fmt::Display for LemmaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one exact check. For purely structural checks `lhs` is `1`
/// when the property held and `0` otherwise, against `rhs = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaVerdict {
    pub lemma_id: LemmaId,
    pub holds: bool,
    pub lhs: Rational,
    pub rhs: Rational,
    pub witness: Value,
}

impl LemmaVerdict {
    fn at_least(lemma_id: LemmaId, lhs: Rational, rhs: Rational, witness: Value) -> Self {
        Self { lemma_id, holds: lhs >= rhs, lhs, rhs, witness }
    }

    fn greater(lemma_id: LemmaId, lhs: Rational, rhs: Rational, witness: Value) -> Self {
        Self { lemma_id, holds: lhs > rhs, lhs, rhs, witness }
    }

    fn at_most(lemma_id: LemmaId, lhs: Rational, rhs: Rational, witness: Value) -> Self {
        Self { lemma_id, holds: lhs <= rhs, lhs, rhs, witness }
    }

    fn less(lemma_id: LemmaId, lhs: Rational, rhs: Rational, witness: Value) -> Self {
        Self { lemma_id, holds: lhs < rhs, lhs, rhs, witness }
    }

    fn flag(lemma_id: LemmaId, ok: bool, witness: Value) -> Self {
        let lhs = if ok { Rational::one() } else { Rational::zero() };
        Self { lemma_id, holds: ok, lhs, rhs: Rational::one(), witness }
    }

    /// A checker that errored on a generated instance: always a failure.
    fn errored(lemma_id: LemmaId, err: &Error, witness: Value) -> Self {
        let mut witness = witness;
        witness["error"] = Value::String(err.to_string());
        Self::flag(lemma_id, false, witness)
    }
}

use num_traits::{One, Signed, Zero};

fn q(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

fn cube_strings(cubes: &[DyadicCube]) -> Value {
    Value::Array(cubes.iter().map(|c| Value::String(c.to_string())).collect())
}

fn set_json(set: &BTreeSet<DyadicCube>) -> Value {
    Value::Array(set.iter().map(|c| Value::String(c.to_string())).collect())
}

// ---------------------------------------------------------------- generators

/// Per-trial seed; distinct trials get well-separated streams.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut z = seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(trial_seed(seed, trial))
}

const DENOM: i64 = 16;

/// Nonzero `±n/16` with `|c| ≤ bound`; falls back to `±bound` when `bound < 1/16`.
pub fn random_coefficient<R: Rng>(rng: &mut R, bound: &Rational) -> Rational {
    let top = (bound * Rational::from_integer(DENOM.into())).floor().to_integer();
    let top: i64 = top.try_into().unwrap_or(i64::MAX).min(1 << 20);
    let mag = if top >= 1 { q(rng.gen_range(1..=top), DENOM) } else { bound.clone() };
    if rng.gen_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// `±bound·n/64` with `1 ≤ n ≤ 63`: nonzero and strictly below `bound`.
fn strictly_below<R: Rng>(rng: &mut R, bound: &Rational) -> Rational {
    let v = bound * q(rng.gen_range(1..=63), 64);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Magnitude in `[low, 2]` (or exactly `low` if `low ≥ 2`), random sign.
fn at_least<R: Rng>(rng: &mut R, low: &Rational) -> Rational {
    let two = q(2, 1);
    let v = if *low >= two { low.clone() } else { low.clone() + (two - low) * q(rng.gen_range(0..=32), 32) };
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

pub fn random_cube<R: Rng>(rng: &mut R, dim: usize, min_level: u32, max_level: u32) -> DyadicCube {
    let level = rng.gen_range(min_level..=max_level);
    let coords = (0..dim).map(|_| rng.gen_range(0..1u128 << level)).collect();
    DyadicCube::new(level, coords).expect("in range")
}

pub fn random_descendant<R: Rng>(rng: &mut R, cube: &DyadicCube, depth: u32) -> DyadicCube {
    let fan = 1usize << cube.dim();
    (0..depth).fold(cube.clone(), |c, _| c.child(rng.gen_range(0..fan)))
}

/// Descendant at a depth drawn from `depths`.
pub fn random_descendant_in<R: Rng>(rng: &mut R, cube: &DyadicCube, depths: std::ops::RangeInclusive<u32>) -> DyadicCube {
    let depth = rng.gen_range(depths);
    random_descendant(rng, cube, depth)
}

fn random_index<R: Rng>(rng: &mut R, dim: usize) -> usize {
    rng.gen_range(1..=haar_count(dim))
}

fn gen_expansion_with<R: Rng>(
    rng: &mut R,
    dim: usize,
    max_level: u32,
    max_coeffs: usize,
    coeff_bound: &Rational,
) -> Expansion {
    let constant = if rng.gen_bool(0.5) { random_coefficient(rng, coeff_bound) } else { Rational::zero() };
    let mut f = HaarExpansion::constant_function(dim, constant);
    let n = rng.gen_range(0..=max_coeffs);
    for _ in 0..n {
        let cube = random_cube(rng, dim, 0, max_level);
        let j = random_index(rng, dim);
        f.set(&cube, j, random_coefficient(rng, coeff_bound)).expect("valid index");
    }
    f
}

/// Deterministic pseudorandom expansion: at most `max_coeffs` Haar terms on
/// cubes of level `≤ max_level`, values `±n/16` bounded by `coeff_bound`, and
/// a constant term half of the time.
pub fn gen_expansion(seed: u64, dim: usize, max_level: u32, max_coeffs: usize, coeff_bound: &Rational) -> Expansion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_expansion_with(&mut rng, dim, max_level.min(crate::dyadic::MAX_LEVEL - 1), max_coeffs, coeff_bound)
}

/// Cube set built by mixing fresh cubes with children and deeper descendants
/// of cubes already drawn, so that chains, shared fathers and gaps all occur.
pub fn gen_cube_set<R: Rng>(rng: &mut R, dim: usize, min_level: u32, max_level: u32, size: usize) -> BTreeSet<DyadicCube> {
    let mut set = BTreeSet::new();
    let mut drawn: Vec<DyadicCube> = Vec::new();
    while set.len() < size {
        let c = match drawn.choose(rng) {
            Some(base) if rng.gen_bool(0.6) && base.level() < max_level => {
                let room = max_level - base.level();
                random_descendant_in(rng, base, 1..=room.min(2))
            }
            _ => random_cube(rng, dim, min_level, max_level),
        };
        if set.insert(c.clone()) {
            drawn.push(c);
        }
        if drawn.len() > 4 * size {
            break;
        }
    }
    set
}

/// Random generalized chain with maximal cube `top`.
pub fn gen_chain_below<R: Rng>(rng: &mut R, top: &DyadicCube, max_depth: u32) -> GeneralizedChain {
    let mut cubes = BTreeSet::from([top.clone()]);
    for _ in 0..rng.gen_range(0..=3) {
        let leaf = random_descendant_in(rng, top, 1..=max_depth);
        let mut cur = leaf;
        while cur != *top {
            let parent = cur.parent().expect("below top");
            cubes.insert(cur);
            cur = parent;
        }
    }
    GeneralizedChain::from_cubes(cubes).expect("paths to the top form a generalized chain")
}

// ------------------------------------------------------------- norm lemmas

/// `c = 1/2` for `d = 2`, `1/4` otherwise.
pub fn successor_lemma_constant(dim: usize) -> Rational {
    if dim == 2 {
        q(1, 2)
    } else {
        q(1, 4)
    }
}

fn projection_norm(f: &Expansion, cube: &DyadicCube) -> Rational {
    f.integral(cube).abs()
}

fn check_index(dim: usize, j: usize) -> Result<()> {
    if j == 0 || j > haar_count(dim) {
        return Err(Error::InvalidIndex { index: j, dim });
    }
    Ok(())
}

fn need(cubes: &[DyadicCube], n: usize, id: LemmaId) -> Result<()> {
    if cubes.len() != n {
        return Err(Error::InvalidParams(format!("{id} takes {n} cubes, got {}", cubes.len())));
    }
    Ok(())
}

fn nested(inner: &DyadicCube, outer: &DyadicCube, strict: bool, immediate: bool) -> Result<()> {
    let ok = if immediate {
        inner.parent().as_ref() == Some(outer)
    } else if strict {
        inner.is_strict_subset_of(outer)
    } else {
        inner.is_subset_of(outer)
    };
    if !ok {
        let how = if immediate { "an immediate successor of" } else if strict { "strictly inside" } else { "inside" };
        return Err(Error::NotNested(format!("{inner} is not {how} {outer}")));
    }
    Ok(())
}

/// Exact evaluation of one norm estimate.
///
/// Cube arguments by lemma: `L3_1 [I, J]` with `J ⊆ I`; `L3_2 [I]`;
/// `L3_3* [I, J]` with `J` an immediate successor of `I`; `L3_4 [I, J, K]`
/// consecutive; `L3_5 [I, J, K]` with `K ⊊ J ⊆ I`; `MONO [I, J]` with
/// `I ⊆ J`. Indices `(i, j)` are ignored where unused.
pub fn check_norm_lemma(
    id: LemmaId,
    f: &Expansion,
    cubes: &[DyadicCube],
    indices: (usize, usize),
) -> Result<LemmaVerdict> {
    for c in cubes {
        if c.dim() != f.dim() {
            return Err(Error::DimensionMismatch(f.dim(), c.dim()));
        }
    }
    let (i, j) = indices;
    let witness = json!({
        "f": expansion_to_json(f),
        "cubes": cube_strings(cubes),
        "indices": [i, j],
    });
    let coef = |c: &DyadicCube, k: usize| -> Result<Rational> {
        check_index(f.dim(), k)?;
        Ok(f.coefficient(c, k).abs())
    };
    let verdict = match id {
        LemmaId::L3_1 => {
            need(cubes, 2, id)?;
            nested(&cubes[1], &cubes[0], false, false)?;
            LemmaVerdict::at_least(id, f.norm_on(&cubes[0]), coef(&cubes[1], i)?, witness)
        }
        LemmaId::L3_2 => {
            need(cubes, 1, id)?;
            if f.constant().abs() > Rational::one() || f.spectrum().any(|(_, v)| v.abs() > Rational::one()) {
                return Err(Error::hypothesis("|c| <= 1", "some coefficient exceeds 1"));
            }
            LemmaVerdict::at_most(id, projection_norm(f, &cubes[0]), Rational::one(), witness)
        }
        LemmaId::L3_3a | LemmaId::L3_3b | LemmaId::L3_3c => {
            need(cubes, 2, id)?;
            let (big, small) = (&cubes[0], &cubes[1]);
            nested(small, big, true, true)?;
            let lhs = f.norm(&Region::difference(big.clone(), small.clone())?);
            let c = successor_lemma_constant(f.dim());
            let rhs = match id {
                LemmaId::L3_3a => (projection_norm(f, big) - projection_norm(f, small)).abs(),
                LemmaId::L3_3b => c * (coef(big, i)? - coef(big, j)?).abs(),
                _ => c * (projection_norm(f, big) - coef(big, j)?).abs(),
            };
            LemmaVerdict::at_least(id, lhs, rhs, witness)
        }
        LemmaId::L3_4 | LemmaId::L3_5 => {
            need(cubes, 3, id)?;
            let (outer, mid, inner) = (&cubes[0], &cubes[1], &cubes[2]);
            let divisor = if id == LemmaId::L3_4 {
                nested(mid, outer, true, true)?;
                nested(inner, mid, true, true)?;
                8
            } else {
                nested(mid, outer, false, false)?;
                nested(inner, mid, true, false)?;
                16
            };
            let lhs = f.norm(&Region::difference(outer.clone(), inner.clone())?);
            let rhs = (coef(outer, i)? - coef(mid, j)?).abs() / Rational::from_integer(divisor.into());
            LemmaVerdict::at_least(id, lhs, rhs, witness)
        }
        LemmaId::MONO => {
            need(cubes, 2, id)?;
            nested(&cubes[0], &cubes[1], false, false)?;
            let lhs = f.project_outside(&cubes[0]).l1_norm();
            let rhs = f.project_outside(&cubes[1]).l1_norm();
            LemmaVerdict::at_least(id, lhs, rhs, witness)
        }
        other => return Err(Error::InvalidParams(format!("{other} is not a norm estimate"))),
    };
    Ok(verdict)
}

/// Instance for one norm estimate: nested cubes around a random anchor and an
/// expansion whose terms cluster on the anchor's ancestors and descendants.
pub fn gen_norm_instance<R: Rng>(rng: &mut R, id: LemmaId, dim: usize) -> (Expansion, Vec<DyadicCube>, (usize, usize)) {
    let anchor = random_cube(rng, dim, 0, 2);
    let cubes = match id {
        LemmaId::L3_1 => vec![anchor.clone(), random_descendant_in(rng, &anchor, 0..=2)],
        LemmaId::L3_2 => vec![random_descendant_in(rng, &anchor, 0..=2)],
        LemmaId::L3_4 => {
            let mid = random_descendant(rng, &anchor, 1);
            let inner = random_descendant(rng, &mid, 1);
            vec![anchor.clone(), mid, inner]
        }
        LemmaId::L3_5 => {
            let mid = random_descendant_in(rng, &anchor, 0..=2);
            let inner = random_descendant_in(rng, &mid, 1..=2);
            vec![anchor.clone(), mid, inner]
        }
        LemmaId::MONO => {
            let inner = random_descendant_in(rng, &anchor, 0..=2);
            vec![inner, anchor.clone()]
        }
        _ => vec![anchor.clone(), random_descendant(rng, &anchor, 1)],
    };
    let bound = if id == LemmaId::L3_2 { Rational::one() } else { q(2, 1) };
    let constant = if rng.gen_bool(0.5) { random_coefficient(rng, &bound) } else { Rational::zero() };
    let mut f = HaarExpansion::constant_function(dim, constant);
    let deepest = cubes.iter().map(DyadicCube::level).max().unwrap_or(0);
    for _ in 0..rng.gen_range(1..=16) {
        let cube = if rng.gen_bool(0.75) {
            let level = rng.gen_range(0..=deepest + 2);
            if level <= anchor.level() {
                anchor.ancestor_at(level)
            } else {
                random_descendant(rng, &anchor, level - anchor.level())
            }
        } else {
            random_cube(rng, dim, 0, 5)
        };
        f.set(&cube, random_index(rng, dim), random_coefficient(rng, &bound)).expect("valid index");
    }
    let indices = (random_index(rng, dim), random_index(rng, dim));
    if rng.gen_bool(0.5) {
        // Make sure the compared coefficients are usually present.
        let (a, b) = match id {
            LemmaId::L3_4 | LemmaId::L3_5 => (cubes[0].clone(), cubes[1].clone()),
            _ => (cubes[0].clone(), cubes[0].clone()),
        };
        f.set(&a, indices.0, random_coefficient(rng, &bound)).expect("valid index");
        f.set(&b, indices.1, random_coefficient(rng, &bound)).expect("valid index");
    }
    (f, cubes, indices)
}

// ----------------------------------------------------------- combinatorics

/// Order-dependent reference construction: start from singletons in a
/// random order and keep merging the first pair whose union is a
/// generalized chain (checked against the definition) until none is left.
pub fn mgcr_by_pairwise_merging<R: Rng>(set: &BTreeSet<DyadicCube>, rng: &mut R) -> BTreeSet<BTreeSet<DyadicCube>> {
    let mut parts: Vec<BTreeSet<DyadicCube>> = set.iter().map(|c| BTreeSet::from([c.clone()])).collect();
    parts.shuffle(rng);
    'outer: loop {
        for a in 0..parts.len() {
            for b in a + 1..parts.len() {
                let union: BTreeSet<_> = parts[a].union(&parts[b]).cloned().collect();
                if GeneralizedChain::from_cubes(union.clone()).is_some() {
                    parts.swap_remove(b);
                    parts[a] = union;
                    continue 'outer;
                }
            }
        }
        break;
    }
    parts.into_iter().collect()
}

/// MGCR of `set` against pairwise merging in a random order, plus the
/// partition and non-mergeability properties, and `|Λ2| < |Λ0|`.
pub fn check_cube_set<R: Rng>(set: &BTreeSet<DyadicCube>, rng: &mut R) -> Result<Vec<LemmaVerdict>> {
    let analysis = mgcr(set)?;
    let witness = json!({ "set": set_json(set) });
    let chains: BTreeSet<BTreeSet<DyadicCube>> = analysis.mgcr.iter().map(|c| c.cubes.clone()).collect();
    let mut problems = Vec::new();
    if chains != mgcr_by_pairwise_merging(set, rng) {
        problems.push("differs from pairwise merging");
    }
    let covered: usize = analysis.mgcr.iter().map(GeneralizedChain::len).sum();
    let union: BTreeSet<_> = analysis.mgcr.iter().flat_map(|c| c.cubes.iter().cloned()).collect();
    if covered != set.len() || union != *set {
        problems.push("not a partition");
    }
    for (a, ra) in analysis.mgcr.iter().enumerate() {
        if GeneralizedChain::from_cubes(ra.cubes.clone()).as_ref() != Some(ra) {
            problems.push("member is not a generalized chain");
        }
        for rb in &analysis.mgcr[a + 1..] {
            let u: BTreeSet<_> = ra.cubes.union(&rb.cubes).cloned().collect();
            if GeneralizedChain::from_cubes(u).is_some() || ra.mergeable_with(rb) {
                problems.push("two members are mergeable");
            }
        }
    }
    let mut w = witness.clone();
    w["problems"] = json!(problems);
    Ok(vec![
        LemmaVerdict::flag(LemmaId::MGCR, problems.is_empty(), w),
        LemmaVerdict::less(
            LemmaId::Eq4_1,
            Rational::from_integer(analysis.lambda2.len().into()),
            Rational::from_integer(analysis.lambda0.len().into()),
            witness,
        ),
    ])
}

/// Union criterion in both directions, plus the father of a merged union.
pub fn check_chain_union(a: &GeneralizedChain, b: &GeneralizedChain) -> LemmaVerdict {
    let union: BTreeSet<_> = a.cubes.union(&b.cubes).cloned().collect();
    let merged = GeneralizedChain::from_cubes(union);
    let predicted = a.mergeable_with(b);
    let father_ok = merged.as_ref().is_none_or(|m| m.father == a.father || m.father == b.father);
    let witness = json!({
        "a": set_json(&a.cubes),
        "b": set_json(&b.cubes),
        "union_is_chain": merged.is_some(),
        "criterion": predicted,
    });
    LemmaVerdict::flag(LemmaId::L4_6, merged.is_some() == predicted && father_ok, witness)
}

/// Two generalized chains in a small dimension whose maximal cubes are
/// related often enough to hit every branch of the union criterion.
pub fn gen_chain_pair<R: Rng>(rng: &mut R, dim: usize) -> (GeneralizedChain, GeneralizedChain) {
    let top = random_cube(rng, dim, 0, 3);
    let a = gen_chain_below(rng, &top, 2);
    let members: Vec<_> = a.cubes.iter().cloned().collect();
    let top = match rng.gen_range(0..5) {
        0 => members.choose(rng).expect("nonempty").clone(),
        1 => a.father.clone().unwrap_or_else(|| DyadicCube::root(dim)),
        2 => members.choose(rng).expect("nonempty").child(rng.gen_range(0..1 << dim)),
        3 => match &a.father {
            Some(f) => random_descendant_in(rng, f, 1..=3),
            None => random_cube(rng, dim, 0, 3),
        },
        _ => random_cube(rng, dim, 0, 3),
    };
    let b = gen_chain_below(rng, &top, 2);
    if rng.gen_bool(0.5) {
        (a, b)
    } else {
        (b, a)
    }
}

// -------------------------------------------------------------- key lemmas

fn block_max(f: &Expansion, cube: &DyadicCube) -> Rational {
    f.cube_max_abs(cube)
}

/// Hypotheses of the first key estimate for `(p, q)` with `0 < t < s < 1`.
pub fn check_first_key_hypotheses(p: &Expansion, q: &Expansion, s: &Rational, t: &Rational) -> Result<()> {
    if !(t > &Rational::zero() && t < s && s < &Rational::one()) {
        return Err(Error::InvalidParams(format!("need 0 < t < s < 1, got s = {s}, t = {t}")));
    }
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    if p.contains_cube(&DyadicCube::root(p.dim())) || !p.constant().is_zero() {
        return Err(Error::hypothesis("root", "the root cube carries a term of p"));
    }
    if p.spectrum_len() == 0 {
        return Err(Error::hypothesis("root", "p has empty spectrum"));
    }
    if let Some((k, _)) = p.spectrum().find(|(k, _)| !q.coefficient_at(k).is_zero()) {
        return Err(Error::hypothesis("1", format!("({}, {}) is in both spectra", k.cube, k.index)));
    }
    if let Some(c) = p.cubes().find(|c| block_max(p, c) < *s) {
        return Err(Error::hypothesis("2", format!("no coefficient of p at {c} reaches s")));
    }
    let ratio = t.clone() / s.clone();
    if let Some(c) = p.cubes().find(|c| q.contains_cube(c) && block_max(q, c) >= ratio.clone() * block_max(p, c)) {
        return Err(Error::hypothesis("3", format!("q is too large at shared cube {c}")));
    }
    for chain in mgcr(&p.cube_spectrum())?.mgcr {
        let father = chain.father.expect("root excluded");
        let best = chain.cubes.iter().map(|c| block_max(p, c)).fold(Rational::zero(), Scalar::max_of);
        if block_max(q, &father) >= s.clone() * best {
            return Err(Error::hypothesis("4", format!("q is too large at father {father}")));
        }
    }
    Ok(())
}

/// `M`: the MGCR fathers of `Σ̂(p)` together with `Σ̂(p) ∩ Σ̂(q)`.
pub fn key_one_cube_set(p: &Expansion, q: &Expansion) -> Result<BTreeSet<DyadicCube>> {
    let mut m: BTreeSet<DyadicCube> = mgcr(&p.cube_spectrum())?.mgcr.into_iter().filter_map(|c| c.father).collect();
    m.extend(p.cubes().filter(|c| q.contains_cube(c)).cloned());
    Ok(m)
}

/// `‖p + q‖ > min(s(1−s), s−t)/24 · |M|`.
pub fn check_key_lemma_one(p: &Expansion, q: &Expansion, s: &Rational, t: &Rational) -> Result<LemmaVerdict> {
    check_first_key_hypotheses(p, q, s, t)?;
    let m = key_one_cube_set(p, q)?;
    let rhs = chain_lemma_constant(s, t) * Rational::from_integer(m.len().into());
    let witness = json!({
        "p": expansion_to_json(p),
        "q": expansion_to_json(q),
        "s": format_rational(s),
        "t": format_rational(t),
        "m": set_json(&m),
    });
    Ok(LemmaVerdict::greater(LemmaId::KEY1, (p + q).l1_norm(), rhs, witness))
}

fn random_subset_indices<R: Rng>(rng: &mut R, dim: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (1..=haar_count(dim)).collect();
    idx.shuffle(rng);
    let n = rng.gen_range(1..=idx.len());
    idx.truncate(n);
    idx
}

/// A pair `(p, q)` built to satisfy the first key estimate's hypotheses.
pub fn gen_key_one<R: Rng>(rng: &mut R, dim: usize, s: &Rational, t: &Rational) -> (Expansion, Expansion) {
    let size = rng.gen_range(1..=10);
    let set = gen_cube_set(rng, dim, 1, 4, size);
    let mut p = HaarExpansion::zero(dim);
    for c in &set {
        let used = random_subset_indices(rng, dim);
        p.set(c, used[0], at_least(rng, s)).expect("valid");
        for &j in &used[1..] {
            p.set(c, j, random_coefficient(rng, &q(2, 1))).expect("valid");
        }
    }
    let chains = mgcr(&set).expect("nonempty").mgcr;
    let fathers: BTreeSet<DyadicCube> = chains.iter().filter_map(|c| c.father.clone()).collect();
    let mut qx = HaarExpansion::constant_function(dim, random_coefficient(rng, &q(2, 1)));
    let free = |f: &Expansion, c: &DyadicCube| -> Vec<usize> {
        (1..=haar_count(dim)).filter(|&j| f.coefficient(c, j).is_zero()).collect()
    };
    // A father shared by several chains must respect the weakest of them.
    let mut father_bounds: std::collections::BTreeMap<DyadicCube, Rational> = Default::default();
    for chain in &chains {
        let father = chain.father.clone().expect("levels start at 1");
        let best = chain.cubes.iter().map(|c| block_max(&p, c)).fold(Rational::zero(), Scalar::max_of);
        let bound = s.clone() * best;
        let slot = father_bounds.entry(father).or_insert_with(|| bound.clone());
        if bound < *slot {
            *slot = bound;
        }
    }
    for (father, bound) in &father_bounds {
        if rng.gen_bool(0.7) {
            for j in free(&p, father) {
                if rng.gen_bool(0.5) {
                    qx.set(father, j, strictly_below(rng, bound)).expect("valid");
                }
            }
        }
    }
    let ratio = t.clone() / s.clone();
    for c in &set {
        if rng.gen_bool(0.35) {
            let bound = ratio.clone() * block_max(&p, c);
            for j in free(&p, c) {
                if rng.gen_bool(0.6) {
                    qx.set(c, j, strictly_below(rng, &bound)).expect("valid");
                }
            }
        }
    }
    let members: Vec<_> = set.iter().cloned().collect();
    for _ in 0..rng.gen_range(0..=8) {
        let c = if rng.gen_bool(0.5) {
            let base = members.choose(rng).expect("nonempty").clone();
            random_descendant_in(rng, &base, 1..=2)
        } else {
            random_cube(rng, dim, 0, 5)
        };
        if !set.contains(&c) && !fathers.contains(&c) {
            qx.set(&c, random_index(rng, dim), random_coefficient(rng, &q(2, 1))).expect("valid");
        }
    }
    (p, qx)
}

/// `‖f‖ ≤ (5/t + 12)·‖f + g‖` under the second key estimate's hypotheses.
pub fn check_key_lemma_two(f: &Expansion, g: &Expansion, t: &Rational) -> Result<LemmaVerdict> {
    check_second_key_hypotheses(f, g, t)?;
    let rhs = symmetric_lemma_constant(t) * (f + g).l1_norm();
    let witness = json!({
        "f": expansion_to_json(f),
        "g": expansion_to_json(g),
        "t": format_rational(t),
    });
    Ok(LemmaVerdict::at_most(LemmaId::KEY2, f.l1_norm(), rhs, witness))
}

/// A pair `(f, g)` built to satisfy the second key estimate's hypotheses.
pub fn gen_key_two<R: Rng>(rng: &mut R, dim: usize, t: &Rational) -> (Expansion, Expansion) {
    let size = rng.gen_range(1..=8);
    let set = gen_cube_set(rng, dim, 1, 4, size);
    let mut f = HaarExpansion::zero(dim);
    for c in &set {
        for j in random_subset_indices(rng, dim) {
            f.set(c, j, random_coefficient(rng, &q(2, 1))).expect("valid");
        }
    }
    let chains = mgcr(&set).expect("nonempty").mgcr;
    for chain in &chains {
        let members: Vec<_> = chain.cubes.iter().cloned().collect();
        let c = members.choose(rng).expect("nonempty");
        f.set(c, random_index(rng, dim), at_least(rng, t)).expect("valid");
    }
    let fathers: BTreeSet<DyadicCube> = chains.iter().filter_map(|c| c.father.clone()).collect();
    let constant = if rng.gen_bool(0.5) { random_coefficient(rng, &Rational::one()) } else { Rational::zero() };
    let mut g = HaarExpansion::constant_function(dim, constant);
    let members: Vec<_> = set.iter().cloned().collect();
    for _ in 0..rng.gen_range(0..=12) {
        let base = members.choose(rng).expect("nonempty").clone();
        let c = match rng.gen_range(0..3) {
            0 => random_descendant_in(rng, &base, 1..=2),
            1 => random_descendant(rng, &base.ancestor_at(1), 1),
            _ => random_cube(rng, dim, 1, 5),
        };
        if !set.contains(&c) && !fathers.contains(&c) {
            g.set(&c, random_index(rng, dim), random_coefficient(rng, &Rational::one())).expect("valid");
        }
    }
    (f, g)
}

/// Trichotomy and statements 1–6 for one application of the pair operator.
pub fn check_pair_operator(f: &Expansion, g: &Expansion, delta: &DyadicCube) -> Result<Vec<LemmaVerdict>> {
    let out = symmetrize_pair(f, g, delta)?;
    let i = out.successor;
    let src = delta.child(i - 1);
    let witness = |statement: u32| {
        json!({
            "f": expansion_to_json(f),
            "g": expansion_to_json(g),
            "delta": delta.to_string(),
            "successor": i,
            "statement": statement,
        })
    };
    let (fp, gp) = (&out.f, &out.g);
    let mut verdicts = vec![LemmaVerdict::flag(LemmaId::L5_1, out.trichotomy_holds, witness(0))];

    verdicts.push(LemmaVerdict::flag(LemmaId::L5_2, !fp.contains_cube(delta) && !gp.contains_cube(delta), witness(1)));

    let in_copied_region = |c: &DyadicCube| c.is_strict_subset_of(delta) && !c.is_subset_of(&src);
    let all_cubes: BTreeSet<DyadicCube> = [f, g, fp, gp].iter().flat_map(|e| e.cubes().cloned()).collect();
    let unchanged = fp.constant() == f.constant()
        && gp.constant() == g.constant()
        && all_cubes.iter().filter(|c| !in_copied_region(c)).all(|c| {
            fp.cube_coefficients(c) == f.cube_coefficients(c) && gp.cube_coefficients(c) == g.cube_coefficients(c)
        });
    verdicts.push(LemmaVerdict::flag(LemmaId::L5_2, unchanged, witness(2)));

    let copied = (0..1usize << delta.dim()).filter(|&p| p != i - 1).all(|pos| {
        let dst = delta.child(pos);
        let mut probes: BTreeSet<DyadicCube> =
            [fp, gp].iter().flat_map(|e| e.cubes().filter(|c| c.is_subset_of(&dst)).cloned()).collect();
        probes.extend([f, g].iter().flat_map(|e| e.cubes().filter(|c| c.is_subset_of(&src)).map(|c| c.translate(&src, &dst))));
        probes.iter().all(|c| {
            let from = c.translate(&dst, &src);
            fp.cube_coefficients(c) == f.cube_coefficients(&from) && gp.cube_coefficients(c) == g.cube_coefficients(&from)
        })
    });
    verdicts.push(LemmaVerdict::flag(LemmaId::L5_2, copied, witness(3)));

    let disjoint = fp.spectrum().all(|(k, _)| gp.coefficient_at(&k).is_zero());
    verdicts.push(LemmaVerdict::flag(LemmaId::L5_2, disjoint, witness(4)));

    let sum = fp + gp;
    verdicts.push(LemmaVerdict::flag(LemmaId::L5_2, !sum.is_zero(), witness(5)));

    let lhs = fp.l1_norm() * (f + g).l1_norm();
    let rhs = f.l1_norm() * sum.l1_norm();
    verdicts.push(LemmaVerdict::at_least(LemmaId::L5_2, lhs, rhs, witness(6)));
    Ok(verdicts)
}

/// `(f, g, Δ)` satisfying the pair operator's hypotheses, with terms on
/// ancestors of `Δ`, inside its successors, and elsewhere.
pub fn gen_pair_instance<R: Rng>(rng: &mut R, dim: usize) -> (Expansion, Expansion, DyadicCube) {
    let delta = random_cube(rng, dim, 0, 2);
    let bound = q(2, 1);
    let mut f = HaarExpansion::constant_function(dim, if rng.gen_bool(0.3) { random_coefficient(rng, &bound) } else { Rational::zero() });
    let mut g = Expansion::zero(dim);
    for _ in 0..rng.gen_range(1..=14) {
        let c = match rng.gen_range(0..4) {
            0 if delta.level() > 0 => delta.ancestor_at(rng.gen_range(0..delta.level())),
            0..=2 => random_descendant_in(rng, &delta, 1..=3),
            _ => random_cube(rng, dim, 0, 4),
        };
        if c == delta {
            continue;
        }
        let j = random_index(rng, dim);
        if !f.coefficient(&c, j).is_zero() || !g.coefficient(&c, j).is_zero() {
            continue;
        }
        let target = if rng.gen_bool(0.5) { &mut f } else { &mut g };
        target.set(&c, j, random_coefficient(rng, &bound)).expect("valid");
    }
    if (&f + &g).is_zero() {
        let c = random_descendant(rng, &delta, 1);
        f.set(&c, 1, Rational::one()).expect("valid");
    }
    (f, g, delta)
}

/// P1–P7 and support containment for the output of [`symmetrize_mgcr`].
pub fn symmetrized_properties(f: &Expansion, g: &Expansion, t: &Rational) -> Result<Vec<(&'static str, bool)>> {
    let out = symmetrize_mgcr(f, g, t)?;
    let (fp, gp) = (&out.f_prime, &out.g_prime);
    let mut props = Vec::new();
    let hyp = check_second_key_hypotheses(fp, gp, t);
    let failed = |name: &str| matches!(&hyp, Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == name);
    props.push(("P1", !failed("1")));
    props.push(("P2", !failed("2")));
    props.push(("P3", !failed("3")));
    props.push(("P4", !failed("4")));
    props.push(("P5", !failed("5")));
    let fathers = mgcr_fathers(fp)?;
    let mut symmetric = true;
    for fa in &fathers {
        symmetric &= is_symmetric_at(fp, fa)? && is_symmetric_at(gp, fa)?;
    }
    props.push(("P6", symmetric));
    let lhs = f.l1_norm() * (fp + gp).l1_norm();
    let rhs = fp.l1_norm() * (f + g).l1_norm();
    props.push(("P7", lhs <= rhs && out.ratio_after >= out.ratio_before));
    let tops: Vec<&DyadicCube> = fathers.iter().filter(|a| !fathers.iter().any(|b| a.is_strict_subset_of(b))).collect();
    let inside = tops.iter().fold(Rational::zero(), |acc, c| acc + fp.norm_on(c));
    props.push(("support", inside == fp.l1_norm()));
    Ok(props)
}

// ------------------------------------------------------ greedy-level checks

/// `max_m ‖G_m‖ ≤ C(s,t,d)·‖f‖` for a trace run with `0 < t < s < 1`.
pub fn check_uniform_bound(trace: &Trace) -> Result<LemmaVerdict> {
    if trace.boundary_regime {
        return Err(Error::InvalidParams(
            "the uniform bound only applies for 0 < t < s < 1; this trace used s = 1 or s = t".into(),
        ));
    }
    let p = &trace.params;
    let rhs = uniform_bound_constant(trace.initial.dim(), &p.s, &p.t) * trace.initial_norm.clone();
    Ok(LemmaVerdict::at_most(LemmaId::BOUND, trace.max_approximant_norm(), rhs, trace_witness(trace)))
}

fn trace_witness(trace: &Trace) -> Value {
    json!({
        "f": expansion_to_json(&trace.initial),
        "s": format_rational(&trace.params.s),
        "t": format_rational(&trace.params.t),
        "variant": match trace.params.rule { SelectionRule::A => "a", SelectionRule::B => "b" },
        "include_constant": trace.params.include_constant,
    })
}

/// Terms the greedy run must remove: the Haar spectrum, plus the constant
/// when it is selectable and nonzero.
pub fn expected_steps(f: &Expansion, include_constant: bool) -> usize {
    f.spectrum_len() + usize::from(include_constant && !f.constant().is_zero())
}

/// Zero residual after exactly [`expected_steps`] steps.
pub fn check_convergence(trace: &Trace) -> LemmaVerdict {
    let expected = expected_steps(&trace.initial, trace.params.include_constant);
    let mut w = trace_witness(trace);
    w["steps"] = json!(trace.steps.len());
    w["expected"] = json!(expected);
    let residual_left = if trace.params.include_constant { !trace.residual.is_zero() } else { trace.residual.spectrum_len() > 0 };
    LemmaVerdict::flag(LemmaId::CONVERGE, !residual_left && trace.steps.len() == expected, w)
}

/// Sub-threshold perturbation of a random expansion.
pub fn gen_branch_instance<R: Rng>(
    rng: &mut R,
    dim: usize,
    params: &GreedyParams<Rational>,
) -> Option<(Expansion, std::collections::BTreeMap<HaarKey, Rational>)> {
    let f = gen_expansion_with(rng, dim, 4, 24, &q(2, 1));
    let (_, max) = f.max_coefficient(params.include_constant).ok()?;
    let limit = params.t.clone() * max.abs();
    let mut perturbation = std::collections::BTreeMap::new();
    let small: Vec<HaarKey> = f.spectrum().filter(|(_, v)| v.abs() < limit).map(|(k, _)| k).collect();
    for _ in 0..rng.gen_range(1..=6) {
        let key = match small.choose(rng) {
            Some(k) if rng.gen_bool(0.5) => k.clone(),
            _ => HaarKey::new(random_cube(rng, dim, 0, 5), random_index(rng, dim)),
        };
        if f.coefficient_at(&key).abs() >= limit {
            continue;
        }
        let value = if rng.gen_bool(0.2) { Rational::zero() } else { strictly_below(rng, &limit) };
        perturbation.insert(key, value);
    }
    Some((f, perturbation))
}

/// `analysis ∘ to_grid` and `to_grid ∘ analysis` are identities on a random grid.
pub fn check_round_trip(grid: &Grid<Rational>) -> Result<LemmaVerdict> {
    let f = HaarExpansion::analysis(grid)?;
    let back = f.to_grid(grid.level)?;
    let again = HaarExpansion::analysis(&back)?;
    let pointwise = (0..grid.values.len()).all(|k| f.evaluate(&grid.cell(k)).ok().as_ref() == Some(&grid.values[k]));
    let ok = back == *grid && again == f && pointwise && f.l1_norm() == grid.l1_norm();
    Ok(LemmaVerdict::flag(LemmaId::ROUNDTRIP, ok, json!({ "grid": grid_to_json(grid) })))
}

pub fn gen_grid<R: Rng>(rng: &mut R, dim: usize, level: u32) -> Grid<Rational> {
    let denominators = [1, 2, 3, 4, 5, 8, 16];
    let values = (0..1usize << (dim as u32 * level))
        .map(|_| {
            if rng.gen_bool(0.2) {
                Rational::zero()
            } else {
                q(rng.gen_range(-24..=24), *denominators.choose(rng).expect("nonempty"))
            }
        })
        .collect();
    Grid::new(dim, level, values).expect("sized to the level")
}

// ------------------------------------------------------------------ suites

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    NormLemmas,
    Mgcr,
    KeyLemmas,
    Bound,
    Branch,
    RoundTrip,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 7] = ["norm-lemmas", "mgcr", "key-lemmas", "bound", "branch", "roundtrip", "all"];
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "norm-lemmas" => Suite::NormLemmas,
            "mgcr" => Suite::Mgcr,
            "key-lemmas" => Suite::KeyLemmas,
            "bound" => Suite::Bound,
            "branch" => Suite::Branch,
            "roundtrip" => Suite::RoundTrip,
            "all" => Suite::All,
            other => {
                return Err(Error::Parse(format!("unknown suite {other:?}; expected one of {}", Suite::NAMES.join(", "))))
            }
        })
    }
}

fn parallel<F>(trials: usize, per_trial: F) -> Vec<LemmaVerdict>
where
    F: Fn(u64) -> Vec<LemmaVerdict> + Send + Sync,
{
    (0..trials as u64).into_par_iter().map(per_trial).collect::<Vec<_>>().into_iter().flatten().collect()
}

fn or_failure(id: LemmaId, result: Result<LemmaVerdict>, witness: impl FnOnce() -> Value) -> LemmaVerdict {
    result.unwrap_or_else(|e| LemmaVerdict::errored(id, &e, witness()))
}

/// `trials` instances of each norm estimate at `d = 2` and `d = 3`.
pub fn norm_lemma_suite(trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    let mut out = Vec::new();
    for (lane, (id, dim)) in LemmaId::NORM.iter().flat_map(|id| [(id, 2usize), (id, 3)]).enumerate() {
        let lane_seed = trial_seed(seed, 1000 + lane as u64);
        out.extend(parallel(trials, |k| {
            let mut rng = rng_for(lane_seed, k);
            let (f, cubes, idx) = gen_norm_instance(&mut rng, *id, dim);
            let w = || json!({ "f": expansion_to_json(&f), "cubes": cube_strings(&cubes), "indices": [idx.0, idx.1] });
            vec![or_failure(*id, check_norm_lemma(*id, &f, &cubes, idx), w)]
        }));
    }
    out
}

/// `trials` random cube sets (MGCR, `Eq4_1`) and chain pairs (`L4_6`).
pub fn mgcr_suite(trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    let lane_seed = trial_seed(seed, 2000);
    parallel(trials, |k| {
        let mut rng = rng_for(lane_seed, k);
        let dim = rng.gen_range(1..=3);
        let size = rng.gen_range(1..=14);
        let set = gen_cube_set(&mut rng, dim, 0, 5, size);
        let mut out = check_cube_set(&set, &mut rng)
            .unwrap_or_else(|e| vec![LemmaVerdict::errored(LemmaId::MGCR, &e, json!({ "set": set_json(&set) }))]);
        let pair_dim = rng.gen_range(1..=2);
        let (a, b) = gen_chain_pair(&mut rng, pair_dim);
        out.push(check_chain_union(&a, &b));
        out
    })
}

/// `trials` instances of each key estimate (with the symmetrization
/// properties) and `2·trials` applications of the pair operator.
pub fn key_lemma_suite(trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    let (s, t) = (q(3, 4), q(1, 2));
    let lane_one = trial_seed(seed, 3000);
    let lane_two = trial_seed(seed, 3001);
    let lane_pair = trial_seed(seed, 3002);
    let mut out = parallel(trials, |k| {
        let mut rng = rng_for(lane_one, k);
        let dim = 2 + (k % 2) as usize;
        let (p, qx) = gen_key_one(&mut rng, dim, &s, &t);
        let w = || json!({ "p": expansion_to_json(&p), "q": expansion_to_json(&qx) });
        vec![or_failure(LemmaId::KEY1, check_key_lemma_one(&p, &qx, &s, &t), w)]
    });
    out.extend(parallel(trials, |k| {
        let mut rng = rng_for(lane_two, k);
        let dim = 2 + (k % 2) as usize;
        let (f, g) = gen_key_two(&mut rng, dim, &t);
        let w = || json!({ "f": expansion_to_json(&f), "g": expansion_to_json(&g) });
        let mut v = vec![or_failure(LemmaId::KEY2, check_key_lemma_two(&f, &g, &t), w)];
        match symmetrized_properties(&f, &g, &t) {
            Ok(props) => {
                let failed: Vec<&str> = props.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
                let mut w = w();
                w["failed"] = json!(failed);
                v.push(LemmaVerdict::flag(LemmaId::SYM, failed.is_empty(), w));
            }
            Err(e) => v.push(LemmaVerdict::errored(LemmaId::SYM, &e, w())),
        }
        v
    }));
    out.extend(parallel(2 * trials, |k| {
        let mut rng = rng_for(lane_pair, k);
        let dim = 1 + (k % 3) as usize;
        let (f, g, delta) = gen_pair_instance(&mut rng, dim);
        check_pair_operator(&f, &g, &delta).unwrap_or_else(|e| {
            vec![LemmaVerdict::errored(
                LemmaId::L5_2,
                &e,
                json!({ "f": expansion_to_json(&f), "g": expansion_to_json(&g), "delta": delta.to_string() }),
            )]
        })
    }));
    out
}

/// `trials` random expansions (`d ∈ {1,2,3}`, level `≤ 5`, `≤ 40` terms), each
/// run under both step-3 rules at `s = 3/4, t = 1/2`.
pub fn bound_suite(trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    let lane = trial_seed(seed, 4000);
    parallel(trials, |k| {
        let mut rng = rng_for(lane, k);
        let dim = 1 + (k % 3) as usize;
        let f = gen_expansion_with(&mut rng, dim, 5, 40, &q(2, 1));
        let mut out = Vec::new();
        for rule in [SelectionRule::A, SelectionRule::B] {
            let params = GreedyParams::new(q(3, 4), q(1, 2)).expect("valid").with_rule(rule);
            match run(&f, &params) {
                Ok(trace) => {
                    out.push(check_convergence(&trace));
                    out.push(or_failure(LemmaId::BOUND, check_uniform_bound(&trace), || trace_witness(&trace)));
                }
                Err(e) => out.push(LemmaVerdict::errored(LemmaId::CONVERGE, &e, json!({ "f": expansion_to_json(&f) }))),
            }
        }
        out
    })
}

pub fn branch_suite(trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    let lane = trial_seed(seed, 5000);
    parallel(trials, |k| {
        let mut rng = rng_for(lane, k);
        let dim = 1 + (k % 3) as usize;
        let rule = if rng.gen_bool(0.5) { SelectionRule::A } else { SelectionRule::B };
        let params = GreedyParams::new(q(3, 4), q(1, 2)).expect("valid").with_rule(rule);
        let mut attempt = 0;
        loop {
            attempt += 1;
            if let Some((f, pert)) = gen_branch_instance(&mut rng, dim, &params) {
                let w = json!({
                    "f": expansion_to_json(&f),
                    "perturbation": pert.iter().map(|(k, v)| json!([k.cube.to_string(), k.index, format_rational(v)])).collect::<Vec<_>>(),
                });
                return vec![match check_branch_greedy(&f, &params, &pert) {
                    Ok(same) => LemmaVerdict::flag(LemmaId::BRANCH, same, w),
                    Err(e) => LemmaVerdict::errored(LemmaId::BRANCH, &e, w),
                }];
            }
            if attempt > 64 {
                return vec![LemmaVerdict::flag(LemmaId::BRANCH, false, json!({ "error": "no nonzero instance" }))];
            }
        }
    })
}

/// Level-3 grids for `d = 1, 2, 3`.
pub fn round_trip_suite(trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    let lane = trial_seed(seed, 6000);
    parallel(trials, |k| {
        let mut rng = rng_for(lane, k);
        let dim = 1 + (k % 3) as usize;
        let grid = gen_grid(&mut rng, dim, 3);
        vec![or_failure(LemmaId::ROUNDTRIP, check_round_trip(&grid), || json!({ "grid": grid_to_json(&grid) }))]
    })
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Vec<LemmaVerdict> {
    match suite {
        Suite::NormLemmas => norm_lemma_suite(trials, seed),
        Suite::Mgcr => mgcr_suite(trials, seed),
        Suite::KeyLemmas => key_lemma_suite(trials, seed),
        Suite::Bound => bound_suite(trials, seed),
        Suite::Branch => branch_suite(trials, seed),
        Suite::RoundTrip => round_trip_suite(trials, seed),
        Suite::All => [Suite::NormLemmas, Suite::Mgcr, Suite::KeyLemmas, Suite::Bound, Suite::Branch, Suite::RoundTrip]
            .into_iter()
            .flat_map(|s| run_suite(s, trials, seed))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube(level: u32, coords: &[u128]) -> DyadicCube {
        DyadicCube::new(level, coords.to_vec()).unwrap()
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_expansion(7, 2, 4, 20, &q(1, 1));
        assert_eq!(a, gen_expansion(7, 2, 4, 20, &q(1, 1)));
        assert!(a.max_level().unwrap_or(0) <= 4);
        assert!(a.spectrum().all(|(_, v)| v.abs() <= q(1, 1)));
        let c = gen_expansion(7, 2, 4, 0, &q(1, 1));
        assert_eq!(c.spectrum_len(), 0);
    }

    #[test]
    fn single_haar_function_is_an_equality_case() {
        let i = cube(1, &[1, 0]);
        let f = HaarExpansion::<Rational>::haar(i.clone(), 2).unwrap();
        let v = check_norm_lemma(LemmaId::L3_1, &f, &[i.clone(), i.clone()], (2, 1)).unwrap();
        assert!(v.holds);
        assert_eq!(v.lhs, q(1, 1));
        assert_eq!(v.rhs, q(1, 1));
    }

    #[test]
    fn nesting_preconditions_are_enforced() {
        let f = HaarExpansion::<Rational>::zero(2);
        let i = cube(1, &[0, 0]);
        let j = cube(2, &[3, 3]);
        assert!(matches!(check_norm_lemma(LemmaId::L3_3a, &f, &[i.clone(), j.clone()], (1, 1)), Err(Error::NotNested(_))));
        assert!(check_norm_lemma(LemmaId::L3_4, &f, &[i.clone(), i.child(0), i.child(0)], (1, 1)).is_err());
        assert!(check_norm_lemma(LemmaId::L3_5, &f, &[i.clone(), i.clone(), i.clone()], (1, 1)).is_err());
    }

    #[test]
    fn key_one_single_chain() {
        let (s, t) = (q(3, 4), q(1, 2));
        let mut p = HaarExpansion::zero(2);
        p.set(&cube(1, &[0, 1]), 1, s.clone()).unwrap();
        let v = check_key_lemma_one(&p, &HaarExpansion::zero(2), &s, &t).unwrap();
        assert!(v.holds);
        assert_eq!(v.rhs, chain_lemma_constant(&s, &t));
    }

    #[test]
    fn key_one_reports_hypothesis_two() {
        let (s, t) = (q(3, 4), q(1, 2));
        let mut p = HaarExpansion::zero(2);
        p.set(&cube(1, &[0, 1]), 1, q(1, 2)).unwrap();
        let err = check_key_lemma_one(&p, &HaarExpansion::zero(2), &s, &t).unwrap_err();
        assert!(matches!(err, Error::Hypothesis { hypothesis, .. } if hypothesis == "2"));
    }

    #[test]
    fn key_two_with_zero_g() {
        let mut f = HaarExpansion::zero(2);
        f.set(&cube(2, &[1, 1]), 3, q(1, 1)).unwrap();
        let v = check_key_lemma_two(&f, &HaarExpansion::zero(2), &q(1, 2)).unwrap();
        assert!(v.holds);
        assert_eq!(v.lhs, q(1, 1));
        assert_eq!(v.rhs, q(22, 1));
    }

    #[test]
    fn generators_satisfy_their_own_hypotheses() {
        let (s, t) = (q(3, 4), q(1, 2));
        for k in 0..40 {
            let mut rng = rng_for(11, k);
            let dim = 1 + (k % 3) as usize;
            let (p, qx) = gen_key_one(&mut rng, dim, &s, &t);
            check_first_key_hypotheses(&p, &qx, &s, &t).unwrap();
            let (f, g) = gen_key_two(&mut rng, dim, &t);
            check_second_key_hypotheses(&f, &g, &t).unwrap();
            let (f, g, delta) = gen_pair_instance(&mut rng, dim);
            crate::symmetry::check_pair_hypotheses(&f, &g, &delta).unwrap();
        }
    }

    #[test]
    fn boundary_traces_are_rejected() {
        let f = crate::constructions::build_f_n::<Rational>(2).unwrap();
        let trace = run(&f, &GreedyParams::new(q(1, 1), q(1, 2)).unwrap()).unwrap();
        assert!(matches!(check_uniform_bound(&trace), Err(Error::InvalidParams(_))));
        let single = HaarExpansion::<Rational>::haar(cube(1, &[0, 0]), 1).unwrap();
        let trace = run(&single, &GreedyParams::new(q(3, 4), q(1, 2)).unwrap()).unwrap();
        let v = check_uniform_bound(&trace).unwrap();
        assert!(v.holds);
        assert_eq!(v.lhs, q(1, 1));
    }

    #[test]
    fn suites_are_reproducible_and_clean() {
        for suite in [Suite::NormLemmas, Suite::Mgcr, Suite::KeyLemmas, Suite::Bound, Suite::Branch, Suite::RoundTrip] {
            let a = run_suite(suite, 6, 42);
            assert_eq!(a, run_suite(suite, 6, 42));
            let bad: Vec<_> = a.iter().filter(|v| !v.holds).collect();
            assert!(bad.is_empty(), "{suite:?}: {bad:#?}");
        }
        assert!("nope".parse::<Suite>().is_err());
    }
}
