//! Copy operators `L_i(f, Δ)`, the pair operator `L((f, g), Δ)`, and the
//! symmetrization pass over the fathers of an MGCR.

use std::collections::BTreeSet;

use crate::dyadic::{by_increasing_measure, mgcr, DyadicCube};
use crate::error::{Error, Result};
use crate::haar::{child_sign, haar_count, HaarExpansion};
use crate::scalar::Scalar;

fn check_successor(cube: &DyadicCube, i: usize) -> Result<()> {
    if i == 0 || i > 1 << cube.dim() {
        return Err(Error::InvalidIndex { index: i, dim: cube.dim() });
    }
    if cube.level() >= crate::dyadic::MAX_LEVEL {
        return Err(Error::InvalidCube(format!("{cube} is too deep to refine")));
    }
    Ok(())
}

/// `L_i(f, Δ)`: agrees with `f` off `Δ` and on `Δ_i`, and repeats `f|Δ_i`
/// on every other immediate successor of `Δ`. Successors are numbered
/// `1..=2^d` in canonical order.
///
/// Coefficients below `Δ_i` are translated to the siblings; coefficients at
/// `Δ` vanish (all successor means become equal); if `Δ` carried
/// coefficients, the mean over `Δ` moves by `δ`, which shifts every coarser
/// coefficient by `sign·δ·μ(Δ)`.
pub fn copy_from_successor<T: Scalar>(f: &HaarExpansion<T>, cube: &DyadicCube, i: usize) -> Result<HaarExpansion<T>> {
    check_successor(cube, i)?;
    if cube.dim() != f.dim() {
        return Err(Error::DimensionMismatch(f.dim(), cube.dim()));
    }
    let src_pos = i - 1;
    let src = cube.child(src_pos);
    let mean_shift = (1..=haar_count(f.dim())).fold(T::zero(), |acc, k| {
        let c = f.coefficient(cube, k);
        if child_sign(src_pos, k) > 0 {
            acc + c
        } else {
            acc - c
        }
    });

    let mut out = f.clone();
    out.retain_cubes(|c| c != cube && !(c.is_strict_subset_of(cube) && !c.is_subset_of(&src)));
    let copies: Vec<(DyadicCube, Vec<T>)> =
        f.blocks().iter().filter(|(c, _)| c.is_subset_of(&src)).map(|(c, b)| (c.clone(), b.clone())).collect();
    for pos in (0..1usize << f.dim()).filter(|&p| p != src_pos) {
        let dst = cube.child(pos);
        for (c, block) in &copies {
            out.insert_block(c.translate(&src, &dst), block.clone());
        }
    }

    if !mean_shift.is_zero() {
        for level in 0..cube.level() {
            let ancestor = cube.ancestor_at(level);
            let pos = cube.position_below(&ancestor).expect("strict ancestor");
            for k in 1..=haar_count(f.dim()) {
                let d = if child_sign(pos, k) > 0 { mean_shift.clone() } else { -mean_shift.clone() };
                out.add_to(&ancestor, k, d)?;
            }
        }
        let c = out.constant().clone() + mean_shift;
        out.set_constant(c);
    }
    Ok(out)
}

/// Right-hand side of `‖L_i(f,Δ)‖ = ‖f‖ + 2^d‖f‖_{Δ_i} − Σ_j ‖f‖_{Δ_j}`.
pub fn copy_norm_formula<T: Scalar>(f: &HaarExpansion<T>, cube: &DyadicCube, i: usize) -> Result<T> {
    check_successor(cube, i)?;
    let fan = 1usize << cube.dim();
    let parts: Vec<T> = cube.children().iter().map(|c| f.norm_on(c)).collect();
    let sum = parts.iter().fold(T::zero(), |a, p| a + p.clone());
    Ok(f.l1_norm() + T::from_usize(fan).expect("small") * parts[i - 1].clone() - sum)
}

/// Result of the pair operator `L((f, g), Δ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSymmetrization<T> {
    pub f: HaarExpansion<T>,
    pub g: HaarExpansion<T>,
    /// Chosen successor, `1..=2^d`.
    pub successor: usize,
    /// Some successor satisfied `‖L_i f‖ > B‖L_i(f+g)‖`.
    pub strict_branch: bool,
    /// Either some successor is strict or all give equality, `B = ‖f‖/‖f+g‖`.
    pub trichotomy_holds: bool,
    pub ratio_before: T,
    pub ratio_after: T,
}

/// `Δ ∉ Σ̂(f) ∪ Σ̂(g)`, `Σ(f) ∩ Σ(g) = ∅`, `f + g ≠ 0`.
pub fn check_pair_hypotheses<T: Scalar>(f: &HaarExpansion<T>, g: &HaarExpansion<T>, cube: &DyadicCube) -> Result<()> {
    if f.contains_cube(cube) || g.contains_cube(cube) {
        return Err(Error::hypothesis("i", format!("{cube} carries coefficients")));
    }
    if let Some((key, _)) = f.spectrum().find(|(k, _)| !g.coefficient_at(k).is_zero()) {
        return Err(Error::hypothesis("ii", format!("({}, {}) is in both spectra", key.cube, key.index)));
    }
    if (f + g).is_zero() {
        return Err(Error::hypothesis("iii", "f + g = 0"));
    }
    Ok(())
}

/// The pair operator: copies `(f, g)` from the smallest successor `i` with
/// `‖L_i f‖·‖f+g‖ > ‖f‖·‖L_i(f+g)‖` and `L_i(f+g) ≠ 0`, falling back to the
/// smallest `i` with `L_i(f+g) ≠ 0`.
pub fn symmetrize_pair<T: Scalar>(
    f: &HaarExpansion<T>,
    g: &HaarExpansion<T>,
    cube: &DyadicCube,
) -> Result<PairSymmetrization<T>> {
    check_pair_hypotheses(f, g, cube)?;
    let nf = f.l1_norm();
    let ns = (f + g).l1_norm();
    let mut options = Vec::new();
    for i in 1..=1usize << cube.dim() {
        let lf = copy_from_successor(f, cube, i)?;
        let lg = copy_from_successor(g, cube, i)?;
        let a = lf.l1_norm();
        let b = (&lf + &lg).l1_norm();
        options.push((i, lf, lg, a, b));
    }
    let strict = |a: &T, b: &T| a.clone() * ns.clone() > nf.clone() * b.clone();
    let equal = |a: &T, b: &T| a.clone() * ns.clone() == nf.clone() * b.clone();
    let strict_branch = options.iter().any(|(_, _, _, a, b)| strict(a, b));
    let trichotomy_holds = strict_branch || options.iter().all(|(_, _, _, a, b)| equal(a, b));
    let pick = options
        .iter()
        .position(|(_, _, _, a, b)| strict(a, b) && !b.is_zero())
        .or_else(|| options.iter().position(|(_, _, _, _, b)| !b.is_zero()))
        .ok_or_else(|| Error::hypothesis("iii", "every copy of f + g vanishes"))?;
    let (successor, lf, lg, a, b) = options.swap_remove(pick);
    Ok(PairSymmetrization {
        f: lf,
        g: lg,
        successor,
        strict_branch,
        trichotomy_holds,
        ratio_before: nf / ns,
        ratio_after: a / b,
    })
}

/// Output of the MGCR symmetrization pass.
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetrizedPair<T> {
    pub f_prime: HaarExpansion<T>,
    pub g_prime: HaarExpansion<T>,
    pub ratio_before: T,
    pub ratio_after: T,
    /// `(father, chosen successor)` in application order.
    pub applied: Vec<(DyadicCube, usize)>,
}

/// Fathers of the MGCR of `Σ̂(f)` (distinct, root-level chains contribute none).
pub fn mgcr_fathers<T: Scalar>(f: &HaarExpansion<T>) -> Result<Vec<DyadicCube>> {
    let spectrum = f.cube_spectrum();
    if spectrum.is_empty() {
        return Ok(Vec::new());
    }
    let fathers: BTreeSet<DyadicCube> = mgcr(&spectrum)?.mgcr.into_iter().filter_map(|c| c.father).collect();
    let mut fathers: Vec<_> = fathers.into_iter().collect();
    fathers.sort_by(by_increasing_measure);
    Ok(fathers)
}

/// Hypotheses of the second key estimate:
/// 1. `Σ̂(f) ∩ Σ̂(g) = ∅`;
/// 2. the root is in neither cube-spectrum (and `f` has no constant term);
/// 3. no MGCR father of `Σ̂(f)` is in `Σ̂(g)`;
/// 4. every coefficient of `g`, constant included, is at most `1` in size;
/// 5. every chain of the MGCR has a coefficient of size `≥ t`.
pub fn check_second_key_hypotheses<T: Scalar>(f: &HaarExpansion<T>, g: &HaarExpansion<T>, t: &T) -> Result<()> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch(f.dim(), g.dim()));
    }
    if let Some(c) = f.cubes().find(|c| g.contains_cube(c)) {
        return Err(Error::hypothesis("1", format!("{c} is in both cube-spectra")));
    }
    let root = DyadicCube::root(f.dim());
    if f.contains_cube(&root) || g.contains_cube(&root) || !f.constant().is_zero() {
        return Err(Error::hypothesis("2", "root cube (or a constant term of f) present"));
    }
    let spectrum = f.cube_spectrum();
    let chains = if spectrum.is_empty() { Vec::new() } else { mgcr(&spectrum)?.mgcr };
    if let Some(c) = chains.iter().filter_map(|c| c.father.as_ref()).find(|fa| g.contains_cube(fa)) {
        return Err(Error::hypothesis("3", format!("father {c} is in the cube-spectrum of g")));
    }
    if g.constant().abs() > T::one() || g.spectrum().any(|(_, v)| v.abs() > T::one()) {
        return Err(Error::hypothesis("4", "g has a coefficient larger than 1"));
    }
    if let Some(c) = chains.iter().find(|ch| !ch.cubes.iter().any(|c| f.cube_max_abs(c) >= *t)) {
        return Err(Error::hypothesis("5", format!("chain with maximal cube {} has no coefficient >= {t}", c.maximal_cube)));
    }
    if (f + g).is_zero() {
        return Err(Error::hypothesis("f + g != 0", "f + g = 0"));
    }
    Ok(())
}

/// Applies the pair operator at each MGCR father of `Σ̂(f)`, smallest
/// fathers first, in a single pass.
pub fn symmetrize_mgcr<T: Scalar>(f: &HaarExpansion<T>, g: &HaarExpansion<T>, t: &T) -> Result<SymmetrizedPair<T>> {
    check_second_key_hypotheses(f, g, t)?;
    let ratio_before = f.l1_norm() / (f + g).l1_norm();
    let mut cur_f = f.clone();
    let mut cur_g = g.clone();
    let mut applied = Vec::new();
    for father in mgcr_fathers(f)? {
        let step = symmetrize_pair(&cur_f, &cur_g, &father)?;
        applied.push((father, step.successor));
        cur_f = step.f;
        cur_g = step.g;
    }
    let ratio_after = cur_f.l1_norm() / (&cur_f + &cur_g).l1_norm();
    Ok(SymmetrizedPair { f_prime: cur_f, g_prime: cur_g, ratio_before, ratio_after, applied })
}

/// Whether `f` already equals `L_i(f, Δ)` for every successor `i`.
pub fn is_symmetric_at<T: Scalar>(f: &HaarExpansion<T>, cube: &DyadicCube) -> Result<bool> {
    for i in 1..=1usize << cube.dim() {
        if copy_from_successor(f, cube, i)? != *f {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-cube diagnostic `‖f'‖_I < (5/t + 2)‖f'+g'‖_I − 2t − 8` over the MGCR
/// fathers of `f'`.
pub fn induction_diagnostic<T: Scalar>(
    f_prime: &HaarExpansion<T>,
    g_prime: &HaarExpansion<T>,
    t: &T,
) -> Result<Vec<(DyadicCube, bool)>> {
    let sum = f_prime + g_prime;
    let five = T::from_i64(5).expect("small");
    let two = T::from_i64(2).expect("small");
    let eight = T::from_i64(8).expect("small");
    mgcr_fathers(f_prime)?
        .into_iter()
        .map(|c| {
            let lhs = f_prime.norm_on(&c);
            let rhs = (five.clone() / t.clone() + two.clone()) * sum.norm_on(&c) - two.clone() * t.clone() - eight.clone();
            Ok((c, lhs < rhs))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn cube(level: u32, coords: &[u128]) -> DyadicCube {
        DyadicCube::new(level, coords.to_vec()).unwrap()
    }

    /// Pointwise copy on a grid: each cell in `Δ_j` takes the value of the
    /// matching cell in `Δ_i`.
    fn grid_copy(f: &HaarExpansion<Rational>, delta: &DyadicCube, i: usize, level: u32) -> HaarExpansion<Rational> {
        let grid = f.to_grid(level).unwrap();
        let src = delta.child(i - 1);
        let mut out = grid.clone();
        for idx in 0..grid.values.len() {
            let cell = grid.cell(idx);
            if cell.is_subset_of(delta) && !cell.is_subset_of(&src) {
                let here = cell.ancestor_at(delta.level() + 1);
                let from = cell.translate(&here, &src);
                out.values[idx] = grid.values[grid.index_of(&from)].clone();
            }
        }
        HaarExpansion::analysis(&out).unwrap()
    }

    fn sample() -> HaarExpansion<Rational> {
        let mut f = HaarExpansion::constant_function(2, q(1, 3));
        f.set(&cube(1, &[0, 1]), 2, q(-1, 2)).unwrap();
        f.set(&cube(1, &[0, 1]), 3, q(1, 4)).unwrap();
        f.set(&cube(2, &[1, 2]), 1, q(2, 1)).unwrap();
        f.set(&cube(2, &[0, 3]), 3, q(-3, 4)).unwrap();
        f.set(&cube(3, &[2, 6]), 2, q(5, 8)).unwrap();
        f.set(&cube(2, &[3, 3]), 1, q(1, 1)).unwrap();
        f
    }

    #[test]
    fn constant_is_fixed_by_every_copy() {
        let f = HaarExpansion::constant_function(2, q(7, 2));
        for i in 1..=4 {
            assert_eq!(copy_from_successor(&f, &cube(1, &[1, 0]), i).unwrap(), f);
        }
    }

    #[test]
    fn coefficient_surgery_matches_grid_copy() {
        let f = sample();
        for delta in [cube(1, &[0, 1]), cube(0, &[0, 0]), cube(2, &[1, 2]), cube(1, &[1, 1])] {
            for i in 1..=4 {
                let got = copy_from_successor(&f, &delta, i).unwrap();
                assert_eq!(got, grid_copy(&f, &delta, i, 5), "Δ = {delta}, i = {i}");
            }
        }
    }

    #[test]
    fn norm_identity_holds() {
        let f = sample();
        for delta in [cube(1, &[0, 1]), cube(0, &[0, 0]), cube(2, &[0, 3])] {
            for i in 1..=4 {
                let lhs = copy_from_successor(&f, &delta, i).unwrap().l1_norm();
                assert_eq!(lhs, copy_norm_formula(&f, &delta, i).unwrap());
            }
        }
    }

    #[test]
    fn spectrum_inside_one_successor_is_replicated() {
        let delta = cube(1, &[1, 0]);
        let mut f = HaarExpansion::<Rational>::zero(2);
        f.set(&cube(3, &[4, 1]), 1, q(1, 1)).unwrap();
        let l = copy_from_successor(&f, &delta, 1).unwrap();
        assert_eq!(l.spectrum_len(), 4);
        assert_eq!(l.cube_coefficients(&delta), None);
        assert!(copy_from_successor(&f, &delta, 5).is_err());
        assert!(copy_from_successor(&f, &delta, 0).is_err());
    }

    #[test]
    fn pair_with_zero_g_keeps_ratio_one() {
        let mut f = HaarExpansion::<Rational>::zero(2);
        f.set(&cube(2, &[0, 0]), 1, q(1, 1)).unwrap();
        let out = symmetrize_pair(&f, &HaarExpansion::zero(2), &cube(1, &[0, 0])).unwrap();
        assert!(out.trichotomy_holds);
        assert!(!out.strict_branch);
        assert_eq!(out.ratio_before, q(1, 1));
        assert_eq!(out.ratio_after, q(1, 1));
        assert_eq!(out.successor, 1);
    }

    #[test]
    fn pair_prefers_a_nonvanishing_copy() {
        let delta = cube(1, &[0, 0]);
        let mut f = HaarExpansion::<Rational>::zero(2);
        f.set(&delta.child(0), 1, q(1, 1)).unwrap();
        let mut g = HaarExpansion::<Rational>::zero(2);
        g.set(&delta.child(1), 2, q(1, 2)).unwrap();
        let out = symmetrize_pair(&f, &g, &delta).unwrap();
        assert!(out.trichotomy_holds);
        assert_eq!(out.successor, 1);
        assert!(out.g.is_zero());
        assert!(!(&out.f + &out.g).is_zero());
        assert!(out.ratio_after >= out.ratio_before);
    }

    #[test]
    fn pair_hypotheses_are_enforced() {
        let delta = cube(1, &[0, 0]);
        let f = HaarExpansion::<Rational>::haar(delta.clone(), 1).unwrap();
        assert!(matches!(symmetrize_pair(&f, &HaarExpansion::zero(2), &delta), Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == "i"));
        let inner = HaarExpansion::<Rational>::haar(delta.child(2), 1).unwrap();
        assert!(matches!(symmetrize_pair(&inner, &inner, &delta), Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == "ii"));
        let z = HaarExpansion::<Rational>::zero(2);
        assert!(matches!(symmetrize_pair(&z, &z, &delta), Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == "iii"));
    }

    #[test]
    fn symmetric_single_chain_is_unchanged() {
        // Four identical copies below a common father: already symmetric.
        let father = cube(1, &[1, 1]);
        let mut f = HaarExpansion::<Rational>::zero(2);
        for pos in 0..4 {
            f.set(&father.child(pos), 3, q(1, 1)).unwrap();
        }
        let out = symmetrize_mgcr(&f, &HaarExpansion::zero(2), &q(1, 2)).unwrap();
        assert_eq!(out.f_prime, f);
        assert_eq!(out.ratio_before, q(1, 1));
        assert_eq!(out.ratio_after, q(1, 1));
    }

    #[test]
    fn mgcr_pass_symmetrizes_each_father() {
        let mut f = HaarExpansion::<Rational>::zero(2);
        f.set(&cube(2, &[0, 0]), 1, q(1, 1)).unwrap();
        f.set(&cube(3, &[0, 0]), 2, q(1, 3)).unwrap();
        f.set(&cube(2, &[3, 1]), 3, q(-3, 4)).unwrap();
        let mut g = HaarExpansion::<Rational>::zero(2);
        g.set(&cube(2, &[2, 2]), 1, q(1, 2)).unwrap();
        g.set(&cube(3, &[7, 7]), 2, q(-1, 1)).unwrap();
        let out = symmetrize_mgcr(&f, &g, &q(1, 2)).unwrap();
        assert!(out.ratio_after >= out.ratio_before);
        for fa in mgcr_fathers(&out.f_prime).unwrap() {
            assert!(is_symmetric_at(&out.f_prime, &fa).unwrap(), "f' not symmetric at {fa}");
            assert!(is_symmetric_at(&out.g_prime, &fa).unwrap(), "g' not symmetric at {fa}");
        }
    }

    #[test]
    fn second_key_hypotheses_report_which_failed() {
        let mut f = HaarExpansion::<Rational>::zero(2);
        f.set(&cube(2, &[0, 0]), 1, q(1, 4)).unwrap();
        let g = HaarExpansion::<Rational>::zero(2);
        assert!(matches!(check_second_key_hypotheses(&f, &g, &q(1, 2)), Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == "5"));
        let mut g2 = HaarExpansion::<Rational>::zero(2);
        g2.set(&cube(1, &[0, 0]), 1, q(1, 2)).unwrap();
        assert!(matches!(check_second_key_hypotheses(&f, &g2, &q(1, 8)), Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == "3"));
        let g3 = HaarExpansion::<Rational>::constant_function(2, q(2, 1));
        assert!(matches!(check_second_key_hypotheses(&f, &g3, &q(1, 8)), Err(Error::Hypothesis { hypothesis, .. }) if hypothesis == "4"));
    }
}
