//! Multivariate Haar system on `[0,1)^d`, finitely supported expansions,
//! exact evaluation, L1 norms over cubes and cube differences, and the
//! projection `P_I`.
//!
//! Haar functions are L1-normalized: `h_I^{(j)} = ±1/μ(I)` on `I`, and the
//! coefficient functional is `c_I^{(j)}(f) = μ(I)·∫_I f·h_I^{(j)}`, so that
//! `c_I^{(j)}(h_I^{(j)}) = 1`. For `j = Σ_k ε_k 2^{d-k}`, the sign of
//! `h_I^{(j)}` on the immediate successor at position `c` is
//! `(-1)^{popcount(c & j)}`: axis `a` contributes a flip only when `ε_a = 1`
//! and the successor lies in the upper half along that axis.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::{Add, Neg, Sub};

use crate::dyadic::{DyadicCube, HaarKey};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Sign `±1` of `h^{(j)}` on immediate successor `child` of its cube.
#[inline]
pub fn child_sign(child: usize, j: usize) -> i32 {
    if (child & j).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

#[inline]
fn signed<T: Scalar>(value: &T, sign: i32) -> T {
    if sign >= 0 {
        value.clone()
    } else {
        -value.clone()
    }
}

/// Number of Haar functions per cube, `2^d − 1`.
pub fn haar_count(dim: usize) -> usize {
    (1 << dim) - 1
}

fn check_index(dim: usize, j: usize) -> Result<()> {
    if j == 0 || j > haar_count(dim) {
        return Err(Error::InvalidIndex { index: j, dim });
    }
    Ok(())
}

/// Sign of `h_I^{(j)}` on `cell`: `0` when disjoint, `±1` when `cell` is strictly
/// inside `I`. Errors if `cell ⊇ I` (the function is not constant there).
pub fn haar_sign(cube: &DyadicCube, j: usize, cell: &DyadicCube) -> Result<i32> {
    if cube.dim() != cell.dim() {
        return Err(Error::DimensionMismatch(cube.dim(), cell.dim()));
    }
    check_index(cube.dim(), j)?;
    if !cube.intersects(cell) {
        return Ok(0);
    }
    match cell.position_below(cube) {
        Some(c) => Ok(child_sign(c, j)),
        None => Err(Error::CellTooCoarse(cell.to_string())),
    }
}

/// The constant value of `h_I^{(j)}` on `cell`.
pub fn haar_value<T: Scalar>(cube: &DyadicCube, j: usize, cell: &DyadicCube) -> Result<T> {
    let sign = haar_sign(cube, j, cell)?;
    Ok(match sign {
        0 => T::zero(),
        s => signed(&T::pow2(cube.log2_inv_measure()), s),
    })
}

/// Region over which an L1 norm is taken.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Region {
    Whole,
    Cube(DyadicCube),
    /// `outer ∖ inner`, with `inner ⊊ outer`.
    Difference(DyadicCube, DyadicCube),
}

impl Region {
    pub fn difference(outer: DyadicCube, inner: DyadicCube) -> Result<Self> {
        if !inner.is_strict_subset_of(&outer) {
            return Err(Error::NotNested(format!("{inner} is not strictly inside {outer}")));
        }
        Ok(Region::Difference(outer, inner))
    }
}

/// Values of a step function on the `2^{level·d}` cells of one level,
/// row-major with the first axis most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    pub dim: usize,
    pub level: u32,
    pub values: Vec<T>,
}

impl<T: Scalar> Grid<T> {
    pub fn new(dim: usize, level: u32, values: Vec<T>) -> Result<Self> {
        let expected = 1usize.checked_shl(level * dim as u32).filter(|_| level as usize * dim < 40);
        match expected {
            Some(n) if n == values.len() && dim >= 1 => Ok(Self { dim, level, values }),
            _ => Err(Error::MalformedGrid(format!("{} values for dim {dim}, level {level}", values.len()))),
        }
    }

    pub fn cell(&self, index: usize) -> DyadicCube {
        DyadicCube::new(self.level, cell_coords(index, self.dim, self.level)).expect("index in range")
    }

    pub fn index_of(&self, cell: &DyadicCube) -> usize {
        cell_index(cell.coords(), self.level)
    }

    /// `∫|g|` computed directly from the cell values.
    pub fn l1_norm(&self) -> T {
        let total = self.values.iter().fold(T::zero(), |acc, v| acc + v.abs());
        total * T::pow2(-((self.level as usize * self.dim) as i64))
    }
}

fn cell_coords(mut index: usize, dim: usize, level: u32) -> Vec<u128> {
    let mask = (1usize << level) - 1;
    let mut coords = vec![0u128; dim];
    for a in (0..dim).rev() {
        coords[a] = (index & mask) as u128;
        index >>= level;
    }
    coords
}

fn cell_index(coords: &[u128], level: u32) -> usize {
    coords.iter().fold(0usize, |acc, &k| (acc << level) | k as usize)
}

/// A finitely supported Haar expansion `constant + Σ c_I^{(j)} h_I^{(j)}`.
///
/// Coefficients are grouped per cube (`2^d − 1` slots); a cube is present in
/// the map iff at least one of its coefficients is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct HaarExpansion<T> {
    dim: usize,
    constant: T,
    coeffs: BTreeMap<DyadicCube, Vec<T>>,
}

impl<T: Scalar> HaarExpansion<T> {
    pub fn zero(dim: usize) -> Self {
        assert!((1..=16).contains(&dim), "dimension out of range: {dim}");
        Self { dim, constant: T::zero(), coeffs: BTreeMap::new() }
    }

    pub fn constant_function(dim: usize, value: T) -> Self {
        let mut f = Self::zero(dim);
        f.constant = value;
        f
    }

    /// The single Haar function `h_I^{(j)}`.
    pub fn haar(cube: DyadicCube, j: usize) -> Result<Self> {
        let mut f = Self::zero(cube.dim());
        f.set(&cube, j, T::one())?;
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn constant(&self) -> &T {
        &self.constant
    }

    pub fn set_constant(&mut self, value: T) {
        self.constant = value;
    }

    /// Stored coefficient; index `0` on the root reads the constant term.
    pub fn coefficient(&self, cube: &DyadicCube, j: usize) -> T {
        if j == 0 {
            return if cube.is_root() { self.constant.clone() } else { T::zero() };
        }
        self.coeffs.get(cube).and_then(|v| v.get(j - 1)).cloned().unwrap_or_else(T::zero)
    }

    pub fn coefficient_at(&self, key: &HaarKey) -> T {
        self.coefficient(&key.cube, key.index)
    }

    /// All `2^d − 1` coefficients of a cube in the cube-spectrum.
    pub fn cube_coefficients(&self, cube: &DyadicCube) -> Option<&[T]> {
        self.coeffs.get(cube).map(Vec::as_slice)
    }

    /// Largest `|c_I^{(j)}|` over `j ≥ 1`.
    pub fn cube_max_abs(&self, cube: &DyadicCube) -> T {
        self.coeffs
            .get(cube)
            .map(|v| v.iter().fold(T::zero(), |m, c| m.max_of(c.abs())))
            .unwrap_or_else(T::zero)
    }

    /// Sets a coefficient, dropping the cube from the map if it becomes all zero.
    /// Index `0` on the root writes the constant term.
    pub fn set(&mut self, cube: &DyadicCube, j: usize, value: T) -> Result<()> {
        if cube.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, cube.dim()));
        }
        if j == 0 && cube.is_root() {
            self.constant = value;
            return Ok(());
        }
        check_index(self.dim, j)?;
        if cube.level() >= crate::dyadic::MAX_LEVEL && !value.is_zero() {
            return Err(Error::InvalidCube(format!("{cube} is too fine to carry a Haar function")));
        }
        if value.is_zero() {
            if let Some(slots) = self.coeffs.get_mut(cube) {
                slots[j - 1] = T::zero();
                if slots.iter().all(Zero::is_zero) {
                    self.coeffs.remove(cube);
                }
            }
        } else {
            let n = haar_count(self.dim);
            self.coeffs.entry(cube.clone()).or_insert_with(|| vec![T::zero(); n])[j - 1] = value;
        }
        Ok(())
    }

    /// Adds `value` to a coefficient.
    pub fn add_to(&mut self, cube: &DyadicCube, j: usize, value: T) -> Result<()> {
        let cur = self.coefficient(cube, j);
        self.set(cube, j, cur + value)
    }

    /// Removes and returns a coefficient.
    pub fn take(&mut self, key: &HaarKey) -> Result<T> {
        let v = self.coefficient_at(key);
        self.set(&key.cube, key.index, T::zero())?;
        Ok(v)
    }

    /// `Σ(f)` in `≺` order, with values.
    pub fn spectrum(&self) -> impl Iterator<Item = (HaarKey, &T)> + '_ {
        self.coeffs.iter().flat_map(|(cube, slots)| {
            slots
                .iter()
                .enumerate()
                .filter(|(_, v)| !v.is_zero())
                .map(move |(i, v)| (HaarKey::new(cube.clone(), i + 1), v))
        })
    }

    pub fn spectrum_len(&self) -> usize {
        self.coeffs.values().map(|s| s.iter().filter(|v| !v.is_zero()).count()).sum()
    }

    /// `Σ̂(f)`: cubes carrying at least one nonzero coefficient.
    pub fn cube_spectrum(&self) -> BTreeSet<DyadicCube> {
        self.coeffs.keys().cloned().collect()
    }

    pub fn cubes(&self) -> impl Iterator<Item = &DyadicCube> + '_ {
        self.coeffs.keys()
    }

    pub fn contains_cube(&self, cube: &DyadicCube) -> bool {
        self.coeffs.contains_key(cube)
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero() && self.coeffs.is_empty()
    }

    /// Deepest level in the cube-spectrum.
    pub fn max_level(&self) -> Option<u32> {
        self.coeffs.keys().map(DyadicCube::level).max()
    }

    pub fn scale(&self, factor: &T) -> Self {
        let mut out = Self::zero(self.dim);
        if factor.is_zero() {
            return out;
        }
        out.constant = self.constant.clone() * factor.clone();
        out.coeffs = self
            .coeffs
            .iter()
            .map(|(c, s)| (c.clone(), s.iter().map(|v| v.clone() * factor.clone()).collect()))
            .collect();
        out
    }

    fn combine(&self, other: &Self, negate_other: bool) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let mut out = self.clone();
        let sign = if negate_other { -1 } else { 1 };
        out.constant = out.constant.clone() + signed(&other.constant, sign);
        for (key, v) in other.spectrum() {
            out.add_to(&key.cube, key.index, signed(v, sign)).expect("same dimension");
        }
        out
    }

    /// Coefficient of `f` at `(I, j)` computed from the integral definition:
    /// `μ(I)·∫_I f·h_I^{(j)} = Σ_c sign_c · ∫_{I_c} f` over immediate successors.
    /// This never reads the stored `(I, j)` slot directly.
    pub fn coefficient_by_integral(&self, cube: &DyadicCube, j: usize) -> Result<T> {
        check_index(self.dim, j)?;
        Ok(cube
            .children()
            .iter()
            .enumerate()
            .fold(T::zero(), |acc, (c, child)| acc + signed(&self.integral(child), child_sign(c, j))))
    }

    /// Average of `f` over `cube`, i.e. the value of `P_I f` on `I`.
    pub fn mean_on(&self, cube: &DyadicCube) -> T {
        let mut mean = self.constant.clone();
        for level in 0..cube.level() {
            let ancestor = cube.ancestor_at(level);
            if let Some(slots) = self.coeffs.get(&ancestor) {
                let pos = cube.ancestor_at(level + 1).child_position().expect("not root");
                let scale = T::pow2(ancestor.log2_inv_measure());
                for (i, v) in slots.iter().enumerate() {
                    if !v.is_zero() {
                        mean = mean + signed(&(v.clone() * scale.clone()), child_sign(pos, i + 1));
                    }
                }
            }
        }
        mean
    }

    /// `∫_I f`.
    pub fn integral(&self, cube: &DyadicCube) -> T {
        self.mean_on(cube) * cube.measure::<T>()
    }

    fn has_spectrum_inside(&self, cell: &DyadicCube) -> bool {
        let start = DyadicCube::new(cell.level(), vec![0; self.dim]).expect("valid");
        self.coeffs.range(start..).any(|(c, _)| c.is_subset_of(cell))
    }

    /// The constant value of `f` on `cell`. Errors when some spectrum cube
    /// lies inside `cell`.
    pub fn evaluate(&self, cell: &DyadicCube) -> Result<T> {
        if cell.dim() != self.dim {
            return Err(Error::DimensionMismatch(self.dim, cell.dim()));
        }
        if self.has_spectrum_inside(cell) {
            return Err(Error::CellTooCoarse(cell.to_string()));
        }
        Ok(self.mean_on(cell))
    }

    /// Samples `f` on every cell of `level`.
    pub fn to_grid(&self, level: u32) -> Result<Grid<T>> {
        if self.max_level().is_some_and(|m| m >= level) {
            return Err(Error::CellTooCoarse(format!("level {level}")));
        }
        if (level as usize) * self.dim >= 40 {
            return Err(Error::MalformedGrid(format!("level {level} too fine to materialize")));
        }
        let n = 1usize << (level as usize * self.dim);
        let values = (0..n)
            .map(|i| {
                let cell = DyadicCube::new(level, cell_coords(i, self.dim, level)).expect("in range");
                self.mean_on(&cell)
            })
            .collect();
        Grid::new(self.dim, level, values)
    }

    /// The unique expansion with spectrum below `grid.level` reproducing `grid`.
    pub fn analysis(grid: &Grid<T>) -> Result<Self> {
        let Grid { dim, level, values } = grid;
        let (dim, level) = (*dim, *level);
        Grid::new(dim, level, values.clone())?;
        let mut out = Self::zero(dim);
        let mut means: Vec<T> = values.clone();
        let fan = 1usize << dim;
        for l in (0..level).rev() {
            let count = 1usize << (l as usize * dim);
            let mut parent_means = Vec::with_capacity(count);
            let child_weight = T::pow2(-(((l + 1) as usize * dim) as i64));
            for idx in 0..count {
                let coords = cell_coords(idx, dim, l);
                let cube = DyadicCube::new(l, coords.clone()).expect("in range");
                let child_means: Vec<T> = (0..fan)
                    .map(|c| {
                        let child = cube.child(c);
                        means[cell_index(child.coords(), l + 1)].clone()
                    })
                    .collect();
                let sum = child_means.iter().fold(T::zero(), |a, m| a + m.clone());
                parent_means.push(sum / T::from_usize(fan).expect("small"));
                for j in 1..fan {
                    let s = child_means
                        .iter()
                        .enumerate()
                        .fold(T::zero(), |a, (c, m)| a + signed(m, child_sign(c, j)));
                    out.set(&cube, j, s * child_weight.clone())?;
                }
            }
            means = parent_means;
        }
        out.constant = means.into_iter().next().expect("root mean");
        Ok(out)
    }

    /// Exact L1 norm over a region.
    pub fn norm(&self, region: &Region) -> T {
        match region {
            Region::Whole => self.norm_on(&DyadicCube::root(self.dim)),
            Region::Cube(c) => self.norm_on(c),
            Region::Difference(outer, inner) => self.norm_on(outer) - self.norm_on(inner),
        }
    }

    /// `‖f‖ = ∫_{[0,1)^d} |f|`.
    pub fn l1_norm(&self) -> T {
        self.norm_on(&DyadicCube::root(self.dim))
    }

    /// `‖f‖_I = ∫_I |f|`, descending only into cubes that contain spectrum.
    pub fn norm_on(&self, cube: &DyadicCube) -> T {
        let inside: Vec<&DyadicCube> = self.coeffs.keys().filter(|c| c.is_subset_of(cube)).collect();
        self.descend(cube, self.mean_on(cube), inside)
    }

    fn descend(&self, cube: &DyadicCube, mean: T, inside: Vec<&DyadicCube>) -> T {
        if inside.is_empty() {
            return mean.abs() * cube.measure::<T>();
        }
        let fan = 1usize << self.dim;
        let mut buckets: Vec<Vec<&DyadicCube>> = vec![Vec::new(); fan];
        for c in inside {
            if let Some(pos) = c.position_below(cube) {
                buckets[pos].push(c);
            }
        }
        let own = self.coeffs.get(cube);
        let scale = T::pow2(cube.log2_inv_measure());
        let mut total = T::zero();
        for (pos, bucket) in buckets.into_iter().enumerate() {
            let mut child_mean = mean.clone();
            if let Some(slots) = own {
                for (i, v) in slots.iter().enumerate() {
                    if !v.is_zero() {
                        child_mean = child_mean + signed(&(v.clone() * scale.clone()), child_sign(pos, i + 1));
                    }
                }
            }
            total = total + self.descend(&cube.child(pos), child_mean, bucket);
        }
        total
    }

    /// `P_I f`: `f` with every Haar term on a cube `Δ ⊆ I` removed.
    pub fn project_outside(&self, cube: &DyadicCube) -> Self {
        let mut out = self.clone();
        out.coeffs.retain(|c, _| !c.is_subset_of(cube));
        out
    }

    /// The `≺`-first pair attaining the largest `|c|` among Haar coefficients.
    /// With `include_constant`, the constant (as `(root, 0)`) is returned only
    /// when it is strictly larger than every Haar coefficient.
    pub fn max_coefficient(&self, include_constant: bool) -> Result<(HaarKey, T)> {
        let mut best: Option<(HaarKey, T)> = None;
        for (key, v) in self.spectrum() {
            let a = v.abs();
            if best.as_ref().is_none_or(|(_, b)| a > *b) {
                best = Some((key, a));
            }
        }
        if include_constant && !self.constant.is_zero() {
            let a = self.constant.abs();
            if best.as_ref().is_none_or(|(_, b)| a > *b) {
                best = Some((HaarKey::new(DyadicCube::root(self.dim), 0), a));
            }
        }
        let (key, _) = best.ok_or(Error::ZeroFunction)?;
        let value = self.coefficient_at(&key);
        Ok((key, value))
    }

    /// Keeps only coefficients on cubes satisfying `keep` (the constant is kept).
    pub fn retain_cubes(&mut self, mut keep: impl FnMut(&DyadicCube) -> bool) {
        self.coeffs.retain(|c, _| keep(c));
    }

    /// Inserts a full coefficient block for `cube` (all-zero blocks are skipped).
    pub(crate) fn insert_block(&mut self, cube: DyadicCube, block: Vec<T>) {
        debug_assert_eq!(block.len(), haar_count(self.dim));
        if block.iter().any(|v| !v.is_zero()) {
            self.coeffs.insert(cube, block);
        } else {
            self.coeffs.remove(&cube);
        }
    }

    pub(crate) fn blocks(&self) -> &BTreeMap<DyadicCube, Vec<T>> {
        &self.coeffs
    }
}

use num_traits::Zero;

impl<T: Scalar> Add for &HaarExpansion<T> {
    type Output = HaarExpansion<T>;
    fn add(self, rhs: Self) -> HaarExpansion<T> {
        self.combine(rhs, false)
    }
}

impl<T: Scalar> Sub for &HaarExpansion<T> {
    type Output = HaarExpansion<T>;
    fn sub(self, rhs: Self) -> HaarExpansion<T> {
        self.combine(rhs, true)
    }
}

impl<T: Scalar> Neg for &HaarExpansion<T> {
    type Output = HaarExpansion<T>;
    fn neg(self) -> HaarExpansion<T> {
        self.scale(&-T::one())
    }
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

    #[test]
    fn haar_value_examples() {
        let root = DyadicCube::root(2);
        assert_eq!(haar_value::<Rational>(&root, 3, &cube(1, &[0, 0])).unwrap(), q(1, 1));
        assert_eq!(haar_value::<Rational>(&root, 3, &cube(1, &[1, 0])).unwrap(), q(-1, 1));
        let quad = cube(1, &[0, 0]);
        assert_eq!(haar_value::<Rational>(&quad, 1, &cube(2, &[3, 3])).unwrap(), q(0, 1));
        assert_eq!(haar_value::<Rational>(&quad, 1, &cube(2, &[0, 1])).unwrap(), q(-4, 1));
        assert!(haar_value::<Rational>(&quad, 1, &root).is_err());
        assert!(haar_value::<Rational>(&quad, 4, &cube(2, &[0, 0])).is_err());
    }

    #[test]
    fn index_digits_follow_axis_order() {
        // j = 2 = ε_1·2 + ε_2·1 has ε_1 = 1: it flips along the first axis only.
        let root = DyadicCube::root(2);
        assert_eq!(haar_sign(&root, 2, &cube(1, &[1, 0])).unwrap(), -1);
        assert_eq!(haar_sign(&root, 2, &cube(1, &[0, 1])).unwrap(), 1);
        assert_eq!(haar_sign(&root, 1, &cube(1, &[0, 1])).unwrap(), -1);
    }

    #[test]
    fn coefficient_examples() {
        let c = cube(2, &[1, 2]);
        let h = HaarExpansion::<Rational>::haar(c.clone(), 2).unwrap();
        assert_eq!(h.coefficient(&c, 2), q(1, 1));
        assert_eq!(h.coefficient_by_integral(&c, 2).unwrap(), q(1, 1));
        assert_eq!(h.coefficient_by_integral(&c, 1).unwrap(), q(0, 1));
        let one = HaarExpansion::constant_function(2, q(1, 1));
        for l in 0..3 {
            for x in 0..1u128 << l {
                for j in 1..4 {
                    assert_eq!(one.coefficient_by_integral(&cube(l, &[x, 0]), j).unwrap(), q(0, 1));
                }
            }
        }
    }

    #[test]
    fn evaluate_requires_fine_enough_cell() {
        let f = HaarExpansion::<Rational>::haar(cube(1, &[0, 0]), 3).unwrap();
        assert!(f.evaluate(&cube(1, &[0, 0])).is_err());
        assert!(f.evaluate(&DyadicCube::root(2)).is_err());
        assert_eq!(f.evaluate(&cube(1, &[1, 1])).unwrap(), q(0, 1));
        assert_eq!(f.evaluate(&cube(2, &[0, 0])).unwrap(), q(4, 1));
        assert_eq!(f.evaluate(&cube(2, &[1, 0])).unwrap(), q(-4, 1));
        let c = HaarExpansion::constant_function(3, q(-7, 3));
        assert_eq!(c.evaluate(&DyadicCube::root(3)).unwrap(), q(-7, 3));
    }

    #[test]
    fn haar_functions_have_unit_norm() {
        for (l, coords) in [(0u32, vec![0u128, 0]), (1, vec![1, 0]), (3, vec![5, 2])] {
            for j in 1..4 {
                let h = HaarExpansion::<Rational>::haar(cube(l, &coords), j).unwrap();
                assert_eq!(h.l1_norm(), q(1, 1));
            }
        }
    }

    #[test]
    fn region_norms() {
        let f = HaarExpansion::<Rational>::haar(DyadicCube::root(2), 1).unwrap();
        let quad = cube(1, &[0, 0]);
        assert_eq!(f.norm(&Region::Cube(quad.clone())), q(1, 4));
        let r = Region::difference(DyadicCube::root(2), quad.clone()).unwrap();
        assert_eq!(f.norm(&r), q(3, 4));
        assert!(Region::difference(quad.clone(), quad).is_err());
    }

    #[test]
    fn analysis_examples() {
        let g = Grid::new(2, 2, vec![q(5, 2); 16]).unwrap();
        let f = HaarExpansion::analysis(&g).unwrap();
        assert_eq!(f, HaarExpansion::constant_function(2, q(5, 2)));

        let h = HaarExpansion::<Rational>::haar(cube(1, &[1, 0]), 3).unwrap();
        let back = HaarExpansion::analysis(&h.to_grid(2).unwrap()).unwrap();
        assert_eq!(back, h);
        assert!(Grid::new(2, 2, vec![q(1, 1); 15]).is_err());
        assert!(h.to_grid(1).is_err());
    }

    #[test]
    fn projection_examples() {
        let mut f = HaarExpansion::<Rational>::constant_function(2, q(3, 1));
        f.set(&cube(1, &[0, 1]), 2, q(1, 2)).unwrap();
        f.set(&cube(2, &[3, 3]), 1, q(-1, 3)).unwrap();
        let at_root = f.project_outside(&DyadicCube::root(2));
        assert_eq!(at_root, HaarExpansion::constant_function(2, q(3, 1)));
        assert_eq!(f.project_outside(&cube(1, &[0, 0])), f);
        let p = f.project_outside(&cube(1, &[1, 1]));
        assert_eq!(p.spectrum_len(), 1);
        assert_eq!(p.evaluate(&cube(1, &[1, 1])).unwrap(), f.mean_on(&cube(1, &[1, 1])));
    }

    #[test]
    fn max_coefficient_prefers_first_in_order() {
        let mut f = HaarExpansion::<Rational>::zero(2);
        f.set(&cube(2, &[0, 0]), 1, q(-1, 1)).unwrap();
        f.set(&cube(1, &[1, 0]), 3, q(1, 1)).unwrap();
        f.set(&cube(1, &[1, 0]), 2, q(1, 2)).unwrap();
        let (key, v) = f.max_coefficient(true).unwrap();
        assert_eq!(key, HaarKey::new(cube(1, &[1, 0]), 3));
        assert_eq!(v, q(1, 1));
        f.set_constant(q(1, 1));
        assert_eq!(f.max_coefficient(true).unwrap().0.index, 3);
        f.set_constant(q(-2, 1));
        assert_eq!(f.max_coefficient(true).unwrap(), (HaarKey::new(DyadicCube::root(2), 0), q(-2, 1)));
        assert_eq!(f.max_coefficient(false).unwrap().0.index, 3);
        assert_eq!(HaarExpansion::<Rational>::zero(1).max_coefficient(true), Err(Error::ZeroFunction));
    }

    #[test]
    fn float_scalars_work_too() {
        let mut f = HaarExpansion::<f64>::constant_function(1, 0.5);
        f.set(&DyadicCube::root(1), 1, 0.25).unwrap();
        assert!((f.l1_norm() - 0.5).abs() < 1e-12);
    }
}
