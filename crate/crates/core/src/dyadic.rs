//! Dyadic intervals and cubes, the order `≺`, chains, generalized chains,
//! minimal generalized chain representations (MGCR), sons and the
//! Λ-classes of a finite cube set.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Finest level a cube may sit at: coordinates are `u128`, so a level-128
/// cube still has a representable index. Such cubes cannot be refined.
pub const MAX_LEVEL: u32 = 128;

// Shifts by the full width of `u128` happen at `MAX_LEVEL`; they mean zero.
fn shr(k: u128, s: u32) -> u128 {
    k.checked_shr(s).unwrap_or(0)
}

fn shl(k: u128, s: u32) -> u128 {
    k.checked_shl(s).unwrap_or(0)
}

/// A one-dimensional dyadic interval `[k·2^{-n}, (k+1)·2^{-n})`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: u128,
}

impl DyadicInterval {
    pub fn new(level: u32, index: u128) -> Result<Self> {
        if level > MAX_LEVEL || shr(index, level) != 0 {
            return Err(Error::InvalidCube(format!("interval n{level}:{index}")));
        }
        Ok(Self { level, index })
    }
}

/// `[a,b) ≺ [c,d)` iff the first is longer, or equally long and further left.
pub fn interval_precedes(a: &DyadicInterval, b: &DyadicInterval) -> bool {
    a.level < b.level || (a.level == b.level && a.index < b.index)
}

/// A dyadic cube `∏ [k_i·2^{-n}, (k_i+1)·2^{-n})` in `[0,1)^d`.
///
/// The derived ordering is exactly `≺`: coarser cubes first, then
/// lexicographic on coordinates, since all axes of a cube share one level.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCube {
    level: u32,
    coords: Vec<u128>,
}

impl DyadicCube {
    pub fn new(level: u32, coords: Vec<u128>) -> Result<Self> {
        if coords.is_empty() || coords.len() > 16 {
            return Err(Error::InvalidCube(format!("dimension {}", coords.len())));
        }
        if level > MAX_LEVEL || coords.iter().any(|&k| shr(k, level) != 0) {
            return Err(Error::InvalidCube(format!("level {level}, coords {coords:?}")));
        }
        Ok(Self { level, coords })
    }

    /// The whole domain `[0,1)^d`.
    pub fn root(dim: usize) -> Self {
        assert!((1..=16).contains(&dim), "dimension out of range: {dim}");
        Self { level: 0, coords: vec![0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn coords(&self) -> &[u128] {
        &self.coords
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    /// The interval spanned along `axis`.
    pub fn side(&self, axis: usize) -> DyadicInterval {
        DyadicInterval { level: self.level, index: self.coords[axis] }
    }

    /// `log2(1/μ)`, i.e. `μ = 2^{-level·d}`.
    pub fn log2_inv_measure(&self) -> i64 {
        self.level as i64 * self.dim() as i64
    }

    pub fn measure<T: Scalar>(&self) -> T {
        T::pow2(-self.log2_inv_measure())
    }

    /// `self ⊆ other`.
    pub fn is_subset_of(&self, other: &DyadicCube) -> bool {
        if self.dim() != other.dim() || self.level < other.level {
            return false;
        }
        let shift = self.level - other.level;
        self.coords.iter().zip(&other.coords).all(|(&a, &b)| shr(a, shift) == b)
    }

    pub fn is_strict_subset_of(&self, other: &DyadicCube) -> bool {
        self.level > other.level && self.is_subset_of(other)
    }

    pub fn intersects(&self, other: &DyadicCube) -> bool {
        self.is_subset_of(other) || other.is_subset_of(self)
    }

    /// The smallest cube strictly containing `self`; `None` for the root.
    pub fn parent(&self) -> Option<DyadicCube> {
        if self.level == 0 {
            return None;
        }
        Some(Self { level: self.level - 1, coords: self.coords.iter().map(|k| k >> 1).collect() })
    }

    /// The ancestor at `level` (which must not exceed `self.level`).
    pub fn ancestor_at(&self, level: u32) -> DyadicCube {
        assert!(level <= self.level);
        let shift = self.level - level;
        Self { level, coords: self.coords.iter().map(|&k| shr(k, shift)).collect() }
    }

    /// The `2^d` immediate successors, lexicographic by coordinates.
    pub fn children(&self) -> Vec<DyadicCube> {
        assert!(self.level < MAX_LEVEL, "cannot refine beyond level {MAX_LEVEL}");
        let d = self.dim();
        (0..1usize << d).map(|c| self.child(c)).collect()
    }

    /// Immediate successor number `c` (0-based, lexicographic): bit `d-1-a`
    /// of `c` selects the upper half along axis `a`.
    pub fn child(&self, c: usize) -> DyadicCube {
        let d = self.dim();
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(a, &k)| (k << 1) | ((c >> (d - 1 - a)) & 1) as u128)
            .collect();
        Self { level: self.level + 1, coords }
    }

    /// Position (0-based) of `self` among the immediate successors of its parent.
    pub fn child_position(&self) -> Option<usize> {
        if self.level == 0 {
            return None;
        }
        let d = self.dim();
        Some(self.coords.iter().enumerate().fold(0, |acc, (a, &k)| acc | (((k & 1) as usize) << (d - 1 - a))))
    }

    /// Position of the immediate successor of `ancestor` that contains `self`.
    pub fn position_below(&self, ancestor: &DyadicCube) -> Option<usize> {
        if !self.is_strict_subset_of(ancestor) {
            return None;
        }
        self.ancestor_at(ancestor.level + 1).child_position()
    }

    /// Translate a cube lying inside `from` to the same relative position inside `to`.
    /// `from` and `to` must be at the same level.
    pub fn translate(&self, from: &DyadicCube, to: &DyadicCube) -> DyadicCube {
        debug_assert!(self.is_subset_of(from) && from.level == to.level);
        let shift = self.level - from.level;
        let coords = self
            .coords
            .iter()
            .zip(from.coords.iter().zip(&to.coords))
            .map(|(&k, (&f, &t))| shl(t, shift) | (k - shl(f, shift)))
            .collect();
        Self { level: self.level, coords }
    }
}

impl fmt::Display for DyadicCube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d{}:n{}:(", self.dim(), self.level)?;
        for (i, k) in self.coords.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{k}")?;
        }
        f.write_str(")")
    }
}

impl FromStr for DyadicCube {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("cube {s:?}"));
        let mut parts = s.trim().splitn(3, ':');
        let dim: usize = parts.next().and_then(|p| p.strip_prefix('d')).and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let level: u32 = parts.next().and_then(|p| p.strip_prefix('n')).and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let body = parts.next().and_then(|p| p.strip_prefix('(')).and_then(|p| p.strip_suffix(')')).ok_or_else(bad)?;
        let coords = body.split(',').map(|k| k.trim().parse::<u128>()).collect::<std::result::Result<Vec<_>, _>>().map_err(|_| bad())?;
        if coords.len() != dim {
            return Err(bad());
        }
        DyadicCube::new(level, coords)
    }
}

/// `I ≺ J`. Errors on a dimension mismatch.
pub fn cube_precedes(a: &DyadicCube, b: &DyadicCube) -> Result<bool> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a < b)
}

/// A Haar function label `(cube, index)`. Index `0` on the root denotes the
/// constant function; indices `1..2^d` are the Haar functions proper.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HaarKey {
    pub cube: DyadicCube,
    pub index: usize,
}

impl HaarKey {
    pub fn new(cube: DyadicCube, index: usize) -> Self {
        Self { cube, index }
    }
}

/// `(I,i) ≺ (J,j)` iff `I ≺ J`, or `I = J` and `i < j`.
pub fn index_precedes(p: &HaarKey, q: &HaarKey) -> bool {
    p < q
}

/// All cubes `K` with `inner ⊆ K ⊆ outer`, by decreasing measure.
pub fn chain(outer: &DyadicCube, inner: &DyadicCube) -> Result<Vec<DyadicCube>> {
    if !inner.is_subset_of(outer) {
        return Err(Error::NotNested(format!("{inner} is not inside {outer}")));
    }
    Ok((outer.level..=inner.level).map(|l| inner.ancestor_at(l)).collect())
}

/// A generalized chain: a cube set closed under chains up to its maximal cube.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneralizedChain {
    pub cubes: BTreeSet<DyadicCube>,
    pub maximal_cube: DyadicCube,
    pub father: Option<DyadicCube>,
}

impl GeneralizedChain {
    /// Validates `cubes` against the definition; `None` if it is not a generalized chain.
    pub fn from_cubes(cubes: BTreeSet<DyadicCube>) -> Option<Self> {
        let maximal_cube = cubes.first()?.clone();
        for c in &cubes {
            if !c.is_subset_of(&maximal_cube) {
                return None;
            }
            let mut cur = c.clone();
            while cur != maximal_cube {
                cur = cur.parent()?;
                if !cubes.contains(&cur) {
                    return None;
                }
            }
        }
        let father = maximal_cube.parent();
        Some(Self { cubes, maximal_cube, father })
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// The union criterion: two generalized chains form a generalized chain
    /// iff they overlap, or the father of one lies in the other.
    pub fn mergeable_with(&self, other: &GeneralizedChain) -> bool {
        self.cubes.iter().any(|c| other.cubes.contains(c))
            || self.father.as_ref().is_some_and(|f| other.cubes.contains(f))
            || other.father.as_ref().is_some_and(|f| self.cubes.contains(f))
    }
}

/// MGCR together with the son-count classes of the same set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CubeSetAnalysis {
    pub mgcr: Vec<GeneralizedChain>,
    pub lambda0: BTreeSet<DyadicCube>,
    pub lambda1: BTreeSet<DyadicCube>,
    pub lambda2: BTreeSet<DyadicCube>,
}

/// Minimal generalized chain representation of `set`, plus `Λ0/Λ1/Λ2`.
///
/// Cubes are processed in `≺` order. A singleton `{J}` has father
/// `parent(J)`, and because every coarser cube has already been placed, the
/// only possible merge is with the chain holding `parent(J)`.
pub fn mgcr(set: &BTreeSet<DyadicCube>) -> Result<CubeSetAnalysis> {
    if set.is_empty() {
        return Err(Error::EmptyCubeSet);
    }
    check_same_dim(set)?;
    let mut owner: BTreeMap<&DyadicCube, usize> = BTreeMap::new();
    let mut chains: Vec<BTreeSet<DyadicCube>> = Vec::new();
    for cube in set {
        let slot = match cube.parent().and_then(|p| owner.get(&p).copied()) {
            Some(id) => id,
            None => {
                chains.push(BTreeSet::new());
                chains.len() - 1
            }
        };
        chains[slot].insert(cube.clone());
        owner.insert(cube, slot);
    }
    let mgcr = chains
        .into_iter()
        .map(|c| GeneralizedChain::from_cubes(c).expect("merge preserves the chain property"))
        .collect();

    let counts = son_counts(set);
    let mut analysis = CubeSetAnalysis { mgcr, lambda0: BTreeSet::new(), lambda1: BTreeSet::new(), lambda2: BTreeSet::new() };
    for cube in set {
        let class = match counts.get(cube).copied().unwrap_or(0) {
            0 => &mut analysis.lambda0,
            1 => &mut analysis.lambda1,
            _ => &mut analysis.lambda2,
        };
        class.insert(cube.clone());
    }
    Ok(analysis)
}

fn check_same_dim(set: &BTreeSet<DyadicCube>) -> Result<()> {
    let mut it = set.iter();
    if let Some(first) = it.next() {
        for c in it {
            if c.dim() != first.dim() {
                return Err(Error::DimensionMismatch(first.dim(), c.dim()));
            }
        }
    }
    Ok(())
}

/// The nearest strict ancestor of `cube` that belongs to `set`.
fn set_parent(cube: &DyadicCube, set: &BTreeSet<DyadicCube>) -> Option<DyadicCube> {
    let mut cur = cube.parent();
    while let Some(c) = cur {
        if set.contains(&c) {
            return Some(c);
        }
        cur = c.parent();
    }
    None
}

fn son_counts(set: &BTreeSet<DyadicCube>) -> BTreeMap<DyadicCube, usize> {
    let mut counts = BTreeMap::new();
    for cube in set {
        if let Some(p) = set_parent(cube, set) {
            *counts.entry(p).or_insert(0) += 1;
        }
    }
    counts
}

/// Sons of `cube` with respect to `set`: members `J ⊊ cube` whose chain to
/// `cube` meets `set` only at its endpoints.
pub fn sons(cube: &DyadicCube, set: &BTreeSet<DyadicCube>) -> Result<BTreeSet<DyadicCube>> {
    if !set.contains(cube) {
        return Err(Error::NotMember(cube.to_string()));
    }
    Ok(set
        .iter()
        .filter(|j| j.is_strict_subset_of(cube) && set_parent(j, set).as_ref() == Some(cube))
        .cloned()
        .collect())
}

/// `sons(P, S)`: union of the sons of every member of `p`.
pub fn sons_of_set(p: &BTreeSet<DyadicCube>, set: &BTreeSet<DyadicCube>) -> Result<BTreeSet<DyadicCube>> {
    let mut out = BTreeSet::new();
    for c in p {
        out.extend(sons(c, set)?);
    }
    Ok(out)
}

/// The `k`-fold iterate `sons^{(k)}(P, S)`; `k = 0` returns `p` itself.
pub fn iterated_sons(p: &BTreeSet<DyadicCube>, set: &BTreeSet<DyadicCube>, k: usize) -> Result<BTreeSet<DyadicCube>> {
    let mut cur = p.clone();
    for _ in 0..k {
        if cur.is_empty() {
            break;
        }
        cur = sons_of_set(&cur, set)?;
    }
    Ok(cur)
}

/// Comparison helper used when sorting fathers by measure: larger level
/// (smaller measure) first, then `≺`.
pub fn by_increasing_measure(a: &DyadicCube, b: &DyadicCube) -> Ordering {
    b.level.cmp(&a.level).then_with(|| a.cmp(b))
}
