//! Library results against brute-force oracles written straight from the
//! definitions: pointwise grids, exhaustive partitions, sign enumeration.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use haar_wtga::constructions::{build_rademacher_product, khinchine_l1};
use haar_wtga::dyadic::{mgcr, sons};
use haar_wtga::greedy::{run, uniform_bound_constant};
use haar_wtga::symmetry::copy_from_successor;
use haar_wtga::verify::gen_expansion;
use haar_wtga::{DyadicCube, Expansion, Params, Rational, Region, Scalar, SelectionRule};

fn q(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

fn cube(level: u32, coords: &[u128]) -> DyadicCube {
    DyadicCube::new(level, coords.to_vec()).unwrap()
}

fn cells(dim: usize, level: u32) -> Vec<DyadicCube> {
    let side = 1u128 << level;
    (0..side.pow(dim as u32))
        .map(|mut n| {
            let mut coords = vec![0; dim];
            for c in coords.iter_mut().rev() {
                *c = n % side;
                n /= side;
            }
            DyadicCube::new(level, coords).unwrap()
        })
        .collect()
}

fn contains(outer: &DyadicCube, inner: &DyadicCube) -> bool {
    inner.level() >= outer.level()
        && inner.coords().iter().zip(outer.coords()).all(|(&a, &b)| a >> (inner.level() - outer.level()) == b)
}

/// `h_I^{(j)}` on a cell at least one level finer than `I`, as a product over
/// axes: axis `a` contributes `±1` when bit `d-1-a` of `j` is set, `+` on the
/// lower half. Scaled so that `∫|h_I| = 1`.
fn haar_oracle(i: &DyadicCube, j: usize, cell: &DyadicCube) -> Rational {
    if !contains(i, cell) {
        return Rational::zero();
    }
    let d = i.dim();
    let shift = cell.level() - i.level() - 1;
    let mut sign = 1;
    for a in 0..d {
        let upper = (cell.coords()[a] >> shift) & 1 == 1;
        if (j >> (d - 1 - a)) & 1 == 1 && upper {
            sign = -sign;
        }
    }
    Rational::from_integer(sign.into()) / i.measure::<Rational>()
}

fn pointwise(f: &Expansion, level: u32) -> Vec<(DyadicCube, Rational)> {
    cells(f.dim(), level)
        .into_iter()
        .map(|cell| {
            let v = f.spectrum().fold(f.constant().clone(), |acc, (k, c)| acc + c * haar_oracle(&k.cube, k.index, &cell));
            (cell, v)
        })
        .collect()
}

fn l1_on(values: &[(DyadicCube, Rational)], keep: impl Fn(&DyadicCube) -> bool) -> Rational {
    values.iter().filter(|(c, _)| keep(c)).fold(Rational::zero(), |acc, (c, v)| acc + v.abs() * c.measure::<Rational>())
}

fn random_f(seed: u64, dim: usize, level: u32) -> Expansion {
    gen_expansion(seed, dim, level, 12, &q(2, 1))
}

#[test]
fn grid_values_and_norms_match_the_pointwise_definition() {
    for seed in 0..40 {
        let dim = 1 + (seed % 3) as usize;
        let f = random_f(seed, dim, if dim == 3 { 2 } else { 3 });
        let level = f.max_level().map_or(1, |l| l + 1);
        let oracle = pointwise(&f, level);
        let grid = f.to_grid(level).unwrap();
        for (cell, v) in &oracle {
            assert_eq!(&grid.values[grid.index_of(cell)], v, "seed {seed} cell {cell}");
        }
        assert_eq!(f.l1_norm(), l1_on(&oracle, |_| true), "seed {seed}");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lv = rng.gen_range(0..level);
        let outer = cube(lv, &(0..dim).map(|_| rng.gen_range(0..1u128 << lv)).collect::<Vec<_>>());
        assert_eq!(f.norm_on(&outer), l1_on(&oracle, |c| contains(&outer, c)));
        if lv + 1 < level {
            let inner = outer.child(rng.gen_range(0..1 << dim));
            let region = Region::difference(outer.clone(), inner.clone()).unwrap();
            assert_eq!(f.norm(&region), l1_on(&oracle, |c| contains(&outer, c) && !contains(&inner, c)));
        }
    }
}

#[test]
fn coefficients_are_recovered_by_integration_against_the_oracle() {
    for seed in 100..120 {
        let f = random_f(seed, 2, 3);
        let oracle = pointwise(&f, 4);
        for (key, c) in f.spectrum() {
            let inner = oracle.iter().fold(Rational::zero(), |acc, (cell, v)| {
                acc + v * haar_oracle(&key.cube, key.index, cell) * cell.measure::<Rational>()
            });
            // ∫ h_I h_I = 1/μ(I) under this normalization.
            assert_eq!(inner * key.cube.measure::<Rational>(), *c);
        }
    }
}

fn is_generalized_chain(r: &BTreeSet<DyadicCube>) -> bool {
    r.iter().any(|top| {
        r.iter().all(|j| {
            contains(top, j) && (top.level()..=j.level()).all(|l| r.contains(&j.ancestor_at(l)))
        })
    })
}

fn set_partitions(items: &[DyadicCube]) -> Vec<Vec<BTreeSet<DyadicCube>>> {
    let Some((first, rest)) = items.split_first() else {
        return vec![vec![]];
    };
    let mut out = Vec::new();
    for p in set_partitions(rest) {
        for i in 0..p.len() {
            let mut p2 = p.clone();
            p2[i].insert(first.clone());
            out.push(p2);
        }
        let mut p2 = p.clone();
        p2.push(BTreeSet::from([first.clone()]));
        out.push(p2);
    }
    out
}

fn random_small_set(rng: &mut ChaCha8Rng) -> BTreeSet<DyadicCube> {
    let dim = rng.gen_range(1..=2);
    let size = rng.gen_range(1..=7);
    let mut set: BTreeSet<DyadicCube> = BTreeSet::new();
    while set.len() < size {
        let level = rng.gen_range(0..=3u32);
        let c = cube(level, &(0..dim).map(|_| rng.gen_range(0..1u128 << level)).collect::<Vec<_>>());
        // Bias toward nested configurations.
        let c = match set.iter().nth(rng.gen_range(0..set.len().max(1))) {
            Some(base) if rng.gen_bool(0.6) && base.level() < 4 => base.child(rng.gen_range(0..1 << dim)),
            _ => c,
        };
        set.insert(c);
    }
    set
}

#[test]
fn mgcr_is_the_unique_partition_satisfying_the_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..150 {
        let set = random_small_set(&mut rng);
        let items: Vec<_> = set.iter().cloned().collect();
        let valid: Vec<BTreeSet<BTreeSet<DyadicCube>>> = set_partitions(&items)
            .into_iter()
            .filter(|p| {
                p.iter().all(is_generalized_chain)
                    && p.iter().enumerate().all(|(i, a)| {
                        p[i + 1..].iter().all(|b| !is_generalized_chain(&a.union(b).cloned().collect()))
                    })
            })
            .map(|p| p.into_iter().collect())
            .collect();
        assert_eq!(valid.len(), 1, "{set:?}");
        let got: BTreeSet<_> = mgcr(&set).unwrap().mgcr.into_iter().map(|c| c.cubes).collect();
        assert_eq!(got, valid[0]);
    }
}

#[test]
fn sons_and_lambda_classes_match_the_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..150 {
        let set = random_small_set(&mut rng);
        let analysis = mgcr(&set).unwrap();
        let (mut l0, mut l1, mut l2) = (BTreeSet::new(), BTreeSet::new(), BTreeSet::new());
        for i in &set {
            let expected: BTreeSet<_> = set
                .iter()
                .filter(|j| {
                    *j != i && contains(i, j) && (i.level() + 1..j.level()).all(|l| !set.contains(&j.ancestor_at(l)))
                })
                .cloned()
                .collect();
            assert_eq!(sons(i, &set).unwrap(), expected);
            match expected.len() {
                0 => l0.insert(i.clone()),
                1 => l1.insert(i.clone()),
                _ => l2.insert(i.clone()),
            };
        }
        assert_eq!((analysis.lambda0, analysis.lambda1, analysis.lambda2), (l0.clone(), l1, l2.clone()));
        assert!(l2.len() < l0.len());
    }
}

#[test]
fn khinchine_values_match_sign_enumeration() {
    for n in 1..=14u32 {
        let total: i64 = (0..1u64 << n).map(|m| (n as i64 - 2 * m.count_ones() as i64).abs()).sum();
        assert_eq!(khinchine_l1(n), Rational::new(total.into(), (1i64 << n).into()), "n = {n}");
    }
}

#[test]
fn rademacher_product_matches_pointwise_product() {
    let u = q(2, 5);
    for n in 1..=8u32 {
        let f = build_rademacher_product::<Rational>(n, &u).unwrap();
        let grid = f.to_grid(n).unwrap();
        for k in 0..1u128 << n {
            // r_m is + on cell k when bit n-m of k is clear.
            let v = (1..=n).fold(Rational::one(), |acc, m| {
                let r = if (k >> (n - m)) & 1 == 0 { Rational::one() } else { -Rational::one() };
                acc * (Rational::one() + u.clone() * r)
            });
            assert_eq!(grid.values[k as usize], v, "n = {n}, k = {k}");
        }
    }
}

#[test]
fn copy_operator_repeats_one_successor_pointwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 200..230 {
        let dim = rng.gen_range(1..=2);
        let f = random_f(seed, dim, 3);
        let lv = rng.gen_range(0..=2u32);
        let delta = cube(lv, &(0..dim).map(|_| rng.gen_range(0..1u128 << lv)).collect::<Vec<_>>());
        let i = rng.gen_range(1..=1usize << dim);
        let g = copy_from_successor(&f, &delta, i).unwrap();
        let level = 4;
        let before = f.to_grid(level).unwrap();
        let after = g.to_grid(level).unwrap();
        let source = delta.child(i - 1);
        for cell in cells(dim, level) {
            let expected = if contains(&delta, &cell) {
                let from = cell.ancestor_at(lv + 1);
                cell.translate(&from, &source)
            } else {
                cell.clone()
            };
            assert_eq!(after.values[after.index_of(&cell)], before.values[before.index_of(&expected)]);
        }
    }
}

type Dense = (Rational, BTreeMap<(DyadicCube, usize), Rational>);

fn dense(f: &Expansion) -> Dense {
    (f.constant().clone(), f.spectrum().map(|(k, v)| ((k.cube, k.index), v.clone())).collect())
}

/// The algorithm on a plain coefficient map, returning `(Δ̃_m, i_m)` per step.
fn naive_greedy(
    f: &Expansion,
    s: &Rational,
    t: &Rational,
    rule: SelectionRule,
    with_constant: bool,
) -> Vec<(DyadicCube, usize)> {
    let dim = f.dim();
    let root = DyadicCube::root(dim);
    let (mut constant, mut coeffs) = dense(f);
    let mut picks = Vec::new();
    loop {
        let top = coeffs.iter().fold(None::<(&(DyadicCube, usize), &Rational)>, |best, (k, v)| match best {
            Some((_, b)) if b.abs() >= v.abs() => best,
            _ => Some((k, v)),
        });
        let constant_live = with_constant && !constant.is_zero();
        let constant_wins = constant_live && top.is_none_or(|(_, v)| constant.abs() > v.abs());
        if constant_wins {
            picks.push((root.clone(), 0));
            constant = Rational::zero();
            continue;
        }
        let Some(((delta, _), c)) = top.map(|(k, v)| (k.clone(), v.abs())) else { break };
        let level_max = |cube: &DyadicCube| {
            (1..(1 << dim)).map(|i| coeffs.get(&(cube.clone(), i)).map_or(Rational::zero(), |v| v.abs())).max().unwrap()
        };
        let mut tilde = delta.clone();
        while let Some(p) = tilde.parent() {
            if level_max(&p) >= s * &c {
                tilde = p;
            } else {
                break;
            }
        }
        let mut cands: Vec<(usize, Rational)> =
            (1..(1 << dim)).filter_map(|i| coeffs.get(&(tilde.clone(), i)).map(|v| (i, v.abs()))).collect();
        if tilde.is_root() && constant_live {
            cands.insert(0, (0, constant.abs()));
        }
        let threshold = match rule {
            SelectionRule::A => t / s * cands.iter().map(|(_, v)| v.clone()).max().unwrap(),
            SelectionRule::B => t * &c,
        };
        let (i, _) = cands
            .into_iter()
            .filter(|(_, v)| *v >= threshold)
            .fold(None::<(usize, Rational)>, |best, (i, v)| match best {
                Some((_, ref b)) if *b <= v => best,
                _ => Some((i, v)),
            })
            .expect("the largest candidate always qualifies");
        if i == 0 {
            constant = Rational::zero();
        } else {
            coeffs.remove(&(tilde.clone(), i));
        }
        picks.push((tilde, i));
    }
    picks
}

#[test]
fn greedy_selections_match_a_direct_implementation() {
    let params = [(q(3, 4), q(1, 2)), (q(1, 2), q(1, 4)), (q(9, 10), q(1, 10)), (q(2, 3), q(3, 5))];
    for seed in 0..120u64 {
        let dim = 1 + (seed % 3) as usize;
        let f = gen_expansion(seed, dim, 4, 20, &q(3, 1));
        let (s, t) = params[(seed % 4) as usize].clone();
        for rule in [SelectionRule::A, SelectionRule::B] {
            for with_constant in [true, false] {
                let p = Params::new(s.clone(), t.clone()).unwrap().with_rule(rule).with_constant(with_constant);
                let trace = run(&f, &p).unwrap();
                let got: Vec<_> = trace.steps.iter().map(|r| (r.tilde_delta_m.clone(), r.i_m)).collect();
                assert_eq!(got, naive_greedy(&f, &s, &t, rule, with_constant), "seed {seed} {rule:?} {with_constant}");
            }
        }
    }
}

#[test]
fn uniform_constant_for_the_default_parameters() {
    assert_eq!(uniform_bound_constant(2, &q(3, 4), &q(1, 2)), q(8470, 1));
}

#[test]
fn finest_level_cubes_are_representable() {
    let deep = cube(128, &[u128::MAX, 0]);
    assert_eq!(deep.ancestor_at(0), DyadicCube::root(2));
    assert!(deep.is_subset_of(&DyadicCube::root(2)));
    assert_eq!(deep.parent().unwrap().level(), 127);
    assert!(DyadicCube::new(129, vec![0, 0]).is_err());
    let mut f = Expansion::zero(2);
    assert!(f.set(&deep, 1, q(1, 1)).is_err());
    f.set(&deep.parent().unwrap(), 1, q(1, 1)).unwrap();
    assert_eq!(f.l1_norm(), q(1, 1));
}
