//! Facet enumeration of `conv(I(G))` by the double description method.
//!
//! Valid inequalities `h.x <= b` form the cone `{(h, b) : h.s - b <= 0}` over
//! all vertices `s`; its extreme rays are exactly the facets. Arithmetic is
//! exact over integers, so the facet list has no rounding ambiguity.

use super::{ConstraintKind, HalfspaceConstraint};
use crate::error::{Error, Result};
use crate::graph::IndependentSetFamily;

pub const FACET_CAP: usize = 6;

#[derive(Clone, Debug)]
struct Ray {
    v: Vec<i64>,
    zero: u128,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn normalize(v: Vec<i128>) -> Result<Vec<i64>> {
    let g = v.iter().fold(0i128, |g, &x| gcd(g, x));
    let g = g.max(1);
    v.into_iter()
        .map(|x| {
            i64::try_from(x / g)
                .map_err(|_| Error::DegenerateHull("facet coefficient overflow".into()))
        })
        .collect()
}

fn row_dot(row: &[i64], v: &[i64]) -> i128 {
    row.iter()
        .zip(v)
        .map(|(&a, &b)| a as i128 * b as i128)
        .sum()
}

/// Rank of a set of 0/1 points after translating by the first one.
fn affine_rank(points: &[Vec<f64>]) -> usize {
    let Some(first) = points.first() else {
        return 0;
    };
    let mut rows: Vec<Vec<f64>> = points[1..]
        .iter()
        .map(|q| q.iter().zip(first).map(|(a, b)| a - b).collect())
        .collect();
    let cols = first.len();
    let mut rank = 0;
    for c in 0..cols {
        let Some(piv) =
            (rank..rows.len()).max_by(|&a, &b| rows[a][c].abs().total_cmp(&rows[b][c].abs()))
        else {
            break;
        };
        if rows[piv][c].abs() < 1e-9 {
            continue;
        }
        rows.swap(rank, piv);
        let pr = rows[rank].clone();
        for r in rows.iter_mut().skip(rank + 1) {
            let f = r[c] / pr[c];
            for (x, y) in r.iter_mut().zip(&pr) {
                *x -= f * y;
            }
        }
        rank += 1;
    }
    rank
}

/// All facets of the marginal polytope: the `p` nonnegativity facets first,
/// then `h.x <= 1` facets in lexicographic order of `h`.
pub fn enumerate_facets(family: &IndependentSetFamily) -> Result<Vec<HalfspaceConstraint>> {
    let p = family.p();
    if p > FACET_CAP {
        return Err(Error::FacetCap { p, cap: FACET_CAP });
    }
    let sets = family.sets();
    if sets.len() > 128 {
        return Err(Error::FacetCap { p, cap: FACET_CAP });
    }
    let d = p + 1;
    let rows: Vec<Vec<i64>> = sets
        .iter()
        .map(|&s| {
            let mut r: Vec<i64> = (0..p).map(|j| ((s >> j) & 1) as i64).collect();
            r.push(-1);
            r
        })
        .collect();
    let index_of = |mask: u64| sets.iter().position(|&s| s == mask);
    let mut processed: u128 = 0;
    for mask in std::iter::once(0u64).chain((0..p).map(|j| 1u64 << j)) {
        let k = index_of(mask)
            .ok_or_else(|| Error::DegenerateHull(format!("vertex {mask:#b} missing")))?;
        processed |= 1u128 << k;
    }
    let zero_set = |v: &[i64], processed: u128| -> u128 {
        (0..rows.len())
            .filter(|&k| processed >> k & 1 == 1 && row_dot(&rows[k], v) == 0)
            .fold(0u128, |z, k| z | 1u128 << k)
    };
    let mut rays: Vec<Ray> = Vec::new();
    for j in 0..p {
        let mut v = vec![0i64; d];
        v[j] = -1;
        rays.push(Ray {
            zero: zero_set(&v, processed),
            v,
        });
    }
    let v = vec![1i64; d];
    rays.push(Ray {
        zero: zero_set(&v, processed),
        v,
    });

    for k in 0..rows.len() {
        if processed >> k & 1 == 1 {
            continue;
        }
        let vals: Vec<i128> = rays.iter().map(|r| row_dot(&rows[k], &r.v)).collect();
        let pos: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] > 0).collect();
        let bit = 1u128 << k;
        if pos.is_empty() {
            for (r, &val) in rays.iter_mut().zip(&vals) {
                if val == 0 {
                    r.zero |= bit;
                }
            }
            processed |= bit;
            continue;
        }
        let neg: Vec<usize> = (0..rays.len()).filter(|&i| vals[i] < 0).collect();
        let mut fresh = Vec::new();
        for &a in &pos {
            for &b in &neg {
                let common = rays[a].zero & rays[b].zero;
                if (common.count_ones() as usize) + 2 < d {
                    continue;
                }
                let adjacent = rays
                    .iter()
                    .enumerate()
                    .all(|(i, r)| i == a || i == b || r.zero & common != common);
                if !adjacent {
                    continue;
                }
                let combo: Vec<i128> = rays[a]
                    .v
                    .iter()
                    .zip(&rays[b].v)
                    .map(|(&x, &y)| vals[a] * y as i128 - vals[b] * x as i128)
                    .collect();
                fresh.push(Ray {
                    v: normalize(combo)?,
                    zero: common | bit,
                });
            }
        }
        let mut next: Vec<Ray> = Vec::with_capacity(rays.len() + fresh.len());
        for (mut r, &val) in rays.into_iter().zip(&vals) {
            if val < 0 {
                next.push(r);
            } else if val == 0 {
                r.zero |= bit;
                next.push(r);
            }
        }
        next.extend(fresh);
        rays = next;
        processed |= bit;
    }

    let mut nonneg = Vec::new();
    let mut upper = Vec::new();
    for r in &rays {
        let (h, b) = (&r.v[..p], r.v[p]);
        if b > 0 {
            let h: Vec<f64> = h.iter().map(|&x| x as f64 / b as f64).collect();
            upper.push(HalfspaceConstraint {
                h,
                offset: 1.0,
                kind: ConstraintKind::Facet,
            });
        } else {
            let support: Vec<usize> = (0..p).filter(|&j| h[j] != 0).collect();
            match support.as_slice() {
                [j] if b == 0 && h[*j] < 0 => nonneg.push(*j),
                _ => {
                    return Err(Error::DegenerateHull(format!(
                        "unexpected extreme inequality {h:?} <= {b}"
                    )))
                }
            }
        }
    }
    nonneg.sort_unstable();
    nonneg.dedup();
    if nonneg.len() != p {
        return Err(Error::DegenerateHull(format!(
            "found {} nonnegativity facets for p = {p}",
            nonneg.len()
        )));
    }
    upper.sort_by(|a, b| {
        a.h.iter()
            .zip(&b.h)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut out: Vec<HalfspaceConstraint> = nonneg
        .into_iter()
        .map(|j| HalfspaceConstraint::nonnegativity(p, j))
        .collect();
    out.extend(upper);

    let vertices: Vec<Vec<f64>> = (0..sets.len()).map(|k| family.indicator(k)).collect();
    for f in &out {
        let tight: Vec<Vec<f64>> = vertices
            .iter()
            .filter(|v| (f.value(v) - f.offset).abs() <= 1e-9)
            .cloned()
            .collect();
        if vertices.iter().any(|v| f.value(v) > f.offset + 1e-9) || affine_rank(&tight) + 1 < p {
            return Err(Error::DegenerateHull(format!(
                "constraint {:?} is not a facet",
                f.h
            )));
        }
    }
    Ok(out)
}

/// Facets whose normal leaves `[0,1]^p` after scaling to offset 1.
pub fn normalization_findings(facets: &[HalfspaceConstraint]) -> Vec<HalfspaceConstraint> {
    facets
        .iter()
        .filter(|f| f.kind == ConstraintKind::Facet)
        .filter(|f| f.h.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)))
        .cloned()
        .collect()
}
