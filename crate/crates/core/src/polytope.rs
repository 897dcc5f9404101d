//! Exact vertex enumeration for the admissible polytope.
//!
//! Input is an H-polytope {x : A x <= b, x >= 0}. The polytope is
//! homogenized to the pointed cone {(x, t) : A x - b t <= 0, x >= 0, t >= 0}
//! and extreme rays are maintained by the double description method,
//! starting from the nonnegative orthant (whose extreme rays are the unit
//! vectors) and inserting one load constraint at a time. Rays are primitive
//! integer vectors; adjacency of a positive/negative pair is the standard
//! combinatorial test on shared tight constraints.

use num::bigint::BigInt;
use num::{BigRational, Integer, One, Signed, Zero};
use std::collections::BTreeSet;

use crate::ratio::Rational;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct DdCaps {
    pub max_dim: usize,
    pub max_rays: usize,
}

impl Default for DdCaps {
    fn default() -> Self {
        DdCaps {
            max_dim: 20,
            max_rays: 200_000,
        }
    }
}

/// All vertices of {x : a x <= b, x >= 0}, exact and deduplicated, in
/// deterministic order. The polytope must be bounded.
pub fn enumerate_vertices(
    a: &[Vec<Rational>],
    b: &[Rational],
    caps: &DdCaps,
) -> Result<Vec<Vec<Rational>>> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!(
            "{} constraint rows, {} bounds",
            a.len(),
            b.len()
        )));
    }
    let d = a.first().map_or(0, |r| r.len());
    if a.iter().any(|r| r.len() != d) {
        return Err(Error::Dimension("ragged constraint matrix".into()));
    }
    if d == 0 {
        return Err(Error::Validation("empty polytope description".into()));
    }
    if d > caps.max_dim {
        return Err(Error::SizeCap(format!(
            "vertex enumeration capped at {} dimensions, got {d}",
            caps.max_dim
        )));
    }

    // Constraint list over cone coordinates (x_0..x_{d-1}, t), as integer
    // rows c with the meaning c·v <= 0. Orthant rows first.
    let mut cons: Vec<Vec<BigInt>> = Vec::new();
    for i in 0..=d {
        let mut c = vec![BigInt::zero(); d + 1];
        c[i] = -BigInt::one();
        cons.push(c);
    }
    for (row, bound) in a.iter().zip(b) {
        let mut denom = bound.denom().clone();
        for x in row {
            denom = denom.lcm(x.denom());
        }
        let mut c: Vec<BigInt> = row
            .iter()
            .map(|x| x.numer() * (&denom / x.denom()))
            .collect();
        c.push(-(bound.numer() * (&denom / bound.denom())));
        if c.iter().all(|x| x.is_zero()) {
            if bound.is_negative() {
                return Err(Error::Validation("constraint 0 <= negative".into()));
            }
            continue;
        }
        cons.push(c);
    }
    if cons.len() > 64 {
        return Err(Error::SizeCap(format!(
            "vertex enumeration supports at most {} constraints, got {}",
            64 - d - 1,
            cons.len() - d - 1
        )));
    }

    // Extreme rays of the orthant.
    let mut rays: Vec<Vec<BigInt>> = (0..=d)
        .map(|i| {
            let mut r = vec![BigInt::zero(); d + 1];
            r[i] = BigInt::one();
            r
        })
        .collect();

    for step in d + 1..cons.len() {
        let con = &cons[step];
        let vals: Vec<BigInt> = rays.iter().map(|r| dot(con, r)).collect();
        let masks: Vec<u64> = rays.iter().map(|r| tight_mask(&cons[..step], r)).collect();

        let mut next: Vec<Vec<BigInt>> = Vec::new();
        let mut fresh: BTreeSet<Vec<BigInt>> = BTreeSet::new();
        for (r, v) in rays.iter().zip(&vals) {
            if !v.is_positive() {
                next.push(r.clone());
            }
        }
        for (pi, pv) in vals.iter().enumerate() {
            if !pv.is_positive() {
                continue;
            }
            for (ni, nv) in vals.iter().enumerate() {
                if !nv.is_negative() {
                    continue;
                }
                let shared = masks[pi] & masks[ni];
                let adjacent = masks
                    .iter()
                    .enumerate()
                    .all(|(k, m)| k == pi || k == ni || m & shared != shared);
                if !adjacent {
                    continue;
                }
                // pv·n - nv·p is tight on `con` and stays in the cone
                let mut w: Vec<BigInt> = rays[ni]
                    .iter()
                    .zip(&rays[pi])
                    .map(|(n, p)| pv * n - nv * p)
                    .collect();
                normalize(&mut w);
                fresh.insert(w);
            }
        }
        next.extend(fresh);
        if next.len() > caps.max_rays {
            return Err(Error::SizeCap(format!(
                "double description exceeded {} rays",
                caps.max_rays
            )));
        }
        rays = next;
    }

    let mut verts: BTreeSet<Vec<Rational>> = BTreeSet::new();
    for r in &rays {
        let t = &r[d];
        if t.is_zero() {
            // a nonzero recession direction: the polytope is unbounded
            return Err(Error::Validation(
                "polytope is unbounded; vertices are not a complete description".into(),
            ));
        }
        verts.insert(
            r[..d]
                .iter()
                .map(|x| BigRational::new(x.clone(), t.clone()))
                .collect(),
        );
    }
    Ok(verts.into_iter().collect())
}

fn dot(c: &[BigInt], r: &[BigInt]) -> BigInt {
    c.iter().zip(r).map(|(a, b)| a * b).sum()
}

fn tight_mask(cons: &[Vec<BigInt>], ray: &[BigInt]) -> u64 {
    let mut mask = 0u64;
    for (j, c) in cons.iter().enumerate() {
        if dot(c, ray).is_zero() {
            mask |= 1 << j;
        }
    }
    mask
}

fn normalize(v: &mut [BigInt]) {
    let mut g = BigInt::zero();
    for x in v.iter() {
        g = g.gcd(x);
    }
    if g > BigInt::one() {
        for x in v.iter_mut() {
            *x /= &g;
        }
    }
}
