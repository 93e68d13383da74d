//! Double description method for `{y : a_k·y ≥ 0}` over exact rationals.

use num_traits::{Signed, Zero};

use crate::rational::{dot, primitive, rank, Q};

/// Generators of a polyhedral cone: extreme rays of its pointed part plus a
/// basis of its lineality space. Vectors are primitive integer multiples.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Generators {
    pub rays: Vec<Vec<Q>>,
    pub lineality: Vec<Vec<Q>>,
}

impl Generators {
    /// Dimension of the cone they generate.
    pub fn cone_dim(&self) -> usize {
        let all: Vec<&[Q]> = self.rays.iter().chain(&self.lineality).map(Vec::as_slice).collect();
        rank(&all)
    }
}

#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64).max(1)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn set_below(&mut self, k: usize) {
        for i in 0..k {
            self.set(i);
        }
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &bits)| {
            (0..64).filter(move |b| bits >> b & 1 == 1).map(move |b| w * 64 + b)
        })
    }
}

struct Ray {
    v: Vec<Q>,
    tight: Bits,
}

fn axpy(y: &[Q], c: &Q, x: &[Q]) -> Vec<Q> {
    y.iter().zip(x).map(|(yi, xi)| yi - c * xi).collect()
}

/// Generators of `{y ∈ Q^dim : row·y ≥ 0 for every row}`, inserting the rows
/// one at a time.
pub fn double_description(dim: usize, rows: &[Vec<Q>]) -> Generators {
    let m = rows.len();
    let mut lineality: Vec<Vec<Q>> = (0..dim)
        .map(|i| (0..dim).map(|j| if i == j { Q::from_integer(1.into()) } else { Q::zero() }).collect())
        .collect();
    let mut rays: Vec<Ray> = Vec::new();

    for (k, a) in rows.iter().enumerate() {
        debug_assert_eq!(a.len(), dim);
        if a.iter().all(Zero::is_zero) {
            for r in &mut rays {
                r.tight.set(k);
            }
            continue;
        }
        if let Some(p) = lineality.iter().position(|l| !dot(a, l).is_zero()) {
            let mut l0 = lineality.remove(p);
            let mut s = dot(a, &l0);
            if s.is_negative() {
                l0.iter_mut().for_each(|x| *x = -x.clone());
                s = -s;
            }
            for l in &mut lineality {
                let c = dot(a, l) / &s;
                if !c.is_zero() {
                    *l = primitive(&axpy(l, &c, &l0));
                }
            }
            for r in &mut rays {
                let c = dot(a, &r.v) / &s;
                if !c.is_zero() {
                    r.v = primitive(&axpy(&r.v, &c, &l0));
                }
                r.tight.set(k);
            }
            let mut tight = Bits::new(m);
            tight.set_below(k);
            rays.push(Ray { v: primitive(&l0), tight });
            continue;
        }

        let values: Vec<Q> = rays.iter().map(|r| dot(a, &r.v)).collect();
        if values.iter().all(|v| !v.is_negative()) {
            for (r, v) in rays.iter_mut().zip(&values) {
                if v.is_zero() {
                    r.tight.set(k);
                }
            }
            continue;
        }
        let pointed = dim - lineality.len();
        let mut next: Vec<Ray> = Vec::new();
        if pointed >= 2 {
            let need = pointed - 2;
            for (i, vp) in values.iter().enumerate().filter(|(_, v)| v.is_positive()) {
                for (j, vn) in values.iter().enumerate().filter(|(_, v)| v.is_negative()) {
                    let common = rays[i].tight.and(&rays[j].tight);
                    if common.count() < need {
                        continue;
                    }
                    let active: Vec<&[Q]> = common.ones().map(|t| rows[t].as_slice()).collect();
                    if rank(&active) != need {
                        continue;
                    }
                    let v: Vec<Q> = rays[j]
                        .v
                        .iter()
                        .zip(&rays[i].v)
                        .map(|(n, p)| vp * n - vn * p)
                        .collect();
                    let mut tight = common;
                    tight.set(k);
                    next.push(Ray { v: primitive(&v), tight });
                }
            }
        }
        let mut kept: Vec<Ray> = Vec::with_capacity(rays.len() + next.len());
        for (mut r, v) in rays.into_iter().zip(values) {
            if v.is_negative() {
                continue;
            }
            if v.is_zero() {
                r.tight.set(k);
            }
            kept.push(r);
        }
        kept.extend(next);
        rays = kept;
    }

    Generators { rays: rays.into_iter().map(|r| r.v).collect(), lineality }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn rows(r: &[&[i64]]) -> Vec<Vec<Q>> {
        r.iter().map(|row| row.iter().map(|&x| q(x)).collect()).collect()
    }

    #[test]
    fn orthant_rays_are_unit_vectors() {
        let g = double_description(3, &rows(&[&[1, 0, 0], &[0, 1, 0], &[0, 0, 1]]));
        let mut r = g.rays.clone();
        r.sort();
        assert_eq!(r, rows(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]]));
        assert!(g.lineality.is_empty());
    }

    #[test]
    fn halfspace_keeps_lineality() {
        let g = double_description(3, &rows(&[&[1, 0, 0]]));
        assert_eq!(g.rays, rows(&[&[1, 0, 0]]));
        assert_eq!(g.lineality.len(), 2);
        assert_eq!(g.cone_dim(), 3);
    }

    #[test]
    fn opposite_halfspaces_pin_a_coordinate() {
        let g = double_description(2, &rows(&[&[1, 0], &[-1, 0], &[0, 1]]));
        assert_eq!(g.rays, rows(&[&[0, 1]]));
        assert!(g.lineality.is_empty());
        assert_eq!(g.cone_dim(), 1);
    }

    #[test]
    fn square_pyramid_has_four_rays() {
        // x ≥ |y|, x ≥ |z| style cone in 3D.
        let g = double_description(3, &rows(&[&[1, 1, 0], &[1, -1, 0], &[1, 0, 1], &[1, 0, -1]]));
        let mut r = g.rays.clone();
        r.sort();
        assert_eq!(r, rows(&[&[1, -1, -1], &[1, -1, 1], &[1, 1, -1], &[1, 1, 1]]));
    }
}
