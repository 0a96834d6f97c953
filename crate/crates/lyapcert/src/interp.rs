//! Interpolation conditions and the structure matrices built from them.
//!
//! For each component class, a symmetric block matrix and a vector encode
//! the pairwise inequalities that are necessary and sufficient for a class
//! member to interpolate a finite family of (point, value, subgradient)
//! triplets. The structure matrices lift those inequalities, written
//! between the current iterate, its successor, and a fixed point, into the
//! coordinates of the certification problem.

use crate::linalg::{Mat, SymMat};
use crate::model::{sum_to_zero, FunctionClass, Method, ModelError};

/// The three roles a point can play in a pairwise inequality: the current
/// iterate (Base), its successor (Next), and a fixed point (Star).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tag {
    Base,
    Next,
    Star,
}

/// Ordered distinct pairs over {Base, Next, Star}, in the fixed order used
/// everywhere multipliers are serialized.
pub const PAIRS3: [(Tag, Tag); 6] = [
    (Tag::Base, Tag::Next),
    (Tag::Next, Tag::Base),
    (Tag::Base, Tag::Star),
    (Tag::Star, Tag::Base),
    (Tag::Next, Tag::Star),
    (Tag::Star, Tag::Next),
];

/// Ordered distinct pairs over {Base, Star}, in the same serialization
/// order restricted to the two-element set.
pub const PAIRS2: [(Tag, Tag); 2] = [(Tag::Base, Tag::Star), (Tag::Star, Tag::Base)];

/// Per-component interpolation matrices: one symmetric 3m x 3m matrix and
/// one vector in R^m per component.
#[derive(Debug, Clone)]
pub struct InterpolationBlocks {
    pub m_blocks: Vec<SymMat>,
    pub a_vecs: Vec<Vec<f64>>,
}

/// Builds the interpolation blocks for the given classes. The 3x3 pattern
/// acts on (y_i - y_j, u_i, u_j) coordinates of one component, placed by a
/// Kronecker product with diag(e_l).
pub fn interpolation_blocks(classes: &[FunctionClass]) -> Result<InterpolationBlocks, ModelError> {
    let m = classes.len();
    assert!(m >= 1);
    let mut m_blocks = Vec::with_capacity(m);
    let mut a_vecs = Vec::with_capacity(m);
    for (l, cls) in classes.iter().enumerate() {
        if !(cls.sigma >= 0.0 && cls.sigma < cls.beta) {
            return Err(ModelError::BadClass { sigma: cls.sigma, beta: cls.beta });
        }
        let pattern = if cls.beta.is_finite() {
            let scale = 1.0 / (2.0 * (cls.beta - cls.sigma));
            Mat::from_rows(&[
                &[cls.beta * cls.sigma, -cls.sigma, cls.beta],
                &[-cls.sigma, 1.0, -1.0],
                &[cls.beta, -1.0, 1.0],
            ])
            .scale(scale)
        } else {
            Mat::from_rows(&[&[cls.sigma, 0.0, 1.0], &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]).scale(0.5)
        };
        let mut basis = vec![0.0; m];
        basis[l] = 1.0;
        let block = pattern.kron(&Mat::diag(&basis));
        m_blocks.push(SymMat::new(block).expect("interpolation block is symmetric"));
        let mut a = vec![0.0; m];
        a[l] = -1.0;
        a_vecs.push(a);
    }
    Ok(InterpolationBlocks { m_blocks, a_vecs })
}

/// One sampled (point, value, subgradient) triplet.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub y: Vec<f64>,
    pub f: f64,
    pub u: Vec<f64>,
}

/// Checks whether some member of `class` interpolates the family: for
/// every ordered pair (i, j),
///
/// ```text
/// F_i >= F_j + <u_j, y_i - y_j> + sigma/2 ||y_i - y_j||^2
///            + 1/(2(beta - sigma)) ||u_i - u_j - sigma (y_i - y_j)||^2
/// ```
///
/// with the last coefficient read as zero when beta is infinite. The
/// comparison uses the relative slack 1e-9 (1 + |F_i| + |F_j|).
pub fn interpolates(family: &[Triplet], class: &FunctionClass) -> bool {
    let inv_gap = if class.beta.is_finite() { 1.0 / (2.0 * (class.beta - class.sigma)) } else { 0.0 };
    for ti in family {
        for tj in family {
            let d = ti.y.len();
            debug_assert_eq!(tj.y.len(), d);
            let mut inner = 0.0;
            let mut dist2 = 0.0;
            let mut curv2 = 0.0;
            for k in 0..d {
                let dy = ti.y[k] - tj.y[k];
                inner += tj.u[k] * dy;
                dist2 += dy * dy;
                let w = ti.u[k] - tj.u[k] - class.sigma * dy;
                curv2 += w * w;
            }
            let rhs = tj.f + inner + 0.5 * class.sigma * dist2 + inv_gap * curv2;
            let tol = 1e-9 * (1.0 + ti.f.abs() + tj.f.abs());
            if ti.f < rhs - tol {
                return false;
            }
        }
    }
    true
}

/// The lifted matrices for a given method representation.
///
/// Coordinates of the lifted space are (dx, u, u_next, u_star_hat) with
/// widths (n, m, m, m-1); the last block is absent when m = 1. The two
/// selector matrices map the lifted space onto the (dx, u, u_star)
/// coordinates of the current point and its successor.
#[derive(Debug, Clone)]
pub struct StructureMatrices {
    pub n: usize,
    pub m: usize,
    /// n + 3m - 1
    pub lifted_dim: usize,
    /// One 3m x lifted_dim selector per ordered pair.
    e_pairs: Vec<(Tag, Tag, Mat)>,
    /// One m x 2m value selector per ordered pair.
    h_pairs: Vec<(Tag, Tag, Mat)>,
    pub sigma_base: Mat,
    pub sigma_next: Mat,
    /// Lifted interpolation matrices, indexed by (pair, component).
    m_lifted: Vec<Vec<SymMat>>,
    /// Lifted value vectors in R^{2m}, indexed by (pair, component).
    a_lifted: Vec<Vec<Vec<f64>>>,
}

fn pair_index(i: Tag, j: Tag) -> usize {
    PAIRS3.iter().position(|&(a, b)| a == i && b == j).expect("distinct pair")
}

impl StructureMatrices {
    pub fn new(rep: &Method) -> Result<Self, ModelError> {
        let n = rep.n;
        let m = rep.m;
        let lifted_dim = n + 3 * m - 1;
        let c = &rep.c;
        let d = &rep.d;
        let a = &rep.a;
        let b = &rep.b;
        let eye_m = Mat::identity(m);
        let zero_mm = Mat::zeros(m, m);
        let zero_mn = Mat::zeros(m, n);

        // Width m-1 trailing blocks; empty when m = 1.
        let nmat = if m > 1 { sum_to_zero(m) } else { Mat::zeros(m, 0) };
        let zero_mt = Mat::zeros(m, nmat.cols());

        let ca = c.matmul(a);
        let cb = c.matmul(b);
        let c_i_minus_a = c.matmul(&Mat::identity(n).sub(a));
        let cbn = cb.matmul(&nmat);
        let dn = d.matmul(&nmat);

        let row3 = |x1: &Mat, x2: &Mat, x3: &Mat, x4: &Mat| Mat::hstack(&[x1, x2, x3, x4]);

        let e_base_next = Mat::vstack(&[
            &row3(&c_i_minus_a, &d.sub(&cb), &d.neg(), &cbn),
            &row3(&zero_mn, &eye_m, &zero_mm, &zero_mt),
            &row3(&zero_mn, &zero_mm, &eye_m, &zero_mt),
        ]);
        let e_next_base = Mat::vstack(&[
            &row3(&c_i_minus_a.neg(), &cb.sub(d), d, &cbn.neg()),
            &row3(&zero_mn, &zero_mm, &eye_m, &zero_mt),
            &row3(&zero_mn, &eye_m, &zero_mm, &zero_mt),
        ]);
        let e_base_star = Mat::vstack(&[
            &row3(c, d, &zero_mm, &dn.neg()),
            &row3(&zero_mn, &eye_m, &zero_mm, &zero_mt),
            &row3(&zero_mn, &zero_mm, &zero_mm, &nmat),
        ]);
        let e_star_base = Mat::vstack(&[
            &row3(&c.neg(), &d.neg(), &zero_mm, &dn),
            &row3(&zero_mn, &zero_mm, &zero_mm, &nmat),
            &row3(&zero_mn, &eye_m, &zero_mm, &zero_mt),
        ]);
        let dn_plus_cbn = dn.add(&cbn);
        let e_next_star = Mat::vstack(&[
            &row3(&ca, &cb, d, &dn_plus_cbn.neg()),
            &row3(&zero_mn, &zero_mm, &eye_m, &zero_mt),
            &row3(&zero_mn, &zero_mm, &zero_mm, &nmat),
        ]);
        let e_star_next = Mat::vstack(&[
            &row3(&ca.neg(), &cb.neg(), &d.neg(), &dn_plus_cbn),
            &row3(&zero_mn, &zero_mm, &zero_mm, &nmat),
            &row3(&zero_mn, &zero_mm, &eye_m, &zero_mt),
        ]);

        let h = |first: f64, second: f64| {
            Mat::hstack(&[&eye_m.scale(first), &eye_m.scale(second)])
        };
        let h_pairs = vec![
            (Tag::Base, Tag::Next, h(1.0, -1.0)),
            (Tag::Next, Tag::Base, h(-1.0, 1.0)),
            (Tag::Base, Tag::Star, h(1.0, 0.0)),
            (Tag::Star, Tag::Base, h(-1.0, 0.0)),
            (Tag::Next, Tag::Star, h(0.0, 1.0)),
            (Tag::Star, Tag::Next, h(0.0, -1.0)),
        ];
        let e_pairs = vec![
            (Tag::Base, Tag::Next, e_base_next),
            (Tag::Next, Tag::Base, e_next_base),
            (Tag::Base, Tag::Star, e_base_star),
            (Tag::Star, Tag::Base, e_star_base),
            (Tag::Next, Tag::Star, e_next_star),
            (Tag::Star, Tag::Next, e_star_next),
        ];

        let eye_n = Mat::identity(n);
        let zero_nm = Mat::zeros(n, m);
        let zero_nt = Mat::zeros(n, nmat.cols());
        let bn = b.matmul(&nmat);
        let sigma_base = Mat::vstack(&[
            &Mat::hstack(&[&eye_n, &zero_nm, &zero_nm, &zero_nt]),
            &Mat::hstack(&[&zero_mn, &eye_m, &zero_mm, &zero_mt]),
            &Mat::hstack(&[&zero_mn, &zero_mm, &zero_mm, &nmat]),
        ]);
        let sigma_next = Mat::vstack(&[
            &Mat::hstack(&[a, b, &zero_nm, &bn.neg()]),
            &Mat::hstack(&[&zero_mn, &zero_mm, &eye_m, &zero_mt]),
            &Mat::hstack(&[&zero_mn, &zero_mm, &zero_mm, &nmat]),
        ]);

        for (_, _, e) in &e_pairs {
            debug_assert_eq!((e.rows(), e.cols()), (3 * m, lifted_dim));
        }
        debug_assert_eq!((sigma_base.rows(), sigma_base.cols()), (n + 2 * m, lifted_dim));

        let blocks = interpolation_blocks(&rep.classes)?;
        let mut m_lifted = Vec::with_capacity(6);
        let mut a_lifted = Vec::with_capacity(6);
        for ((_, _, e), (_, _, h)) in e_pairs.iter().zip(&h_pairs) {
            let mut per_pair_m = Vec::with_capacity(m);
            let mut per_pair_a = Vec::with_capacity(m);
            for l in 0..m {
                let lifted = Mat::congruence(e, blocks.m_blocks[l].mat());
                per_pair_m.push(SymMat::symmetrize(&lifted));
                per_pair_a.push(h.transpose().matvec(&blocks.a_vecs[l]));
            }
            m_lifted.push(per_pair_m);
            a_lifted.push(per_pair_a);
        }

        Ok(StructureMatrices {
            n,
            m,
            lifted_dim,
            e_pairs,
            h_pairs,
            sigma_base,
            sigma_next,
            m_lifted,
            a_lifted,
        })
    }

    pub fn e(&self, i: Tag, j: Tag) -> &Mat {
        &self.e_pairs[pair_index(i, j)].2
    }

    pub fn h(&self, i: Tag, j: Tag) -> &Mat {
        &self.h_pairs[pair_index(i, j)].2
    }

    /// Lifted interpolation matrix for component l and ordered pair (i, j).
    pub fn m_lifted(&self, l: usize, i: Tag, j: Tag) -> &SymMat {
        &self.m_lifted[pair_index(i, j)][l]
    }

    /// Lifted value-difference vector for component l and pair (i, j).
    pub fn a_lifted(&self, l: usize, i: Tag, j: Tag) -> &[f64] {
        &self.a_lifted[pair_index(i, j)][l]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build, Family, FunctionClass};
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{RngExt, SeedableRng};

    fn cls(sigma: f64, beta: f64) -> FunctionClass {
        FunctionClass::new(sigma, beta).unwrap()
    }

    #[test]
    fn blocks_single_nonsmooth_component() {
        let blocks = interpolation_blocks(&[cls(0.0, f64::INFINITY)]).unwrap();
        let expected =
            Mat::from_rows(&[&[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]).scale(0.5);
        assert!(blocks.m_blocks[0].mat().sub(&expected).max_abs() < 1e-15);
        assert_eq!(blocks.a_vecs[0], vec![-1.0]);
    }

    #[test]
    fn blocks_single_smooth_component() {
        // sigma = 0, beta = 1 in the finite-beta branch.
        let blocks = interpolation_blocks(&[cls(0.0, 1.0)]).unwrap();
        let expected =
            Mat::from_rows(&[&[0.0, 0.0, 1.0], &[0.0, 1.0, -1.0], &[1.0, -1.0, 1.0]]).scale(0.5);
        assert!(blocks.m_blocks[0].mat().sub(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn blocks_second_component_placement() {
        // For m = 2 with (sigma_2, beta_2) = (1, inf), expanding the
        // Kronecker product entrywise places the 3x3 pattern on the
        // second coordinate of each block.
        let blocks = interpolation_blocks(&[cls(0.0, 1.0), cls(1.0, f64::INFINITY)]).unwrap();
        let m2 = &blocks.m_blocks[1];
        assert_eq!(m2.dim(), 6);
        let pattern =
            Mat::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]).scale(0.5);
        for bi in 0..3 {
            for bj in 0..3 {
                for ci in 0..2 {
                    for cj in 0..2 {
                        let expected =
                            if ci == 1 && cj == 1 { pattern.get(bi, bj) } else { 0.0 };
                        assert_eq!(m2.get(bi * 2 + ci, bj * 2 + cj), expected);
                    }
                }
            }
        }
        assert_eq!(blocks.a_vecs[1], vec![0.0, -1.0]);
    }

    #[test]
    fn blocks_reject_bad_class() {
        let bad = FunctionClass { sigma: 2.0, beta: 1.0 };
        assert!(interpolation_blocks(&[bad]).is_err());
    }

    #[test]
    fn single_triplet_interpolates() {
        let fam = vec![Triplet { y: vec![0.3], f: 1.0, u: vec![-2.0] }];
        assert!(interpolates(&fam, &cls(0.0, 1.0)));
    }

    #[test]
    fn quadratic_data_sits_on_equality() {
        // f(x) = x^2 / 2 gives equality in both directions for class (0, 1).
        let fam = vec![
            Triplet { y: vec![0.0], f: 0.0, u: vec![0.0] },
            Triplet { y: vec![1.0], f: 0.5, u: vec![1.0] },
        ];
        assert!(interpolates(&fam, &cls(0.0, 1.0)));
    }

    #[test]
    fn constant_data_violates_strong_convexity() {
        // 0 >= 0 + 0 + 1/2 fails for class (1, inf).
        let fam = vec![
            Triplet { y: vec![0.0], f: 0.0, u: vec![0.0] },
            Triplet { y: vec![1.0], f: 0.0, u: vec![0.0] },
        ];
        assert!(!interpolates(&fam, &cls(1.0, f64::INFINITY)));
    }

    #[test]
    fn structure_scalar_method() {
        // n = m = 1 with (a, b, c, d) = (1, -gamma, 1, 0): the first
        // selector reduces to [[0, gamma, 0], [0, 1, 0], [0, 0, 1]].
        let gamma = 0.25;
        let rep = crate::model::Method::new(
            Mat::from_rows(&[&[1.0]]),
            Mat::from_rows(&[&[-gamma]]),
            Mat::from_rows(&[&[1.0]]),
            Mat::from_rows(&[&[0.0]]),
            vec![cls(0.0, 1.0)],
        )
        .unwrap();
        let s = StructureMatrices::new(&rep).unwrap();
        let expected = Mat::from_rows(&[&[0.0, gamma, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]);
        assert!(s.e(Tag::Base, Tag::Next).sub(&expected).max_abs() < 1e-15);
        let sigma_expected =
            Mat::from_rows(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 0.0]]);
        assert!(s.sigma_base.sub(&sigma_expected).max_abs() < 1e-15);
    }

    #[test]
    fn structure_two_components() {
        let rep = build(
            Family::DouglasRachford,
            &[1.0, 1.0],
            &[cls(0.0, f64::INFINITY), cls(0.0, f64::INFINITY)],
        )
        .unwrap();
        let s = StructureMatrices::new(&rep).unwrap();
        assert_eq!(sum_to_zero(2), Mat::from_rows(&[&[1.0], &[-1.0]]));
        let h_bs = s.h(Tag::Base, Tag::Star);
        let expected = Mat::hstack(&[&Mat::identity(2), &Mat::zeros(2, 2)]);
        assert!(h_bs.sub(&expected).max_abs() < 1e-15);
        let h_sb = s.h(Tag::Star, Tag::Base);
        assert!(h_sb.add(&expected).max_abs() < 1e-15);
    }

    #[test]
    fn lifted_vectors_antisymmetric_in_pair_order() {
        let rep = build(
            Family::ChambollePock,
            &[0.7, 0.9, 1.0],
            &[cls(0.0, f64::INFINITY), cls(0.0, f64::INFINITY)],
        )
        .unwrap();
        let s = StructureMatrices::new(&rep).unwrap();
        for l in 0..2 {
            for (i, j) in PAIRS3 {
                let fwd = s.a_lifted(l, i, j);
                let bwd = s.a_lifted(l, j, i);
                for k in 0..fwd.len() {
                    assert!((fwd[k] + bwd[k]).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn dimensional_audit_random_shapes() {
        let mut rng = StdRng::seed_from_u64(42);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let m = rng.random_range(1..=4);
            let rep = crate::model::Method::new(
                Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)),
                Mat::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0)),
                Mat::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0)),
                Mat::from_fn(m, m, |_, _| rng.random_range(-1.0..1.0)),
                vec![cls(0.0, f64::INFINITY); m],
            )
            .unwrap();
            let s = StructureMatrices::new(&rep).unwrap();
            let lifted = n + 3 * m - 1;
            assert_eq!(s.lifted_dim, lifted);
            for (i, j) in PAIRS3 {
                assert_eq!((s.e(i, j).rows(), s.e(i, j).cols()), (3 * m, lifted));
                assert_eq!((s.h(i, j).rows(), s.h(i, j).cols()), (m, 2 * m));
                for l in 0..m {
                    assert_eq!(s.m_lifted(l, i, j).dim(), lifted);
                    assert_eq!(s.a_lifted(l, i, j).len(), 2 * m);
                }
            }
            assert_eq!((s.sigma_base.rows(), s.sigma_base.cols()), (n + 2 * m, lifted));
            assert_eq!((s.sigma_next.rows(), s.sigma_next.cols()), (n + 2 * m, lifted));
        }
    }

    proptest! {
        #[test]
        fn block_form_vanishes_on_equal_subgradients(
            sigma in 0.0..2.0_f64,
            gap in 0.1..5.0_f64,
            smooth in proptest::bool::ANY,
            u in proptest::collection::vec(-3.0..3.0_f64, 1..4),
        ) {
            // The quadratic form of every block evaluates to zero on
            // (0, u, u), for any u.
            let m = u.len();
            let beta = if smooth { sigma + gap } else { f64::INFINITY };
            let classes = vec![cls(sigma, beta); m];
            let blocks = interpolation_blocks(&classes).unwrap();
            let mut z = vec![0.0; 3 * m];
            for i in 0..m {
                z[m + i] = u[i];
                z[2 * m + i] = u[i];
            }
            for l in 0..m {
                let mz = blocks.m_blocks[l].mat().matvec(&z);
                let val: f64 = z.iter().zip(&mz).map(|(a, b)| a * b).sum();
                prop_assert!(val.abs() < 1e-12);
            }
        }

        #[test]
        fn quadratic_form_pushforward(
            w_data in proptest::collection::vec(-2.0..2.0_f64, 9),
            x_data in proptest::collection::vec(-2.0..2.0_f64, 12),
            z in proptest::collection::vec(-2.0..2.0_f64, 4),
        ) {
            // Q(W, X z) = Q(X^T W X, z) for symmetric W.
            let w = SymMat::symmetrize(&Mat::from_vec(3, 3, w_data));
            let x = Mat::from_vec(3, 4, x_data);
            let xz = x.matvec(&z);
            let wxz = w.mat().matvec(&xz);
            let lhs: f64 = xz.iter().zip(&wxz).map(|(a, b)| a * b).sum();
            let pushed = Mat::congruence(&x, w.mat());
            let pz = pushed.matvec(&z);
            let rhs: f64 = z.iter().zip(&pz).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
    }
}
