//! Galerkin assembly and direct solution of the planar magnetostatic
//! problem on multipatch NURBS models.
//!
//! The unknown is the out-of-plane potential component `A_z`; the flux
//! density is its perpendicular gradient `B = (dA/dy, -dA/dx)`.  The weak
//! form reads
//!
//! ```text
//!   integral( grad(w) . nu_perp grad(A) )
//!     = integral( w * j_z ) + integral( grad(w) . nu * perp(B_r) )
//! ```
//!
//! with the perpendicular reluctivity tensor `nu_perp` and the remanence
//! source rotated by 90 degrees.  Patch interfaces are conforming, so
//! continuity is imposed by identifying matching control points into shared
//! degrees of freedom.

use crate::error::{Error, Result};
use crate::geometry::{detect_interfaces, MultipatchModel};
use crate::material::PatchMaterial;
use crate::quadrature::gauss;
use crate::sparse::{BandCholesky, CsrMatrix, Triplets};
use crate::spline::NurbsPatch;

/// Relative algebraic residual a direct solve must reach.
pub const RESIDUAL_TOL: f64 = 1e-10;

fn uf_find(parent: &mut Vec<usize>, mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn uf_union(parent: &mut Vec<usize>, a: usize, b: usize) {
    let (ra, rb) = (uf_find(parent, a), uf_find(parent, b));
    if ra != rb {
        // Always attach the larger root to the smaller one so numbering
        // stays deterministic.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Global numbering of control-point degrees of freedom over (a subset of)
/// a multipatch model, with matching interface control points identified
/// and Dirichlet edges marked.
#[derive(Debug, Clone)]
pub struct DiscreteSpace {
    /// Offset of each patch into the flattened local index range
    /// (`usize::MAX` for patches outside the subset).
    offsets: Vec<usize>,
    /// Global dof per flattened local control index.
    dof_of_local: Vec<usize>,
    /// Number of global dofs.
    pub n_dofs: usize,
    /// Dirichlet flag per global dof.
    pub is_dirichlet: Vec<bool>,
    /// Free (non-Dirichlet) index per global dof, `usize::MAX` otherwise.
    pub free_of_dof: Vec<usize>,
    /// Number of free dofs.
    pub n_free: usize,
    /// Patch indices covered by this space.
    pub patches: Vec<usize>,
}

impl DiscreteSpace {
    /// Space over the whole model with its Dirichlet edges applied.
    pub fn new(model: &MultipatchModel) -> DiscreteSpace {
        let all: Vec<usize> = (0..model.patches.len()).collect();
        Self::on_patches(model, &all, true)
    }

    /// Space restricted to `patches`; interfaces between listed patches are
    /// identified.  Dirichlet edges of the model are applied only when
    /// `with_dirichlet` is set (and only on listed patches).
    pub fn on_patches(
        model: &MultipatchModel,
        patches: &[usize],
        with_dirichlet: bool,
    ) -> DiscreteSpace {
        let n_model = model.patches.len();
        let mut offsets = vec![usize::MAX; n_model];
        let mut total = 0usize;
        for &p in patches {
            offsets[p] = total;
            let patch = &model.patches[p].patch;
            total += patch.nu() * patch.nv();
        }

        let mut parent: Vec<usize> = (0..total).collect();
        for itf in detect_interfaces(model) {
            if offsets[itf.patch_a] == usize::MAX || offsets[itf.patch_b] == usize::MAX {
                continue;
            }
            let ia = model.patches[itf.patch_a].patch.edge_indices(itf.edge_a);
            let mut ib = model.patches[itf.patch_b].patch.edge_indices(itf.edge_b);
            if itf.reversed {
                ib.reverse();
            }
            debug_assert_eq!(ia.len(), ib.len());
            for (&la, &lb) in ia.iter().zip(&ib) {
                uf_union(
                    &mut parent,
                    offsets[itf.patch_a] + la,
                    offsets[itf.patch_b] + lb,
                );
            }
        }

        // Deterministic global numbering in local-index order of the roots.
        let mut dof_of_root = vec![usize::MAX; total];
        let mut dof_of_local = vec![usize::MAX; total];
        let mut n_dofs = 0usize;
        for l in 0..total {
            let r = uf_find(&mut parent, l);
            if dof_of_root[r] == usize::MAX {
                dof_of_root[r] = n_dofs;
                n_dofs += 1;
            }
            dof_of_local[l] = dof_of_root[r];
        }

        let mut is_dirichlet = vec![false; n_dofs];
        if with_dirichlet {
            for &(p, edge) in &model.dirichlet {
                if offsets[p] == usize::MAX {
                    continue;
                }
                for l in model.patches[p].patch.edge_indices(edge) {
                    is_dirichlet[dof_of_local[offsets[p] + l]] = true;
                }
            }
        }
        let mut free_of_dof = vec![usize::MAX; n_dofs];
        let mut n_free = 0usize;
        for g in 0..n_dofs {
            if !is_dirichlet[g] {
                free_of_dof[g] = n_free;
                n_free += 1;
            }
        }
        DiscreteSpace {
            offsets,
            dof_of_local,
            n_dofs,
            is_dirichlet,
            free_of_dof,
            n_free,
            patches: patches.to_vec(),
        }
    }

    /// Global dof of a flattened local control index on a patch.
    pub fn dof(&self, patch: usize, local: usize) -> usize {
        debug_assert_ne!(self.offsets[patch], usize::MAX);
        self.dof_of_local[self.offsets[patch] + local]
    }

    /// Whether a patch belongs to this space.
    pub fn covers(&self, patch: usize) -> bool {
        self.offsets[patch] != usize::MAX
    }

    /// Expands a free-dof vector to all dofs, zero on Dirichlet entries.
    pub fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs];
        for g in 0..self.n_dofs {
            if self.free_of_dof[g] != usize::MAX {
                full[g] = free[self.free_of_dof[g]];
            }
        }
        full
    }
}

/// Pointwise material data as seen by the assembly: the perpendicular
/// reluctivity tensor and the (reluctivity-weighted, 90-degree rotated)
/// remanence source vector.
pub trait MaterialEval {
    fn nu_perp(&self, patch: usize, x: [f64; 2]) -> [[f64; 2]; 2];
    fn rhs_perp(&self, patch: usize, x: [f64; 2]) -> [f64; 2];
}

/// Materials taken directly from the model patches.
pub struct ModelMaterials<'a>(pub &'a MultipatchModel);

impl MaterialEval for ModelMaterials<'_> {
    fn nu_perp(&self, patch: usize, x: [f64; 2]) -> [[f64; 2]; 2] {
        self.0.patches[patch].material.nu_perp_at(x)
    }

    fn rhs_perp(&self, patch: usize, x: [f64; 2]) -> [f64; 2] {
        match &self.0.patches[patch].material {
            PatchMaterial::Uniform { mu_r, b_r } => {
                let nu = 1.0 / (crate::MU0 * mu_r);
                [-nu * b_r[1], nu * b_r[0]]
            }
            _ => [0.0, 0.0],
        }
    }
}

/// One quadrature point inside an element, with basis data in physical
/// coordinates.
pub struct QuadPoint {
    pub x: [f64; 2],
    /// Quadrature weight times the Jacobian determinant.
    pub w: f64,
    pub vals: Vec<f64>,
    /// Physical basis gradients, aligned with `vals`.
    pub grads: Vec<[f64; 2]>,
}

/// One Bezier element of a patch: its global dofs and quadrature data.
pub struct Element<'a> {
    pub patch: usize,
    pub dofs: &'a [usize],
    pub qpts: &'a [QuadPoint],
}

/// Visits every element of the listed patches with `(pu + 1) x (pv + 1)`
/// Gauss points.  Dirichlet handling is up to the caller; `dofs` are global
/// (not free) indices.
pub fn for_each_element(
    model: &MultipatchModel,
    space: &DiscreteSpace,
    mut visit: impl FnMut(&Element),
) {
    for &p in &space.patches {
        let patch = &model.patches[p].patch;
        let (pu, pv) = (patch.ku.degree(), patch.kv.degree());
        let (rule_u, rule_v) = (gauss(pu + 1), gauss(pv + 1));
        let nu = patch.nu();
        let mut dofs = vec![0usize; (pu + 1) * (pv + 1)];
        let mut qpts: Vec<QuadPoint> = Vec::with_capacity((pu + 1) * (pv + 1));
        for su in patch.ku.nonempty_spans() {
            let (ua, ub) = (patch.ku.knots()[su], patch.ku.knots()[su + 1]);
            for sv in patch.kv.nonempty_spans() {
                let (va, vb) = (patch.kv.knots()[sv], patch.kv.knots()[sv + 1]);
                qpts.clear();
                let mut first = true;
                for (u, wu) in rule_u.mapped(ua, ub) {
                    for (v, wv) in rule_v.mapped(va, vb) {
                        let (fu, fv, vals, pgrads) = patch.basis_grads(u, v);
                        if first {
                            for b in 0..=pv {
                                for a in 0..=pu {
                                    dofs[b * (pu + 1) + a] =
                                        space.dof(p, (fv + b) * nu + (fu + a));
                                }
                            }
                            first = false;
                        }
                        let (x, jac) = patch.point_jacobian(u, v);
                        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                        // Physical gradient: J^{-T} times parametric one.
                        let grads = pgrads
                            .iter()
                            .map(|g| {
                                [
                                    (jac[1][1] * g[0] - jac[1][0] * g[1]) / det,
                                    (-jac[0][1] * g[0] + jac[0][0] * g[1]) / det,
                                ]
                            })
                            .collect();
                        qpts.push(QuadPoint {
                            x,
                            w: wu * wv * det,
                            vals,
                            grads,
                        });
                    }
                }
                visit(&Element {
                    patch: p,
                    dofs: &dofs,
                    qpts: &qpts,
                });
            }
        }
    }
}

/// Assembled linear system on the free dofs of a space.
pub struct LinearSystem {
    pub k: Triplets,
    pub rhs: Vec<f64>,
}

/// Assembles the magnetostatic stiffness and right-hand side on the free
/// dofs.  `current` supplies an impressed current density `j_z(patch, x)`.
pub fn assemble(
    model: &MultipatchModel,
    space: &DiscreteSpace,
    materials: &dyn MaterialEval,
    current: Option<&dyn Fn(usize, [f64; 2]) -> f64>,
) -> LinearSystem {
    let mut k = Triplets::new(space.n_free);
    let mut rhs = vec![0.0; space.n_free];
    let mut ke: Vec<f64> = Vec::new();
    let mut fe: Vec<f64> = Vec::new();
    for_each_element(model, space, |el| {
        let n = el.dofs.len();
        ke.clear();
        ke.resize(n * n, 0.0);
        fe.clear();
        fe.resize(n, 0.0);
        for qp in el.qpts {
            let nu = materials.nu_perp(el.patch, qp.x);
            let m = materials.rhs_perp(el.patch, qp.x);
            let j = current.map_or(0.0, |f| f(el.patch, qp.x));
            for a in 0..n {
                let ga = qp.grads[a];
                let nga = [
                    nu[0][0] * ga[0] + nu[0][1] * ga[1],
                    nu[1][0] * ga[0] + nu[1][1] * ga[1],
                ];
                for (b, gb) in qp.grads.iter().enumerate() {
                    ke[a * n + b] += qp.w * (nga[0] * gb[0] + nga[1] * gb[1]);
                }
                fe[a] += qp.w * (qp.vals[a] * j + ga[0] * m[0] + ga[1] * m[1]);
            }
        }
        for a in 0..n {
            let fa = space.free_of_dof[el.dofs[a]];
            if fa == usize::MAX {
                continue;
            }
            rhs[fa] += fe[a];
            for b in 0..n {
                let fb = space.free_of_dof[el.dofs[b]];
                if fb != usize::MAX {
                    k.push(fa, fb, ke[a * n + b]);
                }
            }
        }
    });
    LinearSystem { k, rhs }
}

/// A solved magnetostatic field on a model.
pub struct FieldSolution {
    pub space: DiscreteSpace,
    /// Potential coefficients for all dofs (Dirichlet entries zero).
    pub a: Vec<f64>,
    /// Relative algebraic residual of the free system.
    pub residual: f64,
}

/// Assembles and solves the magnetostatic problem with a direct banded
/// Cholesky factorization, verifying the algebraic residual.
pub fn solve_magnetostatic(
    model: &MultipatchModel,
    materials: &dyn MaterialEval,
    current: Option<&dyn Fn(usize, [f64; 2]) -> f64>,
) -> Result<FieldSolution> {
    let space = DiscreteSpace::new(model);
    if space.n_free == 0 {
        return Err(Error::numerical("no free degrees of freedom"));
    }
    let system = assemble(model, &space, materials, current);
    let k = system.k.to_csr();
    let chol = BandCholesky::factor(&k)?;
    let u = chol.solve(&system.rhs);
    let residual = k.relative_residual(&u, &system.rhs);
    if !(residual <= RESIDUAL_TOL) {
        return Err(Error::numerical(format!(
            "direct solve residual {residual:.3e} exceeds {RESIDUAL_TOL:.1e}"
        )));
    }
    let a = space.expand(&u);
    Ok(FieldSolution {
        space,
        a,
        residual,
    })
}

/// Point evaluation of a solved potential field.
pub struct FieldEvaluator<'a> {
    pub model: &'a MultipatchModel,
    pub space: &'a DiscreteSpace,
    pub a: &'a [f64],
}

impl FieldEvaluator<'_> {
    /// Potential at a parametric point of a patch.
    pub fn a_z(&self, patch: usize, u: f64, v: f64) -> f64 {
        let p = &self.model.patches[patch].patch;
        let (fu, fv, vals, _) = p.basis_grads(u, v);
        let (pu, pv) = (p.ku.degree(), p.kv.degree());
        let nu = p.nu();
        let mut s = 0.0;
        for b in 0..=pv {
            for a in 0..=pu {
                let g = self.space.dof(patch, (fv + b) * nu + (fu + a));
                s += vals[b * (pu + 1) + a] * self.a[g];
            }
        }
        s
    }

    /// Flux density at a parametric point: `B = (dA/dy, -dA/dx)`.
    pub fn b_at_param(&self, patch: usize, u: f64, v: f64) -> [f64; 2] {
        let p = &self.model.patches[patch].patch;
        let (fu, fv, _, pgrads) = p.basis_grads(u, v);
        let (_, jac) = p.point_jacobian(u, v);
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let (pu, pv) = (p.ku.degree(), p.kv.degree());
        let nu = p.nu();
        let mut gx = 0.0;
        let mut gy = 0.0;
        for b in 0..=pv {
            for a in 0..=pu {
                let g = self.space.dof(patch, (fv + b) * nu + (fu + a));
                let pg = pgrads[b * (pu + 1) + a];
                let px = (jac[1][1] * pg[0] - jac[1][0] * pg[1]) / det;
                let py = (-jac[0][1] * pg[0] + jac[0][0] * pg[1]) / det;
                gx += px * self.a[g];
                gy += py * self.a[g];
            }
        }
        [gy, -gx]
    }

    /// Flux density at a physical point (point inversion first).
    pub fn b_at(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        let (patch, uv) = self.model.locate(x)?;
        Ok(self.b_at_param(patch, uv[0], uv[1]))
    }

    /// Flux densities at many physical points.
    pub fn b_many(&self, pts: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        pts.iter().map(|&x| self.b_at(x)).collect()
    }

    /// Mean of `|B|^pow` over a set of points.
    pub fn mean_b_pow(&self, pts: &[[f64; 2]], pow: f64) -> Result<f64> {
        let mut s = 0.0;
        for &x in pts {
            let b = self.b_at(x)?;
            s += (b[0] * b[0] + b[1] * b[1]).sqrt().powf(pow);
        }
        Ok(s / pts.len() as f64)
    }
}

/// L2 norm of `A_h - a_exact` over the model, by element quadrature.
/// Magnetic field energy per unit length, `1/2 * integral(grad A . nu_perp
/// grad A)`, over the space's patches.  `a` is the full coefficient vector.
pub fn magnetic_energy(
    model: &MultipatchModel,
    space: &DiscreteSpace,
    a: &[f64],
    materials: &dyn MaterialEval,
) -> f64 {
    let mut w = 0.0;
    for_each_element(model, space, |el| {
        for qp in el.qpts {
            let mut g = [0.0; 2];
            for k in 0..el.dofs.len() {
                g[0] += qp.grads[k][0] * a[el.dofs[k]];
                g[1] += qp.grads[k][1] * a[el.dofs[k]];
            }
            let nu = materials.nu_perp(el.patch, qp.x);
            let ng = [
                nu[0][0] * g[0] + nu[0][1] * g[1],
                nu[1][0] * g[0] + nu[1][1] * g[1],
            ];
            w += 0.5 * qp.w * (g[0] * ng[0] + g[1] * ng[1]);
        }
    });
    w
}

pub fn l2_error(
    model: &MultipatchModel,
    space: &DiscreteSpace,
    a: &[f64],
    exact: &dyn Fn([f64; 2]) -> f64,
) -> f64 {
    let mut err2 = 0.0;
    for_each_element(model, space, |el| {
        for qp in el.qpts {
            let ah: f64 = (0..el.dofs.len())
                .map(|k| qp.vals[k] * a[el.dofs[k]])
                .sum();
            let d = ah - exact(qp.x);
            err2 += qp.w * d * d;
        }
    });
    err2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::builders::{disc_in_box, unit_square};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Manufactured Poisson problem on the unit square: with unit
    /// reluctivity, `A = sin(pi x) sin(pi y)` needs the source
    /// `j = 2 pi^2 A` and homogeneous boundary values.
    fn mms_l2_error(degree: usize, n: usize) -> f64 {
        let model = unit_square(degree, n).unwrap();
        struct UnitNu;
        impl MaterialEval for UnitNu {
            fn nu_perp(&self, _: usize, _: [f64; 2]) -> [[f64; 2]; 2] {
                [[1.0, 0.0], [0.0, 1.0]]
            }
            fn rhs_perp(&self, _: usize, _: [f64; 2]) -> [f64; 2] {
                [0.0, 0.0]
            }
        }
        let j = |_: usize, x: [f64; 2]| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
        let sol = solve_magnetostatic(&model, &UnitNu, Some(&j)).unwrap();
        l2_error(&model, &sol.space, &sol.a, &|x| {
            (PI * x[0]).sin() * (PI * x[1]).sin()
        })
    }

    #[test]
    fn manufactured_solution_converges_at_the_expected_rate() {
        // Quadratic elements: halving h should shrink the L2 error by
        // about 2^3.
        let e1 = mms_l2_error(2, 4);
        let e2 = mms_l2_error(2, 8);
        let rate = (e1 / e2).log2();
        assert!(
            (2.6..=3.4).contains(&rate),
            "observed L2 rate {rate:.2} for quadratic elements"
        );
    }

    #[test]
    fn magnetized_cylinder_has_the_analytic_interior_field() {
        // A transversely magnetized cylinder with unit relative
        // permeability carries the uniform interior field B = B_r / 2.
        // The grounded box at 20 radii perturbs that by roughly (a/20a)^2.
        let b_r = 1.2;
        let model = disc_in_box(0.01, [b_r, 0.0], 0.2, 3).unwrap();
        let sol = solve_magnetostatic(&model, &ModelMaterials(&model), None).unwrap();
        assert!(sol.residual <= RESIDUAL_TOL);
        let eval = FieldEvaluator {
            model: &model,
            space: &sol.space,
            a: &sol.a,
        };
        for &x in &[
            [0.0, 0.0],
            [0.003, 0.002],
            [-0.004, 0.0],
            [0.0, -0.0035],
            [-0.002, -0.002],
        ] {
            let b = eval.b_at(x).unwrap();
            assert_relative_eq!(b[0], b_r / 2.0, max_relative = 4e-3);
            assert!(b[1].abs() < 4e-3 * b_r);
        }
        // The exterior field is a dipole: at (0, 2a) on the y axis the
        // x-component is -B_r/2 * (a/r)^2 = -B_r/8.
        let b_out = eval.b_at([0.0, 0.02]).unwrap();
        assert_relative_eq!(b_out[0], -b_r / 8.0, max_relative = 2e-2);

        // A tight grounded box (10 radii) shaves about (a/R)^2 off the
        // interior field but stays within one percent.
        let tight = disc_in_box(0.01, [b_r, 0.0], 0.1, 3).unwrap();
        let sol_t = solve_magnetostatic(&tight, &ModelMaterials(&tight), None).unwrap();
        let eval_t = FieldEvaluator {
            model: &tight,
            space: &sol_t.space,
            a: &sol_t.a,
        };
        let b_c = eval_t.b_at([0.0, 0.0]).unwrap();
        assert_relative_eq!(b_c[0], b_r / 2.0, max_relative = 1e-2);
        assert!((b_c[0] - b_r / 2.0).abs() / (b_r / 2.0) > 5e-3);
    }

    #[test]
    fn potential_is_continuous_across_patch_interfaces() {
        let model = disc_in_box(0.01, [1.0, 0.0], 0.1, 2).unwrap();
        let sol = solve_magnetostatic(&model, &ModelMaterials(&model), None).unwrap();
        let eval = FieldEvaluator {
            model: &model,
            space: &sol.space,
            a: &sol.a,
        };
        // Points on the x axis are shared between quadrant-1 and
        // quadrant-4 core patches (v = 0 edges of both).
        for t in [0.15, 0.5, 0.82] {
            let a_q1 = eval.a_z(0, t, 0.0);
            let a_q4 = eval.a_z(3, 0.0, t);
            assert_relative_eq!(a_q1, a_q4, max_relative = 1e-12);
        }
    }

    #[test]
    fn dirichlet_boundary_holds_exactly() {
        let model = disc_in_box(0.01, [1.0, 0.0], 0.08, 2).unwrap();
        let sol = solve_magnetostatic(&model, &ModelMaterials(&model), None).unwrap();
        let eval = FieldEvaluator {
            model: &model,
            space: &sol.space,
            a: &sol.a,
        };
        // Outer ring patches carry the Dirichlet edge at u = 1.
        for (p, mp) in model.patches.iter().enumerate() {
            if mp.label == "air_ring_1" {
                for t in [0.0, 0.3, 0.7, 1.0] {
                    assert_eq!(eval.a_z(p, 1.0, t), 0.0);
                }
            }
        }
    }

    #[test]
    fn restricted_spaces_number_only_their_patches() {
        let model = disc_in_box(0.01, [1.0, 0.0], 0.1, 2).unwrap();
        let full = DiscreteSpace::new(&model);
        let sub = DiscreteSpace::on_patches(&model, &[0, 1, 2, 3], false);
        assert!(sub.n_dofs < full.n_dofs);
        assert_eq!(sub.n_free, sub.n_dofs);
        assert!(sub.covers(0) && !sub.covers(4));
        // The four core quarters hold 4 x 16 control points; the four
        // seams identify 3 non-center points each (12 merges) and the
        // center collapses 4 copies into 1 (3 more).
        assert_eq!(sub.n_dofs, 4 * 16 - 12 - 3);
    }
}
