//! Multipatch geometry models.
//!
//! A [`MultipatchModel`] is a set of exactly-represented NURBS patches with
//! per-patch materials.  Patch-to-patch topology is not stored by builders;
//! it is recovered by [`detect_interfaces`], which geometrically matches edge
//! control nets (conforming interfaces only).  Builders mark homogeneous
//! Dirichlet edges explicitly.
//!
//! All coordinates are SI meters.  Patches are right-handed (positive mapped
//! Jacobian determinant); for annular constructions the u-direction runs
//! radially outward and v counterclockwise.

pub mod builders;

use crate::error::{Error, Result};
use crate::material::PatchMaterial;
use crate::quadrature::gauss;
use crate::spline::{NurbsPatch, PatchEdge};

/// Relative tolerance (times patch diameter) for conforming-interface and
/// exact-conic checks.
pub const GEOM_TOL_REL: f64 = 1e-12;

/// One patch of a model together with its material and a region label.
#[derive(Debug, Clone)]
pub struct ModelPatch {
    pub patch: NurbsPatch,
    pub material: PatchMaterial,
    /// Human-readable region name ("yoke", "pole_arc", ...), used in exports.
    pub label: String,
}

/// A conforming interface between two patch edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub patch_a: usize,
    pub edge_a: PatchEdge,
    pub patch_b: usize,
    pub edge_b: PatchEdge,
    /// True if edge b runs opposite to edge a.
    pub reversed: bool,
}

/// A multipatch domain with materials and boundary conditions.
#[derive(Debug, Clone, Default)]
pub struct MultipatchModel {
    pub patches: Vec<ModelPatch>,
    /// Edges with homogeneous Dirichlet data (vector potential = 0).
    pub dirichlet: Vec<(usize, PatchEdge)>,
    /// Patches whose material is driven by the active design field.
    pub design_patches: Vec<usize>,
}

impl MultipatchModel {
    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    /// Appends all patches of `other`, returning the index offset that was
    /// applied to them.
    pub fn merge(&mut self, other: &MultipatchModel) -> usize {
        let offset = self.patches.len();
        self.patches.extend(other.patches.iter().cloned());
        self.dirichlet
            .extend(other.dirichlet.iter().map(|&(p, e)| (p + offset, e)));
        self.design_patches
            .extend(other.design_patches.iter().map(|&p| p + offset));
        offset
    }

    /// Uniformly refines every patch (`sub_u` x `sub_v` pieces per span).
    pub fn refined_uniform(&self, sub_u: usize, sub_v: usize) -> MultipatchModel {
        let mut out = self.clone();
        for mp in &mut out.patches {
            mp.patch = mp.patch.refined(sub_u, sub_v);
        }
        out
    }

    /// Refines with per-patch subdivision counts.
    pub fn refined_per_patch(&self, subs: &[(usize, usize)]) -> MultipatchModel {
        assert_eq!(subs.len(), self.patches.len());
        let mut out = self.clone();
        for (mp, &(su, sv)) in out.patches.iter_mut().zip(subs) {
            mp.patch = mp.patch.refined(su, sv);
        }
        out
    }

    /// Largest control-net diameter over all patches (tolerance scale).
    pub fn diameter(&self) -> f64 {
        self.patches
            .iter()
            .map(|p| p.patch.diameter())
            .fold(0.0, f64::max)
    }

    /// Rigidly rotates the whole model about the origin by `beta` radians,
    /// co-rotating uniform remanence vectors.
    pub fn rotated(&self, beta: f64) -> MultipatchModel {
        let (s, c) = beta.sin_cos();
        let mut out = self.clone();
        for mp in &mut out.patches {
            for p in &mut mp.patch.ctrl {
                *p = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
            }
            if let PatchMaterial::Uniform { mu_r, b_r } = mp.material {
                mp.material = PatchMaterial::Uniform {
                    mu_r,
                    b_r: [c * b_r[0] - s * b_r[1], s * b_r[0] + c * b_r[1]],
                };
            }
        }
        out
    }

    /// Total area from the geometry map (Gauss quadrature of det J).
    pub fn total_area(&self) -> f64 {
        (0..self.patches.len()).map(|i| self.patch_area(i)).sum()
    }

    /// Area of one patch.  The high quadrature order makes the rational
    /// integrand exact to machine precision.
    pub fn patch_area(&self, idx: usize) -> f64 {
        let patch = &self.patches[idx].patch;
        let rule = gauss(12);
        let mut area = 0.0;
        for su in patch.ku.nonempty_spans() {
            let (ua, ub) = (patch.ku.knots()[su], patch.ku.knots()[su + 1]);
            for sv in patch.kv.nonempty_spans() {
                let (va, vb) = (patch.kv.knots()[sv], patch.kv.knots()[sv + 1]);
                for (u, wu) in rule.mapped(ua, ub) {
                    for (v, wv) in rule.mapped(va, vb) {
                        let (_, j) = patch.point_jacobian(u, v);
                        area += wu * wv * (j[0][0] * j[1][1] - j[0][1] * j[1][0]);
                    }
                }
            }
        }
        area
    }

    /// Area covered by magnet material (uniform patches with nonzero
    /// remanence).
    pub fn magnet_area(&self) -> f64 {
        (0..self.patches.len())
            .filter(|&i| {
                let b = self.patches[i].material.remanence();
                b[0] != 0.0 || b[1] != 0.0
            })
            .map(|i| self.patch_area(i))
            .sum()
    }

    /// Checks that the mapped Jacobian determinant is positive and bounded
    /// away from zero at all assembly quadrature points.
    pub fn check_jacobians(&self) -> Result<()> {
        for (pi, mp) in self.patches.iter().enumerate() {
            let patch = &mp.patch;
            let floor = 1e-14 * patch.diameter().powi(2);
            let n_q = patch.ku.degree().max(patch.kv.degree()) + 1;
            let rule = gauss(n_q);
            for su in patch.ku.nonempty_spans() {
                let (ua, ub) = (patch.ku.knots()[su], patch.ku.knots()[su + 1]);
                for sv in patch.kv.nonempty_spans() {
                    let (va, vb) = (patch.kv.knots()[sv], patch.kv.knots()[sv + 1]);
                    for (u, _) in rule.mapped(ua, ub) {
                        for (v, _) in rule.mapped(va, vb) {
                            let (_, j) = patch.point_jacobian(u, v);
                            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                            if !(det > floor) {
                                return Err(Error::geometry(format!(
                                    "patch {pi} ('{}') has degenerate Jacobian {det:e} \
                                     at (u, v) = ({u}, {v})",
                                    mp.label
                                )));
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Locates a physical point, returning `(patch index, (u, v))`.
    pub fn locate(&self, x: [f64; 2]) -> Result<(usize, [f64; 2])> {
        // Cheap bounding-box prefilter, then Newton inversion.
        for (pi, mp) in self.patches.iter().enumerate() {
            let (lo, hi) = mp.patch.bbox();
            let margin = 1e-9 * mp.patch.diameter().max(1e-30);
            if x[0] < lo[0] - margin
                || x[0] > hi[0] + margin
                || x[1] < lo[1] - margin
                || x[1] > hi[1] + margin
            {
                continue;
            }
            let tol = 1e-10 * mp.patch.diameter().max(1e-30);
            if let Some(uv) = mp.patch.locate(x, tol) {
                return Ok((pi, uv));
            }
        }
        Err(Error::geometry(format!(
            "point ({}, {}) is not on any patch",
            x[0], x[1]
        )))
    }
}

/// Compares two edge curves for conforming coincidence.
/// Returns `Some(reversed)` when they match.
fn edges_match(
    a: &crate::spline::NurbsCurve,
    b: &crate::spline::NurbsCurve,
    tol: f64,
) -> Option<bool> {
    if a.kv.degree() != b.kv.degree() || a.ctrl.len() != b.ctrl.len() {
        return None;
    }
    let n = a.ctrl.len();
    let ka = a.kv.knots();
    let kb = b.kv.knots();
    let close = |p: [f64; 2], q: [f64; 2]| (p[0] - q[0]).abs() <= tol && (p[1] - q[1]).abs() <= tol;
    // Same orientation: identical knots, control points and weights.
    let fwd_knots = ka
        .iter()
        .zip(kb.iter())
        .all(|(&x, &y)| (x - y).abs() <= 1e-12);
    if fwd_knots
        && (0..n).all(|i| {
            close(a.ctrl[i], b.ctrl[i]) && (a.weights[i] - b.weights[i]).abs() <= 1e-9
        })
    {
        return Some(false);
    }
    // Reversed orientation: mirrored knot vector.
    let (lo_a, hi_a) = (ka[0], ka[ka.len() - 1]);
    let rev_knots = ka
        .iter()
        .zip(kb.iter().rev())
        .all(|(&x, &y)| (x - (lo_a + hi_a - y)).abs() <= 1e-12);
    if rev_knots
        && (0..n).all(|i| {
            close(a.ctrl[i], b.ctrl[n - 1 - i])
                && (a.weights[i] - b.weights[n - 1 - i]).abs() <= 1e-9
        })
    {
        return Some(true);
    }
    None
}

/// Detects all conforming interfaces of a model by matching edge control
/// nets geometrically.
pub fn detect_interfaces(model: &MultipatchModel) -> Vec<Interface> {
    let n = model.n_patches();
    let mut edges: Vec<(usize, PatchEdge, crate::spline::NurbsCurve)> = Vec::new();
    for (pi, mp) in model.patches.iter().enumerate() {
        for &e in &PatchEdge::ALL {
            edges.push((pi, e, mp.patch.edge_curve(e)));
        }
    }
    let tol = GEOM_TOL_REL * model.diameter().max(1e-30) * 1e3;
    let mut out = Vec::new();
    for i in 0..edges.len() {
        for j in i + 1..edges.len() {
            if edges[i].0 == edges[j].0 {
                continue;
            }
            if let Some(reversed) = edges_match(&edges[i].2, &edges[j].2, tol) {
                out.push(Interface {
                    patch_a: edges[i].0,
                    edge_a: edges[i].1,
                    patch_b: edges[j].0,
                    edge_b: edges[j].1,
                    reversed,
                });
            }
        }
    }
    let _ = n;
    out
}

/// Verifies that every detected interface coincides pointwise (sampled) and
/// that no edge participates in more than one interface.
pub fn validate_conformity(model: &MultipatchModel) -> Result<Vec<Interface>> {
    let interfaces = detect_interfaces(model);
    let mut seen = std::collections::HashSet::new();
    for itf in &interfaces {
        for key in [(itf.patch_a, itf.edge_a), (itf.patch_b, itf.edge_b)] {
            if !seen.insert(key) {
                return Err(Error::geometry(format!(
                    "edge {:?} of patch {} participates in multiple interfaces \
                     (non-conforming or duplicated geometry)",
                    key.1, key.0
                )));
            }
        }
        // Pointwise sample check of the mapped curves.
        let ca = model.patches[itf.patch_a].patch.edge_curve(itf.edge_a);
        let cb = model.patches[itf.patch_b].patch.edge_curve(itf.edge_b);
        let tol = GEOM_TOL_REL * model.diameter().max(1e-30) * 1e3;
        let (a0, a1) = ca.kv.domain();
        let (b0, b1) = cb.kv.domain();
        for k in 0..=8 {
            let t = k as f64 / 8.0;
            let pa = ca.point(a0 + (a1 - a0) * t);
            let tb = if itf.reversed { 1.0 - t } else { t };
            let pb = cb.point(b0 + (b1 - b0) * tb);
            if (pa[0] - pb[0]).abs() > tol || (pa[1] - pb[1]).abs() > tol {
                return Err(Error::geometry(format!(
                    "interface between patches {} and {} does not coincide",
                    itf.patch_a, itf.patch_b
                )));
            }
        }
    }
    Ok(interfaces)
}

#[cfg(test)]
mod tests {
    use super::builders::*;
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn annulus_sector_tracks_exact_circles() {
        let patch = annulus_sector(0.04, 0.05, 0.0, std::f64::consts::FRAC_PI_2).unwrap();
        for k in 0..=40 {
            let v = k as f64 / 40.0;
            let inner = patch.point(0.0, v);
            let outer = patch.point(1.0, v);
            let ri = (inner[0] * inner[0] + inner[1] * inner[1]).sqrt();
            let ro = (outer[0] * outer[0] + outer[1] * outer[1]).sqrt();
            assert!((ri - 0.04).abs() < 1e-14);
            assert!((ro - 0.05).abs() < 1e-14);
        }
        // Right-handed.
        let (_, j) = patch.point_jacobian(0.5, 0.5);
        assert!(j[0][0] * j[1][1] - j[0][1] * j[1][0] > 0.0);
    }

    #[test]
    fn annulus_sector_rejects_wide_openings() {
        assert!(annulus_sector(1.0, 2.0, 0.0, 2.0).is_err());
        assert!(annulus_sector(2.0, 1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn annulus_ring_area_and_conformity() {
        let model = annulus_ring(0.04, 0.05, 8, PatchMaterial::air(), "gap").unwrap();
        let exact = std::f64::consts::PI * (0.05f64.powi(2) - 0.04f64.powi(2));
        assert_relative_eq!(model.total_area(), exact, max_relative = 1e-12);
        let interfaces = validate_conformity(&model).unwrap();
        // A closed ring of 8 sectors has 8 radial interfaces.
        assert_eq!(interfaces.len(), 8);
        model.check_jacobians().unwrap();
    }

    #[test]
    fn square_core_disc_is_exact_and_conforming() {
        let model = square_core_disc(0.04, 0.5, 0.5, PatchMaterial::air(), "disc").unwrap();
        assert_eq!(model.n_patches(), 12);
        let exact = std::f64::consts::PI * 0.04f64.powi(2);
        assert_relative_eq!(model.total_area(), exact, max_relative = 1e-12);
        let interfaces = validate_conformity(&model).unwrap();
        // 4 core-core + 8 core-octant + 8 octant-octant.
        assert_eq!(interfaces.len(), 20);
        model.check_jacobians().unwrap();
        // Boundary is the exact circle.
        for (pi, mp) in model.patches.iter().enumerate() {
            if !mp.label.contains("collar") {
                continue;
            }
            let _ = pi;
            for k in 0..=16 {
                let v = k as f64 / 16.0;
                let p = mp.patch.point(1.0, v);
                let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
                assert!((r - 0.04).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn refinement_keeps_conformity_and_area() {
        // Equal subdivision preserves conformity on the disc (quadrant
        // patches have swapped parametric directions, so unequal counts
        // would break edge matching there).
        let model = square_core_disc(1.0, 0.6, 0.6, PatchMaterial::air(), "disc")
            .unwrap()
            .refined_uniform(3, 3);
        let exact = std::f64::consts::PI;
        assert_relative_eq!(model.total_area(), exact, max_relative = 1e-12);
        let interfaces = validate_conformity(&model).unwrap();
        assert_eq!(interfaces.len(), 20);
        model.check_jacobians().unwrap();

        // Anisotropic refinement is fine on direction-aligned rings.
        let ring = annulus_ring(0.5, 1.0, 8, PatchMaterial::air(), "ring")
            .unwrap()
            .refined_uniform(3, 2);
        assert_relative_eq!(
            ring.total_area(),
            0.75 * std::f64::consts::PI,
            max_relative = 1e-12
        );
        assert_eq!(validate_conformity(&ring).unwrap().len(), 8);
    }

    #[test]
    fn rectangle_core_disc_handles_anisotropic_cores() {
        let model = square_core_disc(0.04, 0.7, 0.4, PatchMaterial::air(), "disc").unwrap();
        assert_relative_eq!(
            model.total_area(),
            std::f64::consts::PI * 0.04f64.powi(2),
            max_relative = 1e-12
        );
        validate_conformity(&model).unwrap();
        model.check_jacobians().unwrap();
    }

    #[test]
    fn rotation_rotates_control_points_and_remanence() {
        let model = annulus_ring(
            1.0,
            2.0,
            4,
            PatchMaterial::ndfeb([0.0, 1.0]),
            "ring",
        )
        .unwrap();
        let rot = model.rotated(std::f64::consts::FRAC_PI_2);
        let b = rot.patches[0].material.remanence();
        assert_relative_eq!(b[0], -crate::material::B_R_MAG, max_relative = 1e-12);
        assert!(b[1].abs() < 1e-12);
        assert_relative_eq!(rot.total_area(), model.total_area(), max_relative = 1e-12);
    }

    #[test]
    fn locate_finds_points_in_models() {
        let model = square_core_disc(0.04, 0.5, 0.5, PatchMaterial::air(), "disc").unwrap();
        for &x in &[[0.01, 0.005], [0.03, 0.02], [-0.025, -0.01], [0.0, 0.039]] {
            let (pi, uv) = model.locate(x).unwrap();
            let y = model.patches[pi].patch.point(uv[0], uv[1]);
            assert!((x[0] - y[0]).abs() < 1e-9 && (x[1] - y[1]).abs() < 1e-9);
        }
        assert!(model.locate([0.05, 0.05]).is_err());
    }
}
