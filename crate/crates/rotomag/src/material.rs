//! Magnetic material models.
//!
//! Covers the linear constitutive law `B = mu * H + B_r` in its
//! two-dimensional perpendicular form, Voigt/Reuss homogenization bounds for
//! layered composites, rotated anisotropy tensors, and the smooth
//! remanence-to-permeability interpolation used by the free-material design
//! loop (fully dense remanence behaves like permanent-magnet material, zero
//! remanence like soft iron).

use crate::error::{Error, Result};
use crate::MU0;

/// Relative permeability of soft iron in its linear operating range.
pub const MU_R_IRON: f64 = 1200.0;
/// Relative permeability of sintered NdFeB permanent-magnet material.
pub const MU_R_PM: f64 = 1.05;
/// Remanence magnitude of the permanent-magnet grade [T].
pub const B_R_MAG: f64 = 1.425;
/// Penalization exponent of the remanence-to-permeability interpolation.
pub const SIMP_Q: f64 = 4.0;
/// Smoothing width for remanence norms near zero [T].
pub const B_R_SMOOTH_EPS: f64 = 1e-6;
/// Isotropic relative permeability of a packed-bed regenerator segment.
pub const MU_R_AMR_ISO: f64 = 200.0;
/// Solid fraction of the layered regenerator composite.
pub const AMR_SOLID_FRACTION: f64 = 0.6;
/// Relative permeability of the regenerator solid constituent.
pub const MU_R_AMR_SOLID: f64 = 500.0;
/// Relative permeability of the heat-transfer fluid.
pub const MU_R_AMR_FLUID: f64 = 1.0;
/// Rounded radial (parallel-lamination) permeability used by the anisotropic
/// regenerator preset.
pub const MU_R_AMR_RAD: f64 = 300.0;
/// Rounded azimuthal (series-lamination) permeability used by the
/// anisotropic regenerator preset.
pub const MU_R_AMR_AZI: f64 = 2.5;

/// Voigt (parallel/arithmetic) bound of a two-phase laminate.
pub fn voigt(f1: f64, mu1: f64, mu2: f64) -> f64 {
    f1 * mu1 + (1.0 - f1) * mu2
}

/// Reuss (series/harmonic) bound of a two-phase laminate.
pub fn reuss(f1: f64, mu1: f64, mu2: f64) -> f64 {
    1.0 / (f1 / mu1 + (1.0 - f1) / mu2)
}

/// Symmetric 2x2 tensor with principal values `mu_par` (along the direction
/// at angle `alpha`) and `mu_perp` (perpendicular to it):
/// `R(alpha) diag(mu_par, mu_perp) R(alpha)^T`.
pub fn rotated_tensor(mu_par: f64, mu_perp: f64, alpha: f64) -> [[f64; 2]; 2] {
    let (s, c) = alpha.sin_cos();
    [
        [
            mu_par * c * c + mu_perp * s * s,
            (mu_par - mu_perp) * s * c,
        ],
        [
            (mu_par - mu_perp) * s * c,
            mu_par * s * s + mu_perp * c * c,
        ],
    ]
}

/// Perpendicular reluctivity tensor `nu = mu^T / det(mu)` of the planar
/// field problem, for a permeability tensor given in relative units.
///
/// For an isotropic material this reduces to `I / (mu0 * mu_r)`; for an
/// anisotropic one the eigenvalues are the reciprocals of the *other*
/// principal permeability (eigenvectors keep their directions, eigenvalues
/// swap roles).
pub fn perp_reluctivity(mu_r: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = mu_r[0][0] * mu_r[1][1] - mu_r[0][1] * mu_r[1][0];
    let f = 1.0 / (MU0 * det);
    [
        [mu_r[0][0] * f, mu_r[1][0] * f],
        [mu_r[0][1] * f, mu_r[1][1] * f],
    ]
}

/// In-plane rotation of the remanence vector by 90 degrees,
/// `(bx, by) -> (-by, bx)`, as it enters the scalar-potential weak form.
pub fn perp_remanence(b_r: [f64; 2]) -> [f64; 2] {
    [-b_r[1], b_r[0]]
}

/// Smoothed norm `sqrt(bx^2 + by^2 + eps^2)` of a remanence vector, with the
/// gradient weights `d||b||/dbx, d||b||/dby` returned alongside.
pub fn smooth_norm(bx: f64, by: f64, eps: f64) -> (f64, f64, f64) {
    let n = (bx * bx + by * by + eps * eps).sqrt();
    (n, bx / n, by / n)
}

/// Remanence-to-permeability interpolation of the design material:
/// a relative remanence magnitude `b_rel` in [0, 1] maps to
/// `mu_r = mu_pm + (1 - b_rel)^q * (mu_iron - mu_pm)`.
///
/// Returns `(mu_r, d mu_r / d b_rel)`.  Arguments above 1 clamp to the
/// permanent-magnet value with zero slope (the magnitude constraint of the
/// design problem is responsible for pushing iterates back inside).
pub fn simp_permeability(b_rel: f64, q: f64, mu_r_pm: f64, mu_r_iron: f64) -> (f64, f64) {
    let b = b_rel.clamp(0.0, 1.0);
    let span = mu_r_iron - mu_r_pm;
    let mu = mu_r_pm + (1.0 - b).powf(q) * span;
    let dmu = if b_rel > 1.0 || b_rel < 0.0 {
        0.0
    } else {
        -q * (1.0 - b).powf(q - 1.0) * span
    };
    (mu, dmu)
}

/// Material attached to one geometry patch.
#[derive(Debug, Clone, PartialEq)]
pub enum PatchMaterial {
    /// Isotropic linear material with a (possibly zero) uniform remanence.
    Uniform { mu_r: f64, b_r: [f64; 2] },
    /// Radially laminated anisotropic composite; the principal direction at
    /// a point (x, y) is `atan2(y, x)`.
    RadialAniso { mu_r_rad: f64, mu_r_azi: f64 },
    /// Remanence-design region; permeability and remanence come from the
    /// active design field.
    Design,
}

impl PatchMaterial {
    pub fn iron() -> Self {
        PatchMaterial::Uniform {
            mu_r: MU_R_IRON,
            b_r: [0.0, 0.0],
        }
    }

    pub fn air() -> Self {
        PatchMaterial::Uniform {
            mu_r: 1.0,
            b_r: [0.0, 0.0],
        }
    }

    /// NdFeB magnet magnetized along `dir` (normalized internally).
    pub fn ndfeb(dir: [f64; 2]) -> Self {
        let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
        PatchMaterial::Uniform {
            mu_r: MU_R_PM,
            b_r: [B_R_MAG * dir[0] / n, B_R_MAG * dir[1] / n],
        }
    }

    pub fn amr_iso() -> Self {
        PatchMaterial::Uniform {
            mu_r: MU_R_AMR_ISO,
            b_r: [0.0, 0.0],
        }
    }

    pub fn amr_aniso_radial() -> Self {
        PatchMaterial::RadialAniso {
            mu_r_rad: MU_R_AMR_RAD,
            mu_r_azi: MU_R_AMR_AZI,
        }
    }

    /// Looks a preset up by its config name.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "iron" => Ok(Self::iron()),
            "air" => Ok(Self::air()),
            "ndfeb" => Ok(Self::ndfeb([0.0, 1.0])),
            "amr_iso_200" => Ok(Self::amr_iso()),
            "amr_aniso_radial" => Ok(Self::amr_aniso_radial()),
            _ => Err(Error::config(format!(
                "unknown material preset '{name}' \
                 (known: iron, air, ndfeb, amr_iso_200, amr_aniso_radial)"
            ))),
        }
    }

    /// Perpendicular reluctivity tensor at a physical point.
    pub fn nu_perp_at(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match *self {
            PatchMaterial::Uniform { mu_r, .. } => {
                let nu = 1.0 / (MU0 * mu_r);
                [[nu, 0.0], [0.0, nu]]
            }
            PatchMaterial::RadialAniso { mu_r_rad, mu_r_azi } => {
                let alpha = x[1].atan2(x[0]);
                perp_reluctivity(rotated_tensor(mu_r_rad, mu_r_azi, alpha))
            }
            PatchMaterial::Design => {
                panic!("design material requires the active design field")
            }
        }
    }

    /// Uniform remanence of the patch (zero for non-magnet materials).
    pub fn remanence(&self) -> [f64; 2] {
        match *self {
            PatchMaterial::Uniform { b_r, .. } => b_r,
            _ => [0.0, 0.0],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn voigt_and_reuss_bounds_of_the_regenerator_laminate() {
        let v = voigt(AMR_SOLID_FRACTION, MU_R_AMR_SOLID * MU0, MU_R_AMR_FLUID * MU0);
        assert_relative_eq!(v, 300.4 * MU0, max_relative = 1e-12);
        let r = reuss(AMR_SOLID_FRACTION, MU_R_AMR_SOLID * MU0, MU_R_AMR_FLUID * MU0);
        assert_relative_eq!(r, MU0 / 0.4012, max_relative = 1e-12);
        // Bounds bracket: reuss <= voigt always.
        assert!(r < v);
    }

    #[test]
    fn rotated_tensor_at_45_degrees() {
        let (a, b) = (7.0, 3.0);
        let t = rotated_tensor(a, b, std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(t[0][0], (a + b) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(t[0][1], (a - b) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(t[1][0], t[0][1], max_relative = 1e-15);
    }

    #[test]
    fn rotated_tensor_eigenvalues_are_invariant() {
        let (a, b) = (300.4, 2.4925);
        for k in 0..12 {
            let alpha = k as f64 * 0.5;
            let t = rotated_tensor(a, b, alpha);
            let tr = t[0][0] + t[1][1];
            let det = t[0][0] * t[1][1] - t[0][1] * t[1][0];
            let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
            let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
            assert_relative_eq!(l1, a, max_relative = 1e-12);
            assert_relative_eq!(l2, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn perp_reluctivity_swaps_principal_roles() {
        let (mu_par, mu_perp, alpha) = (300.4, 2.4925, 0.7);
        let nu = perp_reluctivity(rotated_tensor(mu_par, mu_perp, alpha));
        // Eigenvector along alpha must map to 1 / (mu0 * mu_perp).
        let (s, c) = alpha.sin_cos();
        let vx = nu[0][0] * c + nu[0][1] * s;
        let vy = nu[1][0] * c + nu[1][1] * s;
        assert_relative_eq!(vx, c / (MU0 * mu_perp), max_relative = 1e-12);
        assert_relative_eq!(vy, s / (MU0 * mu_perp), max_relative = 1e-12);
        // Isotropic special case.
        let iso = perp_reluctivity([[200.0, 0.0], [0.0, 200.0]]);
        assert_relative_eq!(iso[0][0], 1.0 / (200.0 * MU0), max_relative = 1e-14);
        assert_relative_eq!(iso[0][1], 0.0, epsilon = 1e-20);
    }

    #[test]
    fn perp_remanence_rotates_by_90_degrees() {
        assert_eq!(perp_remanence([1.0, 2.0]), [-2.0, 1.0]);
    }

    #[test]
    fn design_permeability_endpoints_and_midpoint() {
        let (mu0v, _) = simp_permeability(0.0, SIMP_Q, MU_R_PM, MU_R_IRON);
        assert_relative_eq!(mu0v, MU_R_IRON, max_relative = 1e-15);
        let (mu1v, _) = simp_permeability(1.0, SIMP_Q, MU_R_PM, MU_R_IRON);
        assert_relative_eq!(mu1v, MU_R_PM, max_relative = 1e-15);
        let (muh, _) = simp_permeability(0.5, SIMP_Q, MU_R_PM, MU_R_IRON);
        assert_relative_eq!(muh, 1.05 + 0.0625 * (1200.0 - 1.05), max_relative = 1e-14);
        // Monotone decreasing in the remanence fraction.
        let mut prev = f64::INFINITY;
        for k in 0..=20 {
            let (mu, _) = simp_permeability(k as f64 / 20.0, SIMP_Q, MU_R_PM, MU_R_IRON);
            assert!(mu < prev);
            prev = mu;
        }
    }

    #[test]
    fn design_permeability_slope_matches_finite_differences() {
        let h = 1e-7;
        for &b in &[0.1, 0.3, 0.5, 0.8, 0.95] {
            let (_, d) = simp_permeability(b, SIMP_Q, MU_R_PM, MU_R_IRON);
            let (fp, _) = simp_permeability(b + h, SIMP_Q, MU_R_PM, MU_R_IRON);
            let (fm, _) = simp_permeability(b - h, SIMP_Q, MU_R_PM, MU_R_IRON);
            assert_relative_eq!(d, (fp - fm) / (2.0 * h), max_relative = 1e-6);
        }
        // Clamped outside the design range.
        let (mu, d) = simp_permeability(1.3, SIMP_Q, MU_R_PM, MU_R_IRON);
        assert_eq!((mu, d), (MU_R_PM, 0.0));
    }

    #[test]
    fn smooth_norm_has_unit_gradient_away_from_zero() {
        let (n, gx, gy) = smooth_norm(3.0, 4.0, 1e-6);
        assert_relative_eq!(n, 5.0, max_relative = 1e-9);
        assert_relative_eq!(gx, 0.6, max_relative = 1e-9);
        assert_relative_eq!(gy, 0.8, max_relative = 1e-9);
        // At zero the norm is eps and the gradient vanishes smoothly.
        let (n0, g0x, g0y) = smooth_norm(0.0, 0.0, 1e-6);
        assert_eq!(n0, 1e-6);
        assert_eq!((g0x, g0y), (0.0, 0.0));
    }

    #[test]
    fn presets_resolve_by_name() {
        assert_eq!(PatchMaterial::preset("iron").unwrap(), PatchMaterial::iron());
        assert_eq!(PatchMaterial::preset("air").unwrap(), PatchMaterial::air());
        assert!(matches!(
            PatchMaterial::preset("amr_aniso_radial").unwrap(),
            PatchMaterial::RadialAniso { .. }
        ));
        assert!(PatchMaterial::preset("unobtainium").is_err());
        let m = PatchMaterial::preset("ndfeb").unwrap();
        assert_relative_eq!(m.remanence()[1], B_R_MAG, max_relative = 1e-15);
    }
}
