//! Constructors for the exact NURBS geometries used by the toolkit.
//!
//! All circular arcs are single rational quadratic segments (opening angle
//! at most 90 degrees) with the standard weight construction, so circles are
//! represented exactly.  Ring-shaped regions are "collar" patches ruled in
//! homogeneous coordinates between two conforming boundary rows; the disc is
//! covered by a rectangular core (four quarter patches) surrounded by eight
//! collar patches reaching the circle.
//!
//! Patch orientation convention: u runs from the inner boundary outward,
//! v counterclockwise, so Jacobian determinants are positive.

use super::{ModelPatch, MultipatchModel};
use crate::error::{Error, Result};
use crate::material::PatchMaterial;
use crate::spline::{KnotVector, NurbsPatch, PatchEdge};

const PI: f64 = std::f64::consts::PI;

fn bezier2() -> KnotVector {
    KnotVector::new(2, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap()
}

/// Control points of an exact arc of radius `r` from `th0` to `th1`
/// (opening at most 90 degrees), plus the middle weight.
pub fn arc_row(r: f64, th0: f64, th1: f64) -> ([[f64; 2]; 3], f64) {
    let half = 0.5 * (th1 - th0);
    let w = half.cos();
    let thm = 0.5 * (th0 + th1);
    (
        [
            [r * th0.cos(), r * th0.sin()],
            [r / w * thm.cos(), r / w * thm.sin()],
            [r * th1.cos(), r * th1.sin()],
        ],
        w,
    )
}

/// Control points of a straight segment as a quadratic row.
pub fn segment_row(p0: [f64; 2], p1: [f64; 2]) -> [[f64; 2]; 3] {
    [p0, [0.5 * (p0[0] + p1[0]), 0.5 * (p0[1] + p1[1])], p1]
}

/// Ruled patch between two conforming quadratic rows sharing the middle
/// weight `w_mid` (u: inner to outer, v: along the rows).
pub fn collar_patch(inner: &[[f64; 2]; 3], outer: &[[f64; 2]; 3], w_mid: f64) -> NurbsPatch {
    let wa = [1.0, w_mid, 1.0];
    let mut ctrl = Vec::with_capacity(9);
    let mut weights = Vec::with_capacity(9);
    for j in 0..3 {
        let rows = [
            inner[j],
            [
                0.5 * (inner[j][0] + outer[j][0]),
                0.5 * (inner[j][1] + outer[j][1]),
            ],
            outer[j],
        ];
        for r in rows {
            ctrl.push(r);
            weights.push(wa[j]);
        }
    }
    NurbsPatch::new(bezier2(), bezier2(), ctrl, weights).unwrap()
}

/// 3x3 tensor patch from a position grid and per-direction weight rows.
fn tensor_quad3(pos: impl Fn(usize, usize) -> [f64; 2], wu: [f64; 3], wv: [f64; 3]) -> NurbsPatch {
    let mut ctrl = Vec::with_capacity(9);
    let mut weights = Vec::with_capacity(9);
    for j in 0..3 {
        for i in 0..3 {
            ctrl.push(pos(i, j));
            weights.push(wu[i] * wv[j]);
        }
    }
    NurbsPatch::new(bezier2(), bezier2(), ctrl, weights).unwrap()
}

/// Exact annulus sector patch (u radial, v counterclockwise).
pub fn annulus_sector(r0: f64, r1: f64, th0: f64, th1: f64) -> Result<NurbsPatch> {
    if !(r1 > r0 && r0 > 0.0) {
        return Err(Error::geometry(format!(
            "annulus sector needs 0 < r0 < r1, got r0 = {r0}, r1 = {r1}"
        )));
    }
    let span = th1 - th0;
    if !(span > 0.0 && span <= PI / 2.0 + 1e-12) {
        return Err(Error::geometry(format!(
            "annulus sector opening must lie in (0, 90] degrees, got {} degrees",
            span.to_degrees()
        )));
    }
    let (inner, w) = arc_row(r0, th0, th1);
    let (outer, _) = arc_row(r1, th0, th1);
    Ok(collar_patch(&inner, &outer, w))
}

/// Closed ring of `n` equal annulus sectors starting at angle 0.
pub fn annulus_ring(
    r0: f64,
    r1: f64,
    n: usize,
    material: PatchMaterial,
    label: &str,
) -> Result<MultipatchModel> {
    let bounds: Vec<f64> = (0..=n).map(|k| 2.0 * PI * k as f64 / n as f64).collect();
    let mats = vec![material; n];
    let labels = vec![label.to_string(); n];
    annulus_ring_at(r0, r1, &bounds, &mats, &labels, 1, 1)
}

/// Ring of annulus sectors with explicit angular boundaries, per-sector
/// materials and labels, refined `sub_r` x `sub_a` per sector.
pub fn annulus_ring_at(
    r0: f64,
    r1: f64,
    bounds: &[f64],
    materials: &[PatchMaterial],
    labels: &[String],
    sub_r: usize,
    sub_a: usize,
) -> Result<MultipatchModel> {
    let n = bounds.len() - 1;
    if materials.len() != n || labels.len() != n {
        return Err(Error::geometry(
            "annulus ring needs one material and label per sector",
        ));
    }
    let mut model = MultipatchModel::default();
    for k in 0..n {
        let patch = annulus_sector(r0, r1, bounds[k], bounds[k + 1])?.refined(sub_r, sub_a);
        model.patches.push(ModelPatch {
            patch,
            material: materials[k].clone(),
            label: labels[k].clone(),
        });
    }
    Ok(model)
}

/// Ring with per-sector angular subdivision counts (used for stator columns
/// of unequal width).
pub fn annulus_ring_columns(
    r0: f64,
    r1: f64,
    bounds: &[f64],
    materials: &[PatchMaterial],
    labels: &[String],
    sub_r: usize,
    sub_a: &[usize],
) -> Result<MultipatchModel> {
    let n = bounds.len() - 1;
    if materials.len() != n || labels.len() != n || sub_a.len() != n {
        return Err(Error::geometry(
            "annulus ring needs one material, label and subdivision per sector",
        ));
    }
    let mut model = MultipatchModel::default();
    for k in 0..n {
        let patch = annulus_sector(r0, r1, bounds[k], bounds[k + 1])?.refined(sub_r, sub_a[k]);
        model.patches.push(ModelPatch {
            patch,
            material: materials[k].clone(),
            label: labels[k].clone(),
        });
    }
    Ok(model)
}

/// Internal: quarter patches and collar patches of a disc of radius `r` with
/// a rectangular core of half-widths `(ax, ay)`.
///
/// Returns `(quarters, collars, bounds)`; collars are ordered
/// counterclockwise starting from angle 0, `bounds` holds the nine angular
/// sector boundaries `0, gamma, pi/2, ..., 2 pi`.
fn disc_parts(
    r: f64,
    ax: f64,
    ay: f64,
) -> Result<(Vec<NurbsPatch>, Vec<NurbsPatch>, [f64; 9])> {
    if !(ax > 0.0 && ay > 0.0) {
        return Err(Error::geometry("disc core half-widths must be positive"));
    }
    let corner = (ax * ax + ay * ay).sqrt();
    if corner >= 0.97 * r {
        return Err(Error::geometry(format!(
            "disc core corner radius {corner:.4} too close to disc radius {r:.4}"
        )));
    }
    let gamma = ay.atan2(ax);
    let bounds = [
        0.0,
        gamma,
        PI / 2.0,
        PI - gamma,
        PI,
        PI + gamma,
        1.5 * PI,
        2.0 * PI - gamma,
        2.0 * PI,
    ];
    // Mid-edge weights: c_r for the gamma-spanning collars (square side
    // edges crossed radially), c_t for the (pi/2 - gamma) collars.
    let c_r = (gamma / 2.0).cos();
    let c_t = ((PI / 2.0 - gamma) / 2.0).cos();

    let xg = [0.0, ax / 2.0, ax];
    let yg = [0.0, ay / 2.0, ay];
    let quarters = vec![
        // Quadrant 1: u = +x, v = +y.
        tensor_quad3(|i, j| [xg[i], yg[j]], [1.0, c_t, 1.0], [1.0, c_r, 1.0]),
        // Quadrant 2: u = +y, v = -x.
        tensor_quad3(|i, j| [-xg[j], yg[i]], [1.0, c_r, 1.0], [1.0, c_t, 1.0]),
        // Quadrant 3: u = -x, v = -y.
        tensor_quad3(|i, j| [-xg[i], -yg[j]], [1.0, c_t, 1.0], [1.0, c_r, 1.0]),
        // Quadrant 4: u = -y, v = +x.
        tensor_quad3(|i, j| [xg[j], -yg[i]], [1.0, c_r, 1.0], [1.0, c_t, 1.0]),
    ];

    // Inner boundary of each collar: half-edges of the core rectangle,
    // counterclockwise from angle 0.
    let inner_rows = [
        segment_row([ax, 0.0], [ax, ay]),
        segment_row([ax, ay], [0.0, ay]),
        segment_row([0.0, ay], [-ax, ay]),
        segment_row([-ax, ay], [-ax, 0.0]),
        segment_row([-ax, 0.0], [-ax, -ay]),
        segment_row([-ax, -ay], [0.0, -ay]),
        segment_row([0.0, -ay], [ax, -ay]),
        segment_row([ax, -ay], [ax, 0.0]),
    ];
    let mut collars = Vec::with_capacity(8);
    for k in 0..8 {
        let (outer, w) = arc_row(r, bounds[k], bounds[k + 1]);
        collars.push(collar_patch(&inner_rows[k], &outer, w));
    }
    Ok((quarters, collars, bounds))
}

/// Disc of radius `r` with a rectangular-core patch layout: four core
/// quarters plus eight collar patches reaching the exact boundary circle.
/// `fx`, `fy` are the core half-widths relative to `r`.
///
/// Patch order: quarters (quadrants 1..4) then collars counterclockwise
/// from angle 0.
pub fn square_core_disc(
    r: f64,
    fx: f64,
    fy: f64,
    material: PatchMaterial,
    label: &str,
) -> Result<MultipatchModel> {
    let (quarters, collars, _) = disc_parts(r, fx * r, fy * r)?;
    let mut model = MultipatchModel::default();
    for q in quarters {
        model.patches.push(ModelPatch {
            patch: q,
            material: material.clone(),
            label: format!("{label}_core"),
        });
    }
    for c in collars {
        model.patches.push(ModelPatch {
            patch: c,
            material: material.clone(),
            label: format!("{label}_collar"),
        });
    }
    Ok(model)
}

/// Unit square [0,1]^2 as a single polynomial patch of the given degree with
/// `n_spans` knot spans per direction and homogeneous Dirichlet data on all
/// four edges.  Control points sit at Greville abscissae, so the geometry map
/// is the identity.
pub fn unit_square(degree: usize, n_spans: usize) -> Result<MultipatchModel> {
    let kv = KnotVector::uniform(degree, n_spans)?;
    let gr = greville(&kv);
    let n = kv.n_basis();
    let mut ctrl = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            ctrl.push([gr[i], gr[j]]);
        }
    }
    let patch = NurbsPatch::new(kv.clone(), kv, ctrl, vec![1.0; n * n])?;
    Ok(MultipatchModel {
        patches: vec![ModelPatch {
            patch,
            material: PatchMaterial::air(),
            label: "unit_square".into(),
        }],
        dirichlet: PatchEdge::ALL.iter().map(|&e| (0, e)).collect(),
        design_patches: vec![],
    })
}

/// Greville abscissae of a knot vector.
pub fn greville(kv: &KnotVector) -> Vec<f64> {
    let p = kv.degree();
    (0..kv.n_basis())
        .map(|i| kv.knots()[i + 1..i + 1 + p].iter().sum::<f64>() / p as f64)
        .collect()
}

/// A magnetized disc (radius `a`, remanence `b_r`, unit relative
/// permeability) centered in a grounded square air box of half-width
/// `half`.  Used as an analytic benchmark: the interior field of a
/// transversely magnetized cylinder is uniform with magnitude `|b_r| / 2`.
pub fn disc_in_box(a: f64, b_r: [f64; 2], half: f64, sub: usize) -> Result<MultipatchModel> {
    if half < 4.0 * a {
        return Err(Error::geometry("air box too small for the benchmark"));
    }
    let magnet = PatchMaterial::Uniform { mu_r: 1.0, b_r };
    let mut model = square_core_disc(a, 0.55, 0.55, magnet, "magnet")?;
    for mp in &mut model.patches {
        mp.patch = mp.patch.refined(sub, sub);
    }

    // Square levels between the disc and the box boundary.
    let levels = [2.0 * a, 2.0 * a + 0.35 * (half - 2.0 * a), half];
    let gamma = PI / 4.0;
    let bounds: Vec<f64> = (0..=8).map(|k| k as f64 * gamma).collect();

    // Square "rows" of half-edge segments per octant at a given half-width.
    let square_rows = |s: f64| -> Vec<[[f64; 2]; 3]> {
        vec![
            segment_row([s, 0.0], [s, s]),
            segment_row([s, s], [0.0, s]),
            segment_row([0.0, s], [-s, s]),
            segment_row([-s, s], [-s, 0.0]),
            segment_row([-s, 0.0], [-s, -s]),
            segment_row([-s, -s], [0.0, -s]),
            segment_row([0.0, -s], [s, -s]),
            segment_row([s, -s], [s, 0.0]),
        ]
    };

    // Collar from the disc circle to the first square level.
    let sq1 = square_rows(levels[0]);
    for k in 0..8 {
        let (inner, w) = arc_row(a, bounds[k], bounds[k + 1]);
        let patch = collar_patch(&inner, &sq1[k], w).refined(sub.max(2), sub);
        model.patches.push(ModelPatch {
            patch,
            material: PatchMaterial::air(),
            label: "air_collar".into(),
        });
    }
    // Square-to-square rings.
    for lvl in 0..2 {
        let rows_in = square_rows(levels[lvl]);
        let rows_out = square_rows(levels[lvl + 1]);
        let w = (gamma / 2.0).cos();
        for k in 0..8 {
            let patch = collar_patch(&rows_in[k], &rows_out[k], w).refined(sub.max(2), sub);
            let idx = model.patches.len();
            model.patches.push(ModelPatch {
                patch,
                material: PatchMaterial::air(),
                label: format!("air_ring_{lvl}"),
            });
            if lvl == 1 {
                model.dirichlet.push((idx, PatchEdge::UMax));
            }
        }
    }
    Ok(model)
}

/// Machine radii [m].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MachineDims {
    /// Rotor disc radius.
    pub r_rotor: f64,
    /// Radius of the coupling circle inside the air gap.
    pub r_gap_circle: f64,
    /// Inner radius of the regenerator ring.
    pub r_amr_in: f64,
    /// Outer radius of the regenerator ring.
    pub r_amr_out: f64,
    /// Inner radius of the stator yoke (= outer end of the air gap).
    pub r_yoke_in: f64,
    /// Outer machine radius (Dirichlet boundary).
    pub r_outer: f64,
}

impl Default for MachineDims {
    fn default() -> Self {
        MachineDims {
            r_rotor: 0.040,
            r_gap_circle: 0.041,
            r_amr_in: 0.0425,
            r_amr_out: 0.0495,
            r_yoke_in: 0.050,
            r_outer: 0.075,
        }
    }
}

impl MachineDims {
    pub fn validate(&self) -> Result<()> {
        let seq = [
            self.r_rotor,
            self.r_gap_circle,
            self.r_amr_in,
            self.r_amr_out,
            self.r_yoke_in,
            self.r_outer,
        ];
        if seq.iter().any(|&r| !(r > 0.0)) || seq.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config(format!("machine radii must increase: {seq:?}")));
        }
        Ok(())
    }

    /// Scales all radii (geometric similarity studies).
    pub fn scaled(&self, factor: f64) -> MachineDims {
        MachineDims {
            r_rotor: self.r_rotor * factor,
            r_gap_circle: self.r_gap_circle * factor,
            r_amr_in: self.r_amr_in * factor,
            r_amr_out: self.r_amr_out * factor,
            r_yoke_in: self.r_yoke_in * factor,
            r_outer: self.r_outer * factor,
        }
    }
}

/// Shape parameters of the five-segment rotor (central magnet block plus
/// four tilted flank magnets, iron pole arcs, no continuous shaft).
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct RotorParams {
    /// Core rectangle half-widths relative to the rotor radius.
    pub core_fx: f64,
    pub core_fy: f64,
    /// Magnet share of the rotor disc area (the magnet/iron boundary radius
    /// is solved from this).
    pub magnet_area_fraction: f64,
    /// Extra tilt [rad] added to the flank-magnet directions on top of the
    /// ideal two-pole orientation rule.
    pub diag_tilt: f64,
}

impl Default for RotorParams {
    fn default() -> Self {
        RotorParams {
            core_fx: 0.55,
            core_fy: 0.55,
            magnet_area_fraction: 0.60,
            diag_tilt: 0.0,
        }
    }
}

/// Per-region refinement of the rotor model.
#[derive(Debug, Clone, Copy)]
pub struct RotorRefine {
    /// Angular subdivisions per sector (all eight sectors).
    pub n_angular: usize,
    /// Radial subdivisions: collar ring, outer ring, gap air ring.
    pub n_rad_collar: usize,
    pub n_rad_outer: usize,
    pub n_rad_gap: usize,
}

impl Default for RotorRefine {
    fn default() -> Self {
        RotorRefine {
            n_angular: 6,
            n_rad_collar: 3,
            n_rad_outer: 2,
            n_rad_gap: 3,
        }
    }
}

/// The assembled rotor with layout metadata needed by the shape loop.
#[derive(Debug, Clone)]
pub struct RotorModel {
    pub model: MultipatchModel,
    pub dims: MachineDims,
    pub params: RotorParams,
    /// Angular sector boundaries (nine values spanning a full turn).
    pub bounds: [f64; 9],
    /// Magnet/iron boundary radius inside the disc.
    pub r_mid: f64,
    /// Patch indices: outer ring sectors and gap-air ring sectors, ordered
    /// counterclockwise from angle 0 (aligned with `bounds`).
    pub outer_ring: [usize; 8],
    pub gap_ring: [usize; 8],
}

/// Builds the five-magnet rotor: magnet core and flank wedges up to the
/// solved mid radius, iron pole arcs and flank air in the outer ring, and an
/// air ring up to the coupling circle.
///
/// Flank magnets follow the ideal two-pole orientation rule: the remanence
/// direction at a wedge centered at azimuth `theta` is `pi/2 + 2 theta`
/// (plus the configured tilt), which makes all segments drive flux towards
/// the upper pole and returns it through the lower one.
pub fn deduced_rotor(
    dims: MachineDims,
    params: RotorParams,
    refine: RotorRefine,
) -> Result<RotorModel> {
    dims.validate()?;
    let r = dims.r_rotor;
    let (ax, ay) = (params.core_fx * r, params.core_fy * r);
    let gamma = ay.atan2(ax);
    // Solve the magnet/iron boundary radius from the area budget:
    //   magnet area = 2 ax ay (core) + 2 gamma r_mid^2 - 2 ax ay (wedges over
    //   the rectangle) + 4 * (ax ay) ... collapses to 2 ax ay + 2 gamma
    //   r_mid^2 - ... ; carried out: core 4 ax ay, four wedges
    //   4 * (r_mid^2 gamma - ax ay) / 2.
    let target = params.magnet_area_fraction * PI * r * r;
    let r_mid_sq = (target - 2.0 * ax * ay) / (2.0 * gamma);
    if r_mid_sq <= 0.0 {
        return Err(Error::config(
            "magnet area budget too small for the chosen core size",
        ));
    }
    let r_mid = r_mid_sq.sqrt();
    let corner = (ax * ax + ay * ay).sqrt();
    if r_mid <= 1.02 * corner || r_mid >= 0.97 * r {
        return Err(Error::config(format!(
            "magnet boundary radius {:.2} mm collides with the core corner \
             ({:.2} mm) or the rotor boundary ({:.2} mm); adjust core size \
             or area budget",
            r_mid * 1e3,
            corner * 1e3,
            r * 1e3
        )));
    }

    let (quarters, collars, bounds) = disc_parts(r_mid, ax, ay)?;
    let na = refine.n_angular;
    let mut model = MultipatchModel::default();
    for q in quarters {
        model.patches.push(ModelPatch {
            patch: q.refined(na, na),
            material: PatchMaterial::ndfeb([0.0, 1.0]),
            label: "center_magnet".into(),
        });
    }
    // Collar ring: flank wedges are magnets, top/bottom pairs are iron.
    for (k, c) in collars.into_iter().enumerate() {
        let theta_c = 0.5 * (bounds[k] + bounds[k + 1]);
        let is_magnet = matches!(k, 0 | 3 | 4 | 7);
        let (material, label) = if is_magnet {
            let phi = PI / 2.0
                + 2.0 * theta_c
                + if matches!(k, 0 | 4) {
                    params.diag_tilt
                } else {
                    -params.diag_tilt
                };
            (
                PatchMaterial::ndfeb([phi.cos(), phi.sin()]),
                "flank_magnet".to_string(),
            )
        } else {
            (PatchMaterial::iron(), "pole_root".to_string())
        };
        model.patches.push(ModelPatch {
            patch: c.refined(refine.n_rad_collar, na),
            material,
            label,
        });
    }
    // Outer ring: iron pole arcs above/below, air at the flanks.
    let mut outer_ring = [0usize; 8];
    for k in 0..8 {
        let is_pole = matches!(k, 1 | 2 | 5 | 6);
        let patch =
            annulus_sector(r_mid, r, bounds[k], bounds[k + 1])?.refined(refine.n_rad_outer, na);
        outer_ring[k] = model.patches.len();
        model.patches.push(ModelPatch {
            patch,
            material: if is_pole {
                PatchMaterial::iron()
            } else {
                PatchMaterial::air()
            },
            label: if is_pole { "pole_arc" } else { "flank_air" }.into(),
        });
    }
    // Air ring up to the coupling circle.
    let mut gap_ring = [0usize; 8];
    for k in 0..8 {
        let patch = annulus_sector(r, dims.r_gap_circle, bounds[k], bounds[k + 1])?
            .refined(refine.n_rad_gap, na);
        gap_ring[k] = model.patches.len();
        model.patches.push(ModelPatch {
            patch,
            material: PatchMaterial::air(),
            label: "rotor_gap_air".into(),
        });
    }
    Ok(RotorModel {
        model,
        dims,
        params,
        bounds,
        r_mid,
        outer_ring,
        gap_ring,
    })
}

/// Stator layout parameters.
#[derive(Debug, Clone)]
pub struct StatorParams {
    /// Number of regenerator segments.
    pub n_amr: usize,
    /// Fill ratio: fraction of the circumference covered by segments.
    pub r_amr: f64,
    /// Segment material (isotropic or radially anisotropic preset).
    pub amr_material: PatchMaterial,
}

/// Per-region refinement of the stator model.
#[derive(Debug, Clone, Copy)]
pub struct StatorRefine {
    /// Target angular element size [rad] (columns are subdivided to meet it).
    pub target_h_angular: f64,
    /// Radial subdivisions: inner clearance, regenerator ring, outer
    /// clearance, yoke.
    pub n_rad_inner: usize,
    pub n_rad_amr: usize,
    pub n_rad_outer: usize,
    pub n_rad_yoke: usize,
}

impl Default for StatorRefine {
    fn default() -> Self {
        StatorRefine {
            target_h_angular: 2.6f64.to_radians(),
            n_rad_inner: 3,
            n_rad_amr: 3,
            n_rad_outer: 2,
            n_rad_yoke: 3,
        }
    }
}

/// The assembled stator with evaluation metadata.
#[derive(Debug, Clone)]
pub struct StatorModel {
    pub model: MultipatchModel,
    pub dims: MachineDims,
    pub n_amr: usize,
    pub r_amr: f64,
    /// Segment centroids (mid radius, angular center), counterclockwise,
    /// entry 0 being the segment nearest the top (90 degrees).
    pub amr_centroids: Vec<[f64; 2]>,
}

/// Builds the stator: `n_amr` regenerator segments (total arc share
/// `r_amr`) alternating with air inside the gap annulus, clearance rings on
/// both sides, and the iron yoke.  The outermost edge carries the Dirichlet
/// condition.  Segment 0 is centered at the top (90 degrees).
pub fn stator(
    dims: MachineDims,
    params: &StatorParams,
    refine: StatorRefine,
) -> Result<StatorModel> {
    dims.validate()?;
    let n = params.n_amr;
    if n < 2 {
        return Err(Error::config("need at least two regenerator segments"));
    }
    if !(params.r_amr > 0.0 && params.r_amr < 1.0) {
        return Err(Error::config(format!(
            "regenerator fill ratio must lie in (0, 1), got {}",
            params.r_amr
        )));
    }
    let pitch = 2.0 * PI / n as f64;
    let delta = 0.5 * params.r_amr * pitch;
    if pitch * params.r_amr.max(1.0 - params.r_amr) > PI / 2.0 + 1e-12 {
        return Err(Error::config(
            "segment or air column wider than 90 degrees; increase the segment count",
        ));
    }
    // Column boundaries, counterclockwise starting at the leading edge of
    // the top segment.
    let start = PI / 2.0 - delta;
    let mut bounds = Vec::with_capacity(2 * n + 1);
    let mut is_amr = Vec::with_capacity(2 * n);
    for k in 0..n {
        let th0 = start + k as f64 * pitch;
        bounds.push(th0);
        is_amr.push(true);
        bounds.push(th0 + 2.0 * delta);
        is_amr.push(false);
    }
    bounds.push(start + 2.0 * PI);

    let sub_a: Vec<usize> = (0..2 * n)
        .map(|k| ((bounds[k + 1] - bounds[k]) / refine.target_h_angular).ceil() as usize)
        .map(|s| s.max(1))
        .collect();

    let air = PatchMaterial::air();
    let mk_labels = |amr_lab: &str, air_lab: &str| -> Vec<String> {
        is_amr
            .iter()
            .map(|&a| if a { amr_lab.into() } else { air_lab.into() })
            .collect()
    };

    let mut model = MultipatchModel::default();
    // Inner clearance ring (all air).
    model.merge(&annulus_ring_columns(
        dims.r_gap_circle,
        dims.r_amr_in,
        &bounds,
        &vec![air.clone(); 2 * n],
        &mk_labels("stator_clearance", "stator_clearance"),
        refine.n_rad_inner,
        &sub_a,
    )?);
    // Regenerator ring.
    let amr_mats: Vec<PatchMaterial> = is_amr
        .iter()
        .map(|&a| {
            if a {
                params.amr_material.clone()
            } else {
                air.clone()
            }
        })
        .collect();
    model.merge(&annulus_ring_columns(
        dims.r_amr_in,
        dims.r_amr_out,
        &bounds,
        &amr_mats,
        &mk_labels("amr", "amr_gap_air"),
        refine.n_rad_amr,
        &sub_a,
    )?);
    // Outer clearance ring.
    model.merge(&annulus_ring_columns(
        dims.r_amr_out,
        dims.r_yoke_in,
        &bounds,
        &vec![air.clone(); 2 * n],
        &mk_labels("stator_clearance", "stator_clearance"),
        refine.n_rad_outer,
        &sub_a,
    )?);
    // Yoke with the outer Dirichlet boundary.
    let yoke_offset = model.patches.len();
    model.merge(&annulus_ring_columns(
        dims.r_yoke_in,
        dims.r_outer,
        &bounds,
        &vec![PatchMaterial::iron(); 2 * n],
        &vec!["yoke".into(); 2 * n],
        refine.n_rad_yoke,
        &sub_a,
    )?);
    for k in 0..2 * n {
        model.dirichlet.push((yoke_offset + k, PatchEdge::UMax));
    }

    let r_c = 0.5 * (dims.r_amr_in + dims.r_amr_out);
    let amr_centroids = (0..n)
        .map(|k| {
            let th = PI / 2.0 + k as f64 * pitch;
            [r_c * th.cos(), r_c * th.sin()]
        })
        .collect();
    Ok(StatorModel {
        model,
        dims,
        n_amr: n,
        r_amr: params.r_amr,
        amr_centroids,
    })
}

/// Stator variant with an empty air gap (no regenerator ring): clearance air
/// from the coupling circle to the yoke, then the yoke.  Columns follow the
/// given angular boundaries so the result can be merged conformingly with a
/// rotor built on the same boundaries.
pub fn empty_gap_stator(
    dims: MachineDims,
    bounds: &[f64],
    sub_a: usize,
    n_rad_gap: usize,
    n_rad_yoke: usize,
) -> Result<MultipatchModel> {
    let n = bounds.len() - 1;
    let air = vec![PatchMaterial::air(); n];
    let labels = vec!["stator_gap_air".to_string(); n];
    let mut model = annulus_ring_at(
        dims.r_gap_circle,
        dims.r_yoke_in,
        bounds,
        &air,
        &labels,
        n_rad_gap,
        sub_a,
    )?;
    let yoke_offset = model.patches.len();
    model.merge(&annulus_ring_at(
        dims.r_yoke_in,
        dims.r_outer,
        bounds,
        &vec![PatchMaterial::iron(); n],
        &vec!["yoke".to_string(); n],
        n_rad_yoke,
        sub_a,
    )?);
    for k in 0..n {
        model.dirichlet.push((yoke_offset + k, PatchEdge::UMax));
    }
    Ok(model)
}

/// Which region carries design material in the free-material loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignVariant {
    /// Design disc inside the gap (rotating assembly).
    Inner,
    /// Design ring outside the gap.
    Outer,
    /// Both sides carry design material.
    CoRotational,
}

/// Refinement of the design-study model.
#[derive(Debug, Clone, Copy)]
pub struct DesignRefine {
    /// Angular subdivisions per 45-degree sector.
    pub n_angular: usize,
    pub n_rad_collar: usize,
    pub n_rad_gap: usize,
    pub n_rad_outer: usize,
}

impl Default for DesignRefine {
    fn default() -> Self {
        DesignRefine {
            n_angular: 6,
            n_rad_collar: 3,
            n_rad_gap: 4,
            n_rad_outer: 4,
        }
    }
}

/// A design-study model: geometry plus field-evaluation rings.
#[derive(Debug, Clone)]
pub struct DesignModel {
    pub model: MultipatchModel,
    pub dims: MachineDims,
    /// Evaluation points in the high-field (magnetization) zones.
    pub eval_high: Vec<[f64; 2]>,
    /// Evaluation points in the low-field (demagnetization) zones.
    pub eval_low: Vec<[f64; 2]>,
    /// Total area available to design material [m^2].
    pub design_area: f64,
}

/// Builds the static design-study model: a disc inside the gap, the empty
/// gap annulus, and an outer annulus up to the Dirichlet boundary.  Design
/// patches are assigned according to the variant; non-design parts are iron
/// where they must return flux (outer ring for the inner variant, disc for
/// the outer variant).
///
/// Field quality is evaluated on a mid-gap ring: two 90-degree
/// magnetization zones centered at 90/270 degrees and two demagnetization
/// zones centered at 0/180 degrees, `n_eval` points each.
pub fn design_model(
    variant: DesignVariant,
    dims: MachineDims,
    n_eval: usize,
    refine: DesignRefine,
) -> Result<DesignModel> {
    dims.validate()?;
    let r_gap_mid = 0.5 * (dims.r_rotor + dims.r_yoke_in);
    let na = refine.n_angular;

    let disc_is_design = matches!(variant, DesignVariant::Inner | DesignVariant::CoRotational);
    let ring_is_design = matches!(variant, DesignVariant::Outer | DesignVariant::CoRotational);

    let disc_mat = if disc_is_design {
        PatchMaterial::Design
    } else {
        PatchMaterial::iron()
    };
    let mut model = square_core_disc(dims.r_rotor, 0.55, 0.55, disc_mat, "disc")?;
    for (k, mp) in model.patches.iter_mut().enumerate() {
        let (sr, sa) = if k < 4 {
            (na, na)
        } else {
            (refine.n_rad_collar, na)
        };
        mp.patch = mp.patch.refined(sr, sa);
    }
    if disc_is_design {
        model.design_patches = (0..model.patches.len()).collect();
    }

    let bounds: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 4.0).collect();
    // Empty gap annulus.
    model.merge(&annulus_ring_at(
        dims.r_rotor,
        dims.r_yoke_in,
        &bounds,
        &vec![PatchMaterial::air(); 8],
        &vec!["gap_air".to_string(); 8],
        refine.n_rad_gap,
        na,
    )?);
    // Outer annulus: design ring or return yoke.
    let ring_mat = if ring_is_design {
        PatchMaterial::Design
    } else {
        PatchMaterial::iron()
    };
    let ring_offset = model.patches.len();
    model.merge(&annulus_ring_at(
        dims.r_yoke_in,
        dims.r_outer,
        &bounds,
        &vec![ring_mat; 8],
        &vec![if ring_is_design { "design_ring" } else { "yoke" }.to_string(); 8],
        refine.n_rad_outer,
        na,
    )?);
    for k in 0..8 {
        model.dirichlet.push((ring_offset + k, PatchEdge::UMax));
        if ring_is_design {
            model.design_patches.push(ring_offset + k);
        }
    }

    // Evaluation rings: 90-degree zones, `n_eval` points each.
    let zone = |center_deg: f64| -> Vec<[f64; 2]> {
        (0..n_eval)
            .map(|k| {
                let th = (center_deg - 45.0).to_radians()
                    + (k as f64 + 0.5) / n_eval as f64 * 90.0f64.to_radians();
                [r_gap_mid * th.cos(), r_gap_mid * th.sin()]
            })
            .collect()
    };
    let mut eval_high = zone(90.0);
    eval_high.extend(zone(270.0));
    let mut eval_low = zone(0.0);
    eval_low.extend(zone(180.0));

    let design_area: f64 = model
        .design_patches
        .iter()
        .map(|&p| model.patch_area(p))
        .sum();
    Ok(DesignModel {
        model,
        dims,
        eval_high,
        eval_low,
        design_area,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::validate_conformity;
    use approx::assert_relative_eq;

    #[test]
    fn unit_square_is_identity_map() {
        for degree in 1..=3 {
            let model = unit_square(degree, 4).unwrap();
            let patch = &model.patches[0].patch;
            for a in 0..=8 {
                for b in 0..=8 {
                    let (u, v) = (a as f64 / 8.0, b as f64 / 8.0);
                    let p = patch.point(u, v);
                    assert!((p[0] - u).abs() < 1e-13 && (p[1] - v).abs() < 1e-13);
                }
            }
            assert_eq!(model.dirichlet.len(), 4);
        }
    }

    #[test]
    fn deduced_rotor_hits_the_magnet_area_budget() {
        let rotor = deduced_rotor(
            MachineDims::default(),
            RotorParams::default(),
            RotorRefine::default(),
        )
        .unwrap();
        let disc_area = std::f64::consts::PI * rotor.dims.r_rotor.powi(2);
        let share = rotor.model.magnet_area() / disc_area;
        assert_relative_eq!(share, 0.60, max_relative = 1e-10);
        // Five magnet segments: four core quarters act as one block plus
        // four flank wedges.
        let n_magnet_patches = rotor
            .model
            .patches
            .iter()
            .filter(|p| {
                let b = p.material.remanence();
                b[0] != 0.0 || b[1] != 0.0
            })
            .count();
        assert_eq!(n_magnet_patches, 8);
        validate_conformity(&rotor.model).unwrap();
        rotor.model.check_jacobians().unwrap();
    }

    #[test]
    fn rotor_total_area_is_the_coupling_disc() {
        let rotor = deduced_rotor(
            MachineDims::default(),
            RotorParams::default(),
            RotorRefine {
                n_angular: 2,
                ..RotorRefine::default()
            },
        )
        .unwrap();
        let exact = std::f64::consts::PI * rotor.dims.r_gap_circle.powi(2);
        assert_relative_eq!(rotor.model.total_area(), exact, max_relative = 1e-11);
    }

    #[test]
    fn rotor_flank_magnets_follow_the_two_pole_rule() {
        let rotor = deduced_rotor(
            MachineDims::default(),
            RotorParams::default(),
            RotorRefine {
                n_angular: 1,
                n_rad_collar: 1,
                n_rad_outer: 1,
                n_rad_gap: 1,
            },
        )
        .unwrap();
        let gamma = rotor.bounds[1];
        // Right-upper wedge (patch 4): direction pi/2 + gamma.
        let b = rotor.model.patches[4].material.remanence();
        let phi = b[1].atan2(b[0]);
        assert_relative_eq!(phi, std::f64::consts::FRAC_PI_2 + gamma, epsilon = 1e-12);
        // Mirror wedge on the left (patch 7): pi/2 - gamma.
        let b2 = rotor.model.patches[7].material.remanence();
        let phi2 = b2[1].atan2(b2[0]);
        assert_relative_eq!(phi2, std::f64::consts::FRAC_PI_2 - gamma, epsilon = 1e-12);
    }

    #[test]
    fn stator_covers_the_annulus_and_counts_segments() {
        let dims = MachineDims::default();
        let st = stator(
            dims,
            &StatorParams {
                n_amr: 8,
                r_amr: 0.8,
                amr_material: PatchMaterial::amr_iso(),
            },
            StatorRefine {
                target_h_angular: 6.0f64.to_radians(),
                ..StatorRefine::default()
            },
        )
        .unwrap();
        let exact = std::f64::consts::PI * (dims.r_outer.powi(2) - dims.r_gap_circle.powi(2));
        assert_relative_eq!(st.model.total_area(), exact, max_relative = 1e-11);
        let n_amr_patches = st
            .model
            .patches
            .iter()
            .filter(|p| p.label == "amr")
            .count();
        assert_eq!(n_amr_patches, 8);
        assert_eq!(st.amr_centroids.len(), 8);
        // Top segment centroid sits on the positive y axis.
        assert!(st.amr_centroids[0][0].abs() < 1e-12);
        validate_conformity(&st.model).unwrap();
        st.model.check_jacobians().unwrap();
    }

    #[test]
    fn stator_rejects_bad_fill_ratios() {
        let dims = MachineDims::default();
        let mk = |n, r| {
            stator(
                dims,
                &StatorParams {
                    n_amr: n,
                    r_amr: r,
                    amr_material: PatchMaterial::amr_iso(),
                },
                StatorRefine::default(),
            )
        };
        assert!(mk(8, 0.0).is_err());
        assert!(mk(8, 1.0).is_err());
        assert!(mk(1, 0.5).is_err());
        // n = 3, r = 0.95: segment spans 114 degrees > 90.
        assert!(mk(3, 0.95).is_err());
    }

    #[test]
    fn design_model_variants_assign_design_patches() {
        let dims = MachineDims::default();
        let refine = DesignRefine {
            n_angular: 2,
            n_rad_collar: 1,
            n_rad_gap: 1,
            n_rad_outer: 1,
        };
        let inner = design_model(DesignVariant::Inner, dims, 8, refine).unwrap();
        assert_eq!(inner.model.design_patches.len(), 12);
        assert_relative_eq!(
            inner.design_area,
            std::f64::consts::PI * dims.r_rotor.powi(2),
            max_relative = 1e-11
        );
        let outer = design_model(DesignVariant::Outer, dims, 8, refine).unwrap();
        assert_eq!(outer.model.design_patches.len(), 8);
        let both = design_model(DesignVariant::CoRotational, dims, 8, refine).unwrap();
        assert_eq!(both.model.design_patches.len(), 20);
        assert_eq!(inner.eval_high.len(), 16);
        assert_eq!(inner.eval_low.len(), 16);
        // Evaluation points sit on the mid-gap circle.
        let r_mid = 0.5 * (dims.r_rotor + dims.r_yoke_in);
        for p in inner.eval_high.iter().chain(&inner.eval_low) {
            assert_relative_eq!(
                (p[0] * p[0] + p[1] * p[1]).sqrt(),
                r_mid,
                max_relative = 1e-12
            );
        }
        validate_conformity(&inner.model).unwrap();
    }

    #[test]
    fn disc_in_box_is_conforming_with_outer_dirichlet() {
        let model = disc_in_box(0.01, [1.0, 0.0], 0.1, 2).unwrap();
        validate_conformity(&model).unwrap();
        model.check_jacobians().unwrap();
        assert_eq!(model.dirichlet.len(), 8);
        // Magnet area is the disc.
        assert_relative_eq!(
            model.magnet_area(),
            std::f64::consts::PI * 1e-4,
            max_relative = 1e-11
        );
    }

    #[test]
    fn empty_gap_stator_merges_conformingly_with_the_rotor() {
        let dims = MachineDims::default();
        let rotor = deduced_rotor(dims, RotorParams::default(), RotorRefine::default()).unwrap();
        let mut machine = rotor.model.clone();
        machine.merge(&empty_gap_stator(dims, &rotor.bounds, 6, 3, 3).unwrap());
        validate_conformity(&machine).unwrap();
        machine.check_jacobians().unwrap();
        let exact = std::f64::consts::PI * dims.r_outer.powi(2);
        assert_relative_eq!(machine.total_area(), exact, max_relative = 1e-11);
    }
}
