//! B-spline and NURBS primitives: clamped knot vectors, basis evaluation with
//! derivatives, rational curves and tensor-product surface patches, geometry
//! mapping with Jacobians, and geometry-preserving knot insertion.
//!
//! Conventions used throughout:
//! * knot vectors are open/clamped (first and last knot repeated `degree + 1`
//!   times) and degrees are limited to 1..=4;
//! * span lookup is right-continuous, with the right domain endpoint assigned
//!   to the last non-empty span;
//! * evaluation points outside the domain are clamped to the domain rather
//!   than rejected;
//! * control points of a tensor patch are stored row-major with the
//!   u-index running fastest: `ctrl[j * nu + i]`.

use crate::error::{Error, Result};

/// Maximum supported polynomial degree.
pub const MAX_DEGREE: usize = 4;

/// A clamped (open) knot vector of fixed degree.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Builds a knot vector after validating clamping, monotonicity and degree.
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::geometry(format!(
                "unsupported spline degree {degree} (supported: 1..={MAX_DEGREE})"
            )));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::geometry(format!(
                "knot vector of degree {degree} needs at least {} knots, got {}",
                2 * (degree + 1),
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) || knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::geometry("knot vector must be non-decreasing and finite"));
        }
        let first = knots[0];
        let last = *knots.last().unwrap();
        if knots[..=degree].iter().any(|&k| k != first)
            || knots[knots.len() - degree - 1..].iter().any(|&k| k != last)
        {
            return Err(Error::geometry(
                "only clamped knot vectors are supported (end knots must repeat degree + 1 times)",
            ));
        }
        if last <= first {
            return Err(Error::geometry("knot vector spans an empty domain"));
        }
        Ok(KnotVector { degree, knots })
    }

    /// Uniform clamped knot vector on [0, 1] with `n_spans` equal spans.
    pub fn uniform(degree: usize, n_spans: usize) -> Result<Self> {
        if n_spans == 0 {
            return Err(Error::geometry("need at least one knot span"));
        }
        let mut knots = vec![0.0; degree];
        for i in 0..=n_spans {
            knots.push(i as f64 / n_spans as f64);
        }
        knots.extend(std::iter::repeat(1.0).take(degree));
        KnotVector::new(degree, knots)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions defined by this knot vector.
    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Parametric domain `[start, end]`.
    pub fn domain(&self) -> (f64, f64) {
        (self.knots[self.degree], self.knots[self.n_basis()])
    }

    /// Clamps a parameter into the domain.
    pub fn clamp(&self, u: f64) -> f64 {
        let (a, b) = self.domain();
        u.clamp(a, b)
    }

    /// Indices of the non-empty knot spans.
    pub fn nonempty_spans(&self) -> Vec<usize> {
        (self.degree..self.n_basis())
            .filter(|&i| self.knots[i + 1] > self.knots[i])
            .collect()
    }

    /// Finds the knot span containing `x` (right-continuous; the right domain
    /// endpoint maps to the last non-empty span).  Out-of-domain arguments are
    /// clamped.
    pub fn find_span(&self, x: f64) -> usize {
        let u = self.clamp(x);
        let p = self.degree;
        let nb = self.n_basis();
        if u >= self.knots[nb] {
            // Right endpoint: back up over any repeated knots to the last
            // non-empty span.
            let mut i = nb - 1;
            while self.knots[i + 1] <= self.knots[i] {
                i -= 1;
            }
            return i;
        }
        let (mut lo, mut hi) = (p, nb);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if u < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// Evaluates the `degree + 1` basis functions that are non-zero on `span`
    /// at parameter `u` (Cox-de Boor recursion).
    pub fn basis(&self, span: usize, x: f64) -> Vec<f64> {
        let u = self.clamp(x);
        let p = self.degree;
        let mut n = vec![0.0; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        n[0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    /// Evaluates basis functions and derivatives up to `n_der` (at most 2) on
    /// `span` at parameter `u`.  Returns `(n_der + 1)` rows of `degree + 1`
    /// values; row `k` holds the k-th derivatives.
    pub fn basis_derivs(&self, span: usize, x: f64, n_der: usize) -> Vec<Vec<f64>> {
        assert!(n_der <= 2, "basis derivatives are supported up to order 2");
        let u = self.clamp(x);
        let p = self.degree;
        let nd = n_der.min(p);

        // Triangular table of basis values and knot differences.
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = u - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - u;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let mut ders = vec![vec![0.0; p + 1]; n_der + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }

        // Derivative sweep with the two alternating coefficient rows.
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            a[1][0] = 0.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as i64 - k as i64;
                let pk = (p - k) as i64;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[(pk + 1) as usize][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk as usize];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as i64 - 1 <= pk { k - 1 } else { p - r };
                for j in j1..=j2 {
                    a[s2][j] = (a[s1][j] - a[s1][j - 1])
                        / ndu[(pk + 1) as usize][(rk + j as i64) as usize];
                    d += a[s2][j] * ndu[(rk + j as i64) as usize][pk as usize];
                }
                if r as i64 <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[(pk + 1) as usize][r];
                    d += a[s2][k] * ndu[r][pk as usize];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }

        // Multiply by degree factors p! / (p - k)!.
        let mut factor = p as f64;
        for k in 1..=nd {
            for j in 0..=p {
                ders[k][j] *= factor;
            }
            factor *= (p - k) as f64;
        }
        ders
    }

    /// Inserts one knot value, returning the enlarged knot vector together
    /// with the affected index range; the caller updates control points via
    /// [`insert_knot_coeffs`].
    fn inserted(&self, u: f64) -> (KnotVector, usize) {
        let span = self.find_span(u);
        let mut knots = self.knots.clone();
        knots.insert(span + 1, u);
        (
            KnotVector {
                degree: self.degree,
                knots,
            },
            span,
        )
    }
}

/// Blending coefficients for a single Boehm knot insertion.
///
/// Returns `(span, alphas)` where new homogeneous control point `i` in the
/// window `span - degree + 1 ..= span` is `alpha * P[i] + (1 - alpha) * P[i-1]`.
fn insert_knot_alphas(kv: &KnotVector, u: f64, span: usize) -> Vec<f64> {
    let p = kv.degree;
    (span - p + 1..=span)
        .map(|i| (u - kv.knots[i]) / (kv.knots[i + p] - kv.knots[i]))
        .collect()
}

/// Applies one Boehm insertion to a homogeneous control row.
fn insert_into_row(row: &[[f64; 3]], span: usize, p: usize, alphas: &[f64]) -> Vec<[f64; 3]> {
    let n = row.len();
    let mut out = Vec::with_capacity(n + 1);
    out.extend_from_slice(&row[..=span - p]);
    for (k, i) in (span - p + 1..=span).enumerate() {
        let a = alphas[k];
        let q = [
            a * row[i][0] + (1.0 - a) * row[i - 1][0],
            a * row[i][1] + (1.0 - a) * row[i - 1][1],
            a * row[i][2] + (1.0 - a) * row[i - 1][2],
        ];
        out.push(q);
    }
    out.extend_from_slice(&row[span..n]);
    debug_assert_eq!(out.len(), n + 1);
    out
}

/// A rational quadratic-capable planar NURBS curve.
#[derive(Debug, Clone)]
pub struct NurbsCurve {
    pub kv: KnotVector,
    pub ctrl: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl NurbsCurve {
    pub fn new(kv: KnotVector, ctrl: Vec<[f64; 2]>, weights: Vec<f64>) -> Result<Self> {
        if ctrl.len() != kv.n_basis() || weights.len() != ctrl.len() {
            return Err(Error::geometry(format!(
                "curve needs {} control points/weights, got {}/{}",
                kv.n_basis(),
                ctrl.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::geometry("curve weights must be positive"));
        }
        Ok(NurbsCurve { kv, ctrl, weights })
    }

    /// Curve point at parameter `u`.
    pub fn point(&self, u: f64) -> [f64; 2] {
        let span = self.kv.find_span(u);
        let b = self.kv.basis(span, u);
        let p = self.kv.degree();
        let (mut x, mut y, mut w) = (0.0, 0.0, 0.0);
        for (k, &bk) in b.iter().enumerate() {
            let i = span - p + k;
            let wi = self.weights[i];
            x += bk * wi * self.ctrl[i][0];
            y += bk * wi * self.ctrl[i][1];
            w += bk * wi;
        }
        [x / w, y / w]
    }

    /// Curve point and first derivative with respect to the parameter.
    pub fn point_deriv(&self, u: f64) -> ([f64; 2], [f64; 2]) {
        let span = self.kv.find_span(u);
        let d = self.kv.basis_derivs(span, u, 1);
        let p = self.kv.degree();
        let (mut aw, mut daw) = ([0.0; 3], [0.0; 3]);
        for k in 0..=p {
            let i = span - p + k;
            let wi = self.weights[i];
            let h = [wi * self.ctrl[i][0], wi * self.ctrl[i][1], wi];
            for c in 0..3 {
                aw[c] += d[0][k] * h[c];
                daw[c] += d[1][k] * h[c];
            }
        }
        let pt = [aw[0] / aw[2], aw[1] / aw[2]];
        let dp = [
            (daw[0] - pt[0] * daw[2]) / aw[2],
            (daw[1] - pt[1] * daw[2]) / aw[2],
        ];
        (pt, dp)
    }

    /// Inserts a knot without changing the traced curve.
    pub fn insert_knot(&self, u: f64) -> NurbsCurve {
        let (kv, span) = self.kv.inserted(u);
        let alphas = insert_knot_alphas(&self.kv, u, span);
        let homo: Vec<[f64; 3]> = self
            .ctrl
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| [c[0] * w, c[1] * w, w])
            .collect();
        let new_homo = insert_into_row(&homo, span, self.kv.degree(), &alphas);
        let (ctrl, weights) = dehomogenize(&new_homo);
        NurbsCurve { kv, ctrl, weights }
    }
}

fn dehomogenize(homo: &[[f64; 3]]) -> (Vec<[f64; 2]>, Vec<f64>) {
    let ctrl = homo.iter().map(|h| [h[0] / h[2], h[1] / h[2]]).collect();
    let weights = homo.iter().map(|h| h[2]).collect();
    (ctrl, weights)
}

/// One of the four boundary edges of a tensor-product patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PatchEdge {
    UMin,
    UMax,
    VMin,
    VMax,
}

impl PatchEdge {
    /// All four edges in a fixed order.
    pub const ALL: [PatchEdge; 4] = [
        PatchEdge::UMin,
        PatchEdge::UMax,
        PatchEdge::VMin,
        PatchEdge::VMax,
    ];
}

/// A tensor-product planar NURBS patch.
///
/// Control points are stored with the u-index fastest: `ctrl[j * nu + i]`
/// for `i < nu`, `j < nv`.
#[derive(Debug, Clone)]
pub struct NurbsPatch {
    pub ku: KnotVector,
    pub kv: KnotVector,
    pub ctrl: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl NurbsPatch {
    pub fn new(
        ku: KnotVector,
        kv: KnotVector,
        ctrl: Vec<[f64; 2]>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let (nu, nv) = (ku.n_basis(), kv.n_basis());
        if ctrl.len() != nu * nv || weights.len() != nu * nv {
            return Err(Error::geometry(format!(
                "patch needs {} control points/weights, got {}/{}",
                nu * nv,
                ctrl.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w > 0.0)) {
            return Err(Error::geometry("patch weights must be positive"));
        }
        Ok(NurbsPatch {
            ku,
            kv,
            ctrl,
            weights,
        })
    }

    pub fn nu(&self) -> usize {
        self.ku.n_basis()
    }

    pub fn nv(&self) -> usize {
        self.kv.n_basis()
    }

    /// Local control-point index.
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nu() + i
    }

    /// Maps a parametric point to physical coordinates.
    pub fn point(&self, u: f64, v: f64) -> [f64; 2] {
        let (pt, _) = self.point_jacobian(u, v);
        pt
    }

    /// Maps a parametric point and returns the 2x2 Jacobian
    /// `d(x, y) / d(u, v)` as `[[dx/du, dx/dv], [dy/du, dy/dv]]`.
    pub fn point_jacobian(&self, u: f64, v: f64) -> ([f64; 2], [[f64; 2]; 2]) {
        let su = self.ku.find_span(u);
        let sv = self.kv.find_span(v);
        let du = self.ku.basis_derivs(su, u, 1);
        let dv = self.kv.basis_derivs(sv, v, 1);
        let (pu, pv) = (self.ku.degree(), self.kv.degree());
        let nu = self.nu();

        // Homogeneous sums: value, d/du, d/dv of (w*x, w*y, w).
        let mut s = [[0.0f64; 3]; 3];
        for b in 0..=pv {
            let j = sv - pv + b;
            for a in 0..=pu {
                let i = su - pu + a;
                let wi = self.weights[j * nu + i];
                let c = self.ctrl[j * nu + i];
                let h = [wi * c[0], wi * c[1], wi];
                let f = du[0][a] * dv[0][b];
                let fu = du[1][a] * dv[0][b];
                let fv = du[0][a] * dv[1][b];
                for k in 0..3 {
                    s[0][k] += f * h[k];
                    s[1][k] += fu * h[k];
                    s[2][k] += fv * h[k];
                }
            }
        }
        let w = s[0][2];
        let pt = [s[0][0] / w, s[0][1] / w];
        let jac = [
            [
                (s[1][0] - pt[0] * s[1][2]) / w,
                (s[2][0] - pt[0] * s[2][2]) / w,
            ],
            [
                (s[1][1] - pt[1] * s[1][2]) / w,
                (s[2][1] - pt[1] * s[2][2]) / w,
            ],
        ];
        (pt, jac)
    }

    /// Rational basis values and parametric gradients of the local functions
    /// supported on the span of `(u, v)`.
    ///
    /// Returns `(first_u_index, first_v_index, values, grads)` where the
    /// local arrays run over `(pu + 1) * (pv + 1)` functions with the u-index
    /// fastest.
    pub fn basis_grads(
        &self,
        u: f64,
        v: f64,
    ) -> (usize, usize, Vec<f64>, Vec<[f64; 2]>) {
        let su = self.ku.find_span(u);
        let sv = self.kv.find_span(v);
        let du = self.ku.basis_derivs(su, u, 1);
        let dv = self.kv.basis_derivs(sv, v, 1);
        let (pu, pv) = (self.ku.degree(), self.kv.degree());
        let nu = self.nu();
        let nloc = (pu + 1) * (pv + 1);

        let mut wsum = 0.0;
        let mut wsum_u = 0.0;
        let mut wsum_v = 0.0;
        let mut num = vec![0.0; nloc];
        let mut num_u = vec![0.0; nloc];
        let mut num_v = vec![0.0; nloc];
        for b in 0..=pv {
            let j = sv - pv + b;
            for a in 0..=pu {
                let i = su - pu + a;
                let wi = self.weights[j * nu + i];
                let k = b * (pu + 1) + a;
                num[k] = du[0][a] * dv[0][b] * wi;
                num_u[k] = du[1][a] * dv[0][b] * wi;
                num_v[k] = du[0][a] * dv[1][b] * wi;
                wsum += num[k];
                wsum_u += num_u[k];
                wsum_v += num_v[k];
            }
        }
        let mut vals = vec![0.0; nloc];
        let mut grads = vec![[0.0; 2]; nloc];
        for k in 0..nloc {
            let r = num[k] / wsum;
            vals[k] = r;
            grads[k] = [
                (num_u[k] - r * wsum_u) / wsum,
                (num_v[k] - r * wsum_v) / wsum,
            ];
        }
        (su - pu, sv - pv, vals, grads)
    }

    /// Extracts a boundary edge as a curve.  The curve parameter runs with
    /// increasing u (for VMin/VMax) or increasing v (for UMin/UMax).
    pub fn edge_curve(&self, edge: PatchEdge) -> NurbsCurve {
        let kv = match edge {
            PatchEdge::VMin | PatchEdge::VMax => self.ku.clone(),
            PatchEdge::UMin | PatchEdge::UMax => self.kv.clone(),
        };
        let idx = self.edge_indices(edge);
        NurbsCurve {
            kv,
            ctrl: idx.iter().map(|&k| self.ctrl[k]).collect(),
            weights: idx.iter().map(|&k| self.weights[k]).collect(),
        }
    }

    /// Flattened control-point indices along an edge, ordered by increasing
    /// edge parameter (u for VMin/VMax, v for UMin/UMax).
    pub fn edge_indices(&self, edge: PatchEdge) -> Vec<usize> {
        let (nu, nv) = (self.nu(), self.nv());
        match edge {
            PatchEdge::VMin => (0..nu).map(|i| self.idx(i, 0)).collect(),
            PatchEdge::VMax => (0..nu).map(|i| self.idx(i, nv - 1)).collect(),
            PatchEdge::UMin => (0..nv).map(|j| self.idx(0, j)).collect(),
            PatchEdge::UMax => (0..nv).map(|j| self.idx(nu - 1, j)).collect(),
        }
    }

    fn homogeneous(&self) -> Vec<[f64; 3]> {
        self.ctrl
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| [c[0] * w, c[1] * w, w])
            .collect()
    }

    fn from_homogeneous(ku: KnotVector, kv: KnotVector, homo: Vec<[f64; 3]>) -> NurbsPatch {
        let (ctrl, weights) = dehomogenize(&homo);
        NurbsPatch {
            ku,
            kv,
            ctrl,
            weights,
        }
    }

    /// Inserts a knot in the u-direction without changing the surface.
    pub fn insert_knot_u(&self, u: f64) -> NurbsPatch {
        let (ku_new, span) = self.ku.inserted(u);
        let alphas = insert_knot_alphas(&self.ku, u, span);
        let nu = self.nu();
        let homo = self.homogeneous();
        let mut out = Vec::with_capacity((nu + 1) * self.nv());
        for j in 0..self.nv() {
            let row: Vec<[f64; 3]> = (0..nu).map(|i| homo[j * nu + i]).collect();
            out.extend(insert_into_row(&row, span, self.ku.degree(), &alphas));
        }
        NurbsPatch::from_homogeneous(ku_new, self.kv.clone(), out)
    }

    /// Inserts a knot in the v-direction without changing the surface.
    pub fn insert_knot_v(&self, v: f64) -> NurbsPatch {
        let (kv_new, span) = self.kv.inserted(v);
        let alphas = insert_knot_alphas(&self.kv, v, span);
        let (nu, nv) = (self.nu(), self.nv());
        let homo = self.homogeneous();
        let mut cols: Vec<Vec<[f64; 3]>> = Vec::with_capacity(nu);
        for i in 0..nu {
            let col: Vec<[f64; 3]> = (0..nv).map(|j| homo[j * nu + i]).collect();
            cols.push(insert_into_row(&col, span, self.kv.degree(), &alphas));
        }
        let mut out = Vec::with_capacity(nu * (nv + 1));
        for j in 0..nv + 1 {
            for col in cols.iter().take(nu) {
                out.push(col[j]);
            }
        }
        NurbsPatch::from_homogeneous(self.ku.clone(), kv_new, out)
    }

    /// Uniformly subdivides every non-empty span into `sub_u` x `sub_v`
    /// pieces by repeated knot insertion; the mapped surface is unchanged.
    pub fn refined(&self, sub_u: usize, sub_v: usize) -> NurbsPatch {
        let mut patch = self.clone();
        if sub_u > 1 {
            for span in self.ku.nonempty_spans() {
                let (a, b) = (self.ku.knots[span], self.ku.knots[span + 1]);
                for k in 1..sub_u {
                    patch = patch.insert_knot_u(a + (b - a) * k as f64 / sub_u as f64);
                }
            }
        }
        if sub_v > 1 {
            for span in self.kv.nonempty_spans() {
                let (a, b) = (self.kv.knots[span], self.kv.knots[span + 1]);
                for k in 1..sub_v {
                    patch = patch.insert_knot_v(a + (b - a) * k as f64 / sub_v as f64);
                }
            }
        }
        patch
    }

    /// Axis-aligned bounding box of the control net (contains the patch by
    /// the convex-hull property).
    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in &self.ctrl {
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    }

    /// Control-net diameter, used to scale geometric tolerances.
    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        ((hi[0] - lo[0]).powi(2) + (hi[1] - lo[1]).powi(2)).sqrt()
    }

    /// Inverts the geometry map at a physical point via damped Newton
    /// iteration from a coarse parametric seed grid.  Returns the parametric
    /// coordinates if the point lies on the patch.
    pub fn locate(&self, x: [f64; 2], tol: f64) -> Option<[f64; 2]> {
        let (du, dv) = (self.ku.domain(), self.kv.domain());
        let mut best: Option<([f64; 2], f64)> = None;
        for si in 0..3 {
            for sj in 0..3 {
                let mut u = du.0 + (du.1 - du.0) * (0.5 + si as f64) / 3.0;
                let mut v = dv.0 + (dv.1 - dv.0) * (0.5 + sj as f64) / 3.0;
                for _ in 0..40 {
                    let (pt, j) = self.point_jacobian(u, v);
                    let r = [x[0] - pt[0], x[1] - pt[1]];
                    let err = (r[0] * r[0] + r[1] * r[1]).sqrt();
                    if best.map_or(true, |(_, e)| err < e) {
                        best = Some(([u, v], err));
                    }
                    if err <= tol {
                        return Some([u, v]);
                    }
                    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                    if det.abs() < 1e-300 {
                        break;
                    }
                    let step = [
                        (j[1][1] * r[0] - j[0][1] * r[1]) / det,
                        (-j[1][0] * r[0] + j[0][0] * r[1]) / det,
                    ];
                    u = (u + step[0]).clamp(du.0, du.1);
                    v = (v + step[1]).clamp(dv.0, dv.1);
                }
            }
        }
        // Accept a converged boundary-clamped point that still matches.
        if let Some((uv, err)) = best {
            if err <= tol {
                return Some(uv);
            }
        }
        None
    }
}
