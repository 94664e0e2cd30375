//! Harmonic mortar coupling of a rotating inner domain to a fixed outer
//! domain across a circular interface in the air gap.
//!
//! Both sides are discretized independently; continuity of the potential on
//! the coupling circle is imposed weakly against a truncated Fourier basis
//! (a constant plus `m` sine/cosine pairs).  Rotating the inner domain by an
//! angle `beta` only mixes the sine/cosine test functions, so the coupling
//! matrix at any angle is the one at zero times a block rotation.  A full
//! rotation sweep therefore costs two factorizations plus one small dense
//! solve per angle.
//!
//! The inner (rotor) stiffness block is floating: its null space is the
//! constant potential.  The saddle system is solved by a deflated Schur
//! complement: one rotor dof is grounded for the factorization, the
//! compatibility condition is restored through a bordered row, and the
//! constant mode amplitude is recovered alongside the Fourier multipliers.
//!
//! The torque on the rotor follows from differentiating the coupling work
//! with respect to the rotation angle; its sign and magnitude are pinned
//! against a Maxwell stress-tensor evaluation in the tests.

use nalgebra::{DMatrix, DVector};

use crate::assembly::{assemble, DiscreteSpace, FieldEvaluator, ModelMaterials};
use crate::error::{Error, Result};
use crate::geometry::MultipatchModel;
use crate::quadrature::gauss;
use crate::sparse::{BandCholesky, CsrMatrix};
use crate::spline::PatchEdge;
use crate::MU0;

/// Default number of sine/cosine pairs in the coupling space.
pub const DEFAULT_HARMONICS: usize = 30;

/// Relative KKT residual the coupled solve must reach.
pub const COUPLED_RESIDUAL_TOL: f64 = 1e-8;

/// Truncated Fourier basis on the coupling circle: a constant followed by
/// `m` cosine/sine pairs, `2 m + 1` functions in total.
#[derive(Debug, Clone, Copy)]
pub struct Harmonics {
    pub m: usize,
}

impl Harmonics {
    pub fn n_cols(&self) -> usize {
        2 * self.m + 1
    }

    /// Basis values at an azimuth.
    pub fn eval(&self, theta: f64, out: &mut [f64]) {
        out[0] = 1.0;
        for k in 1..=self.m {
            let (s, c) = (k as f64 * theta).sin_cos();
            out[2 * k - 1] = c;
            out[2 * k] = s;
        }
    }

    /// Block rotation `R(beta)` mixing the pairs when the inner domain
    /// turns by `beta`: columns of the rotated coupling matrix are
    /// `G(beta) = G(0) R(beta)`.
    pub fn rotation(&self, beta: f64) -> DMatrix<f64> {
        let n = self.n_cols();
        let mut r = DMatrix::zeros(n, n);
        r[(0, 0)] = 1.0;
        for k in 1..=self.m {
            let (s, c) = (k as f64 * beta).sin_cos();
            let (a, b) = (2 * k - 1, 2 * k);
            r[(a, a)] = c;
            r[(a, b)] = s;
            r[(b, a)] = -s;
            r[(b, b)] = c;
        }
        r
    }

    /// Derivative `dR/dbeta`.
    pub fn rotation_deriv(&self, beta: f64) -> DMatrix<f64> {
        let n = self.n_cols();
        let mut r = DMatrix::zeros(n, n);
        for k in 1..=self.m {
            let kf = k as f64;
            let (s, c) = (kf * beta).sin_cos();
            let (a, b) = (2 * k - 1, 2 * k);
            r[(a, a)] = -kf * s;
            r[(a, b)] = kf * c;
            r[(b, a)] = -kf * c;
            r[(b, b)] = -kf * s;
        }
        r
    }
}

/// Patch edges of a model lying on the circle of radius `r`.
pub fn edges_on_circle(model: &MultipatchModel, r: f64) -> Vec<(usize, PatchEdge)> {
    let tol = 1e-7 * r;
    let mut out = Vec::new();
    for (p, mp) in model.patches.iter().enumerate() {
        for &edge in &PatchEdge::ALL {
            let curve = mp.patch.edge_curve(edge);
            let (a, b) = curve.kv.domain();
            let on = (0..=6).all(|k| {
                let t = a + (b - a) * k as f64 / 6.0;
                let x = curve.point(t);
                ((x[0] * x[0] + x[1] * x[1]).sqrt() - r).abs() <= tol
            });
            if on {
                out.push((p, edge));
            }
        }
    }
    out
}

/// Coupling matrix `G` on the free dofs of one side: `G[i, k]` integrates
/// basis function `i` against harmonic `k` along the coupling circle.
/// Returns the matrix and the number of distinct trace dofs.
fn assemble_coupling(
    model: &MultipatchModel,
    space: &DiscreteSpace,
    r: f64,
    harmonics: Harmonics,
) -> Result<(DMatrix<f64>, usize)> {
    let edges = edges_on_circle(model, r);
    if edges.is_empty() {
        return Err(Error::geometry(format!(
            "no patch edges found on the coupling circle r = {r}"
        )));
    }
    let ncols = harmonics.n_cols();
    let mut g = DMatrix::zeros(space.n_free, ncols);
    let mut trace = std::collections::BTreeSet::new();
    let mut h = vec![0.0; ncols];
    for (p, edge) in edges {
        let patch = &model.patches[p].patch;
        let curve = patch.edge_curve(edge);
        let idx = patch.edge_indices(edge);
        let deg = curve.kv.degree();
        let rule = gauss(deg + 3);
        for span in curve.kv.nonempty_spans() {
            let (a, b) = (curve.kv.knots()[span], curve.kv.knots()[span + 1]);
            for (t, wq) in rule.mapped(a, b) {
                let (x, dx) = curve.point_deriv(t);
                let ds = (dx[0] * dx[0] + dx[1] * dx[1]).sqrt();
                let theta = x[1].atan2(x[0]);
                harmonics.eval(theta, &mut h);
                let vals = curve.kv.basis(span, t);
                // Rational 1D basis along the edge.
                let mut wsum = 0.0;
                for (a_loc, &v) in vals.iter().enumerate() {
                    wsum += v * curve.weights[span - deg + a_loc];
                }
                for (a_loc, &v) in vals.iter().enumerate() {
                    let i_ctrl = span - deg + a_loc;
                    let dof = space.dof(p, idx[i_ctrl]);
                    let free = space.free_of_dof[dof];
                    if free == usize::MAX {
                        continue;
                    }
                    trace.insert(free);
                    let rb = v * curve.weights[i_ctrl] / wsum;
                    for k in 0..ncols {
                        g[(free, k)] += wq * rb * ds * h[k];
                    }
                }
            }
        }
    }
    if trace.len() < ncols {
        return Err(Error::config(format!(
            "coupling space too rich: {} harmonics need at least {} trace \
             dofs but the mesh provides {}; refine the gap edges or lower \
             the harmonic count",
            harmonics.m,
            ncols,
            trace.len()
        )));
    }
    Ok((g, trace.len()))
}

enum SideSolver {
    Plain(BandCholesky),
    /// Factorization with one dof removed; used for the floating side.
    Grounded { chol: BandCholesky, ground: usize },
}

impl SideSolver {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            SideSolver::Plain(chol) => chol.solve(b),
            SideSolver::Grounded { chol, ground } => {
                let reduced: Vec<f64> = b
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != *ground)
                    .map(|(_, &v)| v)
                    .collect();
                let x = chol.solve(&reduced);
                let mut full = Vec::with_capacity(b.len());
                full.extend_from_slice(&x[..*ground]);
                full.push(0.0);
                full.extend_from_slice(&x[*ground..]);
                full
            }
        }
    }
}

struct Side {
    space: DiscreteSpace,
    k: CsrMatrix,
    b: Vec<f64>,
    g: DMatrix<f64>,
    solver: SideSolver,
    /// Particular inverse applied to the coupling columns and load.
    kinv_g: DMatrix<f64>,
    kinv_b: DVector<f64>,
}

fn build_side(
    model: &MultipatchModel,
    r_gap: f64,
    harmonics: Harmonics,
    floating: bool,
) -> Result<Side> {
    let space = DiscreteSpace::new(model);
    let system = assemble(model, &space, &ModelMaterials(model), None);
    let (g, _) = assemble_coupling(model, &space, r_gap, harmonics)?;
    let solver = if floating {
        let ground = 0usize;
        let chol = BandCholesky::factor(&system.k.without_dof(ground).to_csr())?;
        SideSolver::Grounded { chol, ground }
    } else {
        SideSolver::Plain(BandCholesky::factor(&system.k.clone().to_csr())?)
    };
    let k = system.k.to_csr();
    let n = space.n_free;
    let mut kinv_g = DMatrix::zeros(n, harmonics.n_cols());
    let mut col = vec![0.0; n];
    for j in 0..harmonics.n_cols() {
        for i in 0..n {
            col[i] = g[(i, j)];
        }
        let x = solver.solve(&col);
        for i in 0..n {
            kinv_g[(i, j)] = x[i];
        }
    }
    let kinv_b = DVector::from_vec(solver.solve(&system.rhs));
    Ok(Side {
        space,
        k,
        b: system.rhs,
        g,
        solver,
        kinv_g,
        kinv_b,
    })
}

/// Rotor/stator pair coupled across the gap circle, with everything
/// angle-independent precomputed.
pub struct MortarMachine {
    pub r_gap: f64,
    pub harmonics: Harmonics,
    rotor: Side,
    stator: Side,
    /// `G0^T P G0` of the rotor side.
    a_rt: DMatrix<f64>,
    /// `G^T K^-1 G` of the stator side.
    s_st: DMatrix<f64>,
    /// `G0^T P b` (rotor) and `G^T K^-1 b` (stator).
    g_r: DVector<f64>,
    d_st: DVector<f64>,
    /// `G0^T z` with `z` the rotor constant mode (ones).
    h0: DVector<f64>,
    /// `z^T b` of the rotor.
    zb: f64,
}

/// Field state of the coupled machine at one rotation angle.
pub struct GapSolution {
    pub beta: f64,
    /// Fourier multipliers of the interface flux.
    pub lambda: DVector<f64>,
    /// Amplitude of the rotor constant mode.
    pub c_rotor: f64,
    /// Rotor potential coefficients in the rotor frame (all dofs).
    pub u_rotor: Vec<f64>,
    /// Stator potential coefficients (all dofs, Dirichlet zeros included).
    pub u_stator: Vec<f64>,
    /// Torque on the rotor per unit axial length [N m / m], positive
    /// counterclockwise.
    pub torque: f64,
}

impl MortarMachine {
    /// Builds the coupled operator from the rotor model (in its own frame,
    /// outer boundary on the gap circle) and the stator model (inner
    /// boundary on the gap circle, Dirichlet on its outer boundary).
    pub fn new(
        rotor_model: &MultipatchModel,
        stator_model: &MultipatchModel,
        r_gap: f64,
        m: usize,
    ) -> Result<MortarMachine> {
        if m == 0 {
            return Err(Error::config("need at least one harmonic pair"));
        }
        if !rotor_model.dirichlet.is_empty() {
            return Err(Error::config(
                "the rotor side must be floating (no Dirichlet edges); its \
                 constant mode is fixed by the coupling",
            ));
        }
        let harmonics = Harmonics { m };
        let rotor = build_side(rotor_model, r_gap, harmonics, true)?;
        let stator = build_side(stator_model, r_gap, harmonics, false)?;

        let a_rt = rotor.g.transpose() * &rotor.kinv_g;
        let s_st = stator.g.transpose() * &stator.kinv_g;
        let g_r = rotor.g.transpose() * &rotor.kinv_b;
        let d_st = stator.g.transpose() * &stator.kinv_b;
        let h0 = DVector::from_iterator(
            harmonics.n_cols(),
            rotor.g.column_iter().map(|c| c.sum()),
        );
        let zb = rotor.b.iter().sum::<f64>();
        Ok(MortarMachine {
            r_gap,
            harmonics,
            rotor,
            stator,
            a_rt,
            s_st,
            g_r,
            d_st,
            h0,
            zb,
        })
    }

    pub fn n_rotor_dofs(&self) -> usize {
        self.rotor.space.n_free
    }

    pub fn n_stator_dofs(&self) -> usize {
        self.stator.space.n_free
    }

    /// Solves the coupled system at rotor angle `beta` [rad].
    pub fn solve_at(&self, beta: f64) -> Result<GapSolution> {
        let nc = self.harmonics.n_cols();
        let rot = self.harmonics.rotation(beta);
        // Bordered Schur system: [S, -h; h^T, 0] [lambda; c] = [d; z^T b].
        let s = rot.transpose() * &self.a_rt * &rot + &self.s_st;
        let d = rot.transpose() * &self.g_r - &self.d_st;
        let h: DVector<f64> = rot.transpose() * &self.h0;
        let mut m = DMatrix::zeros(nc + 1, nc + 1);
        m.view_mut((0, 0), (nc, nc)).copy_from(&s);
        for k in 0..nc {
            m[(k, nc)] = -h[k];
            m[(nc, k)] = h[k];
        }
        let mut rhs = DVector::zeros(nc + 1);
        rhs.rows_mut(0, nc).copy_from(&d);
        rhs[nc] = self.zb;
        let sol = m
            .clone()
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::numerical("singular coupling Schur system"))?;
        let check = (&m * &sol - &rhs).norm() / rhs.norm().max(1e-300);
        if !(check <= 1e-9) {
            return Err(Error::numerical(format!(
                "coupling Schur solve residual {check:.3e}"
            )));
        }
        let lambda = sol.rows(0, nc).into_owned();
        let c = sol[nc];

        // Recover both sides: u_rt = P (b - G lambda) + c z,
        // u_st = K^-1 (b + G lambda).
        let rl = &rot * &lambda;
        let mut u_rt = vec![0.0; self.rotor.space.n_free];
        let pg_rl = &self.rotor.kinv_g * &rl;
        for i in 0..u_rt.len() {
            u_rt[i] = self.rotor.kinv_b[i] - pg_rl[i] + c;
        }
        let kg_l = &self.stator.kinv_g * &lambda;
        let mut u_st = vec![0.0; self.stator.space.n_free];
        for i in 0..u_st.len() {
            u_st[i] = self.stator.kinv_b[i] + kg_l[i];
        }

        self.check_kkt(&u_rt, &u_st, &rl, &lambda, beta)?;

        // Torque from the angle derivative of the coupling work:
        // T = -u_rt^T G0 R'(beta) lambda.
        let gtu = self.rotor.g.transpose() * DVector::from_column_slice(&u_rt);
        let torque = -(gtu.dot(&(self.harmonics.rotation_deriv(beta) * &lambda)));

        Ok(GapSolution {
            beta,
            lambda,
            c_rotor: c,
            u_rotor: self.rotor.space.expand(&u_rt),
            u_stator: self.stator.space.expand(&u_st),
            torque,
        })
    }

    fn check_kkt(
        &self,
        u_rt: &[f64],
        u_st: &[f64],
        rl: &DVector<f64>,
        lambda: &DVector<f64>,
        beta: f64,
    ) -> Result<()> {
        let scale_r = (self.rotor.b.iter().map(|v| v * v).sum::<f64>()
            + self.stator.b.iter().map(|v| v * v).sum::<f64>())
        .sqrt();
        let mut r1 = vec![0.0; u_rt.len()];
        self.rotor.k.matvec(u_rt, &mut r1);
        let g_rl = &self.rotor.g * rl;
        let mut n1 = 0.0;
        for i in 0..r1.len() {
            let r = r1[i] + g_rl[i] - self.rotor.b[i];
            n1 += r * r;
        }
        let mut r2 = vec![0.0; u_st.len()];
        self.stator.k.matvec(u_st, &mut r2);
        let g_l = &self.stator.g * lambda;
        let mut n2 = 0.0;
        for i in 0..r2.len() {
            let r = r2[i] - g_l[i] - self.stator.b[i];
            n2 += r * r;
        }
        let res = (n1 + n2).sqrt() / scale_r.max(1e-300);
        if !(res <= COUPLED_RESIDUAL_TOL) {
            return Err(Error::numerical(format!(
                "coupled solve at beta = {beta:.4} left residual {res:.3e}"
            )));
        }
        Ok(())
    }

    /// Torque at many angles (one small dense solve per angle).
    pub fn torque_curve(&self, betas: &[f64]) -> Result<Vec<f64>> {
        betas.iter().map(|&b| Ok(self.solve_at(b)?.torque)).collect()
    }

    /// Harmonic moments of the interface jump of `A_z` for a solved state:
    /// the weak-continuity residual, which vanishes to solver tolerance for
    /// every retained harmonic.
    pub fn interface_jump_moments(&self, sol: &GapSolution) -> DVector<f64> {
        let restrict = |space: &DiscreteSpace, a: &[f64]| {
            DVector::from_iterator(
                space.n_free,
                (0..space.n_dofs)
                    .filter(|&d| space.free_of_dof[d] != usize::MAX)
                    .map(|d| a[d]),
            )
        };
        let ur = restrict(&self.rotor.space, &sol.u_rotor);
        let us = restrict(&self.stator.space, &sol.u_stator);
        let rot = self.harmonics.rotation(sol.beta);
        rot.transpose() * (self.rotor.g.transpose() * ur) - self.stator.g.transpose() * us
    }

    /// Flux density at a lab-frame point for a solved state: points inside
    /// the gap circle are looked up in the (rotated) rotor, outside in the
    /// stator.
    pub fn b_lab(
        &self,
        rotor_model: &MultipatchModel,
        stator_model: &MultipatchModel,
        sol: &GapSolution,
        x: [f64; 2],
    ) -> Result<[f64; 2]> {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        if r <= self.r_gap {
            let (s, c) = sol.beta.sin_cos();
            let xr = [c * x[0] + s * x[1], -s * x[0] + c * x[1]];
            let eval = FieldEvaluator {
                model: rotor_model,
                space: &self.rotor.space,
                a: &sol.u_rotor,
            };
            let b = eval.b_at(xr)?;
            Ok([c * b[0] - s * b[1], s * b[0] + c * b[1]])
        } else {
            let eval = FieldEvaluator {
                model: stator_model,
                space: &self.stator.space,
                a: &sol.u_stator,
            };
            eval.b_at(x)
        }
    }

    /// Stator-side evaluator for a solved state.
    pub fn stator_eval<'a>(
        &'a self,
        stator_model: &'a MultipatchModel,
        sol: &'a GapSolution,
    ) -> FieldEvaluator<'a> {
        FieldEvaluator {
            model: stator_model,
            space: &self.stator.space,
            a: &sol.u_stator,
        }
    }

    /// Rotor-side evaluator (rotor frame) for a solved state.
    pub fn rotor_eval<'a>(
        &'a self,
        rotor_model: &'a MultipatchModel,
        sol: &'a GapSolution,
    ) -> FieldEvaluator<'a> {
        FieldEvaluator {
            model: rotor_model,
            space: &self.rotor.space,
            a: &sol.u_rotor,
        }
    }
}

/// Torque per unit length from the Maxwell stress tensor on a circle of
/// radius `r` inside an air region: `T = r^2 / mu0 * integral(B_r B_theta)`.
/// `field` returns the lab-frame flux density at a lab point.
pub fn maxwell_stress_torque(
    field: &mut dyn FnMut([f64; 2]) -> Result<[f64; 2]>,
    r: f64,
    n_samples: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    for k in 0..n_samples {
        let th = 2.0 * std::f64::consts::PI * k as f64 / n_samples as f64;
        let (s, c) = th.sin_cos();
        let b = field([r * c, r * s])?;
        let b_r = b[0] * c + b[1] * s;
        let b_t = -b[0] * s + b[1] * c;
        acc += b_r * b_t;
    }
    Ok(r * r / MU0 * acc * 2.0 * std::f64::consts::PI / n_samples as f64)
}

/// Band-averaged Maxwell stress torque (Arkkio's method): the single-circle
/// integral is averaged radially over the air band `[r0, r1]`, which is far
/// less sensitive to local discretization error than any one contour.
pub fn arkkio_torque(
    field: &mut dyn FnMut([f64; 2]) -> Result<[f64; 2]>,
    r0: f64,
    r1: f64,
    n_radial: usize,
    n_samples: usize,
) -> Result<f64> {
    let rule = crate::quadrature::gauss(n_radial);
    let mut acc = 0.0;
    for (r, w) in rule.mapped(r0, r1) {
        acc += w * maxwell_stress_torque(field, r, n_samples)?;
    }
    Ok(acc / (r1 - r0))
}
