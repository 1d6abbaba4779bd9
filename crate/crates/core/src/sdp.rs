//! Dense interior-point solver for the max-min trace SDP
//!
//! ```text
//! maximize   t
//! subject to tr(H_k V) >= t      k = 1..T
//!            diag(V) <= 1
//!            V ⪰ 0               (V complex Hermitian, N×N)
//! ```
//!
//! and Gaussian randomization to round the relaxed solution back to a
//! unit-modulus vector.
//!
//! Every `H_k` is positive semidefinite, so raising a diagonal entry of `V`
//! never lowers any `tr(H_k V)` and the diagonal constraint can be imposed as
//! an equality without changing the optimal value. The problem is then put in
//! standard conic form over `S^N_+ × R^{T+1}_+`:
//!
//! ```text
//! min  -t   s.t.  tr(H_k V) - s_k - t = 0,   V_ii = 1,   V ⪰ 0, s >= 0, t >= 0
//! ```
//!
//! whose dual is `min Σ μ_i` s.t. `diag(μ) - Σ λ_k H_k ⪰ 0`, `Σ λ_k >= 1`,
//! `λ >= 0`. The solver works directly on complex Hermitian blocks with the
//! real inner product `<A, B> = Re tr(A B)`, which is the same algorithm as
//! running on the real symmetric embedding of size `2N`. It starts from a
//! strictly feasible primal-dual pair, so every iterate satisfies weak
//! duality, and takes HKM search directions with a Mehrotra
//! predictor-corrector.
//!
//! All constraint matrices are held as Gram factors `H = F F^H`. With thin
//! factors the Schur complement costs `O(N R^2)` per iteration, `R` being the
//! total factor width.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::C64;

const HERMITIAN_TOL: f64 = 1e-12;

/// Complex Hermitian matrix, checked on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(DMatrix<C64>);

impl HermitianMatrix {
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::invalid(format!(
                "Hermitian matrix must be square, got {}×{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.norm().max(1.0);
        let asym = (&m - m.adjoint()).norm();
        if !asym.is_finite() || asym > HERMITIAN_TOL * scale {
            return Err(Error::invalid(format!(
                "matrix is not Hermitian (‖A - A^H‖ = {asym:.3e})"
            )));
        }
        Ok(Self(hermitian_part(&m)))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.0[(i, i)].re).collect()
    }

    /// Quadratic form `v^H A v`.
    pub fn quad(&self, v: &DVector<C64>) -> f64 {
        v.dotc(&(&self.0 * v)).re
    }
}

fn hermitian_part(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Positive semidefinite matrix stored as `F F^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    factor: DMatrix<C64>,
}

impl GramMatrix {
    /// Builds `F F^H`, dropping directions of `F` that carry no energy.
    pub fn from_factor(factor: DMatrix<C64>) -> Self {
        Self {
            factor: compress_factor(factor),
        }
    }

    /// Factors a Hermitian matrix. Fails if it has an eigenvalue below
    /// `-1e-10 · max(1, λ_max)`.
    pub fn from_hermitian(h: &HermitianMatrix) -> Result<Self> {
        let eig = SymmetricEigen::new(h.matrix().clone());
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let floor = 1e-10 * lmax.max(1.0);
        let mut cols = Vec::new();
        for (i, &lam) in eig.eigenvalues.iter().enumerate() {
            if lam < -floor {
                return Err(Error::invalid(format!(
                    "constraint matrix is not PSD (eigenvalue {lam:.3e})"
                )));
            }
            if lam > 1e-14 * lmax {
                cols.push(eig.eigenvectors.column(i) * C64::new(lam.sqrt(), 0.0));
            }
        }
        let n = h.dim();
        let factor = if cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Ok(Self { factor })
    }

    pub fn factor(&self) -> &DMatrix<C64> {
        &self.factor
    }

    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn to_hermitian(&self) -> HermitianMatrix {
        HermitianMatrix(hermitian_part(&(&self.factor * self.factor.adjoint())))
    }

    /// `v^H (F F^H) v = ‖F^H v‖²`.
    pub fn quad(&self, v: &DVector<C64>) -> f64 {
        self.factor
            .column_iter()
            .map(|f| f.dotc(v).norm_sqr())
            .sum()
    }

    /// `tr(F F^H V)`.
    pub fn trace_with(&self, v: &DMatrix<C64>) -> f64 {
        let vf = v * &self.factor;
        self.factor
            .column_iter()
            .zip(vf.column_iter())
            .map(|(f, g)| f.dotc(&g).re)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        self.factor.norm_squared()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            factor: &self.factor * C64::new(c.sqrt(), 0.0),
        }
    }
}

fn compress_factor(f: DMatrix<C64>) -> DMatrix<C64> {
    if f.ncols() <= 1 {
        return f;
    }
    let gram = f.adjoint() * &f;
    let eig = SymmetricEigen::new(hermitian_part(&gram));
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b));
    if lmax <= 0.0 {
        return DMatrix::zeros(f.nrows(), 0);
    }
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > 1e-13 * lmax)
        .collect();
    if keep.len() == f.ncols() {
        return f;
    }
    let cols: Vec<_> = keep
        .iter()
        .map(|&i| &f * eig.eigenvectors.column(i))
        .collect();
    DMatrix::from_columns(&cols)
}

/// Sampled max-min SNR problem over the lifted variable `V = v v^H`.
#[derive(Debug, Clone)]
pub struct MaxMinSdpProblem {
    constraints: Vec<GramMatrix>,
    dim: usize,
}

impl MaxMinSdpProblem {
    pub fn new(constraints: Vec<GramMatrix>) -> Result<Self> {
        let dim = constraints
            .first()
            .ok_or_else(|| Error::invalid("max-min SDP needs at least one constraint"))?
            .dim();
        if dim == 0 {
            return Err(Error::invalid("max-min SDP dimension must be positive"));
        }
        if let Some(bad) = constraints.iter().find(|c| c.dim() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "constraint of dimension {} in a problem of dimension {dim}",
                bad.dim()
            )));
        }
        Ok(Self { constraints, dim })
    }

    pub fn from_hermitian(mats: &[HermitianMatrix]) -> Result<Self> {
        let grams = mats
            .iter()
            .map(GramMatrix::from_hermitian)
            .collect::<Result<Vec<_>>>()?;
        Self::new(grams)
    }

    pub fn constraints(&self) -> &[GramMatrix] {
        &self.constraints
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `min_k v^H H_k v`.
    pub fn objective_at(&self, v: &DVector<C64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.quad(v))
            .fold(f64::INFINITY, f64::min)
    }

    /// `min_k tr(H_k V)`.
    pub fn objective_of(&self, v: &DMatrix<C64>) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.trace_with(v))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    /// Target relative duality gap.
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub v: HermitianMatrix,
    /// `min_k tr(H_k V)` evaluated on the returned `V`.
    pub objective: f64,
    /// Dual objective, an upper bound on the relaxed optimum.
    pub dual_objective: f64,
    /// `(dual - primal) / (1 + |primal| + |dual|)` in the solver's scaling.
    pub gap: f64,
    pub iterations: usize,
    /// `(primal, dual)` objective after every iteration, original scale.
    pub trace: Vec<(f64, f64)>,
}

/// Solves the relaxed max-min problem to relative duality gap `opts.tol`.
pub fn solve_maxmin_sdp(prob: &MaxMinSdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid("SDP tolerance must be positive"));
    }
    let n = prob.dim;
    let traces: Vec<f64> = prob.constraints.iter().map(GramMatrix::trace).collect();
    let mean_trace = traces.iter().sum::<f64>() / traces.len() as f64;
    if traces.iter().any(|&t| t <= 0.0) || mean_trace <= 0.0 {
        // some H_k = 0, so the optimum is 0 and V = I attains it
        let v = HermitianMatrix::identity(n);
        let objective = prob.objective_of(v.matrix());
        return Ok(SdpSolution {
            v,
            objective,
            dual_objective: objective,
            gap: 0.0,
            iterations: 0,
            trace: vec![(objective, objective)],
        });
    }
    // normalize so the average constraint trace equals N
    let scale = mean_trace / n as f64;
    let ops = Operators::new(prob, 1.0 / scale);
    Ipm::new(ops, n).run(prob, opts, scale)
}

/// Linear maps of the conic standard form. Constraints `0..T` are the sample
/// rows, `T..T+N` the diagonal rows.
struct Operators {
    n: usize,
    t: usize,
    /// All Gram factors side by side, diagonal rows last as identity columns.
    f: DMatrix<C64>,
    /// Constraint index of every column of `f`.
    owner: Vec<usize>,
}

impl Operators {
    fn new(prob: &MaxMinSdpProblem, scale: f64) -> Self {
        let n = prob.dim;
        let t = prob.constraints.len();
        let width: usize = prob.constraints.iter().map(GramMatrix::rank).sum::<usize>() + n;
        let mut f = DMatrix::zeros(n, width);
        let mut owner = Vec::with_capacity(width);
        let s = C64::new(scale.sqrt(), 0.0);
        let mut col = 0;
        for (k, c) in prob.constraints.iter().enumerate() {
            for fc in c.factor().column_iter() {
                f.set_column(col, &(fc * s));
                owner.push(k);
                col += 1;
            }
        }
        for i in 0..n {
            f[(i, col)] = C64::new(1.0, 0.0);
            owner.push(t + i);
            col += 1;
        }
        Self { n, t, f, owner }
    }

    fn m(&self) -> usize {
        self.t + self.n
    }

    /// `Re tr(A_j Y)` for every constraint `j`.
    fn apply(&self, y: &DMatrix<C64>) -> DVector<f64> {
        let yf = y * &self.f;
        let mut out = DVector::zeros(self.m());
        for (a, &j) in self.owner.iter().enumerate() {
            out[j] += self.f.column(a).dotc(&yf.column(a)).re;
        }
        out
    }

    /// `Σ_j w_j A_j`.
    fn adjoint(&self, w: &DVector<f64>) -> DMatrix<C64> {
        let mut scaled = self.f.clone();
        for (a, &j) in self.owner.iter().enumerate() {
            let c = C64::new(w[j], 0.0);
            scaled.column_mut(a).iter_mut().for_each(|v| *v *= c);
        }
        hermitian_part(&(scaled * self.f.adjoint()))
    }

    /// HKM Schur complement `Re tr(A_j X A_l Z^{-1})`.
    fn schur(&self, x: &DMatrix<C64>, zinv: &DMatrix<C64>) -> DMatrix<f64> {
        let fh = self.f.adjoint();
        let p = &fh * (x * &self.f);
        let q = &fh * (zinv * &self.f);
        let m = self.m();
        let mut out = DMatrix::zeros(m, m);
        for b in 0..self.owner.len() {
            let l = self.owner[b];
            for a in 0..self.owner.len() {
                let j = self.owner[a];
                let pq = p[(a, b)] * q[(a, b)].conj();
                out[(j, l)] += pq.re;
            }
        }
        out
    }
}

struct Iterate {
    x: DMatrix<C64>,
    /// LP slacks `s_1..s_T` followed by `t`.
    xl: DVector<f64>,
    y: DVector<f64>,
    z: DMatrix<C64>,
    zl: DVector<f64>,
}

struct Direction {
    dx: DMatrix<C64>,
    dxl: DVector<f64>,
    dy: DVector<f64>,
    dz: DMatrix<C64>,
    dzl: DVector<f64>,
}

struct Ipm {
    ops: Operators,
    n: usize,
}

impl Ipm {
    fn new(ops: Operators, n: usize) -> Self {
        Self { ops, n }
    }

    fn t(&self) -> usize {
        self.ops.t
    }

    fn initial_point(&self) -> Iterate {
        let (n, t) = (self.n, self.t());
        let x = DMatrix::identity(n, n);
        let traces = self.ops.apply(&x);
        let tmin = (0..t).map(|k| traces[k]).fold(f64::INFINITY, f64::min);
        let t0 = 0.5 * tmin;
        let mut xl = DVector::zeros(t + 1);
        for k in 0..t {
            xl[k] = traces[k] - t0;
        }
        xl[t] = t0;

        let lam = 2.0 / t as f64;
        let mu0 = lam * (0..t).map(|k| traces[k]).sum::<f64>() + 1.0;
        let mut y = DVector::zeros(t + n);
        for k in 0..t {
            y[k] = lam;
        }
        for i in 0..n {
            y[t + i] = -mu0;
        }
        let z = -self.ops.adjoint(&y);
        let mut zl = DVector::zeros(t + 1);
        for k in 0..t {
            zl[k] = lam;
        }
        zl[t] = lam * t as f64 - 1.0;
        Iterate { x, xl, y, z, zl }
    }

    fn lp_apply(&self, xl: &DVector<f64>) -> DVector<f64> {
        let t = self.t();
        let mut out = DVector::zeros(self.ops.m());
        for k in 0..t {
            out[k] = -xl[k] - xl[t];
        }
        out
    }

    fn lp_adjoint(&self, y: &DVector<f64>) -> DVector<f64> {
        let t = self.t();
        let mut out = DVector::zeros(t + 1);
        let mut sum = 0.0;
        for k in 0..t {
            out[k] = -y[k];
            sum += y[k];
        }
        out[t] = -sum;
        out
    }

    fn b(&self) -> DVector<f64> {
        let mut b = DVector::zeros(self.ops.m());
        for i in 0..self.n {
            b[self.t() + i] = 1.0;
        }
        b
    }

    fn c_lp(&self) -> DVector<f64> {
        let mut c = DVector::zeros(self.t() + 1);
        c[self.t()] = -1.0;
        c
    }

    fn residuals(&self, it: &Iterate) -> (DVector<f64>, DMatrix<C64>, DVector<f64>) {
        let rp = self.b() - self.ops.apply(&it.x) - self.lp_apply(&it.xl);
        let rd = -self.ops.adjoint(&it.y) - &it.z;
        let rdl = self.c_lp() - self.lp_adjoint(&it.y) - &it.zl;
        (rp, rd, rdl)
    }

    fn objectives(&self, it: &Iterate) -> (f64, f64) {
        // max-form: primal t, dual Σ μ_i = -Σ y_{T+i}
        let t = self.t();
        let dual = -(0..self.n).map(|i| it.y[t + i]).sum::<f64>();
        (it.xl[t], dual)
    }

    fn complementarity(&self, it: &Iterate) -> f64 {
        inner(&it.x, &it.z) + it.xl.dot(&it.zl)
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_direction(
        &self,
        it: &Iterate,
        zinv: &DMatrix<C64>,
        schur: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        rp: &DVector<f64>,
        rd: &DMatrix<C64>,
        rdl: &DVector<f64>,
        kv: &DMatrix<C64>,
        kl: &DVector<f64>,
    ) -> Direction {
        let d = it.xl.component_div(&it.zl);
        let rhs = rp - self.ops.apply(kv) + self.ops.apply(&(&it.x * rd * zinv))
            - self.lp_apply(kl)
            + self.lp_apply(&d.component_mul(rdl));
        let dy = schur.solve(&rhs);
        let dz = rd - self.ops.adjoint(&dy);
        let dzl = rdl - self.lp_adjoint(&dy);
        let dx = kv - hermitian_part(&(&it.x * &dz * zinv));
        let dxl = kl - d.component_mul(&dzl);
        Direction {
            dx,
            dxl,
            dy,
            dz,
            dzl,
        }
    }

    fn run(&self, prob: &MaxMinSdpProblem, opts: &SdpOptions, scale: f64) -> Result<SdpSolution> {
        let (n, t) = (self.n, self.t());
        let nu = (n + t + 1) as f64;
        let mut it = self.initial_point();
        let mut trace = Vec::new();
        let mut last_gap = f64::INFINITY;

        for iter in 0..=opts.max_iterations {
            let (rp, rd, rdl) = self.residuals(&it);
            let (pobj, dobj) = self.objectives(&it);
            let gap = (dobj - pobj) / (1.0 + pobj.abs() + dobj.abs());
            let pinf = rp.norm() / (1.0 + (n as f64).sqrt());
            let dinf = (rd.norm() + rdl.norm()) / (1.0 + scale_free_norm(&self.ops));
            if iter > 0 {
                trace.push((pobj * scale, dobj * scale));
            }
            last_gap = gap;
            if gap <= opts.tol && pinf <= opts.tol && dinf <= opts.tol {
                return Ok(self.finish(prob, it, iter, gap, scale, trace));
            }
            if iter == opts.max_iterations {
                break;
            }

            let mu = self.complementarity(&it) / nu;
            let Some(zchol) = it.z.clone().cholesky() else {
                break;
            };
            let Some(xchol) = it.x.clone().cholesky() else {
                break;
            };
            let zinv = hermitian_part(&zchol.inverse());
            let mut schur = self.ops.schur(&it.x, &zinv);
            let d = it.xl.component_div(&it.zl);
            for j in 0..t {
                schur[(j, j)] += d[j];
                for l in 0..t {
                    schur[(j, l)] += d[t];
                }
            }
            let schur = (&schur + schur.transpose()) * 0.5;
            let Some(schur) = schur.cholesky() else {
                break;
            };

            // predictor
            let kv = -&it.x;
            let kl = -&it.xl;
            let aff = self.solve_direction(&it, &zinv, &schur, &rp, &rd, &rdl, &kv, &kl);
            let ap = step_length(&xchol, &aff.dx, &it.xl, &aff.dxl).min(1.0);
            let zchol_l = zchol.clone();
            let ad = step_length(&zchol_l, &aff.dz, &it.zl, &aff.dzl).min(1.0);
            let x_aff = &it.x + &aff.dx * C64::new(ap, 0.0);
            let z_aff = &it.z + &aff.dz * C64::new(ad, 0.0);
            let xl_aff = &it.xl + &aff.dxl * ap;
            let zl_aff = &it.zl + &aff.dzl * ad;
            let mu_aff = (inner(&x_aff, &z_aff) + xl_aff.dot(&zl_aff)) / nu;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

            // corrector
            let smu = sigma * mu;
            let kv = &zinv * C64::new(smu, 0.0)
                - &it.x
                - hermitian_part(&(&aff.dx * &aff.dz * &zinv));
            let kl = DVector::from_fn(t + 1, |i, _| {
                (smu - it.xl[i] * it.zl[i] - aff.dxl[i] * aff.dzl[i]) / it.zl[i]
            });
            let dir = self.solve_direction(&it, &zinv, &schur, &rp, &rd, &rdl, &kv, &kl);
            let ap = (0.98 * step_length(&xchol, &dir.dx, &it.xl, &dir.dxl)).min(1.0);
            let ad = (0.98 * step_length(&zchol, &dir.dz, &it.zl, &dir.dzl)).min(1.0);

            it.x = hermitian_part(&(&it.x + &dir.dx * C64::new(ap, 0.0)));
            it.xl += &dir.dxl * ap;
            it.y += &dir.dy * ad;
            it.z = hermitian_part(&(&it.z + &dir.dz * C64::new(ad, 0.0)));
            it.zl += &dir.dzl * ad;
        }

        let iterations = trace.len();
        let best = self.finish(prob, it, iterations, last_gap, scale, trace);
        Err(Error::SolverFailure {
            iterations,
            gap: last_gap,
            best: Box::new(best),
        })
    }

    fn finish(
        &self,
        prob: &MaxMinSdpProblem,
        it: Iterate,
        iterations: usize,
        gap: f64,
        scale: f64,
        trace: Vec<(f64, f64)>,
    ) -> SdpSolution {
        let (_, dobj) = self.objectives(&it);
        let v = HermitianMatrix(hermitian_part(&it.x));
        let objective = prob.objective_of(v.matrix());
        SdpSolution {
            v,
            objective,
            dual_objective: dobj * scale,
            gap,
            iterations,
            trace,
        }
    }
}

fn scale_free_norm(ops: &Operators) -> f64 {
    (ops.m() as f64).sqrt()
}

fn inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// Largest `α` keeping `X + α ΔX ⪰ 0` and `x + α Δx >= 0`.
fn step_length(
    chol: &nalgebra::Cholesky<C64, nalgebra::Dyn>,
    dm: &DMatrix<C64>,
    xl: &DVector<f64>,
    dxl: &DVector<f64>,
) -> f64 {
    let l = chol.l();
    let a = l
        .solve_lower_triangular(dm)
        .expect("Cholesky factor is nonsingular");
    let w = l
        .solve_lower_triangular(&a.adjoint())
        .expect("Cholesky factor is nonsingular");
    let lmin = SymmetricEigen::new(hermitian_part(&w))
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |m, &e| m.min(e));
    let mut alpha = if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY };
    for (x, d) in xl.iter().zip(dxl.iter()) {
        if *d < 0.0 {
            alpha = alpha.min(-x / d);
        }
    }
    alpha
}

/// Unit-modulus vector recovered from a relaxed solution.
#[derive(Debug, Clone)]
pub struct RandomizedVector {
    pub v: DVector<C64>,
    /// `min_k v^H H_k v`.
    pub objective: f64,
    /// Index of the winning draw.
    pub draw: usize,
}

/// Draws `k` samples from `CN(0, V)`, projects each entry onto the unit
/// circle and keeps the draw with the largest max-min objective.
pub fn gaussian_randomization(
    sol: &SdpSolution,
    prob: &MaxMinSdpProblem,
    k: usize,
    seed: u64,
) -> Result<RandomizedVector> {
    if k == 0 {
        return Err(Error::invalid("need at least one randomization sample"));
    }
    let n = prob.dim();
    if sol.v.dim() != n {
        return Err(Error::DimensionMismatch(format!(
            "solution of dimension {} for a problem of dimension {n}",
            sol.v.dim()
        )));
    }
    let eig = SymmetricEigen::new(sol.v.matrix().clone());
    let mut root = eig.eigenvectors.clone();
    let floor = eig.eigenvalues.iter().cloned().fold(0.0, f64::max) * 1e-12;
    for (j, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = C64::new(if lam > floor { lam.sqrt() } else { 0.0 }, 0.0);
        root.column_mut(j).iter_mut().for_each(|e| *e *= s);
    }
    let normal = Normal::new(0.0, 0.5f64.sqrt()).expect("valid normal");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<RandomizedVector> = None;
    let mut draws = 0;
    while draws < k {
        let w = DVector::from_fn(n, |_, _| {
            C64::new(normal.sample(&mut rng), normal.sample(&mut rng))
        });
        let xi = &root * w;
        if xi.iter().any(|e| !(e.norm() > 1e-300)) {
            continue;
        }
        let v = xi.map(|e| e / e.norm());
        let objective = prob.objective_at(&v);
        if best.as_ref().is_none_or(|b| objective > b.objective) {
            best = Some(RandomizedVector {
                v,
                objective,
                draw: draws,
            });
        }
        draws += 1;
    }
    Ok(best.expect("k >= 1"))
}
