//! The contour-dynamics functional for radially deformed discs, its
//! linearization at the discs, and Newton continuation of rotating V-states.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::{KernelError, KernelSet, LayerParams, PlanePoint};
use crate::quadrature::{cross_rule, curve_integral, CrossRule, CurveSamples, LayerKernel, LogWeights, ProductRow, Rule};
use crate::spectrum::{self, Branch, Matrix2, SpectrumError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContourError {
    #[error("radius collapse: b^2 + 2 min r = {min_square}")]
    RadiusCollapse { min_square: f64 },
    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),
    #[error("invalid discretization: {0}")]
    InvalidGrid(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("Newton iteration stopped after {iterations} iterations with residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("spectral collision for m = {m}: {reason}")]
    Collision { m: u32, reason: String },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, ContourError>;

/// Per-layer deformations r_k(θ) = Σ_n c_{n,k} cos(nmθ), n = 1..N_modes,
/// together with their values on θ_i = 2πi/N_nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DeformationRecord", try_from = "DeformationRecord")]
pub struct RadialDeformation {
    pub m: u32,
    pub coeffs: [Vec<f64>; 2],
    pub nodal: [Vec<f64>; 2],
}

#[derive(Serialize, Deserialize)]
struct DeformationRecord {
    m: u32,
    n_nodes: usize,
    coeffs: [Vec<f64>; 2],
}

impl From<RadialDeformation> for DeformationRecord {
    fn from(d: RadialDeformation) -> Self {
        DeformationRecord { m: d.m, n_nodes: d.n_nodes(), coeffs: d.coeffs }
    }
}

impl TryFrom<DeformationRecord> for RadialDeformation {
    type Error = ContourError;
    fn try_from(r: DeformationRecord) -> Result<Self> {
        RadialDeformation::from_coeffs(r.m, r.coeffs, r.n_nodes)
    }
}

/// r(θ) and ∂_θ r(θ) from cosine coefficients of modes nm.
fn synthesize(m: u32, c: &[f64], theta: f64) -> (f64, f64) {
    let mut r = 0.0;
    let mut dr = 0.0;
    for (i, &cn) in c.iter().enumerate() {
        let q = ((i + 1) as u32 * m) as f64;
        let (s, co) = (q * theta).sin_cos();
        r += cn * co;
        dr -= q * cn * s;
    }
    (r, dr)
}

fn check_nodes(n_nodes: usize) -> Result<()> {
    if n_nodes < 64 || !n_nodes.is_power_of_two() {
        return Err(ContourError::InvalidGrid(format!("N_nodes = {n_nodes} must be a power of two >= 64")));
    }
    Ok(())
}

impl RadialDeformation {
    pub fn from_coeffs(m: u32, coeffs: [Vec<f64>; 2], n_nodes: usize) -> Result<Self> {
        check_nodes(n_nodes)?;
        if m == 0 {
            return Err(ContourError::InvalidArgument("symmetry m must be at least 1".into()));
        }
        let n_modes = coeffs[0].len();
        if n_modes == 0 || coeffs[1].len() != n_modes {
            return Err(ContourError::InvalidGrid("both layers need the same positive number of modes".into()));
        }
        if 2 * n_modes * m as usize >= n_nodes {
            return Err(ContourError::InvalidGrid(format!(
                "highest mode {} is not resolved by {n_nodes} nodes",
                n_modes * m as usize
            )));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(ContourError::InvalidArgument("non-finite coefficient".into()));
        }
        let h = 2.0 * PI / n_nodes as f64;
        let nodal = [0, 1].map(|k| (0..n_nodes).map(|i| synthesize(m, &coeffs[k], h * i as f64).0).collect());
        Ok(RadialDeformation { m, coeffs, nodal })
    }

    pub fn zero(m: u32, n_modes: usize, n_nodes: usize) -> Result<Self> {
        Self::from_coeffs(m, [vec![0.0; n_modes], vec![0.0; n_modes]], n_nodes)
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs[0].len()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodal[0].len()
    }

    /// (r_k(θ), ∂_θ r_k(θ)) for layer k ∈ {1, 2}.
    pub fn eval(&self, k: usize, theta: f64) -> (f64, f64) {
        synthesize(self.m, &self.coeffs[k - 1], theta)
    }

    /// Same deformation sampled on a different node count.
    pub fn resampled(&self, n_nodes: usize) -> Result<Self> {
        Self::from_coeffs(self.m, self.coeffs.clone(), n_nodes)
    }

    /// Discrete cosine projection of nodal values onto modes nm, n = 1..=n_modes.
    pub fn coeffs_from_nodal(m: u32, nodal: &[f64], n_modes: usize) -> Vec<f64> {
        let n = nodal.len();
        let h = 2.0 * PI / n as f64;
        (1..=n_modes)
            .map(|q| {
                let f = (q as u32 * m) as f64;
                2.0 / n as f64 * nodal.iter().enumerate().map(|(i, v)| v * (f * h * i as f64).cos()).sum::<f64>()
            })
            .collect()
    }

    /// Largest mismatch between stored coefficients and the projection of the nodal values.
    pub fn consistency_defect(&self) -> f64 {
        (0..2)
            .flat_map(|k| {
                let back = Self::coeffs_from_nodal(self.m, &self.nodal[k], self.n_modes());
                back.into_iter().zip(self.coeffs[k].clone()).map(|(a, b)| (a - b).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Boundary samples (θ, R1, R2, x1, y1, x2, y2) on `n` equally spaced angles.
    pub fn boundary_table(&self, params: &LayerParams, n: usize) -> Result<Vec<[f64; 7]>> {
        let h = 2.0 * PI / n as f64;
        (0..n)
            .map(|i| {
                let t = h * i as f64;
                let r1 = radius_at(params.b1, self.eval(1, t).0)?;
                let r2 = radius_at(params.b2, self.eval(2, t).0)?;
                let (s, c) = t.sin_cos();
                Ok([t, r1, r2, r1 * c, r1 * s, r2 * c, r2 * s])
            })
            .collect()
    }
}

fn radius_at(b: f64, r: f64) -> Result<f64> {
    let sq = b * b + 2.0 * r;
    if sq > 0.0 {
        Ok(sq.sqrt())
    } else {
        Err(ContourError::RadiusCollapse { min_square: sq })
    }
}

/// R(θ_i) = √(b² + 2 r(θ_i)).
pub fn radius_profile(b: f64, r_nodal: &[f64]) -> Result<Vec<f64>> {
    r_nodal.iter().map(|&r| radius_at(b, r)).collect()
}

/// Values of F_1 and F_2 on the nodal grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryFunctionPair {
    pub values: [Vec<f64>; 2],
}

impl BoundaryFunctionPair {
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// (2/N) Σ_i F_k(θ_i) sin(qθ_i) for layer k ∈ {1, 2}.
    pub fn sine_coefficient(&self, k: usize, q: u32) -> f64 {
        let v = &self.values[k - 1];
        let n = v.len();
        let h = 2.0 * PI / n as f64;
        2.0 / n as f64 * v.iter().enumerate().map(|(i, f)| f * (q as f64 * h * i as f64).sin()).sum::<f64>()
    }
}

/// Boundary point and tangent of layer k at angle θ.
fn boundary_point(b: f64, m: u32, c: &[f64], theta: f64) -> Result<(PlanePoint, PlanePoint, f64)> {
    let (r, dr) = synthesize(m, c, theta);
    let big_r = radius_at(b, r)?;
    let dbig_r = dr / big_r;
    let (s, co) = theta.sin_cos();
    let z = PlanePoint::new(big_r * co, big_r * s);
    let dz = PlanePoint::new(dbig_r * co - big_r * s, dbig_r * s + big_r * co);
    Ok((z, dz, dr))
}

fn curve_samples(b: f64, m: u32, c: &[f64], n: usize) -> Result<CurveSamples> {
    let h = 2.0 * PI / n as f64;
    let mut z = Vec::with_capacity(n);
    let mut dz = Vec::with_capacity(n);
    for i in 0..n {
        let (p, dp, _) = boundary_point(b, m, c, h * i as f64)?;
        z.push(p);
        dz.push(dp);
    }
    Ok(CurveSamples { z, dz })
}

/// Quadrature of F at a fixed set of target angles.
struct Evaluator {
    params: LayerParams,
    ks: KernelSet,
    n: usize,
    targets: Vec<f64>,
    rows: Vec<ProductRow>,
}

impl Evaluator {
    fn new(params: &LayerParams, n: usize, targets: Vec<f64>) -> Self {
        let lw = LogWeights::new(n);
        let rows = targets.iter().map(|&t| lw.at(t)).collect();
        Evaluator { params: *params, ks: KernelSet::new(params), n, targets, rows }
    }

    fn on_nodes(params: &LayerParams, n: usize) -> Self {
        let h = 2.0 * PI / n as f64;
        Self::new(params, n, (0..n).map(|i| h * i as f64).collect())
    }

    fn eval(&self, omega: f64, m: u32, coeffs: &[Vec<f64>; 2]) -> Result<[Vec<f64>; 2]> {
        let b = [self.params.b1, self.params.b2];
        let src = [curve_samples(b[0], m, &coeffs[0], self.n)?, curve_samples(b[1], m, &coeffs[1], self.n)?];
        let gap = src[0].z.iter().zip(&src[1].z).map(|(p, q)| (p.norm() - q.norm()).abs()).fold(f64::INFINITY, f64::min);
        let scale = src.iter().flat_map(|s| s.z.iter()).map(|p| p.norm()).fold(0.0, f64::max);
        let rule = cross_rule(gap, scale, self.n);
        let refined = match rule {
            CrossRule::Refined(f) => Some([
                curve_samples(b[0], m, &coeffs[0], self.n * f)?,
                curve_samples(b[1], m, &coeffs[1], self.n * f)?,
            ]),
            _ => None,
        };
        let mut out = [Vec::with_capacity(self.targets.len()), Vec::with_capacity(self.targets.len())];
        for (ti, &t) in self.targets.iter().enumerate() {
            let product = Rule::Product { row: &self.rows[ti], shift: 0 };
            for k in 0..2 {
                let (p, dp, dr) = boundary_point(b[k], m, &coeffs[k], t)?;
                let j = 1 - k;
                let own = curve_integral(&LayerKernel { ks: &self.ks, k, j: k }, p, &src[k], product);
                let cross = LayerKernel { ks: &self.ks, k, j };
                let other = match (&refined, rule) {
                    (Some(fine), _) => curve_integral(&cross, p, &fine[j], Rule::Trapezoid),
                    (None, CrossRule::Aligned) => curve_integral(&cross, p, &src[j], product),
                    _ => curve_integral(&cross, p, &src[j], Rule::Trapezoid),
                };
                let v = omega * dr + dp.cross(own) + dp.cross(other);
                if !v.is_finite() {
                    return Err(ContourError::QuadratureFailure(format!(
                        "non-finite value in layer {} at theta = {t}",
                        k + 1
                    )));
                }
                out[k].push(v);
            }
        }
        Ok(out)
    }
}

/// F(Ω, r) on the nodal grid of `r`.
pub fn functional_f(params: &LayerParams, omega: f64, r: &RadialDeformation) -> Result<BoundaryFunctionPair> {
    params.validate()?;
    check_nodes(r.n_nodes())?;
    let ev = Evaluator::on_nodes(params, r.n_nodes());
    Ok(BoundaryFunctionPair { values: ev.eval(omega, r.m, &r.coeffs)? })
}

/// −n·M_n(Ω): the block mapping cosine mode n of (r_1, r_2) to sine mode n of F.
pub fn linearized_multiplier(params: &LayerParams, omega: f64, n: u32) -> Result<Matrix2> {
    let mm = spectrum::matrix_m(params, n, omega)?;
    let f = -(n as f64);
    Ok([[f * mm[0][0], f * mm[0][1]], [f * mm[1][0], f * mm[1][1]]])
}

/// Central-difference Jacobian of F restricted to modes qm, q = 1..=n_probe.
#[derive(Debug, Clone, PartialEq)]
pub struct FdJacobian {
    pub m: u32,
    pub n_probe: usize,
    /// blocks[out][in][k_out][k_in], zero-based mode indices q − 1.
    pub blocks: Vec<Vec<Matrix2>>,
}

impl FdJacobian {
    /// Block mapping cos(q_in·mθ) to sin(q_out·mθ), 1-based q.
    pub fn block(&self, q_out: usize, q_in: usize) -> Matrix2 {
        self.blocks[q_out - 1][q_in - 1]
    }
}

pub fn jacobian_fd(params: &LayerParams, omega: f64, r0: &RadialDeformation, h: f64, n_probe: usize) -> Result<FdJacobian> {
    if !(1e-8..=1e-4).contains(&h) {
        return Err(ContourError::InvalidArgument(format!("FD step {h} outside [1e-8, 1e-4]")));
    }
    if n_probe == 0 {
        return Err(ContourError::InvalidArgument("n_probe must be positive".into()));
    }
    let n_modes = r0.n_modes().max(n_probe);
    let mut base = r0.coeffs.clone();
    for c in base.iter_mut() {
        c.resize(n_modes, 0.0);
    }
    RadialDeformation::from_coeffs(r0.m, base.clone(), r0.n_nodes())?;
    let ev = Evaluator::on_nodes(params, r0.n_nodes());
    let mut blocks = vec![vec![[[0.0; 2]; 2]; n_probe]; n_probe];
    for q_in in 0..n_probe {
        for k_in in 0..2 {
            let mut plus = base.clone();
            plus[k_in][q_in] += h;
            let mut minus = base.clone();
            minus[k_in][q_in] -= h;
            let fp = BoundaryFunctionPair { values: ev.eval(omega, r0.m, &plus)? };
            let fm = BoundaryFunctionPair { values: ev.eval(omega, r0.m, &minus)? };
            for (q_out, row) in blocks.iter_mut().enumerate() {
                let mode = (q_out as u32 + 1) * r0.m;
                for k_out in 0..2 {
                    let d = fp.sine_coefficient(k_out + 1, mode) - fm.sine_coefficient(k_out + 1, mode);
                    row[q_in][k_out][k_in] = d / (2.0 * h);
                }
            }
        }
    }
    Ok(FdJacobian { m: r0.m, n_probe, blocks })
}

/// Discretization and Newton controls for the V-state solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_nodes: usize,
    pub n_modes: usize,
    pub s_max: f64,
    pub tol: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    pub fd_step: f64,
    pub collision_grid: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            n_nodes: 256,
            n_modes: 32,
            s_max: 0.1,
            tol: 1e-10,
            step_tol: 1e-12,
            max_iter: 50,
            max_halvings: 8,
            fd_step: 1e-7,
            collision_grid: 256,
        }
    }
}

/// A converged m-fold V-state on one bifurcation branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VStateSolution {
    pub params: LayerParams,
    pub m: u32,
    pub sign: Branch,
    pub amplitude: f64,
    pub omega: f64,
    /// Unit kernel direction x0; the mode-m coefficients project onto it with value `amplitude`.
    pub direction: [f64; 2],
    pub deformation: RadialDeformation,
    pub residual: f64,
    pub iterations: usize,
}

/// Unit generator of ker M_m(Ω_m^±).
pub fn unit_kernel_vector(params: &LayerParams, m: u32, sign: Branch) -> Result<[f64; 2]> {
    let v = spectrum::kernel_vector(params, m, sign)?;
    let n = v[0].hypot(v[1]);
    Ok([v[0] / n, v[1] / n])
}

/// Refuses parameters at which the kernel of the linearized operator may fail to be simple.
pub fn check_collisions(params: &LayerParams, m: u32, sign: Branch, n_modes: usize, grid: usize) -> Result<()> {
    let records = spectrum::collision_scan(params, m, (2 * m).max(m + 1), grid)?;
    let tol = 1e-8 * params.b1;
    if let Some(r) = records.iter().find(|r| (r.b2_root - params.b2).abs() <= tol) {
        return Err(ContourError::Collision {
            m,
            reason: format!("b2 = {} matches the root b2 = {} of Omega_{}^- = Omega_{}^+", params.b2, r.b2_root, m, r.n),
        });
    }
    let omega = spectrum::omega_branch(params, m, sign)?;
    for j in 2..=n_modes as u32 {
        let mm = spectrum::matrix_m(params, j * m, omega)?;
        let scale = spectrum::frobenius(&mm).powi(2).max(f64::MIN_POSITIVE);
        if spectrum::determinant(&mm).abs() <= 1e-10 * scale {
            return Err(ContourError::Collision {
                m,
                reason: format!("M_{}(Omega_{}^{}) is singular", j * m, m, sign),
            });
        }
    }
    Ok(())
}

/// Residual map and unknown layout of the augmented V-state system.
struct VStateSystem<'a> {
    ev: Evaluator,
    m: u32,
    n_modes: usize,
    s: f64,
    dir: [f64; 2],
    cfg: &'a SolverConfig,
}

impl VStateSystem<'_> {
    /// x = (Ω, τ, c_{2,1}, c_{2,2}, …); mode-m coefficients are s·x0 + τ·x0^⊥.
    fn coeffs(&self, x: &DVector<f64>) -> [Vec<f64>; 2] {
        let perp = [-self.dir[1], self.dir[0]];
        let mut c = [vec![0.0; self.n_modes], vec![0.0; self.n_modes]];
        for k in 0..2 {
            c[k][0] = self.s * self.dir[k] + x[1] * perp[k];
            for q in 1..self.n_modes {
                c[k][q] = x[2 + 2 * (q - 1) + k];
            }
        }
        c
    }

    fn unknowns(&self, omega: f64, c: &[Vec<f64>; 2]) -> DVector<f64> {
        let perp = [-self.dir[1], self.dir[0]];
        let mut x = DVector::zeros(2 * self.n_modes);
        x[0] = omega;
        x[1] = perp[0] * c[0][0] + perp[1] * c[1][0];
        for q in 1..self.n_modes {
            for k in 0..2 {
                x[2 + 2 * (q - 1) + k] = c[k].get(q).copied().unwrap_or(0.0);
            }
        }
        x
    }

    /// Sine coefficients of F on modes qm, q = 1..=N_modes, from midpoint samples on (0, π/m).
    fn residual(&self, x: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        let c = self.coeffs(x);
        let vals = self.ev.eval(x[0], self.m, &c)?;
        let t_count = self.ev.targets.len();
        let mut out = DVector::zeros(2 * self.n_modes);
        let mut sup: f64 = 0.0;
        for k in 0..2 {
            for (ti, v) in vals[k].iter().enumerate() {
                sup = sup.max(v.abs());
                let phi = PI * (ti as f64 + 0.5) / t_count as f64;
                for q in 0..self.n_modes {
                    out[2 * q + k] += 2.0 / t_count as f64 * v * ((q + 1) as f64 * phi).sin();
                }
            }
        }
        Ok((out, sup))
    }

    fn jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        let dim = x.len();
        let mut jac = DMatrix::zeros(dim, dim);
        let c = self.coeffs(x);
        for q in 0..self.n_modes {
            for k in 0..2 {
                jac[(2 * q + k, 0)] = -(((q + 1) as u32 * self.m) as f64) * c[k][q];
            }
        }
        let h = self.cfg.fd_step;
        for col in 1..dim {
            let mut xp = x.clone();
            xp[col] += h;
            let mut xm = x.clone();
            xm[col] -= h;
            let (fp, _) = self.residual(&xp)?;
            let (fm, _) = self.residual(&xm)?;
            jac.set_column(col, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

fn solve_from(
    params: &LayerParams,
    m: u32,
    sign: Branch,
    s: f64,
    start: Option<(&[Vec<f64>; 2], f64)>,
    cfg: &SolverConfig,
) -> Result<VStateSolution> {
    params.validate()?;
    check_nodes(cfg.n_nodes)?;
    if m == 0 {
        return Err(ContourError::InvalidArgument("symmetry m must be at least 1".into()));
    }
    if cfg.n_modes < 8 {
        return Err(ContourError::InvalidGrid(format!("N_modes = {} must be at least 8", cfg.n_modes)));
    }
    if !(s.abs() <= cfg.s_max) {
        return Err(ContourError::InvalidArgument(format!("amplitude |s| = {} exceeds s_max = {}", s.abs(), cfg.s_max)));
    }
    check_collisions(params, m, sign, cfg.n_modes, cfg.collision_grid)?;
    let dir = unit_kernel_vector(params, m, sign)?;
    let omega0 = spectrum::omega_branch(params, m, sign)?;
    let zero = RadialDeformation::zero(m, cfg.n_modes, cfg.n_nodes)?;
    if s == 0.0 {
        return Ok(VStateSolution {
            params: *params,
            m,
            sign,
            amplitude: 0.0,
            omega: omega0,
            direction: dir,
            deformation: zero,
            residual: 0.0,
            iterations: 0,
        });
    }
    let t_count = 2 * cfg.n_modes;
    let targets = (0..t_count).map(|t| PI * (t as f64 + 0.5) / (t_count as f64 * m as f64)).collect();
    let sys = VStateSystem { ev: Evaluator::new(params, cfg.n_nodes, targets), m, n_modes: cfg.n_modes, s, dir, cfg };
    let mut x = match start {
        Some((c, omega)) => sys.unknowns(omega, c),
        None => {
            let mut x = DVector::zeros(2 * cfg.n_modes);
            x[0] = omega0;
            x
        }
    };
    let (mut f, mut sup) = sys.residual(&x)?;
    let mut jac: Option<DMatrix<f64>> = None;
    let mut fresh = false;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        if jac.is_none() {
            jac = Some(sys.jacobian(&x)?);
            fresh = true;
        }
        let lu = jac.as_ref().expect("jacobian present").clone().lu();
        let dx = lu.solve(&(-&f)).ok_or(ContourError::NoConvergence { iterations, residual: sup })?;
        let step = inf_norm(&dx);
        if sup <= cfg.tol && step <= cfg.step_tol {
            x += dx;
            sup = sys.residual(&x)?.1;
            converged = sup <= cfg.tol;
            break;
        }
        let norm0 = inf_norm(&f);
        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let xt = &x + &dx * lambda;
            let (ft, st) = sys.residual(&xt)?;
            if inf_norm(&ft) < norm0 {
                accepted = Some((xt, ft, st));
                break;
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, ft, st)) => {
                let ratio = inf_norm(&ft) / norm0;
                x = xt;
                f = ft;
                sup = st;
                fresh = false;
                if ratio > 0.25 {
                    jac = None;
                }
            }
            None if sup <= cfg.tol => {
                converged = true;
                break;
            }
            None if !fresh => jac = None,
            None => break,
        }
    }
    if !converged {
        return Err(ContourError::NoConvergence { iterations, residual: sup });
    }
    let deformation = RadialDeformation::from_coeffs(m, sys.coeffs(&x), cfg.n_nodes)?;
    let residual = functional_f(params, x[0], &deformation)?.sup_norm();
    Ok(VStateSolution { params: *params, m, sign, amplitude: s, omega: x[0], direction: dir, deformation, residual, iterations })
}

/// Newton solve for the m-fold V-state with amplitude s along the unit kernel direction.
/// Without `init` the iteration starts from s·x0·cos(mθ) and Ω_m^±.
pub fn vstate_solve(
    params: &LayerParams,
    m: u32,
    sign: Branch,
    s: f64,
    init: Option<&RadialDeformation>,
    cfg: &SolverConfig,
) -> Result<VStateSolution> {
    let omega0 = spectrum::omega_branch(params, m, sign)?;
    solve_from(params, m, sign, s, init.map(|d| (&d.coeffs, omega0)), cfg)
}

/// Solutions along an amplitude grid; stops at the first failure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchResult {
    pub solutions: Vec<VStateSolution>,
    pub last_good_amplitude: Option<f64>,
    pub failure: Option<String>,
}

pub fn branch_continue(params: &LayerParams, m: u32, sign: Branch, s_grid: &[f64], cfg: &SolverConfig) -> BranchResult {
    let mut solutions: Vec<VStateSolution> = Vec::new();
    let mut failure = None;
    for &s in s_grid {
        let start = solutions.last().map(|p| (&p.deformation.coeffs, p.omega));
        match solve_from(params, m, sign, s, start, cfg) {
            Ok(sol) => solutions.push(sol),
            Err(e) => {
                failure = Some(format!("amplitude {s}: {e}"));
                break;
            }
        }
    }
    BranchResult { last_good_amplitude: solutions.last().map(|s| s.amplitude), solutions, failure }
}
