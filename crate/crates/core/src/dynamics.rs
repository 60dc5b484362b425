//! Contour dynamics of two vortex patches: Lagrangian advection of boundary
//! nodes under the layer velocities, with the A_δ change of unknowns and the
//! diagnostics used to check stationarity, rigid rotation and the δ = 1 reduction.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bessel;
use crate::contour::RadialDeformation;
use crate::kernels::{KernelError, KernelSet, LayerParams, PlanePoint};
use crate::quadrature::{cross_rule, curve_integral, CrossRule, CurveSamples, LayerKernel, LogWeights, ProductRow, Rule, SplitKernel, MAX_REFINE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("boundaries touch: distance {distance:e}")]
    Touching { distance: f64 },
    #[error("boundary of layer {layer} is no longer simple at t = {time}")]
    NotSimple { layer: usize, time: f64 },
    #[error("non-finite velocity on layer {layer}")]
    NonFinite { layer: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

/// Images of a pair of layer quantities under A_δ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlusMinusFields {
    pub f_plus: f64,
    pub f_minus: f64,
}

/// f₊ = f₁ + f₂/δ, f₋ = f₁ − f₂.
pub fn transform_pm(delta: f64, f1: f64, f2: f64) -> Result<PlusMinusFields> {
    check_delta(delta)?;
    Ok(PlusMinusFields { f_plus: f1 + f2 / delta, f_minus: f1 - f2 })
}

/// Inverse of [`transform_pm`].
pub fn inverse_pm(delta: f64, pm: PlusMinusFields) -> Result<(f64, f64)> {
    check_delta(delta)?;
    let f2 = delta * (pm.f_plus - pm.f_minus) / (1.0 + delta);
    Ok((pm.f_minus + f2, f2))
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::InvalidArgument(format!("delta = {delta} must be positive")))
    }
}

pub const MIN_NODES: usize = 64;

/// A closed, positively oriented curve bounding the patch of one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchBoundary {
    layer: usize,
    nodes: Vec<PlanePoint>,
}

impl PatchBoundary {
    pub fn new(layer: usize, nodes: Vec<PlanePoint>) -> Result<Self> {
        if !(1..=2).contains(&layer) {
            return Err(DynamicsError::InvalidBoundary(format!("layer {layer} must be 1 or 2")));
        }
        if nodes.len() < MIN_NODES || !nodes.len().is_multiple_of(2) {
            return Err(DynamicsError::InvalidBoundary(format!("{} nodes; need an even count >= {MIN_NODES}", nodes.len())));
        }
        if nodes.iter().any(|p| !p.is_finite()) {
            return Err(DynamicsError::InvalidBoundary("non-finite node".into()));
        }
        let b = PatchBoundary { layer, nodes };
        if patch_area(&b) <= 0.0 {
            return Err(DynamicsError::InvalidBoundary("boundary is not positively oriented".into()));
        }
        if !b.is_simple() {
            return Err(DynamicsError::InvalidBoundary("boundary intersects itself".into()));
        }
        Ok(b)
    }

    /// Circle of radius `radius` sampled at `n` nodes starting on the positive x-axis.
    pub fn disc(layer: usize, radius: f64, n: usize) -> Result<Self> {
        let h = 2.0 * PI / n as f64;
        Self::new(layer, (0..n).map(|i| PlanePoint::polar(radius, h * i as f64)).collect())
    }

    /// Boundary R_k(θ)e^{iθ} of a radial deformation, sampled at `n` nodes.
    pub fn from_deformation(params: &LayerParams, deformation: &RadialDeformation, layer: usize, n: usize) -> Result<Self> {
        let b = if layer == 1 { params.b1 } else { params.b2 };
        let h = 2.0 * PI / n as f64;
        let mut nodes = Vec::with_capacity(n);
        for i in 0..n {
            let t = h * i as f64;
            let sq = b * b + 2.0 * deformation.eval(layer.clamp(1, 2), t).0;
            if sq <= 0.0 {
                return Err(DynamicsError::InvalidBoundary(format!("radius collapse at theta = {t}")));
            }
            nodes.push(PlanePoint::polar(sq.sqrt(), t));
        }
        Self::new(layer, nodes)
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn nodes(&self) -> &[PlanePoint] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Rotation about the origin.
    pub fn rotated(&self, angle: f64) -> Self {
        PatchBoundary { layer: self.layer, nodes: self.nodes.iter().map(|p| p.rotate(angle)).collect() }
    }

    /// Pairwise test of non-adjacent chords joining every (N/64)-th node.
    pub fn is_simple(&self) -> bool {
        let stride = (self.nodes.len() / MIN_NODES).max(1);
        let pts: Vec<PlanePoint> = self.nodes.iter().step_by(stride).copied().collect();
        let m = pts.len();
        for i in 0..m {
            let (a, b) = (pts[i], pts[(i + 1) % m]);
            for j in i + 2..m {
                if i == 0 && j == m - 1 {
                    continue;
                }
                if segments_cross(a, b, pts[j], pts[(j + 1) % m]) {
                    return false;
                }
            }
        }
        true
    }
}

fn segments_cross(a: PlanePoint, b: PlanePoint, c: PlanePoint, d: PlanePoint) -> bool {
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    o1 * o2 < 0.0 && o3 * o4 < 0.0
}

/// Shoelace area of a boundary, positive for counter-clockwise orientation.
pub fn patch_area(boundary: &PatchBoundary) -> f64 {
    polygon_area(&boundary.nodes)
}

/// Signed shoelace area of a closed polyline.
pub fn polygon_area(p: &[PlanePoint]) -> f64 {
    let n = p.len();
    if n < 3 {
        return 0.0;
    }
    let o = p[0];
    0.5 * (0..n).map(|i| (p[i] - o).cross(p[(i + 1) % n] - o)).sum::<f64>()
}

/// Trigonometric interpolant of a closed curve through its nodes.
#[derive(Debug, Clone)]
pub struct FourierCurve {
    coeffs: Vec<Complex64>,
}

fn to_complex(p: PlanePoint) -> Complex64 {
    Complex64::new(p.x, p.y)
}

fn to_point(c: Complex64) -> PlanePoint {
    PlanePoint::new(c.re, c.im)
}

fn signed_freq(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

struct Transforms {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Transforms { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }
}

impl FourierCurve {
    pub fn new(nodes: &[PlanePoint]) -> Self {
        Self::with_plan(nodes, &Transforms::new(nodes.len()))
    }

    fn with_plan(nodes: &[PlanePoint], plan: &Transforms) -> Self {
        let n = nodes.len() as f64;
        let mut coeffs: Vec<Complex64> = nodes.iter().map(|&p| to_complex(p)).collect();
        plan.forward.process(&mut coeffs);
        coeffs.iter_mut().for_each(|c| *c /= n);
        FourierCurve { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// (z, z′, z″) at parameter η; the Nyquist mode enters as a cosine.
    pub fn eval(&self, eta: f64) -> (PlanePoint, PlanePoint, PlanePoint) {
        let n = self.coeffs.len();
        let (mut z, mut dz, mut d2z) = (Complex64::default(), Complex64::default(), Complex64::default());
        for (k, &c) in self.coeffs.iter().enumerate() {
            let f = signed_freq(k, n);
            if k == n / 2 {
                let (s, co) = (f * eta).sin_cos();
                z += c * co;
                dz -= c * (f * s);
                d2z -= c * (f * f * co);
            } else {
                let e = c * Complex64::cis(f * eta);
                z += e;
                dz += e * Complex64::new(0.0, f);
                d2z -= e * (f * f);
            }
        }
        (to_point(z), to_point(dz), to_point(d2z))
    }

    /// Values on `m ≥ n` equally spaced parameters, optionally differentiated once.
    fn sample(&self, m: usize, derivative: bool, plan: &Transforms) -> Vec<PlanePoint> {
        let n = self.coeffs.len();
        let mut buf = vec![Complex64::default(); m];
        for (k, &c) in self.coeffs.iter().enumerate() {
            let f = signed_freq(k, n);
            if k == n / 2 {
                if !derivative {
                    buf[n / 2] += 0.5 * c;
                    buf[m - n / 2] += 0.5 * c;
                }
                continue;
            }
            let idx = if k < n / 2 { k } else { m - (n - k) };
            buf[idx] = if derivative { c * Complex64::new(0.0, f) } else { c };
        }
        plan.inverse.process(&mut buf);
        buf.into_iter().map(to_point).collect()
    }

    /// Distance from `p` to the curve, refining the nearest node by Newton's method.
    pub fn distance_to(&self, p: PlanePoint, nodes: &[PlanePoint]) -> f64 {
        let n = nodes.len();
        let (i0, d0) = nodes
            .iter()
            .enumerate()
            .map(|(i, q)| (i, (p - *q).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        let h = 2.0 * PI / n as f64;
        let mut eta = h * i0 as f64;
        let mut best = d0;
        for _ in 0..8 {
            let (z, dz, d2z) = self.eval(eta);
            let diff = z - p;
            best = best.min(diff.norm());
            let g = diff.dot(dz);
            let hess = dz.dot(dz) + diff.dot(d2z);
            if hess <= 0.0 {
                break;
            }
            let step = (g / hess).clamp(-h, h);
            eta -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        best.min((self.eval(eta).0 - p).norm())
    }
}

/// Log kernel log r/(2π) of the Laplace inverse.
struct LogKernel;

impl SplitKernel for LogKernel {
    fn value(&self, r: f64) -> f64 {
        r.ln() / (2.0 * PI)
    }

    fn parts(&self, r: f64) -> (f64, f64, f64) {
        let a = 1.0 / (2.0 * PI);
        (a * r.ln(), a, 0.0)
    }
}

/// Screened kernel K_0(μr)/(2π).
struct ScreenedKernel {
    mu: f64,
    shift: f64,
}

impl SplitKernel for ScreenedKernel {
    fn value(&self, r: f64) -> f64 {
        self.parts(r).0
    }

    fn parts(&self, r: f64) -> (f64, f64, f64) {
        let z = self.mu * r;
        let c = 1.0 / (2.0 * PI);
        if z <= 2.0 {
            let (i0m1, ser) = bessel::i0m1_and_harmonic_series(z);
            let a = -c * (1.0 + i0m1);
            let s = c * (ser - self.shift * (1.0 + i0m1));
            let g = if r > 0.0 { a * r.ln() + s } else { f64::INFINITY };
            (g, a, s)
        } else {
            let a = -c * (1.0 + bessel::i0_minus_one(z));
            let g = c * bessel::k0(z);
            (g, a, g - a * r.ln())
        }
    }
}

/// Positions of two patch boundaries at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionState {
    pub boundaries: [PatchBoundary; 2],
    pub time: f64,
    pub dt: f64,
}

impl EvolutionState {
    pub fn new(b1: PatchBoundary, b2: PatchBoundary, dt: f64) -> Result<Self> {
        if b1.layer != 1 || b2.layer != 2 {
            return Err(DynamicsError::InvalidBoundary("boundaries must be given for layers 1 and 2 in order".into()));
        }
        if b1.len() != b2.len() {
            return Err(DynamicsError::InvalidBoundary(format!("node counts differ: {} and {}", b1.len(), b2.len())));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        Ok(EvolutionState { boundaries: [b1, b2], time: 0.0, dt })
    }

    /// Two exact discs of radii b1 and b2.
    pub fn discs(params: &LayerParams, n: usize, dt: f64) -> Result<Self> {
        Self::new(PatchBoundary::disc(1, params.b1, n)?, PatchBoundary::disc(2, params.b2, n)?, dt)
    }

    pub fn n_nodes(&self) -> usize {
        self.boundaries[0].len()
    }

    /// Largest distance between nodes with equal index on the two layers.
    pub fn layer_mismatch(&self) -> f64 {
        let [a, b] = &self.boundaries;
        a.nodes.iter().zip(&b.nodes).map(|(p, q)| (*p - *q).norm()).fold(0.0, f64::max)
    }

    /// Smallest node-to-node distance between the layers.
    pub fn min_boundary_distance(&self) -> f64 {
        let [a, b] = &self.boundaries;
        a.nodes
            .iter()
            .flat_map(|p| b.nodes.iter().map(move |q| (*p - *q).norm()))
            .fold(f64::INFINITY, f64::min)
    }
}

struct SourceCurve {
    curve: FourierCurve,
    samples: CurveSamples,
}

/// Quadrature machinery for one node count.
struct VelocityEvaluator {
    params: LayerParams,
    ks: KernelSet,
    n: usize,
    row: ProductRow,
    plan: Transforms,
}

impl VelocityEvaluator {
    fn new(params: &LayerParams, n: usize) -> Result<Self> {
        params.validate()?;
        Ok(VelocityEvaluator { params: *params, ks: KernelSet::new(params), n, row: LogWeights::new(n).at(0.0), plan: Transforms::new(n) })
    }

    fn source(&self, b: &PatchBoundary) -> SourceCurve {
        let curve = FourierCurve::with_plan(&b.nodes, &self.plan);
        let dz = curve.sample(self.n, true, &self.plan);
        SourceCurve { samples: CurveSamples { z: b.nodes.clone(), dz }, curve }
    }

    fn refined(&self, src: &SourceCurve, factor: usize) -> CurveSamples {
        let plan = Transforms::new(self.n * factor);
        CurveSamples { z: src.curve.sample(self.n * factor, false, &plan), dz: src.curve.sample(self.n * factor, true, &plan) }
    }

    fn scale(&self, src: &[SourceCurve; 2]) -> f64 {
        src.iter().flat_map(|s| s.samples.z.iter()).map(|p| p.norm()).fold(self.params.b1, f64::max)
    }

    /// ∫ G(|p − z_j|) dz_j for an arbitrary point p.
    fn integrate_at<K: SplitKernel>(&self, kernel: &K, p: PlanePoint, src: &SourceCurve, scale: f64) -> Result<PlanePoint> {
        let (i, d) = src
            .samples
            .z
            .iter()
            .enumerate()
            .map(|(i, q)| (i, (p - *q).norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if d <= 1e-12 * scale {
            return Ok(curve_integral(kernel, p, &src.samples, Rule::Product { row: &self.row, shift: i }));
        }
        match cross_rule(d, scale, self.n) {
            CrossRule::Trapezoid => Ok(curve_integral(kernel, p, &src.samples, Rule::Trapezoid)),
            CrossRule::Refined(f) => Ok(curve_integral(kernel, p, &self.refined(src, f), Rule::Trapezoid)),
            CrossRule::Aligned if d < 1e-8 * self.params.b1 => Err(DynamicsError::Touching { distance: d }),
            CrossRule::Aligned => Ok(curve_integral(kernel, p, &self.refined(src, MAX_REFINE), Rule::Trapezoid)),
        }
    }

    fn point_velocity(&self, state: &EvolutionState, k: usize, p: PlanePoint) -> Result<PlanePoint> {
        let src = state.boundaries.clone().map(|b| self.source(&b));
        let scale = self.scale(&src);
        let mut v = PlanePoint::default();
        for (j, s) in src.iter().enumerate() {
            v = v + self.integrate_at(&LayerKernel { ks: &self.ks, k, j }, p, s, scale)?;
        }
        Ok(-v)
    }

    fn point_velocity_pm(&self, state: &EvolutionState, k: usize, p: PlanePoint) -> Result<PlanePoint> {
        let src = state.boundaries.clone().map(|b| self.source(&b));
        let scale = self.scale(&src);
        let delta = self.params.delta;
        let screened = ScreenedKernel { mu: self.ks.mu, shift: self.ks.log_half_mu_gamma };
        let (mut up, mut um) = (PlanePoint::default(), PlanePoint::default());
        for (j, s) in src.iter().enumerate() {
            let strength = if j == 0 { transform_pm(delta, 1.0, 0.0)? } else { transform_pm(delta, 0.0, 1.0)? };
            up = up - self.integrate_at(&LogKernel, p, s, scale)? * strength.f_plus;
            um = um + self.integrate_at(&screened, p, s, scale)? * strength.f_minus;
        }
        let x = inverse_pm(delta, PlusMinusFields { f_plus: up.x, f_minus: um.x })?;
        let y = inverse_pm(delta, PlusMinusFields { f_plus: up.y, f_minus: um.y })?;
        Ok(if k == 0 { PlanePoint::new(x.0, y.0) } else { PlanePoint::new(x.1, y.1) })
    }

    /// Velocities of all boundary nodes.
    fn node_velocities(&self, boundaries: &[PatchBoundary; 2]) -> Result<[Vec<PlanePoint>; 2]> {
        let src = [self.source(&boundaries[0]), self.source(&boundaries[1])];
        let scale = self.scale(&src);
        let (a, b) = (&src[0].samples.z, &src[1].samples.z);
        let coincident = a.iter().zip(b).all(|(p, q)| (*p - *q).norm() <= 1e-12 * scale);
        let rule = if coincident {
            CrossRule::Aligned
        } else {
            let gap = a.iter().flat_map(|p| b.iter().map(move |q| (*p - *q).norm())).fold(f64::INFINITY, f64::min);
            if gap < 1e-8 * self.params.b1 {
                return Err(DynamicsError::Touching { distance: gap });
            }
            match cross_rule(gap, scale, self.n) {
                CrossRule::Aligned => CrossRule::Refined(MAX_REFINE),
                r => r,
            }
        };
        let fine = match rule {
            CrossRule::Refined(f) => Some([self.refined(&src[0], f), self.refined(&src[1], f)]),
            _ => None,
        };
        let mut out = [Vec::with_capacity(self.n), Vec::with_capacity(self.n)];
        for k in 0..2 {
            let j = 1 - k;
            let own = LayerKernel { ks: &self.ks, k, j: k };
            let cross = LayerKernel { ks: &self.ks, k, j };
            for i in 0..self.n {
                let p = src[k].samples.z[i];
                let product = Rule::Product { row: &self.row, shift: i };
                let v_own = curve_integral(&own, p, &src[k].samples, product);
                let v_cross = match (&fine, rule) {
                    (Some(f), _) => curve_integral(&cross, p, &f[j], Rule::Trapezoid),
                    (None, CrossRule::Aligned) => curve_integral(&cross, p, &src[j].samples, product),
                    _ => curve_integral(&cross, p, &src[j].samples, Rule::Trapezoid),
                };
                let u = -(v_own + v_cross);
                if !u.is_finite() {
                    return Err(DynamicsError::NonFinite { layer: k + 1 });
                }
                out[k].push(u);
            }
        }
        Ok(out)
    }

    fn step(&self, state: &EvolutionState, dt: f64) -> Result<EvolutionState> {
        let advance = |base: &[PatchBoundary; 2], vel: &[Vec<PlanePoint>; 2], h: f64| -> [PatchBoundary; 2] {
            [0, 1].map(|k| PatchBoundary {
                layer: k + 1,
                nodes: base[k].nodes.iter().zip(&vel[k]).map(|(p, v)| *p + *v * h).collect(),
            })
        };
        let b0 = &state.boundaries;
        let k1 = self.node_velocities(b0)?;
        let k2 = self.node_velocities(&advance(b0, &k1, 0.5 * dt))?;
        let k3 = self.node_velocities(&advance(b0, &k2, 0.5 * dt))?;
        let k4 = self.node_velocities(&advance(b0, &k3, dt))?;
        let boundaries = [0, 1].map(|k| PatchBoundary {
            layer: k + 1,
            nodes: (0..self.n)
                .map(|i| b0[k].nodes[i] + (k1[k][i] + (k2[k][i] + k3[k][i]) * 2.0 + k4[k][i]) * (dt / 6.0))
                .collect(),
        });
        let time = state.time + dt;
        for b in &boundaries {
            if b.nodes.iter().any(|p| !p.is_finite()) {
                return Err(DynamicsError::NonFinite { layer: b.layer });
            }
            if !b.is_simple() || patch_area(b) <= 0.0 {
                return Err(DynamicsError::NotSimple { layer: b.layer, time });
            }
        }
        Ok(EvolutionState { boundaries, time, dt: state.dt })
    }
}

/// Velocity of layer `k` at `query`: −Σ_j ∮ G_{k,j}(query − z_j) dz_j.
pub fn boundary_velocity(params: &LayerParams, state: &EvolutionState, k: usize, query: PlanePoint) -> Result<PlanePoint> {
    check_layer(k)?;
    VelocityEvaluator::new(params, state.n_nodes())?.point_velocity(state, k - 1, query)
}

/// The same velocity assembled from the Laplace field of f₊ and the screened field of f₋.
pub fn boundary_velocity_pm(params: &LayerParams, state: &EvolutionState, k: usize, query: PlanePoint) -> Result<PlanePoint> {
    check_layer(k)?;
    VelocityEvaluator::new(params, state.n_nodes())?.point_velocity_pm(state, k - 1, query)
}

/// Velocities at every node of both boundaries.
pub fn node_velocities(params: &LayerParams, state: &EvolutionState) -> Result<[Vec<PlanePoint>; 2]> {
    VelocityEvaluator::new(params, state.n_nodes())?.node_velocities(&state.boundaries)
}

fn check_layer(k: usize) -> Result<()> {
    if (1..=2).contains(&k) {
        Ok(())
    } else {
        Err(DynamicsError::InvalidArgument(format!("layer {k} must be 1 or 2")))
    }
}

/// One classical Runge–Kutta step of size `state.dt`.
pub fn step_rk4(params: &LayerParams, state: &EvolutionState) -> Result<EvolutionState> {
    VelocityEvaluator::new(params, state.n_nodes())?.step(state, state.dt)
}

/// Time step 0.1·(smallest node spacing)/(largest node speed), capped at 1e−2.
pub fn default_dt(params: &LayerParams, state: &EvolutionState) -> Result<f64> {
    let vel = node_velocities(params, state)?;
    let umax = vel.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max);
    let spacing = state
        .boundaries
        .iter()
        .flat_map(|b| {
            let n = b.len();
            (0..n).map(move |i| (b.nodes[(i + 1) % n] - b.nodes[i]).norm())
        })
        .fold(f64::INFINITY, f64::min);
    Ok(if umax > 0.0 { (0.1 * spacing / umax).min(1e-2) } else { 1e-2 })
}

/// Steps between arclength redistributions of the nodes.
pub const RESAMPLE_EVERY: usize = 50;

/// Nodes moved to equal arclength spacing along the trigonometric interpolant,
/// keeping the first node in place.
pub fn resample_arclength(boundary: &PatchBoundary) -> PatchBoundary {
    let n = boundary.len();
    let curve = FourierCurve::new(&boundary.nodes);
    let m = 4 * n;
    let plan_m = Transforms::new(m);
    let mut speed: Vec<Complex64> = curve.sample(m, true, &plan_m).iter().map(|v| Complex64::new(v.norm(), 0.0)).collect();
    plan_m.forward.process(&mut speed);
    let a: Vec<Complex64> = speed[..m / 2].iter().map(|c| c / m as f64).collect();
    let a0 = a[0].re;
    let length = 2.0 * PI * a0;
    let arc = |eta: f64| -> (f64, f64) {
        let w = Complex64::cis(eta);
        let mut e = w;
        let (mut s, mut ds) = (a0 * eta, a0);
        for (k, ak) in a.iter().enumerate().skip(1) {
            let kf = k as f64;
            s += 2.0 * (ak * (e - 1.0) / Complex64::new(0.0, kf)).re;
            ds += 2.0 * (ak * e).re;
            e *= w;
        }
        (s, ds)
    };
    let h = 2.0 * PI / n as f64;
    let nodes = (0..n)
        .map(|i| {
            if i == 0 {
                return boundary.nodes[0];
            }
            let target = length * i as f64 / n as f64;
            let mut eta = h * i as f64;
            for _ in 0..20 {
                let (s, ds) = arc(eta);
                let step = (s - target) / ds;
                eta -= step;
                if step.abs() < 1e-15 {
                    break;
                }
            }
            curve.eval(eta).0
        })
        .collect();
    PatchBoundary { layer: boundary.layer, nodes }
}

/// A trajectory, complete or cut short by `failure`.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    pub snapshots: Vec<EvolutionState>,
    pub steps: usize,
    pub failure: Option<DynamicsError>,
}

/// Integrates to `t_end` with uniform steps no larger than `dt`, recording the
/// initial state, every `snapshot_every`-th step, and the final state.
pub fn evolve(params: &LayerParams, state0: &EvolutionState, t_end: f64, dt: f64, snapshot_every: usize) -> Result<Evolution> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!("t_end = {t_end} must be positive")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DynamicsError::InvalidArgument(format!("dt = {dt} must be positive")));
    }
    if snapshot_every == 0 {
        return Err(DynamicsError::InvalidArgument("snapshot_every must be positive".into()));
    }
    let ev = VelocityEvaluator::new(params, state0.n_nodes())?;
    let steps = (t_end / dt).ceil() as usize;
    let h = t_end / steps as f64;
    let mut state = EvolutionState { dt: h, ..state0.clone() };
    let mut snapshots = vec![state.clone()];
    for step in 1..=steps {
        match ev.step(&state, h) {
            Ok(mut next) => {
                if step == steps {
                    next.time = t_end;
                }
                if step % RESAMPLE_EVERY == 0 {
                    next.boundaries = next.boundaries.map(|b| resample_arclength(&b));
                }
                state = next;
            }
            Err(e) => {
                if snapshots.last().map(|s| s.time) != Some(state.time) {
                    snapshots.push(state);
                }
                return Ok(Evolution { snapshots, steps: step - 1, failure: Some(e) });
            }
        }
        if step % snapshot_every == 0 || step == steps {
            snapshots.push(state.clone());
        }
    }
    Ok(Evolution { snapshots, steps, failure: None })
}

/// Symmetric Hausdorff distance between the trigonometric interpolants of two curves.
pub fn hausdorff_distance(a: &PatchBoundary, b: &PatchBoundary) -> f64 {
    let ca = FourierCurve::new(&a.nodes);
    let cb = FourierCurve::new(&b.nodes);
    let one = |from: &PatchBoundary, curve: &FourierCurve, to: &PatchBoundary| {
        from.nodes.iter().map(|&p| curve.distance_to(p, &to.nodes)).fold(0.0, f64::max)
    };
    one(a, &cb, b).max(one(b, &ca, a))
}

/// max over snapshots and layers of the Hausdorff distance between the boundary
/// at time t and the initial boundary rotated by ωt, divided by the equivalent
/// radius √(area/π) of the initial first-layer patch.
pub fn rigid_rotation_residual(traj: &[EvolutionState], omega: f64) -> Result<f64> {
    let first = traj.first().ok_or_else(|| DynamicsError::InvalidArgument("empty trajectory".into()))?;
    let scale = (patch_area(&first.boundaries[0]) / PI).sqrt();
    let t0 = first.time;
    let mut worst: f64 = 0.0;
    for s in traj {
        for k in 0..2 {
            let target = first.boundaries[k].rotated(omega * (s.time - t0));
            worst = worst.max(hausdorff_distance(&s.boundaries[k], &target));
        }
    }
    Ok(worst / scale)
}

/// Summary numbers written next to an exported trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryDiagnostics {
    /// |area(t_end) − area(0)|/area(0) per layer.
    pub area_drift: [f64; 2],
    pub min_boundary_distance: f64,
    pub max_layer_mismatch: f64,
    pub hausdorff_drift: f64,
    pub rigid_rotation_residual: Option<f64>,
}

pub fn diagnostics(traj: &[EvolutionState], rotation: Option<f64>) -> Result<TrajectoryDiagnostics> {
    let (first, last) = match (traj.first(), traj.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(DynamicsError::InvalidArgument("empty trajectory".into())),
    };
    let area_drift = [0, 1].map(|k| {
        let a0 = patch_area(&first.boundaries[k]);
        (patch_area(&last.boundaries[k]) - a0).abs() / a0
    });
    let scale = (patch_area(&first.boundaries[0]) / PI).sqrt();
    let hausdorff_drift = (0..2).map(|k| hausdorff_distance(&first.boundaries[k], &last.boundaries[k])).fold(0.0, f64::max) / scale;
    Ok(TrajectoryDiagnostics {
        area_drift,
        min_boundary_distance: traj.iter().map(|s| s.min_boundary_distance()).fold(f64::INFINITY, f64::min),
        max_layer_mismatch: traj.iter().map(|s| s.layer_mismatch()).fold(0.0, f64::max),
        hausdorff_drift,
        rigid_rotation_residual: rotation.map(|w| rigid_rotation_residual(traj, w)).transpose()?,
    })
}
