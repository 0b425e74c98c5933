//! Point evaluation of solutions through the flow-integral formula
//!
//! ```text
//! u(y) = ∫_{-∞}^0 E(t, y)^{-1} v(Φ_t(y)) dt,   ∂_t E = −A(Φ_t(y)) E,  E(0) = id,
//! ```
//!
//! valid when `A(0)` has spectrum in the right half-plane. Otherwise the
//! solution is split as a jet `u_head` of order `N` plus the integral applied
//! to the remainder `v − (D_X + A)u_head`, which vanishes to order `N + 1`
//! and therefore decays fast enough along the backward flow.
//!
//! The flow `Φ_t(y)`, the inverse transition matrix `F = E^{-1}` and the
//! accumulated integral are integrated as one ODE state in reversed time
//! `τ = −t`:
//!
//! ```text
//! dy/dτ = −X(y),   dF/dτ = −F·A(y),   dI/dτ = F·v(y).
//! ```

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linalg;
use crate::ode::{Dopri5, OdeSystem, StepConfig};
use crate::operator::apply_via_jets;
use crate::problem::ProblemData;
use crate::scalar::Scalar;
use crate::spectral::{linearization_spectrum, source_rate};
use crate::taylor::solve_to_order;

pub type VectorFn = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Pointwise access to `X`, `A` and `v` in the chart centered at the source.
///
/// The closures may be called concurrently from several threads.
#[derive(Clone)]
pub struct FieldSampler {
    n: usize,
    m: usize,
    x: VectorFn,
    a: MatrixFn,
    v: VectorFn,
    region_radius: Option<f64>,
    jets: Option<ProblemData<f64>>,
    polynomial: bool,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSampler")
            .field("n", &self.n)
            .field("m", &self.m)
            .field("region_radius", &self.region_radius)
            .field("polynomial", &self.polynomial)
            .finish()
    }
}

impl FieldSampler {
    pub fn new(n: usize, m: usize, x: VectorFn, a: MatrixFn, v: VectorFn) -> Self {
        FieldSampler {
            n,
            m,
            x,
            a,
            v,
            region_radius: None,
            jets: None,
            polynomial: false,
        }
    }

    /// Samples the jets of `p` as polynomials.
    pub fn from_problem(p: &ProblemData<f64>) -> Self {
        let (px, pa, pv) = (p.x().clone(), p.a().clone(), p.v().clone());
        let n = p.n();
        FieldSampler {
            n,
            m: p.m(),
            x: Arc::new(move |y| DVector::from_vec(px.evaluate(y).expect("point dimension"))),
            a: Arc::new(move |y| pa.evaluate_matrix(y).expect("point dimension")),
            v: Arc::new(move |y| pv.evaluate_vector(y).expect("point dimension")),
            region_radius: None,
            jets: Some(p.clone()),
            polynomial: true,
        }
    }

    /// Declares the region as the closed ball of radius `r` about the source;
    /// trajectories leaving it are reported.
    pub fn with_region_radius(mut self, r: f64) -> Self {
        self.region_radius = Some(r);
        self
    }

    /// Attaches jets that Taylor-match the closures at the source, after a
    /// finite-difference check of the linearization (tolerance `tol`).
    pub fn with_jets(mut self, p: ProblemData<f64>, tol: f64) -> Result<Self> {
        if p.n() != self.n || p.m() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.n(),
                context: "jets attached to a sampler",
            });
        }
        self.jets = Some(p);
        self.check_consistency(tol)?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn jets(&self) -> Option<&ProblemData<f64>> {
        self.jets.as_ref()
    }

    pub fn x_at(&self, y: &[f64]) -> DVector<f64> {
        (self.x)(y)
    }

    pub fn a_at(&self, y: &[f64]) -> DMatrix<f64> {
        (self.a)(y)
    }

    pub fn v_at(&self, y: &[f64]) -> DVector<f64> {
        (self.v)(y)
    }

    /// Fails unless `|X(0)| ≤ tol`.
    pub fn check_source(&self, tol: f64) -> Result<()> {
        let x0 = self.x_at(&vec![0.0; self.n]).norm();
        if x0 > tol {
            return Err(Error::InvalidInput(format!(
                "the vector field does not vanish at the source: |X(0)| = {x0:e}"
            )));
        }
        Ok(())
    }

    /// Central-difference Jacobian of `X` at the source.
    pub fn fd_linearization(&self, h: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut jac = DMatrix::zeros(n, n);
        let mut p = vec![0.0; n];
        for j in 0..n {
            p[j] = h;
            let fp = self.x_at(&p);
            p[j] = -h;
            let fm = self.x_at(&p);
            p[j] = 0.0;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        jac
    }

    /// Compares the finite-difference linearization with the attached jets;
    /// returns the max deviation.
    pub fn check_consistency(&self, tol: f64) -> Result<f64> {
        let Some(p) = &self.jets else {
            return Ok(0.0);
        };
        self.check_source(tol)?;
        let dev = (self.fd_linearization(1e-5) - p.x().linearization()).amax();
        if dev > tol {
            return Err(Error::InvalidInput(format!(
                "sampled field and its jet disagree: linearization differs by {dev:e}"
            )));
        }
        Ok(dev)
    }
}

/// Point on a backward trajectory: `y = Φ_t(y_0)`, `finv = E(t, y_0)^{-1}`,
/// `integral = ∫_t^0 E(s, y_0)^{-1} v(Φ_s(y_0)) ds`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub y: Vec<f64>,
    pub finv: DMatrix<f64>,
    pub integral: DVector<f64>,
}

type Integrand<'a> = &'a (dyn Fn(&[f64]) -> DVector<f64> + Sync);

struct FlowOde<'a> {
    s: &'a FieldSampler,
    shift: f64,
    integrand: Option<Integrand<'a>>,
}

impl FlowOde<'_> {
    fn state_len(&self) -> usize {
        self.s.n + self.s.m * self.s.m + self.s.m
    }

    fn unpack(&self, tau: f64, z: &[f64]) -> FlowState {
        let (n, m) = (self.s.n, self.s.m);
        FlowState {
            t: -tau,
            y: z[..n].to_vec(),
            finv: DMatrix::from_row_slice(m, m, &z[n..n + m * m]),
            integral: DVector::from_column_slice(&z[n + m * m..]),
        }
    }

    fn initial(&self, y: &[f64]) -> Vec<f64> {
        let (n, m) = (self.s.n, self.s.m);
        let mut z = vec![0.0; self.state_len()];
        z[..n].copy_from_slice(y);
        for i in 0..m {
            z[n + i * m + i] = 1.0;
        }
        z
    }
}

impl OdeSystem for FlowOde<'_> {
    fn dim(&self) -> usize {
        self.state_len()
    }

    fn rhs(&self, _tau: f64, z: &[f64], dz: &mut [f64]) {
        let (n, m) = (self.s.n, self.s.m);
        let y = &z[..n];
        let x = self.s.x_at(y);
        for i in 0..n {
            dz[i] = -x[i];
        }
        let mut a = self.s.a_at(y);
        for i in 0..m {
            a[(i, i)] -= self.shift;
        }
        let f = &z[n..n + m * m];
        for r in 0..m {
            for c in 0..m {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += f[r * m + k] * a[(k, c)];
                }
                dz[n + r * m + c] = -acc;
            }
        }
        let off = n + m * m;
        match self.integrand {
            Some(g) => {
                let v = g(y);
                for r in 0..m {
                    let mut acc = 0.0;
                    for k in 0..m {
                        acc += f[r * m + k] * v[k];
                    }
                    dz[off + r] = acc;
                }
            }
            None => dz[off..].iter_mut().for_each(|d| *d = 0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitOrder {
    /// Smallest `N` with `min Re spec A(0) + N ν ≥ ν/2`.
    Auto,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Integration stops once the integrand norm is below this.
    pub tail_tol: f64,
    /// Largest `|t|` integrated.
    pub max_horizon: f64,
    /// Smallest `|t|` at which the tail rule may stop.
    pub min_horizon: f64,
    /// Accepted steps used for the decay-rate fit of the stop rule.
    pub window: usize,
    pub split_order: SplitOrder,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            tail_tol: 1e-12,
            max_horizon: 200.0,
            min_horizon: 1.0,
            window: 8,
            split_order: SplitOrder::Auto,
        }
    }
}

impl FlowConfig {
    fn step_config(&self) -> StepConfig {
        StepConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            ..StepConfig::default()
        }
    }
}

fn check_region(s: &FieldSampler, tau: f64, y: &[f64]) -> Result<()> {
    let r = y.iter().map(|c| c * c).sum::<f64>().sqrt();
    let outside = match s.region_radius {
        Some(rad) => r > rad,
        None => false,
    };
    if outside || !r.is_finite() {
        return Err(Error::RegionExit {
            t: -tau,
            point: y.to_vec(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FlowTrajectory {
    /// States at every accepted step, starting with `t = 0`.
    pub steps: Vec<FlowState>,
    /// States at the requested sample times (dense output).
    pub samples: Vec<FlowState>,
}

/// Integrates `(Φ_t(y), E(t,y)^{-1}, ∫_t^0 E^{-1} v∘Φ)` from `t = 0` down to
/// `t_end ≤ 0`. `sample_times` must lie in `[t_end, 0]`.
pub fn integrate_flow(
    s: &FieldSampler,
    y: &[f64],
    t_end: f64,
    sample_times: &[f64],
    cfg: &StepConfig,
) -> Result<FlowTrajectory> {
    if t_end > 0.0 {
        return Err(Error::InvalidInput("flow end time must be non-positive".into()));
    }
    if y.len() != s.n {
        return Err(Error::DimensionMismatch {
            expected: s.n,
            found: y.len(),
            context: "flow starting point",
        });
    }
    let v = |p: &[f64]| s.v_at(p);
    let ode = FlowOde {
        s,
        shift: 0.0,
        integrand: Some(&v),
    };
    check_region(s, 0.0, y)?;
    let mut order: Vec<(usize, f64)> = sample_times.iter().copied().enumerate().collect();
    for &(_, ts) in &order {
        if ts > 0.0 || ts < t_end {
            return Err(Error::InvalidInput(format!(
                "sample time {ts} outside [{t_end}, 0]"
            )));
        }
    }
    order.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut samples: Vec<Option<FlowState>> = vec![None; sample_times.len()];
    let mut next = 0;
    let z0 = ode.initial(y);
    let mut stepper = Dopri5::new(&ode, 0.0, &z0, cfg.clone());
    let mut steps = vec![ode.unpack(0.0, &z0)];
    let tau_end = -t_end;
    while next < order.len() && order[next].1 == 0.0 {
        samples[order[next].0] = Some(ode.unpack(0.0, &z0));
        next += 1;
    }
    let mut buf = vec![0.0; z0.len()];
    while stepper.t() < tau_end {
        let tau = stepper.step(tau_end)?;
        check_region(s, tau, &stepper.y()[..s.n])?;
        while next < order.len() && -order[next].1 <= tau {
            let ts = -order[next].1;
            stepper.dense(ts, &mut buf);
            samples[order[next].0] = Some(ode.unpack(ts, &buf));
            next += 1;
        }
        steps.push(ode.unpack(tau, stepper.y()));
    }
    Ok(FlowTrajectory {
        steps,
        samples: samples.into_iter().map(|x| x.expect("all samples visited")).collect(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum SolutionCase {
    Direct,
    Split { order: usize },
}

#[derive(Clone, Debug)]
pub struct PointSolution {
    pub u: DVector<f64>,
    /// Estimate of the neglected integral beyond the stopping time.
    pub tail_estimate: f64,
    /// `|t|` at which integration stopped.
    pub horizon: f64,
    /// Decay rate fitted over the final window.
    pub fitted_rate: f64,
    pub steps: usize,
    pub case: SolutionCase,
}

struct TailResult {
    integral: DVector<f64>,
    tail_estimate: f64,
    horizon: f64,
    rate: f64,
    steps: usize,
}

fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, l) in pts {
        sxy += (t - mt) * (l - ml);
        sxx += (t - mt) * (t - mt);
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn integrate_tail(
    s: &FieldSampler,
    shift: f64,
    integrand: Integrand<'_>,
    y: &[f64],
    cfg: &FlowConfig,
) -> Result<TailResult> {
    let ode = FlowOde {
        s,
        shift,
        integrand: Some(integrand),
    };
    check_region(s, 0.0, y)?;
    let z0 = ode.initial(y);
    let mut stepper = Dopri5::new(&ode, 0.0, &z0, cfg.step_config());
    let (n, m) = (s.n, s.m);
    let off = n + m * m;
    let mut window: std::collections::VecDeque<(f64, f64)> =
        std::collections::VecDeque::with_capacity(cfg.window + 1);
    let mut rate = f64::NAN;
    loop {
        let tau = stepper.step(cfg.max_horizon)?;
        check_region(s, tau, &stepper.y()[..n])?;
        let g = stepper.dy()[off..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let done_at_horizon = tau >= cfg.max_horizon;
        if g == 0.0 {
            if tau >= cfg.min_horizon || done_at_horizon {
                return Ok(TailResult {
                    integral: DVector::from_column_slice(&stepper.y()[off..]),
                    tail_estimate: 0.0,
                    horizon: tau,
                    rate: f64::INFINITY,
                    steps: stepper.accepted_steps(),
                });
            }
            continue;
        }
        window.push_back((tau, g.ln()));
        if window.len() > cfg.window {
            window.pop_front();
        }
        if window.len() >= cfg.window.min(3).max(2) {
            let pts: Vec<(f64, f64)> = window.iter().copied().collect();
            rate = -fit_slope(&pts);
        }
        let full = window.len() == cfg.window;
        if full && tau >= cfg.min_horizon && g <= cfg.tail_tol && rate > 0.0 {
            return Ok(TailResult {
                integral: DVector::from_column_slice(&stepper.y()[off..]),
                tail_estimate: g / rate,
                horizon: tau,
                rate,
                steps: stepper.accepted_steps(),
            });
        }
        if done_at_horizon {
            if rate > 0.0 {
                return Ok(TailResult {
                    integral: DVector::from_column_slice(&stepper.y()[off..]),
                    tail_estimate: g / rate,
                    horizon: tau,
                    rate,
                    steps: stepper.accepted_steps(),
                });
            }
            return Err(Error::NonDecayingTail { rate });
        }
    }
}

/// Prepared evaluator: decides between the direct formula and the
/// split formula once, then evaluates at many points.
pub struct SolutionEvaluator<'a> {
    s: &'a FieldSampler,
    lambda: f64,
    cfg: FlowConfig,
    case: SolutionCase,
    head: Option<Jet<f64>>,
    head_grad: Vec<Jet<f64>>,
    remainder: Option<Jet<f64>>,
}

impl<'a> SolutionEvaluator<'a> {
    pub fn new(
        s: &'a FieldSampler,
        p: &ProblemData<f64>,
        cfg: &FlowConfig,
        solver: &SolverConfig,
    ) -> Result<Self> {
        if p.n() != s.n || p.m() != s.m {
            return Err(Error::DimensionMismatch {
                expected: s.n,
                found: p.n(),
                context: "problem and sampler dimensions",
            });
        }
        s.check_source(1e-10)?;
        let lambda = p.lambda();
        let mut a0 = s.a_at(&vec![0.0; s.n]);
        for i in 0..s.m {
            a0[(i, i)] -= lambda;
        }
        let a_min = linalg::eigenvalues(&a0)?
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min);
        let nu = source_rate(&linearization_spectrum(p.x())?)?;
        let forced = matches!(cfg.split_order, SplitOrder::Fixed(_));
        if a_min > 0.0 && !forced {
            return Ok(SolutionEvaluator {
                s,
                lambda,
                cfg: cfg.clone(),
                case: SolutionCase::Direct,
                head: None,
                head_grad: Vec::new(),
                remainder: None,
            });
        }
        let order = match cfg.split_order {
            SplitOrder::Fixed(k) => {
                if a_min + k as f64 * nu <= 0.0 {
                    return Err(Error::InvalidInput(format!(
                        "split order {k} too small: min Re spec A(0) + N ν = {} ≤ 0",
                        a_min + k as f64 * nu
                    )));
                }
                k.max(1)
            }
            SplitOrder::Auto => ((0.5 * nu - a_min) / nu).ceil().max(1.0) as usize,
        };
        let sol = solve_to_order(p, order, solver)?;
        if !sol.kernel.is_empty() {
            return Err(Error::ResonantKernel {
                dim: sol.kernel.len(),
            });
        }
        let head = match sol.particular {
            Some(u) => u,
            None => {
                let largest = sol
                    .obstructions
                    .iter()
                    .map(|o| o.abs())
                    .fold(0.0, f64::max);
                return Err(Error::Unsolvable {
                    count: sol.obstructions.len(),
                    largest,
                });
            }
        };
        let head = head.project(order)?;
        let head_grad = (0..s.n)
            .map(|i| head.derivative(i))
            .collect::<Result<Vec<_>>>()?;
        let remainder = match &s.jets {
            Some(q) => {
                let r = remainder_jet(&q.with_lambda(lambda), &head)?;
                let low = (0..=order)
                    .flat_map(|d| r.slice_coeffs(d).iter())
                    .fold(0.0f64, |acc, c| acc.max(c.abs()));
                let scale = q.v().max_abs().max(1.0);
                if low > 1e-8 * scale {
                    return Err(Error::InvalidInput(format!(
                        "remainder does not vanish to order {}: low-degree part {low:e}",
                        order + 1
                    )));
                }
                let mut r = r;
                for d in 0..=order {
                    r.slice_coeffs_mut(d).iter_mut().for_each(|c| *c = 0.0);
                }
                s.polynomial.then_some(r)
            }
            None => None,
        };
        Ok(SolutionEvaluator {
            s,
            lambda,
            cfg: cfg.clone(),
            case: SolutionCase::Split { order },
            head: Some(head),
            head_grad,
            remainder,
        })
    }

    pub fn case(&self) -> &SolutionCase {
        &self.case
    }

    /// The jet part of the split solution, if any.
    pub fn head(&self) -> Option<&Jet<f64>> {
        self.head.as_ref()
    }

    /// `v − (D_X + A − λ)u_head` at a point.
    pub fn remainder_at(&self, y: &[f64]) -> DVector<f64> {
        if let Some(r) = &self.remainder {
            return r.evaluate_vector(y).expect("point dimension");
        }
        let Some(head) = &self.head else {
            return self.s.v_at(y);
        };
        let u = head.evaluate_vector(y).expect("point dimension");
        let x = self.s.x_at(y);
        let mut a = self.s.a_at(y);
        for i in 0..self.s.m {
            a[(i, i)] -= self.lambda;
        }
        let mut out = self.s.v_at(y) - a * &u;
        for (i, g) in self.head_grad.iter().enumerate() {
            out -= g.evaluate_vector(y).expect("point dimension") * x[i];
        }
        out
    }

    pub fn eval(&self, y: &[f64]) -> Result<PointSolution> {
        if y.len() != self.s.n {
            return Err(Error::DimensionMismatch {
                expected: self.s.n,
                found: y.len(),
                context: "evaluation point",
            });
        }
        let direct = |p: &[f64]| self.s.v_at(p);
        let split = |p: &[f64]| self.remainder_at(p);
        let integrand: Integrand<'_> = match self.case {
            SolutionCase::Direct => &direct,
            SolutionCase::Split { .. } => &split,
        };
        let tail = integrate_tail(self.s, self.lambda, integrand, y, &self.cfg)?;
        let mut u = tail.integral;
        if let Some(h) = &self.head {
            u += h.evaluate_vector(y)?;
        }
        Ok(PointSolution {
            u,
            tail_estimate: tail.tail_estimate,
            horizon: tail.horizon,
            fitted_rate: tail.rate,
            steps: tail.steps,
            case: self.case.clone(),
        })
    }

    /// Evaluates at every point in parallel; failures are reported per point.
    pub fn eval_grid(&self, points: &[Vec<f64>]) -> Vec<Result<PointSolution>> {
        points.par_iter().map(|y| self.eval(y)).collect()
    }
}

/// `v − (D_X + A − λ)u` without truncation: every jet is raised to the
/// order holding the full polynomial products.
fn remainder_jet(p: &ProblemData<f64>, u: &Jet<f64>) -> Result<Jet<f64>> {
    let k = p.order() + u.order();
    let q = p.with_order(k)?;
    let u = u.to_order(k);
    let lu = apply_via_jets(&q, &u)?.sub(&u.scale(q.lambda()))?;
    q.v().sub(&lu)
}

/// `u(y)` by the flow-integral formula (split when `A(0) − λ` is not
/// positive).
pub fn evaluate_solution(
    s: &FieldSampler,
    p: &ProblemData<f64>,
    y: &[f64],
    cfg: &FlowConfig,
) -> Result<PointSolution> {
    SolutionEvaluator::new(s, p, cfg, &SolverConfig::default())?.eval(y)
}

/// Quantity whose exponential decay along the backward flow is measured.
#[derive(Clone)]
pub enum DecayQuantity {
    /// `|Φ_t(y)|`
    Flow,
    /// `‖E(t, y)^{-1}‖₂`
    Transition,
    Custom(Arc<dyn Fn(&FlowState) -> f64 + Send + Sync>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayConfig {
    pub horizon: f64,
    /// The fit uses `|t|` in `[window_start · horizon, horizon]`.
    pub window_start: f64,
    pub samples: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Values below this count as underflow.
    pub floor: f64,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig {
            horizon: 30.0,
            window_start: 0.5,
            samples: 200,
            rel_tol: 1e-10,
            abs_tol: 1e-200,
            floor: 1e-250,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DecayFit {
    /// `r` in `|q(t)| ≈ C e^{r t}` for `t → −∞` (positive means decay).
    pub rate: f64,
    pub points: usize,
    pub window: (f64, f64),
}

/// Least-squares slope of `log q(t)` against `t` over the tail window.
pub fn empirical_decay_rate(
    s: &FieldSampler,
    y: &[f64],
    quantity: &DecayQuantity,
    cfg: &DecayConfig,
) -> Result<DecayFit> {
    let ode = FlowOde {
        s,
        shift: 0.0,
        integrand: None,
    };
    let times: Vec<f64> = (0..=cfg.samples)
        .map(|i| -cfg.horizon * i as f64 / cfg.samples as f64)
        .collect();
    let step_cfg = StepConfig {
        rel_tol: cfg.rel_tol,
        abs_tol: cfg.abs_tol,
        ..StepConfig::default()
    };
    let traj = integrate_flow_with(&ode, y, -cfg.horizon, &times, &step_cfg)?;
    let t0 = -cfg.window_start * cfg.horizon;
    let mut pts = Vec::new();
    for st in &traj {
        let q = match quantity {
            DecayQuantity::Flow => st.y.iter().map(|c| c * c).sum::<f64>().sqrt(),
            DecayQuantity::Transition => linalg::spectral_norm(&st.finv),
            DecayQuantity::Custom(f) => f(st).abs(),
        };
        if !(q > cfg.floor) {
            if st.t > t0 {
                return Err(Error::Underflow { t: st.t });
            }
            break;
        }
        if st.t <= t0 {
            pts.push((st.t, q.ln()));
        }
    }
    if pts.len() < 5 {
        let t = pts.last().map_or(t0, |p| p.0);
        return Err(Error::Underflow { t });
    }
    let window = (pts.last().expect("nonempty").0, pts[0].0);
    Ok(DecayFit {
        rate: fit_slope(&pts),
        points: pts.len(),
        window,
    })
}

fn integrate_flow_with(
    ode: &FlowOde<'_>,
    y: &[f64],
    t_end: f64,
    times: &[f64],
    cfg: &StepConfig,
) -> Result<Vec<FlowState>> {
    let z0 = ode.initial(y);
    let mut stepper = Dopri5::new(ode, 0.0, &z0, cfg.clone());
    let mut out = vec![ode.unpack(0.0, &z0)];
    let mut buf = vec![0.0; z0.len()];
    let mut next = 1;
    while stepper.t() < -t_end {
        let tau = stepper.step(-t_end)?;
        check_region(ode.s, tau, &stepper.y()[..ode.s.n])?;
        while next < times.len() && -times[next] <= tau {
            stepper.dense(-times[next], &mut buf);
            out.push(ode.unpack(-times[next], &buf));
            next += 1;
        }
    }
    Ok(out)
}

/// Evaluates `u` at many points in parallel.
pub fn evaluate_grid(
    s: &FieldSampler,
    p: &ProblemData<f64>,
    points: &[Vec<f64>],
    cfg: &FlowConfig,
    solver: &SolverConfig,
) -> Result<Vec<Result<PointSolution>>> {
    let ev = SolutionEvaluator::new(s, p, cfg, solver)?;
    Ok(ev.eval_grid(points))
}

/// Flow-solver entry for complex problems with a real vector field: solves
/// the stacked real system and recombines.
pub fn realify_problem<T: Scalar>(p: &ProblemData<T>) -> Result<ProblemData<f64>> {
    p.to_complex().realify()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::{MultiIndex, ValueShape, VectorFieldJet};

    fn one_d(a: f64, k: u32, order: usize) -> ProblemData<f64> {
        ProblemData::new(
            VectorFieldJet::euler(1, order),
            Jet::constant_matrix(1, order, &DMatrix::from_element(1, 1, a)),
            Jet::from_terms(
                1,
                order,
                ValueShape::Vector(1),
                [(MultiIndex::new(vec![k]), vec![1.0])],
            )
            .unwrap(),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn scalar_closed_forms_along_the_flow() {
        let p = one_d(0.7, 2, 3);
        let s = FieldSampler::from_problem(&p);
        let ts = [-0.5, -1.0, -3.0];
        let tr = integrate_flow(&s, &[0.8], -3.0, &ts, &StepConfig::default()).unwrap();
        for (st, &t) in tr.samples.iter().zip(&ts) {
            assert!((st.y[0] - 0.8 * t.exp()).abs() <= 1e-8 * 0.8 * t.exp());
            let f = (0.7 * t).exp();
            assert!((st.finv[(0, 0)] - f).abs() <= 1e-8 * f);
        }
    }

    #[test]
    fn direct_formula_one_dimensional() {
        let p = one_d(1.0, 2, 3);
        let s = FieldSampler::from_problem(&p);
        for y in [0.1, 0.5, 1.0] {
            let sol = evaluate_solution(&s, &p, &[y], &FlowConfig::default()).unwrap();
            let want = y * y / 3.0;
            assert!(((sol.u[0] - want) / want).abs() < 1e-7, "{y}: {}", sol.u[0]);
            assert_eq!(sol.case, SolutionCase::Direct);
        }
    }

    #[test]
    fn split_formula_negative_potential() {
        // y u' − 1.5 u = y^3 + y^5: u = y^3/1.5 + y^5/3.5
        let mut p = one_d(-1.5, 3, 5);
        let v = Jet::from_terms(
            1,
            5,
            ValueShape::Vector(1),
            [
                (MultiIndex::new(vec![3]), vec![1.0]),
                (MultiIndex::new(vec![5]), vec![1.0]),
            ],
        )
        .unwrap();
        p = p.with_v(v).unwrap();
        let s = FieldSampler::from_problem(&p);
        for y in [0.1, 0.4] {
            let sol = evaluate_solution(&s, &p, &[y], &FlowConfig::default()).unwrap();
            let want = y.powi(3) / 1.5 + y.powi(5) / 3.5;
            assert!(((sol.u[0] - want) / want).abs() < 1e-7, "{y}: {} vs {want}", sol.u[0]);
            assert!(matches!(sol.case, SolutionCase::Split { .. }));
        }
    }

    #[test]
    fn euler_flow_rate() {
        let p = one_d(1.0, 1, 2);
        let s = FieldSampler::from_problem(&p);
        let fit = empirical_decay_rate(&s, &[0.3], &DecayQuantity::Flow, &DecayConfig::default())
            .unwrap();
        assert!((fit.rate - 1.0).abs() < 1e-6);
    }
}
