//! Growth bounds for `Ė = A(t)E`, `E(0) = id`, on `t ≤ 0`.
//!
//! With `ℓ = min Re spec A₀` and
//! `M(A₀, ε) = sup_{t≤0} ‖exp(t(A₀ − ℓ + ε))‖` (operator 2-norm throughout;
//! all constants depend on that choice):
//!
//! * perturbation bound: `‖E(t)‖ ≤ M exp(t(ℓ − ε − M sup‖A − A₀‖))`;
//! * two-regime bound: if `‖A(t) − A₀‖ < (ε/2)/M(A₀, ε/2)` for `t ≤ t₀`,
//!   then `‖E(t)‖ < C e^{t(ℓ−ε)}` with
//!   `C = M(A₀,ε/2) M(A₀,ε) exp(−t₀ M(A₀,ε) sup‖A − A₀‖)`;
//! * the same bound applied to `F = E^{-1}` (which solves `Ḟ = −FA`) gives
//!   the lower bound `|E(t)w| ≥ C'^{-1} e^{t(max Re spec A₀ + ε)} |w|`.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::{Dopri5, StepConfig};

/// `min Re spec A₀`.
pub fn ell(a0: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::eigenvalues(a0)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min))
}

const GRID: usize = 512;
const REFINE: usize = 3;

/// `M(A₀, ε)`: grid search over a log-spaced grid on `[−T*, 0]` followed by
/// golden-section refinement around the best candidates.
pub fn compute_m(a0: &DMatrix<f64>, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if a0.nrows() != a0.ncols() || a0.is_empty() {
        return Err(Error::InvalidInput("A0 must be a non-empty square matrix".into()));
    }
    let l = ell(a0)?;
    let mut b = a0.clone();
    for i in 0..b.nrows() {
        b[(i, i)] += eps - l;
    }
    // g(s) = ‖exp(−sB)‖ for s = −t ≥ 0
    let g = |s: f64| linalg::spectral_norm(&linalg::expm(&(&b * -s)));

    let mut t_star = 1.0 / eps.min(1.0);
    while !(g(t_star) < 0.5 && g(2.0 * t_star) < 0.5) {
        t_star *= 2.0;
        if t_star > 1e8 {
            return Err(Error::InvalidInput("M(A0, eps) search did not terminate".into()));
        }
    }
    let t_star = 2.0 * t_star;
    let lo = t_star * 1e-8;
    let mut grid: Vec<f64> = vec![0.0];
    let ratio = (t_star / lo).ln() / (GRID - 1) as f64;
    grid.extend((0..GRID).map(|i| lo * (ratio * i as f64).exp()));
    let vals: Vec<f64> = grid.iter().map(|&s| g(s)).collect();

    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]));
    let mut best = vals[order[0]];
    for &i in order.iter().take(REFINE) {
        let a = grid[i.saturating_sub(1)];
        let c = grid[(i + 1).min(grid.len() - 1)];
        best = best.max(golden_max(&g, a, c));
    }
    Ok(best.max(1.0))
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if (b - a).abs() <= 1e-12 * (1.0 + b.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd).max(f(a)).max(f(b))
}

/// Continuous path `t ↦ A(t)` on `(−∞, 0]`, sampled on `[−horizon, 0]`.
#[derive(Clone)]
pub struct MatrixPath {
    f: Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>,
    pub horizon: f64,
    pub samples: usize,
}

impl std::fmt::Debug for MatrixPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MatrixPath")
            .field("horizon", &self.horizon)
            .field("samples", &self.samples)
            .finish()
    }
}

impl MatrixPath {
    pub fn new(f: impl Fn(f64) -> DMatrix<f64> + Send + Sync + 'static, horizon: f64) -> Self {
        MatrixPath {
            f: Arc::new(f),
            horizon,
            samples: 2000,
        }
    }

    pub fn constant(a0: DMatrix<f64>, horizon: f64) -> Self {
        MatrixPath::new(move |_| a0.clone(), horizon)
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        (self.f)(t)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.samples.max(2);
        (0..=k).map(move |i| -self.horizon * i as f64 / k as f64)
    }

    /// `max ‖A(t) − A₀‖` over the samples with `t ≤ t_max`, with its location.
    pub fn deviation(&self, a0: &DMatrix<f64>, t_max: f64) -> (f64, f64) {
        self.times()
            .filter(|&t| t <= t_max)
            .map(|t| (linalg::spectral_norm(&(self.at(t) - a0)), t))
            .fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc })
    }

    /// `-Aᵀ`, the path governing `(E^{-1})ᵀ`.
    fn inverse_transpose(&self) -> MatrixPath {
        let f = Arc::clone(&self.f);
        MatrixPath {
            f: Arc::new(move |t| -f(t).transpose()),
            horizon: self.horizon,
            samples: self.samples,
        }
    }

    /// `E(t)` at the requested times (each in `[−horizon, 0]`).
    pub fn transition(&self, times: &[f64], cfg: &StepConfig) -> Result<Vec<DMatrix<f64>>> {
        let a = self.at(0.0);
        let m = a.nrows();
        // τ = −t: dE/dτ = −A(−τ)E
        let sys = (m * m, |tau: f64, z: &[f64], dz: &mut [f64]| {
            let a = self.at(-tau);
            let e = DMatrix::from_column_slice(m, m, z);
            let d = -(a * e);
            dz.copy_from_slice(d.as_slice());
        });
        let id = DMatrix::<f64>::identity(m, m);
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[j].total_cmp(&times[i]));
        let mut out = vec![DMatrix::zeros(m, m); times.len()];
        let mut stepper = Dopri5::new(&sys, 0.0, id.as_slice(), cfg.clone());
        let mut buf = vec![0.0; m * m];
        for i in order {
            let tau = -times[i];
            if tau < 0.0 || tau > self.horizon * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!(
                    "sample time {} outside [-{}, 0]",
                    times[i], self.horizon
                )));
            }
            while stepper.t() < tau {
                stepper.step(self.horizon.max(tau))?;
            }
            if tau == 0.0 {
                out[i] = id.clone();
            } else {
                stepper.dense(tau, &mut buf);
                out[i] = DMatrix::from_column_slice(m, m, &buf);
            }
        }
        Ok(out)
    }
}

/// `t ↦ M exp(t(ℓ − ε − M δ))` with `δ = sup‖A(t) − A₀‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationBound {
    pub ell: f64,
    pub eps: f64,
    pub m: f64,
    pub deviation: f64,
    pub rate: f64,
}

impl PerturbationBound {
    pub fn eval(&self, t: f64) -> f64 {
        self.m * (t * self.rate).exp()
    }
}

pub fn perturbation_bound(
    a0: &DMatrix<f64>,
    path: &MatrixPath,
    eps: f64,
) -> Result<PerturbationBound> {
    let m = compute_m(a0, eps)?;
    let l = ell(a0)?;
    let (deviation, _) = path.deviation(a0, 0.0);
    if !deviation.is_finite() {
        return Err(Error::InvalidInput("perturbation is not bounded on the samples".into()));
    }
    Ok(PerturbationBound {
        ell: l,
        eps,
        m,
        deviation,
        rate: l - eps - m * deviation,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateSample {
    pub t: f64,
    pub norm: f64,
    pub bound: f64,
    /// Smallest singular value of `E(t)`.
    pub min_gain: f64,
    pub lower_bound: Option<f64>,
}

/// Lower bound on `|E(t)w|/|w|`, from the two-regime bound applied to the
/// inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct InverseEstimate {
    /// `max Re spec A₀ = −ℓ(−A₀)`
    pub top: f64,
    pub c: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub ell: f64,
    pub eps: f64,
    pub m_val: f64,
    pub m_half: f64,
    pub t0: f64,
    pub c: f64,
    pub deviation: f64,
    pub samples: Vec<EstimateSample>,
    pub violated: bool,
    /// `None` when the smallness hypothesis fails for the inverse.
    pub inverse: Option<InverseEstimate>,
}

/// Relative slack in the violation test; at `t = 0` the bound is attained
/// when `C = 1`.
pub const VIOLATION_SLACK: f64 = 1e-9;

fn two_regime_constant(
    a0: &DMatrix<f64>,
    path: &MatrixPath,
    eps: f64,
    t0: f64,
) -> Result<(f64, f64, f64, f64)> {
    let m_half = compute_m(a0, eps / 2.0)?;
    let m_val = compute_m(a0, eps)?;
    let limit = (eps / 2.0) / m_half;
    let (late, at) = path.deviation(a0, t0);
    if late >= limit {
        return Err(Error::HypothesisViolated {
            t: at,
            deviation: late,
            limit,
        });
    }
    let (dev, _) = path.deviation(a0, 0.0);
    let c = m_half * m_val * (-t0 * m_val * dev).exp();
    Ok((c, m_val, m_half, dev))
}

/// Two-regime bound with sampled verification at `n_samples` times in
/// `[−horizon, 0]`.
pub fn two_regime_bound(
    a0: &DMatrix<f64>,
    path: &MatrixPath,
    eps: f64,
    t0: f64,
    n_samples: usize,
) -> Result<EstimateReport> {
    if t0 > 0.0 {
        return Err(Error::InvalidInput(format!("t0 must be non-positive, got {t0}")));
    }
    let (c, m_val, m_half, deviation) = two_regime_constant(a0, path, eps, t0)?;
    let l = ell(a0)?;
    let inv_a0 = -a0.transpose();
    let inverse = match two_regime_constant(&inv_a0, &path.inverse_transpose(), eps, t0) {
        Ok((ci, ..)) => Some(InverseEstimate {
            top: -ell(&inv_a0)?,
            c: ci,
            violated: false,
        }),
        Err(Error::HypothesisViolated { .. }) => None,
        Err(e) => return Err(e),
    };
    let k = n_samples.max(2) - 1;
    let times: Vec<f64> = (0..=k).map(|i| -path.horizon * i as f64 / k as f64).collect();
    let cfg = StepConfig {
        rel_tol: 1e-11,
        abs_tol: 1e-300,
        ..StepConfig::default()
    };
    let es = path.transition(&times, &cfg)?;
    // σ_min(E) = 1/‖E^{-T}‖; the inverse-transpose path keeps it accurate
    // when E is badly conditioned.
    let inv_es = path.inverse_transpose().transition(&times, &cfg)?;
    let mut violated = false;
    let mut inverse = inverse;
    let mut samples = Vec::with_capacity(times.len());
    for ((&t, e), ei) in times.iter().zip(&es).zip(&inv_es) {
        let norm = linalg::spectral_norm(e);
        let min_gain = 1.0 / linalg::spectral_norm(ei);
        let bound = c * (t * (l - eps)).exp();
        violated |= norm > bound * (1.0 + VIOLATION_SLACK);
        let lower_bound = inverse.as_mut().map(|inv| {
            let lb = (t * (inv.top + eps)).exp() / inv.c;
            inv.violated |= min_gain < lb * (1.0 - VIOLATION_SLACK);
            lb
        });
        samples.push(EstimateSample {
            t,
            norm,
            bound,
            min_gain,
            lower_bound,
        });
    }
    Ok(EstimateReport {
        ell: l,
        eps,
        m_val,
        m_half,
        t0,
        c,
        deviation,
        samples,
        violated,
        inverse,
    })
}

impl EstimateReport {
    pub fn to_json(&self) -> Value {
        json!({
            "ell": self.ell,
            "eps": self.eps,
            "M": self.m_val,
            "M_half": self.m_half,
            "t0": self.t0,
            "C": self.c,
            "sup_deviation": self.deviation,
            "violated": self.violated,
            "inverse": self.inverse.as_ref().map(|i| json!({
                "max_re_spec": i.top,
                "C": i.c,
                "violated": i.violated,
            })),
            "samples": self.samples.iter().map(|s| json!({
                "t": s.t,
                "norm_E": s.norm,
                "bound": s.bound,
                "min_gain": s.min_gain,
                "lower_bound": s.lower_bound,
            })).collect::<Vec<_>>(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm_E,bound\n");
        for s in &self.samples {
            out.push_str(&format!("{:e},{:e},{:e}\n", s.t, s.norm, s.bound));
        }
        out
    }
}
