//! Dormand–Prince 5(4) with step-size control and continuous output.
//!
//! The stepper integrates forward in time only; backward integration is done
//! by integrating the time-reversed system.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeSystem for (usize, F) {
    fn dim(&self) -> usize {
        self.0
    }
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
        (self.1)(t, y, dy)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Adaptive stepper holding the current state and the interpolant of the
/// last accepted step.
pub struct Dopri5<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    cfg: StepConfig,
    t: f64,
    y: Vec<f64>,
    f: Vec<f64>,
    h: f64,
    fac_old: f64,
    t_old: f64,
    h_old: f64,
    cont: [Vec<f64>; 5],
    steps: usize,
    rejected: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<'a, S: OdeSystem + ?Sized> Dopri5<'a, S> {
    pub fn new(sys: &'a S, t0: f64, y0: &[f64], cfg: StepConfig) -> Self {
        let d = sys.dim();
        assert_eq!(y0.len(), d, "initial state has the wrong dimension");
        let mut f = vec![0.0; d];
        sys.rhs(t0, y0, &mut f);
        let mut s = Dopri5 {
            sys,
            cfg,
            t: t0,
            y: y0.to_vec(),
            f,
            h: 0.0,
            fac_old: 1e-4,
            t_old: t0,
            h_old: 0.0,
            cont: std::array::from_fn(|_| y0.to_vec()),
            steps: 0,
            rejected: 0,
            k: std::array::from_fn(|_| vec![0.0; d]),
            tmp: vec![0.0; d],
        };
        s.h = s.cfg.h_init.unwrap_or_else(|| s.initial_step());
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Time derivative at the current state.
    pub fn dy(&self) -> &[f64] {
        &self.f
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps
    }

    pub fn rejected_steps(&self) -> usize {
        self.rejected
    }

    /// Start of the last accepted step.
    pub fn t_prev(&self) -> f64 {
        self.t_old
    }

    fn sk(&self, a: f64, b: f64) -> f64 {
        self.cfg.abs_tol + self.cfg.rel_tol * a.abs().max(b.abs())
    }

    fn initial_step(&mut self) -> f64 {
        let d = self.y.len();
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..d {
            let sk = self.sk(self.y[i], 0.0);
            dnf += (self.f[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.cfg.h_max);
        let y1: Vec<f64> = (0..d).map(|i| self.y[i] + h * self.f[i]).collect();
        let mut f1 = vec![0.0; d];
        self.sys.rhs(self.t + h, &y1, &mut f1);
        let mut der2 = 0.0;
        for i in 0..d {
            let sk = self.sk(self.y[i], 0.0);
            der2 += ((f1[i] - self.f[i]) / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(0.2)
        };
        // A tiny abs_tol with zero components can push the estimate to 0.
        let floor = 1e3 * f64::EPSILON * self.t.abs().max(1.0);
        (100.0 * h).min(h1).max(floor).min(self.cfg.h_max)
    }

    /// Takes one accepted step, never passing `t_end`. Returns the new time.
    pub fn step(&mut self, t_end: f64) -> Result<f64> {
        let d = self.y.len();
        loop {
            if self.steps + self.rejected >= self.cfg.max_steps {
                return Err(Error::TooManySteps(self.cfg.max_steps));
            }
            let mut h = self.h.min(self.cfg.h_max);
            let last = self.t + h >= t_end;
            if last {
                h = t_end - self.t;
            }
            if h.abs() <= 10.0 * f64::EPSILON * self.t.abs().max(1.0) {
                if last {
                    self.t = t_end;
                    return Ok(self.t);
                }
                return Err(Error::StepUnderflow { t: self.t, h });
            }
            let (t, y) = (self.t, &self.y);
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k;
            let tmp = &mut self.tmp;
            k1.copy_from_slice(&self.f);
            for i in 0..d {
                tmp[i] = y[i] + h * A21 * k1[i];
            }
            self.sys.rhs(t + C2 * h, tmp, k2);
            for i in 0..d {
                tmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            self.sys.rhs(t + C3 * h, tmp, k3);
            for i in 0..d {
                tmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            self.sys.rhs(t + C4 * h, tmp, k4);
            for i in 0..d {
                tmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            self.sys.rhs(t + C5 * h, tmp, k5);
            for i in 0..d {
                tmp[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            self.sys.rhs(t + h, tmp, k6);
            let mut y_new = vec![0.0; d];
            for i in 0..d {
                y_new[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            self.sys.rhs(t + h, &y_new, k7);
            let mut err = 0.0;
            for i in 0..d {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(y_new[i].abs());
                err += (e / sk).powi(2);
            }
            let err = (err / d.max(1) as f64).sqrt();
            if !err.is_finite() {
                self.h = h * FAC_MIN;
                self.rejected += 1;
                continue;
            }
            let fac11 = err.powf(0.2 - BETA * 0.75);
            let fac = (fac11 / self.fac_old.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            if err <= 1.0 {
                self.fac_old = err.max(1e-4);
                // continuous output coefficients
                for i in 0..d {
                    let ydiff = y_new[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    self.cont[0][i] = y[i];
                    self.cont[1][i] = ydiff;
                    self.cont[2][i] = bspl;
                    self.cont[3][i] = ydiff - h * k7[i] - bspl;
                    self.cont[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                            + D7 * k7[i]);
                }
                self.f.copy_from_slice(k7);
                self.y = y_new;
                self.t_old = self.t;
                self.h_old = h;
                self.t = if last { t_end } else { t + h };
                self.steps += 1;
                self.h = h / fac;
                return Ok(self.t);
            }
            self.rejected += 1;
            self.h = h / (1.0 / FAC_MIN).min(fac11 / SAFE);
        }
    }

    /// Continuous output on the last accepted step `[t_prev, t]`.
    pub fn dense(&self, t: f64, out: &mut [f64]) {
        if self.h_old == 0.0 {
            out.copy_from_slice(&self.y);
            return;
        }
        let theta = (t - self.t_old) / self.h_old;
        let theta1 = 1.0 - theta;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + theta1
                            * (self.cont[2][i]
                                + theta * (self.cont[3][i] + theta1 * self.cont[4][i])));
        }
    }

    /// Integrates to `t_end` and returns the final state.
    pub fn integrate_to(&mut self, t_end: f64) -> Result<Vec<f64>> {
        while self.t < t_end {
            self.step(t_end)?;
        }
        Ok(self.y.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = (1usize, |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = -y[0]);
        let mut s = Dopri5::new(&sys, 0.0, &[1.0], StepConfig::default());
        let y = s.integrate_to(5.0).unwrap();
        assert!((y[0] - (-5f64).exp()).abs() < 1e-11);
    }

    #[test]
    fn harmonic_oscillator_with_dense_output() {
        let sys = (2usize, |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        });
        let cfg = StepConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            ..StepConfig::default()
        };
        let mut s = Dopri5::new(&sys, 0.0, &[0.0, 1.0], cfg);
        let mut out = [0.0; 2];
        let mut worst = 0.0f64;
        while s.t() < 10.0 {
            s.step(10.0).unwrap();
            let (a, b) = (s.t_prev(), s.t());
            for j in 1..4 {
                let t = a + (b - a) * f64::from(j) / 4.0;
                s.dense(t, &mut out);
                worst = worst.max((out[0] - t.sin()).abs());
            }
        }
        assert!((s.y()[0] - 10f64.sin()).abs() < 1e-8);
        assert!(worst < 1e-8, "dense output error {worst}");
    }

    #[test]
    fn order_of_accuracy_is_five() {
        // fixed steps via a huge tolerance and h_max
        let sys = (1usize, |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = t.cos());
        let run = |h: f64| {
            let cfg = StepConfig {
                rel_tol: 1.0,
                abs_tol: 1.0,
                h_init: Some(h),
                h_max: h,
                ..StepConfig::default()
            };
            let mut s = Dopri5::new(&sys, 0.0, &[0.0], cfg);
            (s.integrate_to(2.0).unwrap()[0] - 2f64.sin()).abs()
        };
        let ratio = run(0.2) / run(0.1);
        assert!(ratio > 20.0, "error ratio {ratio}");
    }
}
