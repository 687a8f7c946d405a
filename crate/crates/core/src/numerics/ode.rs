//! Dormand–Prince 5(4) with FSAL and the classic fourth-order dense output.
//!
//! The stepper is exposed at the single-step level so that the reactor
//! integrator can layer its own acceptance rules (nonnegativity) on top of the
//! error control; [`solve_ivp`] is the plain driver used by the shooting code.

use thiserror::Error;

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

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Smallest step before the integration is declared failed.
    pub dt_min: f64,
    pub dt_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, dt_min: 1e-14, dt_max: f64::INFINITY, max_steps: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError<E> {
    #[error("step size underflow at t = {t} (dt = {dt})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("step limit {0} reached")]
    TooManySteps(usize),
    #[error("right-hand side failed: {0}")]
    Rhs(E),
}

/// Result of one trial step.
#[derive(Debug, Clone)]
pub struct TrialStep {
    pub y: Vec<f64>,
    /// Right-hand side at the end point (first stage of the next step).
    pub f_end: Vec<f64>,
    /// Scaled error norm; the step is acceptable when it is at most one.
    pub error: f64,
    pub dense: DenseSegment,
}

/// Continuous extension over one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment {
    t0: f64,
    dt: f64,
    y0: Vec<f64>,
    diff: Vec<f64>,
    bspl: Vec<f64>,
    c4: Vec<f64>,
    c5: Vec<f64>,
}

impl DenseSegment {
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let theta = (t - self.t0) / self.dt;
        let theta1 = 1.0 - theta;
        (0..self.y0.len())
            .map(|i| {
                self.y0[i]
                    + theta
                        * (self.diff[i]
                            + theta1 * (self.bspl[i] + theta * (self.c4[i] + theta1 * self.c5[i])))
            })
            .collect()
    }

    pub fn t_start(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.dt
    }
}

fn combine(y: &[f64], dt: f64, terms: &[(f64, &[f64])]) -> Vec<f64> {
    let mut out = y.to_vec();
    for (c, k) in terms {
        if *c != 0.0 {
            for (o, ki) in out.iter_mut().zip(k.iter()) {
                *o += dt * c * ki;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct DormandPrince {
    pub rtol: f64,
    pub atol: f64,
}

impl DormandPrince {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol }
    }

    /// One trial step from `(t, y)` with first stage `k1 = f(t, y)`.
    pub fn trial<E, F>(&self, f: &mut F, t: f64, y: &[f64], k1: &[f64], dt: f64) -> Result<TrialStep, E>
    where
        F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    {
        let k2 = f(t + C2 * dt, &combine(y, dt, &[(A21, k1)]))?;
        let k3 = f(t + C3 * dt, &combine(y, dt, &[(A31, k1), (A32, &k2)]))?;
        let k4 = f(t + C4 * dt, &combine(y, dt, &[(A41, k1), (A42, &k2), (A43, &k3)]))?;
        let k5 = f(
            t + C5 * dt,
            &combine(y, dt, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        )?;
        let k6 = f(
            t + dt,
            &combine(y, dt, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        )?;
        let y_new = combine(y, dt, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
        let k7 = f(t + dt, &y_new)?;

        let n = y.len();
        let mut sum = 0.0;
        for i in 0..n {
            let err = dt
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            sum += (err / scale).powi(2);
        }
        let error = (sum / n as f64).sqrt();

        let diff: Vec<f64> = (0..n).map(|i| y_new[i] - y[i]).collect();
        let bspl: Vec<f64> = (0..n).map(|i| dt * k1[i] - diff[i]).collect();
        let c4: Vec<f64> = (0..n).map(|i| diff[i] - dt * k7[i] - bspl[i]).collect();
        let c5: Vec<f64> = (0..n)
            .map(|i| {
                dt * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
            })
            .collect();

        Ok(TrialStep {
            dense: DenseSegment { t0: t, dt, y0: y.to_vec(), diff, bspl, c4, c5 },
            y: y_new,
            f_end: k7,
            error,
        })
    }

    /// Step size for the next attempt given the error of the last one.
    pub fn next_dt(&self, dt: f64, error: f64, accepted: bool) -> f64 {
        let fac = if error == 0.0 { 10.0 } else { 0.9 * error.powf(-0.2) };
        let fac = if accepted { fac.clamp(0.2, 10.0) } else { fac.clamp(0.1, 1.0) };
        dt * fac
    }

    /// Starting step from the size of the solution and its derivative.
    pub fn initial_dt(&self, y: &[f64], f0: &[f64], span: f64) -> f64 {
        let n = y.len() as f64;
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for (yi, fi) in y.iter().zip(f0.iter()) {
            let sc = self.atol + self.rtol * yi.abs();
            d0 += (yi / sc).powi(2);
            d1 += (fi / sc).powi(2);
        }
        let (d0, d1) = ((d0 / n).sqrt(), (d1 / n).sqrt());
        let dt = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        dt.min(span.abs()).max(1e-12)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IvpSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// Interpolants of the accepted steps, in order.
    pub dense: Vec<DenseSegment>,
    pub rejected: usize,
}

impl IvpSolution {
    pub fn last(&self) -> &[f64] {
        self.y.last().expect("solution has at least the initial point")
    }

    /// Dense-output value at `t` inside the integrated span.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        if self.dense.is_empty() || t <= self.t[0] {
            return self.y[0].clone();
        }
        let i = self.dense.partition_point(|seg| seg.t_end() < t).min(self.dense.len() - 1);
        self.dense[i].eval(t)
    }
}

/// Integrates `y' = f(t, y)` from `t0` to `t1 > t0`, recording every accepted step.
pub fn solve_ivp<E, F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &OdeOptions,
) -> Result<IvpSolution, OdeError<E>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
{
    let mut sol = IvpSolution { t: vec![t0], y: vec![y0.to_vec()], dense: Vec::new(), rejected: 0 };
    if t1 <= t0 {
        return Ok(sol);
    }
    let dp = DormandPrince::new(opts.rtol, opts.atol);
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = f(t, &y).map_err(OdeError::Rhs)?;
    let mut dt = dp.initial_dt(&y, &k1, t1 - t0).min(opts.dt_max);
    let mut steps = 0;
    while t < t1 {
        if steps >= opts.max_steps {
            return Err(OdeError::TooManySteps(opts.max_steps));
        }
        steps += 1;
        let last = t + dt >= t1 * (1.0 - 4.0 * f64::EPSILON) - 4.0 * f64::EPSILON;
        let h = if last { t1 - t } else { dt };
        let trial = dp.trial(&mut f, t, &y, &k1, h).map_err(OdeError::Rhs)?;
        if trial.error <= 1.0 {
            t = if last { t1 } else { t + h };
            y = trial.y;
            k1 = trial.f_end;
            sol.t.push(t);
            sol.y.push(y.clone());
            sol.dense.push(trial.dense);
            dt = dp.next_dt(h, trial.error, true).min(opts.dt_max);
        } else {
            sol.rejected += 1;
            dt = dp.next_dt(h, trial.error, false);
            if dt < opts.dt_min {
                return Err(OdeError::StepUnderflow { t, dt });
            }
        }
    }
    Ok(sol)
}
