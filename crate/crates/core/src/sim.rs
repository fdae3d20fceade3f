//! Fixed-step RK4 integration of the closed loops with per-step monitors.

use serde::{Deserialize, Serialize};

use crate::dynamics::{FlowModel, Hamiltonian, Mode, SimState, Workspace};
use crate::error::{Error, Result};

/// Relative tolerance for a single-step increase of `V`.
pub const LYAPUNOV_STEP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub convergence_tol: f64,
    /// Convergence must hold over this trailing window.
    pub dwell: f64,
    pub record_every: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            step: 1e-3,
            horizon: 50.0,
            convergence_tol: 1e-6,
            dwell: 1.0,
            record_every: 100,
        }
    }
}

impl SimConfig {
    pub fn with_horizon(horizon: f64) -> Self {
        Self {
            horizon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.step) || !positive(self.horizon) || self.step >= self.horizon {
            return Err(Error::InvalidConfig(format!(
                "need 0 < step < horizon, got step {} and horizon {}",
                self.step, self.horizon
            )));
        }
        if !positive(self.convergence_tol) || !positive(self.dwell) {
            return Err(Error::InvalidConfig(
                "convergence tolerance and dwell must be positive".into(),
            ));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.horizon / self.step).round() as usize
    }
}

/// Monitor values at one recorded sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Monitor {
    pub lyapunov: f64,
    pub total: f64,
    /// `beta^T x_c` for each monitored kernel vector.
    pub kernel_values: Vec<f64>,
    pub dx_norm: f64,
    /// `||B^T dH||_inf` at the mode's evaluation point.
    pub disagreement: f64,
    pub gradient_mean: f64,
}

/// Extremes observed at every integration step, not only recorded samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepStats {
    pub steps: usize,
    pub lyapunov_increases: usize,
    pub max_lyapunov_increase: f64,
    pub min_lyapunov: f64,
    pub max_dx_norm: f64,
    pub min_disagreement: f64,
    pub max_total_drift: f64,
    pub max_kernel_drift: Vec<f64>,
    /// Steps redone with substeps because a saturation kink was crossed.
    pub refined_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub mode: Mode,
    pub samples: Vec<SimState>,
    pub monitors: Vec<Monitor>,
    pub kernel_vectors: Vec<Vec<f64>>,
    pub stats: StepStats,
}

impl Trajectory {
    pub fn last(&self) -> &SimState {
        self.samples.last().expect("trajectory is nonempty")
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Substeps used for a step whose stages straddle a saturation kink.
pub const KINK_SUBSTEPS: usize = 16;

struct Stepper {
    stage1: (Vec<f64>, Vec<f64>),
    stages: [(Vec<f64>, Vec<f64>); 3],
    probe: (Vec<f64>, Vec<f64>),
    regime1: Vec<i8>,
}

impl Stepper {
    fn new(n: usize, m: usize) -> Self {
        let pair = || (vec![0.0; n], vec![0.0; m]);
        Self {
            stage1: pair(),
            stages: [pair(), pair(), pair()],
            probe: pair(),
            regime1: vec![0; m],
        }
    }

    /// One classical RK4 step from the slope already in `stage1`. Returns
    /// whether any stage saw a different saturation regime than the first.
    #[allow(clippy::too_many_arguments)]
    fn step(
        &mut self,
        model: &FlowModel,
        h: &dyn Hamiltonian,
        mode: &Mode,
        ws: &mut Workspace,
        x: &mut [f64],
        xc: &mut [f64],
        carry_x: &mut [f64],
        carry_c: &mut [f64],
        dt: f64,
        detect: bool,
    ) -> bool {
        let mut switched = false;
        let weights = [0.5, 0.5, 1.0];
        for s in 0..3 {
            let (prev_x, prev_c) = if s == 0 { &self.stage1 } else { &self.stages[s - 1] };
            for i in 0..x.len() {
                self.probe.0[i] = x[i] + weights[s] * dt * prev_x[i];
            }
            for i in 0..xc.len() {
                self.probe.1[i] = xc[i] + weights[s] * dt * prev_c[i];
            }
            let (kx, kc) = &mut self.stages[s];
            model.rhs_into(h, &self.probe.0, &self.probe.1, mode, ws, kx, kc);
            if detect && ws.regime != self.regime1 {
                switched = true;
            }
        }
        if switched {
            return true;
        }
        let (k1, [k2, k3, k4]) = (&self.stage1, &self.stages);
        for i in 0..x.len() {
            compensated_add(&mut x[i], &mut carry_x[i], dt / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]));
        }
        for i in 0..xc.len() {
            compensated_add(&mut xc[i], &mut carry_c[i], dt / 6.0 * (k1.1[i] + 2.0 * k2.1[i] + 2.0 * k3.1[i] + k4.1[i]));
        }
        false
    }
}

fn compensated_add(sum: &mut f64, carry: &mut f64, increment: f64) {
    let y = increment - *carry;
    let t = *sum + y;
    *carry = (t - *sum) - y;
    *sum = t;
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn integrate(
    model: &FlowModel,
    h: &dyn Hamiltonian,
    state0: &SimState,
    config: &SimConfig,
    mode: Mode,
) -> Result<Trajectory> {
    integrate_monitored(model, h, state0, config, mode, &[])
}

/// Classical RK4 at a fixed step; also tracks `beta^T x_c` for each `beta`.
pub fn integrate_monitored(
    model: &FlowModel,
    h: &dyn Hamiltonian,
    state0: &SimState,
    config: &SimConfig,
    mode: Mode,
    kernel_vectors: &[Vec<f64>],
) -> Result<Trajectory> {
    config.validate()?;
    let n = model.vertex_count();
    let m = model.edge_count();
    if state0.x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: state0.x.len(),
        });
    }
    if state0.xc.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: state0.xc.len(),
        });
    }
    if let Some(beta) = kernel_vectors.iter().find(|b| b.len() != m) {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: beta.len(),
        });
    }
    if !state0.is_finite() {
        return Err(Error::NonFiniteState { t: state0.t });
    }

    let mut ws = model.workspace();
    let injection_rate = match (&mode, model.injection()) {
        (Mode::Disturbed, Some(inj)) => inj.iter().sum::<f64>(),
        _ => 0.0,
    };
    let steps = config.step_count();
    let dt = config.step;
    let t0 = state0.t;

    let mut x = state0.x.clone();
    let mut xc = state0.xc.clone();
    let mut k1x = vec![0.0; n];
    let mut k1c = vec![0.0; m];
    let mut stepper = Stepper::new(n, m);
    // Kahan carries keep long runs from accumulating rounding in the state.
    let mut carry_x = vec![0.0; n];
    let mut carry_c = vec![0.0; m];

    let total0: f64 = x.iter().sum();
    let kernel0: Vec<f64> = kernel_vectors.iter().map(|b| dot(b, &xc)).collect();

    let mut samples = Vec::with_capacity(steps / config.record_every + 2);
    let mut monitors = Vec::with_capacity(samples.capacity());
    let mut stats = StepStats {
        steps,
        lyapunov_increases: 0,
        max_lyapunov_increase: 0.0,
        min_lyapunov: f64::INFINITY,
        max_dx_norm: 0.0,
        min_disagreement: f64::INFINITY,
        max_total_drift: 0.0,
        max_kernel_drift: vec![0.0; kernel_vectors.len()],
        refined_steps: 0,
    };
    let mut previous_v: Option<f64> = None;

    for k in 0..=steps {
        let t = t0 + k as f64 * dt;
        if !x.iter().chain(&xc).all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState { t });
        }
        model.rhs_into(h, &x, &xc, &mode, &mut ws, &mut k1x, &mut k1c);
        let v = model.lyapunov_in(h, &x, &xc, &mode, &mut ws);
        let dx_norm = inf_norm(&k1x);
        let disagreement = inf_norm(&k1c);
        let total: f64 = x.iter().sum();

        stats.min_lyapunov = stats.min_lyapunov.min(v);
        stats.max_dx_norm = stats.max_dx_norm.max(dx_norm);
        stats.min_disagreement = stats.min_disagreement.min(disagreement);
        let expected_total = total0 + injection_rate * (t - t0);
        stats.max_total_drift = stats.max_total_drift.max((total - expected_total).abs());
        for (j, beta) in kernel_vectors.iter().enumerate() {
            let drift = (dot(beta, &xc) - kernel0[j]).abs();
            stats.max_kernel_drift[j] = stats.max_kernel_drift[j].max(drift);
        }
        if let Some(prev) = previous_v {
            let increase = v - prev;
            if increase > LYAPUNOV_STEP_TOL * (1.0 + prev.abs()) {
                stats.lyapunov_increases += 1;
            }
            stats.max_lyapunov_increase = stats.max_lyapunov_increase.max(increase / (1.0 + prev.abs()));
        }
        previous_v = Some(v);

        if k % config.record_every == 0 || k == steps {
            let gradient_mean = {
                let mut g = vec![0.0; n];
                match &mode {
                    Mode::Steering(target) => {
                        let shifted: Vec<f64> = x.iter().zip(target.x_star()).map(|(a, b)| a - b).collect();
                        h.gradient(&shifted, &mut g);
                    }
                    _ => h.gradient(&x, &mut g),
                }
                if n == 0 {
                    0.0
                } else {
                    g.iter().sum::<f64>() / n as f64
                }
            };
            monitors.push(Monitor {
                lyapunov: v,
                total,
                kernel_values: kernel_vectors.iter().map(|b| dot(b, &xc)).collect(),
                dx_norm,
                disagreement,
                gradient_mean,
            });
            samples.push(SimState {
                x: x.clone(),
                xc: xc.clone(),
                t,
            });
        }
        if k == steps {
            break;
        }

        stepper.stage1.0.copy_from_slice(&k1x);
        stepper.stage1.1.copy_from_slice(&k1c);
        stepper.regime1.copy_from_slice(&ws.regime);
        let switched = stepper.step(model, h, &mode, &mut ws, &mut x, &mut xc, &mut carry_x, &mut carry_c, dt, true);
        if switched {
            let sub = dt / KINK_SUBSTEPS as f64;
            for _ in 0..KINK_SUBSTEPS {
                model.rhs_into(h, &x, &xc, &mode, &mut ws, &mut stepper.stage1.0, &mut stepper.stage1.1);
                stepper.step(model, h, &mode, &mut ws, &mut x, &mut xc, &mut carry_x, &mut carry_c, sub, false);
            }
            stats.refined_steps += 1;
        }
    }

    Ok(Trajectory {
        mode,
        samples,
        monitors,
        kernel_vectors: kernel_vectors.to_vec(),
        stats,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    /// Largest `|1^T x(t) - 1^T x(0) - t 1^T E d|` over every step.
    pub max_total_drift: f64,
    pub max_kernel_drift: Vec<f64>,
    pub lyapunov_increases: usize,
    pub max_relative_lyapunov_increase: f64,
    pub min_lyapunov: f64,
    pub max_dx_norm: f64,
    pub min_disagreement: f64,
    pub final_equilibrium: bool,
}

pub fn verify_trajectory(
    traj: &Trajectory,
    model: &FlowModel,
    h: &dyn Hamiltonian,
    config: &SimConfig,
) -> VerificationReport {
    let final_equilibrium = model.is_equilibrium(h, traj.last(), &traj.mode, config.convergence_tol);
    VerificationReport {
        max_total_drift: traj.stats.max_total_drift,
        max_kernel_drift: traj.stats.max_kernel_drift.clone(),
        lyapunov_increases: traj.stats.lyapunov_increases,
        max_relative_lyapunov_increase: traj.stats.max_lyapunov_increase,
        min_lyapunov: traj.stats.min_lyapunov,
        max_dx_norm: traj.stats.max_dx_norm,
        min_disagreement: traj.stats.min_disagreement,
        final_equilibrium,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Convergence {
    pub converged: bool,
    pub alpha: Option<f64>,
    /// Start of the final run of samples within tolerance.
    pub t_conv: Option<f64>,
}

pub fn detect_convergence(traj: &Trajectory, config: &SimConfig) -> Convergence {
    let not = Convergence {
        converged: false,
        alpha: None,
        t_conv: None,
    };
    let (Some(last), Some(first)) = (traj.samples.last(), traj.samples.first()) else {
        return not;
    };
    if last.t - first.t < config.dwell {
        return not;
    }
    let mut start = None;
    for (s, mon) in traj.samples.iter().zip(&traj.monitors).rev() {
        if mon.disagreement <= config.convergence_tol {
            start = Some(s.t);
        } else {
            break;
        }
    }
    match start {
        Some(t) if last.t - t >= config.dwell => Convergence {
            converged: true,
            alpha: traj.monitors.last().map(|m| m.gradient_mean),
            t_conv: Some(t),
        },
        _ => not,
    }
}
