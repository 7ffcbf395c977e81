//! N-agent p-alignment dynamics.
//!
//! Velocities relax toward kernel-weighted neighborhood averages through the
//! pairwise force `(1/N) phi_ij |v_j - v_i|^(2p-2) (v_j - v_i)`; positions
//! follow the velocities. `p = 1` is classical alignment, `p > 1` the graph
//! 2p-Laplacian, and `0 <= p < 1` produces finite-time alignment driven by
//! the orientation of velocity gradients.
//!
//! Accumulations run in a fixed i-major, j-increasing order (parallel over
//! the outer index only), so traces are bitwise reproducible for any thread
//! count.

use crate::diagnostics::functionals::{
    diameter_agents, energy_fluctuations_agents, mean_velocity, uniform_fluctuation_agents,
};
use crate::diagnostics::trace::{DiagnosticsTrace, Sample, TraceMeta};
use crate::kernels::{KernelError, KernelFamily, KernelSpec};
use crate::linalg::{self, Vec3, ZERO3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid agent state: {0}")]
    InvalidState(String),
    #[error("velocity collision between agents {i} and {j} at t = {t}")]
    Collision { i: usize, j: usize, t: f64 },
    #[error("step size underflow at t = {t}: needed dt = {dt} below dt_min")]
    Stiffness { t: f64, dt: f64 },
    #[error("step budget exhausted at t = {t} after {steps} steps")]
    StepBudget { t: f64, steps: u64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TimeMethod {
    #[default]
    Rk4,
    SspRk2,
    Euler,
}

/// Behavior when two agents reach exactly equal velocities at distinct
/// positions on a `1/2 < p < 1` run: treat the vanishing pair force as its
/// zero limit and count the event, or terminate. Runs with `p <= 1/2` always
/// terminate (the pair force has no limit there).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CollisionMode {
    #[default]
    Log,
    Forbid,
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    /// Base time step; steps halve below it when the alignment guard fires.
    pub dt: f64,
    pub method: TimeMethod,
    pub dt_min: f64,
    /// Uniform fluctuation level below which the run stops as aligned.
    /// `0.0` selects the default `1e-9 * dv(0)`.
    pub align_tol: f64,
    pub collision_mode: CollisionMode,
    /// Hard cap on accepted steps per run; `0` selects an automatic budget.
    /// Exceeding it turns a guard-induced grind into an error instead of a
    /// hang.
    pub max_steps: u64,
}

impl StepControl {
    pub fn new(dt: f64, method: TimeMethod) -> Self {
        StepControl {
            dt,
            method,
            dt_min: dt * 1e-12,
            align_tol: 0.0,
            collision_mode: CollisionMode::Log,
            max_steps: 0,
        }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let ok = self.dt.is_finite()
            && self.dt_min.is_finite()
            && self.dt > self.dt_min
            && self.dt_min > 0.0;
        if !ok {
            return Err(AgentError::InvalidState(format!(
                "step control requires dt > dt_min > 0 (dt = {}, dt_min = {})",
                self.dt, self.dt_min
            )));
        }
        if !(self.align_tol >= 0.0 && self.align_tol.is_finite()) {
            return Err(AgentError::InvalidState(
                "align_tol must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub t: f64,
    pub dim: usize,
    /// Alignment exponent.
    pub p: f64,
    pub pos: Vec<Vec3>,
    pub vel: Vec<Vec3>,
}

impl AgentState {
    pub fn new(dim: usize, p: f64, pos: Vec<Vec3>, vel: Vec<Vec3>) -> Result<Self, AgentError> {
        let s = AgentState {
            t: 0.0,
            dim,
            p,
            pos,
            vel,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.pos.len()
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if !(1..=3).contains(&self.dim) {
            return Err(AgentError::InvalidState("dim must be 1, 2 or 3".into()));
        }
        if self.pos.len() != self.vel.len() || self.pos.len() < 2 {
            return Err(AgentError::InvalidState(
                "need positions.len() == velocities.len() >= 2".into(),
            ));
        }
        if !(self.p.is_finite() && self.p >= 0.0) {
            return Err(AgentError::InvalidState("p must be finite and >= 0".into()));
        }
        if !self.t.is_finite() {
            return Err(AgentError::InvalidState("t must be finite".into()));
        }
        for (x, v) in self.pos.iter().zip(&self.vel) {
            if !(linalg::is_finite(*x) && linalg::is_finite(*v)) {
                return Err(AgentError::InvalidState("non-finite entry".into()));
            }
            for c in self.dim..3 {
                if x[c] != 0.0 || v[c] != 0.0 {
                    return Err(AgentError::InvalidState(
                        "padded components beyond dim must be zero".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `|v_i - v_j| + |x_i - x_j| > 0` for all pairs, checked before runs
    /// with `0 <= p <= 1/2`.
    pub fn check_no_collision(&self) -> Result<(), AgentError> {
        for i in 0..self.n() {
            for j in (i + 1)..self.n() {
                let dv = linalg::norm_sq(linalg::sub(self.vel[i], self.vel[j]));
                let dx = linalg::norm_sq(linalg::sub(self.pos[i], self.pos[j]));
                if dv + dx == 0.0 {
                    return Err(AgentError::Collision { i, j, t: self.t });
                }
            }
        }
        Ok(())
    }
}

fn kernel_compatible(state: &AgentState, kernel: &KernelSpec) -> Result<(), AgentError> {
    if kernel.dim() != state.dim {
        return Err(AgentError::InvalidState(format!(
            "kernel dim {} != state dim {}",
            kernel.dim(),
            state.dim
        )));
    }
    match kernel.family() {
        KernelFamily::Matrix if state.p != 1.0 => Err(AgentError::Kernel(
            KernelError::MatrixRequiresPureAlignment(state.p),
        )),
        KernelFamily::SingularHeavyTail if kernel.p() != state.p => {
            Err(AgentError::InvalidState(format!(
                "singular kernel head was built for p = {}, state has p = {}",
                kernel.p(),
                state.p
            )))
        }
        _ => Ok(()),
    }
}

struct Row {
    acc: Vec3,
    /// `sum_j phi_ij |dv_ij|^{2p}` (matrix family: `sum_j <dv, Phi dv>`).
    ens: f64,
    /// Smallest nonzero squared velocity difference in the row.
    min_dv2: f64,
    /// A `j` with exactly equal velocity, if any (p < 1 only).
    zero_dv_pair: Option<usize>,
}

struct RhsEval {
    acc: Vec<Vec3>,
    /// `(1/N^2) sum_{i != j} phi_ij |dv_ij|^{2p}`.
    ens_rate: f64,
    max_acc: f64,
    min_dv2: f64,
    zero_pairs: u64,
}

fn eval_rhs(
    pos: &[Vec3],
    vel: &[Vec3],
    p: f64,
    kernel: &KernelSpec,
    t: f64,
    collision_mode: CollisionMode,
) -> Result<RhsEval, AgentError> {
    let n = pos.len();
    let inv_n = 1.0 / n as f64;
    let matrix = kernel.family() == KernelFamily::Matrix;
    let rows: Vec<Result<Row, AgentError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = pos[i];
            let vi = vel[i];
            let mut acc = ZERO3;
            let mut ens = 0.0;
            let mut min_dv2 = f64::INFINITY;
            let mut zero_dv_pair = None;
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dv = linalg::sub(vel[j], vi);
                let dv2 = linalg::norm_sq(dv);
                let r = linalg::norm(linalg::sub(pos[j], xi));
                if matrix {
                    let f = kernel.matrix_profile(r).mul_vec(dv);
                    acc = linalg::add(acc, f);
                    ens += linalg::dot(dv, f);
                    if dv2 > 0.0 {
                        min_dv2 = min_dv2.min(dv2);
                    }
                } else if dv2 == 0.0 {
                    if p < 1.0 {
                        zero_dv_pair = Some(j);
                    }
                    // |dv|^{2p-2} dv has limit zero for p > 1/2 and for p >= 1
                } else {
                    min_dv2 = min_dv2.min(dv2);
                    let phi = kernel.profile(r);
                    let w = if p == 1.0 {
                        phi
                    } else {
                        phi * dv2.powf(p - 1.0)
                    };
                    acc = linalg::axpy(acc, w, dv);
                    ens += w * dv2;
                }
            }
            if !matrix && p < 1.0 {
                if let Some(j) = zero_dv_pair {
                    if p <= 0.5 || collision_mode == CollisionMode::Forbid {
                        return Err(AgentError::Collision { i, j, t });
                    }
                }
            }
            Ok(Row {
                acc: linalg::scale(acc, inv_n),
                ens,
                min_dv2,
                zero_dv_pair,
            })
        })
        .collect();

    let mut acc = Vec::with_capacity(n);
    let mut ens_sum = 0.0;
    let mut max_acc: f64 = 0.0;
    let mut min_dv2 = f64::INFINITY;
    let mut zero_pairs = 0u64;
    for row in rows {
        let row = row?;
        max_acc = max_acc.max(linalg::norm(row.acc));
        ens_sum += row.ens;
        min_dv2 = min_dv2.min(row.min_dv2);
        zero_pairs += u64::from(row.zero_dv_pair.is_some());
        acc.push(row.acc);
    }
    Ok(RhsEval {
        acc,
        ens_rate: ens_sum * inv_n * inv_n,
        max_acc,
        min_dv2,
        zero_pairs,
    })
}

/// Acceleration of every agent under the p-alignment force,
/// `a_i = (1/N) sum_{j != i} phi_ij |v_j - v_i|^(2p-2) (v_j - v_i)`
/// (matrix family: `a_i = (1/N) sum_j Phi_ij (v_j - v_i)`).
pub fn p_alignment_rhs(state: &AgentState, kernel: &KernelSpec) -> Result<Vec<Vec3>, AgentError> {
    state.validate()?;
    kernel_compatible(state, kernel)?;
    Ok(eval_rhs(
        &state.pos,
        &state.vel,
        state.p,
        kernel,
        state.t,
        CollisionMode::Log,
    )?
    .acc)
}

#[derive(Clone)]
struct Ode {
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
    /// Time integral of the enstrophy rate, advanced by the same scheme as
    /// the state so budget checks carry no quadrature error of their own.
    ens: f64,
}

struct Deriv {
    vel: Vec<Vec3>,
    acc: Vec<Vec3>,
    ens_rate: f64,
    max_acc: f64,
    min_dv2: f64,
}

fn ode_axpy(y: &Ode, c: f64, d: &Deriv) -> Ode {
    Ode {
        pos: y
            .pos
            .iter()
            .zip(&d.vel)
            .map(|(x, v)| linalg::axpy(*x, c, *v))
            .collect(),
        vel: y
            .vel
            .iter()
            .zip(&d.acc)
            .map(|(v, a)| linalg::axpy(*v, c, *a))
            .collect(),
        ens: y.ens + c * d.ens_rate,
    }
}

enum StageFail {
    Fatal(AgentError),
    /// A later stage collided or the alignment guard fired; retry smaller.
    Retry,
}

struct Stepper<'a> {
    p: f64,
    kernel: &'a KernelSpec,
    mode: CollisionMode,
    method: TimeMethod,
    /// Active for `p < 1`: cap `max |a| * dt` at half the smallest pairwise
    /// velocity difference so finite-time alignment is approached, never
    /// overshot.
    guard: bool,
}

impl Stepper<'_> {
    fn deriv(
        &self,
        y: &Ode,
        t: f64,
        dt: f64,
        guard_level: f64,
        first_stage: bool,
        zero_pairs: &mut u64,
    ) -> Result<Deriv, StageFail> {
        let eval = eval_rhs(&y.pos, &y.vel, self.p, self.kernel, t, self.mode).map_err(|e| {
            if first_stage {
                StageFail::Fatal(e)
            } else {
                StageFail::Retry
            }
        })?;
        if self.guard && eval.max_acc * dt > guard_level {
            return Err(StageFail::Retry);
        }
        *zero_pairs += eval.zero_pairs;
        Ok(Deriv {
            vel: y.vel.clone(),
            acc: eval.acc,
            ens_rate: eval.ens_rate,
            max_acc: eval.max_acc,
            min_dv2: eval.min_dv2,
        })
    }

    fn try_step(&self, y: &Ode, t: f64, dt: f64, zero_pairs: &mut u64) -> Result<Ode, StageFail> {
        let k1 = self.deriv(y, t, dt, f64::INFINITY, true, zero_pairs)?;
        let guard_level = 0.5 * k1.min_dv2.sqrt();
        if self.guard && k1.max_acc * dt > guard_level {
            return Err(StageFail::Retry);
        }
        match self.method {
            TimeMethod::Euler => Ok(ode_axpy(y, dt, &k1)),
            TimeMethod::SspRk2 => {
                let y1 = ode_axpy(y, dt, &k1);
                let k2 = self.deriv(&y1, t + dt, dt, guard_level, false, zero_pairs)?;
                let y2 = ode_axpy(&y1, dt, &k2);
                Ok(half_mix(y, &y2))
            }
            TimeMethod::Rk4 => {
                let half = 0.5 * dt;
                let s2 = ode_axpy(y, half, &k1);
                let k2 = self.deriv(&s2, t + half, dt, guard_level, false, zero_pairs)?;
                let s3 = ode_axpy(y, half, &k2);
                let k3 = self.deriv(&s3, t + half, dt, guard_level, false, zero_pairs)?;
                let s4 = ode_axpy(y, dt, &k3);
                let k4 = self.deriv(&s4, t + dt, dt, guard_level, false, zero_pairs)?;
                Ok(rk4_combine(y, dt, &k1, &k2, &k3, &k4))
            }
        }
    }
}

fn half_mix(a: &Ode, b: &Ode) -> Ode {
    let mix = |u: Vec3, w: Vec3| -> Vec3 {
        [
            0.5 * u[0] + 0.5 * w[0],
            0.5 * u[1] + 0.5 * w[1],
            0.5 * u[2] + 0.5 * w[2],
        ]
    };
    Ode {
        pos: a.pos.iter().zip(&b.pos).map(|(u, w)| mix(*u, *w)).collect(),
        vel: a.vel.iter().zip(&b.vel).map(|(u, w)| mix(*u, *w)).collect(),
        ens: 0.5 * a.ens + 0.5 * b.ens,
    }
}

fn rk4_combine(y: &Ode, dt: f64, k1: &Deriv, k2: &Deriv, k3: &Deriv, k4: &Deriv) -> Ode {
    let c = dt / 6.0;
    let comb = |base: Vec3, a: Vec3, b: Vec3, d: Vec3, e: Vec3| -> Vec3 {
        [
            base[0] + c * (a[0] + 2.0 * b[0] + 2.0 * d[0] + e[0]),
            base[1] + c * (a[1] + 2.0 * b[1] + 2.0 * d[1] + e[1]),
            base[2] + c * (a[2] + 2.0 * b[2] + 2.0 * d[2] + e[2]),
        ]
    };
    let n = y.pos.len();
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for i in 0..n {
        pos.push(comb(y.pos[i], k1.vel[i], k2.vel[i], k3.vel[i], k4.vel[i]));
        vel.push(comb(y.vel[i], k1.acc[i], k2.acc[i], k3.acc[i], k4.acc[i]));
    }
    Ode {
        pos,
        vel,
        ens: y.ens + c * (k1.ens_rate + 2.0 * k2.ens_rate + 2.0 * k3.ens_rate + k4.ens_rate),
    }
}

/// One accepted step: `(new ode, accepted dt)`.
fn advance(
    stepper: &Stepper,
    y: &Ode,
    t: f64,
    dt_target: f64,
    dt_min: f64,
    zero_pairs: &mut u64,
) -> Result<(Ode, f64), AgentError> {
    let mut dt = dt_target;
    loop {
        match stepper.try_step(y, t, dt, zero_pairs) {
            Ok(next) => return Ok((next, dt)),
            Err(StageFail::Fatal(e)) => return Err(e),
            Err(StageFail::Retry) => {
                dt *= 0.5;
                if dt < dt_min {
                    return Err(AgentError::Stiffness { t, dt });
                }
            }
        }
    }
}

/// Advance one step of `ctl.method`, halving `dt` down to `ctl.dt_min` when
/// the finite-time-alignment guard fires (`p < 1`).
pub fn step(
    state: &AgentState,
    kernel: &KernelSpec,
    ctl: &StepControl,
) -> Result<AgentState, AgentError> {
    state.validate()?;
    ctl.validate()?;
    kernel_compatible(state, kernel)?;
    let stepper = Stepper {
        p: state.p,
        kernel,
        mode: ctl.collision_mode,
        method: ctl.method,
        guard: state.p < 1.0,
    };
    let y = Ode {
        pos: state.pos.clone(),
        vel: state.vel.clone(),
        ens: 0.0,
    };
    let mut zero_pairs = 0;
    let (next, dt) = advance(&stepper, &y, state.t, ctl.dt, ctl.dt_min, &mut zero_pairs)?;
    Ok(AgentState {
        t: state.t + dt,
        dim: state.dim,
        p: state.p,
        pos: next.pos,
        vel: next.vel,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed,
    /// Uniform fluctuations fell below `align_tol`; `t_c` is the crossing
    /// time, linearly interpolated.
    AlignedEarly {
        t_c: f64,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug)]
pub struct RunResult {
    pub trace: DiagnosticsTrace,
    pub outcome: RunOutcome,
    /// Exactly-equal-velocity pair events tolerated on `1/2 < p < 1` runs.
    pub velocity_collision_events: u64,
    pub error: Option<AgentError>,
}

impl RunResult {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

fn make_sample(state: &AgentState, ens_increment: f64) -> Sample {
    let vbar = mean_velocity(&state.vel);
    let d_e = energy_fluctuations_agents(state);
    let d_v = uniform_fluctuation_agents(&state.vel);
    let n = state.n() as f64;
    let mut energy = 0.0;
    let mut umax: f64 = 0.0;
    for v in &state.vel {
        energy += 0.5 * linalg::norm_sq(*v);
        umax = umax.max(linalg::norm(*v));
    }
    Sample {
        t: state.t,
        d_e,
        d_v,
        diameter: diameter_agents(&state.pos),
        mass: 1.0,
        momentum: vbar,
        energy: energy / n,
        ens_increment,
        seminorm: 0.0,
        umax,
    }
}

/// Integrate to `t_end`, sampling diagnostics every `sample_every` accepted
/// steps. Stops early once the uniform fluctuation drops below the alignment
/// threshold; on a step error the trace up to the failure time is returned
/// with the error recorded.
pub fn run(
    initial: &AgentState,
    kernel: &KernelSpec,
    ctl: &StepControl,
    t_end: f64,
    sample_every: usize,
) -> Result<RunResult, AgentError> {
    run_with_hook(initial, kernel, ctl, t_end, sample_every, &mut |_| {})
}

/// [`run`] with a callback invoked at every sampled state (snapshot output).
pub fn run_with_hook(
    initial: &AgentState,
    kernel: &KernelSpec,
    ctl: &StepControl,
    t_end: f64,
    sample_every: usize,
    on_sample: &mut dyn FnMut(&AgentState),
) -> Result<RunResult, AgentError> {
    initial.validate()?;
    ctl.validate()?;
    kernel_compatible(initial, kernel)?;
    if !(t_end >= initial.t) {
        return Err(AgentError::InvalidState(format!(
            "t_end = {t_end} must not precede initial t = {}",
            initial.t
        )));
    }
    if initial.p <= 0.5 {
        initial.check_no_collision()?;
    }
    let sample_every = sample_every.max(1);
    let dv0 = uniform_fluctuation_agents(&initial.vel);
    let align_tol = if ctl.align_tol > 0.0 {
        ctl.align_tol
    } else {
        1e-9 * dv0
    };

    let meta = TraceMeta {
        mode: "agents".into(),
        family: kernel.family().name().into(),
        p: initial.p,
        beta: kernel.beta(),
        s: kernel.s(),
        mass: 1.0,
        size: initial.n(),
        dim: initial.dim,
        dt: ctl.dt,
    };

    let stepper = Stepper {
        p: initial.p,
        kernel,
        mode: ctl.collision_mode,
        method: ctl.method,
        guard: initial.p < 1.0,
    };

    let mut state = initial.clone();
    let mut y = Ode {
        pos: state.pos.clone(),
        vel: state.vel.clone(),
        ens: 0.0,
    };
    let mut samples = vec![make_sample(&state, 0.0)];
    on_sample(&state);
    let mut ens_at_last_sample = 0.0;
    let mut steps_since_sample = 0usize;
    let mut zero_pairs = 0u64;
    let mut prev = (state.t, dv0);
    let mut outcome = RunOutcome::Completed;
    let mut error = None;
    let budget = if ctl.max_steps > 0 {
        ctl.max_steps
    } else {
        1_000_000u64.max(200 * (((t_end - initial.t) / ctl.dt).ceil() as u64 + 1))
    };
    let mut steps = 0u64;

    while state.t < t_end {
        if steps >= budget {
            let e = AgentError::StepBudget { t: state.t, steps };
            outcome = RunOutcome::Failed {
                error: e.to_string(),
            };
            error = Some(e);
            break;
        }
        let dt_target = ctl.dt.min(t_end - state.t);
        match advance(
            &stepper,
            &y,
            state.t,
            dt_target,
            ctl.dt_min,
            &mut zero_pairs,
        ) {
            Ok((next, dt)) => {
                y = next;
                state.t += dt;
                state.pos.clone_from(&y.pos);
                state.vel.clone_from(&y.vel);
                steps_since_sample += 1;
                steps += 1;
            }
            Err(e) => {
                outcome = RunOutcome::Failed {
                    error: e.to_string(),
                };
                error = Some(e);
                break;
            }
        }

        let dv = uniform_fluctuation_agents(&state.vel);
        if dv < align_tol {
            let (t0, dv0_prev) = prev;
            let t_c = if dv0_prev > dv {
                t0 + (dv0_prev - align_tol) / (dv0_prev - dv) * (state.t - t0)
            } else {
                state.t
            };
            outcome = RunOutcome::AlignedEarly { t_c };
            break;
        }
        prev = (state.t, dv);

        if steps_since_sample == sample_every {
            samples.push(make_sample(&state, y.ens - ens_at_last_sample));
            on_sample(&state);
            ens_at_last_sample = y.ens;
            steps_since_sample = 0;
        }
    }

    if samples.last().map(|s| s.t) != Some(state.t) {
        samples.push(make_sample(&state, y.ens - ens_at_last_sample));
        on_sample(&state);
    }

    Ok(RunResult {
        trace: DiagnosticsTrace { meta, samples },
        outcome,
        velocity_collision_events: zero_pairs,
        error,
    })
}

/// Seeded generator for planar crowds: positions uniform in
/// `[0, box_side]^2`, velocities of equal speed `v0` equally spaced on the
/// circle (seeded phase). All pairwise velocity gaps stay comparable, so
/// `p < 1` runs contract uniformly instead of colliding pairwise.
pub fn ring_state(
    p: f64,
    n: usize,
    box_side: f64,
    v0: f64,
    seed: u64,
) -> Result<AgentState, AgentError> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for k in 0..n {
        let x = rng.random_range(0.0..box_side);
        let y = rng.random_range(0.0..box_side);
        pos.push([x, y, 0.0]);
        let th = phase + std::f64::consts::TAU * k as f64 / n as f64;
        vel.push([v0 * th.cos(), v0 * th.sin(), 0.0]);
    }
    AgentState::new(2, p, pos, vel)
}

/// Seeded generator: positions uniform in `[0, box_side]^dim`, velocities
/// uniform in the ball of radius `v0`.
pub fn random_state(
    dim: usize,
    p: f64,
    n: usize,
    box_side: f64,
    v0: f64,
    seed: u64,
) -> Result<AgentState, AgentError> {
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec::with_capacity(n);
    let mut vel = Vec::with_capacity(n);
    for _ in 0..n {
        let mut x = ZERO3;
        for c in x.iter_mut().take(dim) {
            *c = rng.random_range(0.0..box_side);
        }
        pos.push(x);
        // rejection-sample the unit ball
        let v = loop {
            let mut w = ZERO3;
            for c in w.iter_mut().take(dim) {
                *c = rng.random_range(-1.0..1.0);
            }
            if linalg::norm_sq(w) <= 1.0 {
                break linalg::scale(w, v0);
            }
        };
        vel.push(v);
    }
    AgentState::new(dim, p, pos, vel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn constant_kernel(dim: usize) -> KernelSpec {
        KernelSpec::heavy_tail(0.0, 1.0, 1.0, dim).unwrap()
    }

    fn two_agent(p: f64, v1: Vec3, v2: Vec3) -> AgentState {
        AgentState::new(2, p, vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]], vec![v1, v2]).unwrap()
    }

    #[test]
    fn aligned_state_is_equilibrium() {
        let st = AgentState::new(
            2,
            1.5,
            vec![[0.0, 0.0, 0.0], [1.0, 2.0, 0.0], [0.5, -1.0, 0.0]],
            vec![[0.5, 0.25, 0.0]; 3],
        )
        .unwrap();
        let acc = p_alignment_rhs(&st, &constant_kernel(2)).unwrap();
        assert!(acc.iter().all(|a| *a == [0.0, 0.0, 0.0]));
    }

    #[test]
    fn two_agent_rhs_p1() {
        // (1/2) * phi * (v2 - v1) by hand
        let st = two_agent(1.0, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let acc = p_alignment_rhs(&st, &constant_kernel(2)).unwrap();
        assert_eq!(acc[0], [-1.0, 0.0, 0.0]);
        assert_eq!(acc[1], [1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_agent_rhs_orientation_form() {
        // p = 1/2: a_1 = (1/2) (v2 - v1)/|v2 - v1|
        let st = two_agent(0.5, [2.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let acc = p_alignment_rhs(&st, &constant_kernel(2)).unwrap();
        assert!((acc[0][0] - (-0.5)).abs() < 1e-15);
        assert!((acc[1][0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_sums_to_zero() {
        let st = random_state(3, 1.25, 33, 2.0, 1.0, 7).unwrap();
        let kernel = KernelSpec::heavy_tail(0.5, 1.0, 1.0, 3).unwrap();
        let acc = p_alignment_rhs(&st, &kernel).unwrap();
        let mut total = [0.0f64; 3];
        let mut scale = 0.0f64;
        for a in &acc {
            total = linalg::add(total, *a);
            scale += linalg::norm(*a);
        }
        assert!(linalg::norm(total) <= 1e-13 * scale.max(1.0));
    }

    #[test]
    fn collision_error_for_small_p() {
        // equal velocities at distinct positions cannot be evaluated for p <= 1/2
        let st = two_agent(0.5, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        let err = p_alignment_rhs(&st, &constant_kernel(2)).unwrap_err();
        match err {
            AgentError::Collision { i, j, .. } => assert!((i, j) == (0, 1) || (i, j) == (1, 0)),
            other => panic!("expected collision, got {other}"),
        }

        // p >= 1 the pair force vanishes instead
        let st = two_agent(1.0, [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]);
        assert!(p_alignment_rhs(&st, &constant_kernel(2)).is_ok());
    }

    #[test]
    fn two_agent_exponential_decay() {
        // |v1 - v2|(t) = e^-t |dv0| for p = 1, phi = 1
        let st = two_agent(1.0, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let ctl = StepControl::new(0.01, TimeMethod::Rk4);
        let kernel = constant_kernel(2);
        let mut s = st;
        for _ in 0..100 {
            s = step(&s, &kernel, &ctl).unwrap();
        }
        let dv = linalg::norm(linalg::sub(s.vel[0], s.vel[1]));
        let expect = 2.0 * (-1.0f64).exp();
        assert!(
            (dv - expect).abs() < 1e-8 * expect,
            "dv = {dv}, expect = {expect}"
        );
    }

    #[test]
    fn two_agent_finite_time_alignment() {
        // p = 1/2: |dv|(t) = |dv0| - t, alignment at t_c = |dv0| = 2
        let st = two_agent(0.5, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let ctl = StepControl::new(0.01, TimeMethod::Rk4);
        let res = run(&st, &constant_kernel(2), &ctl, 5.0, 5).unwrap();
        match res.outcome {
            RunOutcome::AlignedEarly { t_c } => {
                assert!((t_c - 2.0).abs() <= 2.0 * ctl.dt, "t_c = {t_c}");
            }
            other => panic!("expected aligned-early, got {other:?}"),
        }
    }

    #[test]
    fn aligned_run_translates_positions() {
        let v = [0.5, -0.25, 0.0];
        let st =
            AgentState::new(2, 1.0, vec![[0.0, 0.0, 0.0], [1.0, 1.0, 0.0]], vec![v, v]).unwrap();
        let ctl = StepControl::new(0.25, TimeMethod::Rk4);
        let s = step(&st, &constant_kernel(2), &ctl).unwrap();
        for (x1, x0) in s.pos.iter().zip(&st.pos) {
            let expect = linalg::axpy(*x0, 0.25, v);
            assert!(linalg::norm(linalg::sub(*x1, expect)) < 1e-15);
        }
    }

    #[test]
    fn trivial_run_single_sample() {
        let st = two_agent(1.0, [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]);
        let res = run(
            &st,
            &constant_kernel(2),
            &StepControl::new(0.01, TimeMethod::Rk4),
            0.0,
            1,
        )
        .unwrap();
        assert_eq!(res.trace.samples.len(), 1);
        assert_eq!(res.outcome, RunOutcome::Completed);
    }

    #[test]
    fn momentum_conserved_on_seeded_run() {
        let st = random_state(2, 1.0, 64, 1.0, 1.0, 42).unwrap();
        let kernel = KernelSpec::heavy_tail(0.25, 1.0, 1.0, 2).unwrap();
        let res = run(
            &st,
            &kernel,
            &StepControl::new(0.01, TimeMethod::Rk4),
            5.0,
            10,
        )
        .unwrap();
        assert!(res.is_ok());
        let m0 = res.trace.samples[0].momentum;
        let scale = 1.0 + res.trace.samples[0].umax;
        for s in &res.trace.samples {
            let drift = linalg::norm(linalg::sub(s.momentum, m0)) / scale;
            assert!(drift < 1e-10, "drift = {drift}");
        }
    }

    #[test]
    fn galilean_shift_bitwise_on_exact_data() {
        // dyadic data + Euler keeps every operation exact, so the shifted run
        // must reproduce fluctuations bitwise
        let pos = vec![
            [0.0, 0.0, 0.0],
            [0.5, 0.25, 0.0],
            [1.0, 0.75, 0.0],
            [0.25, 1.5, 0.0],
        ];
        let vel = vec![
            [0.5, 0.0, 0.0],
            [-0.25, 0.5, 0.0],
            [0.125, -0.5, 0.0],
            [0.0, 0.25, 0.0],
        ];
        let w = [0.5, -0.25, 0.0];
        let shifted: Vec<Vec3> = vel.iter().map(|v| linalg::add(*v, w)).collect();
        let a = AgentState::new(2, 1.0, pos.clone(), vel).unwrap();
        let b = AgentState::new(2, 1.0, pos, shifted).unwrap();
        let kernel = constant_kernel(2);
        let mut ctl = StepControl::new(0.015625, TimeMethod::Euler);
        ctl.align_tol = 1e-300;
        let ra = run(&a, &kernel, &ctl, 0.125, 1).unwrap();
        let rb = run(&b, &kernel, &ctl, 0.125, 1).unwrap();
        assert_eq!(ra.trace.samples.len(), rb.trace.samples.len());
        for (sa, sb) in ra.trace.samples.iter().zip(&rb.trace.samples) {
            assert_eq!(sa.d_e, sb.d_e);
            assert_eq!(sa.d_v, sb.d_v);
            assert_eq!(sa.diameter, sb.diameter);
            for c in 0..2 {
                assert_eq!(sb.momentum[c], sa.momentum[c] + w[c]);
            }
        }
    }

    #[test]
    fn thread_count_does_not_change_bits() {
        let st = random_state(2, 1.25, 48, 1.0, 1.0, 11).unwrap();
        let kernel = KernelSpec::heavy_tail(0.5, 1.0, 1.0, 2).unwrap();
        let ctl = StepControl::new(0.01, TimeMethod::Rk4);
        let pool1 = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let r1 = pool1.install(|| run(&st, &kernel, &ctl, 1.0, 10).unwrap());
        let r4 = pool4.install(|| run(&st, &kernel, &ctl, 1.0, 10).unwrap());
        assert_eq!(r1.trace.to_csv(), r4.trace.to_csv());
    }
}
