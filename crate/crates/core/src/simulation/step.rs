use super::Scheme;
use crate::drift::{weight_from_log, DriftCost, DriftError, DriftMode, DriftPlan, Expansion, TailState};

/// Log-rates of one path. Index 0 is unused so that `z[i]` is rate `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathState {
    /// `Z(t, T_i)`, or the approximation of it under the Picard schemes.
    pub z: Vec<f64>,
    /// Picard proxies `Z^(1)(t, T_i)`, driven by the frozen drift.
    pub proxy: Vec<f64>,
    pub step: usize,
}

impl PathState {
    pub fn new(initial: &[f64]) -> Self {
        Self {
            z: initial.to_vec(),
            proxy: initial.to_vec(),
            step: 0,
        }
    }

    pub fn reset(&mut self, initial: &[f64]) {
        self.z.copy_from_slice(initial);
        self.proxy.copy_from_slice(initial);
        self.step = 0;
    }

    pub fn rate(&self, i: usize) -> f64 {
        self.z[i].exp()
    }
}

/// Inputs shared by every path on one step.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub plan: &'a DriftPlan,
    pub dt: f64,
    pub first_live: usize,
    /// `sum_segments lambda(s, T_i) dH` for each rate.
    pub shock: &'a [f64],
    pub accruals: &'a [f64],
}

impl StepContext<'_> {
    fn n(&self) -> usize {
        self.plan.n_rates()
    }

    fn weight(&self, z: f64, i: usize) -> f64 {
        weight_from_log(z, self.accruals[i])
    }
}

/// Scratch space reused across steps and paths.
#[derive(Debug, Clone)]
pub struct Workspace {
    tail: TailState,
    tail_b: TailState,
    drift: Vec<f64>,
    predicted: Vec<f64>,
}

impl Workspace {
    pub fn new(n_rates: usize) -> Self {
        Self {
            tail: TailState::new(n_rates),
            tail_b: TailState::new(n_rates),
            drift: vec![0.0; n_rates + 1],
            predicted: vec![0.0; n_rates + 1],
        }
    }
}

/// Advances `state` by one step with the given scheme and drift mode.
pub fn evolve_step(
    scheme: Scheme,
    mode: DriftMode,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    if mode == DriftMode::Frozen {
        evolve_step_frozen(Expansion::Full, ctx, state);
        return Ok(());
    }
    let e = mode.expansion();
    match scheme {
        Scheme::Euler => evolve_step_euler(e, ctx, state, work, cost),
        Scheme::Picard => evolve_step_picard(e, ctx, state, work, cost),
        Scheme::Pc => evolve_step_pc(e, ctx, state, work, cost),
        Scheme::Ipc => evolve_step_ipc(e, ctx, state, work, cost),
        Scheme::PicardPc => evolve_step_picard_pc(e, ctx, state, work, cost),
        Scheme::PicardIpc => evolve_step_picard_ipc(e, ctx, state, work, cost),
        Scheme::FrozenLongStep => {
            evolve_step_frozen(e, ctx, state);
            Ok(())
        }
    }
}

fn advance_proxy(e: Expansion, ctx: &StepContext, state: &mut PathState, i: usize) {
    state.proxy[i] += ctx.plan.frozen(e, i) * ctx.dt + ctx.shock[i];
}

/// Drift frozen at the initial curve.
pub fn evolve_step_frozen(e: Expansion, ctx: &StepContext, state: &mut PathState) {
    for i in (ctx.first_live..=ctx.n()).rev() {
        state.z[i] += ctx.plan.frozen(e, i) * ctx.dt + ctx.shock[i];
        advance_proxy(e, ctx, state, i);
    }
    state.step += 1;
}

/// Log-Euler: every drift reads the time-`t` state.
pub fn evolve_step_euler(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    let tail = &mut work.tail;
    tail.reset(ctx.plan, e);
    for i in (ctx.first_live..=ctx.n()).rev() {
        let b = ctx.plan.drift(i, e, tail, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.z[i], i));
        state.z[i] += b * ctx.dt + ctx.shock[i];
    }
    state.step += 1;
    Ok(())
}

/// Picard approximation: drifts read the proxies at `t`, which then move
/// with their deterministic drift.
pub fn evolve_step_picard(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    let tail = &mut work.tail;
    tail.reset(ctx.plan, e);
    for i in (ctx.first_live..=ctx.n()).rev() {
        let b = ctx.plan.drift(i, e, tail, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.proxy[i], i));
        state.z[i] += b * ctx.dt + ctx.shock[i];
        advance_proxy(e, ctx, state, i);
    }
    state.step += 1;
    Ok(())
}

/// Picard step updating the rates in an arbitrary order. Each drift is
/// rebuilt from the time-`t` proxies, so the result does not depend on
/// `order`.
pub fn evolve_step_picard_ordered(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
    order: &[usize],
) -> Result<(), DriftError> {
    let n = ctx.n();
    let tail = &mut work.tail;
    for &i in order {
        tail.reset(ctx.plan, e);
        for l in (i + 1..=n).rev() {
            tail.push(ctx.plan, l, ctx.weight(state.proxy[l], l));
        }
        let b = ctx.plan.drift(i, e, tail, cost)?;
        state.z[i] += b * ctx.dt + ctx.shock[i];
    }
    for i in (ctx.first_live..=n).rev() {
        advance_proxy(e, ctx, state, i);
    }
    state.step += 1;
    Ok(())
}

/// Predictor-corrector: an Euler predictor, then the average of the
/// drifts at the current and predicted states.
pub fn evolve_step_pc(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    let n = ctx.n();
    let Workspace {
        tail, drift, predicted, ..
    } = work;
    tail.reset(ctx.plan, e);
    for i in (ctx.first_live..=n).rev() {
        drift[i] = ctx.plan.drift(i, e, tail, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.z[i], i));
        predicted[i] = state.z[i] + drift[i] * ctx.dt + ctx.shock[i];
    }
    tail.reset(ctx.plan, e);
    for i in (ctx.first_live..=n).rev() {
        let b = ctx.plan.drift(i, e, tail, cost)?;
        tail.push(ctx.plan, i, ctx.weight(predicted[i], i));
        state.z[i] += 0.5 * (drift[i] + b) * ctx.dt + ctx.shock[i];
    }
    state.step += 1;
    Ok(())
}

/// Iterative predictor-corrector: rates are corrected from `N` downwards
/// and each end-of-step drift reads the already corrected later rates.
pub fn evolve_step_ipc(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    let Workspace { tail, tail_b, .. } = work;
    tail.reset(ctx.plan, e);
    tail_b.reset(ctx.plan, e);
    for i in (ctx.first_live..=ctx.n()).rev() {
        let b0 = ctx.plan.drift(i, e, tail, cost)?;
        let b1 = ctx.plan.drift(i, e, tail_b, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.z[i], i));
        state.z[i] += 0.5 * (b0 + b1) * ctx.dt + ctx.shock[i];
        tail_b.push(ctx.plan, i, ctx.weight(state.z[i], i));
    }
    state.step += 1;
    Ok(())
}

/// IPC over an explicit rate order, which must be strictly decreasing.
pub fn evolve_step_ipc_ordered(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
    order: &[usize],
) -> Result<(), DriftError> {
    debug_assert!(
        order.windows(2).all(|w| w[0] > w[1]),
        "IPC must correct rates in decreasing order"
    );
    let n = ctx.n();
    let Workspace {
        tail, tail_b, predicted, ..
    } = work;
    predicted.copy_from_slice(&state.z);
    for &i in order {
        tail.reset(ctx.plan, e);
        tail_b.reset(ctx.plan, e);
        for l in (i + 1..=n).rev() {
            tail.push(ctx.plan, l, ctx.weight(predicted[l], l));
            tail_b.push(ctx.plan, l, ctx.weight(state.z[l], l));
        }
        let b0 = ctx.plan.drift(i, e, tail, cost)?;
        let b1 = ctx.plan.drift(i, e, tail_b, cost)?;
        state.z[i] += 0.5 * (b0 + b1) * ctx.dt + ctx.shock[i];
    }
    state.step += 1;
    Ok(())
}

/// Predictor-corrector on the Picard approximation: the drift average uses
/// the proxies at both ends of the step.
pub fn evolve_step_picard_pc(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    let n = ctx.n();
    let Workspace { tail, drift, .. } = work;
    tail.reset(ctx.plan, e);
    for i in (ctx.first_live..=n).rev() {
        drift[i] = ctx.plan.drift(i, e, tail, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.proxy[i], i));
        advance_proxy(e, ctx, state, i);
    }
    tail.reset(ctx.plan, e);
    for i in (ctx.first_live..=n).rev() {
        let b = ctx.plan.drift(i, e, tail, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.proxy[i], i));
        state.z[i] += 0.5 * (drift[i] + b) * ctx.dt + ctx.shock[i];
    }
    state.step += 1;
    Ok(())
}

/// Iterative predictor-corrector on the Picard approximation. The
/// corrected later rates seen by each drift are proxies, so this
/// coincides with [`evolve_step_picard_pc`].
pub fn evolve_step_picard_ipc(
    e: Expansion,
    ctx: &StepContext,
    state: &mut PathState,
    work: &mut Workspace,
    cost: &mut DriftCost,
) -> Result<(), DriftError> {
    let Workspace { tail, tail_b, .. } = work;
    tail.reset(ctx.plan, e);
    tail_b.reset(ctx.plan, e);
    for i in (ctx.first_live..=ctx.n()).rev() {
        let b0 = ctx.plan.drift(i, e, tail, cost)?;
        let b1 = ctx.plan.drift(i, e, tail_b, cost)?;
        tail.push(ctx.plan, i, ctx.weight(state.proxy[i], i));
        advance_proxy(e, ctx, state, i);
        tail_b.push(ctx.plan, i, ctx.weight(state.proxy[i], i));
        state.z[i] += 0.5 * (b0 + b1) * ctx.dt + ctx.shock[i];
    }
    state.step += 1;
    Ok(())
}
