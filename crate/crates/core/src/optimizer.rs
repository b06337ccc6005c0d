//! Projected nonlinear conjugate gradients with Hager-Zhang β and Armijo
//! backtracking on projected trial points.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adjoint::{sigma_degree, Objective, ObjectiveState};
use crate::error::{Error, Result};
use crate::fem::{FunctionSpace, LinearSolver, ScalarField};
use crate::forward::PowerDensity;

/// A smooth objective on coefficient vectors with a fixed inner product.
pub trait Problem {
    type State;

    fn evaluate(&self, x: &[f64]) -> Result<(f64, Self::State)>;

    /// Riesz representative of the derivative in [`Problem::inner`].
    fn gradient(&self, x: &[f64], state: &Self::State) -> Result<Vec<f64>>;

    fn inner(&self, a: &[f64], b: &[f64]) -> f64;

    fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }
}

impl Problem for Objective {
    type State = ObjectiveState;

    fn evaluate(&self, x: &[f64]) -> Result<(f64, ObjectiveState)> {
        let sigma = ScalarField::new(self.sigma_space().clone(), x.to_vec())?;
        let state = Objective::evaluate(self, &sigma)?;
        Ok((state.cost, state))
    }

    fn gradient(&self, _x: &[f64], state: &ObjectiveState) -> Result<Vec<f64>> {
        Ok(Objective::gradient(self, state)?.riesz().coeffs().to_vec())
    }

    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        Objective::inner(self, a, b)
    }
}

/// Box constraints applied dof-wise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Bounds> {
        if !(lower < upper) {
            return Err(Error::InvalidParameter(format!(
                "lower bound {lower} must be below upper bound {upper}"
            )));
        }
        Ok(Bounds { lower, upper })
    }

    pub fn unbounded() -> Bounds {
        Bounds {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    /// Fraction of entries sitting on either bound.
    pub fn active_fraction(&self, x: &[f64]) -> f64 {
        if x.is_empty() {
            return 0.0;
        }
        let active = x.iter().filter(|&&v| v <= self.lower || v >= self.upper).count();
        active as f64 / x.len() as f64
    }
}

/// P_L[x] = max(l, min(u, x)) entry-wise.
pub fn project_box(x: &[f64], bounds: Bounds) -> Vec<f64> {
    x.iter().map(|&v| v.clamp(bounds.lower, bounds.upper)).collect()
}

/// Dof-wise clamp of a field.
pub fn project_box_field(sigma: &ScalarField, lower: f64, upper: f64) -> Result<ScalarField> {
    let bounds = Bounds::new(lower, upper)?;
    sigma.with_coeffs(project_box(sigma.coeffs(), bounds))
}

/// Result of the Hager-Zhang formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Beta {
    Value(f64),
    /// ⟨d, y⟩ too small relative to ‖d‖‖y‖; use β = 0.
    Restart,
}

impl Beta {
    pub fn value(self) -> f64 {
        match self {
            Beta::Value(b) => b,
            Beta::Restart => 0.0,
        }
    }
}

/// β = (1/⟨d,y⟩)⟨y − 2d‖y‖²/⟨d,y⟩, g₊⟩ with y = g₊ − g.
pub fn hager_zhang_beta(
    g: &[f64],
    g_next: &[f64],
    d: &[f64],
    inner: impl Fn(&[f64], &[f64]) -> f64,
    restart_threshold: f64,
) -> Beta {
    let y: Vec<f64> = g_next.iter().zip(g).map(|(a, b)| a - b).collect();
    let dy = inner(d, &y);
    let yy = inner(&y, &y);
    let dd = inner(d, d);
    if dy.abs() <= restart_threshold * (dd.max(0.0) * yy.max(0.0)).sqrt() || dy == 0.0 {
        return Beta::Restart;
    }
    let yg = inner(&y, g_next);
    let dg = inner(d, g_next);
    Beta::Value((yg - 2.0 * yy / dy * dg) / dy)
}

/// Sufficient-decrease parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    pub delta: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams {
            delta: 0.1,
            backtrack: 0.5,
            max_backtracks: 40,
        }
    }
}

/// Accepted line-search step.
#[derive(Debug)]
pub struct LineSearchStep<S> {
    pub alpha: f64,
    pub x: Vec<f64>,
    pub cost: f64,
    pub state: S,
    pub backtracks: usize,
}

/// Backtracks α = α_init·ρʲ until Ĵ(P[x + αd]) ≤ Ĵ(x) + δα⟨g, d⟩.
#[allow(clippy::too_many_arguments)]
pub fn armijo_search<P: Problem>(
    problem: &P,
    x: &[f64],
    cost: f64,
    g: &[f64],
    d: &[f64],
    alpha_init: f64,
    params: &ArmijoParams,
    bounds: Bounds,
) -> Result<LineSearchStep<P::State>> {
    let slope = problem.inner(g, d);
    if !(slope < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "line search needs a descent direction, got slope {slope}"
        )));
    }
    let mut alpha = alpha_init;
    for backtracks in 0..=params.max_backtracks {
        let trial: Vec<f64> = x
            .iter()
            .zip(d)
            .map(|(xi, di)| (xi + alpha * di).clamp(bounds.lower, bounds.upper))
            .collect();
        let (trial_cost, state) = problem.evaluate(&trial)?;
        if trial_cost <= cost + params.delta * alpha * slope {
            return Ok(LineSearchStep {
                alpha,
                x: trial,
                cost: trial_cost,
                state,
                backtracks,
            });
        }
        alpha *= params.backtrack;
    }
    Err(Error::LineSearch {
        backtracks: params.max_backtracks,
    })
}

/// Settings of a reconstruction run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlcgConfig {
    pub alpha: f64,
    pub s: u8,
    pub sigma_l: f64,
    pub sigma_u: f64,
    pub sigma_b: f64,
    pub sigma_init: f64,
    pub armijo_delta: f64,
    pub armijo_backtrack: f64,
    pub max_backtracks: usize,
    pub alpha0: f64,
    pub bb_warm_start: bool,
    pub k_max: usize,
    pub tol: f64,
    pub restart_threshold: f64,
    pub solver: LinearSolver,
}

impl Default for NlcgConfig {
    fn default() -> Self {
        NlcgConfig {
            alpha: 0.1,
            s: 1,
            sigma_l: 0.01,
            sigma_u: 4.0,
            sigma_b: 1.0,
            sigma_init: 1.0,
            armijo_delta: 0.1,
            armijo_backtrack: 0.5,
            max_backtracks: 40,
            alpha0: 1.0,
            bb_warm_start: true,
            k_max: 200,
            tol: 1e-4,
            restart_threshold: 1e-12,
            solver: LinearSolver::default(),
        }
    }
}

impl NlcgConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be finite and >= 0, got {}", self.alpha));
        }
        sigma_degree(self.s)?;
        if !(0.0 < self.sigma_l && self.sigma_l < self.sigma_u && self.sigma_u.is_finite()) {
            return bad(format!(
                "bounds must satisfy 0 < sigma_l < sigma_u, got [{}, {}]",
                self.sigma_l, self.sigma_u
            ));
        }
        if !(self.armijo_delta > 0.0 && self.armijo_delta < 0.5) {
            return bad(format!("armijo_delta must lie in (0, 1/2), got {}", self.armijo_delta));
        }
        if !(self.armijo_backtrack > 0.0 && self.armijo_backtrack < 1.0) {
            return bad(format!("armijo_backtrack must lie in (0, 1), got {}", self.armijo_backtrack));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return bad(format!("alpha0 must be positive, got {}", self.alpha0));
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.restart_threshold >= 0.0) {
            return bad(format!("restart_threshold must be >= 0, got {}", self.restart_threshold));
        }
        for (name, v) in [("sigma_b", self.sigma_b), ("sigma_init", self.sigma_init)] {
            if !(self.sigma_l..=self.sigma_u).contains(&v) {
                return bad(format!("{name} = {v} lies outside [sigma_l, sigma_u]"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.sigma_l,
            upper: self.sigma_u,
        }
    }

    pub fn armijo(&self) -> ArmijoParams {
        ArmijoParams {
            delta: self.armijo_delta,
            backtrack: self.armijo_backtrack,
            max_backtracks: self.max_backtracks,
        }
    }
}

/// One accepted NLCG step: values refer to the new iterate σ_{k+1}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub beta: f64,
    pub backtracks: usize,
    pub active_frac: f64,
    /// ⟨g_k, d_k⟩ of the direction searched in this step.
    pub slope: f64,
    /// The direction searched was −g_k because of a restart.
    pub restarted: bool,
    /// ‖σ_{k+1} − σ_k‖_X
    pub step_norm: f64,
}

pub const HISTORY_CSV_HEADER: &str = "k,cost,grad_norm,step,beta,backtracks,active_frac";

impl IterationRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{},{:.6}",
            self.k, self.cost, self.grad_norm, self.step, self.beta, self.backtracks, self.active_frac
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

/// Output of [`minimize`].
#[derive(Debug, Clone)]
pub struct NlcgOutcome {
    pub x: Vec<f64>,
    pub cost: f64,
    pub gradient: Vec<f64>,
    pub initial_cost: f64,
    pub initial_grad_norm: f64,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    /// ‖x − P[x − g]‖_X at the returned point.
    pub projected_gradient_norm: f64,
}

/// Options of the generic driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NlcgOptions {
    pub bounds: Bounds,
    pub armijo: ArmijoParams,
    pub alpha0: f64,
    pub bb_warm_start: bool,
    pub k_max: usize,
    pub tol: f64,
    pub restart_threshold: f64,
}

impl From<&NlcgConfig> for NlcgOptions {
    fn from(c: &NlcgConfig) -> Self {
        NlcgOptions {
            bounds: c.bounds(),
            armijo: c.armijo(),
            alpha0: c.alpha0,
            bb_warm_start: c.bb_warm_start,
            k_max: c.k_max,
            tol: c.tol,
            restart_threshold: c.restart_threshold,
        }
    }
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Projected NLCG from `x0`. A line-search failure ends the run with the
/// last accepted iterate and [`Termination::LineSearchFailure`].
pub fn minimize<P: Problem>(problem: &P, x0: &[f64], opts: &NlcgOptions) -> Result<NlcgOutcome> {
    let bounds = opts.bounds;
    let mut x = project_box(x0, bounds);
    let (mut cost, mut state) = problem.evaluate(&x)?;
    let mut g = problem.gradient(&x, &state)?;
    let initial_cost = cost;
    let initial_grad_norm = problem.norm(&g);
    let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut history = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut last_s: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut beta_restart = false;

    for k in 0..opts.k_max {
        let mut slope = problem.inner(&g, &d);
        let mut restarted = beta_restart;
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -problem.inner(&g, &g);
            restarted = true;
            if !(slope < 0.0) {
                termination = Termination::Converged;
                break;
            }
        }
        let alpha_init = match (&last_s, opts.bb_warm_start) {
            (Some((s, y)), true) => {
                let bb = problem.inner(s, s) / problem.inner(s, y);
                if bb.is_finite() && bb > 0.0 {
                    bb
                } else {
                    opts.alpha0
                }
            }
            _ => opts.alpha0,
        };
        let step = match armijo_search(problem, &x, cost, &g, &d, alpha_init, &opts.armijo, bounds) {
            Ok(step) => step,
            Err(Error::LineSearch { .. }) => {
                termination = Termination::LineSearchFailure;
                break;
            }
            Err(e) => return Err(e),
        };
        let g_next = problem.gradient(&step.x, &step.state)?;
        let s_vec = sub(&step.x, &x);
        let step_norm = problem.norm(&s_vec);
        let beta = hager_zhang_beta(&g, &g_next, &d, |a, b| problem.inner(a, b), opts.restart_threshold);
        let b = beta.value();
        let d_next: Vec<f64> = g_next.iter().zip(&d).map(|(gn, di)| -gn + b * di).collect();
        history.push(IterationRecord {
            k,
            cost: step.cost,
            grad_norm: problem.norm(&g_next),
            step: step.alpha,
            beta: b,
            backtracks: step.backtracks,
            active_frac: bounds.active_fraction(&step.x),
            slope,
            restarted,
            step_norm,
        });
        beta_restart = beta == Beta::Restart;
        last_s = Some((s_vec, sub(&g_next, &g)));
        x = step.x;
        cost = step.cost;
        state = step.state;
        g = g_next;
        d = d_next;
        if step_norm < opts.tol {
            termination = Termination::Converged;
            break;
        }
    }
    drop(state);
    let pg = sub(&x, &project_box(&sub(&x, &g), bounds));
    Ok(NlcgOutcome {
        projected_gradient_norm: problem.norm(&pg),
        x,
        cost,
        gradient: g,
        initial_cost,
        initial_grad_norm,
        history,
        termination,
    })
}

/// Reconstructed conductivity with its iteration history.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub sigma: ScalarField,
    pub history: Vec<IterationRecord>,
    pub termination: Termination,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub initial_grad_norm: f64,
    pub final_grad_norm: f64,
    pub projected_gradient_norm: f64,
}

/// Reconstruct σ from power-density data.
pub fn run_nlcg(data: &PowerDensity, config: &NlcgConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    let objective = Objective::new(data, config.alpha, config.s, config.sigma_b, config.solver)?;
    run_nlcg_with(&objective, config)
}

/// σ ≡ sigma_init, with σ_b on the boundary in the H¹ setting where σ − σ_b
/// vanishes there.
pub fn initial_guess(space: &Arc<FunctionSpace>, config: &NlcgConfig) -> ScalarField {
    let mut x0 = vec![config.sigma_init; space.num_dofs()];
    if config.s == 1 {
        for &d in space.boundary_dofs() {
            x0[d] = config.sigma_b;
        }
    }
    ScalarField::new(space.clone(), x0).expect("length matches the space")
}

/// Reconstruct σ with a prepared objective, starting from [`initial_guess`].
pub fn run_nlcg_with(objective: &Objective, config: &NlcgConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    let space = objective.sigma_space().clone();
    let x0 = initial_guess(&space, config).into_coeffs();
    let out = minimize(objective, &x0, &NlcgOptions::from(config))?;
    Ok(ReconstructionResult {
        sigma: ScalarField::new(space, out.x)?,
        final_grad_norm: objective.gram().inner_coeffs(&out.gradient, &out.gradient, objective.kind()).sqrt(),
        history: out.history,
        termination: out.termination,
        initial_cost: out.initial_cost,
        final_cost: out.cost,
        initial_grad_norm: out.initial_grad_norm,
        projected_gradient_norm: out.projected_gradient_norm,
    })
}
