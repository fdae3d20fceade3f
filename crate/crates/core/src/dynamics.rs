//! Saturated PI closed loop: saturation primitives, Hamiltonians, vector
//! fields and the Lyapunov function `V = 1^T S(-B^T dH(x) - x_c) + H(x)`.
//!
//! Everything here is binary64; exact arithmetic stays in the verdict modules.

use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::network::{solve_matching, ConstrainedNetwork};
use crate::rational::{to_f64, vec_to_f64, Q};

pub fn sat_scalar(v: f64, lower: f64, upper: f64) -> f64 {
    v.max(lower).min(upper)
}

/// Elementwise clamp.
pub fn sat(v: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&a, &b))| sat_scalar(v, a, b))
        .collect()
}

/// `int_0^v sat(y; a, b) dy`, closed form per piece.
pub fn sat_integral_scalar(v: f64, a: f64, b: f64) -> f64 {
    antiderivative(v, a, b) - antiderivative(0.0, a, b)
}

/// Continuous antiderivative of `sat(.; a, b)` that equals `y^2 / 2` on `[a, b]`.
fn antiderivative(y: f64, a: f64, b: f64) -> f64 {
    if y < a {
        a * y - 0.5 * a * a
    } else if y > b {
        b * y - 0.5 * b * b
    } else {
        0.5 * y * y
    }
}

pub fn sat_integral(v: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(lower.iter().zip(upper))
        .map(|(&v, (&a, &b))| sat_integral_scalar(v, a, b))
        .collect()
}

/// Storage function on the vertices. Implementations must be pure.
pub trait Hamiltonian: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// `v^T Hess H(x) v`
    fn hessian_form(&self, x: &[f64], v: &[f64]) -> f64;
    /// Infimum of `H`, used for the Lyapunov lower bound.
    fn infimum(&self) -> f64 {
        0.0
    }
}

/// `H(x) = sum q_i x_i^2 / 2` with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    weights: Vec<Q>,
    weights_f64: Vec<f64>,
}

impl Quadratic {
    pub fn new(weights: Vec<Q>) -> Result<Self> {
        if let Some(i) = weights.iter().position(|w| *w <= Q::from_integer(0)) {
            return Err(Error::Validation(format!(
                "Hamiltonian weight {} must be positive",
                i + 1
            )));
        }
        let weights_f64 = vec_to_f64(&weights);
        Ok(Self {
            weights,
            weights_f64,
        })
    }

    pub fn unit(n: usize) -> Self {
        Self::new(vec![Q::from_integer(1); n]).expect("unit weights are positive")
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }
}

impl Hamiltonian for Quadratic {
    fn value(&self, x: &[f64]) -> f64 {
        0.5 * x
            .iter()
            .zip(&self.weights_f64)
            .map(|(x, q)| q * x * x)
            .sum::<f64>()
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for ((o, x), q) in out.iter_mut().zip(x).zip(&self.weights_f64) {
            *o = q * x;
        }
    }

    fn hessian_form(&self, _x: &[f64], v: &[f64]) -> f64 {
        v.iter().zip(&self.weights_f64).map(|(v, q)| q * v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub x: Vec<f64>,
    pub xc: Vec<f64>,
    pub t: f64,
}

impl SimState {
    pub fn new(x: Vec<f64>, xc: Vec<f64>) -> Self {
        Self { x, xc, t: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.xc).all(|v| v.is_finite())
    }
}

/// Steering target with the same total storage as the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibleTarget {
    x_star: Vec<f64>,
}

pub const ADMISSIBLE_TOL: f64 = 1e-12;

impl AdmissibleTarget {
    pub fn new(x_star: Vec<f64>, x0: &[f64]) -> Result<Self> {
        let target_total: f64 = x_star.iter().sum();
        let initial_total: f64 = x0.iter().sum();
        if (target_total - initial_total).abs() > ADMISSIBLE_TOL * (1.0 + initial_total.abs()) {
            return Err(Error::InadmissibleTarget {
                target_total,
                initial_total,
            });
        }
        Ok(Self { x_star })
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }
}

/// Which closed loop to evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    Consensus,
    /// Adds the terminal injection `E d` to `dx`.
    Disturbed,
    /// Gradient taken at `x - x_star`.
    Steering(AdmissibleTarget),
}

/// Floating-point view of a network for simulation.
#[derive(Debug, Clone)]
pub struct FlowModel {
    graph: DirectedGraph,
    lower: Vec<f64>,
    upper: Vec<f64>,
    injection: Option<Vec<f64>>,
    matching: Option<Vec<f64>>,
}

impl FlowModel {
    /// Accepts any interval bounds; terminals are kept for `Mode::Disturbed`,
    /// with the matching solution (when one exists) used by the Lyapunov function.
    pub fn new(net: &ConstrainedNetwork) -> Self {
        let n = net.vertex_count();
        let injection = net.terminals.as_ref().map(|t| t.injection_f64(n));
        let matching = net
            .terminals
            .as_ref()
            .and_then(|_| solve_matching(net).ok())
            .map(|x| vec_to_f64(&x));
        Self {
            graph: net.graph.clone(),
            lower: vec_to_f64(&net.lower),
            upper: vec_to_f64(&net.upper),
            injection,
            matching,
        }
    }

    pub fn graph(&self) -> &DirectedGraph {
        &self.graph
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn injection(&self) -> Option<&[f64]> {
        self.injection.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            grad: vec![0.0; self.vertex_count()],
            shifted: vec![0.0; self.vertex_count()],
            flow: vec![0.0; self.edge_count()],
            regime: vec![0; self.edge_count()],
        }
    }

    /// Gradient of `H` at the mode's evaluation point.
    pub(crate) fn gradient_into(&self, h: &dyn Hamiltonian, x: &[f64], mode: &Mode, ws: &mut Workspace) {
        match mode {
            Mode::Steering(target) => {
                for ((s, x), t) in ws.shifted.iter_mut().zip(x).zip(target.x_star()) {
                    *s = x - t;
                }
                h.gradient(&ws.shifted, &mut ws.grad);
            }
            _ => h.gradient(x, &mut ws.grad),
        }
    }

    /// `dx = B sat(-B^T g - x_c) [+ E d]`, `dxc = B^T g`.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn rhs_into(
        &self,
        h: &dyn Hamiltonian,
        x: &[f64],
        xc: &[f64],
        mode: &Mode,
        ws: &mut Workspace,
        dx: &mut [f64],
        dxc: &mut [f64],
    ) {
        self.gradient_into(h, x, mode, ws);
        self.graph.edge_differences(&ws.grad, dxc);
        for (k, flow) in ws.flow.iter_mut().enumerate() {
            let arg = -dxc[k] - xc[k];
            ws.regime[k] = if arg < self.lower[k] {
                -1
            } else if arg > self.upper[k] {
                1
            } else {
                0
            };
            *flow = sat_scalar(arg, self.lower[k], self.upper[k]);
        }
        self.graph.divergence_f64(&ws.flow, dx);
        if let (Mode::Disturbed, Some(inj)) = (mode, &self.injection) {
            for (d, i) in dx.iter_mut().zip(inj) {
                *d += i;
            }
        }
    }

    /// Lyapunov function of the mode's closed loop. In disturbed mode it is
    /// evaluated on the absorbed system (shifted bounds, translated `x_c`).
    pub fn lyapunov(&self, h: &dyn Hamiltonian, state: &SimState, mode: &Mode) -> f64 {
        self.lyapunov_in(h, &state.x, &state.xc, mode, &mut self.workspace())
    }

    pub(crate) fn lyapunov_in(&self, h: &dyn Hamiltonian, x: &[f64], xc: &[f64], mode: &Mode, ws: &mut Workspace) -> f64 {
        self.gradient_into(h, x, mode, ws);
        let shift = match mode {
            Mode::Disturbed => self.matching.as_deref(),
            _ => None,
        };
        let mut total = 0.0;
        for (k, e) in self.graph.edges().iter().enumerate() {
            let s = shift.map_or(0.0, |s| s[k]);
            let arg = -(ws.grad[e.head] - ws.grad[e.tail]) - (xc[k] - s);
            total += sat_integral_scalar(arg, self.lower[k] + s, self.upper[k] + s);
        }
        let h_value = match mode {
            Mode::Steering(_) => h.value(&ws.shifted),
            _ => h.value(x),
        };
        total + h_value
    }

    /// `||B^T dH||_inf` at the mode's evaluation point.
    pub fn gradient_disagreement(&self, h: &dyn Hamiltonian, x: &[f64], mode: &Mode) -> f64 {
        let mut ws = self.workspace();
        self.gradient_into(h, x, mode, &mut ws);
        self.graph
            .edges()
            .iter()
            .map(|e| (ws.grad[e.head] - ws.grad[e.tail]).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) struct Workspace {
    grad: Vec<f64>,
    shifted: Vec<f64>,
    flow: Vec<f64>,
    /// Saturation side of each edge at the last rhs evaluation.
    pub(crate) regime: Vec<i8>,
}

fn rhs(model: &FlowModel, h: &dyn Hamiltonian, state: &SimState, mode: &Mode) -> (Vec<f64>, Vec<f64>) {
    let mut ws = model.workspace();
    let mut dx = vec![0.0; model.vertex_count()];
    let mut dxc = vec![0.0; model.edge_count()];
    model.rhs_into(h, &state.x, &state.xc, mode, &mut ws, &mut dx, &mut dxc);
    (dx, dxc)
}

/// Undisturbed saturated PI loop.
pub fn closed_loop_rhs(model: &FlowModel, h: &dyn Hamiltonian, state: &SimState) -> (Vec<f64>, Vec<f64>) {
    rhs(model, h, state, &Mode::Consensus)
}

/// Saturated PI loop with the constant terminal injection `E d`.
pub fn closed_loop_rhs_disturbed(
    model: &FlowModel,
    h: &dyn Hamiltonian,
    state: &SimState,
) -> (Vec<f64>, Vec<f64>) {
    rhs(model, h, state, &Mode::Disturbed)
}

/// Loop driving `x` to an admissible target instead of consensus.
pub fn steering_rhs(
    model: &FlowModel,
    h: &dyn Hamiltonian,
    state: &SimState,
    target: &AdmissibleTarget,
) -> (Vec<f64>, Vec<f64>) {
    rhs(model, h, state, &Mode::Steering(target.clone()))
}

pub fn lyapunov(model: &FlowModel, h: &dyn Hamiltonian, state: &SimState) -> f64 {
    model.lyapunov(h, state, &Mode::Consensus)
}

/// Lower bound on `V` along any trajectory started at `xc0`, from a feasible
/// circulation `z`: convexity of `S` with `S' = sat` gives
/// `S(w) >= S(z) + z (w - z)` for `z` inside the bounds, and `z^T w` is
/// conserved because `z^T B^T = 0` and `z^T x_c` is invariant.
pub fn lyapunov_lower_bound(model: &FlowModel, h: &dyn Hamiltonian, z: &[Q], xc0: &[f64]) -> f64 {
    let mut bound = h.infimum();
    for k in 0..model.edge_count() {
        let zk = to_f64(&z[k]);
        bound += sat_integral_scalar(zk, model.lower[k], model.upper[k]) - zk * zk - zk * xc0[k];
    }
    bound
}

/// `||B^T dH(x)||_inf <= tol` and `||B sat(-x_c)||_inf <= tol`.
pub fn equilibrium_membership(model: &FlowModel, h: &dyn Hamiltonian, state: &SimState, tol: f64) -> bool {
    model.is_equilibrium(h, state, &Mode::Consensus, tol)
}

impl FlowModel {
    /// Equilibrium test for the mode's closed loop: the gradient agrees
    /// across every edge and the stationary edge flows balance every vertex
    /// (including the injection in disturbed mode).
    pub fn is_equilibrium(&self, h: &dyn Hamiltonian, state: &SimState, mode: &Mode, tol: f64) -> bool {
        let disagreement = self.gradient_disagreement(h, &state.x, mode);
        let flows: Vec<f64> = state
            .xc
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(xc, (&a, &b))| sat_scalar(-xc, a, b))
            .collect();
        let mut div = vec![0.0; self.vertex_count()];
        self.graph.divergence_f64(&flows, &mut div);
        if let (Mode::Disturbed, Some(inj)) = (mode, &self.injection) {
            div.iter_mut().zip(inj).for_each(|(d, i)| *d += i);
        }
        let imbalance = div.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        disagreement <= tol && imbalance <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    fn triangle(bounds: [(i128, i128); 3]) -> ConstrainedNetwork {
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)]).unwrap();
        ConstrainedNetwork::new(
            g,
            bounds.iter().map(|b| q(b.0)).collect(),
            bounds.iter().map(|b| q(b.1)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn sat_examples() {
        assert_eq!(sat_scalar(2.0, 0.0, 1.0), 1.0);
        assert_eq!(sat_scalar(0.5, 0.0, 1.0), 0.5);
        assert_eq!(sat_scalar(-1.0, 1.0, 2.0), 1.0);
        assert_eq!(sat(&[2.0, -3.0], &[0.0, -1.0], &[1.0, 1.0]), vec![1.0, -1.0]);
    }

    #[test]
    fn sat_integral_examples() {
        for (a, b) in [(0.0, 1.0), (2.0, 3.0), (-3.0, -1.0), (-1.0, 4.0)] {
            assert_eq!(sat_integral_scalar(0.0, a, b), 0.0);
        }
        assert_eq!(sat_integral_scalar(2.0, 0.0, 1.0), 1.5);
        assert_eq!(sat_integral_scalar(1.0, 2.0, 3.0), 2.0);
        // Below an all-negative interval the integrand is the constant upper bound.
        assert_eq!(sat_integral_scalar(-1.0, -3.0, -2.0), 2.0);
    }

    #[test]
    fn sat_integral_matches_quadrature() {
        let cases = [(0.7, -0.5, 0.5), (-2.5, 0.0, 1.0), (3.0, 1.0, 2.0), (-1.2, -2.0, -0.5)];
        for (v, a, b) in cases {
            let steps = 200_000;
            let h = v / steps as f64;
            let mid: f64 = (0..steps)
                .map(|i| sat_scalar((i as f64 + 0.5) * h, a, b) * h)
                .sum();
            assert!((mid - sat_integral_scalar(v, a, b)).abs() < 1e-9, "{v} {a} {b}");
        }
    }

    #[test]
    fn consensus_equilibrium_is_still() {
        let net = triangle([(0, 1); 3]);
        let model = FlowModel::new(&net);
        let h = Quadratic::unit(3);
        let state = SimState::new(vec![0.7; 3], vec![-0.5; 3]);
        let (dx, dxc) = closed_loop_rhs(&model, &h, &state);
        assert!(dx.iter().chain(&dxc).all(|v| *v == 0.0));
        assert!(equilibrium_membership(&model, &h, &state, 0.0));
    }

    #[test]
    fn frozen_counterexample_state() {
        let net = triangle([(0, 1), (0, 1), (1, 2)]);
        let model = FlowModel::new(&net);
        let h = Quadratic::unit(3);
        let state = SimState::new(vec![2.0, 1.0, 0.0], vec![-1.0; 3]);
        let (dx, dxc) = closed_loop_rhs(&model, &h, &state);
        assert_eq!(dx, vec![0.0; 3]);
        assert_eq!(dxc, vec![-1.0, -1.0, 2.0]);
        assert!(!equilibrium_membership(&model, &h, &state, 0.5));
    }

    #[test]
    fn isolated_vertex_has_no_motion() {
        let net = ConstrainedNetwork::new(DirectedGraph::new(1, vec![]).unwrap(), vec![], vec![]).unwrap();
        let model = FlowModel::new(&net);
        let (dx, dxc) = closed_loop_rhs(&model, &Quadratic::unit(1), &SimState::new(vec![3.0], vec![]));
        assert_eq!(dx, vec![0.0]);
        assert!(dxc.is_empty());
    }

    #[test]
    fn lyapunov_at_origin_is_zero() {
        let model = FlowModel::new(&triangle([(0, 1); 3]));
        let v = lyapunov(&model, &Quadratic::unit(3), &SimState::new(vec![0.0; 3], vec![0.0; 3]));
        assert_eq!(v, 0.0);
    }

    #[test]
    fn lyapunov_derivative_matches_dissipation() {
        // dV/dt = -dx^T Hess(H) dx, checked by a central difference along the flow.
        let model = FlowModel::new(&triangle([(0, 2), (0, 1), (0, 3)]));
        let h = Quadratic::new(vec![q(1), q(2), q(3)]).unwrap();
        let state = SimState::new(vec![0.3, -0.4, 0.9], vec![-0.2, 0.1, -0.5]);
        let (dx, dxc) = closed_loop_rhs(&model, &h, &state);
        let eps = 1e-6;
        let step = |s: f64| SimState {
            x: state.x.iter().zip(&dx).map(|(x, d)| x + s * d).collect(),
            xc: state.xc.iter().zip(&dxc).map(|(x, d)| x + s * d).collect(),
            t: 0.0,
        };
        let numeric = (lyapunov(&model, &h, &step(eps)) - lyapunov(&model, &h, &step(-eps))) / (2.0 * eps);
        let analytic = -h.hessian_form(&state.x, &dx);
        assert!(analytic < 0.0);
        assert!((numeric - analytic).abs() < 1e-6, "{numeric} vs {analytic}");
    }

    #[test]
    fn disturbed_rhs_total_rate() {
        use crate::network::{Terminal, Terminals};
        let net = triangle([(0, 1); 3]);
        let terminals = Terminals {
            columns: vec![
                Terminal { vertex: 0, sign: 1, flow: q(2) },
                Terminal { vertex: 2, sign: -1, flow: q(1) },
            ],
        };
        let net = ConstrainedNetwork::with_terminals(net.graph, net.lower, net.upper, Some(terminals)).unwrap();
        let model = FlowModel::new(&net);
        let state = SimState::new(vec![0.5, -1.0, 0.25], vec![0.3, -0.7, 1.1]);
        let (dx, _) = closed_loop_rhs_disturbed(&model, &Quadratic::unit(3), &state);
        assert!((dx.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_disturbance_matches_plain_rhs() {
        use crate::network::{Terminal, Terminals};
        let base = triangle([(0, 1); 3]);
        let terminals = Terminals {
            columns: vec![Terminal { vertex: 1, sign: 1, flow: q(0) }],
        };
        let net = ConstrainedNetwork::with_terminals(
            base.graph.clone(),
            base.lower.clone(),
            base.upper.clone(),
            Some(terminals),
        )
        .unwrap();
        let state = SimState::new(vec![1.0, 0.0, -1.0], vec![0.2, 0.0, -0.1]);
        let h = Quadratic::unit(3);
        assert_eq!(
            closed_loop_rhs_disturbed(&FlowModel::new(&net), &h, &state),
            closed_loop_rhs(&FlowModel::new(&base), &h, &state)
        );
    }

    #[test]
    fn steering_at_target_is_still() {
        let model = FlowModel::new(&triangle([(0, 1); 3]));
        let h = Quadratic::unit(3);
        let x0 = vec![1.0, 0.0, -1.0];
        let target = AdmissibleTarget::new(vec![0.5, 0.25, -0.75], &x0).unwrap();
        let state = SimState::new(target.x_star().to_vec(), vec![-0.5; 3]);
        let (dx, _) = steering_rhs(&model, &h, &state, &target);
        assert!(dx.iter().all(|v| *v == 0.0));

        let state = SimState::new(vec![0.1, 2.0, -0.3], vec![0.4, -0.2, 0.0]);
        let (dx, _) = steering_rhs(&model, &h, &state, &target);
        assert!(dx.iter().sum::<f64>().abs() < 1e-15);

        assert!(AdmissibleTarget::new(vec![1.0, 1.0, 1.0], &x0).is_err());
    }

    #[test]
    fn consensus_target_reduces_to_consensus_dynamics() {
        let model = FlowModel::new(&triangle([(0, 1); 3]));
        let h = Quadratic::unit(3);
        let x0 = vec![0.9, -0.3, 0.6];
        let mean = x0.iter().sum::<f64>() / 3.0;
        let target = AdmissibleTarget::new(vec![mean; 3], &x0).unwrap();
        let state = SimState::new(x0.clone(), vec![0.1, -0.2, 0.3]);
        let (a, b) = steering_rhs(&model, &h, &state, &target);
        let (c, d) = closed_loop_rhs(&model, &h, &state);
        for (u, v) in a.iter().chain(&b).zip(c.iter().chain(&d)) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_nonpositive_weights() {
        assert!(Quadratic::new(vec![q(1), q(0)]).is_err());
    }
}
