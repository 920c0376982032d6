//! Monotone successive approximation on a radial grid.
//!
//! Starting from `u₀ = a₁`, `v₀ = a₂`, every sweep recomputes
//! `u_n(r) = a₁ + ∫_0^r t^{1-N} ∫_0^t s^{N-1} p₁(s) f₁(u_{n-1}, v_{n-1}) ds dt`
//! (and the same for `v_n`) on all nodes at once, from the previous iterate.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{nested_with_flux, GridError, RadialGrid, SampledFn};
use crate::model::{eval_weight_on_grid, Component, ModelError, ProblemSpec};
use crate::scalar::Scalar;
use crate::transforms::{IntegralProfile, KoBound};

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig<T> {
    /// Sup-norm threshold on `|u_n - u_{n-1}| + |v_n - v_{n-1}|`.
    pub tol: T,
    pub max_iter: usize,
    /// Keep every iterate so that monotonicity can be audited afterwards.
    pub audit: bool,
}

impl<T: Scalar> Default for IterationConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10),
            max_iter: 200,
            audit: false,
        }
    }
}

impl<T: Scalar> IterationConfig<T> {
    /// Threshold `base_tol · (1 + a₁ + a₂)`.
    pub fn for_problem(spec: &ProblemSpec<T>, base_tol: T) -> Self {
        Self {
            tol: base_tol * (T::one() + spec.a[0] + spec.a[1]),
            ..Self::default()
        }
    }

    pub fn with_audit(mut self, audit: bool) -> Self {
        self.audit = audit;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }
}

/// `(u, v)` and `(u', v')` on a grid plus iteration diagnostics.
#[derive(Debug, Clone)]
pub struct SolutionPair<T> {
    pub u: SampledFn<T>,
    pub v: SampledFn<T>,
    pub du: SampledFn<T>,
    pub dv: SampledFn<T>,
    pub iterations: usize,
    pub converged: bool,
    pub sup_delta_history: Vec<T>,
    /// `(u_n, v_n)` for `n = 0, 1, ...` when auditing was requested.
    pub history: Option<Vec<(Vec<T>, Vec<T>)>>,
}

impl<T: Scalar> SolutionPair<T> {
    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        self.u.grid()
    }

    pub fn component(&self, which: Component) -> &SampledFn<T> {
        match which {
            Component::U => &self.u,
            Component::V => &self.v,
        }
    }

    pub fn derivative(&self, which: Component) -> &SampledFn<T> {
        match which {
            Component::U => &self.du,
            Component::V => &self.dv,
        }
    }
}

#[derive(Debug, Error, Clone)]
pub enum SolverError<T: Scalar> {
    #[error("no convergence after {} iterations (last delta {:e})", .0.iterations, .0.sup_delta_history.last().map(|d| d.to_f64_lossy()).unwrap_or(f64::NAN))]
    NotConverged(Box<SolutionPair<T>>),
    #[error("iterate {iteration} exceeds the overflow limit at r = {radius}")]
    Overflow { radius: f64, iteration: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

fn first_overflow<T: Scalar>(xs: &[T]) -> Option<usize> {
    let lim = T::overflow_limit();
    xs.iter().position(|v| !v.is_finite() || v.abs() > lim)
}

struct Sweep<T> {
    u: Vec<T>,
    v: Vec<T>,
    du: Vec<T>,
    dv: Vec<T>,
}

fn sweep<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &Arc<RadialGrid<T>>,
    w: &[SampledFn<T>; 2],
    u: &[T],
    v: &[T],
) -> Result<Sweep<T>, usize> {
    let f = &spec.nonlin;
    let rhs = |which: Component| {
        let vals: Vec<T> = w[which.index()]
            .values()
            .iter()
            .zip(u.iter().zip(v))
            .map(|(&p, (&uk, &vk))| {
                if p == T::zero() {
                    T::zero()
                } else {
                    p * f.eval(which, uk, vk)
                }
            })
            .collect();
        if let Some(k) = first_overflow(&vals) {
            return Err(k);
        }
        let g = SampledFn::new(grid.clone(), vals).expect("finite right-hand side");
        let (outer, flux) = nested_with_flux(&g, spec.n_dim).expect("dimension validated");
        let a = spec.a(which);
        let vals: Vec<T> = outer.values().iter().map(|&o| a + o).collect();
        if let Some(k) = first_overflow(&vals) {
            return Err(k);
        }
        Ok((vals, flux.values().to_vec()))
    };
    let (un, du) = rhs(Component::U)?;
    let (vn, dv) = rhs(Component::V)?;
    Ok(Sweep {
        u: un,
        v: vn,
        du,
        dv,
    })
}

/// Runs the grid-synchronous Picard scheme until the sup-norm change drops below `cfg.tol`.
pub fn picard_solve<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: Arc<RadialGrid<T>>,
    cfg: &IterationConfig<T>,
) -> Result<SolutionPair<T>, SolverError<T>> {
    spec.validate()?;
    let w = [
        eval_weight_on_grid(spec.weight(Component::U), &grid)?,
        eval_weight_on_grid(spec.weight(Component::V), &grid)?,
    ];
    let n = grid.len();
    let mut u = vec![spec.a[0]; n];
    let mut v = vec![spec.a[1]; n];
    let mut history = cfg.audit.then(|| vec![(u.clone(), v.clone())]);
    let mut deltas = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=cfg.max_iter {
        let next = sweep(spec, &grid, &w, &u, &v).map_err(|k| SolverError::Overflow {
            radius: grid.nodes()[k].to_f64_lossy(),
            iteration: it,
        })?;
        let delta = (0..n)
            .map(|k| (next.u[k] - u[k]).abs() + (next.v[k] - v[k]).abs())
            .fold(T::zero(), T::max);
        u = next.u;
        v = next.v;
        deltas.push(delta);
        if let Some(h) = history.as_mut() {
            h.push((u.clone(), v.clone()));
        }
        iterations = it;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    // derivatives from the final iterate
    let last = sweep(spec, &grid, &w, &u, &v).map_err(|k| SolverError::Overflow {
        radius: grid.nodes()[k].to_f64_lossy(),
        iteration: iterations + 1,
    })?;
    let mk = |vals: Vec<T>| SampledFn::new(grid.clone(), vals);
    let sol = SolutionPair {
        u: mk(u)?,
        v: mk(v)?,
        du: mk(last.du)?,
        dv: mk(last.dv)?,
        iterations,
        converged,
        sup_delta_history: deltas,
        history,
    };
    if converged {
        Ok(sol)
    } else {
        Err(SolverError::NotConverged(Box::new(sol)))
    }
}

/// True when `u_n ≤ u_{n+1}` and `v_n ≤ v_{n+1}` at every node, up to
/// `1e-12 · max(1, |u_n|)`.
pub fn audit_monotone_iterates<T: Scalar>(history: &[(Vec<T>, Vec<T>)]) -> bool {
    let slack = T::lit(1e-12);
    let ok = |a: &[T], b: &[T]| {
        a.iter()
            .zip(b)
            .all(|(&x, &y)| x <= y + slack * T::one().max(x.abs()))
    };
    history
        .windows(2)
        .all(|w| ok(&w[0].0, &w[1].0) && ok(&w[0].1, &w[1].1))
}

/// True when no step of the history grows by more than `slack` relative to
/// the previous one, from the second step on.
pub fn deltas_contract<T: Scalar>(history: &[T], slack: T) -> bool {
    history
        .iter()
        .skip(1)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| *w[1] <= slack * *w[0] || *w[1] <= T::epsilon())
}

/// Result of checking one inequality at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck<T> {
    pub name: String,
    /// `max (lhs - rhs)`; negative when the inequality holds strictly everywhere.
    pub max_violation: T,
    pub worst_radius: T,
    /// Nodes where the bound could not be evaluated.
    pub unavailable: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport<T> {
    pub checks: Vec<BoundCheck<T>>,
}

impl<T: Scalar> BoundsReport<T> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck<T>> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Accumulates `lhs ≤ rhs` node by node with slack
/// `1e-6 · (1 + |rhs|) + h_max²`.
pub(crate) struct Tally<T> {
    check: BoundCheck<T>,
    h2: T,
}

impl<T: Scalar> Tally<T> {
    pub(crate) fn new(name: &str, grid: &RadialGrid<T>) -> Self {
        let h = grid.max_step();
        Self {
            check: BoundCheck {
                name: name.to_string(),
                max_violation: T::neg_infinity(),
                worst_radius: T::zero(),
                unavailable: 0,
                passed: true,
            },
            h2: h * h,
        }
    }

    pub(crate) fn push(&mut self, r: T, lhs: T, rhs: Option<T>) {
        let Some(rhs) = rhs else {
            self.check.unavailable += 1;
            return;
        };
        let viol = lhs - rhs;
        if viol > self.check.max_violation {
            self.check.max_violation = viol;
            self.check.worst_radius = r;
        }
        if viol > T::lit(1e-6) * (T::one() + rhs.abs()) + self.h2 {
            self.check.passed = false;
        }
    }

    pub(crate) fn finish(self) -> BoundCheck<T> {
        self.check
    }
}

/// Checks `u + v ≤ Z⁻¹(P₁ + P₂)`, `KOᵢ(uᵢ) ≤ √(2c̄ᵢ) P̄ᵢ` and the lower bounds
/// `u ≥ a₁ + P̲`, `v ≥ a₂ + Q̲` at every node.
pub fn audit_apriori_bounds<T: Scalar>(
    sol: &SolutionPair<T>,
    profile: &IntegralProfile<T>,
    spec: &ProblemSpec<T>,
) -> BoundsReport<T> {
    let grid = sol.grid();
    let nodes = grid.nodes();
    let mut zc = Tally::new("u+v <= Zinv(P1+P2)", grid);
    let mut ko = [
        Tally::new("KO1(u) <= sqrt(2 c1) Pbar1", grid),
        Tally::new("KO2(v) <= sqrt(2 c2) Pbar2", grid),
    ];
    let mut low = [
        Tally::new("u >= a1 + Plower", grid),
        Tally::new("v >= a2 + Qlower", grid),
    ];
    for (k, &r) in nodes.iter().enumerate() {
        let (u, v) = (sol.u.values()[k], sol.v.values()[k]);
        zc.push(r, u + v, profile.zinv_bound.get(k));
        for c in Component::BOTH {
            let i = c.index();
            let x = sol.component(c).values()[k];
            let scale = (T::lit(2.0) * spec.nonlin.envelope(c).c_bar).sqrt();
            let rhs = profile.pbar[i].get(k).map(|p| scale * p);
            match profile.ko[i].eval(x) {
                Ok(lhs) => ko[i].push(r, lhs, rhs),
                Err(_) => ko[i].push(r, T::zero(), None),
            }
            // lower bound written as a₁ + P̲ - u ≤ 0
            let lower = spec.a(c) + profile.lower[i].values()[k];
            low[i].push(r, lower - x, Some(T::zero()));
        }
    }
    let [k1, k2] = ko;
    let [l1, l2] = low;
    BoundsReport {
        checks: vec![
            zc.finish(),
            k1.finish(),
            k2.finish(),
            l1.finish(),
            l2.finish(),
        ],
    }
}

/// `KOᵢ⁻¹(√(2c̄ᵢ) P̄ᵢ(r))` at every node, `None` where unavailable or vacuous.
pub fn ko_upper_bounds<T: Scalar>(
    profile: &IntegralProfile<T>,
    spec: &ProblemSpec<T>,
    which: Component,
) -> Vec<Option<T>> {
    (0..profile.grid().len())
        .map(|k| match profile.ko_bound_at(spec, which, k) {
            Some(KoBound::Value(x)) => Some(x),
            _ => None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};
    use crate::model::{power_pair, WeightFn};
    use crate::transforms::TailPolicy;

    fn grid(r: f64, m: usize) -> Arc<RadialGrid<f64>> {
        Arc::new(make_grid(r, m, Grading::Uniform).unwrap())
    }

    fn sinh_spec() -> ProblemSpec<f64> {
        ProblemSpec::new(
            3,
            1.0,
            1.0,
            [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
            power_pair(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_are_a_fixed_point() {
        let spec = ProblemSpec::new(
            3,
            1.5,
            0.5,
            [WeightFn::zero(), WeightFn::zero()],
            power_pair(2.0, 2.0).unwrap(),
        )
        .unwrap();
        let cfg = IterationConfig::for_problem(&spec, 1e-10).with_audit(true);
        let sol = picard_solve(&spec, grid(2.0, 64), &cfg).unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.sup_delta_history, vec![0.0]);
        assert!(sol.u.values().iter().all(|&x| x == 1.5));
        assert!(sol.v.values().iter().all(|&x| x == 0.5));
        assert!(audit_monotone_iterates(sol.history.as_ref().unwrap()));
    }

    #[test]
    fn sinh_solution() {
        let spec = sinh_spec();
        let g = grid(2.0, 1024);
        let cfg = IterationConfig::for_problem(&spec, 1e-10).with_audit(true);
        let sol = picard_solve(&spec, g.clone(), &cfg).unwrap();
        assert!(sol.converged);
        for (k, &r) in g.nodes().iter().enumerate().skip(1) {
            let exact = r.sinh() / r;
            assert!((sol.u.values()[k] - exact).abs() < 1e-5 * exact);
            assert_eq!(sol.u.values()[k], sol.v.values()[k]);
            let dexact = (r * r.cosh() - r.sinh()) / (r * r);
            assert!((sol.du.values()[k] - dexact).abs() < 1e-4);
        }
        assert_eq!(sol.du.values()[0], 0.0);
        assert!(audit_monotone_iterates(sol.history.as_ref().unwrap()));
        assert!(deltas_contract(&sol.sup_delta_history, 1.5));
    }

    #[test]
    fn perturbed_history_fails_audit() {
        let spec = sinh_spec();
        let cfg = IterationConfig::for_problem(&spec, 1e-10).with_audit(true);
        let sol = picard_solve(&spec, grid(2.0, 64), &cfg).unwrap();
        let mut h = sol.history.unwrap();
        h[2].0[10] -= 1e-3;
        assert!(!audit_monotone_iterates(&h));
    }

    #[test]
    fn sqrt_nonlinearity_grows() {
        let spec = ProblemSpec::new(
            3,
            1.0,
            1.0,
            [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
            power_pair(0.5, 0.5).unwrap(),
        )
        .unwrap();
        let sol = picard_solve(
            &spec,
            grid(5.0, 500),
            &IterationConfig::for_problem(&spec, 1e-10),
        )
        .unwrap();
        assert!(sol.u.values().windows(2).all(|w| w[1] >= w[0]));
        assert!(sol.u.at(5.0) > sol.u.at(1.0));
    }

    #[test]
    fn blow_up_is_overflow() {
        let spec = ProblemSpec::new(
            3,
            1.0,
            1.0,
            [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
            power_pair(3.0, 3.0).unwrap(),
        )
        .unwrap();
        let err = picard_solve(
            &spec,
            grid(20.0, 400),
            &IterationConfig::for_problem(&spec, 1e-10),
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::Overflow { .. }), "{err:?}");
    }

    #[test]
    fn iteration_cap_returns_partial_result() {
        let spec = sinh_spec();
        let cfg = IterationConfig::for_problem(&spec, 1e-10).with_max_iter(3);
        match picard_solve(&spec, grid(2.0, 64), &cfg) {
            Err(SolverError::NotConverged(sol)) => {
                assert_eq!(sol.iterations, 3);
                assert!(!sol.converged);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sinh_bounds_hold() {
        let spec = sinh_spec();
        let g = grid(2.0, 1024);
        let sol = picard_solve(
            &spec,
            g.clone(),
            &IterationConfig::for_problem(&spec, 1e-10),
        )
        .unwrap();
        let profile = IntegralProfile::build(&spec, g, &TailPolicy::for_grid_cells(1024)).unwrap();
        // u + v = 2 sinh(1) against Z⁻¹(1/3) = 2 e^{2/3}
        assert!((profile.zinv_bound.at(1.0).unwrap() - 2.0 * (2.0f64 / 3.0).exp()).abs() < 1e-4);
        let rep = audit_apriori_bounds(&sol, &profile, &spec);
        assert!(rep.passed(), "{rep:?}");
        let low = rep.get("u >= a1 + Plower").unwrap();
        assert!(low.max_violation < 1e-9);
    }
}
