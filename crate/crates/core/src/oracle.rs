//! Direct initial-value integration of the radial system
//! `u'' + (N-1)/r u' = p₁(r) f₁(u, v)`, `v'' + (N-1)/r v' = p₂(r) f₂(u, v)`,
//! used as an independent check of the successive-approximation solver.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{GridError, RadialGrid, SampledFn};
use crate::model::{Component, ModelError, ProblemSpec};
use crate::scalar::Scalar;
use crate::solver::SolutionPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("solution exceeds the overflow limit at r = {radius}")]
    Overflow { radius: f64 },
    #[error("solutions live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState<T> {
    pub r: T,
    pub u: T,
    pub v: T,
    pub du: T,
    pub dv: T,
}

impl<T: Scalar> OdeState<T> {
    fn is_finite(&self) -> bool {
        let lim = T::overflow_limit();
        [self.u, self.v, self.du, self.dv]
            .iter()
            .all(|x| x.is_finite() && x.abs() <= lim)
    }

    fn advance(&self, h: T, k: &[T; 4]) -> Self {
        Self {
            r: self.r + h,
            u: self.u + h * k[0],
            v: self.v + h * k[1],
            du: self.du + h * k[2],
            dv: self.dv + h * k[3],
        }
    }
}

/// `u''(0) = p₁(0) f₁(a₁, a₂) / N`, and the same for `v`.
pub fn curvature_at_origin<T: Scalar>(spec: &ProblemSpec<T>, which: Component) -> T {
    let [a1, a2] = spec.a;
    spec.weight(which).eval(T::zero()) * spec.nonlin.eval(which, a1, a2)
        / T::from_usize(spec.n_dim).unwrap()
}

fn rhs<T: Scalar>(spec: &ProblemSpec<T>, s: &OdeState<T>) -> [T; 4] {
    let n1 = T::from_usize(spec.n_dim - 1).unwrap();
    let acc = |c: Component, d: T| {
        let p = spec.weight(c).eval(s.r);
        let forcing = if p == T::zero() {
            T::zero()
        } else {
            p * spec.nonlin.eval(c, s.u, s.v)
        };
        forcing - n1 / s.r * d
    };
    [s.du, s.dv, acc(Component::U, s.du), acc(Component::V, s.dv)]
}

/// Classical fourth-order Runge–Kutta with one step per grid cell.
///
/// The first cell uses the series start `u(h) = a₁ + h² u''(0) / 2`,
/// `u'(h) = h u''(0)`, so the singular coefficient is never evaluated at 0.
pub fn direct_integrate<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: Arc<RadialGrid<T>>,
) -> Result<SolutionPair<T>, OracleError> {
    spec.validate()?;
    let nodes = grid.nodes();
    let half = T::lit(0.5);
    let c = [
        curvature_at_origin(spec, Component::U),
        curvature_at_origin(spec, Component::V),
    ];
    let mut states = Vec::with_capacity(nodes.len());
    states.push(OdeState {
        r: T::zero(),
        u: spec.a[0],
        v: spec.a[1],
        du: T::zero(),
        dv: T::zero(),
    });
    let h = nodes[1];
    states.push(OdeState {
        r: h,
        u: spec.a[0] + half * h * h * c[0],
        v: spec.a[1] + half * h * h * c[1],
        du: h * c[0],
        dv: h * c[1],
    });
    for k in 1..nodes.len() - 1 {
        let s = states[k];
        let h = nodes[k + 1] - nodes[k];
        let k1 = rhs(spec, &s);
        let k2 = rhs(spec, &s.advance(half * h, &k1));
        let k3 = rhs(spec, &s.advance(half * h, &k2));
        let k4 = rhs(spec, &s.advance(h, &k3));
        let sixth = T::one() / T::lit(6.0);
        let two = T::lit(2.0);
        let mix: [T; 4] =
            std::array::from_fn(|i| sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]));
        let mut next = s.advance(h, &mix);
        next.r = nodes[k + 1];
        if !next.is_finite() {
            return Err(OracleError::Overflow {
                radius: nodes[k + 1].to_f64_lossy(),
            });
        }
        states.push(next);
    }
    let col =
        |f: fn(&OdeState<T>) -> T| SampledFn::new(grid.clone(), states.iter().map(f).collect());
    Ok(SolutionPair {
        u: col(|s| s.u)?,
        v: col(|s| s.v)?,
        du: col(|s| s.du)?,
        dv: col(|s| s.dv)?,
        iterations: 0,
        converged: true,
        sup_delta_history: Vec::new(),
        history: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison<T> {
    pub sup_abs: T,
    pub sup_rel: T,
    pub argmax_radius: T,
}

/// Node-wise `|u_a - u_b| + |v_a - v_b|`, absolute and relative to `1 + |u_a| + |v_a|`.
pub fn compare_solutions<T: Scalar>(
    a: &SolutionPair<T>,
    b: &SolutionPair<T>,
) -> Result<Comparison<T>, OracleError> {
    if a.grid().nodes() != b.grid().nodes() {
        return Err(OracleError::GridMismatch);
    }
    let mut out = Comparison {
        sup_abs: T::zero(),
        sup_rel: T::zero(),
        argmax_radius: T::zero(),
    };
    for (k, &r) in a.grid().nodes().iter().enumerate() {
        let (ua, va) = (a.u.values()[k], a.v.values()[k]);
        let d = (ua - b.u.values()[k]).abs() + (va - b.v.values()[k]).abs();
        let rel = d / (T::one() + ua.abs() + va.abs());
        if d > out.sup_abs {
            out.sup_abs = d;
        }
        if rel > out.sup_rel {
            out.sup_rel = rel;
            out.argmax_radius = r;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};
    use crate::model::{power_pair, WeightFn};

    fn spec(w: f64) -> ProblemSpec<f64> {
        ProblemSpec::new(
            3,
            1.0,
            1.0,
            [WeightFn::Constant(w), WeightFn::Constant(w)],
            power_pair(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_stay_constant() {
        let g = Arc::new(make_grid(3.0, 64, Grading::Uniform).unwrap());
        let sol = direct_integrate(&spec(0.0), g).unwrap();
        assert!(sol.u.values().iter().all(|&x| x == 1.0));
        assert!(sol.dv.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sinh_at_one() {
        let g = Arc::new(make_grid(1.0, 512, Grading::Uniform).unwrap());
        let sol = direct_integrate(&spec(1.0), g).unwrap();
        assert!((sol.u.last() - 1f64.sinh()).abs() < 1e-6);
        assert!(sol.du.values().iter().all(|&d| d >= -1e-12));
    }

    #[test]
    fn comparisons() {
        let g = Arc::new(make_grid(1.0, 64, Grading::Uniform).unwrap());
        let a = direct_integrate(&spec(1.0), g).unwrap();
        let c = compare_solutions(&a, &a).unwrap();
        assert_eq!((c.sup_abs, c.sup_rel), (0.0, 0.0));
        let g2 = Arc::new(make_grid(1.0, 32, Grading::Uniform).unwrap());
        let b = direct_integrate(&spec(1.0), g2).unwrap();
        assert_eq!(compare_solutions(&a, &b), Err(OracleError::GridMismatch));
    }

    #[test]
    fn curvature_value() {
        let s = spec(1.0);
        assert!((curvature_at_origin(&s, Component::U) - 1.0 / 3.0).abs() < 1e-15);
    }
}
