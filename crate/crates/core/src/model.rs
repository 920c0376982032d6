//! Weights, nonlinearities and the problem description.
//!
//! Hypotheses on the data are audited on sample lattices rather than proven:
//! [`check_c2_envelope`] for the growth envelope, [`audit_monotonicity`] and
//! [`audit_positivity`] for the structural conditions on `f₁`, `f₂`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::grid::{RadialGrid, SampledFn};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("exponent must be positive, got {0}")]
    NonPositiveExponent(f64),
    #[error("envelope lattice is empty")]
    EmptyLattice,
    #[error("weight is negative ({value}) at r = {radius}")]
    NegativeWeightValue { radius: f64, value: f64 },
    #[error("weight is not finite at r = {0}")]
    NonFiniteWeight(f64),
    #[error("invalid weight parameters: {0}")]
    InvalidWeight(String),
    #[error("dimension must be at least 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("central value a{which} must be positive, got {value}")]
    NonPositiveCenter { which: usize, value: f64 },
    #[error("eps must be positive, got {0}")]
    NonPositiveEps(f64),
    #[error("m{which} = {value} is below max(1, 1/a{which}) = {min}")]
    MTooSmall { which: usize, value: f64, min: f64 },
}

/// Which equation of the system a quantity belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    U,
    V,
}

impl Component {
    pub const BOTH: [Component; 2] = [Component::U, Component::V];

    pub fn index(self) -> usize {
        match self {
            Component::U => 0,
            Component::V => 1,
        }
    }

    pub fn other(self) -> Self {
        match self {
            Component::U => Component::V,
            Component::V => Component::U,
        }
    }

    /// 1-based label as used in reports (`p1`, `KO2`, ...).
    pub fn label(self) -> usize {
        self.index() + 1
    }
}

pub type UnivariateFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type BivariateFn<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

/// Radial weight `p(r) ≥ 0`.
#[derive(Clone)]
pub enum WeightFn<T> {
    Constant(T),
    /// `c (1 + r)^{-σ}`
    PowerDecay {
        c: T,
        sigma: T,
    },
    /// `c r^k`, `k ≥ 0`
    Power {
        c: T,
        k: T,
    },
    /// Linear interpolation between samples, constant beyond the last one.
    Tabulated(SampledFn<T>),
    Custom(UnivariateFn<T>),
}

impl<T: Scalar> fmt::Debug for WeightFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::Constant(c) => write!(f, "Constant({c})"),
            WeightFn::PowerDecay { c, sigma } => write!(f, "PowerDecay({c}, {sigma})"),
            WeightFn::Power { c, k } => write!(f, "Power({c}, {k})"),
            WeightFn::Tabulated(s) => write!(f, "Tabulated({} samples)", s.values().len()),
            WeightFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl<T: Scalar> WeightFn<T> {
    pub fn zero() -> Self {
        WeightFn::Constant(T::zero())
    }

    pub fn eval(&self, r: T) -> T {
        match self {
            WeightFn::Constant(c) => *c,
            WeightFn::PowerDecay { c, sigma } => *c * (T::one() + r).powf(-*sigma),
            WeightFn::Power { c, k } => {
                if *k == T::zero() {
                    *c
                } else {
                    *c * r.powf(*k)
                }
            }
            WeightFn::Tabulated(s) => s.at(r),
            WeightFn::Custom(f) => f(r),
        }
    }

    /// True when the weight vanishes identically by construction.
    pub fn is_identically_zero(&self) -> bool {
        match self {
            WeightFn::Constant(c) | WeightFn::PowerDecay { c, .. } | WeightFn::Power { c, .. } => {
                *c == T::zero()
            }
            WeightFn::Tabulated(s) => s.values().iter().all(|v| *v == T::zero()),
            WeightFn::Custom(_) => false,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let neg = |c: T| ModelError::InvalidWeight(format!("coefficient {c} is negative"));
        match self {
            WeightFn::Constant(c) | WeightFn::PowerDecay { c, .. } if *c < T::zero() => {
                Err(neg(*c))
            }
            WeightFn::Power { c, .. } if *c < T::zero() => Err(neg(*c)),
            WeightFn::Power { k, .. } if *k < T::zero() => Err(ModelError::InvalidWeight(format!(
                "power {k} is negative; the weight must be continuous at 0"
            ))),
            WeightFn::Tabulated(s) => match s.values().iter().position(|v| *v < T::zero()) {
                Some(i) => Err(ModelError::NegativeWeightValue {
                    radius: s.grid().nodes()[i].to_f64_lossy(),
                    value: s.values()[i].to_f64_lossy(),
                }),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Samples `w` at every grid node.
pub fn eval_weight_on_grid<T: Scalar>(
    w: &WeightFn<T>,
    grid: &Arc<RadialGrid<T>>,
) -> Result<SampledFn<T>, ModelError> {
    w.validate()?;
    let mut values = Vec::with_capacity(grid.len());
    for &r in grid.nodes() {
        let p = w.eval(r);
        if !p.is_finite() {
            return Err(ModelError::NonFiniteWeight(r.to_f64_lossy()));
        }
        if p < T::zero() {
            return Err(ModelError::NegativeWeightValue {
                radius: r.to_f64_lossy(),
                value: p.to_f64_lossy(),
            });
        }
        values.push(p);
    }
    Ok(SampledFn::new(grid.clone(), values).expect("finite samples on matching grid"))
}

/// Growth envelope `f(t, t s) ≤ c̄ f(t, t) f̄(s)`.
#[derive(Clone)]
pub struct Envelope<T> {
    pub c_bar: T,
    pub f_bar: UnivariateFn<T>,
}

impl<T: Scalar> fmt::Debug for Envelope<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Envelope {{ c_bar: {} }}", self.c_bar)
    }
}

impl<T: Scalar> Envelope<T> {
    /// `c̄ = c`, `f̄(s) = s^e`.
    pub fn power(c_bar: T, exponent: T) -> Self {
        Self {
            c_bar,
            f_bar: Arc::new(move |s: T| s.max(T::zero()).powf(exponent)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NonlinearityFamily<T> {
    /// `f₁ = v^α`, `f₂ = u^β`
    PowerPair {
        alpha: T,
        beta: T,
    },
    /// `f₁ = (u + v)^α`, `f₂ = (u + v)^β`
    CoupledPower {
        alpha: T,
        beta: T,
    },
    Custom(String),
}

/// The pair `(f₁, f₂)` together with its growth envelopes.
#[derive(Clone)]
pub struct NonlinearityPair<T> {
    f: [BivariateFn<T>; 2],
    envelope: [Envelope<T>; 2],
    family: NonlinearityFamily<T>,
}

impl<T: Scalar> fmt::Debug for NonlinearityPair<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearityPair")
            .field("family", &self.family)
            .field("envelope", &self.envelope)
            .finish()
    }
}

impl<T: Scalar> NonlinearityPair<T> {
    pub fn custom(
        name: impl Into<String>,
        f1: BivariateFn<T>,
        f2: BivariateFn<T>,
        env1: Envelope<T>,
        env2: Envelope<T>,
    ) -> Self {
        Self {
            f: [f1, f2],
            envelope: [env1, env2],
            family: NonlinearityFamily::Custom(name.into()),
        }
    }

    pub fn eval(&self, which: Component, u: T, v: T) -> T {
        (self.f[which.index()])(u, v)
    }

    /// `t ↦ f(t, t)`
    pub fn diagonal(&self, which: Component, t: T) -> T {
        self.eval(which, t, t)
    }

    pub fn envelope(&self, which: Component) -> &Envelope<T> {
        &self.envelope[which.index()]
    }

    pub fn family(&self) -> &NonlinearityFamily<T> {
        &self.family
    }

    pub fn with_envelope(mut self, which: Component, envelope: Envelope<T>) -> Self {
        self.envelope[which.index()] = envelope;
        self
    }

    pub fn with_c_bar(mut self, which: Component, c_bar: T) -> Self {
        self.envelope[which.index()].c_bar = c_bar;
        self
    }
}

/// `f₁(u, v) = v^α`, `f₂(u, v) = u^β` with the tight envelopes `c̄ = 1`, `f̄(s) = s^α`, `s^β`.
pub fn power_pair<T: Scalar>(alpha: T, beta: T) -> Result<NonlinearityPair<T>, ModelError> {
    for e in [alpha, beta] {
        if !(e > T::zero()) {
            return Err(ModelError::NonPositiveExponent(e.to_f64_lossy()));
        }
    }
    let zero = T::zero();
    Ok(NonlinearityPair {
        f: [
            Arc::new(move |_u: T, v: T| v.max(zero).powf(alpha)),
            Arc::new(move |u: T, _v: T| u.max(zero).powf(beta)),
        ],
        envelope: [
            Envelope::power(T::one(), alpha),
            Envelope::power(T::one(), beta),
        ],
        family: NonlinearityFamily::PowerPair { alpha, beta },
    })
}

/// `fᵢ(u, v) = (u + v)^{γᵢ}`. Since `(t + t s)^γ = (2t)^γ ((1 + s)/2)^γ` the
/// envelope is `c̄ = 1`, `f̄(s) = ((1 + s)/2)^γ`, again with equality.
pub fn coupled_power<T: Scalar>(alpha: T, beta: T) -> Result<NonlinearityPair<T>, ModelError> {
    for e in [alpha, beta] {
        if !(e > T::zero()) {
            return Err(ModelError::NonPositiveExponent(e.to_f64_lossy()));
        }
    }
    let zero = T::zero();
    let half = T::lit(0.5);
    let env = |g: T| Envelope {
        c_bar: T::one(),
        f_bar: Arc::new(move |s: T| (half * (T::one() + s.max(zero))).powf(g)),
    };
    Ok(NonlinearityPair {
        f: [
            Arc::new(move |u: T, v: T| (u + v).max(zero).powf(alpha)),
            Arc::new(move |u: T, v: T| (u + v).max(zero).powf(beta)),
        ],
        envelope: [env(alpha), env(beta)],
        family: NonlinearityFamily::CoupledPower { alpha, beta },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport<T> {
    pub holds: bool,
    /// `max lhs / rhs` over the lattice and both components.
    pub worst_ratio: T,
    pub worst_at: (Component, T, T),
}

/// `t, s ∈ {2⁻⁴, 2⁻³, …, 2⁴}`, 81 points.
pub fn default_lattice<T: Scalar>() -> Vec<(T, T)> {
    let pts: Vec<T> = (-4..=4).map(|k| T::lit(2f64.powi(k))).collect();
    pts.iter()
        .flat_map(|&t| pts.iter().map(move |&s| (t, s)))
        .collect()
}

/// Checks `f₁(t, t s) ≤ c̄₁ f₁(t, t) f̄₁(s)` and `f₂(t s, t) ≤ c̄₂ f₂(t, t) f̄₂(s)`
/// on every lattice point, with relative slack `1e-12`.
///
/// `f₂` is scaled in its first argument so that `f₂ = u^β` is tight for every
/// `s`, mirroring `f₁ = v^α`.
pub fn check_c2_envelope<T: Scalar>(
    pair: &NonlinearityPair<T>,
    lattice: &[(T, T)],
) -> Result<EnvelopeReport<T>, ModelError> {
    if lattice.is_empty() {
        return Err(ModelError::EmptyLattice);
    }
    let slack = T::one() + T::lit(1e-12);
    let mut holds = true;
    let mut worst = (
        T::neg_infinity(),
        (Component::U, lattice[0].0, lattice[0].1),
    );
    for which in Component::BOTH {
        let env = pair.envelope(which);
        for &(t, s) in lattice {
            let lhs = match which {
                Component::U => pair.eval(which, t, t * s),
                Component::V => pair.eval(which, t * s, t),
            };
            let rhs = env.c_bar * pair.diagonal(which, t) * (env.f_bar)(s);
            if lhs > rhs * slack {
                holds = false;
            }
            let ratio = if rhs > T::zero() {
                lhs / rhs
            } else if lhs > T::zero() {
                T::infinity()
            } else {
                T::zero()
            };
            if ratio > worst.0 {
                worst = (ratio, (which, t, s));
            }
        }
    }
    Ok(EnvelopeReport {
        holds,
        worst_ratio: worst.0,
        worst_at: worst.1,
    })
}

/// Spot check that both `fᵢ` are nondecreasing in each argument over `samples × samples`.
pub fn audit_monotonicity<T: Scalar>(pair: &NonlinearityPair<T>, samples: &[T]) -> bool {
    let mut pts = samples.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    Component::BOTH.iter().all(|&which| {
        pts.iter().all(|&fixed| {
            pts.windows(2).all(|w| {
                pair.eval(which, w[0], fixed) <= pair.eval(which, w[1], fixed)
                    && pair.eval(which, fixed, w[0]) <= pair.eval(which, fixed, w[1])
            })
        })
    })
}

/// `fᵢ(0, 0) ≥ 0` and `f₁(s, s) f₂(s, s) > 0` for every positive sample.
pub fn audit_positivity<T: Scalar>(pair: &NonlinearityPair<T>, samples: &[T]) -> bool {
    let origin_ok = Component::BOTH
        .iter()
        .all(|&w| pair.eval(w, T::zero(), T::zero()) >= T::zero());
    origin_ok
        && samples
            .iter()
            .filter(|s| **s > T::zero())
            .all(|&s| pair.diagonal(Component::U, s) * pair.diagonal(Component::V, s) > T::zero())
}

/// Lattice audit of the structural hypotheses; returns human-readable warnings.
pub fn hypothesis_warnings<T: Scalar>(pair: &NonlinearityPair<T>) -> Vec<String> {
    let samples: Vec<T> = (-4..=4).map(|k| T::lit(2f64.powi(k))).collect();
    let mut warnings = Vec::new();
    if !audit_positivity(pair, &samples) {
        warnings.push("positivity of f1(s,s) f2(s,s) fails on the sample lattice".to_string());
    }
    if !audit_monotonicity(pair, &samples) {
        warnings.push("f1 or f2 is not nondecreasing on the sample lattice".to_string());
    }
    match check_c2_envelope(pair, &default_lattice()) {
        Ok(rep) if !rep.holds => warnings.push(format!(
            "growth envelope violated: worst ratio {} at {:?}",
            rep.worst_ratio, rep.worst_at
        )),
        _ => {}
    }
    warnings
}

/// Everything that defines one radial problem.
#[derive(Clone)]
pub struct ProblemSpec<T> {
    /// Space dimension `N ≥ 3`.
    pub n_dim: usize,
    /// Central values `u(0) = a₁`, `v(0) = a₂`.
    pub a: [T; 2],
    pub weights: [WeightFn<T>; 2],
    pub nonlin: NonlinearityPair<T>,
    pub eps: T,
    /// `Mᵢ ≥ max(1, 1/aᵢ)`.
    pub m: [T; 2],
}

impl<T: Scalar> fmt::Debug for ProblemSpec<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("n_dim", &self.n_dim)
            .field("a", &self.a)
            .field("weights", &self.weights)
            .field("nonlin", &self.nonlin)
            .field("eps", &self.eps)
            .field("m", &self.m)
            .finish()
    }
}

impl<T: Scalar> ProblemSpec<T> {
    /// Problem with `ε = 0.5` and the minimal `Mᵢ = max(1, 1/aᵢ)`.
    pub fn new(
        n_dim: usize,
        a1: T,
        a2: T,
        weights: [WeightFn<T>; 2],
        nonlin: NonlinearityPair<T>,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            n_dim,
            a: [a1, a2],
            weights,
            nonlin,
            eps: T::lit(0.5),
            m: [min_m(a1), min_m(a2)],
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_eps(mut self, eps: T) -> Result<Self, ModelError> {
        self.eps = eps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_m(mut self, which: Component, m: T) -> Result<Self, ModelError> {
        self.m[which.index()] = m;
        self.validate()?;
        Ok(self)
    }

    pub fn a(&self, which: Component) -> T {
        self.a[which.index()]
    }

    pub fn weight(&self, which: Component) -> &WeightFn<T> {
        &self.weights[which.index()]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_dim < 3 {
            return Err(ModelError::DimensionTooSmall(self.n_dim));
        }
        for which in Component::BOTH {
            let a = self.a(which);
            if !(a > T::zero()) || !a.is_finite() {
                return Err(ModelError::NonPositiveCenter {
                    which: which.label(),
                    value: a.to_f64_lossy(),
                });
            }
            let m = self.m[which.index()];
            let min = min_m(a);
            if !(m >= min) {
                return Err(ModelError::MTooSmall {
                    which: which.label(),
                    value: m.to_f64_lossy(),
                    min: min.to_f64_lossy(),
                });
            }
            self.weight(which).validate()?;
        }
        if !(self.eps > T::zero()) || !self.eps.is_finite() {
            return Err(ModelError::NonPositiveEps(self.eps.to_f64_lossy()));
        }
        Ok(())
    }
}

pub fn min_m<T: Scalar>(a: T) -> T {
    T::one().max(T::one() / a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Grading};

    #[test]
    fn power_pair_values() {
        let p = power_pair(1.0, 1.0).unwrap();
        assert_eq!(p.eval(Component::U, 2.0, 3.0), 3.0);
        assert_eq!(p.eval(Component::V, 2.0, 3.0), 2.0);
        let p = power_pair(3.0, 1.0).unwrap();
        let env = p.envelope(Component::U);
        let lhs = p.eval(Component::U, 2.0, 8.0);
        let rhs = env.c_bar * p.diagonal(Component::U, 2.0) * (env.f_bar)(4.0);
        assert_eq!(lhs, 512.0);
        assert_eq!(rhs, 512.0);
        assert_eq!(
            power_pair(0.0, 1.0).unwrap_err(),
            ModelError::NonPositiveExponent(0.0)
        );
        assert!(power_pair(1.0, -2.0).is_err());
    }

    #[test]
    fn half_power_envelope_is_tight() {
        let p = power_pair(0.5, 0.5).unwrap();
        let pts = [0.5, 1.0, 2.0, 4.0];
        let lattice: Vec<(f64, f64)> = pts
            .iter()
            .flat_map(|&t| pts.iter().map(move |&s| (t, s)))
            .collect();
        let rep = check_c2_envelope(&p, &lattice).unwrap();
        assert!(rep.holds);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn envelope_detects_bad_constant() {
        let p = power_pair(2.0f64, 2.0)
            .unwrap()
            .with_c_bar(Component::U, 0.5);
        let rep = check_c2_envelope(&p, &[(1.0, 1.0)]).unwrap();
        assert!(!rep.holds);
        assert!((rep.worst_ratio - 2.0).abs() < 1e-12);
        assert_eq!(rep.worst_at.0, Component::U);
        assert_eq!(
            check_c2_envelope(&p, &[]).unwrap_err(),
            ModelError::EmptyLattice
        );
    }

    #[test]
    fn coupled_power_envelope_tight() {
        let p = coupled_power(1.5f64, 0.7).unwrap();
        let rep = check_c2_envelope(&p, &default_lattice()).unwrap();
        assert!(rep.holds);
        assert!((rep.worst_ratio - 1.0).abs() < 1e-12);
        assert_eq!(default_lattice::<f64>().len(), 81);
    }

    #[test]
    fn weights_evaluate() {
        let g = Arc::new(make_grid(4.0, 16, Grading::Uniform).unwrap());
        let ones = eval_weight_on_grid(&WeightFn::Constant(1.0), &g).unwrap();
        assert!(ones.values().iter().all(|&v| v == 1.0));
        let w = WeightFn::PowerDecay { c: 1.0, sigma: 4.0 };
        assert_eq!(w.eval(1.0), 0.0625);
        assert_eq!(WeightFn::Power { c: 2.0, k: 1.0 }.eval(3.0), 6.0);
        let mut samples = vec![1.0; 17];
        samples[3] = -0.5;
        let tab = SampledFn::new(g.clone(), samples).unwrap();
        assert!(matches!(
            eval_weight_on_grid(&WeightFn::Tabulated(tab), &g),
            Err(ModelError::NegativeWeightValue { .. })
        ));
    }

    #[test]
    fn tabulated_weight_interpolates_and_extrapolates_flat() {
        let g = Arc::new(make_grid(2.0f64, 16, Grading::Uniform).unwrap());
        let tab = SampledFn::from_fn(g, |r| 1.0 + r).unwrap();
        let w = WeightFn::Tabulated(tab);
        assert!((w.eval(0.3) - 1.3).abs() < 1e-14);
        assert_eq!(w.eval(10.0), 3.0);
    }

    #[test]
    fn builtin_families_monotone_and_positive() {
        let samples: Vec<f64> = (0..12).map(|k| 0.1 * 1.7f64.powi(k)).collect();
        for pair in [
            power_pair(0.5, 3.0).unwrap(),
            power_pair(1.0, 1.0).unwrap(),
            coupled_power(2.0, 0.25).unwrap(),
        ] {
            assert!(audit_monotonicity(&pair, &samples));
            assert!(audit_positivity(&pair, &samples));
            assert!(hypothesis_warnings(&pair).is_empty());
        }
    }

    #[test]
    fn decreasing_nonlinearity_is_flagged() {
        let f1: BivariateFn<f64> = Arc::new(|_u, v| 1.0 / (1.0 + v));
        let f2: BivariateFn<f64> = Arc::new(|u, _v| u);
        let pair = NonlinearityPair::custom(
            "bad",
            f1,
            f2,
            Envelope::power(1.0, 1.0),
            Envelope::power(1.0, 1.0),
        );
        assert!(!audit_monotonicity(&pair, &[0.5, 1.0, 2.0]));
        assert!(!hypothesis_warnings(&pair).is_empty());
    }

    #[test]
    fn problem_defaults_and_validation() {
        let pair = power_pair(1.0, 1.0).unwrap();
        let w = [WeightFn::Constant(1.0), WeightFn::Constant(1.0)];
        let spec = ProblemSpec::new(3, 0.5, 2.0, w.clone(), pair.clone()).unwrap();
        assert_eq!(spec.m, [2.0, 1.0]);
        assert_eq!(spec.eps, 0.5);
        assert_eq!(
            ProblemSpec::new(2, 1.0, 1.0, w.clone(), pair.clone()).unwrap_err(),
            ModelError::DimensionTooSmall(2)
        );
        assert!(matches!(
            ProblemSpec::new(3, 0.0, 1.0, w.clone(), pair.clone()),
            Err(ModelError::NonPositiveCenter { which: 1, .. })
        ));
        assert!(matches!(
            spec.clone().with_m(Component::U, 1.5),
            Err(ModelError::MTooSmall { which: 1, .. })
        ));
        assert!(spec.with_eps(0.0).is_err());
    }
}
