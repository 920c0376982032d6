//! Monotone tables for the growth functionals and their limits at infinity.
//!
//! Two kinds of table live here. Value-domain tables ([`FunctionTable`]) hold
//! `Z` and the Keller–Osserman integrals `KO₁`, `KO₂` as functions of the
//! solution value `s`, on geometric nodes so that they reach very large `s`
//! cheaply. Radial tables hold `Pᵢ`, `φᵢ`, `P̄ᵢ`, `P̄ᵢε`, `P̲`, `Q̲` on a
//! [`RadialGrid`]. Limits at infinity are decided by [`classify_limit`] from
//! values at doubling radii.

use std::sync::Arc;

use thiserror::Error;

use crate::grid::{
    cumulative_integral, cumulative_trapezoid, nested_radial_integral, running_max, GridError,
    RadialGrid, SampledFn,
};
use crate::model::{eval_weight_on_grid, Component, ModelError, ProblemSpec, WeightFn};
use crate::scalar::Scalar;

/// Hard ceiling on the value-domain abscissa of `Z` and `KO` tables.
pub const VALUE_CAP: f64 = 1e12;

/// Cells used to integrate `f(t, t)` on `[0, aᵢ]` before the geometric part of a `KO` table.
const KO_HEAD_CELLS: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("f1(t,t) + f2(t,t) vanishes at t = {at}")]
    ZeroDenominator { at: f64 },
    #[error("inner integral of f(t,t) vanishes at s = {at}")]
    ZeroInnerIntegral { at: f64 },
    #[error("table ordinates decrease at index {index}")]
    NotStrictlyMonotone { index: usize },
    #[error("query {query} outside table range [{lo}, {hi}]")]
    BeyondRange { query: f64, lo: f64, hi: f64 },
    #[error("P1+P2 = {query} exceeds the tabulated range of Z (max {max})")]
    BeyondZRange { query: f64, max: f64 },
    #[error("P1+P2 = {query} exceeds the range of Z even after growth (max {max})")]
    ZRangeExhausted { query: f64, max: f64 },
    #[error("monotone radius for r^(2N-2) p(r) was not found")]
    MonotoneRadiusNotFound,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Piecewise-linear monotone function given by samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionTable<T> {
    abscissae: Vec<T>,
    ordinates: Vec<T>,
}

impl<T: Scalar> FunctionTable<T> {
    /// Abscissae must increase strictly, ordinates must not decrease.
    pub fn new(abscissae: Vec<T>, ordinates: Vec<T>) -> Result<Self, TransformError> {
        if abscissae.len() != ordinates.len() || abscissae.len() < 2 {
            return Err(TransformError::InvalidArgument(format!(
                "table needs matching lengths >= 2, got {} and {}",
                abscissae.len(),
                ordinates.len()
            )));
        }
        if abscissae.iter().chain(&ordinates).any(|v| !v.is_finite()) {
            return Err(TransformError::InvalidArgument(
                "non-finite table entry".into(),
            ));
        }
        if abscissae.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(TransformError::InvalidArgument(
                "abscissae must increase strictly".into(),
            ));
        }
        if let Some(i) = ordinates.windows(2).position(|w| w[1] < w[0]) {
            return Err(TransformError::NotStrictlyMonotone { index: i + 1 });
        }
        Ok(Self {
            abscissae,
            ordinates,
        })
    }

    pub fn abscissae(&self) -> &[T] {
        &self.abscissae
    }

    pub fn ordinates(&self) -> &[T] {
        &self.ordinates
    }

    pub fn domain(&self) -> (T, T) {
        (self.abscissae[0], *self.abscissae.last().unwrap())
    }

    pub fn range(&self) -> (T, T) {
        (self.ordinates[0], *self.ordinates.last().unwrap())
    }

    pub fn eval(&self, x: T) -> Result<T, TransformError> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(TransformError::BeyondRange {
                query: x.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        let n = self.abscissae.len();
        let k = self
            .abscissae
            .partition_point(|&a| a <= x)
            .saturating_sub(1)
            .min(n - 2);
        let (x0, x1) = (self.abscissae[k], self.abscissae[k + 1]);
        let (y0, y1) = (self.ordinates[k], self.ordinates[k + 1]);
        Ok(y0 + (x - x0) / (x1 - x0) * (y1 - y0))
    }

    /// Width of the abscissa cell containing `x`.
    pub fn cell_width_at(&self, x: T) -> T {
        let n = self.abscissae.len();
        let k = self
            .abscissae
            .partition_point(|&a| a <= x)
            .saturating_sub(1)
            .min(n - 2);
        self.abscissae[k + 1] - self.abscissae[k]
    }
}

/// Swaps abscissae and ordinates. Runs of equal ordinates collapse to their
/// first entry, so a flat span inverts to its left endpoint.
pub fn invert_table<T: Scalar>(t: &FunctionTable<T>) -> Result<FunctionTable<T>, TransformError> {
    let mut xs = Vec::with_capacity(t.ordinates.len());
    let mut ys = Vec::with_capacity(t.ordinates.len());
    for (i, (&y, &x)) in t.ordinates.iter().zip(&t.abscissae).enumerate() {
        match xs.last() {
            Some(&prev) if y < prev => {
                return Err(TransformError::NotStrictlyMonotone { index: i });
            }
            Some(&prev) if y == prev => continue,
            _ => {
                xs.push(y);
                ys.push(x);
            }
        }
    }
    if xs.len() < 2 {
        return Err(TransformError::NotStrictlyMonotone { index: 0 });
    }
    FunctionTable::new(xs, ys)
}

/// Radial table that may be undefined beyond some radius (for instance where
/// `P₁ + P₂` leaves the range of `Z`).
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFn<T> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<Option<T>>,
    gap: Option<String>,
}

impl<T: Scalar> PartialFn<T> {
    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    pub fn get(&self, k: usize) -> Option<T> {
        self.values[k]
    }

    /// Why some entries are missing, if any are.
    pub fn gap(&self) -> Option<&str> {
        self.gap.as_deref()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn at(&self, r: T) -> Option<T> {
        let nodes = self.grid.nodes();
        if r <= T::zero() {
            return self.values[0];
        }
        if r >= self.grid.r_max() {
            return *self.values.last().unwrap();
        }
        let k = self.grid.locate(r);
        let (a, b) = (self.values[k]?, self.values[k + 1]?);
        let w = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
        Some(a + w * (b - a))
    }

    pub fn to_sampled(&self) -> Option<SampledFn<T>> {
        let vals: Option<Vec<T>> = self.values.iter().copied().collect();
        SampledFn::new(self.grid.clone(), vals?).ok()
    }

    fn from_results(grid: Arc<RadialGrid<T>>, items: Vec<Result<T, TransformError>>) -> Self {
        let mut gap = None;
        let values = items
            .into_iter()
            .map(|r| match r {
                Ok(v) => Some(v),
                Err(e) => {
                    gap.get_or_insert_with(|| e.to_string());
                    None
                }
            })
            .collect();
        Self { grid, values, gap }
    }
}

/// Incrementally extended value-domain table on geometric nodes `s_{k+1} = q s_k`.
#[derive(Debug, Clone)]
struct ValueTable<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    ratio: T,
    kind: ValueKind<T>,
}

#[derive(Debug, Clone, Copy)]
enum ValueKind<T> {
    Z,
    /// `inner` is `∫_0^s f(t,t) dt` at the last node.
    Ko {
        which: Component,
        inner: T,
    },
}

impl<T: Scalar> ValueTable<T> {
    fn z(spec: &ProblemSpec<T>, ratio: T) -> Result<Self, TransformError> {
        let lo = spec.a[0] + spec.a[1];
        let t = Self {
            xs: vec![lo],
            ys: vec![T::zero()],
            ratio,
            kind: ValueKind::Z,
        };
        t.integrand(spec, lo)?;
        Ok(t)
    }

    fn ko(spec: &ProblemSpec<T>, which: Component, ratio: T) -> Result<Self, TransformError> {
        let a = spec.a(which);
        let head: Vec<T> = (0..=KO_HEAD_CELLS)
            .map(|k| a * T::from_usize(k).unwrap() / T::from_usize(KO_HEAD_CELLS).unwrap())
            .collect();
        let fvals: Vec<T> = head
            .iter()
            .map(|&t| spec.nonlin.diagonal(which, t))
            .collect();
        let inner = *cumulative_trapezoid(&head, &fvals).last().unwrap();
        let t = Self {
            xs: vec![a],
            ys: vec![T::zero()],
            ratio,
            kind: ValueKind::Ko { which, inner },
        };
        t.integrand(spec, a)?;
        Ok(t)
    }

    fn integrand(&self, spec: &ProblemSpec<T>, s: T) -> Result<T, TransformError> {
        match self.kind {
            ValueKind::Z => {
                let d =
                    spec.nonlin.diagonal(Component::U, s) + spec.nonlin.diagonal(Component::V, s);
                if !(d > T::zero()) || !d.is_finite() {
                    return Err(TransformError::ZeroDenominator {
                        at: s.to_f64_lossy(),
                    });
                }
                Ok(T::one() / d)
            }
            ValueKind::Ko { inner, .. } => {
                if !(inner > T::zero()) || !inner.is_finite() {
                    return Err(TransformError::ZeroInnerIntegral {
                        at: s.to_f64_lossy(),
                    });
                }
                Ok(T::one() / inner.sqrt())
            }
        }
    }

    fn last_x(&self) -> T {
        *self.xs.last().unwrap()
    }

    fn last_y(&self) -> T {
        *self.ys.last().unwrap()
    }

    fn extend_to(&mut self, spec: &ProblemSpec<T>, s_max: T) -> Result<(), TransformError> {
        let half = T::lit(0.5);
        let mut x = self.last_x();
        let mut g = self.integrand(spec, x)?;
        while x < s_max {
            let next = (x * self.ratio).min(s_max.max(x * self.ratio));
            if let ValueKind::Ko {
                which,
                ref mut inner,
            } = self.kind
            {
                let fa = spec.nonlin.diagonal(which, x);
                let fb = spec.nonlin.diagonal(which, next);
                *inner = *inner + half * (fa + fb) * (next - x);
            }
            let g_next = self.integrand(spec, next)?;
            let y = self.last_y() + half * (g + g_next) * (next - x);
            self.xs.push(next);
            self.ys.push(y);
            x = next;
            g = g_next;
        }
        Ok(())
    }

    fn table(&self) -> FunctionTable<T> {
        FunctionTable {
            abscissae: self.xs.clone(),
            ordinates: self.ys.clone(),
        }
    }
}

const DEFAULT_VALUE_RATIO: f64 = 1.0 + 1.0 / 1024.0;

/// `Z(s) = ∫_{a₁+a₂}^s dt / (f₁(t,t) + f₂(t,t))` on `[a₁+a₂, s_max]`.
pub fn compute_z<T: Scalar>(
    spec: &ProblemSpec<T>,
    s_max: T,
) -> Result<FunctionTable<T>, TransformError> {
    compute_z_with_ratio(spec, s_max, T::lit(DEFAULT_VALUE_RATIO))
}

pub fn compute_z_with_ratio<T: Scalar>(
    spec: &ProblemSpec<T>,
    s_max: T,
    ratio: T,
) -> Result<FunctionTable<T>, TransformError> {
    let lo = spec.a[0] + spec.a[1];
    if !(s_max > lo) {
        return Err(TransformError::InvalidArgument(format!(
            "s_max {s_max} must exceed a1 + a2 = {lo}"
        )));
    }
    let mut t = ValueTable::z(spec, ratio)?;
    t.extend_to(spec, s_max)?;
    Ok(t.table())
}

/// `KOᵢ(s) = ∫_{aᵢ}^s (∫_0^σ fᵢ(t,t) dt)^{-1/2} dσ` on `[aᵢ, s_max]`.
pub fn compute_ko<T: Scalar>(
    spec: &ProblemSpec<T>,
    which: Component,
    s_max: T,
) -> Result<FunctionTable<T>, TransformError> {
    compute_ko_with_ratio(spec, which, s_max, T::lit(DEFAULT_VALUE_RATIO))
}

pub fn compute_ko_with_ratio<T: Scalar>(
    spec: &ProblemSpec<T>,
    which: Component,
    s_max: T,
    ratio: T,
) -> Result<FunctionTable<T>, TransformError> {
    let a = spec.a(which);
    if !(s_max > a) {
        return Err(TransformError::InvalidArgument(format!(
            "s_max {s_max} must exceed a{} = {a}",
            which.label()
        )));
    }
    let mut t = ValueTable::ko(spec, which, ratio)?;
    t.extend_to(spec, s_max)?;
    Ok(t.table())
}

/// `Pᵢ(r) = ∫_0^r z^{1-N} ∫_0^z t^{N-1} pᵢ(t) dt dz`.
pub fn compute_p<T: Scalar>(
    spec: &ProblemSpec<T>,
    which: Component,
    grid: &Arc<RadialGrid<T>>,
) -> Result<SampledFn<T>, TransformError> {
    let p = eval_weight_on_grid(spec.weight(which), grid)?;
    Ok(nested_radial_integral(&p, spec.n_dim)?)
}

/// `Z⁻¹` together with what happens beyond its table.
#[derive(Debug, Clone)]
pub struct ZInverse<T> {
    table: FunctionTable<T>,
    /// True once the growth policy has given up extending `Z`.
    exhausted: bool,
}

impl<T: Scalar> ZInverse<T> {
    pub fn new(z: &FunctionTable<T>) -> Result<Self, TransformError> {
        Ok(Self {
            table: invert_table(z)?,
            exhausted: false,
        })
    }

    pub fn table(&self) -> &FunctionTable<T> {
        &self.table
    }

    pub fn eval(&self, y: T) -> Result<T, TransformError> {
        let (_, max) = self.table.domain();
        if y > max {
            let (query, max) = (y.to_f64_lossy(), max.to_f64_lossy());
            return Err(if self.exhausted {
                TransformError::ZRangeExhausted { query, max }
            } else {
                TransformError::BeyondZRange { query, max }
            });
        }
        self.table.eval(y.max(T::zero()))
    }
}

fn growth_factor<T: Scalar>(
    spec: &ProblemSpec<T>,
    which: Component,
    z_inv: &ZInverse<T>,
    p_sum: T,
) -> Result<T, TransformError> {
    let s = z_inv.eval(p_sum)?;
    let m = spec.m[which.index()];
    Ok((spec.nonlin.envelope(which).f_bar)(m * (T::one() + s)))
}

/// `P̄ᵢ(r) = √(f̄ᵢ(Mᵢ(1 + Z⁻¹(P₁(r) + P₂(r))))) · ∫_0^r √φᵢ(s) ds`.
pub fn compute_pbar<T: Scalar>(
    spec: &ProblemSpec<T>,
    which: Component,
    p_sum: &SampledFn<T>,
    phi: &SampledFn<T>,
    z_inv: &ZInverse<T>,
) -> PartialFn<T> {
    let root_phi = cumulative_integral(&phi.map(|v| v.max(T::zero()).sqrt()).expect("finite"));
    let items = p_sum
        .values()
        .iter()
        .zip(root_phi.values())
        .map(|(&y, &integral)| {
            if integral == T::zero() {
                return Ok(T::zero());
            }
            Ok(growth_factor(spec, which, z_inv, y)?.sqrt() * integral)
        })
        .collect();
    PartialFn::from_results(p_sum.grid().clone(), items)
}

/// `P̄ᵢε(r) = f̄ᵢ(Mᵢ(1 + Z⁻¹(P₁(r) + P₂(r)))) · ∫_R^r t^{1+ε} pᵢ(t) dt`, zero for `r ≤ R`.
pub fn compute_pbar_eps<T: Scalar>(
    spec: &ProblemSpec<T>,
    which: Component,
    p_sum: &SampledFn<T>,
    z_inv: &ZInverse<T>,
    r_monotone: Option<T>,
) -> Result<PartialFn<T>, TransformError> {
    let big_r = r_monotone.ok_or(TransformError::MonotoneRadiusNotFound)?;
    let grid = p_sum.grid().clone();
    let p = eval_weight_on_grid(spec.weight(which), &grid)?;
    let expo = T::one() + spec.eps;
    let weighted = p.zip_with(
        &SampledFn::from_fn(grid.clone(), |t| t.powf(expo))?,
        |a, b| a * b,
    )?;
    let cum = cumulative_integral(&weighted);
    let base = cum.at(big_r);
    let items = grid
        .nodes()
        .iter()
        .zip(p_sum.values())
        .zip(cum.values())
        .map(|((&r, &y), &c)| {
            let integral = if r <= big_r {
                T::zero()
            } else {
                (c - base).max(T::zero())
            };
            if integral == T::zero() {
                return Ok(T::zero());
            }
            Ok(growth_factor(spec, which, z_inv, y)? * integral)
        })
        .collect();
    Ok(PartialFn::from_results(grid, items))
}

/// Lower-bound functionals
/// `P̲(r) = ∫_0^r y^{1-N} ∫_0^y t^{N-1} p₁(t) f₁(a₁, a₂ + f₂(a₁,a₂) P₂(t)) dt dy` and
/// `Q̲(r) = ∫_0^r y^{1-N} ∫_0^y t^{N-1} p₂(t) f₂(a₁ + f₁(a₁,a₂) P₁(t), a₂) dt dy`.
pub fn compute_lower_bounds<T: Scalar>(
    spec: &ProblemSpec<T>,
    p1: &SampledFn<T>,
    p2: &SampledFn<T>,
) -> Result<(SampledFn<T>, SampledFn<T>), TransformError> {
    let grid = p1.grid().clone();
    let [a1, a2] = spec.a;
    let f = &spec.nonlin;
    let f1_0 = f.eval(Component::U, a1, a2);
    let f2_0 = f.eval(Component::V, a1, a2);
    let w1 = eval_weight_on_grid(spec.weight(Component::U), &grid)?;
    let w2 = eval_weight_on_grid(spec.weight(Component::V), &grid)?;
    let g1 = w1.zip_with(p2, |w, p| w * f.eval(Component::U, a1, a2 + f2_0 * p))?;
    let g2 = w2.zip_with(p1, |w, p| w * f.eval(Component::V, a1 + f1_0 * p, a2))?;
    Ok((
        nested_radial_integral(&g1, spec.n_dim)?,
        nested_radial_integral(&g2, spec.n_dim)?,
    ))
}

/// Smallest node `R` such that `r^{2N-2} p(r)` is nondecreasing (to `1e-10`
/// relative) on every node from `R` on; `None` if the last cell already decreases.
pub fn detect_monotone_radius<T: Scalar>(
    w: &WeightFn<T>,
    n_dim: usize,
    grid: &RadialGrid<T>,
) -> Option<T> {
    let pow = (2 * n_dim - 2) as i32;
    let g: Vec<T> = grid
        .nodes()
        .iter()
        .map(|&r| r.powi(pow) * w.eval(r))
        .collect();
    let tol = T::one() - T::lit(1e-10);
    match g.windows(2).rposition(|w| w[1] < w[0] * tol) {
        None => Some(grid.nodes()[0]),
        Some(k) if k + 2 == g.len() => None,
        Some(k) => Some(grid.nodes()[k + 1]),
    }
}

/// Outcome of a limit-at-infinity test.
#[derive(Debug, Clone, PartialEq)]
pub enum LimitVerdict<T> {
    Finite(T),
    Divergent(String),
    Inconclusive(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitClass<T> {
    pub verdict: LimitVerdict<T>,
    /// `(radius, value)` samples that were examined.
    pub evidence: Vec<(T, T)>,
}

impl<T: Scalar> LimitClass<T> {
    pub fn inconclusive(reason: impl Into<String>) -> Self {
        Self {
            verdict: LimitVerdict::Inconclusive(reason.into()),
            evidence: Vec::new(),
        }
    }

    pub fn finite_value(&self) -> Option<T> {
        match self.verdict {
            LimitVerdict::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.verdict, LimitVerdict::Finite(_))
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self.verdict, LimitVerdict::Divergent(_))
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self.verdict, LimitVerdict::Inconclusive(_))
    }

    pub fn summary(&self) -> String {
        match &self.verdict {
            LimitVerdict::Finite(v) => format!("finite ({v:.6e})"),
            LimitVerdict::Divergent(n) => format!("divergent ({n})"),
            LimitVerdict::Inconclusive(n) => format!("inconclusive ({n})"),
        }
    }
}

/// Radii and thresholds for the doubling test, plus table resolutions.
#[derive(Debug, Clone, PartialEq)]
pub struct TailPolicy<T> {
    /// First radius `R₀`; samples are taken at `R₀ 2^k`, `k = 0..=doublings`.
    pub start: T,
    pub doublings: usize,
    pub rel_tol: T,
    pub div_threshold: T,
    pub growth_floor: T,
    /// Per-doubling increment below which constant increments count as zero.
    pub log_abs_tol: T,
    /// Increments whose ratio stays within `1 ± log_band` count as logarithmic growth.
    pub log_band: T,
    /// Cell growth ratio of the geometric radial grid used for tails.
    pub radial_ratio: T,
    /// Node ratio of value-domain tables.
    pub value_ratio: T,
}

impl<T: Scalar> Default for TailPolicy<T> {
    fn default() -> Self {
        Self {
            start: T::one(),
            doublings: 20,
            rel_tol: T::lit(1e-3),
            div_threshold: T::lit(1e6),
            growth_floor: T::lit(1.1),
            log_abs_tol: T::lit(1e-6),
            log_band: T::lit(0.01),
            radial_ratio: T::lit(1.005),
            value_ratio: T::lit(DEFAULT_VALUE_RATIO),
        }
    }
}

impl<T: Scalar> TailPolicy<T> {
    /// Resolutions scaled to a solution grid with `cells` cells, so that
    /// refining the solution grid also refines the tail tables.
    pub fn for_grid_cells(cells: usize) -> Self {
        let m = T::from_usize(cells.max(1)).unwrap();
        let cap = T::lit(1.2);
        Self {
            radial_ratio: (T::one() + T::lit(10.0) / m).min(cap),
            value_ratio: (T::one() + T::lit(2.0) / m).min(cap),
            ..Self::default()
        }
    }

    pub fn with_start(&self, start: T) -> Self {
        Self {
            start,
            ..self.clone()
        }
    }

    pub fn last_radius(&self) -> T {
        self.start * T::lit(2f64.powi(self.doublings as i32))
    }
}

/// Decides `lim_{r→∞} F(r)` from `F(R₀ 2^k)`, `k = 0..=K`.
///
/// * `Divergent` as soon as `|F| > div_threshold`;
/// * `Finite(F(R₀ 2^K))` if each of the last two doublings changes `F` by at
///   most `rel_tol · |F|`;
/// * `Divergent` if the last three increment ratios are all `≥ growth_floor`,
///   or all within `1 ± log_band` with increments above `log_abs_tol`
///   (logarithmic growth);
/// * `Inconclusive` otherwise, or when an evaluation fails.
pub fn classify_limit<T, F>(mut tail: F, policy: &TailPolicy<T>) -> LimitClass<T>
where
    T: Scalar,
    F: FnMut(T) -> Result<T, TransformError>,
{
    let mut evidence: Vec<(T, T)> = Vec::with_capacity(policy.doublings + 1);
    let mut r = policy.start;
    let two = T::lit(2.0);
    let done = |verdict, evidence| LimitClass { verdict, evidence };
    for _ in 0..=policy.doublings {
        match tail(r) {
            Ok(v) if v.is_nan() => {
                return done(
                    LimitVerdict::Inconclusive(format!("NaN at r = {r}")),
                    evidence,
                )
            }
            Ok(v) => {
                evidence.push((r, v));
                if !v.is_finite() || v.abs() > policy.div_threshold {
                    return done(
                        LimitVerdict::Divergent(format!(
                            "exceeds {} at r = {r}",
                            policy.div_threshold
                        )),
                        evidence,
                    );
                }
            }
            Err(e) => {
                return done(
                    LimitVerdict::Inconclusive(format!("evaluation failed at r = {r}: {e}")),
                    evidence,
                )
            }
        }
        r = r * two;
    }

    let vals: Vec<T> = evidence.iter().map(|e| e.1).collect();
    let n = vals.len();
    if n < 3 {
        return done(
            LimitVerdict::Inconclusive("fewer than three tail samples".into()),
            evidence,
        );
    }
    let settled = |k: usize| (vals[k] - vals[k - 1]).abs() <= policy.rel_tol * vals[k].abs();
    if settled(n - 1) && settled(n - 2) {
        return done(LimitVerdict::Finite(vals[n - 1]), evidence);
    }

    let incs: Vec<T> = vals.windows(2).map(|w| w[1] - w[0]).collect();
    let recent = &incs[incs.len().saturating_sub(4)..];
    if recent.len() >= 2 && recent.iter().all(|&d| d > T::zero()) {
        let ratios: Vec<T> = recent.windows(2).map(|w| w[1] / w[0]).collect();
        if ratios.iter().all(|&q| q >= policy.growth_floor) {
            return done(
                LimitVerdict::Divergent(format!(
                    "increments grow by >= {} per doubling",
                    policy.growth_floor
                )),
                evidence,
            );
        }
        if recent.iter().all(|&d| d > policy.log_abs_tol)
            && ratios
                .iter()
                .all(|&q| (q - T::one()).abs() <= policy.log_band)
        {
            return done(
                LimitVerdict::Divergent("logarithmic growth".into()),
                evidence,
            );
        }
    }
    done(
        LimitVerdict::Inconclusive("tail neither settled nor grew".into()),
        evidence,
    )
}

/// Radial functionals on one grid.
#[derive(Debug, Clone)]
struct RadialTables<T> {
    p: [SampledFn<T>; 2],
    phi: [SampledFn<T>; 2],
    p_sum: SampledFn<T>,
    pbar: [PartialFn<T>; 2],
    pbar_eps: [Option<PartialFn<T>>; 2],
    lower: [SampledFn<T>; 2],
    zinv_bound: PartialFn<T>,
}

type Pair<T> = [SampledFn<T>; 2];

fn p_and_phi<T: Scalar>(
    spec: &ProblemSpec<T>,
    grid: &Arc<RadialGrid<T>>,
) -> Result<(Pair<T>, Pair<T>), TransformError> {
    let p = [
        compute_p(spec, Component::U, grid)?,
        compute_p(spec, Component::V, grid)?,
    ];
    let phi = [
        running_max(&eval_weight_on_grid(spec.weight(Component::U), grid)?),
        running_max(&eval_weight_on_grid(spec.weight(Component::V), grid)?),
    ];
    Ok((p, phi))
}

fn radial_tables<T: Scalar>(
    spec: &ProblemSpec<T>,
    p: [SampledFn<T>; 2],
    phi: [SampledFn<T>; 2],
    z_inv: &ZInverse<T>,
    r_monotone: [Option<T>; 2],
) -> Result<RadialTables<T>, TransformError> {
    let grid = p[0].grid().clone();
    let p_sum = p[0].zip_with(&p[1], |a, b| a + b)?;
    let pbar = Component::BOTH.map(|c| compute_pbar(spec, c, &p_sum, &phi[c.index()], z_inv));
    let pbar_eps = Component::BOTH
        .map(|c| compute_pbar_eps(spec, c, &p_sum, z_inv, r_monotone[c.index()]).ok());
    let (pl, ql) = compute_lower_bounds(spec, &p[0], &p[1])?;
    let zinv_bound = PartialFn::from_results(
        grid,
        p_sum.values().iter().map(|&y| z_inv.eval(y)).collect(),
    );
    Ok(RadialTables {
        p,
        phi,
        p_sum,
        pbar,
        pbar_eps,
        lower: [pl, ql],
        zinv_bound,
    })
}

/// Limits at infinity of every functional that enters the classification.
#[derive(Debug, Clone)]
pub struct ProfileLimits<T> {
    /// `KO₁(∞)`, `KO₂(∞)`
    pub ko: [LimitClass<T>; 2],
    /// `Z(∞)`
    pub z: LimitClass<T>,
    /// `P̄₁(∞)`, `P̄₂(∞)`
    pub pbar: [LimitClass<T>; 2],
    /// `P̄₁ε(∞)`, `P̄₂ε(∞)`
    pub pbar_eps: [LimitClass<T>; 2],
    /// `P̲(∞)`, `Q̲(∞)`
    pub lower: [LimitClass<T>; 2],
}

/// Upper bound `KO⁻¹(y)` or the reason it is not available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KoBound<T> {
    Value(T),
    /// `y ≥ KO(∞) < ∞`: the bound is `+∞`.
    Vacuous,
    /// `KO` diverges but the table stops before `y` is reached.
    Unavailable,
}

/// Every functional, tabulated on one grid, plus the limits at infinity.
#[derive(Debug, Clone)]
pub struct IntegralProfile<T> {
    grid: Arc<RadialGrid<T>>,
    /// `P₁`, `P₂`
    pub p: [SampledFn<T>; 2],
    /// `φ₁`, `φ₂`
    pub phi: [SampledFn<T>; 2],
    pub p_sum: SampledFn<T>,
    /// `P̄₁`, `P̄₂`
    pub pbar: [PartialFn<T>; 2],
    /// `P̄₁ε`, `P̄₂ε`; present when the matching monotone radius exists.
    pub pbar_eps: [Option<PartialFn<T>>; 2],
    /// `P̲`, `Q̲`
    pub lower: [SampledFn<T>; 2],
    /// `Z⁻¹(P₁ + P₂)` at every node.
    pub zinv_bound: PartialFn<T>,
    pub z: FunctionTable<T>,
    pub z_inv: ZInverse<T>,
    /// `KO₁`, `KO₂`
    pub ko: [FunctionTable<T>; 2],
    pub ko_inv: [FunctionTable<T>; 2],
    /// `R` with `r^{2N-2} pᵢ(r)` nondecreasing beyond it.
    pub r_monotone: [Option<T>; 2],
    pub limits: ProfileLimits<T>,
}

impl<T: Scalar> IntegralProfile<T> {
    /// Tabulates every functional on `grid` and classifies the limits at
    /// infinity on an auxiliary geometric grid reaching `policy.last_radius()`.
    pub fn build(
        spec: &ProblemSpec<T>,
        grid: Arc<RadialGrid<T>>,
        policy: &TailPolicy<T>,
    ) -> Result<Self, TransformError> {
        spec.validate()?;
        let cap = T::lit(VALUE_CAP);
        let tail_r = policy.last_radius().max(grid.r_max());
        let first_step = T::lit(1e-3).min(grid.nodes()[1]);
        let tail_grid = Arc::new(RadialGrid::geometric_with_first_step(
            tail_r,
            first_step,
            policy.radial_ratio,
        )?);

        // Z and its limit
        let lo = spec.a[0] + spec.a[1];
        let mut z_builder = ValueTable::z(spec, policy.value_ratio)?;
        z_builder.extend_to(spec, policy.with_start(lo).last_radius())?;
        let z_limit = {
            let table = z_builder.table();
            classify_limit(|s| table.eval(s), &policy.with_start(lo))
        };

        let (p_sol, phi_sol) = p_and_phi(spec, &grid)?;
        let (p_tail, phi_tail) = p_and_phi(spec, &tail_grid)?;
        let need = p_sol[0]
            .values()
            .iter()
            .zip(p_sol[1].values())
            .chain(p_tail[0].values().iter().zip(p_tail[1].values()))
            .map(|(a, b)| *a + *b)
            .fold(T::zero(), T::max);
        let mut exhausted = false;
        while z_builder.last_y() < need {
            if z_limit.is_finite() || z_builder.last_x() >= cap {
                exhausted = true;
                break;
            }
            let next = (z_builder.last_x() * T::lit(2.0)).min(cap);
            z_builder.extend_to(spec, next)?;
        }
        let z = z_builder.table();
        let z_inv = ZInverse {
            table: invert_table(&z)?,
            exhausted,
        };

        let r_monotone =
            Component::BOTH.map(|c| detect_monotone_radius(spec.weight(c), spec.n_dim, &tail_grid));
        let sol = radial_tables(spec, p_sol, phi_sol, &z_inv, r_monotone)?;
        let tail = radial_tables(spec, p_tail, phi_tail, &z_inv, r_monotone)?;

        // KO tables, grown to cover the upper bounds needed on the solution grid
        let mut ko = Vec::with_capacity(2);
        let mut ko_limits = Vec::with_capacity(2);
        for c in Component::BOTH {
            let a = spec.a(c);
            let mut b = ValueTable::ko(spec, c, policy.value_ratio)?;
            b.extend_to(spec, policy.with_start(a).last_radius())?;
            let table = b.table();
            let lim = classify_limit(|s| table.eval(s), &policy.with_start(a));
            let scale = (T::lit(2.0) * spec.nonlin.envelope(c).c_bar).sqrt();
            let need = sol.pbar[c.index()]
                .values()
                .iter()
                .flatten()
                .map(|&v| scale * v)
                .fold(T::zero(), T::max);
            while b.last_y() < need && !lim.is_finite() && b.last_x() < cap {
                let next = (b.last_x() * T::lit(2.0)).min(cap);
                b.extend_to(spec, next)?;
            }
            ko.push(b.table());
            ko_limits.push(lim);
        }
        let ko: [FunctionTable<T>; 2] = [ko[0].clone(), ko[1].clone()];
        let ko_inv = [invert_table(&ko[0])?, invert_table(&ko[1])?];
        let ko_limits = [ko_limits[0].clone(), ko_limits[1].clone()];

        let sampled = |f: &SampledFn<T>, pol: &TailPolicy<T>| classify_limit(|r| Ok(f.at(r)), pol);
        let partial = |f: &PartialFn<T>, pol: &TailPolicy<T>| {
            classify_limit(
                |r| {
                    f.at(r).ok_or_else(|| {
                        TransformError::InvalidArgument(
                            f.gap().unwrap_or("value unavailable").to_string(),
                        )
                    })
                },
                pol,
            )
        };
        let limits = ProfileLimits {
            ko: ko_limits,
            z: z_limit,
            pbar: [
                partial(&tail.pbar[0], policy),
                partial(&tail.pbar[1], policy),
            ],
            pbar_eps: Component::BOTH.map(|c| match &tail.pbar_eps[c.index()] {
                Some(t) => partial(t, policy),
                None => LimitClass::inconclusive(format!(
                    "r^(2N-2) p{}(r) is not nondecreasing for large r",
                    c.label()
                )),
            }),
            lower: [
                sampled(&tail.lower[0], policy),
                sampled(&tail.lower[1], policy),
            ],
        };

        Ok(Self {
            grid,
            p: sol.p,
            phi: sol.phi,
            p_sum: sol.p_sum,
            pbar: sol.pbar,
            pbar_eps: sol.pbar_eps,
            lower: sol.lower,
            zinv_bound: sol.zinv_bound,
            z,
            z_inv,
            ko,
            ko_inv,
            r_monotone,
            limits,
        })
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn plower(&self) -> &SampledFn<T> {
        &self.lower[0]
    }

    pub fn qlower(&self) -> &SampledFn<T> {
        &self.lower[1]
    }

    /// `KOᵢ⁻¹(y)`, classified when `y` lies beyond the table.
    pub fn ko_inverse(&self, which: Component, y: T) -> KoBound<T> {
        let inv = &self.ko_inv[which.index()];
        let (_, top) = inv.domain();
        if y <= top {
            return KoBound::Value(inv.eval(y.max(T::zero())).expect("inside table"));
        }
        if self.limits.ko[which.index()].is_finite() {
            KoBound::Vacuous
        } else {
            KoBound::Unavailable
        }
    }

    /// `KOᵢ⁻¹(√(2c̄ᵢ) P̄ᵢ(r_k))` at node `k`; `None` where `P̄ᵢ` is undefined.
    pub fn ko_bound_at(
        &self,
        spec: &ProblemSpec<T>,
        which: Component,
        k: usize,
    ) -> Option<KoBound<T>> {
        let scale = (T::lit(2.0) * spec.nonlin.envelope(which).c_bar).sqrt();
        self.pbar[which.index()]
            .get(k)
            .map(|pb| self.ko_inverse(which, scale * pb))
    }
}
