//! Radial grids and the fixed-grid quadrature kernels.
//!
//! Every radial functional in the crate is a table on one shared [`RadialGrid`].
//! The kernels here are composite trapezoid rules, so they are second order on
//! graded grids and monotone for nonnegative integrands.

use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;

/// Smallest number of cells a grid may have.
pub const MIN_CELLS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("grid needs at least {MIN_CELLS} cells, got {0}")]
    TooFewNodes(usize),
    #[error("geometric ratio must lie in (1, 1.2], got {0}")]
    BadRatio(f64),
    #[error("node sequence is not strictly increasing from 0")]
    NotIncreasing,
    #[error("dimension must be at least 3, got {0}")]
    DimensionTooSmall(usize),
    #[error("sample count {values} does not match grid size {nodes}")]
    LengthMismatch { nodes: usize, values: usize },
    #[error("irregular grids are built from explicit nodes")]
    IrregularWithoutNodes,
    #[error("non-finite sample at node {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading<T> {
    Uniform,
    /// Cell widths grow by this ratio from the origin outwards.
    Geometric(T),
    /// Nodes supplied by the caller.
    Irregular,
}

/// Ordered radii `0 = r_0 < r_1 < ... < r_M = R_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid<T> {
    nodes: Vec<T>,
    grading: Grading<T>,
}

impl<T: Scalar> RadialGrid<T> {
    /// Builds a grid with `cells` cells on `[0, r_max]`.
    pub fn new(r_max: T, cells: usize, grading: Grading<T>) -> Result<Self, GridError> {
        make_grid(r_max, cells, grading)
    }

    /// Geometric grid on `[0, r_max]` whose first cell is about `first_step` wide.
    pub fn geometric_with_first_step(r_max: T, first_step: T, ratio: T) -> Result<Self, GridError> {
        let one = T::one();
        if !(ratio > one) || ratio > T::lit(1.2) {
            return Err(GridError::BadRatio(ratio.to_f64_lossy()));
        }
        let cells = ((r_max * (ratio - one) / first_step + one).ln() / ratio.ln())
            .ceil()
            .to_usize()
            .unwrap_or(MIN_CELLS)
            .max(MIN_CELLS);
        make_grid(r_max, cells, Grading::Geometric(ratio))
    }

    /// Grid on caller-supplied nodes, which must start at 0 and increase strictly.
    pub fn from_nodes(nodes: Vec<T>) -> Result<Self, GridError> {
        if nodes.len() < MIN_CELLS + 1 {
            return Err(GridError::TooFewNodes(nodes.len().saturating_sub(1)));
        }
        if nodes[0] != T::zero() || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(GridError::NotIncreasing);
        }
        if let Some(k) = nodes.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(Self {
            nodes,
            grading: Grading::Irregular,
        })
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn grading(&self) -> Grading<T> {
        self.grading
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn r_max(&self) -> T {
        self.nodes[self.nodes.len() - 1]
    }

    /// Largest cell width.
    pub fn max_step(&self) -> T {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(T::zero(), T::max)
    }

    /// Index of the cell `[r_k, r_{k+1}]` containing `r`, clamped to the grid.
    pub fn locate(&self, r: T) -> usize {
        let k = self.nodes.partition_point(|&x| x <= r);
        k.saturating_sub(1).min(self.nodes.len() - 2)
    }
}

/// Builds a [`RadialGrid`]. `cells` is the number of intervals, so the grid has
/// `cells + 1` nodes.
pub fn make_grid<T: Scalar>(
    r_max: T,
    cells: usize,
    grading: Grading<T>,
) -> Result<RadialGrid<T>, GridError> {
    if !(r_max > T::zero()) || !r_max.is_finite() {
        return Err(GridError::NonPositiveRadius(r_max.to_f64_lossy()));
    }
    if cells < MIN_CELLS {
        return Err(GridError::TooFewNodes(cells));
    }
    let m = T::from_usize(cells).unwrap();
    let nodes: Vec<T> = match grading {
        Grading::Uniform => (0..=cells)
            .map(|k| {
                if k == cells {
                    r_max
                } else {
                    r_max * T::from_usize(k).unwrap() / m
                }
            })
            .collect(),
        Grading::Irregular => return Err(GridError::IrregularWithoutNodes),
        Grading::Geometric(q) => {
            if !(q > T::one()) || q > T::lit(1.2) {
                return Err(GridError::BadRatio(q.to_f64_lossy()));
            }
            // r_k = R (q^k - 1) / (q^M - 1), written with exp_m1 for accuracy near q = 1
            let lq = q.ln();
            let denom = (m * lq).exp_m1();
            (0..=cells)
                .map(|k| {
                    if k == cells {
                        r_max
                    } else {
                        r_max * (T::from_usize(k).unwrap() * lq).exp_m1() / denom
                    }
                })
                .collect()
        }
    };
    if nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(GridError::NotIncreasing);
    }
    Ok(RadialGrid { nodes, grading })
}

/// Values of a function at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFn<T> {
    grid: Arc<RadialGrid<T>>,
    values: Vec<T>,
}

impl<T: Scalar> SampledFn<T> {
    pub fn new(grid: Arc<RadialGrid<T>>, values: Vec<T>) -> Result<Self, GridError> {
        if values.len() != grid.len() {
            return Err(GridError::LengthMismatch {
                nodes: grid.len(),
                values: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(GridError::NonFinite(k));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<RadialGrid<T>>, f: impl Fn(T) -> T) -> Result<Self, GridError> {
        let values = grid.nodes().iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn zeros(grid: Arc<RadialGrid<T>>) -> Self {
        let values = vec![T::zero(); grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<RadialGrid<T>> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn last(&self) -> T {
        self.values[self.values.len() - 1]
    }

    /// Piecewise-linear interpolation, constant beyond the last node.
    pub fn at(&self, r: T) -> T {
        let nodes = self.grid.nodes();
        if r <= T::zero() {
            return self.values[0];
        }
        if r >= self.grid.r_max() {
            return self.last();
        }
        let k = self.grid.locate(r);
        let w = (r - nodes[k]) / (nodes[k + 1] - nodes[k]);
        self.values[k] + w * (self.values[k + 1] - self.values[k])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self, GridError> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self, GridError> {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::new(self.grid.clone(), values)
    }

    pub(crate) fn from_parts_unchecked(grid: Arc<RadialGrid<T>>, values: Vec<T>) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        Self { grid, values }
    }
}

/// `F(r_k) = ∫_0^{r_k} f(t) dt` by composite trapezoid.
pub fn cumulative_integral<T: Scalar>(f: &SampledFn<T>) -> SampledFn<T> {
    let values = cumulative_trapezoid(f.grid.nodes(), &f.values);
    SampledFn::from_parts_unchecked(f.grid.clone(), values)
}

pub(crate) fn cumulative_trapezoid<T: Scalar>(x: &[T], y: &[T]) -> Vec<T> {
    let half = T::lit(0.5);
    let mut acc = T::zero();
    let mut out = Vec::with_capacity(x.len());
    out.push(acc);
    for k in 1..x.len() {
        acc = acc + half * (y[k] + y[k - 1]) * (x[k] - x[k - 1]);
        out.push(acc);
    }
    out
}

/// `r ↦ ∫_0^r y^{1-N} ∫_0^y t^{N-1} g(t) dt dy`.
///
/// The inner integral integrates the piecewise-linear interpolant of `g`
/// exactly against `t^{N-1}`; the outer one is a composite trapezoid whose
/// integrand is taken as 0 at `y = 0`.
pub fn nested_radial_integral<T: Scalar>(
    g: &SampledFn<T>,
    n_dim: usize,
) -> Result<SampledFn<T>, GridError> {
    Ok(nested_with_flux(g, n_dim)?.0)
}

/// Same as [`nested_radial_integral`], also returning the flux
/// `y ↦ y^{1-N} ∫_0^y t^{N-1} g(t) dt`, which is the radial derivative of the result.
pub fn nested_with_flux<T: Scalar>(
    g: &SampledFn<T>,
    n_dim: usize,
) -> Result<(SampledFn<T>, SampledFn<T>), GridError> {
    if n_dim < 3 {
        return Err(GridError::DimensionTooSmall(n_dim));
    }
    let flux = radial_flux(g.grid.nodes(), &g.values, n_dim);
    let outer = cumulative_trapezoid(g.grid.nodes(), &flux);
    Ok((
        SampledFn::from_parts_unchecked(g.grid.clone(), outer),
        SampledFn::from_parts_unchecked(g.grid.clone(), flux),
    ))
}

pub(crate) fn radial_flux<T: Scalar>(x: &[T], g: &[T], n_dim: usize) -> Vec<T> {
    let n = n_dim as i32;
    let nf = T::from_usize(n_dim).unwrap();
    let n1 = nf + T::one();
    let mut out = Vec::with_capacity(x.len());
    out.push(T::zero());
    let mut inner = T::zero();
    for k in 1..x.len() {
        let (a, b) = (x[k - 1], x[k]);
        let h = b - a;
        // moments ∫_a^b t^{N-1} dt and ∫_a^b t^N dt
        let m0 = (b.powi(n) - a.powi(n)) / nf;
        let m1 = (b.powi(n + 1) - a.powi(n + 1)) / n1;
        let wa = (b * m0 - m1) / h;
        let wb = (m1 - a * m0) / h;
        inner = inner + wa * g[k - 1] + wb * g[k];
        out.push(inner / b.powi(n - 1));
    }
    out
}

/// `φ(r_k) = max_{j ≤ k} f(r_j)`.
pub fn running_max<T: Scalar>(f: &SampledFn<T>) -> SampledFn<T> {
    let mut best = T::neg_infinity();
    let values = f
        .values
        .iter()
        .map(|&v| {
            best = best.max(v);
            best
        })
        .collect();
    SampledFn::from_parts_unchecked(f.grid.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(r: f64, m: usize) -> Arc<RadialGrid<f64>> {
        Arc::new(make_grid(r, m, Grading::Uniform).unwrap())
    }

    #[test]
    fn rejects_small_and_nonpositive() {
        assert_eq!(
            make_grid(1.0, 4, Grading::Uniform),
            Err(GridError::TooFewNodes(4))
        );
        assert!(matches!(
            make_grid(-1.0, 32, Grading::Uniform),
            Err(GridError::NonPositiveRadius(_))
        ));
        assert!(matches!(
            make_grid(1.0, 32, Grading::Geometric(1.5)),
            Err(GridError::BadRatio(_))
        ));
        assert!(matches!(
            make_grid(1.0, 32, Grading::Geometric(1.0)),
            Err(GridError::BadRatio(_))
        ));
    }

    #[test]
    fn uniform_spacing() {
        let g = make_grid(2.0f64, 16, Grading::Uniform).unwrap();
        assert_eq!(g.len(), 17);
        assert_eq!(g.nodes()[0], 0.0);
        assert_eq!(g.nodes()[1], 0.125);
        assert_eq!(g.r_max(), 2.0);
        for w in g.nodes().windows(2) {
            assert!((w[1] - w[0] - 0.125).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_first_node_matches_series() {
        let g = make_grid(10.0, 100, Grading::Geometric(1.05)).unwrap();
        // oracle: widths h, hq, hq^2, ... sum to R
        let sum: f64 = (0..100).map(|k| 1.05f64.powi(k)).sum();
        let h = 10.0 / sum;
        assert!((g.nodes()[1] - h).abs() < 1e-15);
        assert!((h - 0.0038314).abs() < 1e-7);
        let w: Vec<f64> = g.nodes().windows(2).map(|w| w[1] - w[0]).collect();
        for pair in w.windows(2) {
            assert!((pair[1] / pair[0] - 1.05).abs() < 1e-9);
        }
        assert_eq!(g.r_max(), 10.0);
    }

    #[test]
    fn cumulative_exact_for_linear() {
        let g = uniform(2.0, 32);
        let zero = SampledFn::zeros(g.clone());
        assert!(cumulative_integral(&zero)
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let one = SampledFn::from_fn(g.clone(), |_| 1.0).unwrap();
        let c = cumulative_integral(&one);
        for (r, v) in g.nodes().iter().zip(c.values()) {
            assert!((r - v).abs() < 1e-14);
        }
        let lin = SampledFn::from_fn(g.clone(), |t| t).unwrap();
        let c = cumulative_integral(&lin);
        for (r, v) in g.nodes().iter().zip(c.values()) {
            assert!((r * r / 2.0 - v).abs() < 1e-14);
        }
    }

    #[test]
    fn nested_closed_forms() {
        let g = uniform(1.0, 64);
        let zero = SampledFn::zeros(g.clone());
        assert!(nested_radial_integral(&zero, 3)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
        let one = SampledFn::from_fn(g.clone(), |_| 1.0).unwrap();
        let p = nested_radial_integral(&one, 3).unwrap();
        assert!((p.last() - 1.0 / 6.0).abs() < 1e-14);
        let lin = SampledFn::from_fn(g.clone(), |t| t).unwrap();
        let p = nested_radial_integral(&lin, 3).unwrap();
        assert!((p.last() - 1.0 / 12.0).abs() < 1e-4);
        assert!(matches!(
            nested_radial_integral(&one, 2),
            Err(GridError::DimensionTooSmall(2))
        ));
    }

    #[test]
    fn nested_second_order_on_smooth_data() {
        // swapping the order: ∫_0^1 t^2 e^t (1/t - 1) dt = ∫_0^1 (t - t^2) e^t dt = 3 - e
        let exact = 3.0 - std::f64::consts::E;
        let err = |m| {
            let g = uniform(1.0, m);
            let f = SampledFn::from_fn(g, f64::exp).unwrap();
            (nested_radial_integral(&f, 3).unwrap().last() - exact).abs()
        };
        let (e1, e2, e3) = (err(64), err(128), err(256));
        assert!((e1 / e2 - 4.0).abs() < 0.2, "{}", e1 / e2);
        assert!((e2 / e3 - 4.0).abs() < 0.2, "{}", e2 / e3);
    }

    #[test]
    fn running_max_examples() {
        let g = Arc::new(make_grid(16.0, 16, Grading::Uniform).unwrap());
        let mut v = vec![1.0, 3.0, 2.0, 5.0];
        v.resize(17, 0.0);
        let f = SampledFn::new(g.clone(), v).unwrap();
        assert_eq!(&running_max(&f).values()[..4], &[1.0, 3.0, 3.0, 5.0]);
        let dec = SampledFn::from_fn(g.clone(), |t| 1.0 / (1.0 + t)).unwrap();
        assert!(running_max(&dec).values().iter().all(|&v| v == 1.0));
        let inc = SampledFn::from_fn(g, |t| t * t).unwrap();
        assert_eq!(running_max(&inc), inc);
    }

    #[test]
    fn interpolation_and_bounds() {
        let g = uniform(2.0, 16);
        let f = SampledFn::from_fn(g.clone(), |t| 3.0 * t).unwrap();
        assert!((f.at(0.3) - 0.9).abs() < 1e-14);
        assert_eq!(f.at(5.0), 6.0);
        assert_eq!(f.at(-1.0), 0.0);
        assert!(SampledFn::new(g.clone(), vec![0.0; 3]).is_err());
        let mut bad = vec![0.0; 17];
        bad[4] = f64::NAN;
        assert_eq!(SampledFn::new(g, bad), Err(GridError::NonFinite(4)));
    }

    #[test]
    fn works_in_single_precision() {
        let g = Arc::new(make_grid(1.0f32, 64, Grading::Uniform).unwrap());
        let one = SampledFn::from_fn(g, |_| 1.0f32).unwrap();
        let p = nested_radial_integral(&one, 3).unwrap();
        assert!((p.last() - 1.0 / 6.0).abs() < 1e-5);
    }
}
