//! Decides which existence theorem applies to a tabulated problem and what it
//! says about the behaviour of `u` and `v` at infinity.
//!
//! Theorems are tried in the order T4, T5(i), T5(ii), T2, T3(1), T3(2), T1;
//! the first one whose hypotheses are all decided in its favour wins.

use std::fmt;

use crate::grid::SampledFn;
use crate::model::{Component, ProblemSpec};
use crate::scalar::Scalar;
use crate::solver::{SolutionPair, SolverError, Tally};
use crate::transforms::{IntegralProfile, KoBound, LimitClass};

/// Relative margin for strict inequalities between limits.
pub const STRICT_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    BothLarge,
    BothBounded,
    ULargeVBounded,
    UBoundedVLarge,
    ExistsUnclassified,
    HypothesesNotMet,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Theorem {
    T1,
    T2,
    T3a,
    T3b,
    T4,
    T5i,
    T5ii,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvidenceValue<T> {
    Limit(LimitClass<T>),
    Flag(bool),
    Number(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence<T> {
    pub criterion: String,
    pub value: EvidenceValue<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationReport<T> {
    pub verdict: Verdict,
    pub theorem: Option<Theorem>,
    pub evidence: Vec<Evidence<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ClassificationReport<T> {
    pub fn limit(&self, criterion: &str) -> Option<&LimitClass<T>> {
        self.evidence.iter().find_map(|e| match &e.value {
            EvidenceValue::Limit(l) if e.criterion == criterion => Some(l),
            _ => None,
        })
    }
}

/// `b < k` with relative margin; `None` when either side is undecided.
fn strictly_below<T: Scalar>(
    b: &LimitClass<T>,
    k: &LimitClass<T>,
    what: &str,
    warnings: &mut Vec<String>,
) -> bool {
    let (Some(b), Some(k)) = (b.finite_value(), k.finite_value()) else {
        return false;
    };
    if b <= k * (T::one() - T::lit(STRICT_MARGIN)) {
        return true;
    }
    if b < k {
        warnings.push(format!("criterion marginal: {what} ({b:.6e} vs {k:.6e})"));
    }
    false
}

/// Applies the theorems to `profile` without looking at a solution.
pub fn classify<T: Scalar>(
    spec: &ProblemSpec<T>,
    profile: &IntegralProfile<T>,
) -> ClassificationReport<T> {
    classify_with_solution(spec, profile, None)
}

/// As [`classify`], also logging `Cᵢ = [R^{N-1} uᵢ'(R)]²` from a solve and
/// warning when the solve contradicts the necessity part of T2.
pub fn classify_with_solution<T: Scalar>(
    spec: &ProblemSpec<T>,
    profile: &IntegralProfile<T>,
    solve: Option<Result<&SolutionPair<T>, &SolverError<T>>>,
) -> ClassificationReport<T> {
    let lim = &profile.limits;
    let mut evidence = Vec::new();
    let mut warnings = spec_warnings(spec);
    let mut push = |name: &str, l: &LimitClass<T>| {
        evidence.push(Evidence {
            criterion: name.to_string(),
            value: EvidenceValue::Limit(l.clone()),
        })
    };
    push("KO1(inf)", &lim.ko[0]);
    push("KO2(inf)", &lim.ko[1]);
    push("Z(inf)", &lim.z);
    push("Pbar1(inf)", &lim.pbar[0]);
    push("Pbar2(inf)", &lim.pbar[1]);
    push("Pbar1eps(inf)", &lim.pbar_eps[0]);
    push("Pbar2eps(inf)", &lim.pbar_eps[1]);
    push("Plower(inf)", &lim.lower[0]);
    push("Qlower(inf)", &lim.lower[1]);
    for (name, l) in [
        ("KO1(inf)", &lim.ko[0]),
        ("KO2(inf)", &lim.ko[1]),
        ("Pbar1(inf)", &lim.pbar[0]),
        ("Pbar2(inf)", &lim.pbar[1]),
        ("Pbar1eps(inf)", &lim.pbar_eps[0]),
        ("Pbar2eps(inf)", &lim.pbar_eps[1]),
        ("Plower(inf)", &lim.lower[0]),
        ("Qlower(inf)", &lim.lower[1]),
    ] {
        if l.is_inconclusive() {
            warnings.push(format!("{name} is {}", l.summary()));
        }
    }
    for c in Component::BOTH {
        evidence.push(Evidence {
            criterion: format!("r^(2N-2) p{} nondecreasing for large r", c.label()),
            value: EvidenceValue::Flag(profile.r_monotone[c.index()].is_some()),
        });
    }

    let ko_div = [lim.ko[0].is_divergent(), lim.ko[1].is_divergent()];
    let monotone = [
        profile.r_monotone[0].is_some(),
        profile.r_monotone[1].is_some(),
    ];
    let below = [
        strictly_below(
            &lim.pbar[0],
            &lim.ko[0],
            "Pbar1(inf) < KO1(inf)",
            &mut warnings,
        ),
        strictly_below(
            &lim.pbar[1],
            &lim.ko[1],
            "Pbar2(inf) < KO2(inf)",
            &mut warnings,
        ),
    ];
    let eps_fin = [lim.pbar_eps[0].is_finite(), lim.pbar_eps[1].is_finite()];
    let low_div = [lim.lower[0].is_divergent(), lim.lower[1].is_divergent()];

    let (verdict, theorem) = if below[0] && below[1] {
        (Verdict::BothBounded, Some(Theorem::T4))
    } else if ko_div[0] && low_div[0] && below[1] {
        (Verdict::ULargeVBounded, Some(Theorem::T5i))
    } else if ko_div[1] && low_div[1] && below[0] {
        (Verdict::UBoundedVLarge, Some(Theorem::T5ii))
    } else if ko_div[0] && ko_div[1] && monotone[0] && monotone[1] && eps_fin[0] && eps_fin[1] {
        (Verdict::BothBounded, Some(Theorem::T2))
    } else if ko_div[0] && ko_div[1] && monotone[0] && eps_fin[0] && low_div[1] {
        (Verdict::UBoundedVLarge, Some(Theorem::T3a))
    } else if ko_div[0] && ko_div[1] && monotone[1] && low_div[0] && eps_fin[1] {
        (Verdict::ULargeVBounded, Some(Theorem::T3b))
    } else if ko_div[0] && ko_div[1] && low_div[0] && low_div[1] {
        (Verdict::BothLarge, Some(Theorem::T1))
    } else if ko_div[0] && ko_div[1] {
        (Verdict::ExistsUnclassified, Some(Theorem::T1))
    } else {
        (Verdict::HypothesesNotMet, None)
    };

    // necessity half of T2: a large solution forces both P̄ᵢε(∞) = ∞
    let looks_large =
        verdict == Verdict::BothLarge || matches!(solve, Some(Err(SolverError::Overflow { .. })));
    if looks_large {
        for c in Component::BOTH {
            if monotone[c.index()] && eps_fin[c.index()] {
                warnings.push(format!(
                    "consistency: solution grows but Pbar{}eps(inf) was classified finite",
                    c.label()
                ));
            }
        }
    }

    if let Some(Ok(sol)) = solve {
        for c in Component::BOTH {
            let r = profile.r_monotone[c.index()]
                .unwrap_or_else(|| sol.grid().r_max())
                .min(sol.grid().r_max());
            let flux = r.powi(spec.n_dim as i32 - 1) * sol.derivative(c).at(r);
            evidence.push(Evidence {
                criterion: format!(
                    "C{} = [R^(N-1) d{}(R)]^2 at R = {r:.6e}",
                    c.label(),
                    ["u", "v"][c.index()]
                ),
                value: EvidenceValue::Number(flux * flux),
            });
        }
    }

    ClassificationReport {
        verdict,
        theorem,
        evidence,
        warnings,
    }
}

fn spec_warnings<T: Scalar>(spec: &ProblemSpec<T>) -> Vec<String> {
    crate::model::hypothesis_warnings(&spec.nonlin)
}

/// Node-wise check of `aᵢ + lowerᵢ(r) ≤ uᵢ(r) ≤ KOᵢ⁻¹(√(2c̄ᵢ) P̄ᵢ(r))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCheck<T> {
    pub component: Component,
    pub lower_max_violation: T,
    pub upper_max_violation: T,
    /// Nodes where `√(2c̄) P̄ ≥ KO(∞)`, so the upper bound is `+∞`.
    pub vacuous: usize,
    /// Nodes where the upper bound could not be evaluated.
    pub unavailable: usize,
    pub lower_passed: bool,
    pub upper_passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SandwichReport<T> {
    pub chains: [ChainCheck<T>; 2],
}

impl<T: Scalar> SandwichReport<T> {
    pub fn passed(&self) -> bool {
        self.chains.iter().all(|c| c.lower_passed && c.upper_passed)
    }
}

/// Checks both bound chains at every node of the solution grid.
pub fn verify_sandwich<T: Scalar>(
    sol: &SolutionPair<T>,
    profile: &IntegralProfile<T>,
    spec: &ProblemSpec<T>,
) -> SandwichReport<T> {
    verify_sandwich_with_lower(sol, profile, spec, [&profile.lower[0], &profile.lower[1]])
}

/// [`verify_sandwich`] with caller-supplied lower functionals.
pub fn verify_sandwich_with_lower<T: Scalar>(
    sol: &SolutionPair<T>,
    profile: &IntegralProfile<T>,
    spec: &ProblemSpec<T>,
    lower: [&SampledFn<T>; 2],
) -> SandwichReport<T> {
    let grid = sol.grid();
    let chains = Component::BOTH.map(|c| {
        let i = c.index();
        let x = sol.component(c).values();
        let mut lo = Tally::new("lower", grid);
        let mut hi = Tally::new("upper", grid);
        let (mut vacuous, mut unavailable) = (0, 0);
        for (k, &r) in grid.nodes().iter().enumerate() {
            let bound = spec.a(c) + lower[i].values()[k];
            lo.push(r, bound - x[k], Some(T::zero()));
            match profile.ko_bound_at(spec, c, k) {
                Some(KoBound::Value(b)) => hi.push(r, x[k], Some(b)),
                Some(KoBound::Vacuous) => vacuous += 1,
                Some(KoBound::Unavailable) | None => unavailable += 1,
            }
        }
        let (lo, hi) = (lo.finish(), hi.finish());
        ChainCheck {
            component: c,
            lower_max_violation: lo.max_violation,
            upper_max_violation: hi.max_violation,
            vacuous,
            unavailable,
            lower_passed: lo.passed,
            upper_passed: hi.passed,
        }
    });
    SandwichReport { chains }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{make_grid, Grading, RadialGrid};
    use crate::model::{power_pair, WeightFn};
    use crate::solver::{picard_solve, IterationConfig};
    use crate::transforms::TailPolicy;

    fn run(
        alpha: f64,
        beta: f64,
        w: [WeightFn<f64>; 2],
        r_max: f64,
    ) -> (ProblemSpec<f64>, IntegralProfile<f64>, Arc<RadialGrid<f64>>) {
        let spec = ProblemSpec::new(3, 1.0, 1.0, w, power_pair(alpha, beta).unwrap()).unwrap();
        let g = Arc::new(make_grid(r_max, 256, Grading::Uniform).unwrap());
        let profile =
            IntegralProfile::build(&spec, g.clone(), &TailPolicy::for_grid_cells(256)).unwrap();
        (spec, profile, g)
    }

    #[test]
    fn sqrt_case_is_both_large() {
        let (spec, profile, _) = run(
            0.5,
            0.5,
            [WeightFn::Constant(1.0), WeightFn::Constant(1.0)],
            5.0,
        );
        let rep = classify(&spec, &profile);
        assert_eq!(rep.verdict, Verdict::BothLarge);
        assert_eq!(rep.theorem, Some(Theorem::T1));
        assert!(rep.limit("Plower(inf)").unwrap().is_divergent());
    }

    #[test]
    fn zero_weights_in_both_regimes() {
        let (spec, profile, g) = run(3.0, 3.0, [WeightFn::zero(), WeightFn::zero()], 4.0);
        let rep = classify(&spec, &profile);
        assert_eq!(
            (rep.verdict, rep.theorem),
            (Verdict::BothBounded, Some(Theorem::T4))
        );
        let sol = picard_solve(&spec, g, &IterationConfig::default()).unwrap();
        let sw = verify_sandwich(&sol, &profile, &spec);
        assert!(sw.passed());
        assert_eq!(sw.chains[0].upper_max_violation, 0.0);

        let (spec, profile, _) = run(0.5, 0.5, [WeightFn::zero(), WeightFn::zero()], 4.0);
        let rep = classify(&spec, &profile);
        assert_eq!(
            (rep.verdict, rep.theorem),
            (Verdict::BothBounded, Some(Theorem::T2))
        );
    }

    #[test]
    fn nonzero_weight_cannot_meet_finite_ko_bound() {
        let w = WeightFn::PowerDecay {
            c: 0.01,
            sigma: 4.0,
        };
        let (spec, profile, _) = run(3.0, 3.0, [w.clone(), w], 4.0);
        let rep = classify(&spec, &profile);
        assert!(rep.limit("KO1(inf)").unwrap().is_finite());
        assert!(rep.limit("Pbar1(inf)").unwrap().is_divergent());
        assert_eq!(
            (rep.verdict, rep.theorem),
            (Verdict::HypothesesNotMet, None)
        );
    }

    #[test]
    fn classification_is_deterministic() {
        let (spec, profile, _) = run(
            1.0,
            1.0,
            [WeightFn::Constant(1.0), WeightFn::Constant(2.0)],
            2.0,
        );
        assert_eq!(classify(&spec, &profile), classify(&spec, &profile));
    }

    #[test]
    fn swapped_lower_bounds_fail() {
        let (spec, profile, g) = run(
            1.0,
            1.0,
            [WeightFn::Constant(2.0), WeightFn::Constant(1.0)],
            2.0,
        );
        let sol = picard_solve(&spec, g, &IterationConfig::default()).unwrap();
        assert!(verify_sandwich(&sol, &profile, &spec)
            .chains
            .iter()
            .all(|c| c.lower_passed));
        let swapped =
            verify_sandwich_with_lower(&sol, &profile, &spec, [profile.qlower(), profile.plower()]);
        assert!(!swapped.chains[1].lower_passed);
    }
}
