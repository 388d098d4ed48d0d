//! Both sides of the stability estimate
//! `‖q − q̃‖²_{L²((ε,T−ε)×𝒟)} ≤ C_ε[‖∂ν∂x1ũ − ∂ν∂x1u‖² + ‖(ũ − u)(·,α,·)‖²_{H¹_t H²_{x2}}]`
//! and perturbation sweeps of the empirical `C_ε`.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::fit::loglog_slope;
use crate::forward::{manufacture_pair, measurement, DataPreset, PotentialSpec};
use crate::grid::{integrate, integrate_time_window, stencil, FieldKind, ScalarField, SpaceTimeGrid};
use crate::par;
use crate::presets::Scenario;
use crate::report::{num, Document, Table};

/// Fraction of the truncated axis, at each end, whose share of the boundary
/// term is reported as the truncation budget.
pub const TRUNCATION_BAND: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub epsilon: f64,
    /// `‖q − q̃‖²` over `(ε, T − ε) × 𝒟`.
    pub lhs: f64,
    /// `‖∂ν∂x1ũ − ∂ν∂x1u‖²` over the observation set.
    pub rhs_boundary: f64,
    /// `‖(ũ − u)(·, α, ·)‖²` in `H¹(0,T; H²(𝒟))`.
    pub rhs_trace: f64,
    /// `lhs / (rhs_boundary + rhs_trace)`; 0 when `lhs = 0`, infinite when
    /// only the right side vanishes.
    pub empirical_c_eps: f64,
    /// `max(‖q‖∞, ‖q̃‖∞)`.
    pub r_bound: f64,
    /// Truncated grids only: the part of `rhs_boundary` collected within
    /// [`TRUNCATION_BAND`] of either truncation end.
    pub truncation_budget: Option<f64>,
}

impl StabilityReport {
    pub fn rhs(&self) -> f64 {
        self.rhs_boundary + self.rhs_trace
    }

    pub fn to_document(&self) -> Document {
        let mut d = Document::new();
        d.number("epsilon", self.epsilon)
            .number("lhs", self.lhs)
            .number("rhs_boundary", self.rhs_boundary)
            .number("rhs_trace", self.rhs_trace)
            .number("empirical_c_eps", self.empirical_c_eps)
            .number("r_bound", self.r_bound);
        if let Some(b) = self.truncation_budget {
            d.number("truncation_budget", b);
        }
        d
    }
}

/// `∫_0^T (‖g‖²_{H²(𝒟)} + ‖∂t g‖²_{H²(𝒟)}) dt` for a cross-section field,
/// with `‖f‖²_{H²} = ‖f‖² + ‖∂x2 f‖² + ‖∂²x2 f‖²`.
pub fn mixed_sobolev_norm(trace: &ScalarField) -> Result<f64> {
    trace.expect_kind(FieldKind::CrossSection)?;
    let h2 = |f: &ScalarField| -> Result<f64> {
        let d1 = stencil::partial_x2(f)?;
        let d2 = stencil::second_x2(f)?;
        Ok(integrate(&f.map(|x| x * x)) + integrate(&d1.map(|x| x * x)) + integrate(&d2.map(|x| x * x)))
    };
    Ok(h2(trace)? + h2(&stencil::time_derivative(trace)?)?)
}

fn check_epsilon(grid: &SpaceTimeGrid, eps: f64) -> Result<()> {
    let half = 0.5 * grid.domain.final_time;
    if eps > 0.0 && eps < half {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("{eps} is not in (0, {half})"),
        })
    }
}

/// Boundary integrand restricted to the bands next to the truncation ends.
fn truncation_budget(sq: &ScalarField) -> f64 {
    let g = sq.grid();
    let r = g.domain.half_length;
    let band = TRUNCATION_BAND * 2.0 * r;
    let v = sq.values();
    let masked = Array3::from_shape_fn(v.raw_dim(), |(k, i, j)| {
        let x1 = g.x1(i);
        if x1 <= -r + band || x1 >= r - band {
            v[[k, i, j]]
        } else {
            0.0
        }
    });
    integrate(&ScalarField::from_parts(*g, sq.kind(), masked))
}

/// Assemble both sides of the estimate for one pair of solutions.
///
/// The observation set is the observed wall over the whole (possibly
/// truncated) `x1` range.
pub fn assemble_stability(
    u: &ScalarField,
    u_tilde: &ScalarField,
    pot: &PotentialSpec,
    pot_tilde: &PotentialSpec,
    eps: f64,
) -> Result<StabilityReport> {
    u.expect_kind(FieldKind::Full)?;
    u.check_same_layout(u_tilde)?;
    let grid = *u.grid();
    if *pot.grid() != grid || *pot_tilde.grid() != grid {
        return Err(Error::GridMismatch);
    }
    check_epsilon(&grid, eps)?;
    let t_end = grid.domain.final_time;
    let dq = pot.q().sub(pot_tilde.q())?;
    let lhs = integrate_time_window(&dq.map(|x| x * x), eps, t_end - eps)?;
    let dm = measurement(u_tilde)?.sub(&measurement(u)?)?;
    let dm2 = dm.map(|x| x * x);
    let rhs_boundary = integrate(&dm2);
    let col = grid.alpha_index;
    let dv = u_tilde.column(col)?.sub(&u.column(col)?)?;
    let rhs_trace = mixed_sobolev_norm(&dv)?;
    let rhs = rhs_boundary + rhs_trace;
    let empirical_c_eps = if lhs == 0.0 {
        0.0
    } else if rhs > 0.0 {
        lhs / rhs
    } else {
        f64::INFINITY
    };
    Ok(StabilityReport {
        epsilon: eps,
        lhs,
        rhs_boundary,
        rhs_trace,
        empirical_c_eps,
        r_bound: pot.q().max_abs().max(pot_tilde.q().max_abs()),
        truncation_budget: grid.is_truncated().then(|| truncation_budget(&dm2)),
    })
}

/// One `(θ, ε)` entry of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub theta: f64,
    pub report: StabilityReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationSweep {
    pub thetas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// θ-major order: all ε for the first θ, then the next.
    pub entries: Vec<SweepEntry>,
}

impl PerturbationSweep {
    pub fn entry(&self, ti: usize, ei: usize) -> &StabilityReport {
        &self.entries[ti * self.epsilons.len() + ei].report
    }

    /// Log-log slope of `lhs(θ)` at the `ei`-th `ε`.
    pub fn theta_order(&self, ei: usize) -> f64 {
        let pts: Vec<(f64, f64)> = (0..self.thetas.len()).map(|ti| (self.thetas[ti], self.entry(ti, ei).lhs)).collect();
        loglog_slope(&pts)
    }

    /// `max C_ε / min C_ε` over the θ-list at the `ei`-th `ε`.
    pub fn c_spread(&self, ei: usize) -> f64 {
        let cs: Vec<f64> = (0..self.thetas.len()).map(|ti| self.entry(ti, ei).empirical_c_eps).collect();
        let max = cs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = cs.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }

    /// For every θ, `lhs` is non-increasing in `ε` (compared exactly).
    pub fn window_monotone(&self) -> bool {
        let mut order: Vec<usize> = (0..self.epsilons.len()).collect();
        order.sort_by(|&a, &b| self.epsilons[a].total_cmp(&self.epsilons[b]));
        (0..self.thetas.len()).all(|ti| order.windows(2).all(|w| self.entry(ti, w[0]).lhs >= self.entry(ti, w[1]).lhs))
    }

    pub fn nonfinite(&self) -> usize {
        self.entries.iter().filter(|e| !e.report.empirical_c_eps.is_finite()).count()
    }

    pub fn to_document(&self) -> Document {
        let mut d = Document::new();
        for (ei, e) in self.epsilons.iter().enumerate() {
            d.number(&format!("theta_order.eps{ei}"), self.theta_order(ei));
            d.number(&format!("c_spread.eps{ei}"), self.c_spread(ei));
            d.number(&format!("epsilon.eps{ei}"), *e);
        }
        d.flag("window_monotone", self.window_monotone());
        d.text("nonfinite_entries", self.nonfinite().to_string());
        let mut t = Table::new(
            "sweep",
            &["theta", "epsilon", "lhs", "rhs_boundary", "rhs_trace", "empirical_c_eps", "r_bound", "truncation_budget"],
        );
        for e in &self.entries {
            let r = &e.report;
            t.push(vec![
                num(e.theta),
                num(r.epsilon),
                num(r.lhs),
                num(r.rhs_boundary),
                num(r.rhs_trace),
                num(r.empirical_c_eps),
                num(r.r_bound),
                r.truncation_budget.map_or_else(|| "none".into(), num),
            ]);
        }
        d.table(t);
        d
    }
}

/// Solve `(q, q + θδq)` for every `θ` and assemble a report for every `ε`.
pub fn perturbation_sweep(
    scenario: &Scenario,
    grid: &SpaceTimeGrid,
    thetas: &[f64],
    epsilons: &[f64],
) -> Result<PerturbationSweep> {
    if thetas.is_empty() || epsilons.is_empty() {
        return Err(Error::InvalidParameter {
            name: "sweep",
            reason: "θ-list and ε-list must be non-empty".into(),
        });
    }
    if let Some(t) = thetas.iter().find(|t| t.is_nan() || **t <= 0.0) {
        return Err(Error::InvalidParameter {
            name: "theta",
            reason: format!("{t} is not positive"),
        });
    }
    for &e in epsilons {
        check_epsilon(grid, e)?;
    }
    let pot = scenario.potential(grid, 0.0)?;
    let per_theta = par::map_slice(thetas, |&theta| -> Result<Vec<SweepEntry>> {
        let pot_tilde = scenario.potential(grid, theta)?;
        let pair = manufacture_pair(&pot, &pot_tilde, DataPreset::Positive)?;
        epsilons
            .iter()
            .map(|&e| {
                Ok(SweepEntry {
                    theta,
                    report: assemble_stability(&pair.u, &pair.u_tilde, &pot, &pot_tilde, e)?,
                })
            })
            .collect()
    });
    let mut entries = Vec::with_capacity(thetas.len() * epsilons.len());
    for r in per_theta {
        entries.extend(r?);
    }
    Ok(PerturbationSweep {
        thetas: thetas.to_vec(),
        epsilons: epsilons.to_vec(),
        entries,
    })
}
