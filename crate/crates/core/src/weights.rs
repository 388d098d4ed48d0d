//! Carleman weight systems.
//!
//! Both regimes use a product weight `ψ(x1, x2) = ψ1(x1) ψ2(x2)` with
//! closed-form factors, so every assumption margin can be evaluated from
//! exact derivatives at the grid nodes:
//!
//! * bounded: `ψ1' = (x1 − α)(L − x1)(x1 + L)`, `η = g(t)(e^{2λ|ψ|∞} − e^{λψ})`
//! * open: `ψ1 = e^{x1}`, `φ = g(t) e^{λψ}`
//!
//! with `g(t) = 1 / (t(T − t))` and `ψ2` affine in `x2`, increasing toward
//! the observed side.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::grid::{FieldKind, ObservedSide, ScalarField, Segment, SpaceTimeGrid, WaveguideDomain};
use crate::par;

/// Weight factors below this are stored as exactly zero.
pub const UNDERFLOW_CLAMP: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Bounded waveguide, weight `η`.
    Bounded,
    /// Open (truncated) waveguide, weight `φ`.
    Open,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Bounded => "bounded",
            Regime::Open => "open",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightParams {
    pub lambda: f64,
    pub s: f64,
    pub regime: Regime,
    /// Offset of `ψ2` on the non-observed side.
    pub delta: f64,
    /// Minimum of `ψ1` in the bounded regime.
    pub c1: f64,
}

impl WeightParams {
    pub const DEFAULT_DELTA: f64 = 0.5;
    pub const DEFAULT_C1: f64 = 0.5;

    pub fn new(regime: Regime, lambda: f64, s: f64) -> Result<Self> {
        let p = WeightParams {
            lambda,
            s,
            regime,
            delta: Self::DEFAULT_DELTA,
            c1: Self::DEFAULT_C1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_s(mut self, s: f64) -> Self {
        self.s = s;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_offsets(mut self, delta: f64, c1: f64) -> Self {
        self.delta = delta;
        self.c1 = c1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &'static str, v: f64, allow_zero: bool| {
            let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be positive, got {v}"),
                })
            }
        };
        check("lambda", self.lambda, false)?;
        // s = 0 is admitted so the conjugated operator can be checked at its degenerate point
        check("s", self.s, true)?;
        check("delta", self.delta, true)?;
        check("c1", self.c1, false)
    }
}

/// Closed-form `ψ1(x1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AxialProfile {
    /// Antiderivative of `(x − α)(L − x)(x + L)`, shifted by `shift`.
    Quartic { alpha: f64, half_length: f64, shift: f64 },
    /// `e^{x1}`.
    Exponential,
    Constant(f64),
}

impl AxialProfile {
    fn quartic_raw(alpha: f64, l: f64, x: f64) -> f64 {
        let l2 = l * l;
        l2 * x * x / 2.0 - x.powi(4) / 4.0 - alpha * l2 * x + alpha * x.powi(3) / 3.0
    }

    pub fn value(&self, x: f64) -> f64 {
        match *self {
            AxialProfile::Quartic { alpha, half_length, shift } => Self::quartic_raw(alpha, half_length, x) + shift,
            AxialProfile::Exponential => x.exp(),
            AxialProfile::Constant(c) => c,
        }
    }

    pub fn d1(&self, x: f64) -> f64 {
        match *self {
            AxialProfile::Quartic { alpha, half_length, .. } => (x - alpha) * (half_length - x) * (x + half_length),
            AxialProfile::Exponential => x.exp(),
            AxialProfile::Constant(_) => 0.0,
        }
    }

    pub fn d2(&self, x: f64) -> f64 {
        match *self {
            AxialProfile::Quartic { alpha, half_length, .. } => {
                (half_length * half_length - x * x) - 2.0 * x * (x - alpha)
            }
            AxialProfile::Exponential => x.exp(),
            AxialProfile::Constant(_) => 0.0,
        }
    }
}

/// Closed-form `ψ2(x2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CrossProfile {
    Affine { slope: f64, offset: f64 },
    Constant(f64),
}

impl CrossProfile {
    pub fn value(&self, x2: f64) -> f64 {
        match *self {
            CrossProfile::Affine { slope, offset } => slope * x2 + offset,
            CrossProfile::Constant(c) => c,
        }
    }

    pub fn d1(&self, _x2: f64) -> f64 {
        match *self {
            CrossProfile::Affine { slope, .. } => slope,
            CrossProfile::Constant(_) => 0.0,
        }
    }
}

/// `ψ2 = x2 + δ` when the top is observed, `h − x2 + δ` otherwise.
pub fn make_psi2(domain: &WaveguideDomain, delta: f64) -> CrossProfile {
    match domain.observed {
        ObservedSide::Top => CrossProfile::Affine { slope: 1.0, offset: delta },
        ObservedSide::Bottom => CrossProfile::Affine {
            slope: -1.0,
            offset: domain.height + delta,
        },
    }
}

/// `ψ1` with a single minimum `c1` at `α` and flat ends.
pub fn make_psi1(domain: &WaveguideDomain, c1: f64) -> Result<AxialProfile> {
    let (alpha, l) = (domain.alpha, domain.half_length);
    if !(alpha > -l && alpha < l) {
        return Err(Error::InvalidDomain(format!("alpha = {alpha} outside (-L, L)")));
    }
    // ψ1' changes sign only at α, so α is the global minimiser on [-L, L]
    let shift = c1 - AxialProfile::quartic_raw(alpha, l, alpha);
    Ok(AxialProfile::Quartic {
        alpha,
        half_length: l,
        shift,
    })
}

/// `g(t) = 1/(t(T−t))`, infinite at the endpoints.
pub fn time_profile(t: f64, final_time: f64) -> f64 {
    1.0 / (t * (final_time - t))
}

/// `g'(t) = −(T − 2t) / (t(T − t))²`.
pub fn time_profile_derivative(t: f64, final_time: f64) -> f64 {
    let p = t * (final_time - t);
    -(final_time - 2.0 * t) / (p * p)
}

/// `η = g(e^{2λ|ψ|∞} − e^{λψ})` at one point.
pub fn eta_value(g: f64, lambda: f64, psi_sup: f64, psi: f64) -> f64 {
    g * ((2.0 * lambda * psi_sup).exp() - (lambda * psi).exp())
}

/// The assembled weight system on a grid.
#[derive(Debug, Clone)]
pub struct WeightSystem {
    pub params: WeightParams,
    pub grid: SpaceTimeGrid,
    pub psi1: AxialProfile,
    pub psi2: CrossProfile,
    /// Spatial slices of `ψ1`, `ψ2` and `ψ`.
    pub psi1_field: ScalarField,
    pub psi2_field: ScalarField,
    pub psi: ScalarField,
    /// `g(t_k)`; infinite at `k = 0` and `k = nt`.
    pub g: Vec<f64>,
    /// `η` (bounded) or `φ` (open) at interior levels; the endpoint levels
    /// hold 0 and are never used, the weight factor there being 0.
    pub weight: ScalarField,
    /// `|ψ|∞` over the grid nodes.
    pub psi_sup: f64,
    /// Measured `min |∇ψ|` over interior nodes.
    pub c0_margin: f64,
}

impl WeightSystem {
    /// Build `ψ1`, `ψ2` from the closed forms and assemble the weight.
    pub fn assemble(params: WeightParams, grid: &SpaceTimeGrid) -> Result<Self> {
        params.validate()?;
        let (psi1, psi2) = match params.regime {
            Regime::Bounded => {
                let snapped = WaveguideDomain {
                    alpha: grid.alpha(),
                    ..grid.domain
                };
                (make_psi1(&snapped, params.c1)?, make_psi2(&grid.domain, params.delta))
            }
            Regime::Open => (AxialProfile::Exponential, make_psi2(&grid.domain, params.delta)),
        };
        Self::assemble_with_profiles(params, grid, psi1, psi2)
    }

    /// Assemble from explicit profiles; used to probe degenerate choices.
    pub fn assemble_with_profiles(
        params: WeightParams,
        grid: &SpaceTimeGrid,
        psi1: AxialProfile,
        psi2: CrossProfile,
    ) -> Result<Self> {
        params.validate()?;
        if params.regime == Regime::Open && !grid.is_truncated() {
            return Err(Error::Regime("the open-regime weight needs a truncated-mode grid".into()));
        }
        let psi1_field = ScalarField::spatial_from_fn(grid, |x1, _| psi1.value(x1));
        let psi2_field = ScalarField::spatial_from_fn(grid, |_, x2| psi2.value(x2));
        let psi = ScalarField::spatial_from_fn(grid, |x1, x2| psi1.value(x1) * psi2.value(x2));
        let psi_sup = psi.max_abs();
        let t_end = grid.domain.final_time;
        let g: Vec<f64> = (0..grid.levels()).map(|k| time_profile(grid.t(k), t_end)).collect();

        let [nt, n1, n2] = grid.shape();
        let lambda = params.lambda;
        let big = (2.0 * lambda * psi_sup).exp();
        let weight = Array3::from_shape_fn((nt, n1, n2), |(k, i, j)| {
            if k == 0 || k + 1 == nt {
                return 0.0;
            }
            let p = psi.get(0, i, j);
            match params.regime {
                Regime::Bounded => g[k] * (big - (lambda * p).exp()),
                Regime::Open => g[k] * (lambda * p).exp(),
            }
        });
        let weight = ScalarField::from_values(*grid, FieldKind::Full, weight)?;

        let mut c0 = f64::INFINITY;
        for i in 1..grid.nodes1() - 1 {
            for j in 1..grid.nodes2() - 1 {
                let (a, b) = (psi1.d1(grid.x1(i)) * psi2.value(grid.x2(j)), psi1.value(grid.x1(i)) * psi2.d1(grid.x2(j)));
                c0 = c0.min(a.hypot(b));
            }
        }

        Ok(WeightSystem {
            params,
            grid: *grid,
            psi1,
            psi2,
            psi1_field,
            psi2_field,
            psi,
            g,
            weight,
            psi_sup,
            c0_margin: c0,
        })
    }

    /// Same profiles and grid, different Carleman parameter.
    pub fn with_s(&self, s: f64) -> Result<Self> {
        Self::assemble_with_profiles(self.params.with_s(s), &self.grid, self.psi1, self.psi2)
    }

    pub fn regime(&self) -> Regime {
        self.params.regime
    }

    pub fn expect_regime(&self, regime: Regime) -> Result<()> {
        if self.params.regime == regime {
            Ok(())
        } else {
            Err(Error::Regime(format!(
                "operation needs the {} regime, weight system is {}",
                regime.name(),
                self.params.regime.name()
            )))
        }
    }

    pub fn psi_at(&self, x1: f64, x2: f64) -> f64 {
        self.psi1.value(x1) * self.psi2.value(x2)
    }

    /// `∇ψ` from the closed forms.
    pub fn grad_psi(&self, x1: f64, x2: f64) -> (f64, f64) {
        (
            self.psi1.d1(x1) * self.psi2.value(x2),
            self.psi1.value(x1) * self.psi2.d1(x2),
        )
    }

    pub fn laplacian_psi(&self, x1: f64, x2: f64) -> f64 {
        self.psi1.d2(x1) * self.psi2.value(x2)
    }

    /// Smallest weight value over interior levels.
    pub fn weight_floor(&self) -> f64 {
        let v = self.weight.values();
        let mut m = f64::INFINITY;
        for k in self.grid.interior_levels() {
            for x in v.index_axis(ndarray::Axis(0), k).iter() {
                m = m.min(*x);
            }
        }
        m
    }

    /// `e^{−2s(w − shift)}` with endpoint levels set to 0 and underflow
    /// clamped.
    fn factor_with_shift(&self, shift: f64) -> ScalarField {
        let s = self.params.s;
        let nt = self.grid.levels();
        let w = self.weight.values();
        let values = Array3::from_shape_fn(w.raw_dim(), |(k, i, j)| {
            if k == 0 || k + 1 == nt {
                return 0.0;
            }
            let e = (-2.0 * s * (w[[k, i, j]] - shift)).exp();
            if e < UNDERFLOW_CLAMP {
                0.0
            } else {
                e
            }
        });
        ScalarField::from_parts(self.grid, FieldKind::Full, values)
    }

    /// The Carleman factor `e^{−2sη}` (or `e^{−2sφ}`).
    pub fn exp_weight(&self) -> ScalarField {
        self.factor_with_shift(0.0)
    }

    /// The Carleman factor divided by its largest interior value,
    /// `e^{−2s(w − min w)}`. Inequalities weighted on both sides by the same
    /// factor are invariant under this rescaling; the returned `log_scale`
    /// is `ln` of the dropped constant, `−2s·min w`.
    pub fn normalized_exp_weight(&self) -> WeightFactor {
        let floor = self.weight_floor();
        WeightFactor {
            field: self.factor_with_shift(floor),
            log_scale: -2.0 * self.params.s * floor,
        }
    }

    /// `s·g(t_k)` for interior levels, 0 at the endpoints.
    pub fn sg(&self) -> Vec<f64> {
        let nt = self.grid.levels();
        (0..nt)
            .map(|k| if k == 0 || k + 1 == nt { 0.0 } else { self.params.s * self.g[k] })
            .collect()
    }

    /// `∂tφ`, `∇φ`, `Δφ` of the open weight at node `(k, i, j)`; `k` must be
    /// an interior level.
    pub fn phi_derivatives(&self, k: usize, i: usize, j: usize) -> PhiDerivatives {
        let g = &self.grid;
        let (t, x1, x2) = (g.t(k), g.x1(i), g.x2(j));
        let lambda = self.params.lambda;
        let e = (lambda * self.psi_at(x1, x2)).exp();
        let gt = self.g[k];
        let dg = time_profile_derivative(t, g.domain.final_time);
        let (p1, p2) = self.grad_psi(x1, x2);
        let lap = self.laplacian_psi(x1, x2);
        PhiDerivatives {
            phi: gt * e,
            dt: dg * e,
            grad: (gt * lambda * e * p1, gt * lambda * e * p2),
            lap: gt * lambda * e * (lambda * (p1 * p1 + p2 * p2) + lap),
        }
    }

    /// `r(x1, ξ) = e^{−2s[η(t,x1,x2) − η(t,ξ,x2)]}` over both triangles
    /// `{α ≤ ξ ≤ x1}` and `{x1 ≤ ξ ≤ α}` for every interior `(t, x2)`.
    pub fn monotone_ratio_audit(&self) -> RatioAudit {
        let g = &self.grid;
        let a = g.alpha_index;
        let s = self.params.s;
        let w = self.weight.values();
        let per_level = par::map_range(g.levels(), |k| {
            let mut max_r = 0.0_f64;
            let mut min_r = f64::INFINITY;
            if k == 0 || k == g.nt {
                return (max_r, min_r);
            }
            for j in 0..g.nodes2() {
                for x in 0..g.nodes1() {
                    let range = if x >= a { a..=x } else { x..=a };
                    for xi in range {
                        let r = (-2.0 * s * (w[[k, x, j]] - w[[k, xi, j]])).exp();
                        max_r = max_r.max(r);
                        min_r = min_r.min(r);
                    }
                }
            }
            (max_r, min_r)
        });
        let max_r = per_level.iter().map(|p| p.0).fold(0.0, f64::max);
        let min_r = per_level.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        RatioAudit {
            max_ratio: max_r,
            min_ratio: min_r,
        }
    }
}

/// A normalized Carleman factor together with the log of the constant it
/// was divided by.
#[derive(Debug, Clone)]
pub struct WeightFactor {
    pub field: ScalarField,
    pub log_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiDerivatives {
    pub phi: f64,
    pub dt: f64,
    pub grad: (f64, f64),
    pub lap: f64,
}

/// Extremes of `r(x1, ξ)` over the two triangular regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioAudit {
    pub max_ratio: f64,
    pub min_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BulletStatus {
    Pass,
    Fail,
    /// Holds on the truncated domain but cannot hold uniformly on the strip.
    NotUniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bullet {
    pub name: &'static str,
    pub status: BulletStatus,
    pub margin: f64,
    pub detail: String,
}

impl Bullet {
    fn new(name: &'static str, ok: bool, margin: f64, detail: String) -> Self {
        Bullet {
            name,
            status: if ok { BulletStatus::Pass } else { BulletStatus::Fail },
            margin,
            detail,
        }
    }

    pub fn failed(&self) -> bool {
        self.status == BulletStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub regime: Regime,
    pub bullets: Vec<Bullet>,
    /// Open regime: `κ(R) = e^{−R} min ψ2`, the lower bound of `∂x1ψ`.
    pub kappa: Option<f64>,
    /// Open regime: `min ψ(−R, ·)/R` for `R ∈ {1, 2, 4, 8}`.
    pub tail_ratios: Vec<(f64, f64)>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        !self.bullets.iter().any(Bullet::failed)
    }

    pub fn bullet(&self, name: &str) -> Option<&Bullet> {
        self.bullets.iter().find(|b| b.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("regime: {}\nall_pass: {}\n", self.regime.name(), self.all_pass());
        for b in &self.bullets {
            let status = match b.status {
                BulletStatus::Pass => "pass",
                BulletStatus::Fail => "fail",
                BulletStatus::NotUniform => "not-uniform",
            };
            out.push_str(&format!("{}: {} margin={:.12e} ({})\n", b.name, status, b.margin, b.detail));
        }
        if let Some(k) = self.kappa {
            out.push_str(&format!("kappa: {k:.12e}\n"));
        }
        for (r, v) in &self.tail_ratios {
            out.push_str(&format!("tail_ratio_R{r}: {v:.12e}\n"));
        }
        out
    }
}

fn nodes(grid: &SpaceTimeGrid) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..grid.nodes1()).flat_map(move |i| (0..grid.nodes2()).map(move |j| (i, j)))
}

/// Largest outward normal derivative of `ψ` over nodes of the given segments.
fn max_normal(ws: &WeightSystem, segments: &[Segment]) -> f64 {
    let g = &ws.grid;
    let mut m = f64::NEG_INFINITY;
    for (i, j) in nodes(g) {
        let (p1, p2) = ws.grad_psi(g.x1(i), g.x2(j));
        for &seg in segments {
            if g.on_segment(seg, i, j) {
                let (n1, n2) = seg.outward_normal();
                m = m.max(n1 * p1 + n2 * p2);
            }
        }
    }
    m
}

/// The five conditions on `ψ` required by the bounded-waveguide estimate.
pub fn check_assumption_bounded(ws: &WeightSystem) -> Result<AssumptionReport> {
    ws.expect_regime(Regime::Bounded)?;
    let g = &ws.grid;
    let alpha = g.alpha();
    let min_psi = ws.psi.min();
    let min_grad = ws.c0_margin;
    let off = [g.domain.observed.opposite(), Segment::Left, Segment::Right];
    let max_nu = max_normal(ws, &off);

    let mut left_max = f64::NEG_INFINITY;
    let mut right_min = f64::INFINITY;
    for (i, j) in nodes(g) {
        let x1 = g.x1(i);
        if i == 0 || i + 1 == g.nodes1() {
            continue;
        }
        let d1 = ws.grad_psi(x1, g.x2(j)).0;
        if x1 < alpha {
            left_max = left_max.max(d1);
        } else if x1 > alpha {
            right_min = right_min.min(d1);
        }
    }

    Ok(AssumptionReport {
        regime: Regime::Bounded,
        bullets: vec![
            Bullet::new("psi_positive", min_psi > 0.0, min_psi, "min psi over closed domain".into()),
            Bullet::new("gradient_lower_bound", min_grad > 0.0, min_grad, "min |grad psi| over interior".into()),
            Bullet::new(
                "normal_nonpositive_off_observed",
                max_nu <= 0.0,
                max_nu,
                "max d_nu psi on boundary minus observed wall".into(),
            ),
            Bullet::new("decreasing_left_of_alpha", left_max < 0.0, left_max, "max d_x1 psi for x1 < alpha".into()),
            Bullet::new("increasing_right_of_alpha", right_min > 0.0, right_min, "min d_x1 psi for x1 > alpha".into()),
        ],
        kappa: None,
        tail_ratios: vec![],
    })
}

/// The five conditions of the open-waveguide estimate, restricted to the
/// truncated domain `[−R, R] × 𝒟`.
pub fn check_assumption_open(ws: &WeightSystem) -> Result<AssumptionReport> {
    ws.expect_regime(Regime::Open)?;
    let g = &ws.grid;
    if !g.is_truncated() {
        return Err(Error::Regime("open-regime check needs a truncated grid".into()));
    }
    let r = g.domain.half_length;
    let min_psi = ws.psi.min();
    let min_grad = ws.c0_margin;
    let max_nu = max_normal(ws, &[g.domain.observed.opposite()]);
    let min_psi2 = ws.psi2_field.min();
    let kappa = (-r).exp() * min_psi2;
    let mut min_d1 = f64::INFINITY;
    for (i, j) in nodes(g) {
        min_d1 = min_d1.min(ws.grad_psi(g.x1(i), g.x2(j)).0);
    }
    let tail_ratios: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .map(|rr: f64| (rr, (-rr).exp() * min_psi2 / rr))
        .collect();
    let decays = tail_ratios.windows(2).all(|w| w[1].1 < w[0].1);

    Ok(AssumptionReport {
        regime: Regime::Open,
        bullets: vec![
            Bullet::new("psi_positive", min_psi > 0.0, min_psi, "min psi over truncated closed domain".into()),
            Bullet::new("gradient_lower_bound", min_grad > 0.0, min_grad, "min |grad psi| over interior".into()),
            Bullet::new(
                "normal_nonpositive_unobserved",
                max_nu <= 0.0,
                max_nu,
                "max d_nu psi on the non-observed wall".into(),
            ),
            Bullet {
                name: "d_x1_psi_bounded_below",
                status: if min_d1 > 0.0 { BulletStatus::NotUniform } else { BulletStatus::Fail },
                margin: min_d1,
                detail: format!("kappa(R) = e^-R min psi2 = {kappa:.6e}, tends to 0 as R grows"),
            },
            Bullet {
                name: "superlinear_growth",
                status: if decays { BulletStatus::NotUniform } else { BulletStatus::Fail },
                margin: tail_ratios[0].1,
                detail: "min psi(-R,.)/R decreases toward 0 as R grows".into(),
            },
        ],
        kappa: Some(kappa),
        tail_ratios,
    })
}
