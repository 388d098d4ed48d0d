//! Closed-form scenarios, oracles and test functions shared by the solver
//! checks, the command-line tool and the acceptance suite.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::forward::{BoundaryData, PotentialSpec};
use crate::grid::{ScalarField, SpaceTimeGrid};

/// `u*(t,x) = e^{−Q(t)−μt} cos(π(x1+L)/(2L)) sin(πx2/h)` with `f ≡ 1` and
/// `q(t) = q0 (1 + ½ sin(πt/T))`, `Q = ∫₀ᵗ q`.
///
/// Homogeneous Neumann on the caps, homogeneous Dirichlet on the walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparableOracle {
    pub half_length: f64,
    pub height: f64,
    pub final_time: f64,
    pub q0: f64,
}

impl SeparableOracle {
    pub fn for_grid(grid: &SpaceTimeGrid, q0: f64) -> Self {
        SeparableOracle {
            half_length: grid.domain.half_length,
            height: grid.domain.height,
            final_time: grid.domain.final_time,
            q0,
        }
    }

    pub fn q(&self, t: f64) -> f64 {
        self.q0 * (1.0 + 0.5 * (PI * t / self.final_time).sin())
    }

    pub fn cumulative_q(&self, t: f64) -> f64 {
        let tt = self.final_time;
        self.q0 * (t + 0.5 * tt / PI * (1.0 - (PI * t / tt).cos()))
    }

    pub fn mu(&self) -> f64 {
        (PI / (2.0 * self.half_length)).powi(2) + (PI / self.height).powi(2)
    }

    fn k1(&self) -> f64 {
        PI / (2.0 * self.half_length)
    }

    fn k2(&self) -> f64 {
        PI / self.height
    }

    fn amplitude(&self, t: f64) -> f64 {
        (-self.cumulative_q(t) - self.mu() * t).exp()
    }

    pub fn value(&self, t: f64, x1: f64, x2: f64) -> f64 {
        self.amplitude(t) * (self.k1() * (x1 + self.half_length)).cos() * (self.k2() * x2).sin()
    }

    pub fn d_x1(&self, t: f64, x1: f64, x2: f64) -> f64 {
        -self.k1() * self.amplitude(t) * (self.k1() * (x1 + self.half_length)).sin() * (self.k2() * x2).sin()
    }

    /// `∂x2 ∂x1 u*`.
    pub fn d_x1x2(&self, t: f64, x1: f64, x2: f64) -> f64 {
        -self.k1() * self.k2() * self.amplitude(t) * (self.k1() * (x1 + self.half_length)).sin() * (self.k2() * x2).cos()
    }

    pub fn field(&self, grid: &SpaceTimeGrid) -> ScalarField {
        ScalarField::from_fn(grid, |t, x1, x2| self.value(t, x1, x2))
    }

    pub fn potential(&self, grid: &SpaceTimeGrid) -> Result<PotentialSpec> {
        let q = ScalarField::cross_from_fn(grid, |t, _| self.q(t));
        PotentialSpec::new(q, vec![1.0; grid.nodes1()])
    }

    pub fn boundary_data(&self, grid: &SpaceTimeGrid) -> Result<BoundaryData> {
        BoundaryData::from_closed_form(grid, |t, x1, x2| self.value(t, x1, x2), |t, x1, x2| self.d_x1(t, x1, x2))
    }
}

/// A strictly positive closed form `ũ*(t,x) = e^{−Q(t)}(c + e^{−μt} X(x1) Y(x2))`
/// solving the equation with `f ≡ 1` and potential `q(t)` of
/// [`SeparableOracle`]. Used to check coefficient assembly symbolically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositiveOracle {
    pub base: SeparableOracle,
    pub offset: f64,
}

impl PositiveOracle {
    pub fn value(&self, t: f64, x1: f64, x2: f64) -> f64 {
        (-self.base.cumulative_q(t)).exp() * self.offset + self.base.value(t, x1, x2)
    }

    pub fn d_t(&self, t: f64, x1: f64, x2: f64) -> f64 {
        -self.base.q(t) * self.value(t, x1, x2) - self.base.mu() * self.base.value(t, x1, x2)
    }

    pub fn d_x1(&self, t: f64, x1: f64, x2: f64) -> f64 {
        self.base.d_x1(t, x1, x2)
    }

    pub fn d_x2(&self, t: f64, x1: f64, x2: f64) -> f64 {
        let b = &self.base;
        b.amplitude(t) * (b.k1() * (x1 + b.half_length)).cos() * b.k2() * (b.k2() * x2).cos()
    }

    pub fn laplacian(&self, t: f64, x1: f64, x2: f64) -> f64 {
        -self.base.mu() * self.base.value(t, x1, x2)
    }

    pub fn field(&self, grid: &SpaceTimeGrid) -> ScalarField {
        ScalarField::from_fn(grid, |t, x1, x2| self.value(t, x1, x2))
    }
}

/// The default inverse-problem scenario:
///
/// * `f(x1) = 1 + a cos(πx1/L)`, so `f'(±L) = 0`
/// * `q(t,x2) = q0 sin²(πt/(2T)) (1 + ½ sin(πx2/h))`, flat at `t = 0` so the
///   data are compatible to second order
/// * `δq(t,x2) = sin³(πt/T) cos(πx2/h)`, vanishing at both time ends
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub q0: f64,
    pub f_amplitude: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            q0: 1.0,
            f_amplitude: 0.5,
        }
    }
}

impl Scenario {
    pub fn f(&self, x1: f64, half_length: f64) -> f64 {
        1.0 + self.f_amplitude * (PI * x1 / half_length).cos()
    }

    pub fn q(&self, t: f64, x2: f64, final_time: f64, height: f64) -> f64 {
        let s = (PI * t / (2.0 * final_time)).sin();
        self.q0 * s * s * (1.0 + 0.5 * (PI * x2 / height).sin())
    }

    pub fn delta_q(&self, t: f64, x2: f64, final_time: f64, height: f64) -> f64 {
        (PI * t / final_time).sin().powi(3) * (PI * x2 / height).cos()
    }

    /// `q + θ·δq` sampled on the grid.
    pub fn potential(&self, grid: &SpaceTimeGrid, theta: f64) -> Result<PotentialSpec> {
        let d = grid.domain;
        let q = ScalarField::cross_from_fn(grid, |t, x2| {
            self.q(t, x2, d.final_time, d.height) + theta * self.delta_q(t, x2, d.final_time, d.height)
        });
        let f = (0..grid.nodes1()).map(|i| self.f(grid.x1(i), d.half_length)).collect();
        PotentialSpec::new(q, f)
    }
}

/// Seeded smooth random field: a truncated cosine series in `(t, x1, x2)`
/// with decaying coefficients and a nonzero mean.
pub fn random_smooth_field(grid: &SpaceTimeGrid, seed: u64, modes: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coef = Vec::with_capacity(modes * modes * modes);
    for p in 0..modes {
        for m in 0..modes {
            for n in 0..modes {
                let c: f64 = rng.random_range(-1.0..1.0);
                coef.push((p, m, n, c / (1 + p + m + n) as f64));
            }
        }
    }
    let mean = 1.0 + rng.random_range(0.0..1.0);
    let d = grid.domain;
    ScalarField::from_fn(grid, |t, x1, x2| {
        let mut acc = mean;
        for &(p, m, n, c) in &coef {
            acc += c
                * (p as f64 * PI * t / d.final_time).cos()
                * (m as f64 * PI * (x1 + d.half_length) / (2.0 * d.half_length)).cos()
                * (n as f64 * PI * x2 / d.height).cos();
        }
        acc
    })
}

/// `z = t²(T−t)² sin(mπx2/h) X(x1)` with `X = (L²−x1²)²`, optionally times
/// `(1 + x1/L)`. Vanishes on every boundary segment and at both time ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub mode: u32,
    pub skew: bool,
}

impl Bump {
    /// The suite used by the bounded Carleman check.
    pub const SUITE: [Bump; 3] = [
        Bump { mode: 1, skew: false },
        Bump { mode: 2, skew: false },
        Bump { mode: 1, skew: true },
    ];

    fn axial(&self, x: f64, l: f64) -> (f64, f64) {
        let p = l * l - x * x;
        let (x0, x0pp) = (p * p, 12.0 * x * x - 4.0 * l * l);
        if self.skew {
            let x0p = -4.0 * x * p;
            let s = 1.0 + x / l;
            (x0 * s, x0pp * s + 2.0 * x0p / l)
        } else {
            (x0, x0pp)
        }
    }

    fn parts(&self, t: f64, x1: f64, x2: f64, d: &crate::grid::WaveguideDomain) -> (f64, f64, f64, f64, f64) {
        let tt = d.final_time;
        let tau = t * t * (tt - t) * (tt - t);
        let dtau = 2.0 * t * (tt - t) * (tt - 2.0 * t);
        let k = self.mode as f64 * PI / d.height;
        let y = (k * x2).sin();
        let (x, xpp) = self.axial(x1, d.half_length);
        (tau, dtau, y, x, xpp - k * k * x)
    }

    pub fn value(&self, grid: &SpaceTimeGrid) -> ScalarField {
        let d = grid.domain;
        ScalarField::from_fn(grid, |t, x1, x2| {
            let (tau, _, y, x, _) = self.parts(t, x1, x2, &d);
            tau * y * x
        })
    }

    /// `∂t z − Δz` in closed form.
    pub fn heat_image(&self, grid: &SpaceTimeGrid) -> ScalarField {
        let d = grid.domain;
        ScalarField::from_fn(grid, |t, x1, x2| {
            let (tau, dtau, y, x, lap_x) = self.parts(t, x1, x2, &d);
            dtau * y * x - tau * y * lap_x
        })
    }

    pub fn name(&self) -> String {
        format!("bump-m{}{}", self.mode, if self.skew { "-skew" } else { "" })
    }
}

/// Closed-form values and derivatives of a test function at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub dt: f64,
    pub d1: f64,
    pub d2: f64,
    pub lap: f64,
}

/// `w = τ(t) sin(mπx2/h) (L² − x1²)²` with `τ = sin⁴(2π(t − T/4)/T)` on
/// `[T/4, 3T/4]` and 0 elsewhere. Vanishes on `∂Ω` and near both time ends,
/// where the singular weights blow up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowedBump {
    pub mode: u32,
}

impl WindowedBump {
    pub fn jet(&self, t: f64, x1: f64, x2: f64, domain: &crate::grid::WaveguideDomain) -> Jet {
        let (tt, l) = (domain.final_time, domain.half_length);
        let (tau, dtau) = if t > 0.25 * tt && t < 0.75 * tt {
            let arg = 2.0 * PI * (t - 0.25 * tt) / tt;
            let (sn, cs) = arg.sin_cos();
            (sn.powi(4), 4.0 * sn.powi(3) * cs * 2.0 * PI / tt)
        } else {
            (0.0, 0.0)
        };
        let k = self.mode as f64 * PI / domain.height;
        let (y, dy) = ((k * x2).sin(), k * (k * x2).cos());
        let p = l * l - x1 * x1;
        let (x, dx, ddx) = (p * p, -4.0 * x1 * p, 12.0 * x1 * x1 - 4.0 * l * l);
        Jet {
            value: tau * x * y,
            dt: dtau * x * y,
            d1: tau * dx * y,
            d2: tau * x * dy,
            lap: tau * (ddx - k * k * x) * y,
        }
    }

    /// `(w, ∂t w, ∂x1 w, ∂x2 w, Δw)` sampled on the grid.
    pub fn fields(&self, grid: &SpaceTimeGrid) -> [ScalarField; 5] {
        let d = grid.domain;
        let pick = |f: fn(&Jet) -> f64| ScalarField::from_fn(grid, |t, x1, x2| f(&self.jet(t, x1, x2, &d)));
        [
            pick(|j| j.value),
            pick(|j| j.dt),
            pick(|j| j.d1),
            pick(|j| j.d2),
            pick(|j| j.lap),
        ]
    }

    /// `∂t w − Δw`.
    pub fn heat_image(&self, grid: &SpaceTimeGrid) -> ScalarField {
        let d = grid.domain;
        ScalarField::from_fn(grid, |t, x1, x2| {
            let j = self.jet(t, x1, x2, &d);
            j.dt - j.lap
        })
    }
}

/// `F = ∂x1 H` with `H(t,x1,x2) = τ(t) B(x1) sin(πx2/h)` and `B` a
/// `C²` bump supported in `[α − 0.8R, α − 0.2R]` (clipped to the domain),
/// so `∫_α^{x1} F = H` vanishes near both truncation ends.
pub fn open_lemma_field(grid: &SpaceTimeGrid) -> ScalarField {
    let d = grid.domain;
    let a = grid.alpha();
    let lo = (a - 0.8 * d.half_length).max(-d.half_length);
    let hi = a - 0.2 * d.half_length;
    let (c, w) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    ScalarField::from_fn(grid, |t, x1, x2| {
        let y = (x1 - c) / w;
        if y.abs() >= 1.0 {
            return 0.0;
        }
        let p = 1.0 - y * y;
        // B = (1 − y²)³, B' = −6y(1 − y²)² / w
        let db = -6.0 * y * p * p / w;
        let tau = (PI * t / d.final_time).sin();
        tau * db * (PI * x2 / d.height).sin()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{stencil, WaveguideDomain};

    fn grid(n: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::new(WaveguideDomain::bounded(1.0, 1.0, 1.0, 0.0).unwrap(), n, n, 2 * n).unwrap()
    }

    #[test]
    fn oracle_satisfies_the_equation() {
        let o = SeparableOracle::for_grid(&grid(8), 0.7);
        let (t, x1, x2, e) = (0.3, 0.2, 0.4, 1e-5);
        let dt = (o.value(t + e, x1, x2) - o.value(t - e, x1, x2)) / (2.0 * e);
        let lap = -o.mu() * o.value(t, x1, x2);
        assert!((dt - lap + o.q(t) * o.value(t, x1, x2)).abs() < 1e-8);
        assert!(o.d_x1(t, -1.0, x2).abs() < 1e-15 && o.d_x1(t, 1.0, x2).abs() < 1e-15);
        assert!(o.value(t, x1, 0.0).abs() < 1e-15);
    }

    #[test]
    fn positive_oracle_satisfies_the_equation() {
        let base = SeparableOracle::for_grid(&grid(8), 0.7);
        let p = PositiveOracle { base, offset: 2.0 };
        let (t, x1, x2) = (0.4, -0.3, 0.7);
        let r = p.d_t(t, x1, x2) - p.laplacian(t, x1, x2) + base.q(t) * p.value(t, x1, x2);
        assert!(r.abs() < 1e-14);
    }

    #[test]
    fn random_field_is_seeded() {
        let g = grid(6);
        assert_eq!(random_smooth_field(&g, 7, 3), random_smooth_field(&g, 7, 3));
        assert_ne!(random_smooth_field(&g, 7, 3), random_smooth_field(&g, 8, 3));
    }

    #[test]
    fn bump_heat_image_matches_stencils() {
        for bump in Bump::SUITE {
            let mut errs = vec![];
            for n in [15, 31] {
                let g = grid(n);
                let z = bump.value(&g);
                let num = stencil::time_derivative(&z).unwrap().sub(&stencil::laplacian(&z).unwrap()).unwrap();
                let err = num.sub(&bump.heat_image(&g)).unwrap();
                let mut m: f64 = 0.0;
                for k in 1..g.nt {
                    for i in 1..g.nodes1() - 1 {
                        for j in 1..g.nodes2() - 1 {
                            m = m.max(err.get(k, i, j).abs());
                        }
                    }
                }
                errs.push(m);
            }
            assert!(errs[1] < errs[0] / 3.0, "{bump:?}: {errs:?}");
        }
    }

    #[test]
    fn open_field_integrates_to_zero() {
        let d = WaveguideDomain::truncated(2.0, 1.0, 1.0, 0.0).unwrap();
        let g = SpaceTimeGrid::new(d, 199, 8, 8).unwrap();
        let f = open_lemma_field(&g);
        let mut total = 0.0;
        for i in 0..g.nodes1() {
            total += f.get(4, i, 3) * g.dx1;
        }
        assert!(total.abs() < 1e-10);
        assert_eq!(f.get(4, 0, 3), 0.0);
        assert_eq!(f.get(4, g.alpha_index, 3), 0.0);
    }
}
