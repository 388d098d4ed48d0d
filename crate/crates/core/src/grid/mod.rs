//! Space-time discretization of the waveguide `(0,T) × (-L,L) × (0,h)`.
//!
//! The grid is vertex-centred: `n1`/`n2` count interior nodes and the two
//! boundary nodes are added on top, so `dx1 = 2L/(n1+1)` and `dx2 = h/(n2+1)`.
//! Time has `nt` steps and `nt + 1` levels including `t = 0` and `t = T`.

mod field;
mod io;
pub mod quadrature;
pub mod stencil;

pub use field::{FieldKind, ScalarField};
pub use io::{load_field, save_field};
pub use quadrature::{integrate, integrate_from_alpha, integrate_time_window, trapezoid_weights};
pub use stencil::{
    gradient, laplacian, normal_derivative, partial_x1, partial_x2, second_x1, second_x2,
    time_derivative,
};

use crate::error::{Error, Result};

/// One of the four straight pieces of `∂Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Segment {
    /// `x2 = 0`
    Bottom,
    /// `x2 = h`
    Top,
    /// `x1 = -L`
    Left,
    /// `x1 = L`
    Right,
}

impl Segment {
    pub const ALL: [Segment; 4] = [Segment::Bottom, Segment::Top, Segment::Left, Segment::Right];

    /// Lateral wall `[-L, L] × ∂𝒟` as opposed to an end cap.
    pub fn is_lateral(self) -> bool {
        matches!(self, Segment::Bottom | Segment::Top)
    }

    /// Outward unit normal `(ν1, ν2)`.
    pub fn outward_normal(self) -> (f64, f64) {
        match self {
            Segment::Bottom => (0.0, -1.0),
            Segment::Top => (0.0, 1.0),
            Segment::Left => (-1.0, 0.0),
            Segment::Right => (1.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Segment::Bottom => "bottom",
            Segment::Top => "top",
            Segment::Left => "left",
            Segment::Right => "right",
        }
    }

    pub fn from_name(name: &str) -> Option<Segment> {
        Segment::ALL.into_iter().find(|s| s.name() == name)
    }
}

/// Which lateral side carries the observation set `Γ₁⁺`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservedSide {
    Top,
    Bottom,
}

impl ObservedSide {
    pub fn segment(self) -> Segment {
        match self {
            ObservedSide::Top => Segment::Top,
            ObservedSide::Bottom => Segment::Bottom,
        }
    }

    pub fn opposite(self) -> Segment {
        match self {
            ObservedSide::Top => Segment::Bottom,
            ObservedSide::Bottom => Segment::Top,
        }
    }

    pub fn name(self) -> &'static str {
        self.segment().name()
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "top" => Some(ObservedSide::Top),
            "bottom" => Some(ObservedSide::Bottom),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// The physical domain. In truncated mode `half_length` is the truncation
/// radius `R` of the open waveguide and every side is Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideDomain {
    pub half_length: f64,
    pub height: f64,
    pub final_time: f64,
    pub alpha: f64,
    pub observed: ObservedSide,
    pub truncated: bool,
}

impl WaveguideDomain {
    /// Bounded waveguide with Neumann end caps; `Γ₁⁺` on top.
    pub fn bounded(half_length: f64, height: f64, final_time: f64, alpha: f64) -> Result<Self> {
        let d = WaveguideDomain {
            half_length,
            height,
            final_time,
            alpha,
            observed: ObservedSide::Top,
            truncated: false,
        };
        d.validate()?;
        Ok(d)
    }

    /// Open waveguide truncated to `(-R, R) × 𝒟`, all-Dirichlet.
    pub fn truncated(radius: f64, height: f64, final_time: f64, alpha: f64) -> Result<Self> {
        let d = WaveguideDomain {
            truncated: true,
            ..WaveguideDomain::bounded(radius, height, final_time, alpha)?
        };
        Ok(d)
    }

    pub fn with_observed(mut self, side: ObservedSide) -> Self {
        self.observed = side;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidDomain(format!("{what} must be positive, got {v}")))
            }
        };
        pos(self.half_length, "L")?;
        pos(self.height, "h")?;
        pos(self.final_time, "T")?;
        if !(self.alpha > -self.half_length && self.alpha < self.half_length) {
            return Err(Error::InvalidDomain(format!(
                "alpha = {} must lie in (-L, L) = ({}, {})",
                self.alpha, -self.half_length, self.half_length
            )));
        }
        Ok(())
    }

    /// Boundary condition carried by a segment in this mode.
    pub fn condition(&self, seg: Segment) -> BoundaryCondition {
        if seg.is_lateral() || self.truncated {
            BoundaryCondition::Dirichlet
        } else {
            BoundaryCondition::Neumann
        }
    }
}

/// Uniform tensor-product grid on `[0,T] × [-L,L] × [0,h]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimeGrid {
    pub domain: WaveguideDomain,
    pub n1: usize,
    pub n2: usize,
    pub nt: usize,
    pub dx1: f64,
    pub dx2: f64,
    pub dt: f64,
    /// Column index `i` with `x1(i)` the node closest to `domain.alpha`.
    pub alpha_index: usize,
    /// `|x1(alpha_index) - domain.alpha|`, at most `dx1 / 2`.
    pub snap_distance: f64,
}

impl SpaceTimeGrid {
    pub fn new(domain: WaveguideDomain, n1: usize, n2: usize, nt: usize) -> Result<Self> {
        domain.validate()?;
        if n1 < 4 || n2 < 4 || nt < 4 {
            return Err(Error::InvalidGrid(format!(
                "node counts must be at least 4, got n1={n1}, n2={n2}, nt={nt}"
            )));
        }
        let l = domain.half_length;
        let dx1 = 2.0 * l / (n1 + 1) as f64;
        let dx2 = domain.height / (n2 + 1) as f64;
        let dt = domain.final_time / nt as f64;
        let raw = (domain.alpha + l) / dx1;
        // alpha is strictly inside, so the snapped column never hits a cap
        let alpha_index = (raw.round() as usize).clamp(1, n1);
        let snap_distance = ((-l + alpha_index as f64 * dx1) - domain.alpha).abs();
        Ok(SpaceTimeGrid {
            domain,
            n1,
            n2,
            nt,
            dx1,
            dx2,
            dt,
            alpha_index,
            snap_distance,
        })
    }

    /// Nodes along `x1`, boundary included.
    pub fn nodes1(&self) -> usize {
        self.n1 + 2
    }

    /// Nodes along `x2`, boundary included.
    pub fn nodes2(&self) -> usize {
        self.n2 + 2
    }

    /// Time levels, endpoints included.
    pub fn levels(&self) -> usize {
        self.nt + 1
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.levels(), self.nodes1(), self.nodes2()]
    }

    pub fn x1(&self, i: usize) -> f64 {
        if i + 1 == self.nodes1() {
            self.domain.half_length
        } else {
            -self.domain.half_length + i as f64 * self.dx1
        }
    }

    pub fn x2(&self, j: usize) -> f64 {
        if j + 1 == self.nodes2() {
            self.domain.height
        } else {
            j as f64 * self.dx2
        }
    }

    pub fn t(&self, k: usize) -> f64 {
        if k == self.nt {
            self.domain.final_time
        } else {
            k as f64 * self.dt
        }
    }

    /// The snapped anchor abscissa actually used on this grid.
    pub fn alpha(&self) -> f64 {
        self.x1(self.alpha_index)
    }

    pub fn is_truncated(&self) -> bool {
        self.domain.truncated
    }

    pub fn condition(&self, seg: Segment) -> BoundaryCondition {
        self.domain.condition(seg)
    }

    pub fn observed_segment(&self) -> Segment {
        self.domain.observed.segment()
    }

    /// Whether node `(i, j)` lies on the given segment.
    pub fn on_segment(&self, seg: Segment, i: usize, j: usize) -> bool {
        match seg {
            Segment::Bottom => j == 0,
            Segment::Top => j + 1 == self.nodes2(),
            Segment::Left => i == 0,
            Segment::Right => i + 1 == self.nodes1(),
        }
    }

    pub fn is_boundary_node(&self, i: usize, j: usize) -> bool {
        Segment::ALL.iter().any(|&s| self.on_segment(s, i, j))
    }

    /// Time levels strictly inside `(0, T)`.
    pub fn interior_levels(&self) -> std::ops::Range<usize> {
        1..self.nt
    }

    /// Same domain with every count refined by `factor` (interior-node
    /// convention: `n -> factor*(n+1) - 1` keeps nested nodes).
    pub fn refined(&self, factor: usize) -> Result<Self> {
        SpaceTimeGrid::new(
            self.domain,
            factor * (self.n1 + 1) - 1,
            factor * (self.n2 + 1) - 1,
            factor * self.nt,
        )
    }
}
