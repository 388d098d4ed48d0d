//! Crank–Nicolson solver for `∂t u − Δu + q(t,x2) f(x1) u = 0` with
//! Dirichlet data on the lateral walls and either Neumann (bounded mode) or
//! Dirichlet (truncated mode) data on the caps.

mod banded;

use ndarray::{Array2, Array3, ArrayView2, Axis};

pub use banded::{BandedLu, BandedMatrix};

use crate::error::{Error, Result};
use crate::grid::{stencil, BoundaryCondition, FieldKind, ScalarField, Segment, SpaceTimeGrid};
use crate::par;

/// `V(t,x) = q(t,x2) f(x1)` with `q` sampled on `(0,T) × 𝒟` and `f` on the
/// `x1` nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    q: ScalarField,
    f: Vec<f64>,
    c_min: f64,
}

impl PotentialSpec {
    pub fn new(q: ScalarField, f: Vec<f64>) -> Result<Self> {
        q.expect_kind(FieldKind::CrossSection)?;
        let n1 = q.grid().nodes1();
        if f.len() != n1 {
            return Err(Error::InvalidParameter {
                name: "f",
                reason: format!("expected {n1} axial samples, got {}", f.len()),
            });
        }
        if let Some(i) = f.iter().position(|v| *v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "f",
                reason: format!("f must be positive, f = {} at column {i}", f[i]),
            });
        }
        let c_min = f.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(PotentialSpec { q, f, c_min })
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        self.q.grid()
    }

    pub fn q(&self) -> &ScalarField {
        &self.q
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    /// `min f` over the nodes.
    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn value(&self, k: usize, i: usize, j: usize) -> f64 {
        self.q.get(k, 0, j) * self.f[i]
    }

    /// `V` on the full grid.
    pub fn potential(&self) -> ScalarField {
        let g = self.grid();
        let values = Array3::from_shape_fn((g.levels(), g.nodes1(), g.nodes2()), |(k, i, j)| self.value(k, i, j));
        ScalarField::from_parts(*g, FieldKind::Full, values)
    }

    /// `f` broadcast to a full field.
    pub fn f_field(&self) -> ScalarField {
        let g = self.grid();
        let values = Array3::from_shape_fn((g.levels(), g.nodes1(), g.nodes2()), |(_, i, _)| self.f[i]);
        ScalarField::from_parts(*g, FieldKind::Full, values)
    }
}

/// Data on the end caps `x1 = ±L`.
#[derive(Debug, Clone, PartialEq)]
pub enum CapData {
    /// Outward normal derivatives `k∓` (traces on the left and right caps).
    Neumann { k_minus: ScalarField, k_plus: ScalarField },
    Dirichlet { b_minus: ScalarField, b_plus: ScalarField },
}

/// Boundary and initial data shared by a pair of forward problems.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub b_bottom: ScalarField,
    pub b_top: ScalarField,
    pub caps: CapData,
    pub u0: ScalarField,
    /// `∂t b(0, ·)` on the bottom and top walls when known exactly; otherwise
    /// it is differenced from `b`.
    pub initial_rate: Option<(Vec<f64>, Vec<f64>)>,
}

impl BoundaryData {
    /// Read every trace from a closed form `u` and its `x1` derivative.
    pub fn from_closed_form(
        grid: &SpaceTimeGrid,
        u: impl Fn(f64, f64, f64) -> f64,
        d_x1: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        let (l, h) = (grid.domain.half_length, grid.domain.height);
        let caps = match grid.condition(Segment::Left) {
            BoundaryCondition::Neumann => CapData::Neumann {
                k_minus: ScalarField::trace_from_fn(grid, Segment::Left, |t, x2| -d_x1(t, -l, x2)),
                k_plus: ScalarField::trace_from_fn(grid, Segment::Right, |t, x2| d_x1(t, l, x2)),
            },
            BoundaryCondition::Dirichlet => CapData::Dirichlet {
                b_minus: ScalarField::trace_from_fn(grid, Segment::Left, |t, x2| u(t, -l, x2)),
                b_plus: ScalarField::trace_from_fn(grid, Segment::Right, |t, x2| u(t, l, x2)),
            },
        };
        let data = BoundaryData {
            b_bottom: ScalarField::trace_from_fn(grid, Segment::Bottom, |t, x1| u(t, x1, 0.0)),
            b_top: ScalarField::trace_from_fn(grid, Segment::Top, |t, x1| u(t, x1, h)),
            caps,
            u0: ScalarField::spatial_from_fn(grid, |x1, x2| u(0.0, x1, x2)),
            initial_rate: None,
        };
        data.check_finite()?;
        Ok(data)
    }

    /// `u0 = b = c`, zero Neumann data.
    pub fn constant(grid: &SpaceTimeGrid, c: f64) -> Self {
        let mut data = BoundaryData::from_closed_form(grid, |_, _, _| c, |_, _, _| 0.0).expect("constant data is finite");
        data.initial_rate = Some((vec![0.0; grid.nodes1()], vec![0.0; grid.nodes1()]));
        data
    }

    /// Positive data compatible with `pot` by construction: `u0 ≡ 1`, zero
    /// Neumann data, and `b = exp(−f(x1) ∫₀ᵗ q(τ,x2) dτ)` on the walls (and on
    /// the caps in truncated mode). Since `Δu0 = 0`, the compatibility
    /// equation reduces to `∂t b(0) = −q(0,x2) f(x1)`, which is stored.
    pub fn positive(pot: &PotentialSpec) -> Self {
        let g = *pot.grid();
        let (n1, n2) = (g.nodes1(), g.nodes2());
        let q = pot.q().values();
        let mut cum = Array2::<f64>::zeros((g.levels(), n2));
        for k in 1..g.levels() {
            for j in 0..n2 {
                cum[[k, j]] = cum[[k - 1, j]] + 0.5 * g.dt * (q[[k - 1, 0, j]] + q[[k, 0, j]]);
            }
        }
        let f = pot.f();
        let wall = |j: usize| {
            let v = Array3::from_shape_fn((g.levels(), n1, 1), |(k, i, _)| (-f[i] * cum[[k, j]]).exp());
            ScalarField::from_parts(g, FieldKind::Trace(if j == 0 { Segment::Bottom } else { Segment::Top }), v)
        };
        let cap = |seg: Segment, i: usize| {
            let v = Array3::from_shape_fn((g.levels(), 1, n2), |(k, _, j)| (-f[i] * cum[[k, j]]).exp());
            ScalarField::from_parts(g, FieldKind::Trace(seg), v)
        };
        let caps = match g.condition(Segment::Left) {
            BoundaryCondition::Neumann => CapData::Neumann {
                k_minus: ScalarField::zeros(&g, FieldKind::Trace(Segment::Left)),
                k_plus: ScalarField::zeros(&g, FieldKind::Trace(Segment::Right)),
            },
            BoundaryCondition::Dirichlet => CapData::Dirichlet {
                b_minus: cap(Segment::Left, 0),
                b_plus: cap(Segment::Right, n1 - 1),
            },
        };
        let rate = |j: usize| (0..n1).map(|i| -f[i] * q[[0, 0, j]]).collect::<Vec<_>>();
        BoundaryData {
            b_bottom: wall(0),
            b_top: wall(n2 - 1),
            caps,
            u0: ScalarField::spatial_from_fn(&g, |_, _| 1.0),
            initial_rate: Some((rate(0), rate(n2 - 1))),
        }
    }

    fn check_finite(&self) -> Result<()> {
        let mut fields = vec![&self.b_bottom, &self.b_top, &self.u0];
        match &self.caps {
            CapData::Neumann { k_minus, k_plus } => fields.extend([k_minus, k_plus]),
            CapData::Dirichlet { b_minus, b_plus } => fields.extend([b_minus, b_plus]),
        }
        for f in fields {
            if !f.is_finite() {
                return Err(Error::NonFinite { node: [0, 0, 0] });
            }
        }
        Ok(())
    }

    /// `a·self + b·other`; the solution map is linear in this data.
    pub fn linear_combination(&self, a: f64, other: &BoundaryData, b: f64) -> Result<BoundaryData> {
        let comb = |x: &ScalarField, y: &ScalarField| x.zip_map(y, |p, q| a * p + b * q);
        let caps = match (&self.caps, &other.caps) {
            (CapData::Neumann { k_minus: a1, k_plus: a2 }, CapData::Neumann { k_minus: b1, k_plus: b2 }) => CapData::Neumann {
                k_minus: comb(a1, b1)?,
                k_plus: comb(a2, b2)?,
            },
            (CapData::Dirichlet { b_minus: a1, b_plus: a2 }, CapData::Dirichlet { b_minus: b1, b_plus: b2 }) => {
                CapData::Dirichlet {
                    b_minus: comb(a1, b1)?,
                    b_plus: comb(a2, b2)?,
                }
            }
            _ => return Err(Error::GridMismatch),
        };
        let lin = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect::<Vec<_>>();
        let initial_rate = match (&self.initial_rate, &other.initial_rate) {
            (Some((x0, x1)), Some((y0, y1))) => Some((lin(x0, y0), lin(x1, y1))),
            _ => None,
        };
        Ok(BoundaryData {
            b_bottom: comb(&self.b_bottom, &other.b_bottom)?,
            b_top: comb(&self.b_top, &other.b_top)?,
            caps,
            u0: comb(&self.u0, &other.u0)?,
            initial_rate,
        })
    }

    /// Largest violation on the lateral walls at `t = 0` of
    /// `∂t b − Δu0 + q(0,x2) f(x1) u0 = 0` and of `b(0) = u0`.
    pub fn compatibility_residual(&self, pot: &PotentialSpec) -> Result<f64> {
        let g = *pot.grid();
        self.u0.check_same_layout(&ScalarField::zeros(&g, FieldKind::Spatial))?;
        let lap = stencil::laplacian(&self.u0)?;
        let n2 = g.nodes2();
        let mut worst: f64 = 0.0;
        for (wall, j) in [(&self.b_bottom, 0), (&self.b_top, n2 - 1)] {
            for i in 0..g.nodes1() {
                let rate = match &self.initial_rate {
                    Some((bot, top)) => {
                        if j == 0 {
                            bot[i]
                        } else {
                            top[i]
                        }
                    }
                    None => (-3.0 * wall.get(0, i, 0) + 4.0 * wall.get(1, i, 0) - wall.get(2, i, 0)) / (2.0 * g.dt),
                };
                let u0 = self.u0.get(0, i, j);
                let r = rate - lap.get(0, i, j) + pot.value(0, i, j) * u0;
                worst = worst.max(r.abs()).max((wall.get(0, i, 0) - u0).abs());
            }
        }
        Ok(worst)
    }

    /// Smallest value among `u0` and every Dirichlet trace.
    pub fn min_dirichlet(&self) -> f64 {
        let mut m = self.u0.min().min(self.b_bottom.min()).min(self.b_top.min());
        if let CapData::Dirichlet { b_minus, b_plus } = &self.caps {
            m = m.min(b_minus.min()).min(b_plus.min());
        }
        m
    }
}

/// Which nodes are unknowns and how they are numbered. The faster index runs
/// along the shorter direction, so the half-bandwidth is `min(m1, m2)`.
struct Layout {
    i0: usize,
    m1: usize,
    m2: usize,
    fast_j: bool,
}

impl Layout {
    fn new(grid: &SpaceTimeGrid, neumann: bool) -> Self {
        let (i0, m1) = if neumann { (0, grid.nodes1()) } else { (1, grid.n1) };
        let m2 = grid.n2;
        Layout {
            i0,
            m1,
            m2,
            fast_j: m2 <= m1,
        }
    }

    fn len(&self) -> usize {
        self.m1 * self.m2
    }

    fn band(&self) -> usize {
        if self.fast_j {
            self.m2
        } else {
            self.m1
        }
    }

    fn index(&self, i: usize, j: usize) -> usize {
        let (a, b) = (i - self.i0, j - 1);
        if self.fast_j {
            a * self.m2 + b
        } else {
            b * self.m1 + a
        }
    }

    fn node(&self, idx: usize) -> (usize, usize) {
        let (a, b) = if self.fast_j {
            (idx / self.m2, idx % self.m2)
        } else {
            (idx % self.m1, idx / self.m1)
        };
        (a + self.i0, b + 1)
    }
}

struct Operator<'a> {
    grid: &'a SpaceTimeGrid,
    neumann: bool,
    c1: f64,
    c2: f64,
}

impl Operator<'_> {
    /// `(−Δh u + V u)(i, j)` with the ghost-node closure on Neumann caps
    /// (source term excluded).
    fn apply(&self, u: ArrayView2<'_, f64>, v: f64, i: usize, j: usize) -> f64 {
        let last = self.grid.nodes1() - 1;
        let x1 = if self.neumann && i == 0 {
            2.0 * (u[[0, j]] - u[[1, j]])
        } else if self.neumann && i == last {
            2.0 * (u[[last, j]] - u[[last - 1, j]])
        } else {
            2.0 * u[[i, j]] - u[[i - 1, j]] - u[[i + 1, j]]
        };
        let x2 = 2.0 * u[[i, j]] - u[[i, j - 1]] - u[[i, j + 1]];
        self.c1 * x1 + self.c2 * x2 + v * u[[i, j]]
    }
}

fn assemble(grid: &SpaceTimeGrid, layout: &Layout, op: &Operator<'_>, v: ArrayView2<'_, f64>) -> BandedMatrix {
    let half = 0.5 * grid.dt;
    let last = grid.nodes1() - 1;
    let mut m = BandedMatrix::zeros(layout.len(), layout.band());
    for idx in 0..layout.len() {
        let (i, j) = layout.node(idx);
        m.add(idx, idx, 1.0 + half * (2.0 * op.c1 + 2.0 * op.c2 + v[[i, j]]));
        let mut neighbour = |ii: usize, jj: usize, c: f64| {
            let unknown_i = ii >= layout.i0 && ii < layout.i0 + layout.m1;
            let unknown_j = jj >= 1 && jj <= layout.m2;
            if unknown_i && unknown_j {
                m.add(idx, layout.index(ii, jj), -half * c);
            }
        };
        if op.neumann && i == 0 {
            neighbour(1, j, 2.0 * op.c1);
        } else if op.neumann && i == last {
            neighbour(last - 1, j, 2.0 * op.c1);
        } else {
            neighbour(i - 1, j, op.c1);
            neighbour(i + 1, j, op.c1);
        }
        neighbour(i, j - 1, op.c2);
        neighbour(i, j + 1, op.c2);
    }
    m
}

/// Write the Dirichlet values of level `k` into `lvl`.
fn impose_dirichlet(lvl: &mut Array2<f64>, data: &BoundaryData, k: usize) {
    let (n1, n2) = lvl.dim();
    for i in 0..n1 {
        lvl[[i, 0]] = data.b_bottom.get(k, i, 0);
        lvl[[i, n2 - 1]] = data.b_top.get(k, i, 0);
    }
    if let CapData::Dirichlet { b_minus, b_plus } = &data.caps {
        for j in 1..n2 - 1 {
            lvl[[0, j]] = b_minus.get(k, 0, j);
            lvl[[n1 - 1, j]] = b_plus.get(k, 0, j);
        }
    }
}

/// Ghost-node source `2k/dx1` on the Neumann caps at level `k`.
fn cap_source(data: &BoundaryData, grid: &SpaceTimeGrid, k: usize, i: usize, j: usize) -> f64 {
    match &data.caps {
        CapData::Neumann { k_minus, k_plus } if i == 0 => 2.0 * k_minus.get(k, 0, j) / grid.dx1,
        CapData::Neumann { k_plus, .. } if i + 1 == grid.nodes1() => 2.0 * k_plus.get(k, 0, j) / grid.dx1,
        _ => 0.0,
    }
}

fn check_data(grid: &SpaceTimeGrid, pot: &PotentialSpec, data: &BoundaryData) -> Result<()> {
    if pot.grid() != grid || data.u0.grid() != grid {
        return Err(Error::GridMismatch);
    }
    data.u0.expect_kind(FieldKind::Spatial)?;
    data.b_bottom.expect_kind(FieldKind::Trace(Segment::Bottom))?;
    data.b_top.expect_kind(FieldKind::Trace(Segment::Top))?;
    let want = grid.condition(Segment::Left);
    let (found, a, b) = match &data.caps {
        CapData::Neumann { k_minus, k_plus } => (BoundaryCondition::Neumann, k_minus, k_plus),
        CapData::Dirichlet { b_minus, b_plus } => (BoundaryCondition::Dirichlet, b_minus, b_plus),
    };
    if found != want {
        return Err(Error::InvalidParameter {
            name: "caps",
            reason: format!("grid expects {want:?} caps, data provides {found:?}"),
        });
    }
    a.expect_kind(FieldKind::Trace(Segment::Left))?;
    b.expect_kind(FieldKind::Trace(Segment::Right))?;
    let limit = grid.domain.final_time / 4.0;
    if grid.dt > limit {
        return Err(Error::TimeStepTooLarge { dt: grid.dt, limit });
    }
    Ok(())
}

/// Crank–Nicolson with the potential averaged over both levels:
/// `(I + dt/2 A^{n+1}) u^{n+1} = (I − dt/2 A^n) u^n + dt/2 (s^n + s^{n+1})`,
/// `A = −Δh + V`, Dirichlet neighbours moved to the right-hand side and the
/// ghost-node source `s` on Neumann caps. The banded factorisation is reused
/// while `V` does not change between levels.
pub fn solve_heat(grid: &SpaceTimeGrid, pot: &PotentialSpec, data: &BoundaryData) -> Result<ScalarField> {
    check_data(grid, pot, data)?;
    let neumann = grid.condition(Segment::Left) == BoundaryCondition::Neumann;
    let layout = Layout::new(grid, neumann);
    let op = Operator {
        grid,
        neumann,
        c1: 1.0 / (grid.dx1 * grid.dx1),
        c2: 1.0 / (grid.dx2 * grid.dx2),
    };
    let vfull = pot.potential();
    let v = vfull.values();
    let half = 0.5 * grid.dt;
    let [nt, n1, n2] = grid.shape();
    let mut out = Array3::<f64>::zeros((nt, n1, n2));
    out.index_axis_mut(Axis(0), 0).assign(&data.u0.values().index_axis(Axis(0), 0));

    let mut cached: Option<(Array2<f64>, BandedLu)> = None;
    let mut rhs = vec![0.0; layout.len()];
    for k in 0..nt - 1 {
        let vn = v.index_axis(Axis(0), k);
        let vn1 = v.index_axis(Axis(0), k + 1);
        let reuse = matches!(&cached, Some((vc, _)) if vc == vn1);
        if !reuse {
            let lu = assemble(grid, &layout, &op, vn1).factor().map_err(|e| match e {
                Error::SolveBreakdown { row, .. } => Error::SolveBreakdown { step: k + 1, row },
                other => other,
            })?;
            cached = Some((vn1.to_owned(), lu));
        }
        let un = out.index_axis(Axis(0), k).to_owned();
        let mut bnd = Array2::<f64>::zeros((n1, n2));
        impose_dirichlet(&mut bnd, data, k + 1);
        for (idx, r) in rhs.iter_mut().enumerate() {
            let (i, j) = layout.node(idx);
            let explicit = un[[i, j]] - half * op.apply(un.view(), vn[[i, j]], i, j);
            let sources = half * (cap_source(data, grid, k, i, j) + cap_source(data, grid, k + 1, i, j));
            *r = explicit + sources - half * op.apply(bnd.view(), 0.0, i, j);
        }
        let (_, lu) = cached.as_ref().expect("factorisation cached above");
        lu.solve_in_place(&mut rhs);
        let mut next = out.index_axis_mut(Axis(0), k + 1);
        next.assign(&bnd);
        for (idx, x) in rhs.iter().enumerate() {
            let (i, j) = layout.node(idx);
            next[[i, j]] = *x;
        }
    }
    ScalarField::from_values(*grid, FieldKind::Full, out)
}

/// Solutions of the two systems sharing `(f, b, u0, k±)` with potentials
/// `q` and `q̃`.
#[derive(Debug, Clone)]
pub struct ForwardPair {
    pub u: ScalarField,
    pub u_tilde: ScalarField,
    pub data: BoundaryData,
    /// Compatibility residuals for the `q` and `q̃` systems.
    pub compatibility: [f64; 2],
}

/// How the shared data of [`manufacture_pair`] is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataPreset {
    /// See [`BoundaryData::positive`].
    Positive,
    /// `u0 = b = c`, zero Neumann data; compatible only when `q(0) = 0` on
    /// the walls.
    Constant(f64),
}

pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Build data compatible with both systems and solve them concurrently.
pub fn manufacture_pair(pot: &PotentialSpec, pot_tilde: &PotentialSpec, preset: DataPreset) -> Result<ForwardPair> {
    let grid = *pot.grid();
    if pot_tilde.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if pot.f() != pot_tilde.f() {
        return Err(Error::InvalidParameter {
            name: "f",
            reason: "both systems must share the axial profile".into(),
        });
    }
    let data = match preset {
        DataPreset::Positive => BoundaryData::positive(pot),
        DataPreset::Constant(c) => BoundaryData::constant(&grid, c),
    };
    let scale = 1.0 + pot.potential().max_abs().max(pot_tilde.potential().max_abs()) * data.u0.max_abs();
    let r = data.compatibility_residual(pot)?;
    let rt = data.compatibility_residual(pot_tilde)?;
    if r.max(rt) > COMPATIBILITY_TOL * scale {
        return Err(Error::InvalidParameter {
            name: "q_tilde",
            reason: format!("shared data violate compatibility (residuals {r:.3e}, {rt:.3e}); q and q̃ must agree at t = 0 on the walls"),
        });
    }
    let (u, ut) = par::join(|| solve_heat(&grid, pot, &data), || solve_heat(&grid, pot_tilde, &data));
    Ok(ForwardPair {
        u: u?,
        u_tilde: ut?,
        data,
        compatibility: [r, rt],
    })
}

/// `∂ν(∂x1 u)` on the observed wall.
pub fn measurement(u: &ScalarField) -> Result<ScalarField> {
    let seg = u.grid().observed_segment();
    stencil::normal_derivative(&stencil::partial_x1(u)?, seg)
}

/// Relative `L²(Q)` distance `‖a − b‖ / ‖b‖`.
pub fn relative_l2(a: &ScalarField, b: &ScalarField) -> Result<f64> {
    let d = a.sub(b)?;
    let num = crate::grid::integrate(&d.map(|x| x * x));
    let den = crate::grid::integrate(&b.map(|x| x * x));
    Ok((num / den).sqrt())
}
