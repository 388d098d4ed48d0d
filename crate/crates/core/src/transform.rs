//! The reduction `u, ũ → v = u − ũ → w = v/(fũ) → z = ∂x1 w` and the
//! coefficient fields of the equations satisfied by `w` and `z`:
//!
//! ```text
//! ∂t w − Δw + 𝔸·∇w + a w = q̃ − q
//! ∂t z − Δz + 𝔸·∇z + a z + B1 z = B2 ∂x2 w + b w
//! ```
//!
//! with `m = fũ`, `𝔸 = −2∇m/m`, `a = (∂t m − Δm)/m + qf`,
//! `B1 = −2∂x1(∂x1 m/m)`, `B2 = 2∂x1(∂x2 m/m)` and `b = −∂x1 a`.

use crate::error::{Error, Result};
use crate::forward::PotentialSpec;
use crate::grid::{integrate_from_alpha, stencil, FieldKind, ScalarField, Segment, SpaceTimeGrid};

/// Spatial margin for checks that nest one-sided stencils; nodes closer than
/// this to `∂Ω` are skipped.
pub const CHECK_MARGIN: usize = 2;

#[derive(Debug, Clone)]
pub struct TransformBundle {
    pub v: ScalarField,
    pub w: ScalarField,
    pub z: ScalarField,
    /// `m = fũ`.
    pub m: ScalarField,
    pub a1: ScalarField,
    pub a2: ScalarField,
    pub a: ScalarField,
    pub b1: ScalarField,
    pub b2: ScalarField,
    pub b_coef: ScalarField,
    /// `min fũ` over the grid.
    pub c1_floor: f64,
}

pub fn build_bundle(u: &ScalarField, u_tilde: &ScalarField, pot: &PotentialSpec) -> Result<TransformBundle> {
    u.expect_kind(FieldKind::Full)?;
    u.check_same_layout(u_tilde)?;
    if u.grid() != pot.grid() {
        return Err(Error::GridMismatch);
    }
    let m = u_tilde.mul(&pot.f_field())?;
    let (idx, floor) = m
        .values()
        .indexed_iter()
        .map(|(i, v)| (i, *v))
        .fold(((0, 0, 0), f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if floor <= 0.0 {
        return Err(Error::NonPositiveDenominator {
            value: floor,
            node: [idx.0, idx.1, idx.2],
        });
    }
    let v = u.sub(u_tilde)?;
    let w = v.zip_map(&m, |a, b| a / b)?;
    let z = stencil::partial_x1(&w)?;

    let (m1, m2) = stencil::gradient(&m)?;
    let r1 = m1.zip_map(&m, |a, b| a / b)?;
    let r2 = m2.zip_map(&m, |a, b| a / b)?;
    let a1 = r1.scale(-2.0);
    let a2 = r2.scale(-2.0);
    let heat = stencil::time_derivative(&m)?.sub(&stencil::laplacian(&m)?)?;
    let a = heat.zip_map(&m, |a, b| a / b)?.add(&pot.potential())?;
    let b1 = stencil::partial_x1(&r1)?.scale(-2.0);
    let b2 = stencil::partial_x1(&r2)?.scale(2.0);
    let b_coef = stencil::partial_x1(&a)?.scale(-1.0);
    Ok(TransformBundle {
        v,
        w,
        z,
        m,
        a1,
        a2,
        a,
        b1,
        b2,
        b_coef,
        c1_floor: floor,
    })
}

/// Maximum and root-mean-square of a residual over a node subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Discrepancy {
    pub max: f64,
    pub rms: f64,
}

impl Discrepancy {
    fn over(grid: &SpaceTimeGrid, margin: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        let (mut max, mut sum, mut count) = (0.0_f64, 0.0, 0usize);
        for k in 1..grid.nt {
            for i in margin..grid.nodes1() - margin {
                for j in margin..grid.nodes2() - margin {
                    let r = f(k, i, j);
                    max = max.max(r.abs());
                    sum += r * r;
                    count += 1;
                }
            }
        }
        Discrepancy {
            max,
            rms: if count == 0 { 0.0 } else { (sum / count as f64).sqrt() },
        }
    }
}

/// `P w` with `P = ∂t − Δ + 𝔸·∇ + a`.
pub fn apply_w_operator(bundle: &TransformBundle, w: &ScalarField) -> Result<ScalarField> {
    let (w1, w2) = stencil::gradient(w)?;
    let lhs = stencil::time_derivative(w)?.sub(&stencil::laplacian(w)?)?;
    let adv = bundle.a1.mul(&w1)?.add(&bundle.a2.mul(&w2)?)?;
    lhs.add(&adv)?.add(&bundle.a.mul(w)?)
}

#[derive(Debug, Clone)]
pub struct ZResidual {
    /// LHS − RHS of the `z` equation; zero outside the checked region.
    pub field: ScalarField,
    /// `L²(Q)` norm of `field`.
    pub norm: f64,
    pub discrepancy: Discrepancy,
}

/// Right side of the `z` equation, `B2 ∂x2 w + b w`.
pub fn z_source(bundle: &TransformBundle) -> Result<ScalarField> {
    let w2 = stencil::partial_x2(&bundle.w)?;
    bundle.b2.mul(&w2)?.add(&bundle.b_coef.mul(&bundle.w)?)
}

/// Residual of the `z` equation on interior levels and on nodes at least
/// [`CHECK_MARGIN`] away from `∂Ω`.
pub fn z_residual(bundle: &TransformBundle) -> Result<ZResidual> {
    let z = &bundle.z;
    let g = *z.grid();
    let (z1, z2) = stencil::gradient(z)?;
    let lhs = stencil::time_derivative(z)?
        .sub(&stencil::laplacian(z)?)?
        .add(&bundle.a1.mul(&z1)?)?
        .add(&bundle.a2.mul(&z2)?)?
        .add(&bundle.a.add(&bundle.b1)?.mul(z)?)?;
    let rhs = z_source(bundle)?;
    let raw = lhs.sub(&rhs)?;
    let inside = |k: usize, i: usize, j: usize| {
        k >= 1 && k < g.nt && i >= CHECK_MARGIN && i + CHECK_MARGIN < g.nodes1() && j >= CHECK_MARGIN && j + CHECK_MARGIN < g.nodes2()
    };
    let field = ScalarField::from_fn(&g, |_, _, _| 0.0);
    let mut values = field.into_values();
    for ((k, i, j), v) in values.indexed_iter_mut() {
        if inside(k, i, j) {
            *v = raw.get(k, i, j);
        }
    }
    let field = ScalarField::from_values(g, FieldKind::Full, values)?;
    let norm = crate::grid::integrate(&field.map(|x| x * x)).sqrt();
    let discrepancy = Discrepancy::over(&g, CHECK_MARGIN, |k, i, j| field.get(k, i, j));
    Ok(ZResidual {
        field,
        norm,
        discrepancy,
    })
}

/// Largest `|z|` over all boundary nodes and time levels.
pub fn boundary_max(z: &ScalarField) -> Result<f64> {
    let mut m: f64 = 0.0;
    for seg in Segment::ALL {
        m = m.max(z.trace(seg)?.max_abs());
    }
    Ok(m)
}

/// Largest `|z(0, ·)|`.
pub fn initial_max(z: &ScalarField) -> f64 {
    z.level(0).iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Errors of the two representations
/// `w(x1) = ∫_α^{x1} z + w(α)` and `∂x2 w(x1) = ∫_α^{x1} ∂x2 z + ∂x2 w(α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FtcErrors {
    pub w: Discrepancy,
    pub dx2_w: Discrepancy,
}

/// Reconstruct `w` and `∂x2 w` from `z` and compare at every node.
pub fn ftc_representation_check(bundle: &TransformBundle) -> Result<FtcErrors> {
    let w = &bundle.w;
    let g = *w.grid();
    let a = g.alpha_index;
    let rec = integrate_from_alpha(&bundle.z)?;
    let w2 = stencil::partial_x2(w)?;
    let rec2 = integrate_from_alpha(&stencil::partial_x2(&bundle.z)?)?;
    Ok(FtcErrors {
        w: Discrepancy::over(&g, 0, |k, i, j| rec.get(k, i, j) + w.get(k, a, j) - w.get(k, i, j)),
        dx2_w: Discrepancy::over(&g, 0, |k, i, j| rec2.get(k, i, j) + w2.get(k, a, j) - w2.get(k, i, j)),
    })
}

/// How far `P w` is from being `x1`-independent and from `q̃ − q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhsIdentity {
    /// Deviation of `P w` from its value on the `α` column.
    pub x1_spread: Discrepancy,
    /// `P w − (q̃ − q)`.
    pub mismatch: Discrepancy,
}

pub fn rhs_identity_check(bundle: &TransformBundle, pot: &PotentialSpec, pot_tilde: &PotentialSpec) -> Result<RhsIdentity> {
    let pw = apply_w_operator(bundle, &bundle.w)?;
    let g = *pw.grid();
    let a = g.alpha_index;
    let (q, qt) = (pot.q(), pot_tilde.q());
    Ok(RhsIdentity {
        x1_spread: Discrepancy::over(&g, 1, |k, i, j| pw.get(k, i, j) - pw.get(k, a, j)),
        mismatch: Discrepancy::over(&g, 1, |k, i, j| pw.get(k, i, j) - (qt.get(k, 0, j) - q.get(k, 0, j))),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{manufacture_pair, DataPreset};
    use crate::grid::WaveguideDomain;
    use crate::presets::{PositiveOracle, Scenario, SeparableOracle};

    fn grid(n: usize, nt: usize) -> SpaceTimeGrid {
        SpaceTimeGrid::new(WaveguideDomain::bounded(1.0, 1.0, 1.0, 0.0).unwrap(), n, n, nt).unwrap()
    }

    #[test]
    fn identical_solutions_give_zero_bundle() {
        let g = grid(9, 16);
        let pot = Scenario::default().potential(&g, 0.0).unwrap();
        let pair = manufacture_pair(&pot, &pot, DataPreset::Positive).unwrap();
        let b = build_bundle(&pair.u, &pair.u_tilde, &pot).unwrap();
        assert_eq!(b.z.max_abs(), 0.0);
        assert!(b.a.is_finite() && b.b1.is_finite());
        assert_eq!(z_residual(&b).unwrap().norm, 0.0);
        let r = rhs_identity_check(&b, &pot, &pot).unwrap();
        assert_eq!(r.mismatch.max, 0.0);
    }

    #[test]
    fn constant_state_gives_potential() {
        let g = grid(9, 16);
        let pot = Scenario::default().potential(&g, 0.0).unwrap();
        let one = ScalarField::from_fn(&g, |_, _, _| 1.0);
        let flat = PotentialSpec::new(pot.q().clone(), vec![1.0; g.nodes1()]).unwrap();
        let b = build_bundle(&one, &one, &flat).unwrap();
        assert!(b.a1.max_abs() < 1e-12 && b.a2.max_abs() < 1e-12);
        assert!(b.a.sub(&flat.potential()).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn nonpositive_denominator_names_the_node() {
        let g = grid(6, 8);
        let pot = Scenario::default().potential(&g, 0.0).unwrap();
        let u = ScalarField::from_fn(&g, |_, x1, _| x1);
        match build_bundle(&u, &u, &pot) {
            Err(Error::NonPositiveDenominator { node, .. }) => assert_eq!(node[1], 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn coefficients_match_closed_forms() {
        let mut errs = vec![];
        for n in [15, 31] {
            let g = grid(n, 4 * (n + 1));
            let base = SeparableOracle::for_grid(&g, 0.5);
            let p = PositiveOracle { base, offset: 2.0 };
            let pot = base.potential(&g).unwrap();
            let ut = p.field(&g);
            let b = build_bundle(&ut, &ut, &pot).unwrap();
            let k1 = std::f64::consts::PI / 2.0;
            let exact_a1 = ScalarField::from_fn(&g, |t, x1, x2| -2.0 * p.d_x1(t, x1, x2) / p.value(t, x1, x2));
            let exact_b1 = ScalarField::from_fn(&g, |t, x1, x2| {
                let (u, u1) = (p.value(t, x1, x2), p.d_x1(t, x1, x2));
                let u11 = -k1 * k1 * base.value(t, x1, x2);
                -2.0 * (u11 / u - u1 * u1 / (u * u))
            });
            let exact_b2 = ScalarField::from_fn(&g, |t, x1, x2| {
                let (u, u1, u2) = (p.value(t, x1, x2), p.d_x1(t, x1, x2), p.d_x2(t, x1, x2));
                2.0 * (base.d_x1x2(t, x1, x2) / u - u1 * u2 / (u * u))
            });
            let d = |num: &ScalarField, ex: &ScalarField| Discrepancy::over(&g, CHECK_MARGIN, |k, i, j| num.get(k, i, j) - ex.get(k, i, j)).max;
            // ũ solves the q-system, so a ≡ 0
            let ea = Discrepancy::over(&g, CHECK_MARGIN, |k, i, j| b.a.get(k, i, j)).max;
            let tol = 10.0 * (g.dx1 * g.dx1 + g.dt * g.dt);
            for e in [d(&b.a1, &exact_a1), d(&b.b1, &exact_b1), d(&b.b2, &exact_b2), ea] {
                assert!(e <= tol, "{e} > {tol} at n = {n}");
            }
            errs.push(d(&b.b1, &exact_b1));
        }
        assert!(errs[1] < errs[0]);
    }

    #[test]
    fn ftc_is_exact_for_linear_w() {
        let g = grid(9, 8);
        let a = g.alpha();
        let w = ScalarField::from_fn(&g, |_, x1, _| x1 - a);
        let bundle = TransformBundle {
            z: stencil::partial_x1(&w).unwrap(),
            v: w.clone(),
            m: w.clone(),
            a1: w.clone(),
            a2: w.clone(),
            a: w.clone(),
            b1: w.clone(),
            b2: w.clone(),
            b_coef: w.clone(),
            w,
            c1_floor: 1.0,
        };
        let e = ftc_representation_check(&bundle).unwrap();
        assert!(e.w.max < 1e-13 && e.dx2_w.max < 1e-13);
    }

    #[test]
    fn pipeline_z_vanishes_on_the_boundary() {
        let g = grid(15, 32);
        let sc = Scenario::default();
        let pot = sc.potential(&g, 0.0).unwrap();
        let pt = sc.potential(&g, 0.1).unwrap();
        let pair = manufacture_pair(&pot, &pt, DataPreset::Positive).unwrap();
        let b = build_bundle(&pair.u, &pair.u_tilde, &pot).unwrap();
        assert_eq!(initial_max(&b.z), 0.0);
        assert!(boundary_max(&b.z).unwrap() <= 10.0 * g.dx1 * g.dx1);
        assert!(b.c1_floor > 0.0);
    }
}
