//! Second-order finite differences. Centred in the interior, one-sided
//! second-order at the first and last node of every lane, so linear data is
//! differentiated exactly and quadratics have exact second derivatives.

use ndarray::{s, Array3, ArrayView1, ArrayViewMut1, Axis};

use super::{FieldKind, ScalarField, Segment};
use crate::error::{Error, Result};
use crate::par;

fn d1_lane(f: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>, h: f64) {
    let n = f.len();
    let inv = 1.0 / (2.0 * h);
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
}

fn d2_lane(f: ArrayView1<'_, f64>, mut out: ArrayViewMut1<'_, f64>, h: f64) {
    let n = f.len();
    let inv = 1.0 / (h * h);
    out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
    for i in 1..n - 1 {
        out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv;
    }
    out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv;
}

#[derive(Clone, Copy)]
enum Order {
    First,
    Second,
}

fn along(f: &ScalarField, axis: usize, order: Order) -> Result<ScalarField> {
    let g = f.grid();
    let len = f.values().len_of(Axis(axis));
    let (need, name) = match order {
        Order::First => (3, "first derivative"),
        Order::Second => (4, "second derivative"),
    };
    if len < need {
        return Err(Error::KindMismatch {
            expected: format!("at least {need} nodes along axis {axis} for a {name}"),
            found: f.kind().name(),
        });
    }
    let h = match axis {
        0 => g.dt,
        1 => g.dx1,
        _ => g.dx2,
    };
    let mut out = Array3::<f64>::zeros(f.values().raw_dim());
    match order {
        Order::First => par::zip_lanes(out.view_mut(), f.values().view(), Axis(axis), |i, o| d1_lane(i, o, h)),
        Order::Second => par::zip_lanes(out.view_mut(), f.values().view(), Axis(axis), |i, o| d2_lane(i, o, h)),
    }
    Ok(ScalarField::from_parts(*g, f.kind(), out))
}

pub fn partial_x1(f: &ScalarField) -> Result<ScalarField> {
    along(f, 1, Order::First)
}

pub fn partial_x2(f: &ScalarField) -> Result<ScalarField> {
    along(f, 2, Order::First)
}

pub fn second_x1(f: &ScalarField) -> Result<ScalarField> {
    along(f, 1, Order::Second)
}

pub fn second_x2(f: &ScalarField) -> Result<ScalarField> {
    along(f, 2, Order::Second)
}

fn expect_spatial_2d(f: &ScalarField) -> Result<()> {
    match f.kind() {
        FieldKind::Full | FieldKind::Spatial => Ok(()),
        other => Err(Error::KindMismatch {
            expected: "full or spatial".into(),
            found: other.name(),
        }),
    }
}

/// `(∂x1 f, ∂x2 f)` of a full or spatial field.
pub fn gradient(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    expect_spatial_2d(f)?;
    Ok((partial_x1(f)?, partial_x2(f)?))
}

/// Five-point Laplacian in the interior; on the boundary the one-sided
/// four-point second differences are summed per direction.
pub fn laplacian(f: &ScalarField) -> Result<ScalarField> {
    expect_spatial_2d(f)?;
    second_x1(f)?.add(&second_x2(f)?)
}

pub fn time_derivative(f: &ScalarField) -> Result<ScalarField> {
    if f.kind() == FieldKind::Spatial {
        return Err(Error::KindMismatch {
            expected: "a field with a time axis".into(),
            found: f.kind().name(),
        });
    }
    along(f, 0, Order::First)
}

/// Outward normal derivative on one segment, `(3f_b − 4f_{b−1} + f_{b−2}) / 2h`
/// with `b` the boundary node and `b−1`, `b−2` stepping inward.
pub fn normal_derivative(f: &ScalarField, seg: Segment) -> Result<ScalarField> {
    f.expect_kind(FieldKind::Full)?;
    let g = f.grid();
    let v = f.values();
    let (n1, n2) = (g.nodes1(), g.nodes2());
    let (b0, b1, b2, h) = match seg {
        Segment::Bottom => (v.slice(s![.., .., 0..1]), v.slice(s![.., .., 1..2]), v.slice(s![.., .., 2..3]), g.dx2),
        Segment::Top => (
            v.slice(s![.., .., n2 - 1..n2]),
            v.slice(s![.., .., n2 - 2..n2 - 1]),
            v.slice(s![.., .., n2 - 3..n2 - 2]),
            g.dx2,
        ),
        Segment::Left => (v.slice(s![.., 0..1, ..]), v.slice(s![.., 1..2, ..]), v.slice(s![.., 2..3, ..]), g.dx1),
        Segment::Right => (
            v.slice(s![.., n1 - 1..n1, ..]),
            v.slice(s![.., n1 - 2..n1 - 1, ..]),
            v.slice(s![.., n1 - 3..n1 - 2, ..]),
            g.dx1,
        ),
    };
    let inv = 1.0 / (2.0 * h);
    let out = ndarray::Zip::from(&b0)
        .and(&b1)
        .and(&b2)
        .map_collect(|&a, &b, &c| (3.0 * a - 4.0 * b + c) * inv);
    Ok(ScalarField::from_parts(*g, FieldKind::Trace(seg), out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{SpaceTimeGrid, WaveguideDomain};
    use crate::fit::loglog_slope as fit_order;
    use std::f64::consts::PI;

    fn grid(n: usize) -> SpaceTimeGrid {
        let d = WaveguideDomain::bounded(1.0, 1.0, 2.0, 0.0).unwrap();
        SpaceTimeGrid::new(d, n, n, n).unwrap()
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let g = grid(6);
        let f = ScalarField::from_fn(&g, |_, _, _| 3.5);
        let (a, b) = gradient(&f).unwrap();
        assert!(a.max_abs() < 1e-12 && b.max_abs() < 1e-12);
        assert!(laplacian(&f).unwrap().max_abs() < 1e-10);
        assert!(time_derivative(&f).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn linear_reproduced() {
        let g = grid(7);
        let f = ScalarField::from_fn(&g, |_, x1, _| x1);
        let (a, b) = gradient(&f).unwrap();
        assert!(a.map(|v| v - 1.0).max_abs() < 1e-12);
        assert!(b.max_abs() < 1e-12);
        let ft = ScalarField::from_fn(&g, |t, _, _| t);
        assert!(time_derivative(&ft).unwrap().map(|v| v - 1.0).max_abs() < 1e-12);
    }

    #[test]
    fn quadratic_laplacian_is_four() {
        let g = grid(9);
        let f = ScalarField::from_fn(&g, |_, x1, x2| x1 * x1 + x2 * x2);
        let lap = laplacian(&f).unwrap();
        // one-sided four-point stencils are exact for quadratics too
        assert!(lap.map(|v| v - 4.0).max_abs() < 1e-9);
        assert_eq!(laplacian(&ScalarField::zeros(&g, FieldKind::Full)).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn normal_derivative_signs() {
        let g = grid(6);
        let f = ScalarField::from_fn(&g, |_, _, x2| x2);
        assert!(normal_derivative(&f, Segment::Top).unwrap().map(|v| v - 1.0).max_abs() < 1e-12);
        assert!(normal_derivative(&f, Segment::Bottom).unwrap().map(|v| v + 1.0).max_abs() < 1e-12);
        let f1 = ScalarField::from_fn(&g, |_, x1, _| x1);
        assert!(normal_derivative(&f1, Segment::Left).unwrap().map(|v| v + 1.0).max_abs() < 1e-12);
        assert!(normal_derivative(&f1, Segment::Right).unwrap().map(|v| v - 1.0).max_abs() < 1e-12);
    }

    #[test]
    fn cap_normal_matches_gradient_component() {
        let g = grid(16);
        let f = ScalarField::from_fn(&g, |t, x1, x2| (x1 * 1.3).sin() * (x2 + t).cos());
        let (d1, _) = gradient(&f).unwrap();
        let right = normal_derivative(&f, Segment::Right).unwrap();
        let left = normal_derivative(&f, Segment::Left).unwrap();
        let d1r = d1.trace(Segment::Right).unwrap();
        let d1l = d1.trace(Segment::Left).unwrap();
        let tol = 10.0 * g.dx1 * g.dx1;
        assert!(right.sub(&d1r).unwrap().max_abs() <= tol);
        assert!(left.add(&d1l).unwrap().max_abs() <= tol);
    }

    fn gradient_error(n: usize) -> (f64, f64) {
        let g = grid(n);
        let f = ScalarField::from_fn(&g, |_, x1, x2| x1.sin() * x2.cos());
        let (a, b) = gradient(&f).unwrap();
        let ea = ScalarField::from_fn(&g, |_, x1, x2| x1.cos() * x2.cos());
        let eb = ScalarField::from_fn(&g, |_, x1, x2| -x1.sin() * x2.sin());
        let err = a.sub(&ea).unwrap().max_abs().max(b.sub(&eb).unwrap().max_abs());
        (g.dx1, err)
    }

    #[test]
    fn gradient_second_order() {
        let data: Vec<_> = [7, 15, 31, 63].into_iter().map(gradient_error).collect();
        let p = fit_order(&data);
        assert!(p >= 1.9, "order {p}");
    }

    #[test]
    fn laplacian_eigenfunction_second_order() {
        let data: Vec<_> = [7, 15, 31, 63]
            .into_iter()
            .map(|n| {
                let g = grid(n);
                let k = PI / g.domain.height;
                let f = ScalarField::from_fn(&g, |_, _, x2| (k * x2).sin());
                let lap = laplacian(&f).unwrap();
                let err = lap.zip_map(&f, |l, v| l + k * k * v).unwrap().max_abs();
                (g.dx2, err)
            })
            .collect();
        let p = fit_order(&data);
        assert!(p >= 1.9, "order {p}");
    }

    #[test]
    fn time_derivative_second_order() {
        let data: Vec<_> = [8, 16, 32, 64]
            .into_iter()
            .map(|n| {
                let g = grid(n);
                let f = ScalarField::from_fn(&g, |t, _, _| (-t).exp());
                let d = time_derivative(&f).unwrap();
                (g.dt, d.add(&f).unwrap().max_abs())
            })
            .collect();
        let p = fit_order(&data);
        assert!(p >= 1.9, "order {p}");
    }
}
