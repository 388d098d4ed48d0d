//! Tensor-product trapezoidal quadrature over whichever axes a field kind
//! spans. Exact for piecewise-linear data and positivity-preserving.

use ndarray::Axis;

use super::{FieldKind, ScalarField, SpaceTimeGrid};
use crate::error::{Error, Result};
use crate::par;

/// Trapezoid weights for `n` equispaced nodes of spacing `h`.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| if i == 0 || i + 1 == n { 0.5 * h } else { h })
            .collect(),
    }
}

fn spatial_weights(grid: &SpaceTimeGrid, kind: FieldKind) -> (Vec<f64>, Vec<f64>) {
    let [_, n1, n2] = kind.shape(grid);
    // a degenerate axis contributes a unit factor (point evaluation)
    let w1 = if n1 == 1 { vec![1.0] } else { trapezoid_weights(n1, grid.dx1) };
    let w2 = if n2 == 1 { vec![1.0] } else { trapezoid_weights(n2, grid.dx2) };
    (w1, w2)
}

/// Spatial integral of every time level, in level order.
pub(crate) fn level_integrals(f: &ScalarField) -> Vec<f64> {
    let (w1, w2) = spatial_weights(f.grid(), f.kind());
    let v = f.values();
    par::map_range(v.len_of(Axis(0)), |k| {
        let lvl = v.index_axis(Axis(0), k);
        let mut acc = 0.0;
        for (i, row) in lvl.outer_iter().enumerate() {
            let mut r = 0.0;
            for (j, x) in row.iter().enumerate() {
                r += w2[j] * x;
            }
            acc += w1[i] * r;
        }
        acc
    })
}

/// Integral of `f` over the region its kind describes:
/// `Q` for full fields, `Ω` for spatial slices, `(0,T) × segment` for
/// traces and `(0,T) × 𝒟` for cross-sections.
pub fn integrate(f: &ScalarField) -> f64 {
    let per_level = level_integrals(f);
    if f.kind() == FieldKind::Spatial {
        return per_level[0];
    }
    let wt = trapezoid_weights(per_level.len(), f.grid().dt);
    per_level.iter().zip(&wt).map(|(a, w)| a * w).sum()
}

/// Integral over `(lo, hi) × (spatial part)` of the piecewise-linear-in-time
/// interpolant. Partial panels are included exactly, so the result is
/// monotone in the window for nonnegative integrands.
pub fn integrate_time_window(f: &ScalarField, lo: f64, hi: f64) -> Result<f64> {
    if f.kind() == FieldKind::Spatial {
        return Err(Error::KindMismatch {
            expected: "a field with a time axis".into(),
            found: f.kind().name(),
        });
    }
    let g = f.grid();
    let t_end = g.domain.final_time;
    if !(lo >= 0.0 && hi <= t_end && lo <= hi) {
        return Err(Error::InvalidParameter {
            name: "time window",
            reason: format!("({lo}, {hi}) is not inside [0, {t_end}]"),
        });
    }
    let per_level = level_integrals(f);
    let mut total = 0.0;
    for k in 0..g.nt {
        let (t0, t1) = (g.t(k), g.t(k + 1));
        let a = lo.max(t0);
        let b = hi.min(t1);
        if b <= a {
            continue;
        }
        let (f0, f1) = (per_level[k], per_level[k + 1]);
        let at = |t: f64| f0 + (f1 - f0) * (t - t0) / (t1 - t0);
        total += 0.5 * (b - a) * (at(a) + at(b));
    }
    Ok(total)
}

/// `∫_α^{x1} f(t, ξ, x2) dξ` at every node of a full field, by prefix
/// trapezoid sums outward from the `α` column (where it is 0).
pub fn integrate_from_alpha(f: &ScalarField) -> Result<ScalarField> {
    f.expect_kind(FieldKind::Full)?;
    let g = *f.grid();
    let a = g.alpha_index;
    let h = g.dx1;
    let v = f.values();
    let mut out = ndarray::Array3::<f64>::zeros(v.raw_dim());
    par::zip_lanes(out.view_mut(), v.view(), Axis(1), |lane, mut acc| {
        acc[a] = 0.0;
        for i in a + 1..lane.len() {
            acc[i] = acc[i - 1] + 0.5 * h * (lane[i - 1] + lane[i]);
        }
        for i in (0..a).rev() {
            acc[i] = acc[i + 1] - 0.5 * h * (lane[i] + lane[i + 1]);
        }
    });
    Ok(ScalarField::from_parts(g, FieldKind::Full, out))
}
