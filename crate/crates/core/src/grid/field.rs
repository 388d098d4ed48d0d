use std::fmt;

use ndarray::{s, Array3, ArrayView2};

use super::{Segment, SpaceTimeGrid};
use crate::error::{Error, Result};

/// Layout of a sampled field. Every kind is stored as a 3-D array indexed
/// `(time, x1, x2)`; degenerate axes have length one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// `(nt+1, N1, N2)`
    Full,
    /// One time level: `(1, N1, N2)`
    Spatial,
    /// Values on one boundary segment for every time level:
    /// `(nt+1, N1, 1)` on lateral walls, `(nt+1, 1, N2)` on caps.
    Trace(Segment),
    /// A function of `(t, x2)` only: `(nt+1, 1, N2)`.
    CrossSection,
}

impl FieldKind {
    pub fn shape(self, grid: &SpaceTimeGrid) -> [usize; 3] {
        let [nt, n1, n2] = grid.shape();
        match self {
            FieldKind::Full => [nt, n1, n2],
            FieldKind::Spatial => [1, n1, n2],
            FieldKind::Trace(seg) if seg.is_lateral() => [nt, n1, 1],
            FieldKind::Trace(_) => [nt, 1, n2],
            FieldKind::CrossSection => [nt, 1, n2],
        }
    }

    pub fn name(self) -> String {
        match self {
            FieldKind::Full => "full".into(),
            FieldKind::Spatial => "spatial".into(),
            FieldKind::Trace(seg) => format!("trace:{}", seg.name()),
            FieldKind::CrossSection => "cross-section".into(),
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "full" => Some(FieldKind::Full),
            "spatial" => Some(FieldKind::Spatial),
            "cross-section" => Some(FieldKind::CrossSection),
            other => other
                .strip_prefix("trace:")
                .and_then(Segment::from_name)
                .map(FieldKind::Trace),
        }
    }
}

impl fmt::Display for FieldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A real function sampled on (part of) a [`SpaceTimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: SpaceTimeGrid,
    kind: FieldKind,
    values: Array3<f64>,
}

impl ScalarField {
    /// Wrap an array, checking its shape and that every entry is finite.
    pub fn from_values(grid: SpaceTimeGrid, kind: FieldKind, values: Array3<f64>) -> Result<Self> {
        let expected = kind.shape(&grid);
        let found = [values.dim().0, values.dim().1, values.dim().2];
        if expected != found {
            return Err(Error::ShapeMismatch { expected, found });
        }
        if let Some((idx, _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                node: [idx.0, idx.1, idx.2],
            });
        }
        Ok(ScalarField { grid, kind, values })
    }

    /// Internal constructor for operations whose output shape is known.
    pub(crate) fn from_parts(grid: SpaceTimeGrid, kind: FieldKind, values: Array3<f64>) -> Self {
        debug_assert_eq!(kind.shape(&grid), {
            let d = values.dim();
            [d.0, d.1, d.2]
        });
        ScalarField { grid, kind, values }
    }

    pub fn zeros(grid: &SpaceTimeGrid, kind: FieldKind) -> Self {
        let [a, b, c] = kind.shape(grid);
        ScalarField::from_parts(*grid, kind, Array3::zeros((a, b, c)))
    }

    /// Sample `f(t, x1, x2)` on the full space-time grid.
    pub fn from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64, f64) -> f64) -> Self {
        let [nt, n1, n2] = grid.shape();
        let values = Array3::from_shape_fn((nt, n1, n2), |(k, i, j)| f(grid.t(k), grid.x1(i), grid.x2(j)));
        ScalarField::from_parts(*grid, FieldKind::Full, values)
    }

    /// Sample `f(x1, x2)` as a single spatial slice.
    pub fn spatial_from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let [_, n1, n2] = grid.shape();
        let values = Array3::from_shape_fn((1, n1, n2), |(_, i, j)| f(grid.x1(i), grid.x2(j)));
        ScalarField::from_parts(*grid, FieldKind::Spatial, values)
    }

    /// Sample `f(t, x2)` on `(0,T) × 𝒟`.
    pub fn cross_from_fn(grid: &SpaceTimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let [nt, _, n2] = grid.shape();
        let values = Array3::from_shape_fn((nt, 1, n2), |(k, _, j)| f(grid.t(k), grid.x2(j)));
        ScalarField::from_parts(*grid, FieldKind::CrossSection, values)
    }

    /// Sample `f(t, s)` on a boundary segment, `s` being the tangential
    /// coordinate (`x1` on lateral walls, `x2` on caps).
    pub fn trace_from_fn(grid: &SpaceTimeGrid, seg: Segment, f: impl Fn(f64, f64) -> f64) -> Self {
        let kind = FieldKind::Trace(seg);
        let [a, b, c] = kind.shape(grid);
        let values = Array3::from_shape_fn((a, b, c), |(k, i, j)| {
            let s = if seg.is_lateral() { grid.x1(i) } else { grid.x2(j) };
            f(grid.t(k), s)
        });
        ScalarField::from_parts(*grid, kind, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[[k, i, j]]
    }

    /// Spatial slice `(x1, x2)` at time level `k` of a full field.
    pub fn level(&self, k: usize) -> ArrayView2<'_, f64> {
        self.values.slice(s![k, .., ..])
    }

    pub fn expect_kind(&self, kind: FieldKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.name(),
                found: self.kind.name(),
            })
        }
    }

    pub fn check_same_layout(&self, other: &ScalarField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        other.expect_kind(self.kind)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField::from_parts(self.grid, self.kind, self.values.mapv(f))
    }

    /// Pointwise combination of two fields of the same layout.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        self.check_same_layout(other)?;
        let mut out = self.values.clone();
        ndarray::Zip::from(&mut out)
            .and(&other.values)
            .for_each(|a, &b| *a = f(*a, b));
        Ok(ScalarField::from_parts(self.grid, self.kind, out))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Values of a full field on one boundary segment.
    pub fn trace(&self, seg: Segment) -> Result<ScalarField> {
        self.expect_kind(FieldKind::Full)?;
        let (n1, n2) = (self.grid.nodes1(), self.grid.nodes2());
        let view = match seg {
            Segment::Bottom => self.values.slice(s![.., .., 0..1]),
            Segment::Top => self.values.slice(s![.., .., n2 - 1..n2]),
            Segment::Left => self.values.slice(s![.., 0..1, ..]),
            Segment::Right => self.values.slice(s![.., n1 - 1..n1, ..]),
        };
        Ok(ScalarField::from_parts(self.grid, FieldKind::Trace(seg), view.to_owned()))
    }

    /// The `(t, x2)` cross-section of a full field at column `i`.
    pub fn column(&self, i: usize) -> Result<ScalarField> {
        self.expect_kind(FieldKind::Full)?;
        let view = self.values.slice(s![.., i..i + 1, ..]);
        Ok(ScalarField::from_parts(self.grid, FieldKind::CrossSection, view.to_owned()))
    }

    /// Broadcast a cross-section `g(t, x2)` to a full field constant in `x1`.
    pub fn extend_along_x1(&self) -> Result<ScalarField> {
        self.expect_kind(FieldKind::CrossSection)?;
        let [nt, n1, n2] = self.grid.shape();
        let values = Array3::from_shape_fn((nt, n1, n2), |(k, _, j)| self.values[[k, 0, j]]);
        Ok(ScalarField::from_parts(self.grid, FieldKind::Full, values))
    }

    /// Broadcast a spatial slice to every time level.
    pub fn extend_in_time(&self) -> Result<ScalarField> {
        self.expect_kind(FieldKind::Spatial)?;
        let [nt, n1, n2] = self.grid.shape();
        let values = Array3::from_shape_fn((nt, n1, n2), |(_, i, j)| self.values[[0, i, j]]);
        Ok(ScalarField::from_parts(self.grid, FieldKind::Full, values))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::WaveguideDomain;

    fn grid() -> SpaceTimeGrid {
        let d = WaveguideDomain::bounded(1.0, 1.0, 1.0, 0.0).unwrap();
        SpaceTimeGrid::new(d, 5, 4, 4).unwrap()
    }

    #[test]
    fn shapes_match_kind() {
        let g = grid();
        assert_eq!(FieldKind::Full.shape(&g), [5, 7, 6]);
        assert_eq!(FieldKind::Spatial.shape(&g), [1, 7, 6]);
        assert_eq!(FieldKind::Trace(Segment::Top).shape(&g), [5, 7, 1]);
        assert_eq!(FieldKind::Trace(Segment::Left).shape(&g), [5, 1, 6]);
        assert_eq!(FieldKind::CrossSection.shape(&g), [5, 1, 6]);
    }

    #[test]
    fn rejects_nan_and_bad_shape() {
        let g = grid();
        let mut v = Array3::zeros((5, 7, 6));
        v[[1, 2, 3]] = f64::NAN;
        match ScalarField::from_values(g, FieldKind::Full, v) {
            Err(Error::NonFinite { node }) => assert_eq!(node, [1, 2, 3]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ScalarField::from_values(g, FieldKind::Full, Array3::zeros((5, 7, 5))).is_err());
    }

    #[test]
    fn trace_and_column_extraction() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |t, x1, x2| t + 10.0 * x1 + 100.0 * x2);
        let top = f.trace(Segment::Top).unwrap();
        assert_eq!(top.get(2, 3, 0), f.get(2, 3, 5));
        let right = f.trace(Segment::Right).unwrap();
        assert_eq!(right.get(4, 0, 1), f.get(4, 6, 1));
        let col = f.column(g.alpha_index).unwrap();
        assert_eq!(col.get(1, 0, 2), f.get(1, g.alpha_index, 2));
        let back = col.extend_along_x1().unwrap();
        assert_eq!(back.get(1, 0, 2), col.get(1, 0, 2));
        assert_eq!(back.get(1, 6, 2), col.get(1, 0, 2));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in [
            FieldKind::Full,
            FieldKind::Spatial,
            FieldKind::CrossSection,
            FieldKind::Trace(Segment::Left),
            FieldKind::Trace(Segment::Top),
        ] {
            assert_eq!(FieldKind::from_name(&k.name()), Some(k));
        }
    }
}
