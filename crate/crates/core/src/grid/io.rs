//! Two-file field persistence: `<name>.meta` holds `key: value` lines
//! describing the grid and layout, `<name>.f64` holds the samples as
//! little-endian `f64` in `(time, x1, x2)` row-major order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;

use super::{FieldKind, ObservedSide, ScalarField, SpaceTimeGrid, WaveguideDomain};
use crate::error::{Error, Result};

const FORMAT_TAG: &str = "waveguide-field-v1";

fn paths(dir: &Path, name: &str) -> (PathBuf, PathBuf) {
    (dir.join(format!("{name}.meta")), dir.join(format!("{name}.f64")))
}

/// Write `field` as `dir/name.meta` + `dir/name.f64`.
pub fn save_field(field: &ScalarField, dir: &Path, name: &str, provenance: &str) -> Result<()> {
    let g = field.grid();
    let d = &g.domain;
    let [a, b, c] = field.kind().shape(g);
    let meta = format!(
        "format: {FORMAT_TAG}\n\
         name: {name}\n\
         kind: {}\n\
         half_length: {}\n\
         height: {}\n\
         final_time: {}\n\
         alpha: {}\n\
         observed: {}\n\
         truncated: {}\n\
         n1: {}\n\
         n2: {}\n\
         nt: {}\n\
         shape: {a},{b},{c}\n\
         byte_order: little-endian\n\
         provenance: {}\n",
        field.kind().name(),
        d.half_length,
        d.height,
        d.final_time,
        d.alpha,
        d.observed.name(),
        d.truncated,
        g.n1,
        g.n2,
        g.nt,
        provenance.replace('\n', " "),
    );
    let (meta_path, bin_path) = paths(dir, name);
    fs::create_dir_all(dir)?;
    fs::write(meta_path, meta)?;
    let mut bytes = Vec::with_capacity(8 * a * b * c);
    for v in field.values().iter() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(bin_path, bytes)?;
    Ok(())
}

fn parse_meta(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (k, v) = line
            .split_once(':')
            .ok_or_else(|| Error::Format(format!("line without ':' separator: {line}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("missing key `{key}`")))
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T> {
    get(map, key)?
        .parse()
        .map_err(|_| Error::Format(format!("key `{key}` is not a valid number")))
}

/// Read a field written by [`save_field`].
pub fn load_field(dir: &Path, name: &str) -> Result<ScalarField> {
    let (meta_path, bin_path) = paths(dir, name);
    let meta = parse_meta(&fs::read_to_string(meta_path)?)?;
    if get(&meta, "format")? != FORMAT_TAG {
        return Err(Error::Format("unknown format tag".into()));
    }
    let observed = ObservedSide::from_name(get(&meta, "observed")?)
        .ok_or_else(|| Error::Format("bad `observed` value".into()))?;
    let truncated: bool = get(&meta, "truncated")?
        .parse()
        .map_err(|_| Error::Format("bad `truncated` value".into()))?;
    let domain = WaveguideDomain {
        half_length: num(&meta, "half_length")?,
        height: num(&meta, "height")?,
        final_time: num(&meta, "final_time")?,
        alpha: num(&meta, "alpha")?,
        observed,
        truncated,
    };
    let grid = SpaceTimeGrid::new(domain, num(&meta, "n1")?, num(&meta, "n2")?, num(&meta, "nt")?)?;
    let kind = FieldKind::from_name(get(&meta, "kind")?).ok_or_else(|| Error::Format("bad `kind` value".into()))?;
    let [a, b, c] = kind.shape(&grid);
    let bytes = fs::read(bin_path)?;
    if bytes.len() != 8 * a * b * c {
        return Err(Error::Format(format!(
            "values file holds {} bytes, expected {}",
            bytes.len(),
            8 * a * b * c
        )));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|ch| f64::from_le_bytes(ch.try_into().expect("chunk of 8")))
        .collect();
    let values = Array3::from_shape_vec((a, b, c), data).map_err(|e| Error::Format(e.to_string()))?;
    ScalarField::from_values(grid, kind, values)
}
