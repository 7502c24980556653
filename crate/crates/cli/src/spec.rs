//! Parsers for the compact `key=value` flag syntax.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use stabcert::domain::{GridDomain, GridFunction};
use stabcert::geometry::{SetIndicator, Shape};
use stabcert::hash::hash_bytes;

/// `k1=v1,k2=v2` into a map. Keys are case-sensitive.
pub fn key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| anyhow!("expected key=value, got {part:?}"))?;
        if out.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
            bail!("duplicate key {k:?}");
        }
    }
    Ok(out)
}

fn take<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    match map.remove(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|e| anyhow!("bad value {v:?} for {key}: {e}")),
    }
}

fn require<T: std::str::FromStr>(map: &mut BTreeMap<String, String>, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    take(map, key)?.ok_or_else(|| anyhow!("missing key {key}"))
}

fn finish(map: BTreeMap<String, String>, what: &str) -> Result<()> {
    if let Some(k) = map.keys().next() {
        bail!("unknown key {k:?} in {what}");
    }
    Ok(())
}

/// `a;b` into a coordinate vector.
pub fn point(text: &str) -> Result<Vec<f64>> {
    text.split(';')
        .map(|v| v.trim().parse::<f64>().map_err(|e| anyhow!("bad coordinate {v:?}: {e}")))
        .collect()
}

/// `--domain dim=1,R=10,m=512,periodic=true`.
pub fn parse_domain(text: &str) -> Result<GridDomain<f64>> {
    let mut map = key_values(text)?;
    let dim = require(&mut map, "dim")?;
    let r = require(&mut map, "R")?;
    let m = require(&mut map, "m")?;
    let periodic = take(&mut map, "periodic")?.unwrap_or(false);
    finish(map, "--domain")?;
    Ok(GridDomain::new(dim, r, m, periodic)?)
}

/// Where a set came from; file-backed sets carry their content hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetSource {
    pub text: String,
    pub shape: Option<Shape<f64>>,
    pub file_hash: Option<String>,
}

/// `--set` fixtures:
/// `full`, `empty`, `half:axis=0,offset=0`, `slabs:period=1,fill=0.25`,
/// `ball:center=0;0,radius=1`, `ballc:center=0,radius=1`,
/// `box:lower=0;0,upper=1;1`, `file:path.json`.
pub fn parse_set(text: &str, domain: &GridDomain<f64>) -> Result<(SetIndicator<f64>, SetSource)> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    if kind == "file" {
        let bytes = fs::read(rest).with_context(|| format!("reading set file {rest}"))?;
        let set: SetIndicator<f64> = serde_json::from_slice(&bytes).with_context(|| format!("parsing set file {rest}"))?;
        if set.domain() != domain {
            bail!("set file {rest} lives on a different grid than --domain");
        }
        return Ok((set, SetSource { text: text.into(), shape: None, file_hash: Some(hash_bytes(&bytes)) }));
    }
    let mut map = key_values(rest)?;
    let shape = match kind {
        "full" => Shape::Full,
        "empty" => Shape::Empty,
        "half" => Shape::HalfSpace { axis: take(&mut map, "axis")?.unwrap_or(0), offset: take(&mut map, "offset")?.unwrap_or(0.0) },
        "slabs" => Shape::PeriodicSlabs { period: require(&mut map, "period")?, fill_fraction: require(&mut map, "fill")? },
        "ball" | "ballc" => {
            let center = point(&map.remove("center").unwrap_or_else(|| "0".into()))?;
            let radius = require(&mut map, "radius")?;
            if kind == "ball" {
                Shape::Ball { center, radius }
            } else {
                Shape::BallComplement { center, radius }
            }
        }
        "box" => Shape::Box {
            lower: point(&map.remove("lower").ok_or_else(|| anyhow!("missing key lower"))?)?,
            upper: point(&map.remove("upper").ok_or_else(|| anyhow!("missing key upper"))?)?,
        },
        other => bail!("unknown set fixture {other:?}"),
    };
    finish(map, "--set")?;
    let set = SetIndicator::from_shape(domain, &shape)?;
    Ok((set, SetSource { text: text.into(), shape: Some(shape), file_hash: None }))
}

/// `--potential harmonic:c=4` (`|x|² - c`) or a path to a grid-function JSON.
/// Returns the potential and, for files, the content hash.
pub fn parse_potential(text: &str, domain: &GridDomain<f64>) -> Result<(GridFunction<f64>, Option<String>)> {
    if let Some(rest) = text.strip_prefix("harmonic") {
        let mut map = key_values(rest.trim_start_matches(':'))?;
        let c: f64 = take(&mut map, "c")?.unwrap_or(0.0);
        finish(map, "--potential")?;
        return Ok((GridFunction::from_fn(domain, |x| x[0] * x[0] + x[1] * x[1] - c), None));
    }
    let bytes = fs::read(Path::new(text)).with_context(|| format!("reading potential file {text}"))?;
    let v: GridFunction<f64> = serde_json::from_slice(&bytes).with_context(|| format!("parsing potential file {text}"))?;
    if v.domain() != domain {
        bail!("potential file {text} lives on a different grid than --domain");
    }
    Ok((v, Some(hash_bytes(&bytes))))
}

/// `--centers 0,5,-3` (1D) or `0;0,5;1` (2D).
pub fn parse_centers(text: &str, dim: usize) -> Result<Vec<[f64; 2]>> {
    text.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            let v = point(p)?;
            if v.len() != dim {
                bail!("center {p:?} has {} coordinates, expected {dim}", v.len());
            }
            Ok([v[0], v.get(1).copied().unwrap_or(0.0)])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain_flag() {
        let d = parse_domain("dim=1,R=10,m=512,periodic=true").unwrap();
        assert_eq!((d.dim(), d.half_width(), d.points_per_axis(), d.periodic()), (1, 10.0, 512, true));
        assert!(parse_domain("dim=1,R=10").is_err());
        assert!(parse_domain("dim=1,R=10,m=64,colour=red").is_err());
    }

    #[test]
    fn set_fixtures() {
        let d = parse_domain("dim=1,R=10,m=200,periodic=true").unwrap();
        let (slabs, src) = parse_set("slabs:period=1,fill=0.25", &d).unwrap();
        assert_eq!(slabs.count(), 60);
        assert!(matches!(src.shape, Some(Shape::PeriodicSlabs { .. })));
        let (b, _) = parse_set("box:lower=0,upper=10", &d).unwrap();
        assert_eq!(b.count(), 100);
        assert!(parse_set("moon:radius=1", &d).is_err());
    }

    #[test]
    fn centers() {
        assert_eq!(parse_centers("0, 5,-3", 1).unwrap(), vec![[0.0, 0.0], [5.0, 0.0], [-3.0, 0.0]]);
        assert_eq!(parse_centers("1;2", 2).unwrap(), vec![[1.0, 2.0]]);
        assert!(parse_centers("1;2", 1).is_err());
    }
}
