//! CSV form of a [`Measure`].
//!
//! ```text
//! # kind,dimension
//! atoms,1
//! 0.25,0.5
//! 0.0625,0.5
//! ```
//!
//! Grid measures carry one extra comment line with the exact grid
//! (`# grid origin=-8;spacing=0.01;cells=1601`) and list every cell centre.
//! Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{GridSpec, Measure, Point, Support, MAX_DIM};
use crate::error::{Error, Result};

fn join(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn to_csv_string(m: &Measure) -> String {
    let d = m.dim();
    let mut out = String::from("# kind,dimension\n");
    match m.support() {
        Support::Atoms { .. } => {
            let _ = writeln!(out, "atoms,{d}");
        }
        Support::Grid(g) => {
            let _ = writeln!(out, "grid,{d}");
            let cells: Vec<String> = g.cells().iter().map(|c| c.to_string()).collect();
            let _ = writeln!(
                out,
                "# grid origin={};spacing={:?};cells={}",
                join(g.origin()),
                g.spacing(),
                cells.join(" ")
            );
        }
    }
    for (x, w) in m.iter() {
        for c in &x[..d] {
            let _ = write!(out, "{c:?},");
        }
        let _ = writeln!(out, "{w:?}");
    }
    out
}

pub fn write_csv(m: &Measure, path: &Path) -> Result<()> {
    fs::write(path, to_csv_string(m)).map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Measure> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_csv_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

fn bad(line: usize, msg: impl Into<String>) -> Error {
    Error::InvalidMeasure(format!("line {}: {}", line + 1, msg.into()))
}

fn floats(s: &str, line: usize) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| bad(line, format!("`{t}`: {e}")))
        })
        .collect()
}

pub fn from_csv_str(text: &str) -> Result<Measure> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    match lines.next() {
        Some((_, l)) if l.trim() == "# kind,dimension" => {}
        Some((i, l)) => return Err(bad(i, format!("expected `# kind,dimension`, got `{l}`"))),
        None => return Err(bad(0, "empty file")),
    }
    let (i, kind_line) = lines.next().ok_or_else(|| bad(1, "missing kind line"))?;
    let (kind, dim) = kind_line
        .split_once(',')
        .ok_or_else(|| bad(i, "expected `kind,dimension`"))?;
    let dim: usize = dim.trim().parse().map_err(|_| bad(i, "bad dimension"))?;
    if !(1..=MAX_DIM).contains(&dim) {
        return Err(bad(i, format!("dimension {dim} not supported")));
    }
    let grid = match kind.trim() {
        "atoms" => None,
        "grid" => {
            let (j, spec) = lines
                .next()
                .ok_or_else(|| bad(i + 1, "missing grid line"))?;
            let body = spec
                .trim()
                .strip_prefix("# grid ")
                .ok_or_else(|| bad(j, "expected `# grid ...`"))?;
            let mut origin = None;
            let mut spacing = None;
            let mut cells = None;
            for part in body.split(';') {
                let (k, v) = part
                    .split_once('=')
                    .ok_or_else(|| bad(j, "bad grid field"))?;
                match k.trim() {
                    "origin" => origin = Some(floats(v, j)?),
                    "spacing" => spacing = floats(v, j)?.first().copied(),
                    "cells" => {
                        cells = Some(
                            v.split_whitespace()
                                .map(|t| t.parse::<usize>().map_err(|_| bad(j, "bad cell count")))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    other => return Err(bad(j, format!("unknown grid field `{other}`"))),
                }
            }
            let g = GridSpec::new(
                origin.ok_or_else(|| bad(j, "missing origin"))?,
                spacing.ok_or_else(|| bad(j, "missing spacing"))?,
                cells.ok_or_else(|| bad(j, "missing cells"))?,
            )?;
            if g.dim() != dim {
                return Err(bad(j, "grid dimension does not match header"));
            }
            Some(g)
        }
        other => return Err(bad(i, format!("unknown kind `{other}`"))),
    };

    let mut points: Vec<Point> = Vec::new();
    let mut weights = Vec::new();
    for (j, line) in lines {
        if line.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| bad(j, format!("`{t}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != dim + 1 {
            return Err(bad(
                j,
                format!("expected {} columns, got {}", dim + 1, vals.len()),
            ));
        }
        let mut p = [0.0; MAX_DIM];
        p[..dim].copy_from_slice(&vals[..dim]);
        points.push(p);
        weights.push(vals[dim]);
    }

    match grid {
        None => {
            if points.is_empty() {
                return Err(bad(2, "no atoms"));
            }
            let sorted = points.windows(2).all(|w| {
                w[0][0]
                    .total_cmp(&w[1][0])
                    .then(w[0][1].total_cmp(&w[1][1]))
                    .is_le()
            });
            if sorted {
                Measure::from_parts_unchecked(
                    Support::Atoms {
                        dim,
                        locations: points,
                    },
                    weights,
                )
            } else {
                Measure::from_points(dim, points, weights)
            }
        }
        Some(g) => {
            if points.len() != g.len() {
                return Err(bad(
                    3,
                    format!("{} rows for {} cells", points.len(), g.len()),
                ));
            }
            for (i, p) in points.iter().enumerate() {
                let c = g.center(i);
                if (0..dim).any(|a| (c[a] - p[a]).abs() > 1e-9 * g.spacing().max(1.0)) {
                    return Err(bad(i + 3, format!("row {i} is not at cell centre {c:?}")));
                }
            }
            Measure::from_parts_unchecked(Support::Grid(g), weights)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_round_trip() {
        let g = GridSpec::centered(&[0.0], 3.0, 0.1).unwrap();
        let m = Measure::gaussian(g, &[0.3], 0.5).unwrap();
        let back = from_csv_str(&to_csv_string(&m)).unwrap();
        assert_eq!(back.grid(), m.grid());
        for (a, b) in back.weights().iter().zip(m.weights()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn two_dimensional_grid_round_trip() {
        let g = GridSpec::centered(&[0.0, 1.0], 1.0, 0.25).unwrap();
        let m = Measure::gaussian(g, &[0.0, 1.0], 0.3).unwrap();
        let back = from_csv_str(&to_csv_string(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_header() {
        assert!(from_csv_str("kind\natoms,1\n0,1\n").is_err());
        assert!(from_csv_str("# kind,dimension\natoms,3\n0,0,0,1\n").is_err());
        assert!(from_csv_str("# kind,dimension\natoms,1\n0,1,2\n").is_err());
    }

    proptest! {
        #[test]
        fn atoms_round_trip_bit_exactly(
            v in prop::collection::vec((-1e3..1e3f64, -1e3..1e3f64, 1e-6..1.0f64), 1..20),
            two_d in any::<bool>()
        ) {
            let dim = if two_d { 2 } else { 1 };
            let locs = v.iter().map(|(x, y, _)| if two_d { vec![*x, *y] } else { vec![*x] }).collect();
            let w = v.iter().map(|t| t.2).collect();
            let m = Measure::atoms(dim, locs, w).unwrap();
            let back = from_csv_str(&to_csv_string(&m)).unwrap();
            prop_assert_eq!(back.weights().len(), m.weights().len());
            for (a, b) in back.weights().iter().zip(m.weights()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            for i in 0..m.len() {
                prop_assert_eq!(back.location(i)[0].to_bits(), m.location(i)[0].to_bits());
                prop_assert_eq!(back.location(i)[1].to_bits(), m.location(i)[1].to_bits());
            }
        }
    }
}
