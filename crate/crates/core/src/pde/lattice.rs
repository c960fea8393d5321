//! Space-time evaluation lattices and their CSV form.

use std::io::Write;
use std::path::Path;

use crate::domain::BoxDomain;
use crate::error::{Error, Result};

/// Node counts for a tensor-product evaluation lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeSpec {
    /// Nodes per spatial axis.
    pub n_per_axis: usize,
    /// Time slices (including both endpoints).
    pub n_times: usize,
}

/// Values tabulated on a tensor-product spatial grid at a set of times.
///
/// `values` is indexed `[time][spatial row-major]`, the last spatial axis
/// varying fastest.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub axes: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

impl Lattice {
    pub fn spatial_dim(&self) -> usize {
        self.axes.len()
    }

    pub fn n_spatial(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn value(&self, t_idx: usize, spatial_idx: usize) -> f64 {
        self.values[t_idx * self.n_spatial() + spatial_idx]
    }

    /// Decodes a row-major spatial index into coordinates.
    pub fn spatial_point(&self, mut idx: usize) -> Vec<f64> {
        let mut coords = vec![0.0; self.spatial_dim()];
        for axis in (0..self.spatial_dim()).rev() {
            let n = self.axes[axis].len();
            coords[axis] = self.axes[axis][idx % n];
            idx /= n;
        }
        coords
    }

    /// Tabulates `f` over `domain x [0, horizon]`.
    pub fn evaluate<F>(domain: &BoxDomain, horizon: f64, spec: &LatticeSpec, f: F) -> Lattice
    where
        F: Fn(&[f64], f64) -> f64,
    {
        let axes: Vec<Vec<f64>> = (0..domain.dim())
            .map(|i| linspace(domain.lo()[i], domain.hi()[i], spec.n_per_axis))
            .collect();
        let times = linspace(0.0, horizon, spec.n_times);
        let n_spatial: usize = axes.iter().map(Vec::len).product();
        let mut lattice = Lattice {
            axes,
            times: times.clone(),
            values: Vec::with_capacity(n_spatial * times.len()),
        };
        for &t in &times {
            for s in 0..n_spatial {
                let x = lattice.spatial_point(s);
                lattice.values.push(f(&x, t));
            }
        }
        lattice
    }

    /// Writes `x1..xd, t, u` rows with a header.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=self.spatial_dim())
            .map(|i| format!("x{i}"))
            .chain(["t".to_string(), "u".to_string()])
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (ti, &t) in self.times.iter().enumerate() {
            for s in 0..self.n_spatial() {
                let x = self.spatial_point(s);
                for c in &x {
                    write!(out, "{c},")?;
                }
                writeln!(out, "{t},{}", self.value(ti, s))?;
            }
        }
        Ok(())
    }

    /// Reads a lattice written by [`Lattice::write_csv`]. The grid structure
    /// is reconstructed from the row order.
    pub fn read_csv(path: &Path, spatial_dim: usize) -> Result<Lattice> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::config("empty lattice csv".to_string()))?;
        let cols = header.split(',').count();
        if cols != spatial_dim + 2 {
            return Err(Error::config(format!(
                "expected {} columns, found {cols}",
                spatial_dim + 2
            )));
        }
        let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::config(format!("bad lattice csv field: {e}")))?;
            if fields.len() != spatial_dim + 2 {
                return Err(Error::config("ragged lattice csv row".to_string()));
            }
            rows.push((
                fields[..spatial_dim].to_vec(),
                fields[spatial_dim],
                fields[spatial_dim + 1],
            ));
        }
        let mut times: Vec<f64> = Vec::new();
        for (_, t, _) in &rows {
            if times.last() != Some(t) {
                times.push(*t);
            }
        }
        let n_spatial = rows.len() / times.len();
        let mut axes: Vec<Vec<f64>> = vec![Vec::new(); spatial_dim];
        for axis in 0..spatial_dim {
            let mut vals: Vec<f64> = rows[..n_spatial].iter().map(|(x, _, _)| x[axis]).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            vals.dedup();
            axes[axis] = vals;
        }
        let expected: usize = axes.iter().map(Vec::len).product();
        if expected != n_spatial {
            return Err(Error::config(
                "lattice csv is not a tensor-product grid".to_string(),
            ));
        }
        Ok(Lattice {
            axes,
            times,
            values: rows.iter().map(|(_, _, u)| *u).collect(),
        })
    }
}
