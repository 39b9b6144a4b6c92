//! Individual conditional expectation grids over one to three factors.
//!
//! For every anchor row the varied factors are overwritten with each point
//! of the Cartesian grid and the model is queried; all other factors keep
//! the anchor's values. Grid points are stored row-major, last axis fastest.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::Predictor;
use crate::stats::linspace;

pub const MAX_AXES: usize = 3;
pub const DEFAULT_STEPS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    pub fn new(name: &str, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid(format!("axis {name} needs at least 2 grid values")));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid(format!("axis {name} grid must be finite and strictly increasing")));
        }
        Ok(Axis { name: name.to_string(), values })
    }

    pub fn linspace(name: &str, min: f64, max: f64, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::invalid(format!("axis {name}: steps must be >= 2")));
        }
        if !(min < max) {
            return Err(Error::invalid(format!("axis {name}: need min < max, got {min} and {max}")));
        }
        Axis::new(name, linspace(min, max, steps))
    }

    /// Grid over the observed range of column `feature` in `x`.
    pub fn observed(name: &str, x: &[Vec<f64>], feature: usize, steps: usize) -> Result<Self> {
        let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), row| {
            (lo.min(row[feature]), hi.max(row[feature]))
        });
        Axis::linspace(name, lo, hi, steps)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn position(&self, value: f64) -> Option<usize> {
        let tol = 1e-9 * value.abs().max(1.0);
        self.values.iter().position(|v| (v - value).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceGrid {
    pub axes: Vec<Axis>,
    /// Column of each axis in the feature matrix.
    pub feature_indices: Vec<usize>,
    /// Row indices of the anchor samples.
    pub anchor_ids: Vec<usize>,
    /// One flattened grid of predictions per anchor.
    pub predictions: Vec<Vec<f64>>,
    pub average: Vec<f64>,
}

fn shape_of(axes: &[Axis]) -> Vec<usize> {
    axes.iter().map(Axis::len).collect()
}

fn unflatten(shape: &[usize], mut flat: usize) -> Vec<usize> {
    let mut coords = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        coords[d] = flat % shape[d];
        flat /= shape[d];
    }
    coords
}

fn flatten(shape: &[usize], coords: &[usize]) -> usize {
    coords.iter().zip(shape).fold(0, |acc, (c, s)| acc * s + c)
}

fn average_of(predictions: &[Vec<f64>], points: usize) -> Vec<f64> {
    let n = predictions.len() as f64;
    (0..points).map(|g| predictions.iter().map(|p| p[g]).sum::<f64>() / n).collect()
}

impl IceGrid {
    pub fn shape(&self) -> Vec<usize> {
        shape_of(&self.axes)
    }

    pub fn n_points(&self) -> usize {
        self.shape().iter().product()
    }

    pub fn coords(&self, flat: usize) -> Vec<usize> {
        unflatten(&self.shape(), flat)
    }

    pub fn flat_index(&self, coords: &[usize]) -> usize {
        flatten(&self.shape(), coords)
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.coords(flat).iter().zip(&self.axes).map(|(&c, a)| a.values[c]).collect()
    }

    pub fn metadata(&self) -> IceMetadata {
        IceMetadata {
            axes: self.axes.clone(),
            shape: self.shape(),
            anchor_ids: self.anchor_ids.clone(),
            layout: "row-major, last axis fastest".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IceMetadata {
    pub axes: Vec<Axis>,
    pub shape: Vec<usize>,
    pub anchor_ids: Vec<usize>,
    pub layout: String,
}

/// Choose `count` anchor rows out of `n`, sorted; all rows if `count >= n`.
pub fn select_anchors(n: usize, count: Option<usize>, seed: u64) -> Vec<usize> {
    match count {
        Some(c) if c < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = rand::seq::index::sample(&mut rng, n, c).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    }
}

/// Compute the ICE grid. `anchors` defaults to every row of `x`.
pub fn ice(
    model: &impl Predictor,
    x: &[Vec<f64>],
    feature_names: &[String],
    axes: Vec<Axis>,
    anchors: Option<&[usize]>,
) -> Result<IceGrid> {
    if axes.is_empty() || axes.len() > MAX_AXES {
        return Err(Error::invalid(format!(
            "ICE varies 1 to {MAX_AXES} factors, got {}",
            axes.len()
        )));
    }
    if feature_names.len() != model.n_features() {
        return Err(Error::Arity { expected: model.n_features(), found: feature_names.len() });
    }
    let mut feature_indices = Vec::with_capacity(axes.len());
    for axis in &axes {
        let axis = Axis::new(&axis.name, axis.values.clone())?;
        let idx = feature_names
            .iter()
            .position(|n| *n == axis.name)
            .ok_or_else(|| Error::MissingColumn(axis.name.clone()))?;
        if feature_indices.contains(&idx) {
            return Err(Error::invalid(format!("factor {} varied twice", axis.name)));
        }
        feature_indices.push(idx);
    }
    let anchor_ids: Vec<usize> = match anchors {
        Some(a) => a.to_vec(),
        None => (0..x.len()).collect(),
    };
    if anchor_ids.is_empty() {
        return Err(Error::invalid("ICE needs at least one anchor sample"));
    }
    if let Some(&bad) = anchor_ids.iter().find(|&&i| i >= x.len()) {
        return Err(Error::invalid(format!("anchor row {bad} out of range")));
    }
    if let Some(row) = anchor_ids.iter().map(|&i| &x[i]).find(|r| r.len() != model.n_features()) {
        return Err(Error::Arity { expected: model.n_features(), found: row.len() });
    }

    let shape = shape_of(&axes);
    let points: usize = shape.iter().product();
    let predictions: Vec<Vec<f64>> = anchor_ids
        .par_iter()
        .map(|&i| {
            let mut row = x[i].clone();
            (0..points)
                .map(|g| {
                    for (d, c) in unflatten(&shape, g).into_iter().enumerate() {
                        row[feature_indices[d]] = axes[d].values[c];
                    }
                    model.predict_row(&row)
                })
                .collect()
        })
        .collect();
    let average = average_of(&predictions, points);
    Ok(IceGrid { axes, feature_indices, anchor_ids, predictions, average })
}

/// A lower-dimensional section of a grid with one axis held fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub fixed_axis: String,
    pub fixed_value: f64,
    pub grid: IceGrid,
}

/// Slice `grid` along `axis` at each of `slice_values`. Pure indexing.
pub fn project(grid: &IceGrid, axis: usize, slice_values: &[f64]) -> Result<Vec<Section>> {
    if grid.axes.len() < 2 {
        return Err(Error::invalid("projection needs a grid with at least 2 axes"));
    }
    if axis >= grid.axes.len() {
        return Err(Error::invalid(format!("axis {axis} out of range for {}-D grid", grid.axes.len())));
    }
    let shape = grid.shape();
    let mut sub_axes = grid.axes.clone();
    sub_axes.remove(axis);
    let mut sub_features = grid.feature_indices.clone();
    sub_features.remove(axis);
    let sub_shape = shape_of(&sub_axes);
    let sub_points: usize = sub_shape.iter().product();

    slice_values
        .iter()
        .map(|&value| {
            let pos = grid.axes[axis].position(value).ok_or_else(|| {
                Error::invalid(format!("{value} is not a grid value of axis {}", grid.axes[axis].name))
            })?;
            let take = |values: &[f64]| -> Vec<f64> {
                (0..sub_points)
                    .map(|g| {
                        let mut coords = unflatten(&sub_shape, g);
                        coords.insert(axis, pos);
                        values[flatten(&shape, &coords)]
                    })
                    .collect()
            };
            Ok(Section {
                fixed_axis: grid.axes[axis].name.clone(),
                fixed_value: grid.axes[axis].values[pos],
                grid: IceGrid {
                    axes: sub_axes.clone(),
                    feature_indices: sub_features.clone(),
                    anchor_ids: grid.anchor_ids.clone(),
                    predictions: grid.predictions.iter().map(|p| take(p)).collect(),
                    average: take(&grid.average),
                },
            })
        })
        .collect()
}

/// Long format: `sample_id,<axis names>,prediction`, one row per anchor and
/// grid point, followed by the `AVERAGE` pseudo-sample.
pub fn write_ice_csv(grid: &IceGrid, mut out: impl Write) -> Result<()> {
    let names: Vec<&str> = grid.axes.iter().map(|a| a.name.as_str()).collect();
    writeln!(out, "sample_id,{},prediction", names.join(","))?;
    let points = grid.n_points();
    let coords: Vec<String> = (0..points)
        .map(|g| grid.point(g).iter().map(f64::to_string).collect::<Vec<_>>().join(","))
        .collect();
    for (id, preds) in grid.anchor_ids.iter().zip(&grid.predictions) {
        for g in 0..points {
            writeln!(out, "{id},{},{}", coords[g], preds[g])?;
        }
    }
    for g in 0..points {
        writeln!(out, "AVERAGE,{},{}", coords[g], grid.average[g])?;
    }
    Ok(())
}
