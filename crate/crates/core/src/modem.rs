//! QAM constellations, symbol sampling, hard decisions, and symbol error
//! rate accounting.
//!
//! Constellations are square QAM grids normalized to unit average power.
//! Points are the cartesian product of the per-component level alphabet with
//! itself, indexed `i * m + q` where `i`/`q` pick the in-phase/quadrature
//! level and `m` is the number of levels per component.

use crate::rng::RngStream;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModemError {
    #[error("unsupported constellation order {0}; expected one of 4, 16, 64")]
    UnsupportedOrder(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Square QAM constellation with unit average power.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    order: usize,
    points: Vec<Complex64>,
    real_levels: Vec<f64>,
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    /// Per-component level alphabet, ascending.
    pub fn real_levels(&self) -> &[f64] {
        &self.real_levels
    }

    pub fn point(&self, index: usize) -> Complex64 {
        self.points[index]
    }
}

/// Per-user symbol assignment: constellation indices plus their values.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolVector {
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SymbolVector {
    pub fn from_indices(c: &Constellation, indices: Vec<usize>) -> Self {
        let values = indices.iter().map(|&i| c.point(i)).collect();
        Self { indices, values }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Build a K-QAM grid, K in {4, 16, 64}, normalized to unit average power.
pub fn make_qam(order: usize) -> Result<Constellation, ModemError> {
    let m = match order {
        4 => 2usize,
        16 => 4,
        64 => 8,
        _ => return Err(ModemError::UnsupportedOrder(order)),
    };
    // Odd-integer levels +-1, +-3, ... scaled so the grid has mean |s|^2 = 1:
    // per component the mean of squares is (m^2 - 1) / 3.
    let scale = (3.0 / (2.0 * (m * m - 1) as f64)).sqrt();
    let real_levels: Vec<f64> = (0..m)
        .map(|k| (2.0 * k as f64 - (m as f64 - 1.0)) * scale)
        .collect();
    let mut points = Vec::with_capacity(order);
    for &re in &real_levels {
        for &im in &real_levels {
            points.push(Complex64::new(re, im));
        }
    }
    Ok(Constellation {
        order,
        points,
        real_levels,
    })
}

/// Draw `n_tx` i.i.d. uniform symbols.
pub fn sample_symbols(c: &Constellation, n_tx: usize, rng: &mut RngStream) -> SymbolVector {
    let indices: Vec<usize> = (0..n_tx).map(|_| rng.index(c.order())).collect();
    SymbolVector::from_indices(c, indices)
}

/// Nearest level per component; ties go to the smaller level index.
pub fn nearest_level(levels: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (k, &l) in levels.iter().enumerate() {
        let d = (x - l).abs();
        if d < best_d {
            best_d = d;
            best = k;
        }
    }
    best
}

/// Slice soft complex estimates to the nearest constellation point.
///
/// The grid is I/Q separable, so the decision is the nearest real level per
/// component; component ties break toward the smaller level index.
pub fn hard_decision(c: &Constellation, soft: &[Complex64]) -> SymbolVector {
    let m = c.real_levels.len();
    let indices = soft
        .iter()
        .map(|z| {
            let i = nearest_level(&c.real_levels, z.re);
            let q = nearest_level(&c.real_levels, z.im);
            i * m + q
        })
        .collect();
    SymbolVector::from_indices(c, indices)
}

/// Fraction of per-user symbols that differ. A symbol is wrong if either
/// component is wrong; component errors are not double-counted.
pub fn ser(truth: &[SymbolVector], est: &[SymbolVector]) -> Result<f64, ModemError> {
    if truth.len() != est.len() {
        return Err(ModemError::DimensionMismatch(format!(
            "{} trials vs {}",
            truth.len(),
            est.len()
        )));
    }
    let mut symbols = 0usize;
    let mut errors = 0usize;
    for (t, e) in truth.iter().zip(est.iter()) {
        if t.len() != e.len() {
            return Err(ModemError::DimensionMismatch(format!(
                "{} users vs {}",
                t.len(),
                e.len()
            )));
        }
        symbols += t.len();
        errors += t
            .indices
            .iter()
            .zip(e.indices.iter())
            .filter(|(a, b)| a != b)
            .count();
    }
    if symbols == 0 {
        return Ok(0.0);
    }
    Ok(errors as f64 / symbols as f64)
}
