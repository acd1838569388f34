//! Multitask label maps applied on the right of `n x m` label or score
//! matrices.
//!
//! A dissimilarity matrix `C` yields `(gamma I + L)^p`, which pushes the
//! labelings of dissimilar tasks apart; a similarity matrix yields
//! `(gamma I + L)^-1`, which pulls similar tasks together. `L` is the
//! Laplacian of the task matrix in both cases.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::labels::LabelMatrix;
use crate::relatedness::{MatrixKind, TaskMatrix};

/// Exponent of the dissimilarity map: one half or a positive integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapPower {
    Half,
    Integer(u32),
}

impl MapPower {
    pub const ONE: MapPower = MapPower::Integer(1);

    pub fn as_f64(self) -> f64 {
        match self {
            MapPower::Half => 0.5,
            MapPower::Integer(p) => p as f64,
        }
    }
}

impl Default for MapPower {
    fn default() -> Self {
        MapPower::ONE
    }
}

impl fmt::Display for MapPower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapPower::Half => f.write_str("0.5"),
            MapPower::Integer(p) => write!(f, "{p}"),
        }
    }
}

impl Serialize for MapPower {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl FromStr for MapPower {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "1/2" {
            return Ok(MapPower::Half);
        }
        let v: f64 = s
            .parse()
            .map_err(|_| Error::InvalidInput(format!("invalid power {s:?}")))?;
        if v == 0.5 {
            Ok(MapPower::Half)
        } else if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(MapPower::Integer(v as u32))
        } else {
            Err(Error::InvalidInput(format!(
                "power must be 1/2 or a positive integer, got {s}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapMode {
    DissimilarityPower,
    SimilarityInverse,
}

#[derive(Debug, Clone)]
pub struct MultitaskMap {
    mode: MapMode,
    gamma: f64,
    power: MapPower,
    operator: DMatrix<f64>,
}

impl MultitaskMap {
    pub fn identity(m: usize) -> Self {
        MultitaskMap {
            mode: MapMode::DissimilarityPower,
            gamma: 1.0,
            power: MapPower::ONE,
            operator: DMatrix::identity(m, m),
        }
    }

    pub fn m(&self) -> usize {
        self.operator.nrows()
    }

    pub fn mode(&self) -> MapMode {
        self.mode
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn power(&self) -> MapPower {
        self.power
    }

    pub fn operator(&self) -> &DMatrix<f64> {
        &self.operator
    }

    /// `scores * operator`.
    pub fn apply(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scores.ncols() != self.m() {
            return Err(Error::DimensionMismatch {
                expected: self.m(),
                found: scores.ncols(),
            });
        }
        Ok(scores * &self.operator)
    }
}

/// Builds `(gamma I + L)^p` for a dissimilarity matrix or `(gamma I + L)^-1`
/// for a similarity matrix (`p` is ignored in that mode).
pub fn build_map(tm: &TaskMatrix, gamma: f64, power: MapPower) -> Result<MultitaskMap> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if tm.entries().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "task matrix has non-finite entries".into(),
        ));
    }
    let m = tm.m();
    let base = DMatrix::identity(m, m) * gamma + tm.laplacian();
    let (mode, power, operator) = match tm.kind() {
        MatrixKind::Dissimilarity => {
            let op = match power {
                MapPower::Integer(0) => {
                    return Err(Error::InvalidInput("power must be positive".into()));
                }
                MapPower::Integer(p) => {
                    let mut acc = base.clone();
                    for _ in 1..p {
                        acc = &acc * &base;
                    }
                    acc
                }
                MapPower::Half => symmetric_sqrt(base)?,
            };
            (MapMode::DissimilarityPower, power, op)
        }
        MatrixKind::Similarity => {
            let chol = Cholesky::new(base)
                .ok_or_else(|| Error::Numerical("gamma I + L is not positive definite".into()))?;
            (MapMode::SimilarityInverse, MapPower::ONE, chol.inverse())
        }
    };
    let operator = symmetrize(operator);
    if operator.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "multitask operator has non-finite entries".into(),
        ));
    }
    Ok(MultitaskMap {
        mode,
        gamma,
        power,
        operator,
    })
}

fn symmetric_sqrt(a: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(a);
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&l| l <= 0.0) {
        return Err(Error::Numerical(format!(
            "non-positive eigenvalue {bad} in gamma I + L"
        )));
    }
    let roots = eig.eigenvalues.map(f64::sqrt);
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// `Y (gamma I + L)` for a dissimilarity matrix, computed entrywise: a
/// positive label becomes `gamma + 2 d-` and a negative one `-gamma - 2 d+`,
/// where `d+` / `d-` sum the task's dissimilarities to the tasks in which the
/// instance is positive / negative.
pub fn apply_map_closed_form(y: &LabelMatrix, tm: &TaskMatrix, gamma: f64) -> Result<DMatrix<f64>> {
    if tm.kind() != MatrixKind::Dissimilarity {
        return Err(Error::InvalidInput(
            "closed form requires a dissimilarity matrix".into(),
        ));
    }
    if y.m() != tm.m() {
        return Err(Error::DimensionMismatch {
            expected: tm.m(),
            found: y.m(),
        });
    }
    let (n, m) = (y.n(), y.m());
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for k in 0..m {
            let (mut d_pos, mut d_neg) = (0.0, 0.0);
            for r in 0..m {
                if y.is_positive(i, r) {
                    d_pos += tm.get(r, k);
                } else {
                    d_neg += tm.get(r, k);
                }
            }
            out[(i, k)] = if y.is_positive(i, k) {
                gamma + 2.0 * d_neg
            } else {
                -gamma - 2.0 * d_pos
            };
        }
    }
    Ok(out)
}
