//! Periodic scalar fields on the torus: the corrector profile `u` with its
//! affine completion `v = u + p·x`, and the periodic forcing `g`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Dim;
use crate::lattice::{Cell, TorusGrid};
use crate::sum;

/// Integer direction vector; the second entry is zero in one dimension.
pub type Direction = [i64; 2];

pub fn dot(p: Direction, x: [f64; 2]) -> f64 {
    p[0] as f64 * x[0] + p[1] as f64 * x[1]
}

pub fn norm(p: Direction) -> f64 {
    (p[0] as f64).hypot(p[1] as f64)
}

/// Mean-zero periodic profile `u` with direction `p`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodicProfile {
    torus: TorusGrid,
    p: Direction,
    values: Vec<f64>,
}

impl PeriodicProfile {
    /// Wraps values and removes their mean.
    pub fn new(torus: TorusGrid, p: Direction, values: Vec<f64>) -> Result<Self> {
        if values.len() != torus.len() {
            return Err(Error::Precondition(format!(
                "profile has {} values, torus has {} cells",
                values.len(),
                torus.len()
            )));
        }
        if torus.dim() == Dim::One && p[1] != 0 {
            return Err(Error::invalid("p", "one-dimensional directions have a single component"));
        }
        let mut profile = PeriodicProfile { torus, p, values };
        profile.recenter();
        Ok(profile)
    }

    pub fn zero(torus: TorusGrid, p: Direction) -> Self {
        PeriodicProfile { torus, p, values: vec![0.0; torus.len()] }
    }

    /// Subtracts the mean, summed in a permutation-invariant order so that
    /// translated profiles are re-centered identically.
    pub fn recenter(&mut self) {
        let mean = sum::permutation_invariant(&self.values) / self.values.len() as f64;
        for v in &mut self.values {
            *v -= mean;
        }
    }

    pub fn torus(&self) -> TorusGrid {
        self.torus
    }

    pub fn direction(&self) -> Direction {
        self.p
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        sum::pairwise(&self.values) / self.values.len() as f64
    }

    /// `u` at any lattice cell, by periodicity.
    pub fn u(&self, c: Cell) -> f64 {
        self.values[self.torus.index(c)]
    }

    /// `v(c) = u(c) + p·x_c`, evaluated as the base-cell value plus the exact
    /// integer shift `p·k` so that `v(c + m k) = v(c) + p·k` up to one rounding.
    pub fn v(&self, c: Cell) -> f64 {
        let base_index = self.torus.index(c);
        let base = self.torus.cell(base_index);
        let k = self.torus.period_of(c);
        let shift = (self.p[0] * k[0] + self.p[1] * k[1]) as f64;
        self.values[base_index] + dot(self.p, self.torus.center(base)) + shift
    }

    /// Same profile shifted by `s` cells: `u'(c) = u(c - s)`.
    pub fn translated(&self, s: Cell) -> PeriodicProfile {
        let values = (0..self.torus.len())
            .map(|i| {
                let c = self.torus.cell(i);
                self.u([c[0] - s[0], c[1] - s[1]])
            })
            .collect();
        PeriodicProfile { torus: self.torus, p: self.p, values }
    }
}

/// Mean-zero periodic forcing sampled per torus cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForcingField {
    torus: TorusGrid,
    values: Vec<f64>,
    amplitude: f64,
    sup_norm: f64,
}

impl ForcingField {
    pub fn zero(torus: TorusGrid) -> Self {
        ForcingField { torus, values: vec![0.0; torus.len()], amplitude: 0.0, sup_norm: 0.0 }
    }

    /// `g(x) = A Π_i cos(2π x_i)` at cell centers.
    pub fn cosine(torus: TorusGrid, amplitude: f64) -> Result<Self> {
        if !amplitude.is_finite() {
            return Err(Error::invalid("amplitude", "must be finite"));
        }
        let values = (0..torus.len())
            .map(|i| {
                let x = torus.center(torus.cell(i));
                match torus.dim() {
                    Dim::One => amplitude * (2.0 * PI * x[0]).cos(),
                    Dim::Two => amplitude * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos(),
                }
            })
            .collect();
        Ok(ForcingField::centered(torus, values, amplitude))
    }

    /// Per-cell values; the mean must vanish to `1e-12` (relative to the sup
    /// norm) and is then removed exactly.
    pub fn from_values(torus: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != torus.len() {
            return Err(Error::invalid("forcing", format!("expected {} values, got {}", torus.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("forcing", "values must be finite"));
        }
        let sup = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let mean = sum::pairwise(&values) / values.len() as f64;
        if mean.abs() > 1e-12 * sup.max(1e-300) {
            return Err(Error::invalid("forcing", format!("mean {mean:e} is not zero")));
        }
        Ok(ForcingField::centered(torus, values, sup))
    }

    fn centered(torus: TorusGrid, mut values: Vec<f64>, amplitude: f64) -> Self {
        let mean = sum::permutation_invariant(&values) / values.len() as f64;
        for v in &mut values {
            *v -= mean;
        }
        let sup_norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        ForcingField { torus, values, amplitude, sup_norm }
    }

    /// Rejects forcings above the positivity threshold `kappa3 / 2`.
    pub fn require_small(&self, kappa3: f64) -> Result<()> {
        if self.sup_norm > 0.5 * kappa3 {
            return Err(Error::Precondition(format!(
                "forcing sup norm {} exceeds kappa3/2 = {}",
                self.sup_norm,
                0.5 * kappa3
            )));
        }
        Ok(())
    }

    pub fn torus(&self) -> TorusGrid {
        self.torus
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm == 0.0
    }

    pub fn at(&self, c: Cell) -> f64 {
        self.values[self.torus.index(c)]
    }

    /// `‖g‖_{L^q(Q)}` by cell sums.
    pub fn lebesgue_norm(&self, q: f64) -> f64 {
        let vol = self.torus.cell_volume();
        let terms: Vec<f64> = self.values.iter().map(|g| g.abs().powf(q) * vol).collect();
        sum::pairwise(&terms).powf(1.0 / q)
    }

    /// Forcing with `g'(c) = g(c - s)`.
    pub fn translated(&self, s: Cell) -> ForcingField {
        let values = (0..self.torus.len())
            .map(|i| {
                let c = self.torus.cell(i);
                self.at([c[0] - s[0], c[1] - s[1]])
            })
            .collect();
        ForcingField { values, ..self.clone() }
    }

    /// Forcing with the sign flipped.
    pub fn negated(&self) -> ForcingField {
        ForcingField { values: self.values.iter().map(|g| -g).collect(), ..self.clone() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v_is_equivariant_under_period_shifts() {
        let torus = TorusGrid::new(Dim::Two, 8).unwrap();
        let values: Vec<f64> = (0..64).map(|i| ((i * 37) % 11) as f64 * 0.01).collect();
        let u = PeriodicProfile::new(torus, [2, 1], values).unwrap();
        for c in [[0, 0], [3, 5], [-4, 9], [17, -3]] {
            let shifted = u.v([c[0] + 8, c[1] - 16]);
            assert!((shifted - (u.v(c) + 2.0 - 2.0)).abs() < 1e-14);
        }
        assert!(u.mean().abs() < 1e-16);
    }

    #[test]
    fn cosine_forcing_is_mean_zero() {
        let torus = TorusGrid::new(Dim::Two, 12).unwrap();
        let g = ForcingField::cosine(torus, 0.05).unwrap();
        assert!(sum::pairwise(g.values()).abs() < 1e-16);
        assert!(g.sup_norm() <= 0.05);
    }

    #[test]
    fn biased_values_are_rejected() {
        let torus = TorusGrid::new(Dim::One, 8).unwrap();
        assert!(ForcingField::from_values(torus, vec![1.0; 8]).is_err());
    }
}
