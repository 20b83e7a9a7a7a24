//! Binary lattice sets on a finite window with a rule for every cell outside it.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::Dim;
use crate::lattice::{Cell, CellBox, TorusGrid};
use crate::profile::{dot, Direction, PeriodicProfile};

/// How a set continues outside its window.
#[derive(Debug, Clone, PartialEq)]
pub enum ExteriorRule {
    Empty,
    Full,
    /// Cells with `p·x > t` at their centers.
    Halfspace { p: Direction, t: f64 },
    /// Cells with `v_p(x) > t` for a periodic profile.
    Level { profile: Arc<PeriodicProfile>, t: f64 },
    /// Periodic extension of a torus indicator.
    Periodic { bits: Arc<Vec<bool>> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exterior {
    rule: ExteriorRule,
    complemented: bool,
}

impl Exterior {
    pub fn new(rule: ExteriorRule) -> Self {
        Exterior { rule, complemented: false }
    }

    pub fn empty() -> Self {
        Exterior::new(ExteriorRule::Empty)
    }

    pub fn full() -> Self {
        Exterior::new(ExteriorRule::Full)
    }

    pub fn rule(&self) -> &ExteriorRule {
        &self.rule
    }

    pub fn is_complemented(&self) -> bool {
        self.complemented
    }

    /// Whether the rule leaves the far field constant, so that a window must
    /// carry every interface explicitly.
    pub fn is_constant(&self) -> bool {
        matches!(self.rule, ExteriorRule::Empty | ExteriorRule::Full)
    }

    pub fn complement(&self) -> Self {
        Exterior { rule: self.rule.clone(), complemented: !self.complemented }
    }

    pub fn contains(&self, torus: &TorusGrid, c: Cell) -> bool {
        let inside = match &self.rule {
            ExteriorRule::Empty => false,
            ExteriorRule::Full => true,
            ExteriorRule::Halfspace { p, t } => dot(*p, torus.center(c)) > *t,
            ExteriorRule::Level { profile, t } => profile.v(c) > *t,
            ExteriorRule::Periodic { bits } => bits[torus.index(c)],
        };
        inside != self.complemented
    }

    pub fn describe(&self) -> String {
        let base = match &self.rule {
            ExteriorRule::Empty => "empty".to_string(),
            ExteriorRule::Full => "full".to_string(),
            ExteriorRule::Halfspace { p, t } => format!("halfspace(p={p:?}, t={t})"),
            ExteriorRule::Level { profile, t } => format!("level(p={:?}, t={t})", profile.direction()),
            ExteriorRule::Periodic { .. } => "periodic".to_string(),
        };
        if self.complemented {
            format!("complement({base})")
        } else {
            base
        }
    }
}

/// One bit per window cell plus an exterior rule.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSet {
    torus: TorusGrid,
    window: CellBox,
    bits: Vec<bool>,
    exterior: Exterior,
    label: String,
}

impl LatticeSet {
    /// Window bits taken from the exterior rule itself.
    pub fn from_exterior(torus: TorusGrid, window: CellBox, exterior: Exterior) -> Self {
        let bits = window.cells().map(|c| exterior.contains(&torus, c)).collect();
        LatticeSet { torus, window, bits, exterior, label: String::new() }
    }

    pub fn from_fn(torus: TorusGrid, window: CellBox, exterior: Exterior, f: impl Fn(Cell) -> bool) -> Self {
        let bits = window.cells().map(f).collect();
        LatticeSet { torus, window, bits, exterior, label: String::new() }
    }

    pub fn from_bits(torus: TorusGrid, window: CellBox, exterior: Exterior, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != window.len() {
            return Err(Error::Precondition(format!(
                "indicator has {} entries, window has {} cells",
                bits.len(),
                window.len()
            )));
        }
        Ok(LatticeSet { torus, window, bits, exterior, label: String::new() })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn torus(&self) -> TorusGrid {
        self.torus
    }

    pub fn dim(&self) -> Dim {
        self.torus.dim()
    }

    pub fn m(&self) -> usize {
        self.torus.m()
    }

    pub fn window(&self) -> &CellBox {
        &self.window
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn exterior(&self) -> &Exterior {
        &self.exterior
    }

    pub fn contains(&self, c: Cell) -> bool {
        if self.window.contains(c) {
            self.bits[self.window.index(c)]
        } else {
            self.exterior.contains(&self.torus, c)
        }
    }

    pub fn set(&mut self, c: Cell, value: bool) -> Result<()> {
        if !self.window.contains(c) {
            return Err(Error::Precondition(format!("cell {c:?} is outside the window")));
        }
        let i = self.window.index(c);
        self.bits[i] = value;
        Ok(())
    }

    pub fn complement(&self) -> LatticeSet {
        LatticeSet {
            torus: self.torus,
            window: self.window,
            bits: self.bits.iter().map(|b| !b).collect(),
            exterior: self.exterior.complement(),
            label: if self.label.is_empty() { String::new() } else { format!("complement({})", self.label) },
        }
    }

    /// Labels of every cell in `b`, in row-major order.
    pub fn materialize(&self, b: &CellBox) -> Vec<bool> {
        b.cells().map(|c| self.contains(c)).collect()
    }

    /// Number of member cells in `b`.
    pub fn count_in(&self, b: &CellBox) -> usize {
        b.cells().filter(|&c| self.contains(c)).count()
    }

    /// Copy carrying `other`'s labels on the cells of `b`.
    pub fn spliced(&self, other: &LatticeSet, b: &CellBox) -> LatticeSet {
        let mut out = self.clone();
        for c in b.intersect(&self.window).cells() {
            let i = out.window.index(c);
            out.bits[i] = other.contains(c);
        }
        out
    }

    /// Union or intersection with another set on the same window and a constant exterior.
    pub fn combine(&self, other: &LatticeSet, union: bool) -> Result<LatticeSet> {
        if self.window != other.window || self.torus != other.torus {
            return Err(Error::Precondition("sets must share window and grid".into()));
        }
        if !(self.exterior.is_constant() && other.exterior.is_constant()) {
            return Err(Error::Precondition("set algebra needs constant exteriors".into()));
        }
        let a = self.exterior.contains(&self.torus, [i64::MAX / 4, 0]);
        let b = other.exterior.contains(&other.torus, [i64::MAX / 4, 0]);
        let ext = if union { a || b } else { a && b };
        let exterior = if ext { Exterior::full() } else { Exterior::empty() };
        let bits =
            self.bits.iter().zip(&other.bits).map(|(x, y)| if union { *x || *y } else { *x && *y }).collect();
        Ok(LatticeSet { torus: self.torus, window: self.window, bits, exterior, label: String::new() })
    }
}

/// Shared description used in reports.
#[derive(Debug, Clone, Serialize)]
pub struct SetSummary {
    pub label: String,
    pub window: CellBox,
    pub exterior: String,
    pub members_in_window: usize,
}

impl From<&LatticeSet> for SetSummary {
    fn from(s: &LatticeSet) -> Self {
        SetSummary {
            label: s.label.clone(),
            window: s.window,
            exterior: s.exterior.describe(),
            members_in_window: s.bits.iter().filter(|b| **b).count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complement_flips_window_and_exterior() {
        let torus = TorusGrid::new(Dim::One, 8).unwrap();
        let window = CellBox::new(Dim::One, [-8, 0], [8, 1]);
        let e = LatticeSet::from_exterior(torus, window, Exterior::new(ExteriorRule::Halfspace { p: [1, 0], t: 0.0 }));
        let c = e.complement();
        for x in -40..40 {
            assert_ne!(e.contains([x, 0]), c.contains([x, 0]));
        }
        assert!(e.contains([0, 0]) && !e.contains([-1, 0]));
        assert!(e.contains([30, 0]) && !e.contains([-30, 0]));
    }
}
