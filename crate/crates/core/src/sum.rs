//! Fixed-order reductions. Every floating-point total in the crate goes through
//! these so results do not depend on thread count or iteration chunking.

const LEAF: usize = 16;

/// Pairwise summation over a fixed binary tree of the slice order.
pub fn pairwise(values: &[f64]) -> f64 {
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise(&values[..mid]) + pairwise(&values[mid..])
}

/// Sum that is invariant under any permutation of the input: values are sorted
/// by total order first, then summed pairwise.
pub fn permutation_invariant(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    pairwise(&sorted)
}

/// Pairwise sum of a mapped sequence without keeping the caller's buffer.
pub fn pairwise_map<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    let mapped: Vec<f64> = items.iter().map(f).collect();
    pairwise(&mapped)
}

/// Running sum with Neumaier compensation, for long add/remove sequences.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(pairwise(&v), 500_500.0);
    }

    #[test]
    fn permutation_invariant_ignores_order() {
        let v = [1e16, 1.0, -1e16, 3.5, 1e-3, 2.0e10];
        let mut w = v;
        w.reverse();
        assert_eq!(permutation_invariant(&v).to_bits(), permutation_invariant(&w).to_bits());
    }

    #[test]
    fn compensated_cancels_exactly() {
        let mut c = Compensated::default();
        for x in [1e16, 1.0, 0.25, -1e16] {
            c.add(x);
        }
        assert_eq!(c.value(), 1.25);
    }
}
