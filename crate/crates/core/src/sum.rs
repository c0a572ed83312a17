//! Compensated (Neumaier) summation, used wherever batch means must be
//! reproducible to a few ulps regardless of batch partitioning.

/// Running Neumaier sum of scalars.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Coordinate-wise Neumaier accumulator over equal-length vectors.
#[derive(Debug, Clone)]
pub struct VecSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
    count: usize,
}

impl VecSum {
    pub fn zeros(len: usize) -> Self {
        VecSum {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
            count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sum.is_empty()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds `x` coordinate-wise. Panics if lengths differ.
    pub fn add(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.sum.len(), "VecSum length mismatch");
        for ((s, c), &xi) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(x) {
            let t = *s + xi;
            if s.abs() >= xi.abs() {
                *c += (*s - t) + xi;
            } else {
                *c += (xi - t) + *s;
            }
            *s = t;
        }
        self.count += 1;
    }

    pub fn total(&self) -> Vec<f64> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }

    /// Mean of everything added so far; `None` when nothing was added.
    pub fn mean(&self) -> Option<Vec<f64>> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        Some(self.sum.iter().zip(&self.comp).map(|(s, c)| (s + c) / n).collect())
    }
}

/// Compensated sum of a slice.
pub fn sum(xs: &[f64]) -> f64 {
    let mut acc = NeumaierSum::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}
