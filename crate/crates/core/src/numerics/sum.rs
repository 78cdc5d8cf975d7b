//! Compensated accumulation. Reduction order is fixed by the callers so that
//! reports are bit-identical across runs and thread counts.

use num_complex::Complex64;

/// Neumaier variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of a slice in the order given.
pub fn sum_in_order(xs: &[f64]) -> f64 {
    let mut acc = Accumulator::new();
    for &x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Compensated sum in ascending-magnitude order (deterministic tie-break on
/// the raw value, then on the original index via stable sort).
pub fn sum_ascending_magnitude(xs: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| {
        xs[i]
            .abs()
            .partial_cmp(&xs[j].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| xs[i].partial_cmp(&xs[j]).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut acc = Accumulator::new();
    for i in order {
        acc.add(xs[i]);
    }
    acc.value()
}

/// Compensated complex sum in ascending-magnitude order of |z|.
pub fn sum_complex_ascending(zs: &[Complex64]) -> Complex64 {
    let mut order: Vec<usize> = (0..zs.len()).collect();
    order.sort_by(|&i, &j| {
        zs[i]
            .norm_sqr()
            .partial_cmp(&zs[j].norm_sqr())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut re = Accumulator::new();
    let mut im = Accumulator::new();
    for i in order {
        re.add(zs[i].re);
        im.add(zs[i].im);
    }
    Complex64::new(re.value(), im.value())
}
