//! Compensated summation and sample moments.
//!
//! Monte Carlo aggregation always runs sequentially over values stored in
//! sample-index order, so results do not depend on how the samples were
//! scheduled across workers.

/// Neumaier compensated accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.compensation += (self.sum - t) + v;
        } else {
            self.compensation += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for NeumaierSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = NeumaierSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a slice, in slice order.
pub fn sum(values: &[f64]) -> f64 {
    values.iter().copied().collect::<NeumaierSum>().total()
}

/// Mean, standard error and extremes of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleMoments {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); NaN for fewer than two values.
    pub std_dev: f64,
    /// `std_dev / sqrt(count)`; NaN for fewer than two values.
    pub std_err: f64,
    pub max: f64,
    pub count: usize,
}

impl SampleMoments {
    /// Two-pass moments with compensated sums. Empty input yields NaN fields.
    pub fn from_values(values: &[f64]) -> Self {
        let count = values.len();
        if count == 0 {
            return Self { mean: f64::NAN, std_dev: f64::NAN, std_err: f64::NAN, max: f64::NAN, count };
        }
        let mean = sum(values) / count as f64;
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (std_dev, std_err) = if count < 2 {
            (f64::NAN, f64::NAN)
        } else {
            let ss: NeumaierSum = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            let sd = (ss.total() / (count - 1) as f64).sqrt();
            (sd, sd / (count as f64).sqrt())
        };
        Self { mean, std_dev, std_err, max, count }
    }
}

/// Median of a sample (NaN for empty input).
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}
