//! Arithmetic operation accounting.
//!
//! One operation is a single real addition, subtraction, multiplication,
//! division, power or comparison. FFTs are charged at split-radix cost since
//! the transform itself is not instrumented.

fn log2(n: usize) -> u64 {
    assert!(
        n.is_power_of_two(),
        "operation counts assume a power-of-two N"
    );
    u64::from(n.trailing_zeros())
}

/// Split-radix complex FFT: `4 N log2 N - 6 N + 8`.
pub fn split_radix_complex(n: usize) -> u64 {
    let n64 = n as u64;
    4 * n64 * log2(n) + 8 - 6 * n64
}

/// Real-input FFT, about half a complex one: `2 N log2 N - 3 N + 4`.
pub fn split_radix_real(n: usize) -> u64 {
    let n64 = n as u64;
    2 * n64 * log2(n) + 4 - 3 * n64
}

/// Per-iteration cost of AC-TR:
/// `14 N log2 N + 13 N + 8/3 b^3 + 12 b^2 + 4/3 b + 28`.
pub fn count_ops_ac_tr(n_fft: usize, beta: usize) -> u64 {
    let n = n_fft as u64;
    let b = beta as u64;
    // 8 b^3 + 4 b = 4 b (2 b^2 + 1) is always a multiple of 3.
    let cubic = 8 * b * b * b + 4 * b;
    debug_assert_eq!(cubic % 3, 0);
    14 * n * log2(n_fft) + 13 * n + cubic / 3 + 12 * b * b + 28
}

/// Per-iteration cost of PAPR-TR:
/// `14 N log2 N + 10 N + 8/3 b^3 + 26 b^2 + 1/3 b + 28`.
pub fn count_ops_papr_tr(n_fft: usize, beta: usize) -> u64 {
    let n = n_fft as u64;
    let b = beta as u64;
    // b (8 b^2 + 1) is always a multiple of 3.
    let cubic = 8 * b * b * b + b;
    debug_assert_eq!(cubic % 3, 0);
    14 * n * log2(n_fft) + 10 * n + cubic / 3 + 26 * b * b + 28
}

/// Per-iteration cost of NCC-TR with `theta` clipped samples:
/// `8 N log2 N + 14 theta + 13`.
pub fn count_ops_ncc_tr(n_fft: usize, theta: usize) -> u64 {
    8 * n_fft as u64 * log2(n_fft) + 14 * theta as u64 + 13
}

/// Running operation tally.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    total: u64,
}

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, ops: u64) {
        self.total += ops;
    }

    /// Charges `per_item` operations for each of `items`.
    pub fn add_each(&mut self, items: usize, per_item: u64) {
        self.total += items as u64 * per_item;
    }

    pub fn complex_fft(&mut self, n: usize) {
        self.total += split_radix_complex(n);
    }

    pub fn real_fft(&mut self, n: usize) {
        self.total += split_radix_real(n);
    }

    pub fn total(&self) -> u64 {
        self.total
    }
}
