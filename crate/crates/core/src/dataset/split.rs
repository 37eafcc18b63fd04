use super::Split;

pub const SPLIT_PERIOD: usize = 5;
/// Index within each period that goes to the test set.
pub const DEFAULT_SPLIT_PHASE: usize = 4;

/// Every fifth sample (index `i % 5 == 4`) is test, the rest train.
pub fn make_split(n: usize) -> Vec<Split> {
    make_split_with_phase(n, DEFAULT_SPLIT_PHASE)
}

pub fn make_split_with_phase(n: usize, phase: usize) -> Vec<Split> {
    let phase = phase % SPLIT_PERIOD;
    (0..n)
        .map(|i| if i % SPLIT_PERIOD == phase { Split::Test } else { Split::Train })
        .collect()
}
