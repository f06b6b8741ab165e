use super::{DatasetPartition, DatasetRng, Role};
use crate::error::{Error, Result};

pub const DEFAULT_GROUP_COUNT: usize = 1000;
pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.5, 0.1, 0.4);

#[derive(Debug, Clone)]
pub struct GroupSplit {
    pub group_count: usize,
    pub seed: u64,
    /// Role of each group, indexed by its position in the unshuffled stream.
    pub assignment: Vec<Role>,
    /// Group indices in shuffled order.
    pub order: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SplitResult {
    pub split: GroupSplit,
    pub train: DatasetPartition,
    pub val: DatasetPartition,
    pub test: DatasetPartition,
}

/// Half-open range of stream positions covered by group `g` when `n` items are
/// cut into `groups` contiguous groups; the first `n % groups` groups get one
/// extra item.
pub fn group_bounds(n: usize, groups: usize, g: usize) -> (usize, usize) {
    let base = n / groups;
    let extra = n % groups;
    let start = g * base + g.min(extra);
    let len = base + usize::from(g < extra);
    (start, start + len)
}

/// Splits the stream into contiguous groups, shuffles group order with the
/// pinned dataset RNG, and deals shuffled groups into train/val/test by
/// group-count fractions. Order within each group is preserved.
pub fn group_split(
    input: &DatasetPartition,
    group_count: usize,
    seed: u64,
    fractions: (f64, f64, f64),
) -> Result<SplitResult> {
    let n = input.len();
    if group_count == 0 || n < group_count {
        return Err(Error::InvalidArgument(format!(
            "cannot split {n} vectors into {group_count} groups"
        )));
    }
    let (ft, fv, fs) = fractions;
    if ft < 0.0 || fv < 0.0 || fs < 0.0 || ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must be non-negative and sum to 1, got {ft}/{fv}/{fs}"
        )));
    }
    let n_train = (group_count as f64 * ft).round() as usize;
    let n_val = ((group_count as f64 * fv).round() as usize).min(group_count - n_train);

    let mut order: Vec<usize> = (0..group_count).collect();
    DatasetRng::new(seed).shuffle(&mut order);

    let mut assignment = vec![Role::Test; group_count];
    let mut parts = [Role::Train, Role::Val, Role::Test].map(|r| DatasetPartition::new(r, vec![], vec![]));
    for (rank, &g) in order.iter().enumerate() {
        let (role, slot) = if rank < n_train {
            (Role::Train, 0)
        } else if rank < n_train + n_val {
            (Role::Val, 1)
        } else {
            (Role::Test, 2)
        };
        assignment[g] = role;
        let (lo, hi) = group_bounds(n, group_count, g);
        parts[slot].vectors.extend_from_slice(&input.vectors[lo..hi]);
        parts[slot].provenance.extend_from_slice(&input.provenance[lo..hi]);
    }
    let [train, val, test] = parts;
    Ok(SplitResult {
        split: GroupSplit {
            group_count,
            seed,
            assignment,
            order,
        },
        train,
        val,
        test,
    })
}
