use super::DatasetPartition;
use crate::error::{Error, Result};
use crate::window::Window;

/// Appends cyclic duplicates of the minority class until both classes have the
/// same number of valid vectors. Invalid (padding) vectors are dropped.
pub fn oversample_packets(train: &DatasetPartition) -> Result<DatasetPartition> {
    let mut benign = Vec::new();
    let mut attack = Vec::new();
    let mut out = DatasetPartition::new(train.role, Vec::new(), Vec::new());
    for (i, v) in train.vectors.iter().enumerate() {
        if !v.valid {
            continue;
        }
        if v.label == 1 {
            attack.push(i);
        } else {
            benign.push(i);
        }
        out.vectors.push(v.clone());
        out.provenance.push(train.provenance[i]);
    }
    if benign.is_empty() {
        return Err(Error::MissingClass("benign packets".into()));
    }
    if attack.is_empty() {
        return Err(Error::MissingClass("attack packets".into()));
    }
    let (minority, deficit) = if attack.len() < benign.len() {
        (&attack, benign.len() - attack.len())
    } else {
        (&benign, attack.len() - benign.len())
    };
    for &i in minority.iter().cycle().take(deficit) {
        out.vectors.push(train.vectors[i].clone());
        out.provenance.push(train.provenance[i]);
    }
    Ok(out)
}

/// Balances windows with at least one valid attack row ("infected") against
/// fully benign windows by cyclic duplication of the smaller kind.
pub fn oversample_windows(windows: &[Window]) -> Result<Vec<Window>> {
    let (infected, benign): (Vec<usize>, Vec<usize>) =
        (0..windows.len()).partition(|&i| windows[i].is_infected());
    if infected.is_empty() {
        return Err(Error::MissingClass("infected windows".into()));
    }
    if benign.is_empty() {
        return Err(Error::MissingClass("fully benign windows".into()));
    }
    let (minority, deficit) = if infected.len() < benign.len() {
        (&infected, benign.len() - infected.len())
    } else {
        (&benign, infected.len() - benign.len())
    };
    let mut out = windows.to_vec();
    out.extend(minority.iter().cycle().take(deficit).map(|&i| windows[i].clone()));
    Ok(out)
}
