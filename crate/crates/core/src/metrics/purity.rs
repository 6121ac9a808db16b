use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `(1/N) Σ_c max_l |c ∩ l|`, where `communities[c]` lists the label of every
/// node assigned to community `c`. A node in two communities appears in both
/// lists and counts twice.
pub fn purity<L: Ord>(communities: &[Vec<L>]) -> Result<f64> {
    let total: usize = communities.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Insufficient("purity over zero assignments".into()));
    }
    let majority: usize = communities
        .iter()
        .map(|labels| {
            let mut counts: BTreeMap<&L, usize> = BTreeMap::new();
            for l in labels {
                *counts.entry(l).or_insert(0) += 1;
            }
            counts.values().copied().max().unwrap_or(0)
        })
        .sum();
    Ok(majority as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(purity(&[vec!['L', 'L', 'L', 'R']]).unwrap(), 0.75);
        assert_eq!(purity(&[vec![1, 1], vec![2]]).unwrap(), 1.0);
        assert!(purity::<u8>(&[vec![], vec![]]).is_err());
    }

    proptest! {
        #[test]
        fn bounded_and_one_iff_homogeneous(groups in proptest::collection::vec(proptest::collection::vec(0u8..3, 0..8), 1..6)) {
            if let Ok(p) = purity(&groups) {
                prop_assert!(p > 0.0 && p <= 1.0);
                let homogeneous = groups.iter().all(|g| g.windows(2).all(|w| w[0] == w[1]));
                prop_assert_eq!(p == 1.0, homogeneous);
            }
        }
    }
}
