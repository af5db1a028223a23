use serde::{Deserialize, Serialize};

use super::Front;

/// Total variation, interaction potential (grid units and squared grid
/// units) and number of live fronts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Monitors {
    pub tv: i64,
    pub q: i64,
    pub count: usize,
}

impl Monitors {
    pub fn measure(fronts: &[Front], order: &[usize]) -> Self {
        let waves: Vec<(usize, i64)> = order.iter().map(|id| (fronts[*id].wave.family, fronts[*id].wave.strength())).collect();
        Monitors { tv: total_variation(&waves), q: interaction_potential(&waves), count: order.len() }
    }
}

/// `Σ |s|` over `(family, strength)` pairs.
pub fn total_variation(waves: &[(usize, i64)]) -> i64 {
    waves.iter().map(|(_, s)| s.abs()).sum()
}

/// `Σ |s_α||s_β|` over pairs with `α` left of `β` and a higher family index.
pub fn interaction_potential(waves: &[(usize, i64)]) -> i64 {
    let n = waves.iter().map(|(k, _)| k + 1).max().unwrap_or(0);
    // running sum of |s| per family over everything to the left
    let mut left = vec![0i64; n];
    let mut q = 0;
    for (k, s) in waves {
        q += s.abs() * left[k + 1..].iter().sum::<i64>();
        left[*k] += s.abs();
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_q(waves: &[(usize, i64)]) -> i64 {
        let mut q = 0;
        for a in 0..waves.len() {
            for b in a + 1..waves.len() {
                if waves[a].0 > waves[b].0 {
                    q += waves[a].1.abs() * waves[b].1.abs();
                }
            }
        }
        q
    }

    #[test]
    fn potential_counts_only_approaching_pairs() {
        assert_eq!(interaction_potential(&[(1, 2), (0, -4)]), 8);
        assert_eq!(interaction_potential(&[(0, -4), (1, 2)]), 0);
        assert_eq!(interaction_potential(&[(0, 3), (0, -4)]), 0);
    }

    proptest! {
        #[test]
        fn potential_matches_pairwise_sum(waves in prop::collection::vec((0usize..3, -5i64..6), 0..30)) {
            prop_assert_eq!(interaction_potential(&waves), brute_q(&waves));
            let tv = total_variation(&waves);
            prop_assert!(interaction_potential(&waves) <= tv * tv);
        }
    }
}
