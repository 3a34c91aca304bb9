use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{evaluate_coalitions, Explanation, PartShapleyMatrix, ShapleyEstimator};
use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::masking::CoalitionImageSet;
use crate::value_fn::ValueFunction;

/// Above this many parts, `K!` exceeds any practical permutation budget and
/// exhaustive enumeration is never attempted.
const MAX_ENUMERABLE: usize = 10;

/// Monte Carlo estimate averaging marginals over random join orders.
///
/// When the budget covers all `K!` orders they are enumerated instead, which
/// makes the estimate exact.
#[derive(Debug, Clone)]
pub struct PermutationShapley {
    permutations: usize,
    seed: u64,
}

impl PermutationShapley {
    pub fn new(permutations: usize, seed: u64) -> Result<Self> {
        if permutations == 0 {
            return Err(Error::Usage(
                "the permutation estimator needs at least one permutation".into(),
            ));
        }
        Ok(Self { permutations, seed })
    }

    fn orders(&self, k: usize) -> Vec<Vec<usize>> {
        if k <= MAX_ENUMERABLE && factorial(k) <= self.permutations {
            return all_permutations(k);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut order: Vec<usize> = (0..k).collect();
        (0..self.permutations)
            .map(|_| {
                order.shuffle(&mut rng);
                order.clone()
            })
            .collect()
    }
}

impl ShapleyEstimator for PermutationShapley {
    fn name(&self) -> &str {
        "permutation"
    }

    fn explain(&self, vf: &dyn ValueFunction, set: &CoalitionImageSet) -> Result<Explanation> {
        let k = set.parts().len();
        let orders = self.orders(k);

        let mut needed = BTreeSet::new();
        needed.insert(set.empty());
        needed.insert(set.full());
        for order in &orders {
            let mut prefix = set.empty();
            for &p in order {
                prefix = prefix.with(p);
                needed.insert(prefix);
            }
        }
        let needed: Vec<Coalition> = needed.into_iter().collect();
        let logits = evaluate_coalitions(vf, set, &needed)?;

        let classes = vf.num_classes();
        let mut sums = vec![vec![0.0; classes]; k];
        for order in &orders {
            let mut prefix = set.empty();
            let mut before = logits.get(prefix).expect("evaluated").values();
            for &p in order {
                prefix = prefix.with(p);
                let after = logits.get(prefix).expect("evaluated").values();
                for (s, (a, b)) in sums[p].iter_mut().zip(after.iter().zip(before)) {
                    *s += a - b;
                }
                before = after;
            }
        }
        let n = orders.len() as f64;
        let values = sums
            .into_iter()
            .map(|row| row.into_iter().map(|s| s / n).collect())
            .collect();
        let matrix = PartShapleyMatrix {
            values,
            part_names: set.parts().names(),
            class_names: vf.class_names().to_vec(),
            full_logits: logits.get(set.full()).expect("evaluated").clone(),
            empty_logits: logits.get(set.empty()).expect("evaluated").clone(),
        };
        Ok(Explanation { matrix, logits })
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// Every ordering of `0..k` in lexicographic order.
fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    let mut current: Vec<usize> = (0..k).collect();
    let mut out = vec![current.clone()];
    loop {
        let Some(i) = (1..k).rev().find(|&i| current[i - 1] < current[i]) else {
            return out;
        };
        let j = (i..k)
            .rev()
            .find(|&j| current[j] > current[i - 1])
            .expect("pivot");
        current.swap(i - 1, j);
        current[i..].reverse();
        out.push(current.clone());
    }
}
