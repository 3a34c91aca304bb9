use super::{evaluate_coalitions, pairwise_sum, Explanation, PartShapleyMatrix, ShapleyEstimator};
use crate::coalition::{Coalition, CoalitionSpace};
use crate::error::{Error, Result};
use crate::masking::CoalitionImageSet;
use crate::value_fn::{LogitVector, ValueFunction};

/// Full power-set enumeration: `2^K` model calls per sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactShapley;

impl ShapleyEstimator for ExactShapley {
    fn name(&self) -> &str {
        "exact"
    }

    fn explain(&self, vf: &dyn ValueFunction, set: &CoalitionImageSet) -> Result<Explanation> {
        let space = set.space()?;
        let coalitions: Vec<Coalition> = space.coalitions().collect();
        let logits = evaluate_coalitions(vf, set, &coalitions)?;
        let table: Vec<LogitVector> = logits.iter().map(|(_, l)| l.clone()).collect();
        let matrix = exact_shapley(
            &space,
            &table,
            set.parts().names(),
            vf.class_names().to_vec(),
        )?;
        Ok(Explanation { matrix, logits })
    }
}

/// Shapley matrix of the game given by `table`, where `table[bits]` holds the
/// logits of the coalition with that bit pattern.
pub fn exact_shapley(
    space: &CoalitionSpace,
    table: &[LogitVector],
    part_names: Vec<String>,
    class_names: Vec<String>,
) -> Result<PartShapleyMatrix> {
    if table.len() != space.len() {
        return Err(Error::PartCountMismatch {
            expected: space.len(),
            actual: table.len(),
        });
    }
    let k = space.parts();
    if part_names.len() != k {
        return Err(Error::PartCountMismatch {
            expected: k,
            actual: part_names.len(),
        });
    }
    let classes = class_names.len();
    if let Some(bad) = table.iter().find(|l| l.len() != classes) {
        return Err(Error::MalformedResponse(format!(
            "expected {classes} logits, got {}",
            bad.len()
        )));
    }
    let weights = space.weights();
    let half = 1usize << (k - 1);
    let values = (0..k)
        .map(|part| {
            let bit = 1usize << part;
            let low = bit - 1;
            (0..classes)
                .map(|c| {
                    pairwise_sum(half, &|r| {
                        let without = ((r & !low) << 1) | (r & low);
                        let with = without | bit;
                        weights[without.count_ones() as usize]
                            * (table[with][c] - table[without][c])
                    })
                })
                .collect()
        })
        .collect();
    Ok(PartShapleyMatrix {
        values,
        part_names,
        class_names,
        full_logits: table[space.full().index()].clone(),
        empty_logits: table[0].clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn game(values: &[f64]) -> Vec<LogitVector> {
        values
            .iter()
            .map(|&v| LogitVector::new(vec![v, -v]).unwrap())
            .collect()
    }

    fn names(n: usize, p: &str) -> Vec<String> {
        (0..n).map(|i| format!("{p}{i}")).collect()
    }

    #[test]
    fn two_player_game() {
        // f(∅)=0, f({0})=1, f({1})=1, f({0,1})=4: both orders give (1+3)/2
        let space = CoalitionSpace::new(2).unwrap();
        let m = exact_shapley(
            &space,
            &game(&[0.0, 1.0, 1.0, 4.0]),
            names(2, "p"),
            names(2, "c"),
        )
        .unwrap();
        assert_eq!(m.column(0), vec![2.0, 2.0]);
        assert_eq!(m.column(1), vec![-2.0, -2.0]);
        assert_eq!(m.total_gain(0), 4.0);
    }

    #[test]
    fn dummy_player_gets_zero() {
        // part 1 never changes the value
        let space = CoalitionSpace::new(2).unwrap();
        let m = exact_shapley(
            &space,
            &game(&[1.0, 3.0, 1.0, 3.0]),
            names(2, "p"),
            names(2, "c"),
        )
        .unwrap();
        assert_eq!(m.column(0), vec![2.0, 0.0]);
    }

    #[test]
    fn rejects_mismatched_tables() {
        let space = CoalitionSpace::new(2).unwrap();
        assert!(exact_shapley(&space, &game(&[0.0; 3]), names(2, "p"), names(2, "c")).is_err());
        assert!(exact_shapley(&space, &game(&[0.0; 4]), names(3, "p"), names(2, "c")).is_err());
        assert!(exact_shapley(&space, &game(&[0.0; 4]), names(2, "p"), names(3, "c")).is_err());
    }
}
