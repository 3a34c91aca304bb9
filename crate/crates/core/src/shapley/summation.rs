/// Pairwise (cascade) sum of `term(start..start + len)`, evaluated in a fixed
/// order so the result does not depend on how the terms were produced.
pub fn pairwise_sum(len: usize, term: &impl Fn(usize) -> f64) -> f64 {
    sum_range(0, len, term)
}

const LEAF: usize = 16;

fn sum_range(start: usize, len: usize, term: &impl Fn(usize) -> f64) -> f64 {
    if len <= LEAF {
        let mut acc = 0.0;
        for i in start..start + len {
            acc += term(i);
        }
        acc
    } else {
        let half = len / 2;
        sum_range(start, half, term) + sum_range(start + half, len - half, term)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_sum_on_integers() {
        for n in [0, 1, 15, 16, 17, 1000, 4097] {
            let got = pairwise_sum(n, &|i| i as f64);
            assert_eq!(got, (n * n.saturating_sub(1) / 2) as f64);
        }
    }

    #[test]
    fn bounds_error_on_many_small_terms() {
        let n = 1 << 20;
        let got = pairwise_sum(n, &|_| 0.1);
        assert!((got - 0.1 * n as f64).abs() < 1e-9);
    }
}
