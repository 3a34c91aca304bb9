//! Shapley values by brute force over join orders, in exact arithmetic.
//!
//! Every game value is an `f64`, i.e. `m * 2^e` for integers `m` and `e`.
//! Rescaling all values to the smallest exponent turns them into big
//! integers, so the sum over all `K!` orders is exact and the only rounding
//! is the final division.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, ToPrimitive, Zero};

use crate::TestkitError;

pub const MAX_ORACLE_PLAYERS: usize = 10;

/// `ψ_i = (1/K!) Σ_π [v(pred_π(i) ∪ {i}) − v(pred_π(i))]`, where `game`
/// maps a coalition bit pattern to its value.
pub fn oracle_shapley_permutation(
    game: impl Fn(u64) -> f64,
    players: usize,
) -> Result<Vec<f64>, TestkitError> {
    if players == 0 || players > MAX_ORACLE_PLAYERS {
        return Err(TestkitError::TooManyPlayers(players));
    }
    let values: Vec<f64> = (0..1u64 << players).map(&game).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(TestkitError::NonFinite);
    }
    let decoded: Vec<(BigInt, i32)> = values.iter().map(|&v| decode(v)).collect();
    let scale = decoded.iter().map(|(_, e)| *e).min().unwrap_or(0);
    let ints: Vec<BigInt> = decoded
        .into_iter()
        .map(|(m, e)| m << (e - scale) as usize)
        .collect();

    let mut sums = vec![BigInt::zero(); players];
    let mut order: Vec<usize> = (0..players).collect();
    let mut orders = 0u64;
    loop {
        let mut prefix = 0u64;
        for &p in &order {
            let next = prefix | (1 << p);
            sums[p] += &ints[next as usize] - &ints[prefix as usize];
            prefix = next;
        }
        orders += 1;
        if !next_permutation(&mut order) {
            break;
        }
    }

    let (num_shift, den_shift) = if scale >= 0 {
        (scale as usize, 0)
    } else {
        (0, (-scale) as usize)
    };
    let den = BigInt::from(orders) << den_shift;
    Ok(sums
        .into_iter()
        .map(|s| {
            BigRational::new(s << num_shift, den.clone())
                .to_f64()
                .expect("finite ratio")
        })
        .collect())
}

fn decode(v: f64) -> (BigInt, i32) {
    let (mantissa, exp, sign) = Float::integer_decode(v);
    (BigInt::from(mantissa) * sign as i64, exp as i32)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let n = v.len();
    let Some(i) = (1..n).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..n)
        .rev()
        .find(|&j| v[j] > v[i - 1])
        .expect("pivot exists");
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}
