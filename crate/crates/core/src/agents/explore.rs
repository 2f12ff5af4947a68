use rand::Rng;

use crate::mdp::GREEDY_TIE_TOL;
use crate::Scalar;

/// Epsilon-greedy action choice. Greedy ties (within a small tolerance)
/// are broken uniformly at random.
pub fn epsilon_greedy<T: Scalar, R: Rng + ?Sized>(q_row: &[T], epsilon: f64, rng: &mut R) -> usize {
    let k = q_row.len();
    if k == 1 {
        return 0;
    }
    if rng.random::<f64>() < epsilon {
        return rng.random_range(0..k);
    }
    let mut best = q_row[0];
    for &q in &q_row[1..] {
        if q > best {
            best = q;
        }
    }
    let floor = best - T::lit(GREEDY_TIE_TOL);
    let ties = q_row.iter().filter(|&&q| q >= floor).count();
    let mut pick = if ties == 1 { 0 } else { rng.random_range(0..ties) };
    for (a, &q) in q_row.iter().enumerate() {
        if q >= floor {
            if pick == 0 {
                return a;
            }
            pick -= 1;
        }
    }
    unreachable!("at least one greedy action")
}
