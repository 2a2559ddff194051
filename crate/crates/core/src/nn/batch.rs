use rand::seq::SliceRandom;

use super::rng::Rng;

/// Shuffled mini-batch index lists for one epoch.
///
/// A trailing batch of a single row is folded into the previous batch so
/// batchnorm never sees a batch without variance.
pub fn epoch_batches(n: usize, batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let size = batch_size.max(1);
    let mut batches: Vec<Vec<usize>> = order.chunks(size).map(<[usize]>::to_vec).collect();
    if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
        let tail = batches.pop().unwrap_or_default();
        if let Some(prev) = batches.last_mut() {
            prev.extend(tail);
        }
    }
    batches
}
