//! Pivot-row pricing `α_j = p · A_j` over every column.

use rayon::prelude::*;

use super::standard::StandardFormLp;

/// Below this many structural columns pricing stays on the calling thread.
pub const PARALLEL_THRESHOLD: usize = 50_000;

const CHUNK: usize = 4096;

/// Computes `p · A_j` for every column `j` into `out`.
///
/// Each entry is an independent dot product in a fixed order, so the
/// result does not depend on how many threads run it.
pub fn price_all(lp: &StandardFormLp, p: &[f64], out: &mut [f64]) {
    debug_assert_eq!(out.len(), lp.n_total());
    let n = lp.n;
    let (structural, slack) = out.split_at_mut(n);
    if n >= PARALLEL_THRESHOLD {
        structural
            .par_chunks_mut(CHUNK)
            .enumerate()
            .for_each(|(c, chunk)| {
                for (k, o) in chunk.iter_mut().enumerate() {
                    *o = lp.dot_column(c * CHUNK + k, p);
                }
            });
    } else {
        for (j, o) in structural.iter_mut().enumerate() {
            *o = lp.dot_column(j, p);
        }
    }
    slack.copy_from_slice(p);
}

pub fn prices(lp: &StandardFormLp, p: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; lp.n_total()];
    price_all(lp, p, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lp(n: usize, m: usize, seed: u64) -> StandardFormLp {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StandardFormLp {
            m,
            n,
            cols: std::sync::Arc::new((0..n * m).map(|_| rng.random_range(-1.0..1.0)).collect()),
            cost: vec![0.0; n + m],
            lower: vec![0.0; n + m],
            upper: vec![1.0; n + m],
            infeasible: false,
        }
    }

    #[test]
    fn zero_prices() {
        let lp = lp(10, 3, 1);
        assert!(prices(&lp, &[0.0; 3]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_loop() {
        let lp = lp(300, 4, 2);
        let p = [0.5, -1.25, 2.0, 0.1];
        let got = prices(&lp, &p);
        for j in 0..lp.n {
            let mut s = 0.0;
            for i in 0..4 {
                s += lp.cols[j * 4 + i] * p[i];
            }
            assert_eq!(got[j], s);
        }
        assert_eq!(&got[300..], &p);
    }

    #[test]
    fn thread_count_invariant() {
        let lp = lp(PARALLEL_THRESHOLD + 1234, 3, 3);
        let p = [0.3, -0.7, 1.9];
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let eight = rayon::ThreadPoolBuilder::new().num_threads(8).build().unwrap();
        let a = one.install(|| prices(&lp, &p));
        let b = eight.install(|| prices(&lp, &p));
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}
