//! Fixed-order data parallelism over minibatch chunks.
//!
//! A batch is cut into chunks of a fixed size. Each chunk is processed
//! independently (in parallel with the `parallel` feature) and the per-chunk
//! results are returned in chunk order, so any reduction the caller performs
//! over them happens in the same order no matter how many threads ran. Both
//! strategies therefore produce bit-identical results.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when the crate is built without `parallel`.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `f` over consecutive chunks of `items`, results in chunk order.
    pub fn map_chunks<T, R, F>(self, items: &[T], chunk: usize, f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&[T]) -> R + Sync + Send,
    {
        let chunk = chunk.max(1);
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_chunks(chunk).map(f).collect();
        }
        items.chunks(chunk).map(f).collect()
    }

    /// `f` over every item, results in item order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
        items.iter().map(f).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunk_results_keep_order() {
        let items: Vec<u32> = (0..103).collect();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let sums = exec.map_chunks(&items, 10, |c| c.iter().sum::<u32>());
            assert_eq!(sums.len(), 11);
            assert_eq!(sums[0], 45);
            assert_eq!(sums[10], 100 + 101 + 102);
        }
    }

    #[test]
    fn float_reduction_is_strategy_independent() {
        let items: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e-3 + 1.0 / (i + 1) as f64).collect();
        let reduce = |exec: Execution| {
            exec.map_chunks(&items, 16, |c| c.iter().sum::<f64>())
                .into_iter()
                .fold(0.0, |a, b| a + b)
        };
        assert_eq!(
            reduce(Execution::Sequential).to_bits(),
            reduce(Execution::Parallel).to_bits()
        );
    }
}
