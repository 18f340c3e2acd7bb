//! Feature-dispatched data-parallel helpers.
//!
//! Every helper has a sequential twin so the two execution modes can be
//! benchmarked against each other. Work is always partitioned by output
//! index and each partial result is produced by an ordered sequential
//! loop, so the parallel path is bit-identical to the sequential one.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `0..n` to a Vec, in parallel when enabled.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_mode(n, f, cfg!(feature = "parallel"))
}

/// Explicit-mode variant used by the benches. `parallel = true` is a no-op
/// without the `parallel` feature.
pub fn map_indexed_mode<T, F>(n: usize, f: F, parallel: bool) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if parallel {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Fill `out` by chunks of `chunk` elements, `f(chunk_index, chunk_slice)`.
pub fn fill_chunks<F>(out: &mut [f64], chunk: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    fill_chunks_mode(out, chunk, f, cfg!(feature = "parallel"));
}

pub fn fill_chunks_mode<F>(out: &mut [f64], chunk: usize, f: F, parallel: bool)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    assert!(chunk > 0);
    #[cfg(feature = "parallel")]
    if parallel {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = parallel;
    for (i, c) in out.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}

/// Deterministic sum: fixed-size chunk partials accumulated in order.
pub fn sum(data: &[f64]) -> f64 {
    const CHUNK: usize = 4096;
    if data.len() <= CHUNK {
        return data.iter().sum();
    }
    let partials = map_indexed(data.len().div_ceil(CHUNK), |i| {
        data[i * CHUNK..((i + 1) * CHUNK).min(data.len())]
            .iter()
            .sum::<f64>()
    });
    partials.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let data: Vec<f64> = (0..10_000).map(|i| (i as f64).sin() * 0.1).collect();
        let seq = map_indexed_mode(data.len(), |i| data[i] * 3.0, false);
        let par = map_indexed_mode(data.len(), |i| data[i] * 3.0, true);
        assert_eq!(seq, par);
        assert_eq!(sum(&data), data.chunks(4096).map(|c| c.iter().sum::<f64>()).sum::<f64>());
    }
}
