use rayon::prelude::*;

use crate::error::Result;

const CHUNK: u64 = 256;

/// Evaluates `work(i)` for `i in 0..n` in parallel and feeds the results to
/// `sink` in index order, so reductions do not depend on the thread count.
/// The first error in index order is returned.
pub(crate) fn for_each_ordered<T, W, S>(n: u64, work: W, mut sink: S) -> Result<()>
where
    T: Send,
    W: Fn(u64) -> Result<T> + Sync,
    S: FnMut(u64, T) -> Result<()>,
{
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let batch: Vec<Result<T>> = (start..end).into_par_iter().map(&work).collect();
        for (i, r) in (start..end).zip(batch) {
            sink(i, r?)?;
        }
        start = end;
    }
    Ok(())
}

/// Running first and second moments per curve point.
#[derive(Debug, Clone)]
pub(crate) struct CurveMoments {
    pub n: usize,
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl CurveMoments {
    pub fn new(len: usize) -> Self {
        CurveMoments { n: 0, sum: vec![0.0; len], sum_sq: vec![0.0; len] }
    }

    pub fn push(&mut self, xs: &[f64]) {
        self.n += 1;
        for ((s, q), x) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(xs) {
            *s += x;
            *q += x * x;
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.n as f64).collect()
    }

    /// Standard error of the mean (zero for fewer than two samples).
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                if self.n < 2 {
                    return 0.0;
                }
                let m = s / n;
                ((q / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_and_thread_independent() {
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                let mut acc = 0.0f64;
                let mut order = Vec::new();
                for_each_ordered(1000, |i| Ok((i as f64 * 0.1).sin()), |i, x| {
                    order.push(i);
                    acc += x;
                    Ok(())
                })
                .unwrap();
                assert!(order.windows(2).all(|w| w[0] < w[1]));
                acc
            })
        };
        assert_eq!(run(1).to_bits(), run(4).to_bits());
    }

    #[test]
    fn moments() {
        let mut m = CurveMoments::new(2);
        m.push(&[1.0, 0.0]);
        m.push(&[3.0, 0.0]);
        assert_eq!(m.mean(), vec![2.0, 0.0]);
        assert!((m.stderr()[0] - 1.0).abs() < 1e-12);
    }
}
