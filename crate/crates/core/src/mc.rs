//! Chunked Monte-Carlo means with standard errors.

use crate::Execution;

const CHUNK: usize = 4096;

#[derive(Clone, Debug)]
pub(crate) struct Moments {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Means and standard errors of `m` per-draw statistics over `n` draws.
/// `f(k, out)` writes the statistics of draw `k`. Partial sums are formed over
/// fixed chunks and reduced in chunk order.
pub(crate) fn moments<F>(n: usize, m: usize, exec: Execution, f: F) -> Moments
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let partials = exec.map(chunks, |c| {
        let mut s1 = vec![0.0; m];
        let mut s2 = vec![0.0; m];
        let mut u = vec![0.0; m];
        for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
            f(k, &mut u);
            for j in 0..m {
                s1[j] += u[j];
                s2[j] += u[j] * u[j];
            }
        }
        (s1, s2)
    });
    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for (a, b) in partials {
        for j in 0..m {
            s1[j] += a[j];
            s2[j] += b[j];
        }
    }
    let nf = n as f64;
    let mean: Vec<f64> = s1.iter().map(|s| s / nf).collect();
    let se = s2
        .iter()
        .zip(&mean)
        .map(|(s, mu)| {
            if n < 2 {
                f64::INFINITY
            } else {
                ((s / nf - mu * mu).max(0.0) * nf / (nf - 1.0) / nf).sqrt()
            }
        })
        .collect();
    Moments { mean, se }
}
