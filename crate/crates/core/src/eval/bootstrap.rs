use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::chrf::{chrf_from_stats, chrf_stats, ChrfConfig, ChrfStats};

/// Resampled index sets; they depend only on `(seed, len, n_resamples)`.
pub fn bootstrap_indices(len: usize, n_resamples: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_resamples).map(|_| (0..len).map(|_| rng.gen_range(0..len)).collect()).collect()
}

/// One-sided paired bootstrap for the claim "system a beats system b":
/// the fraction of resamples in which a does not score above b, with ties
/// counted as half.
pub fn paired_bootstrap<A, B, R>(hyps_a: &[A], hyps_b: &[B], refs: &[R], n_resamples: usize, seed: u64, cfg: &ChrfConfig) -> Result<f64>
where
    A: AsRef<str>,
    B: AsRef<str>,
    R: AsRef<str>,
{
    if hyps_a.len() != refs.len() || hyps_b.len() != refs.len() {
        return Err(Error::Data("bootstrap inputs differ in length".into()));
    }
    if refs.len() < 2 || n_resamples == 0 {
        return Err(Error::Data("bootstrap needs at least two sentences and one resample".into()));
    }
    let stats = |hyps: &[&str]| -> Vec<ChrfStats> { hyps.iter().zip(refs).map(|(h, r)| chrf_stats(h, r.as_ref(), cfg)).collect() };
    let a = stats(&hyps_a.iter().map(AsRef::as_ref).collect::<Vec<_>>());
    let b = stats(&hyps_b.iter().map(AsRef::as_ref).collect::<Vec<_>>());
    let mut not_better = 0.0;
    for idx in bootstrap_indices(refs.len(), n_resamples, seed) {
        let (mut sa, mut sb) = (ChrfStats::zeros(cfg), ChrfStats::zeros(cfg));
        for &i in &idx {
            sa.add(&a[i]);
            sb.add(&b[i]);
        }
        let (fa, fb) = (chrf_from_stats(&sa, cfg), chrf_from_stats(&sb, cfg));
        if fa < fb {
            not_better += 1.0;
        } else if fa == fb {
            not_better += 0.5;
        }
    }
    Ok(not_better / n_resamples as f64)
}
