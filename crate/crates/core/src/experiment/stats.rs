//! Error summaries and the nonparametric tests used to compare GCC modes.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};

/// Largest number of rank assignments enumerated exactly by the rank-sum test.
pub const EXACT_RANK_SUM_LIMIT: f64 = 1e5;

/// Largest sample size handled exactly by the signed-rank test.
pub const EXACT_SIGNED_RANK_LIMIT: usize = 20;

pub fn mean_error(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

/// Mean absolute deviation from the mean.
pub fn mean_deviation(errors: &[f64]) -> Result<f64> {
    let mu = mean_error(errors)?;
    Ok(errors.iter().map(|e| (e - mu).abs()).sum::<f64>() / errors.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub mean_error: f64,
    pub mean_deviation: f64,
    pub n: usize,
}

impl ErrorStats {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        Ok(Self {
            mean_error: mean_error(errors)?,
            mean_deviation: mean_deviation(errors)?,
            n: errors.len(),
        })
    }
}

/// Distance class of a source relative to the array size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RhoBucket {
    /// `rho <= 5`
    Near,
    /// `5 < rho <= 10`
    Mid,
    /// `rho > 10`
    Far,
}

impl RhoBucket {
    pub const ALL: [RhoBucket; 3] = [RhoBucket::Near, RhoBucket::Mid, RhoBucket::Far];

    pub fn of(rho: f64) -> Self {
        if rho <= 5.0 {
            RhoBucket::Near
        } else if rho <= 10.0 {
            RhoBucket::Mid
        } else {
            RhoBucket::Far
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RhoBucket::Near => "rho<=5",
            RhoBucket::Mid => "5<rho<=10",
            RhoBucket::Far => "rho>10",
        }
    }
}

/// Splits items into near/mid/far groups by `distance(item) / r_m`.
pub fn bucket_by_rho<T>(items: &[T], r_m: f64, distance: impl Fn(&T) -> f64) -> Result<[Vec<&T>; 3]> {
    if !(r_m > 0.0) {
        return Err(invalid(format!("r_m must be positive, got {r_m}")));
    }
    let mut groups: [Vec<&T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for item in items {
        let idx = match RhoBucket::of(distance(item) / r_m) {
            RhoBucket::Near => 0,
            RhoBucket::Mid => 1,
            RhoBucket::Far => 2,
        };
        groups[idx].push(item);
    }
    Ok(groups)
}

/// Midranks of `values` (1-based, ties averaged), doubled so they are integers.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0u64; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // positions i..=j share rank ((i+1) + (j+1)) / 2
        let doubled = (i + j + 2) as u64;
        for &k in &order[i..=j] {
            ranks[k] = doubled;
        }
        i = j + 1;
    }
    ranks
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    (2.0 * (1.0 - n.cdf(z.abs()))).clamp(f64::MIN_POSITIVE, 1.0)
}

fn check_sample(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::EmptySample);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid("sample contains non-finite values"));
    }
    Ok(())
}

/// Two-sided two-sample Wilcoxon rank-sum test.
///
/// Exact over all `C(n_a + n_b, n_a)` rank assignments (ties as midranks)
/// when there are at most [`EXACT_RANK_SUM_LIMIT`] of them; otherwise the
/// normal approximation with tie and continuity corrections.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample(a)?;
    check_sample(b)?;
    let (na, nb) = (a.len(), b.len());
    let n = na + nb;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&pooled);
    let w: u64 = ranks[..na].iter().sum();
    // doubled expected rank sum of sample a
    let expected = (na * (n + 1)) as u64;
    let observed_dev = w.abs_diff(expected);

    if binomial(n, na) <= EXACT_RANK_SUM_LIMIT {
        let max_sum: u64 = ranks.iter().sum();
        let width = max_sum as usize + 1;
        // ways[k][s]: subsets of size k with doubled rank sum s
        let mut ways = vec![vec![0.0f64; width]; na + 1];
        ways[0][0] = 1.0;
        for &r in &ranks {
            let r = r as usize;
            for k in (1..=na).rev() {
                let (lower, upper) = ways.split_at_mut(k);
                let (prev, cur) = (&lower[k - 1], &mut upper[0]);
                for s in (r..width).rev() {
                    cur[s] += prev[s - r];
                }
            }
        }
        let total: f64 = ways[na].iter().sum();
        let extreme: f64 = ways[na]
            .iter()
            .enumerate()
            .filter(|(s, _)| (*s as u64).abs_diff(expected) >= observed_dev)
            .map(|(_, c)| c)
            .sum();
        return Ok(extreme / total);
    }

    // normal approximation on the undoubled scale
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let (naf, nbf, nf) = (na as f64, nb as f64, n as f64);
    let var = naf * nbf / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if !(var > 0.0) {
        return Ok(1.0);
    }
    let dev = observed_dev as f64 / 2.0;
    let z = (dev - 0.5).max(0.0) / var.sqrt();
    Ok(normal_two_sided(z))
}

/// Two-sided Wilcoxon signed-rank test on paired samples. Zero differences
/// are dropped; exact for up to [`EXACT_SIGNED_RANK_LIMIT`] non-zero pairs.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    check_sample(a)?;
    check_sample(b)?;
    if a.len() != b.len() {
        return Err(invalid("paired test needs equal sample sizes"));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Ok(1.0);
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = doubled_midranks(&abs);
    let n = diffs.len();
    let w_plus: u64 = ranks.iter().zip(&diffs).filter(|(_, d)| **d > 0.0).map(|(r, _)| r).sum();
    let total_rank: u64 = ranks.iter().sum();
    // doubled expectation of W+ is total/2
    let observed_dev = (2 * w_plus).abs_diff(total_rank);
    if n <= EXACT_SIGNED_RANK_LIMIT {
        let width = total_rank as usize + 1;
        let mut ways = vec![0.0f64; width];
        ways[0] = 1.0;
        for &r in &ranks {
            let r = r as usize;
            for s in (r..width).rev() {
                ways[s] += ways[s - r];
            }
        }
        let all: f64 = ways.iter().sum();
        let extreme: f64 = ways
            .iter()
            .enumerate()
            .filter(|(s, _)| (2 * *s as u64).abs_diff(total_rank) >= observed_dev)
            .map(|(_, c)| c)
            .sum();
        return Ok(extreme / all);
    }
    let var: f64 = ranks.iter().map(|&r| (r as f64 / 2.0).powi(2)).sum::<f64>() / 4.0;
    let dev = observed_dev as f64 / 4.0;
    Ok(normal_two_sided((dev - 0.5).max(0.0) / var.sqrt()))
}

/// Monte Carlo permutation test on the difference of mean deviations.
///
/// Statistic `|delta_a - delta_b|`; `p = (1 + #{perm >= observed}) / (n_perm + 1)`.
pub fn permutation_deviance_test(a: &[f64], b: &[f64], n_perm: usize, seed: u64) -> Result<f64> {
    check_sample(a)?;
    check_sample(b)?;
    if n_perm < 1000 {
        return Err(invalid(format!("need at least 1000 permutations, got {n_perm}")));
    }
    let statistic = |x: &[f64], y: &[f64]| -> f64 {
        (mean_deviation(x).expect("non-empty") - mean_deviation(y).expect("non-empty")).abs()
    };
    let observed = statistic(a, b);
    let tol = 1e-12 * observed.max(1.0);
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_perm {
        pooled.shuffle(&mut rng);
        let (x, y) = pooled.split_at(a.len());
        if statistic(x, y) >= observed - tol {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (n_perm + 1) as f64)
}
