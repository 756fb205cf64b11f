use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::divergence::DiscreteDensity;
use crate::error::Result;
use crate::family::{density_vector, Poisson};

use super::{Contamination, ContaminationScheme};

/// Independent generator for replication `rep` of a run seeded with `seed`.
///
/// Every replication owns a distinct ChaCha stream, so results do not depend
/// on the order or thread in which replications execute.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

/// Inversion sampler over a tabulated cumulative distribution.
#[derive(Clone, Debug)]
pub struct InversionSampler {
    offset: i64,
    cdf: Vec<f64>,
}

impl InversionSampler {
    pub fn new(density: &DiscreteDensity) -> Self {
        let mut acc = 0.0;
        let cdf = density
            .mass()
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Self {
            offset: density.offset(),
            cdf,
        }
    }

    pub fn poisson(theta: f64) -> Result<Self> {
        Ok(Self::new(&density_vector(&Poisson, theta, 1e-16)?))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let v: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= v);
        self.offset + i.min(self.cdf.len() - 1) as i64
    }
}

/// `n` Poisson(theta) draws by inversion.
pub fn sample_poisson<R: Rng + ?Sized>(theta: f64, n: usize, rng: &mut R) -> Result<Vec<i64>> {
    let sampler = InversionSampler::poisson(theta)?;
    Ok((0..n).map(|_| sampler.draw(rng)).collect())
}

/// A Poisson(theta) sample of size `n` contaminated per `contamination`.
///
/// `ReplaceFixedCount` overwrites the last `floor(eps n)` entries with
/// Poisson(theta_contam) draws; `MixtureDraw` draws each observation from
/// the contaminating law with probability `eps`.
pub fn contaminated_sample<R: Rng + ?Sized>(
    theta: f64,
    n: usize,
    contamination: &Contamination,
    rng: &mut R,
) -> Result<Vec<i64>> {
    let clean = InversionSampler::poisson(theta)?;
    let eps = contamination.eps;
    if eps == 0.0 {
        return Ok((0..n).map(|_| clean.draw(rng)).collect());
    }
    let dirty = InversionSampler::poisson(contamination.theta_contam)?;
    match contamination.scheme {
        ContaminationScheme::ReplaceFixedCount => {
            let mut sample: Vec<i64> = (0..n).map(|_| clean.draw(rng)).collect();
            let count = replaced_count(eps, n);
            for slot in &mut sample[n - count..] {
                *slot = dirty.draw(rng);
            }
            Ok(sample)
        }
        ContaminationScheme::MixtureDraw => Ok((0..n)
            .map(|_| {
                let v: f64 = rng.random();
                if v < eps {
                    dirty.draw(rng)
                } else {
                    clean.draw(rng)
                }
            })
            .collect()),
    }
}

/// `floor(eps n)`, guarded against representation error such as `0.29 * 100`.
pub fn replaced_count(eps: f64, n: usize) -> usize {
    ((eps * n as f64 + 1e-9).floor() as usize).min(n)
}
