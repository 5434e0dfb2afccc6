use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::divergence::EmpiricalMeasure;
use crate::error::{GaitError, Result};
use crate::kernels::Points;

/// A source of i.i.d. points, e.g. a continuous density.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn sample(&mut self, k: usize, rng: &mut dyn rand::RngCore) -> Points;
}

/// Isotropic Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub means: Vec<Vec<f64>>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, stds: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let c = means.len();
        if c == 0 || stds.len() != c || weights.len() != c {
            return Err(GaitError::InvalidParameter("mixture needs matching, non-empty means/stds/weights".into()));
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(GaitError::InvalidParameter("mixture means must share a dimension".into()));
        }
        if stds.iter().any(|s| !(*s >= 0.0)) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(GaitError::InvalidParameter("stds and weights must be >= 0".into()));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(GaitError::InvalidParameter("mixture weights sum to zero".into()));
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(GaussianMixture { means, stds, weights })
    }

    /// `count` equally weighted components with centres on a circle.
    pub fn ring(count: usize, radius: f64, std: f64) -> Self {
        let means = (0..count)
            .map(|c| {
                let a = 2.0 * std::f64::consts::PI * c as f64 / count as f64;
                vec![radius * a.cos(), radius * a.sin()]
            })
            .collect();
        GaussianMixture::new(means, vec![std; count], vec![1.0; count]).expect("valid ring")
    }

    /// Draw `k` points along with the component each came from.
    pub fn sample_labeled(&self, k: usize, rng: &mut dyn rand::RngCore) -> (Points, Vec<usize>) {
        let d = self.means[0].len();
        let pick = WeightedIndex::new(&self.weights).expect("validated weights");
        let mut data = Vec::with_capacity(k * d);
        let mut labels = Vec::with_capacity(k);
        for _ in 0..k {
            let c = pick.sample(rng);
            labels.push(c);
            for j in 0..d {
                let z: f64 = StandardNormal.sample(rng);
                data.push(self.means[c][j] + self.stds[c] * z);
            }
        }
        (Points::new(d, data).expect("finite samples"), labels)
    }
}

impl Sampler for GaussianMixture {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn sample(&mut self, k: usize, rng: &mut dyn rand::RngCore) -> Points {
        self.sample_labeled(k, rng).0
    }
}

/// What a solver approximates: a finite measure or a generator.
pub enum Target {
    Empirical(EmpiricalMeasure),
    Generator(Box<dyn Sampler>),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Empirical(m) => m.dim(),
            Target::Generator(s) => s.dim(),
        }
    }
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Empirical(m) => f.debug_tuple("Empirical").field(m).finish(),
            Target::Generator(s) => write!(f, "Generator(dim={})", s.dim()),
        }
    }
}

/// Draw `k` atoms i.i.d. (by weight for a finite source) and give each mass `1/k`.
pub fn minibatch_sample<R: Rng>(source: &mut Target, k: usize, rng: &mut R) -> Result<EmpiricalMeasure> {
    if k == 0 {
        return Err(GaitError::InvalidParameter("minibatch size must be >= 1".into()));
    }
    let atoms = match source {
        Target::Empirical(m) => {
            let pick =
                WeightedIndex::new(m.weights.as_slice()).map_err(|e| GaitError::NotADistribution(e.to_string()))?;
            let d = m.dim();
            let mut data = Vec::with_capacity(k * d);
            for _ in 0..k {
                data.extend_from_slice(m.atoms.row(pick.sample(rng)));
            }
            Points::new(d, data)?
        }
        Target::Generator(s) => s.sample(k, rng),
    };
    EmpiricalMeasure::uniform(atoms)
}
