use super::family::ParametricFamily;
use crate::numerics::DivRng;
use crate::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Source of replacement observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist")]
pub enum NoiseDist {
    /// Draws from `family`, shifted by `shift` (GPD location, for instance).
    Family { family: ParametricFamily, #[serde(default)] shift: f64 },
    Uniform { lo: f64, hi: f64 },
    /// U[max(sample), hi].
    UniformAboveMax { hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme")]
pub enum ContaminationSpec {
    /// The `count` largest observations are set to `value`.
    ReplaceLargestByValue { count: usize, value: f64 },
    /// Appends fresh uniform draws below and above the sample.
    AppendUniformTails { low_count: usize, low: (f64, f64), high_count: usize, high: (f64, f64) },
    /// `count` observations chosen at random are replaced by noise draws.
    ReplaceRandomByDist { count: usize, noise: NoiseDist },
    /// The `low_count` smallest observations get a U[low] draw added and the
    /// `high_count` largest a U[high] draw.
    AddUniformToExtremes { low_count: usize, low: (f64, f64), high_count: usize, high: (f64, f64) },
}

fn uniform(rng: &mut DivRng, (a, b): (f64, f64)) -> f64 {
    a + (b - a) * rng.random::<f64>()
}

fn order(sample: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..sample.len()).collect();
    idx.sort_by(|&i, &j| sample[i].total_cmp(&sample[j]).then(i.cmp(&j)));
    idx
}

impl ContaminationSpec {
    fn counts(&self) -> usize {
        match self {
            ContaminationSpec::ReplaceLargestByValue { count, .. } => *count,
            ContaminationSpec::AppendUniformTails { .. } => 0,
            ContaminationSpec::ReplaceRandomByDist { count, .. } => *count,
            ContaminationSpec::AddUniformToExtremes { low_count, high_count, .. } => low_count + high_count,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.counts() > n {
            return Err(Error::Config(format!("contamination touches {} points of a {n}-point sample", self.counts())));
        }
        Ok(())
    }
}

/// Applies the scheme. Observation positions are preserved.
pub fn contaminate(sample: &[f64], spec: &ContaminationSpec, rng: &mut DivRng) -> Result<Vec<f64>> {
    spec.validate(sample.len())?;
    let mut out = sample.to_vec();
    match spec {
        ContaminationSpec::ReplaceLargestByValue { count, value } => {
            for &i in order(sample).iter().rev().take(*count) {
                out[i] = *value;
            }
        }
        ContaminationSpec::AppendUniformTails { low_count, low, high_count, high } => {
            for _ in 0..*low_count {
                out.push(uniform(rng, *low));
            }
            for _ in 0..*high_count {
                out.push(uniform(rng, *high));
            }
        }
        ContaminationSpec::ReplaceRandomByDist { count, noise } => {
            let max = sample.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let idx = rand::seq::index::sample(rng, sample.len(), *count).into_vec();
            for i in idx {
                out[i] = match noise {
                    NoiseDist::Family { family, shift } => family.draw(rng) + shift,
                    NoiseDist::Uniform { lo, hi } => uniform(rng, (*lo, *hi)),
                    NoiseDist::UniformAboveMax { hi } => uniform(rng, (max, *hi)),
                };
            }
        }
        ContaminationSpec::AddUniformToExtremes { low_count, low, high_count, high } => {
            let ord = order(sample);
            for &i in ord.iter().take(*low_count) {
                out[i] += uniform(rng, *low);
            }
            for &i in ord.iter().rev().take(*high_count) {
                out[i] += uniform(rng, *high);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng;

    #[test]
    fn replace_largest() {
        let s: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let c = contaminate(&s, &ContaminationSpec::ReplaceLargestByValue { count: 10, value: 10.0 }, &mut rng(0))
            .unwrap();
        assert_eq!(c.iter().filter(|&&v| v == 10.0).count(), 10);
        assert_eq!(&c[..90], &s[..90]);
    }

    #[test]
    fn zero_count_is_identity() {
        let s = vec![3.0, 1.0, 2.0];
        let spec = ContaminationSpec::ReplaceRandomByDist { count: 0, noise: NoiseDist::Uniform { lo: 0.0, hi: 1.0 } };
        assert_eq!(contaminate(&s, &spec, &mut rng(0)).unwrap(), s);
    }

    #[test]
    fn too_many_is_config_error() {
        let spec = ContaminationSpec::ReplaceLargestByValue { count: 5, value: 1.0 };
        assert!(matches!(contaminate(&[1.0, 2.0], &spec, &mut rng(0)), Err(Error::Config(_))));
    }

    #[test]
    fn random_replacement_is_seeded() {
        let s: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let spec = ContaminationSpec::ReplaceRandomByDist {
            count: 10,
            noise: NoiseDist::Family { family: ParametricFamily::gpd(1.0, 10.0), shift: 500.0 },
        };
        let a = contaminate(&s, &spec, &mut rng(9)).unwrap();
        let b = contaminate(&s, &spec, &mut rng(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().filter(|&&v| v >= 500.0).count(), 10);
    }
}
