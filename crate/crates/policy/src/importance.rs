//! Permutation feature importance of a trained policy.

use ludbfp_core::ludb::{AnalysisConfig, Budget};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::graph::FEATURES;
use crate::model::Params;
use crate::train::{compute_reward, greedy_picks, Instance, TrainError};

/// Mean relative improvement of the greedy policy over `pool`.
pub fn mean_gain(pool: &[Instance], params: &Params, iterations: Option<usize>, cfg: &AnalysisConfig) -> Result<f64, TrainError> {
    let mut total = 0.0;
    for inst in pool {
        let picks = greedy_picks(inst, params, iterations);
        let fp = inst.bound(&picks, cfg, &Budget::unlimited())?;
        total += compute_reward(&inst.fifo, &fp)?;
    }
    Ok(total / pool.len().max(1) as f64)
}

/// Drop in mean gain when feature column `feature` is shuffled across all
/// nodes of all instances. `seed: None` keeps the column in place.
pub fn permutation_importance(
    pool: &[Instance],
    params: &Params,
    iterations: Option<usize>,
    feature: usize,
    seed: Option<u64>,
    cfg: &AnalysisConfig,
) -> Result<f64, TrainError> {
    assert!(feature < FEATURES, "feature {feature} out of range");
    let base = mean_gain(pool, params, iterations, cfg)?;
    let mut column: Vec<f64> = pool.iter().flat_map(|i| i.graph.features.iter().map(|x| x[feature])).collect();
    if let Some(seed) = seed {
        column.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let mut values = column.into_iter();
    let permuted: Vec<Instance> = pool
        .iter()
        .map(|inst| {
            let mut inst = inst.clone();
            for x in &mut inst.graph.features {
                x[feature] = values.next().expect("same node count");
            }
            inst
        })
        .collect();
    Ok(base - mean_gain(&permuted, params, iterations, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::five_server_family;

    #[test]
    fn identity_permutation_changes_nothing() {
        let cfg = AnalysisConfig::default();
        let pool: Vec<Instance> = (0..3)
            .map(|s| Instance::new(five_server_family(s), &cfg, &Budget::unlimited()).unwrap())
            .collect();
        let params = Params::init(8, 1);
        for f in [3, 5] {
            assert_eq!(permutation_importance(&pool, &params, Some(2), f, None, &cfg).unwrap(), 0.0);
        }
    }

    #[test]
    fn padding_columns_do_not_matter() {
        let cfg = AnalysisConfig::default();
        let pool: Vec<Instance> = (0..3)
            .map(|s| Instance::new(five_server_family(s), &cfg, &Budget::unlimited()).unwrap())
            .collect();
        let params = Params::init(8, 1);
        assert_eq!(permutation_importance(&pool, &params, Some(2), 10, Some(7), &cfg).unwrap(), 0.0);
    }
}
