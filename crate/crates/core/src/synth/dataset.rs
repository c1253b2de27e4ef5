use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::ml::{Dataset, SampleRecord};

const RESOLUTIONS: [f64; 3] = [8.0e6, 12.0e6, 16.0e6];

/// Recipe for a tabular dataset shaped like the field data: plants carry a
/// fertilizer level, compound leaves a nitrate value, images an NND that
/// rises with nitrate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub plants: usize,
    pub leaves_per_plant: usize,
    pub leaflets_per_leaf: usize,
    pub images_per_leaflet: usize,
    /// Fertilizer level names with their mean nitrate (ppm).
    pub levels: Vec<(String, f64)>,
    /// Leaf-to-leaf nitrate standard deviation.
    pub nitrate_jitter: f64,
    pub nnd_base_mm: f64,
    /// NND change per 1000 ppm nitrate.
    pub nnd_per_kppm: f64,
    pub nnd_noise_mm: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            plants: 6,
            leaves_per_plant: 4,
            leaflets_per_leaf: 3,
            images_per_leaflet: 5,
            levels: vec![("low".into(), 1400.0), ("mid".into(), 1750.0), ("high".into(), 2100.0)],
            nitrate_jitter: 80.0,
            nnd_base_mm: 0.35,
            nnd_per_kppm: 0.15,
            nnd_noise_mm: 0.03,
            seed: 0,
        }
    }
}

pub fn synth_dataset(spec: &DatasetSpec) -> Result<Dataset, SynthError> {
    if spec.levels.is_empty()
        || spec.plants == 0
        || spec.leaves_per_plant == 0
        || spec.leaflets_per_leaf == 0
        || spec.images_per_leaflet == 0
    {
        return Err(SynthError::InvalidParameter(
            "dataset spec needs at least one of everything".into(),
        ));
    }
    let bad = |e: rand_distr::NormalError| SynthError::InvalidParameter(e.to_string());
    let jitter = Normal::new(0.0, spec.nitrate_jitter).map_err(bad)?;
    let noise = Normal::new(0.0, spec.nnd_noise_mm).map_err(bad)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut records = Vec::new();
    for p in 0..spec.plants {
        let (level, base) = &spec.levels[p % spec.levels.len()];
        for l in 0..spec.leaves_per_plant {
            let nitrate = ((base + jitter.sample(&mut rng)) * 10.0).round() / 10.0;
            for f in 0..spec.leaflets_per_leaf {
                for _ in 0..spec.images_per_leaflet {
                    let den: u32 = rng.random_range(30..=120);
                    let nnd =
                        (spec.nnd_base_mm + spec.nnd_per_kppm * nitrate / 1000.0 + noise.sample(&mut rng)).max(0.01);
                    records.push(SampleRecord {
                        plant_id: format!("P{p:02}"),
                        compound_leaf_id: format!("L{l}"),
                        leaflet_id: format!("F{f}"),
                        nnd,
                        resolution: RESOLUTIONS[rng.random_range(0..RESOLUTIONS.len())],
                        exposure_time: 1.0 / den as f64,
                        iso: if den < 60 { 200.0 } else { 100.0 },
                        nitrate_ppm: nitrate,
                        fertilizer_level: Some(level.clone()),
                    });
                }
            }
        }
    }
    Ok(Dataset::new(records))
}
