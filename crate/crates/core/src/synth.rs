//! Synthetic concept/attribute datasets with planted supercategory structure.
//!
//! Each supercategory gets a centroid; concepts are their centroid plus
//! isotropic Gaussian noise. Two attribute families are planted:
//!
//! * taxonomic: positive on exactly one supercategory (dominance 1),
//! * transversal: i.i.d. Bernoulli, independent of supercategory and embedding.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{AttributeMatrix, ConceptSet, DatasetBundle, SupercategoryMap};
use crate::error::{Error, Result};

const CENTROID_RETRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_concepts: usize,
    pub n_supercats: usize,
    pub dim: usize,
    pub noise_sigma: f64,
    pub n_taxonomic_attrs: usize,
    pub n_transversal_attrs: usize,
    pub transversal_pos_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_concepts: 500,
            n_supercats: 10,
            dim: 16,
            noise_sigma: 0.05,
            n_taxonomic_attrs: 10,
            n_transversal_attrs: 20,
            transversal_pos_rate: 0.3,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth spec: {m}")));
        if self.n_supercats < 2 {
            return bad("n_supercats must be at least 2".into());
        }
        if self.n_supercats > self.n_concepts {
            return bad(format!(
                "n_supercats ({}) exceeds n_concepts ({})",
                self.n_supercats, self.n_concepts
            ));
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and non-negative".into());
        }
        if !(self.transversal_pos_rate > 0.0 && self.transversal_pos_rate < 1.0) {
            return bad("transversal_pos_rate must be in (0, 1)".into());
        }
        if self.n_taxonomic_attrs + self.n_transversal_attrs == 0 {
            return bad("at least one attribute is required".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlantedAttribute {
    Taxonomic { name: String, supercategory: usize },
    Transversal { name: String, pos_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedMetadata {
    pub spec: SynthSpec,
    pub supercategory_of: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub min_centroid_distance: f64,
    pub attributes: Vec<PlantedAttribute>,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn generate(spec: &SynthSpec) -> Result<(DatasetBundle, PlantedMetadata)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let separation = 10.0 * spec.noise_sigma;

    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(spec.n_supercats);
    while centroids.len() < spec.n_supercats {
        let mut placed = false;
        for _ in 0..CENTROID_RETRIES {
            let c: Vec<f64> = (0..spec.dim).map(|_| unit.sample(&mut rng)).collect();
            if centroids.iter().all(|o| dist(o, &c) >= separation) {
                centroids.push(c);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!(
                "synth spec: cannot place {} centroids {separation} apart in {} dimensions",
                spec.n_supercats, spec.dim
            )));
        }
    }
    let min_centroid_distance = centroids
        .iter()
        .enumerate()
        .flat_map(|(i, a)| centroids[i + 1..].iter().map(move |b| dist(a, b)))
        .fold(f64::INFINITY, f64::min);

    let mut supercategory_of: Vec<usize> = (0..spec.n_concepts).map(|i| i % spec.n_supercats).collect();
    supercategory_of.shuffle(&mut rng);

    let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
    let rows: Vec<Vec<f64>> = supercategory_of
        .iter()
        .map(|&s| {
            centroids[s]
                .iter()
                .map(|&c| {
                    if spec.noise_sigma > 0.0 {
                        c + noise.sample(&mut rng)
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    let names: Vec<String> = (0..spec.n_concepts).map(|i| format!("concept_{i:04}")).collect();
    let concept_set = ConceptSet::new(names, rows)?;

    let mut attr_names = Vec::new();
    let mut columns = Vec::new();
    let mut planted = Vec::new();
    for j in 0..spec.n_taxonomic_attrs {
        let s = j % spec.n_supercats;
        let name = format!("tax_{j:02}_sc{s:02}");
        columns.push(supercategory_of.iter().map(|&c| (c == s) as u8).collect::<Vec<u8>>());
        attr_names.push(name.clone());
        planted.push(PlantedAttribute::Taxonomic { name, supercategory: s });
    }
    for j in 0..spec.n_transversal_attrs {
        let name = format!("trans_{j:02}");
        let col = loop {
            let col: Vec<u8> = (0..spec.n_concepts)
                .map(|_| rng.random_bool(spec.transversal_pos_rate) as u8)
                .collect();
            if col.contains(&0) && col.contains(&1) {
                break col;
            }
        };
        columns.push(col);
        attr_names.push(name.clone());
        planted.push(PlantedAttribute::Transversal {
            name,
            pos_rate: spec.transversal_pos_rate,
        });
    }
    let attributes = AttributeMatrix::from_columns(attr_names, columns)?;

    let sc_names = (0..spec.n_supercats).map(|s| format!("supercat_{s:02}")).collect();
    let supercategories = SupercategoryMap::new(supercategory_of.clone(), sc_names)?;
    let bundle = DatasetBundle::new(concept_set, attributes, Some(supercategories))?;

    Ok((
        bundle,
        PlantedMetadata {
            spec: spec.clone(),
            supercategory_of,
            centroids,
            min_centroid_distance,
            attributes: planted,
        },
    ))
}

/// File names written by [`write_bundle`].
pub const EMBEDDINGS_FILE: &str = "embeddings.csv";
pub const ATTRIBUTES_FILE: &str = "attributes.csv";
pub const SUPERCATEGORIES_FILE: &str = "supercategories.csv";
pub const PLANTED_FILE: &str = "planted.json";

pub fn write_bundle(dir: &Path, bundle: &DatasetBundle, planted: &PlantedMetadata) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cs = &bundle.concept_set;
    cs.write_csv(&dir.join(EMBEDDINGS_FILE))?;
    bundle.attributes.write_csv(&dir.join(ATTRIBUTES_FILE), cs)?;
    if let Some(sm) = &bundle.supercategories {
        sm.write_csv(&dir.join(SUPERCATEGORIES_FILE), cs)?;
    }
    let path = dir.join(PLANTED_FILE);
    let text = serde_json::to_string_pretty(planted)?;
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::supercategory_dominance;

    #[test]
    fn taxonomic_dominance_is_one() {
        let (bundle, planted) = generate(&SynthSpec::default()).unwrap();
        let sm = bundle.supercategories.as_ref().unwrap();
        for (a, kind) in planted.attributes.iter().enumerate() {
            if let PlantedAttribute::Taxonomic { .. } = kind {
                let positives: Vec<usize> = bundle
                    .attributes
                    .column(a)
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v == 1)
                    .map(|(i, _)| i)
                    .collect();
                assert_eq!(supercategory_dominance(&positives, sm).unwrap(), 1.0);
            }
        }
        assert!(planted.min_centroid_distance >= 0.5);
    }

    #[test]
    fn zero_noise_collapses_supercategories() {
        let spec = SynthSpec {
            noise_sigma: 0.0,
            n_concepts: 40,
            n_supercats: 4,
            ..Default::default()
        };
        let (bundle, planted) = generate(&spec).unwrap();
        for i in 0..40 {
            let s = planted.supercategory_of[i];
            assert_eq!(bundle.concept_set.row(i), &planted.centroids[s][..]);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&SynthSpec::default()).unwrap();
        let b = generate(&SynthSpec::default()).unwrap();
        assert_eq!(a.0.concept_set, b.0.concept_set);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn impossible_separation_fails() {
        let spec = SynthSpec {
            dim: 1,
            noise_sigma: 2.0,
            n_supercats: 10,
            ..Default::default()
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn written_files_reload() {
        let dir = tempfile::TempDir::new().unwrap();
        let spec = SynthSpec {
            n_concepts: 60,
            n_supercats: 3,
            ..Default::default()
        };
        let (bundle, planted) = generate(&spec).unwrap();
        write_bundle(dir.path(), &bundle, &planted).unwrap();
        let back = DatasetBundle::load(
            &dir.path().join(EMBEDDINGS_FILE),
            crate::dataset::EmbeddingFormat::Csv,
            &dir.path().join(ATTRIBUTES_FILE),
            Some(&dir.path().join(SUPERCATEGORIES_FILE)),
        )
        .unwrap();
        assert_eq!(back.concept_set, bundle.concept_set);
        assert_eq!(back.attributes, bundle.attributes);
        // ids follow first appearance in the file, so compare the partition
        let sm = back.supercategories.unwrap();
        for i in 0..60 {
            for j in 0..60 {
                assert_eq!(
                    sm.of(i) == sm.of(j),
                    planted.supercategory_of[i] == planted.supercategory_of[j]
                );
            }
        }
    }
}
