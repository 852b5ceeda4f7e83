//! Planted tripartite benchmark: peptides fall into groups that share a
//! sequence motif and one microbe, and each microbe links one disease.
//! Peptide-disease positives are exactly the planted peptide -> microbe ->
//! disease paths. A fraction of every edge type is then rewired at random.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entities::{write_associations, EntityRegistry, NamedEntity, Peptide, RawAssociation, Relation};
use crate::error::{Error, Result};
use crate::graph::{build_association_store, HeteroGraph};
use crate::rng::rng_for;
use crate::similarity::{build_similarities, AlignmentParams, BandwidthMode};

const RESIDUES: &[u8] = b"ACDEFGHIKLMNPQRSTVWY";
const STREAM_SYNTHETIC: u64 = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub groups: usize,
    pub peptides_per_group: usize,
    /// Diseases after the `groups` linked ones that carry no planted edges.
    pub extra_diseases: usize,
    pub motif_len: usize,
    pub substitutions: usize,
    /// Fraction of each relation's planted edges that is dropped and
    /// replaced by the same number of random non-edges.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            groups: 10,
            peptides_per_group: 6,
            extra_diseases: 5,
            motif_len: 8,
            substitutions: 2,
            noise: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub registry: EntityRegistry,
    pub associations: Vec<RawAssociation>,
    /// Planted peptide-disease pairs before noise, as local indices.
    pub planted_pd: BTreeSet<(usize, usize)>,
}

fn rewire(rng: &mut impl Rng, planted: &BTreeSet<(usize, usize)>, rows: usize, cols: usize, noise: f64) -> BTreeSet<(usize, usize)> {
    let n = (noise * planted.len() as f64).round() as usize;
    let edges: Vec<_> = planted.iter().copied().collect();
    let mut out = planted.clone();
    for i in index::sample(rng, edges.len(), n.min(edges.len())) {
        out.remove(&edges[i]);
    }
    let free: Vec<(usize, usize)> = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .filter(|c| !planted.contains(c))
        .collect();
    for i in index::sample(rng, free.len(), n.min(free.len())) {
        out.insert(free[i]);
    }
    out
}

impl SyntheticSpec {
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.groups * self.peptides_per_group, self.groups, self.groups + self.extra_diseases)
    }

    pub fn generate(&self) -> Result<SyntheticData> {
        if self.groups == 0 || self.peptides_per_group == 0 {
            return Err(Error::Config("synthetic counts must be positive".into()));
        }
        if !(2..=9).contains(&self.motif_len) || self.substitutions > self.motif_len {
            return Err(Error::Config("motif length must be 2..=9 with at most that many substitutions".into()));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::Config(format!("noise {} outside [0, 1)", self.noise)));
        }
        let mut rng = rng_for(self.seed, &[STREAM_SYNTHETIC]);
        let (np, nm, nd) = self.counts();
        let mut peptides = Vec::with_capacity(np);
        for g in 0..self.groups {
            let motif: Vec<u8> = (0..self.motif_len).map(|_| *RESIDUES.choose(&mut rng).expect("nonempty")).collect();
            for j in 0..self.peptides_per_group {
                let mut seq = motif.clone();
                for pos in index::sample(&mut rng, self.motif_len, self.substitutions) {
                    seq[pos] = *RESIDUES.choose(&mut rng).expect("nonempty");
                }
                peptides.push(Peptide {
                    id: format!("P{:03}", g * self.peptides_per_group + j),
                    sequence: String::from_utf8(seq).expect("ascii"),
                });
            }
        }
        let microbes = (0..nm)
            .map(|g| NamedEntity {
                id: format!("M{g:02}"),
                name: format!("Plantomyces group{g}"),
            })
            .collect();
        let diseases = (0..nd)
            .map(|d| NamedEntity {
                id: format!("D{d:02}"),
                name: if d < self.groups {
                    format!("linked condition {d}")
                } else {
                    format!("unlinked condition {}", d - self.groups)
                },
            })
            .collect();
        let registry = EntityRegistry::new(peptides, microbes, diseases)?;

        let group = |p: usize| p / self.peptides_per_group;
        let pm: BTreeSet<_> = (0..np).map(|p| (p, group(p))).collect();
        let md: BTreeSet<_> = (0..nm).map(|g| (g, g)).collect();
        let pd: BTreeSet<_> = pm
            .iter()
            .flat_map(|&(p, m)| md.range((m, 0)..(m + 1, 0)).map(move |&(_, d)| (p, d)))
            .collect();
        let mut associations = Vec::new();
        for (relation, planted, rows, cols) in [
            (Relation::PeptideMicrobe, &pm, np, nm),
            (Relation::PeptideDisease, &pd, np, nd),
            (Relation::MicrobeDisease, &md, nm, nd),
        ] {
            let (src, dst) = relation.endpoints();
            let src_ids = registry.ids(src);
            let dst_ids = registry.ids(dst);
            for (r, c) in rewire(&mut rng, planted, rows, cols, self.noise) {
                associations.push(RawAssociation {
                    relation,
                    src_id: src_ids[r].clone(),
                    dst_id: dst_ids[c].clone(),
                });
            }
        }
        Ok(SyntheticData {
            registry,
            associations,
            planted_pd: pd,
        })
    }
}

impl SyntheticData {
    /// Writes the four input tables in the layout the ingest step reads.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.registry.write_tables(dir)?;
        write_associations(&dir.join("associations.tsv"), &self.associations)
    }

    pub fn graph(&self, params: &AlignmentParams, gamma_prime: f64, mode: BandwidthMode) -> Result<HeteroGraph> {
        let store = build_association_store(&self.associations, &self.registry)?;
        let sims = build_similarities(&self.registry, &store, params, gamma_prime, mode)?;
        HeteroGraph::build(&sims, &store, &self.registry)
    }
}
