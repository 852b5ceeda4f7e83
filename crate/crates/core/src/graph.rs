//! Association matrices and the block heterogeneous adjacency
//!
//! ```text
//!     | S_p     A_pm    A_pd |
//! M = | A_pm^T  S_m     A_md |
//!     | A_pd^T  A_md^T  S_d  |
//! ```
//!
//! Global node order is peptides, then microbes, then diseases.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entities::{EntityRegistry, NamedEntity, Peptide, RawAssociation, Relation};
use crate::error::{Error, Result};
use crate::similarity::{EntityClass, SimilarityMatrix, SimilaritySet};
use crate::tensor::Tensor;

pub const GRAPH_FORMAT: &str = "peplink-graph/v1";

/// Dense 0/1 matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("binary_matrix", "ragged rows"));
        }
        if rows.iter().flatten().any(|&v| v > 1) {
            return Err(Error::shape("binary_matrix", "entries must be 0 or 1"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn is_set(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == 1
    }

    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.data[i * self.cols + j] = u8::from(v);
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Set cells in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(move |(k, _)| (k / self.cols, k % self.cols))
    }

    /// Unset cells in row-major order.
    pub fn zeros_iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 0)
            .map(move |(k, _)| (k / self.cols, k % self.cols))
    }
}

/// The three binary relation matrices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationStore {
    peptide_microbe: BinaryMatrix,
    peptide_disease: BinaryMatrix,
    microbe_disease: BinaryMatrix,
}

impl AssociationStore {
    pub fn new(peptide_microbe: BinaryMatrix, peptide_disease: BinaryMatrix, microbe_disease: BinaryMatrix) -> Result<Self> {
        let (np, nm, nd) = (peptide_microbe.rows, peptide_microbe.cols, peptide_disease.cols);
        let check = |block: &'static str, m: &BinaryMatrix, expected: (usize, usize)| {
            if (m.rows, m.cols) == expected {
                Ok(())
            } else {
                Err(Error::BlockShape {
                    block,
                    found: (m.rows, m.cols),
                    expected,
                })
            }
        };
        check("A_pd", &peptide_disease, (np, nd))?;
        check("A_md", &microbe_disease, (nm, nd))?;
        Ok(Self {
            peptide_microbe,
            peptide_disease,
            microbe_disease,
        })
    }

    pub fn peptide_microbe(&self) -> &BinaryMatrix {
        &self.peptide_microbe
    }

    pub fn peptide_disease(&self) -> &BinaryMatrix {
        &self.peptide_disease
    }

    pub fn microbe_disease(&self) -> &BinaryMatrix {
        &self.microbe_disease
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.peptide_microbe.rows, self.microbe_disease.rows, self.peptide_disease.cols)
    }

    /// Microbes linked to both peptide `p` and disease `d`.
    pub fn linking_microbes(&self, p: usize, d: usize) -> Vec<usize> {
        (0..self.microbe_disease.rows)
            .filter(|&m| self.peptide_microbe.is_set(p, m) && self.microbe_disease.is_set(m, d))
            .collect()
    }
}

/// Sets one cell per record; repeated records leave the cell at 1.
pub fn build_association_store(records: &[RawAssociation], registry: &EntityRegistry) -> Result<AssociationStore> {
    let np = registry.count(EntityClass::Peptide);
    let nm = registry.count(EntityClass::Microbe);
    let nd = registry.count(EntityClass::Disease);
    let mut pm = BinaryMatrix::zeros(np, nm);
    let mut pd = BinaryMatrix::zeros(np, nd);
    let mut md = BinaryMatrix::zeros(nm, nd);
    for r in records {
        let (sc, dc) = r.relation.endpoints();
        let lookup = |class: EntityClass, id: &str| {
            registry
                .index(class, id)
                .ok_or_else(|| Error::Index(format!("{} `{id}` not in registry", class.as_str())))
        };
        let (i, j) = (lookup(sc, &r.src_id)?, lookup(dc, &r.dst_id)?);
        match r.relation {
            Relation::PeptideMicrobe => pm.set(i, j, true),
            Relation::PeptideDisease => pd.set(i, j, true),
            Relation::MicrobeDisease => md.set(i, j, true),
        }
    }
    AssociationStore::new(pm, pd, md)
}

/// Entity identities carried alongside the adjacency so graph files are
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEntities {
    pub peptides: Vec<Peptide>,
    pub microbes: Vec<NamedEntity>,
    pub diseases: Vec<NamedEntity>,
}

impl GraphEntities {
    pub fn placeholder(np: usize, nm: usize, nd: usize) -> Self {
        let named = |prefix: &str, n: usize| {
            (0..n)
                .map(|i| NamedEntity {
                    id: format!("{prefix}{i}"),
                    name: format!("{prefix}{i}"),
                })
                .collect()
        };
        Self {
            peptides: (0..np)
                .map(|i| Peptide {
                    id: format!("p{i}"),
                    sequence: String::new(),
                })
                .collect(),
            microbes: named("m", nm),
            diseases: named("d", nd),
        }
    }

    pub fn from_registry(registry: &EntityRegistry) -> Self {
        Self {
            peptides: registry.peptides().to_vec(),
            microbes: registry.microbes().to_vec(),
            diseases: registry.diseases().to_vec(),
        }
    }

    fn counts(&self) -> (usize, usize, usize) {
        (self.peptides.len(), self.microbes.len(), self.diseases.len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeteroGraph {
    adjacency: Tensor,
    n_peptides: usize,
    n_microbes: usize,
    n_diseases: usize,
    entities: GraphEntities,
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    format: String,
    entities: GraphEntities,
    side: usize,
    adjacency: Vec<f64>,
}

/// Lays out the 3x3 block matrix. Off-diagonal blocks are written together
/// with their transposes, so the result is exactly symmetric.
pub fn assemble_hetero_adjacency(
    sp: &SimilarityMatrix,
    sm: &SimilarityMatrix,
    sd: &SimilarityMatrix,
    store: &AssociationStore,
) -> Result<HeteroGraph> {
    let (np, nm, nd) = (sp.len(), sm.len(), sd.len());
    let check = |block: &'static str, found: (usize, usize), expected: (usize, usize)| {
        if found == expected {
            Ok(())
        } else {
            Err(Error::BlockShape { block, found, expected })
        }
    };
    let (pm, pd, md) = (store.peptide_microbe(), store.peptide_disease(), store.microbe_disease());
    check("A_pm", (pm.rows(), pm.cols()), (np, nm))?;
    check("A_pd", (pd.rows(), pd.cols()), (np, nd))?;
    check("A_md", (md.rows(), md.cols()), (nm, nd))?;
    for (block, s) in [("S_p", sp), ("S_m", sm), ("S_d", sd)] {
        if s.asymmetry() > 1e-12 {
            return Err(Error::shape("assemble_hetero_adjacency", format!("{block} is not symmetric")));
        }
    }

    let n = np + nm + nd;
    let mut m = Tensor::zeros(&[n, n]);
    let (p0, m0, d0) = (0, np, np + nm);
    let mut put_sim = |off: usize, s: &SimilarityMatrix| {
        for i in 0..s.len() {
            for j in 0..s.len() {
                m.set(off + i, off + j, s.get(i, j));
            }
        }
    };
    put_sim(p0, sp);
    put_sim(m0, sm);
    put_sim(d0, sd);
    for (a, ro, co) in [(pm, p0, m0), (pd, p0, d0), (md, m0, d0)] {
        for (i, j) in a.ones() {
            m.set(ro + i, co + j, 1.0);
            m.set(co + j, ro + i, 1.0);
        }
    }
    Ok(HeteroGraph {
        adjacency: m,
        n_peptides: np,
        n_microbes: nm,
        n_diseases: nd,
        entities: GraphEntities::placeholder(np, nm, nd),
    })
}

impl HeteroGraph {
    pub fn build(sims: &SimilaritySet, store: &AssociationStore, registry: &EntityRegistry) -> Result<Self> {
        assemble_hetero_adjacency(&sims.peptide, &sims.microbe, &sims.disease, store)?
            .with_entities(GraphEntities::from_registry(registry))
    }

    pub fn with_entities(mut self, entities: GraphEntities) -> Result<Self> {
        if entities.counts() != self.counts() {
            return Err(Error::shape(
                "with_entities",
                format!("entity counts {:?} vs graph blocks {:?}", entities.counts(), self.counts()),
            ));
        }
        self.entities = entities;
        Ok(self)
    }

    pub fn adjacency(&self) -> &Tensor {
        &self.adjacency
    }

    pub fn entities(&self) -> &GraphEntities {
        &self.entities
    }

    pub fn side(&self) -> usize {
        self.n_peptides + self.n_microbes + self.n_diseases
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_peptides, self.n_microbes, self.n_diseases)
    }

    pub fn range(&self, class: EntityClass) -> Range<usize> {
        let (np, nm, nd) = self.counts();
        match class {
            EntityClass::Peptide => 0..np,
            EntityClass::Microbe => np..np + nm,
            EntityClass::Disease => np + nm..np + nm + nd,
        }
    }

    pub fn global_index(&self, class: EntityClass, local: usize) -> usize {
        self.range(class).start + local
    }

    /// Copies the `(row class, column class)` block out of M.
    pub fn block(&self, rows: EntityClass, cols: EntityClass) -> Tensor {
        let (rr, cr) = (self.range(rows), self.range(cols));
        let mut out = Vec::with_capacity(rr.len() * cr.len());
        for i in rr.clone() {
            out.extend_from_slice(&self.adjacency.row(i)[cr.clone()]);
        }
        Tensor::matrix(rr.len(), cr.len(), out).expect("block dims")
    }

    pub fn similarity(&self, class: EntityClass) -> SimilarityMatrix {
        let b = self.block(class, class);
        SimilarityMatrix::from_values(b.rows(), b.into_data(), class).expect("square block")
    }

    fn binary_block(&self, rows: EntityClass, cols: EntityClass) -> BinaryMatrix {
        let b = self.block(rows, cols);
        let mut out = BinaryMatrix::zeros(b.rows(), b.cols());
        for i in 0..b.rows() {
            for j in 0..b.cols() {
                out.set(i, j, b.get(i, j) != 0.0);
            }
        }
        out
    }

    /// Reads the association matrices back out of the off-diagonal blocks.
    pub fn association_store(&self) -> AssociationStore {
        use EntityClass::*;
        AssociationStore::new(
            self.binary_block(Peptide, Microbe),
            self.binary_block(Peptide, Disease),
            self.binary_block(Microbe, Disease),
        )
        .expect("blocks are consistent")
    }

    /// Copy of M with the given peptide-disease pairs (local indices) zeroed
    /// in both triangles.
    pub fn masked_adjacency(&self, pairs: &[(usize, usize)]) -> Tensor {
        let mut m = self.adjacency.clone();
        for &(p, d) in pairs {
            let (i, j) = (self.global_index(EntityClass::Peptide, p), self.global_index(EntityClass::Disease, d));
            m.set(i, j, 0.0);
            m.set(j, i, 0.0);
        }
        m
    }

    pub fn node_label(&self, global: usize) -> (EntityClass, &str) {
        let (np, nm, _) = self.counts();
        if global < np {
            (EntityClass::Peptide, &self.entities.peptides[global].id)
        } else if global < np + nm {
            (EntityClass::Microbe, &self.entities.microbes[global - np].id)
        } else {
            (EntityClass::Disease, &self.entities.diseases[global - np - nm].id)
        }
    }

    /// `global_index, type, id` for every node.
    pub fn write_manifest(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            writeln!(w, "global_index\ttype\tid")?;
            for g in 0..self.side() {
                let (class, id) = self.node_label(g);
                writeln!(w, "{g}\t{}\t{id}", class.as_str())?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }

    pub fn write_adjacency_csv(&self, path: &Path) -> Result<()> {
        let ids: Vec<String> = (0..self.side()).map(|g| self.node_label(g).1.to_string()).collect();
        let m = SimilarityMatrix::from_values(self.side(), self.adjacency.data().to_vec(), EntityClass::Peptide)?;
        m.write_csv(path, &ids)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = GraphFile {
            format: GRAPH_FORMAT.to_string(),
            entities: self.entities.clone(),
            side: self.side(),
            adjacency: self.adjacency.data().to_vec(),
        };
        let json = serde_json::to_vec(&file).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let corrupt = |detail: String| Error::Format { what: "graph file", detail };
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let file: GraphFile = serde_json::from_slice(&bytes).map_err(|e| corrupt(format!("{}: {e}", path.display())))?;
        if file.format != GRAPH_FORMAT {
            return Err(corrupt(format!("format tag `{}`, expected `{GRAPH_FORMAT}`", file.format)));
        }
        let (np, nm, nd) = file.entities.counts();
        let n = np + nm + nd;
        if file.side != n || file.adjacency.len() != n * n {
            return Err(corrupt(format!(
                "side {} with {} cells does not match {n} entities",
                file.side,
                file.adjacency.len()
            )));
        }
        let adjacency = Tensor::matrix(n, n, file.adjacency)?;
        for i in 0..n {
            for j in 0..n {
                let v = adjacency.get(i, j);
                if !(0.0..=1.0).contains(&v) || v != adjacency.get(j, i) {
                    return Err(corrupt(format!("cell ({i}, {j}) = {v} breaks symmetry or [0, 1] range")));
                }
            }
        }
        Ok(Self {
            adjacency,
            n_peptides: np,
            n_microbes: nm,
            n_diseases: nd,
            entities: file.entities,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ones(r: usize, c: usize) -> BinaryMatrix {
        BinaryMatrix::from_rows(&vec![vec![1; c]; r]).unwrap()
    }

    #[test]
    fn store_from_records() {
        let reg = EntityRegistry::new(
            vec![
                Peptide { id: "p0".into(), sequence: "KK".into() },
                Peptide { id: "p1".into(), sequence: "RR".into() },
            ],
            vec![
                NamedEntity { id: "m0".into(), name: "A b".into() },
                NamedEntity { id: "m1".into(), name: "C d".into() },
            ],
            vec![],
        )
        .unwrap();
        let rec = RawAssociation {
            relation: Relation::PeptideMicrobe,
            src_id: "p0".into(),
            dst_id: "m0".into(),
        };
        let store = build_association_store(&[rec.clone(), rec], &reg).unwrap();
        assert_eq!(store.peptide_microbe(), &BinaryMatrix::from_rows(&[vec![1, 0], vec![0, 0]]).unwrap());
        let empty = build_association_store(&[], &reg).unwrap();
        assert_eq!(empty.peptide_microbe().count_ones(), 0);
    }

    #[test]
    fn smallest_instance_is_all_ones() {
        let s = |c| SimilarityMatrix::from_values(1, vec![1.0], c).unwrap();
        let store = AssociationStore::new(ones(1, 1), ones(1, 1), ones(1, 1)).unwrap();
        let g = assemble_hetero_adjacency(&s(EntityClass::Peptide), &s(EntityClass::Microbe), &s(EntityClass::Disease), &store).unwrap();
        assert_eq!(g.adjacency(), &Tensor::full(&[3, 3], 1.0));
    }

    #[test]
    fn zero_associations_give_block_diagonal() {
        let store = AssociationStore::new(BinaryMatrix::zeros(2, 1), BinaryMatrix::zeros(2, 3), BinaryMatrix::zeros(1, 3)).unwrap();
        let g = assemble_hetero_adjacency(
            &SimilarityMatrix::identity(2, EntityClass::Peptide),
            &SimilarityMatrix::identity(1, EntityClass::Microbe),
            &SimilarityMatrix::identity(3, EntityClass::Disease),
            &store,
        )
        .unwrap();
        assert_eq!(g.adjacency(), &Tensor::identity(6));
    }

    #[test]
    fn full_dataset_scale_side() {
        let (np, nm, nd) = (1084, 81, 173);
        let store = AssociationStore::new(BinaryMatrix::zeros(np, nm), BinaryMatrix::zeros(np, nd), BinaryMatrix::zeros(nm, nd)).unwrap();
        let g = assemble_hetero_adjacency(
            &SimilarityMatrix::identity(np, EntityClass::Peptide),
            &SimilarityMatrix::identity(nm, EntityClass::Microbe),
            &SimilarityMatrix::identity(nd, EntityClass::Disease),
            &store,
        )
        .unwrap();
        assert_eq!(g.side(), 1338);
    }

    #[test]
    fn block_shape_mismatch_names_block() {
        let store = AssociationStore::new(BinaryMatrix::zeros(2, 1), BinaryMatrix::zeros(2, 1), BinaryMatrix::zeros(1, 1)).unwrap();
        let err = assemble_hetero_adjacency(
            &SimilarityMatrix::identity(3, EntityClass::Peptide),
            &SimilarityMatrix::identity(1, EntityClass::Microbe),
            &SimilarityMatrix::identity(1, EntityClass::Disease),
            &store,
        )
        .unwrap_err();
        assert!(err.to_string().contains("A_pm"), "{err}");
    }

    #[test]
    fn corrupt_graph_file_is_a_format_error() {
        let dir = tempfile::TempDir::new().unwrap();
        let path = dir.path().join("g.json");
        std::fs::write(&path, b"{\"format\": \"peplink-graph/v0\"").unwrap();
        assert!(matches!(HeteroGraph::load(&path), Err(Error::Format { .. })));
    }

    fn random_graph() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<u8>)> {
        (1usize..5, 1usize..4, 1usize..4).prop_flat_map(|(np, nm, nd)| {
            let n_sim = np * np + nm * nm + nd * nd;
            let n_assoc = np * nm + np * nd + nm * nd;
            (
                Just(np),
                Just(nm),
                Just(nd),
                prop::collection::vec(0.0f64..1.0, n_sim),
                prop::collection::vec(0u8..=1, n_assoc),
            )
        })
    }

    fn sym(n: usize, raw: &[f64], class: EntityClass) -> SimilarityMatrix {
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
            for j in i + 1..n {
                v[i * n + j] = raw[i * n + j];
                v[j * n + i] = raw[i * n + j];
            }
        }
        SimilarityMatrix::from_values(n, v, class).unwrap()
    }

    fn bin(r: usize, c: usize, raw: &[u8]) -> BinaryMatrix {
        BinaryMatrix::from_rows(&raw.chunks(c.max(1)).take(r).map(<[u8]>::to_vec).collect::<Vec<_>>()).unwrap()
    }

    proptest! {
        #[test]
        fn blocks_read_back_and_symmetry((np, nm, nd, sims, assoc) in random_graph()) {
            let sp = sym(np, &sims[..np * np], EntityClass::Peptide);
            let sm = sym(nm, &sims[np * np..np * np + nm * nm], EntityClass::Microbe);
            let sd = sym(nd, &sims[np * np + nm * nm..], EntityClass::Disease);
            let pm = bin(np, nm, &assoc[..np * nm]);
            let pd = bin(np, nd, &assoc[np * nm..np * nm + np * nd]);
            let md = bin(nm, nd, &assoc[np * nm + np * nd..]);
            let store = AssociationStore::new(pm, pd, md).unwrap();
            let g = assemble_hetero_adjacency(&sp, &sm, &sd, &store).unwrap();
            let m = g.adjacency();
            for i in 0..g.side() {
                for j in 0..g.side() {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
            prop_assert_eq!(g.similarity(EntityClass::Peptide), sp.clone());
            prop_assert_eq!(g.similarity(EntityClass::Microbe), sm);
            prop_assert_eq!(g.similarity(EntityClass::Disease), sd);
            prop_assert_eq!(g.association_store(), store);
            for i in 0..np {
                prop_assert_eq!(&m.row(i)[..np], sp.row(i));
            }

            let dir = tempfile::TempDir::new().unwrap();
            let path = dir.path().join("g.json");
            g.save(&path).unwrap();
            prop_assert_eq!(HeteroGraph::load(&path).unwrap(), g);
        }
    }
}
