//! Entity ingestion: peptides, microbes and diseases plus their raw
//! association records, read from tab-separated tables.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{normalized_identity, AlignmentParams, EntityClass};

pub const MIN_PEPTIDE_LEN: usize = 2;
pub const MAX_PEPTIDE_LEN: usize = 9;
pub const AMINO_ACIDS: &str = "ACDEFGHIKLMNPQRSTVWYX";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Peptide {
    pub id: String,
    pub sequence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntity {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    PeptideMicrobe,
    PeptideDisease,
    MicrobeDisease,
}

impl Relation {
    pub fn tag(self) -> &'static str {
        match self {
            Relation::PeptideMicrobe => "pm",
            Relation::PeptideDisease => "pd",
            Relation::MicrobeDisease => "md",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "pm" => Some(Relation::PeptideMicrobe),
            "pd" => Some(Relation::PeptideDisease),
            "md" => Some(Relation::MicrobeDisease),
            _ => None,
        }
    }

    pub fn endpoints(self) -> (EntityClass, EntityClass) {
        match self {
            Relation::PeptideMicrobe => (EntityClass::Peptide, EntityClass::Microbe),
            Relation::PeptideDisease => (EntityClass::Peptide, EntityClass::Disease),
            Relation::MicrobeDisease => (EntityClass::Microbe, EntityClass::Disease),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RawAssociation {
    pub relation: Relation,
    pub src_id: String,
    pub dst_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    LengthFiltered,
    MicrobeMerged,
    MicrobeUnresolved,
    Redundant,
    DuplicateEdge,
    EdgeToFilteredPeptide,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::LengthFiltered => "length_filtered",
            EventKind::MicrobeMerged => "microbe_merged",
            EventKind::MicrobeUnresolved => "microbe_unresolved",
            EventKind::Redundant => "redundant",
            EventKind::DuplicateEdge => "duplicate_edge",
            EventKind::EdgeToFilteredPeptide => "edge_to_filtered_peptide",
        })
    }
}

/// One line of the ingestion log.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestEvent {
    pub kind: EventKind,
    pub id: String,
    pub detail: String,
}

/// Canonical identities and dense per-class indices. Index order is input order.
#[derive(Debug, Clone, Default)]
pub struct EntityRegistry {
    peptides: Vec<Peptide>,
    microbes: Vec<NamedEntity>,
    diseases: Vec<NamedEntity>,
    peptide_index: HashMap<String, usize>,
    microbe_index: HashMap<String, usize>,
    disease_index: HashMap<String, usize>,
    // Dropped or merged id -> retained representative id.
    aliases: HashMap<(EntityClass, String), String>,
    filtered_peptides: HashSet<String>,
    events: Vec<IngestEvent>,
}

fn index_of<'a>(ids: impl Iterator<Item = &'a str>, class: EntityClass) -> Result<HashMap<String, usize>> {
    let mut map = HashMap::new();
    for (i, id) in ids.enumerate() {
        if map.insert(id.to_string(), i).is_some() {
            return Err(Error::DuplicateId {
                class: class.as_str(),
                id: id.to_string(),
            });
        }
    }
    Ok(map)
}

impl EntityRegistry {
    /// Builds a registry from already-validated entities. Ids must be unique
    /// per class and peptide sequences within the retained length range.
    pub fn new(peptides: Vec<Peptide>, microbes: Vec<NamedEntity>, diseases: Vec<NamedEntity>) -> Result<Self> {
        for p in &peptides {
            validate_sequence(&p.sequence).map_err(|c| Error::Config(format!("peptide {}: invalid residue {c:?}", p.id)))?;
            if !(MIN_PEPTIDE_LEN..=MAX_PEPTIDE_LEN).contains(&p.sequence.len()) {
                return Err(Error::Config(format!(
                    "peptide {} has length {} outside [{MIN_PEPTIDE_LEN}, {MAX_PEPTIDE_LEN}]",
                    p.id,
                    p.sequence.len()
                )));
            }
        }
        Ok(Self {
            peptide_index: index_of(peptides.iter().map(|p| p.id.as_str()), EntityClass::Peptide)?,
            microbe_index: index_of(microbes.iter().map(|m| m.id.as_str()), EntityClass::Microbe)?,
            disease_index: index_of(diseases.iter().map(|d| d.id.as_str()), EntityClass::Disease)?,
            peptides,
            microbes,
            diseases,
            ..Default::default()
        })
    }

    pub fn peptides(&self) -> &[Peptide] {
        &self.peptides
    }

    pub fn microbes(&self) -> &[NamedEntity] {
        &self.microbes
    }

    pub fn diseases(&self) -> &[NamedEntity] {
        &self.diseases
    }

    pub fn count(&self, class: EntityClass) -> usize {
        match class {
            EntityClass::Peptide => self.peptides.len(),
            EntityClass::Microbe => self.microbes.len(),
            EntityClass::Disease => self.diseases.len(),
        }
    }

    pub fn ids(&self, class: EntityClass) -> Vec<String> {
        match class {
            EntityClass::Peptide => self.peptides.iter().map(|p| p.id.clone()).collect(),
            EntityClass::Microbe => self.microbes.iter().map(|m| m.id.clone()).collect(),
            EntityClass::Disease => self.diseases.iter().map(|d| d.id.clone()).collect(),
        }
    }

    pub fn events(&self) -> &[IngestEvent] {
        &self.events
    }

    pub fn index(&self, class: EntityClass, id: &str) -> Option<usize> {
        match class {
            EntityClass::Peptide => self.peptide_index.get(id),
            EntityClass::Microbe => self.microbe_index.get(id),
            EntityClass::Disease => self.disease_index.get(id),
        }
        .copied()
    }

    /// Follows merge/redundancy aliases to the retained representative id.
    pub fn resolve<'a>(&'a self, class: EntityClass, id: &'a str) -> Option<&'a str> {
        let mut cur = id;
        // Alias chains are short: a merged microbe, or a redundant peptide.
        for _ in 0..=self.aliases.len() {
            if self.index(class, cur).is_some() {
                return Some(cur);
            }
            cur = self.aliases.get(&(class, cur.to_string()))?;
        }
        None
    }

    fn is_filtered_peptide(&self, id: &str) -> bool {
        self.filtered_peptides.contains(id)
    }

    /// Writes `peptides.tsv`, `microbes.tsv` and `diseases.tsv` into `dir`.
    pub fn write_tables(&self, dir: &Path) -> Result<()> {
        write_tsv(&dir.join("peptides.tsv"), &["id", "sequence"], self.peptides.iter().map(|p| vec![p.id.as_str(), p.sequence.as_str()]))?;
        write_tsv(&dir.join("microbes.tsv"), &["id", "name"], self.microbes.iter().map(|m| vec![m.id.as_str(), m.name.as_str()]))?;
        write_tsv(&dir.join("diseases.tsv"), &["id", "name"], self.diseases.iter().map(|d| vec![d.id.as_str(), d.name.as_str()]))
    }

    /// Writes the ingestion log (kind, id, detail).
    pub fn write_events(&self, path: &Path) -> Result<()> {
        let rows: Vec<[String; 3]> = self
            .events
            .iter()
            .map(|e| [e.kind.to_string(), e.id.clone(), e.detail.clone()])
            .collect();
        write_tsv(path, &["event", "id", "detail"], rows.iter().map(|r| r.iter().map(String::as_str).collect()))
    }

    pub(crate) fn push_event(&mut self, kind: EventKind, id: impl Into<String>, detail: impl Into<String>) {
        self.events.push(IngestEvent {
            kind,
            id: id.into(),
            detail: detail.into(),
        });
    }
}

fn validate_sequence(seq: &str) -> std::result::Result<(), char> {
    match seq.chars().find(|c| !AMINO_ACIDS.contains(*c)) {
        Some(c) => Err(c),
        None => Ok(()),
    }
}

pub(crate) fn write_tsv<'a, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<&'a str>>,
{
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let emit = || -> std::io::Result<()> {
        writeln!(w, "{}", header.join("\t"))?;
        for row in rows {
            writeln!(w, "{}", row.join("\t"))?;
        }
        w.flush()
    };
    emit().map_err(|e| Error::io(path, e))
}

/// A parsed TSV row with its 1-based source line.
pub(crate) struct Row {
    pub line: u64,
    pub fields: Vec<String>,
}

pub(crate) fn read_tsv(path: &Path, header: &[&str]) -> Result<Vec<Row>> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => parse_err(0, format!("{other:?}")),
        })?;
    let found: Vec<String> = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if found.iter().map(String::as_str).ne(header.iter().copied()) {
        return Err(parse_err(1, format!("expected header {:?}, found {:?}", header, found)));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let fields: Vec<String> = record.iter().map(|f| f.trim().to_string()).collect();
        if fields.iter().all(String::is_empty) {
            continue;
        }
        if let Some(pos) = fields.iter().position(String::is_empty) {
            return Err(parse_err(line, format!("empty `{}` field", header[pos])));
        }
        rows.push(Row { line, fields });
    }
    Ok(rows)
}

/// Reduces a microbe name to `Genus species`, dropping strain suffixes.
/// Single-token names are returned unchanged.
pub fn canonicalize_microbe(name: &str) -> String {
    let mut tokens = name.split_whitespace();
    match (tokens.next(), tokens.next()) {
        (Some(genus), Some(species)) => {
            let mut chars = genus.chars();
            let genus: String = chars
                .next()
                .into_iter()
                .flat_map(char::to_uppercase)
                .chain(chars.flat_map(char::to_lowercase))
                .collect();
            format!("{genus} {}", species.to_lowercase())
        }
        _ => name.trim().to_string(),
    }
}

/// Reads the three entity tables. Peptides outside the retained length range
/// are dropped; microbes whose canonical names coincide are merged into the
/// first occurrence.
pub fn load_entities(peptide_table: &Path, microbe_table: &Path, disease_table: &Path) -> Result<EntityRegistry> {
    let mut registry = EntityRegistry::default();

    let mut seen = HashSet::new();
    let mut filtered = 0usize;
    for row in read_tsv(peptide_table, &["id", "sequence"])? {
        let id = row.fields[0].clone();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { class: "peptide", id });
        }
        let sequence = row.fields[1].to_ascii_uppercase();
        if let Err(c) = validate_sequence(&sequence) {
            return Err(Error::Parse {
                path: peptide_table.to_path_buf(),
                line: row.line,
                message: format!("peptide `{id}` has invalid residue {c:?}"),
            });
        }
        if !(MIN_PEPTIDE_LEN..=MAX_PEPTIDE_LEN).contains(&sequence.len()) {
            filtered += 1;
            registry.push_event(EventKind::LengthFiltered, &id, format!("length {}", sequence.len()));
            registry.filtered_peptides.insert(id);
            continue;
        }
        registry.peptide_index.insert(id.clone(), registry.peptides.len());
        registry.peptides.push(Peptide { id, sequence });
    }
    if filtered > 0 {
        info!("dropped {filtered} peptides outside length [{MIN_PEPTIDE_LEN}, {MAX_PEPTIDE_LEN}]");
    }

    let mut seen = HashSet::new();
    let mut by_name: HashMap<String, String> = HashMap::new();
    for row in read_tsv(microbe_table, &["id", "name"])? {
        let id = row.fields[0].clone();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId { class: "microbe", id });
        }
        let name = canonicalize_microbe(&row.fields[1]);
        if !name.contains(' ') {
            warn!("microbe `{id}`: name `{name}` has no species token; kept unresolved");
            registry.push_event(EventKind::MicrobeUnresolved, &id, name.clone());
        }
        if let Some(rep) = by_name.get(&name) {
            registry.push_event(EventKind::MicrobeMerged, &id, format!("into {rep} ({name})"));
            registry.aliases.insert((EntityClass::Microbe, id), rep.clone());
            continue;
        }
        by_name.insert(name.clone(), id.clone());
        registry.microbe_index.insert(id.clone(), registry.microbes.len());
        registry.microbes.push(NamedEntity { id, name });
    }

    for row in read_tsv(disease_table, &["id", "name"])? {
        let id = row.fields[0].clone();
        if registry.disease_index.contains_key(&id) {
            return Err(Error::DuplicateId { class: "disease", id });
        }
        registry.disease_index.insert(id.clone(), registry.diseases.len());
        registry.diseases.push(NamedEntity {
            id,
            name: row.fields[1].clone(),
        });
    }

    info!(
        "loaded {} peptides, {} microbes, {} diseases",
        registry.peptides.len(),
        registry.microbes.len(),
        registry.diseases.len()
    );
    Ok(registry)
}

/// Greedy redundancy removal. Peptides are visited longest first (ties in
/// input order); a peptide whose normalized alignment identity to an already
/// retained peptide exceeds `threshold` is dropped and aliased to the most
/// similar such representative. Retained peptides keep their input order.
pub fn redundancy_filter(registry: &EntityRegistry, threshold: f64, params: &AlignmentParams) -> Result<EntityRegistry> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!("redundancy threshold {threshold} outside [0, 1]")));
    }
    let peptides = registry.peptides();
    let mut order: Vec<usize> = (0..peptides.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(peptides[i].sequence.len()));

    let mut retained: Vec<usize> = Vec::new();
    let mut dropped: Vec<(usize, usize, f64)> = Vec::new();
    for &i in &order {
        let seq = peptides[i].sequence.as_bytes();
        let mut best: Option<(usize, f64)> = None;
        for &r in &retained {
            let identity = normalized_identity(seq, peptides[r].sequence.as_bytes(), params);
            if identity > threshold && best.map_or(true, |(_, b)| identity > b) {
                best = Some((r, identity));
            }
        }
        match best {
            Some((rep, identity)) => dropped.push((i, rep, identity)),
            None => retained.push(i),
        }
    }
    retained.sort_unstable();

    let mut out = registry.clone();
    out.peptides = retained.iter().map(|&i| peptides[i].clone()).collect();
    out.peptide_index = index_of(out.peptides.iter().map(|p| p.id.as_str()), EntityClass::Peptide)?;
    dropped.sort_unstable_by_key(|d| d.0);
    for (i, rep, identity) in dropped {
        let (id, rep_id) = (&peptides[i].id, &peptides[rep].id);
        out.aliases.insert((EntityClass::Peptide, id.clone()), rep_id.clone());
        out.push_event(EventKind::Redundant, id, format!("into {rep_id} (identity {identity:.4})"));
    }
    info!(
        "redundancy filter at {threshold}: kept {} of {} peptides",
        out.peptides.len(),
        peptides.len()
    );
    Ok(out)
}

/// Reads `relation, src_id, dst_id` rows, resolving ids through the registry
/// (including merge aliases). Duplicates are collapsed, first occurrence wins.
/// Rows that reference a length-filtered peptide are skipped and logged.
pub fn load_associations(edge_table: &Path, registry: &mut EntityRegistry) -> Result<Vec<RawAssociation>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    let mut skipped = 0usize;
    'rows: for row in read_tsv(edge_table, &["relation", "src_id", "dst_id"])? {
        let tag = &row.fields[0];
        let relation = Relation::from_tag(tag).ok_or_else(|| Error::UnknownRelation {
            path: edge_table.to_path_buf(),
            line: row.line,
            tag: tag.clone(),
        })?;
        let (src_class, dst_class) = relation.endpoints();
        let mut resolved = Vec::with_capacity(2);
        for (class, raw) in [(src_class, &row.fields[1]), (dst_class, &row.fields[2])] {
            match registry.resolve(class, raw) {
                Some(id) => resolved.push(id.to_string()),
                None if class == EntityClass::Peptide && registry.is_filtered_peptide(raw) => {
                    skipped += 1;
                    let raw = raw.clone();
                    registry.push_event(EventKind::EdgeToFilteredPeptide, raw, format!("line {}", row.line));
                    continue 'rows;
                }
                None => {
                    return Err(Error::UnresolvedId {
                        path: edge_table.to_path_buf(),
                        line: row.line,
                        class: class.as_str(),
                        id: raw.clone(),
                    })
                }
            }
        }
        let dst_id = resolved.pop().expect("two endpoints");
        let src_id = resolved.pop().expect("two endpoints");
        let record = RawAssociation { relation, src_id, dst_id };
        if seen.insert(record.clone()) {
            out.push(record);
        } else {
            registry.push_event(
                EventKind::DuplicateEdge,
                format!("{}:{}-{}", relation.tag(), record.src_id, record.dst_id),
                format!("line {}", row.line),
            );
        }
    }
    if skipped > 0 {
        warn!("skipped {skipped} association rows that reference length-filtered peptides");
    }
    Ok(out)
}

pub fn write_associations(path: &Path, records: &[RawAssociation]) -> Result<()> {
    write_tsv(
        path,
        &["relation", "src_id", "dst_id"],
        records.iter().map(|r| vec![r.relation.tag(), r.src_id.as_str(), r.dst_id.as_str()]),
    )
}
