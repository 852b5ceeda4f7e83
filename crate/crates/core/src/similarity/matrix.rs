use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityClass {
    Peptide,
    Microbe,
    Disease,
}

impl EntityClass {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityClass::Peptide => "peptide",
            EntityClass::Microbe => "microbe",
            EntityClass::Disease => "disease",
        }
    }
}

/// Dense square intra-class similarity matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n: usize,
    values: Vec<f64>,
    class: EntityClass,
}

impl SimilarityMatrix {
    pub fn from_values(n: usize, values: Vec<f64>, class: EntityClass) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::shape(
                "similarity_matrix",
                format!("{} values for a {n}x{n} matrix", values.len()),
            ));
        }
        Ok(Self { n, values, class })
    }

    pub fn identity(n: usize, class: EntityClass) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self { n, values, class }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn class(&self) -> EntityClass {
        self.class
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Largest |S(i,j) - S(j,i)|.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in i + 1..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Writes the matrix as CSV with entity ids as row and column headers.
    pub fn write_csv(&self, path: &Path, ids: &[String]) -> Result<()> {
        if ids.len() != self.n {
            return Err(Error::shape(
                "write_csv",
                format!("{} ids for {} rows", ids.len(), self.n),
            ));
        }
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let mut emit = || -> std::io::Result<()> {
            write!(w, "id")?;
            for id in ids {
                write!(w, ",{id}")?;
            }
            writeln!(w)?;
            for (i, id) in ids.iter().enumerate() {
                write!(w, "{id}")?;
                for v in self.row(i) {
                    write!(w, ",{v:?}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}
