//! Concept sets, attribute matrices and supercategory maps.
//!
//! Embeddings define the canonical concept order: concept id `i` is row `i`
//! of the embeddings file, and the attribute and supercategory files must
//! name the same concepts.
//!
//! Binary tensor container layout (little-endian):
//!
//! ```text
//! "SFTN"            4 bytes magic
//! version: u32      currently 1
//! header            UTF-8 JSON line terminated by '\n':
//!                   {"n": N, "d": D, "dtype": "f32"|"f64", "names": [...]}
//! payload           N*D values, row-major
//! ```

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const TENSOR_MAGIC: &[u8; 4] = b"SFTN";
pub const TENSOR_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingFormat {
    Csv,
    #[serde(alias = "binary")]
    BinaryTensor,
}

impl EmbeddingFormat {
    /// `.bin` and `.sftn` files are binary tensors, everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") | Some("sftn") => EmbeddingFormat::BinaryTensor,
            _ => EmbeddingFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorDtype {
    F32,
    F64,
}

/// Concept names plus one fixed-dimension embedding per concept.
#[derive(Debug, Clone, PartialEq)]
pub struct ConceptSet {
    names: Vec<String>,
    values: Vec<f64>,
    dim: usize,
    index: HashMap<String, usize>,
}

impl ConceptSet {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != rows.len() {
            return Err(Error::Validation(format!(
                "{} names but {} embedding rows",
                names.len(),
                rows.len()
            )));
        }
        let dim = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Validation(format!(
                    "inconsistent dimension at row {}: expected {dim}, found {}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(names, values, dim)
    }

    /// Builds a set from a row-major `names.len() x dim` buffer.
    pub fn from_flat(names: Vec<String>, values: Vec<f64>, dim: usize) -> Result<Self> {
        let n = names.len();
        if n < 2 {
            return Err(Error::Validation(format!(
                "a concept set needs at least 2 concepts, got {n}"
            )));
        }
        if dim == 0 {
            return Err(Error::Validation("embedding dimension must be positive".into()));
        }
        if values.len() != n * dim {
            return Err(Error::Validation(format!(
                "expected {} embedding values, got {}",
                n * dim,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite value at row {}, column {}",
                pos / dim + 1,
                pos % dim
            )));
        }
        let index = build_name_index(&names)?;
        Ok(Self {
            names,
            values,
            dim,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn row(&self, id: usize) -> &[f64] {
        &self.values[id * self.dim..(id + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Row-major `N x D` values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Copy with every row scaled to unit L2 norm. Zero rows are left as-is.
    pub fn l2_normalized(&self) -> Self {
        let mut out = self.clone();
        for row in out.values.chunks_exact_mut(self.dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut header = String::from("name");
        for j in 0..self.dim {
            header.push_str(&format!(",d{j}"));
        }
        let write = |w: &mut BufWriter<File>, s: &str| w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e));
        write(&mut w, &header)?;
        write(&mut w, "\n")?;
        for (name, row) in self.names.iter().zip(self.rows()) {
            let mut line = csv_field(name);
            for v in row {
                line.push(',');
                line.push_str(&v.to_string());
            }
            line.push('\n');
            write(&mut w, &line)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_binary(&self, path: &Path, dtype: TensorDtype) -> Result<()> {
        let header = TensorHeader {
            n: self.len(),
            d: self.dim,
            dtype,
            names: self.names.clone(),
        };
        let mut buf = Vec::with_capacity(64 + self.values.len() * 8);
        buf.extend_from_slice(TENSOR_MAGIC);
        buf.extend_from_slice(&TENSOR_VERSION.to_le_bytes());
        serde_json::to_writer(&mut buf, &header)?;
        buf.push(b'\n');
        match dtype {
            TensorDtype::F32 => {
                for v in &self.values {
                    buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
            TensorDtype::F64 => {
                for v in &self.values {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        std::fs::write(path, buf).map_err(|e| Error::io(path, e))
    }
}

fn build_name_index(names: &[String]) -> Result<HashMap<String, usize>> {
    let mut index = HashMap::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::Validation(format!("empty concept name at row {}", i + 1)));
        }
        if let Some(prev) = index.insert(name.clone(), i) {
            return Err(Error::Validation(format!(
                "duplicate concept name {name:?} at rows {} and {}",
                prev + 1,
                i + 1
            )));
        }
    }
    Ok(index)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorHeader {
    n: usize,
    d: usize,
    dtype: TensorDtype,
    names: Vec<String>,
}

pub fn load_embeddings(path: &Path, format: EmbeddingFormat) -> Result<ConceptSet> {
    match format {
        EmbeddingFormat::Csv => load_embeddings_csv(path),
        EmbeddingFormat::BinaryTensor => load_embeddings_binary(path),
    }
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path.display(), e.to_string())
}

fn load_embeddings_csv(path: &Path) -> Result<ConceptSet> {
    let shown = path.display();
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("name") {
        return Err(Error::format(&shown, "malformed header: first column must be `name`"));
    }
    let dim = header.len() - 1;
    if dim == 0 {
        return Err(Error::format(&shown, "malformed header: no embedding columns"));
    }
    for (j, col) in header.iter().skip(1).enumerate() {
        if col.trim() != format!("d{j}") {
            return Err(Error::format(
                &shown,
                format!("malformed header: column {} is {col:?}, expected \"d{j}\"", j + 1),
            ));
        }
    }

    let mut names = Vec::new();
    let mut values = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if record.len() != dim + 1 {
            return Err(Error::format(
                &shown,
                format!(
                    "inconsistent dimension at row {row}: expected {dim} values, found {}",
                    record.len().saturating_sub(1)
                ),
            ));
        }
        names.push(record[0].to_string());
        for (j, cell) in record.iter().skip(1).enumerate() {
            let v: f64 = cell
                .trim()
                .parse()
                .map_err(|_| Error::format(&shown, format!("unparseable number {cell:?} at row {row}, column {j}")))?;
            if !v.is_finite() {
                return Err(Error::format(
                    &shown,
                    format!("non-finite value at row {row}, column {j}"),
                ));
            }
            values.push(v);
        }
    }
    ConceptSet::from_flat(names, values, dim).map_err(|e| Error::format(&shown, e.to_string()))
}

fn load_embeddings_binary(path: &Path) -> Result<ConceptSet> {
    let shown = path.display();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    let mut magic = [0u8; 4];
    reader
        .read_exact(&mut magic)
        .map_err(|_| Error::format(&shown, "truncated magic"))?;
    if &magic != TENSOR_MAGIC {
        return Err(Error::format(&shown, "bad magic bytes, expected SFTN"));
    }
    let mut version = [0u8; 4];
    reader
        .read_exact(&mut version)
        .map_err(|_| Error::format(&shown, "truncated version"))?;
    let version = u32::from_le_bytes(version);
    if version != TENSOR_VERSION {
        return Err(Error::format(&shown, format!("unsupported format version {version}")));
    }

    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line).map_err(|e| Error::io(path, e))?;
    if line.pop() != Some(b'\n') {
        return Err(Error::format(&shown, "malformed header: missing newline terminator"));
    }
    let header: TensorHeader =
        serde_json::from_slice(&line).map_err(|e| Error::format(&shown, format!("malformed header: {e}")))?;
    if header.names.len() != header.n {
        return Err(Error::format(
            &shown,
            format!("malformed header: n = {} but {} names", header.n, header.names.len()),
        ));
    }

    let width = match header.dtype {
        TensorDtype::F32 => 4,
        TensorDtype::F64 => 8,
    };
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    let expected = header.n * header.d * width;
    if payload.len() != expected {
        return Err(Error::format(
            &shown,
            format!("payload is {} bytes, expected {expected}", payload.len()),
        ));
    }
    let values: Vec<f64> = match header.dtype {
        TensorDtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        TensorDtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    ConceptSet::from_flat(header.names, values, header.d).map_err(|e| Error::format(&shown, e.to_string()))
}

/// Binary concept-by-attribute labels, one probing task per column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeMatrix {
    names: Vec<String>,
    /// concept-major `N x A`
    labels: Vec<u8>,
    n_concepts: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    NoPositive,
    NoNegative,
}

impl AttributeMatrix {
    /// `columns[a][i]` is the label of concept `i` for attribute `a`.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<u8>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Validation(format!(
                "{} attribute names but {} columns",
                names.len(),
                columns.len()
            )));
        }
        if names.is_empty() {
            return Err(Error::Validation("no attributes".into()));
        }
        let n = columns[0].len();
        let mut seen = HashMap::new();
        for (a, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::Validation(format!("empty attribute name in column {}", a + 1)));
            }
            if seen.insert(name.as_str(), a).is_some() {
                return Err(Error::Validation(format!("duplicate attribute name {name:?}")));
            }
        }
        let mut degenerate = Vec::new();
        for (a, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Validation(format!(
                    "attribute {:?} has {} rows, expected {n}",
                    names[a],
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|&v| v > 1) {
                return Err(Error::Validation(format!(
                    "non-binary label {} for attribute {:?} at row {}",
                    col[i],
                    names[a],
                    i + 1
                )));
            }
            if let Some(kind) = degeneracy(col) {
                degenerate.push((names[a].clone(), kind));
            }
        }
        if !degenerate.is_empty() {
            let listing = degenerate
                .iter()
                .map(|(name, kind)| match kind {
                    Degeneracy::NoPositive => format!("{name} (no positive)"),
                    Degeneracy::NoNegative => format!("{name} (no negative)"),
                })
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::Validation(format!("degenerate attributes: {listing}")));
        }
        let mut labels = vec![0u8; n * names.len()];
        for (a, col) in columns.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                labels[i * names.len() + a] = v;
            }
        }
        Ok(Self {
            names,
            labels,
            n_concepts: n,
        })
    }

    pub fn n_attributes(&self) -> usize {
        self.names.len()
    }

    pub fn n_concepts(&self) -> usize {
        self.n_concepts
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn label(&self, concept: usize, attribute: usize) -> u8 {
        self.labels[concept * self.names.len() + attribute]
    }

    pub fn column(&self, attribute: usize) -> Vec<u8> {
        (0..self.n_concepts).map(|i| self.label(i, attribute)).collect()
    }

    pub fn write_csv(&self, path: &Path, concepts: &ConceptSet) -> Result<()> {
        let mut out = String::from("name");
        for name in &self.names {
            out.push(',');
            out.push_str(&csv_field(name));
        }
        out.push('\n');
        for i in 0..self.n_concepts {
            out.push_str(&csv_field(concepts.name(i)));
            for a in 0..self.names.len() {
                out.push(',');
                out.push(if self.label(i, a) == 1 { '1' } else { '0' });
            }
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn degeneracy(col: &[u8]) -> Option<Degeneracy> {
    if !col.contains(&1) {
        Some(Degeneracy::NoPositive)
    } else if !col.contains(&0) {
        Some(Degeneracy::NoNegative)
    } else {
        None
    }
}

/// Loads the attributes CSV; its name column must list the concepts in
/// embedding order.
pub fn load_attributes(path: &Path, concepts: &ConceptSet) -> Result<AttributeMatrix> {
    let shown = path.display();
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("name") {
        return Err(Error::format(&shown, "malformed header: first column must be `name`"));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::format(&shown, "malformed header: no attribute columns"));
    }
    let mut columns = vec![Vec::with_capacity(concepts.len()); names.len()];
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if record.len() != names.len() + 1 {
            return Err(Error::format(
                &shown,
                format!("row {row} has {} cells, expected {}", record.len(), names.len() + 1),
            ));
        }
        let expected = concepts.names().get(r).map(String::as_str);
        if expected != Some(&record[0]) {
            return Err(Error::format(
                &shown,
                format!(
                    "name-order mismatch at row {row}: found {:?}, embeddings have {:?}",
                    &record[0],
                    expected.unwrap_or("<none>")
                ),
            ));
        }
        for (a, cell) in record.iter().skip(1).enumerate() {
            let v = match cell.trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::format(
                        &shown,
                        format!("non-binary cell {other:?} at row {row}, column {:?}", names[a]),
                    ))
                }
            };
            columns[a].push(v);
        }
        rows += 1;
    }
    if rows != concepts.len() {
        return Err(Error::format(
            &shown,
            format!("{rows} rows but the embeddings define {} concepts", concepts.len()),
        ));
    }
    AttributeMatrix::from_columns(names, columns).map_err(|e| Error::format(&shown, e.to_string()))
}

/// Total map from concept id to supercategory id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupercategoryMap {
    assignment: Vec<usize>,
    names: Vec<String>,
}

impl SupercategoryMap {
    pub fn new(assignment: Vec<usize>, names: Vec<String>) -> Result<Self> {
        if names.len() < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 supercategories, got {}",
                names.len()
            )));
        }
        if let Some(i) = assignment.iter().position(|&s| s >= names.len()) {
            return Err(Error::Validation(format!(
                "concept {i} mapped to unknown supercategory {}",
                assignment[i]
            )));
        }
        Ok(Self { assignment, names })
    }

    pub fn n_supercategories(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn of(&self, concept: usize) -> usize {
        self.assignment[concept]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn write_csv(&self, path: &Path, concepts: &ConceptSet) -> Result<()> {
        let mut out = String::from("name,supercategory\n");
        for (i, &s) in self.assignment.iter().enumerate() {
            out.push_str(&csv_field(concepts.name(i)));
            out.push(',');
            out.push_str(&csv_field(&self.names[s]));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Supercategory ids are assigned in order of first appearance in the file.
pub fn load_supercategories(path: &Path, concepts: &ConceptSet) -> Result<SupercategoryMap> {
    let shown = path.display();
    let mut reader = csv_reader(path)?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() != 2 || &header[0] != "name" || &header[1] != "supercategory" {
        return Err(Error::format(&shown, "malformed header: expected `name,supercategory`"));
    }
    let mut assignment: Vec<Option<usize>> = vec![None; concepts.len()];
    let mut names: Vec<String> = Vec::new();
    let mut ids: HashMap<String, usize> = HashMap::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = r + 1;
        if record.len() != 2 {
            return Err(Error::format(&shown, format!("row {row} must have 2 cells")));
        }
        let concept = concepts
            .id_of(&record[0])
            .ok_or_else(|| Error::format(&shown, format!("unknown concept {:?} at row {row}", &record[0])))?;
        if assignment[concept].is_some() {
            return Err(Error::format(
                &shown,
                format!("duplicate row for concept {:?} at row {row}", &record[0]),
            ));
        }
        let label = record[1].to_string();
        if label.is_empty() {
            return Err(Error::format(&shown, format!("empty supercategory at row {row}")));
        }
        let next = names.len();
        let id = *ids.entry(label.clone()).or_insert_with(|| {
            names.push(label);
            next
        });
        assignment[concept] = Some(id);
    }
    let assignment = assignment
        .into_iter()
        .enumerate()
        .map(|(i, s)| s.ok_or_else(|| Error::format(&shown, format!("uncovered concept {:?}", concepts.name(i)))))
        .collect::<Result<Vec<_>>>()?;
    SupercategoryMap::new(assignment, names).map_err(|e| Error::format(&shown, e.to_string()))
}

/// Everything one run needs, cross-validated.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub concept_set: ConceptSet,
    pub attributes: AttributeMatrix,
    pub supercategories: Option<SupercategoryMap>,
}

impl DatasetBundle {
    pub fn new(
        concept_set: ConceptSet,
        attributes: AttributeMatrix,
        supercategories: Option<SupercategoryMap>,
    ) -> Result<Self> {
        if attributes.n_concepts() != concept_set.len() {
            return Err(Error::Validation(format!(
                "attribute matrix has {} rows, concept set has {}",
                attributes.n_concepts(),
                concept_set.len()
            )));
        }
        if let Some(sm) = &supercategories {
            if sm.assignment.len() != concept_set.len() {
                return Err(Error::Validation(format!(
                    "supercategory map covers {} concepts, concept set has {}",
                    sm.assignment.len(),
                    concept_set.len()
                )));
            }
        }
        Ok(Self {
            concept_set,
            attributes,
            supercategories,
        })
    }

    pub fn load(
        embeddings: &Path,
        format: EmbeddingFormat,
        attributes: &Path,
        supercategories: Option<&Path>,
    ) -> Result<Self> {
        let concept_set = load_embeddings(embeddings, format)?;
        let attributes = load_attributes(attributes, &concept_set)?;
        let supercategories = supercategories
            .map(|p| load_supercategories(p, &concept_set))
            .transpose()?;
        Self::new(concept_set, attributes, supercategories)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    fn abc() -> ConceptSet {
        ConceptSet::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap()
    }

    #[test]
    fn parses_small_csv() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "e.csv", "name,d0,d1\na,1,0\nb,0,1\nc,1,1\n");
        let cs = load_embeddings(&p, EmbeddingFormat::Csv).unwrap();
        assert_eq!(cs.len(), 3);
        assert_eq!(cs.dim(), 2);
        assert_eq!(cs.row(2), &[1.0, 1.0]);
        assert_eq!(cs.id_of("b"), Some(1));
    }

    #[test]
    fn scientific_notation_accepted() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "e.csv", "name,d0\na,1e-3\nb,-2.5E2\n");
        let cs = load_embeddings(&p, EmbeddingFormat::Csv).unwrap();
        assert_eq!(cs.values(), &[1e-3, -250.0]);
    }

    #[test]
    fn ragged_csv_reports_row() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "e.csv", "name,d0,d1\na,1,0\nb,0\n");
        let err = load_embeddings(&p, EmbeddingFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("inconsistent dimension at row 2"), "{err}");
    }

    #[test]
    fn rejects_bad_header_nan_and_duplicates() {
        let dir = TempDir::new().unwrap();
        let p = write(&dir, "h.csv", "concept,d0\na,1\nb,2\n");
        assert!(load_embeddings(&p, EmbeddingFormat::Csv)
            .unwrap_err()
            .to_string()
            .contains("malformed header"));
        let p = write(&dir, "n.csv", "name,d0\na,NaN\nb,2\n");
        assert!(load_embeddings(&p, EmbeddingFormat::Csv)
            .unwrap_err()
            .to_string()
            .contains("non-finite value at row 1"));
        let p = write(&dir, "d.csv", "name,d0\na,1\na,2\n");
        assert!(load_embeddings(&p, EmbeddingFormat::Csv)
            .unwrap_err()
            .to_string()
            .contains("duplicate concept name"));
    }

    #[test]
    fn binary_shape_of_full_corpus() {
        let dir = TempDir::new().unwrap();
        let n = 1854;
        let d = 1024;
        let names: Vec<String> = (0..n).map(|i| format!("concept_{i}")).collect();
        let values: Vec<f64> = (0..n * d).map(|i| (i % 97) as f64 * 0.25).collect();
        let cs = ConceptSet::from_flat(names, values, d).unwrap();
        let p = dir.path().join("e.bin");
        cs.write_binary(&p, TensorDtype::F32).unwrap();
        let back = load_embeddings(&p, EmbeddingFormat::BinaryTensor).unwrap();
        assert_eq!(back.len(), 1854);
        assert_eq!(back.dim(), 1024);
        assert_eq!(back, cs);
    }

    #[test]
    fn binary_truncated_payload_rejected() {
        let dir = TempDir::new().unwrap();
        let p = dir.path().join("e.bin");
        abc().write_binary(&p, TensorDtype::F64).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.pop();
        std::fs::write(&p, &bytes).unwrap();
        let err = load_embeddings(&p, EmbeddingFormat::BinaryTensor).unwrap_err();
        assert!(err.to_string().contains("payload"), "{err}");
        bytes[0] = b'X';
        std::fs::write(&p, &bytes).unwrap();
        assert!(load_embeddings(&p, EmbeddingFormat::BinaryTensor).is_err());
    }

    #[test]
    fn attributes_accept_and_reject() {
        let dir = TempDir::new().unwrap();
        let cs = ConceptSet::new(vec!["a".into(), "b".into(), "c".into(), "d".into()], vec![vec![1.0]; 4]).unwrap();
        let p = write(&dir, "a.csv", "name,has_legs\na,1\nb,1\nc,0\nd,0\n");
        let am = load_attributes(&p, &cs).unwrap();
        assert_eq!(am.column(0), vec![1, 1, 0, 0]);

        let p = write(&dir, "z.csv", "name,has_legs,never\na,1,0\nb,1,0\nc,0,0\nd,0,0\n");
        let err = load_attributes(&p, &cs).unwrap_err().to_string();
        assert!(err.contains("never (no positive)"), "{err}");

        let p = write(&dir, "x.csv", "name,has_legs\na,1\nb,2\nc,0\nd,0\n");
        assert!(load_attributes(&p, &cs).unwrap_err().to_string().contains("non-binary"));

        let p = write(&dir, "o.csv", "name,has_legs\nb,1\na,1\nc,0\nd,0\n");
        assert!(load_attributes(&p, &cs)
            .unwrap_err()
            .to_string()
            .contains("name-order mismatch"));
    }

    #[test]
    fn supercategories_first_appearance_ids() {
        let dir = TempDir::new().unwrap();
        let cs = abc();
        let p = write(
            &dir,
            "s.csv",
            "name,supercategory\nc,mammal\na,container\nb,container\n",
        );
        let sm = load_supercategories(&p, &cs).unwrap();
        assert_eq!(sm.n_supercategories(), 2);
        assert_eq!(sm.names(), &["mammal".to_string(), "container".to_string()]);
        assert_eq!(sm.assignment(), &[1, 1, 0]);
    }

    #[test]
    fn supercategory_errors() {
        let dir = TempDir::new().unwrap();
        let cs = abc();
        let p = write(&dir, "s.csv", "name,supercategory\na,container\nb,mammal\n");
        assert!(load_supercategories(&p, &cs)
            .unwrap_err()
            .to_string()
            .contains("uncovered concept \"c\""));
        let p = write(&dir, "s.csv", "name,supercategory\na,x\nb,y\nc,y\nq,y\n");
        assert!(load_supercategories(&p, &cs)
            .unwrap_err()
            .to_string()
            .contains("unknown concept"));
        let p = write(&dir, "s.csv", "name,supercategory\na,x\nb,y\na,y\nc,x\n");
        assert!(load_supercategories(&p, &cs)
            .unwrap_err()
            .to_string()
            .contains("duplicate row"));
    }

    #[test]
    fn csv_round_trip_exact() {
        let dir = TempDir::new().unwrap();
        let cs = ConceptSet::new(
            vec!["x, quoted".into(), "y".into()],
            vec![vec![0.1 + 0.2, -1e-300], vec![std::f64::consts::PI, 12345.678]],
        )
        .unwrap();
        let p = dir.path().join("rt.csv");
        cs.write_csv(&p).unwrap();
        assert_eq!(load_embeddings(&p, EmbeddingFormat::Csv).unwrap(), cs);
    }
}
