//! Schema-typed columnar tables.
//!
//! A [`Table`] holds numeric columns as `f64` arrays and categorical columns
//! as small integer codes plus a per-column label dictionary. Dictionaries are
//! local to a table; anything comparing two tables aligns levels by label.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

impl ColumnKind {
    fn describe(self) -> &'static str {
        match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    #[default]
    Feature,
    Target,
    QuasiIdentifier,
    Sensitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub role: ColumnRole,
}

impl ColumnSpec {
    pub fn numeric(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Numeric, role: ColumnRole::Feature }
    }

    pub fn categorical(name: impl Into<String>) -> Self {
        Self { name: name.into(), kind: ColumnKind::Categorical, role: ColumnRole::Feature }
    }

    pub fn with_role(mut self, role: ColumnRole) -> Self {
        self.role = role;
        self
    }
}

/// Ordered, validated list of column declarations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableSchema {
    columns: Vec<ColumnSpec>,
}

#[derive(Deserialize)]
struct SchemaFile {
    #[serde(default)]
    #[allow(dead_code)]
    name: Option<String>,
    columns: Vec<ColumnSpec>,
}

impl TableSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::InvalidSchema("schema has no columns".into()));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if c.name.trim().is_empty() {
                return Err(Error::InvalidSchema("empty column name".into()));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate column `{}`", c.name)));
            }
        }
        Ok(Self { columns })
    }

    /// Parse a schema document:
    ///
    /// ```toml
    /// name = "adult"
    /// [[columns]]
    /// name = "age"
    /// kind = "numeric"
    /// [[columns]]
    /// name = "income"
    /// kind = "categorical"
    /// role = "target"
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SchemaFile = toml::from_str(text).map_err(|e| Error::InvalidSchema(e.to_string()))?;
        Self::new(file.columns)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn names_with_role(&self, role: ColumnRole) -> Vec<String> {
        self.columns.iter().filter(|c| c.role == role).map(|c| c.name.clone()).collect()
    }

    /// True when both schemas declare the same names with the same kinds, in
    /// any order. Roles are not compared.
    pub fn same_shape(&self, other: &TableSchema) -> bool {
        self.len() == other.len()
            && self.columns.iter().all(|c| other.column(&c.name).is_some_and(|o| o.kind == c.kind))
    }

    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let cols = names
            .iter()
            .map(|n| self.column(n).cloned().ok_or_else(|| Error::MissingColumn(n.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(cols)
    }
}

/// Level codes plus the code → label dictionary.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalColumn {
    codes: Vec<u32>,
    levels: Vec<String>,
}

impl CategoricalColumn {
    pub fn new(codes: Vec<u32>, levels: Vec<String>) -> Result<Self> {
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= levels.len()) {
            return Err(Error::InvalidParameter(format!("level code {bad} has no label")));
        }
        Ok(Self { codes, levels })
    }

    /// Build from labels, assigning codes in first-occurrence order.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut dict: HashMap<&str, u32> = HashMap::new();
        let mut levels = Vec::new();
        let codes = labels
            .iter()
            .map(|l| {
                let l = l.as_ref();
                *dict.entry(l).or_insert_with(|| {
                    levels.push(l.to_string());
                    (levels.len() - 1) as u32
                })
            })
            .collect();
        Self { codes, levels }
    }

    pub fn codes(&self) -> &[u32] {
        &self.codes
    }

    pub fn levels(&self) -> &[String] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn label(&self, row: usize) -> &str {
        &self.levels[self.codes[row] as usize]
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> + '_ {
        self.codes.iter().map(|&c| self.levels[c as usize].as_str())
    }

    /// Occurrence count per level code.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.levels.len()];
        for &c in &self.codes {
            counts[c as usize] += 1;
        }
        counts
    }

    /// Counts keyed by label, in dictionary order, levels with zero count dropped.
    pub fn label_counts(&self) -> IndexMap<String, usize> {
        self.levels.iter().cloned().zip(self.counts()).filter(|(_, n)| *n > 0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(CategoricalColumn),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(c) => c.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
        }
    }

    /// Entries at `rows`, in that order, keeping the level dictionary.
    pub fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical(c) => ColumnData::Categorical(CategoricalColumn {
                codes: rows.iter().map(|&r| c.codes[r]).collect(),
                levels: c.levels.clone(),
            }),
        }
    }
}

/// A single cell, used when assembling tables row by row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell<'a> {
    Numeric(f64),
    Categorical(&'a str),
}

/// Immutable schema-typed table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    schema: TableSchema,
    columns: Vec<ColumnData>,
    n_rows: usize,
}

impl Table {
    pub fn new(schema: TableSchema, columns: Vec<ColumnData>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::SchemaMismatch(format!(
                "{} columns declared, {} supplied",
                schema.len(),
                columns.len()
            )));
        }
        let n_rows = columns[0].len();
        for (spec, col) in schema.columns().iter().zip(&columns) {
            if col.kind() != spec.kind {
                return Err(Error::ColumnKindMismatch { column: spec.name.clone(), expected: spec.kind.describe() });
            }
            if col.len() != n_rows {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` has {} rows, expected {n_rows}",
                    spec.name,
                    col.len()
                )));
            }
            if let ColumnData::Numeric(v) = col {
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::UnparsableNumeric {
                        row: i + 1,
                        column: spec.name.clone(),
                        value: v[i].to_string(),
                    });
                }
            }
        }
        Ok(Self { schema, columns, n_rows })
    }

    pub fn schema(&self) -> &TableSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    pub fn columns(&self) -> &[ColumnData] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&ColumnData> {
        self.schema.index_of(name).map(|i| &self.columns[i]).ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn numeric(&self, name: &str) -> Result<&[f64]> {
        match self.column(name)? {
            ColumnData::Numeric(v) => Ok(v),
            _ => Err(Error::ColumnKindMismatch { column: name.into(), expected: "numeric" }),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&CategoricalColumn> {
        match self.column(name)? {
            ColumnData::Categorical(c) => Ok(c),
            _ => Err(Error::ColumnKindMismatch { column: name.into(), expected: "categorical" }),
        }
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell<'_> {
        match &self.columns[col] {
            ColumnData::Numeric(v) => Cell::Numeric(v[row]),
            ColumnData::Categorical(c) => Cell::Categorical(c.label(row)),
        }
    }

    /// Build a table from `(source table, row)` references. Sources may have
    /// their columns in any order and their own dictionaries; they only need
    /// the same names and kinds as `schema`. Output dictionaries list labels
    /// in first-occurrence order.
    pub fn assemble(schema: &TableSchema, sources: &[&Table], rows: &[(usize, usize)]) -> Result<Self> {
        let mut maps = Vec::with_capacity(sources.len());
        for src in sources {
            if !src.schema.same_shape(schema) {
                return Err(Error::SchemaMismatch("assembled sources differ in shape".into()));
            }
            let idx = schema
                .columns()
                .iter()
                .map(|c| src.schema.index_of(&c.name).expect("same_shape checked"))
                .collect::<Vec<_>>();
            maps.push(idx);
        }
        let mut columns = Vec::with_capacity(schema.len());
        for (j, spec) in schema.columns().iter().enumerate() {
            let col = match spec.kind {
                ColumnKind::Numeric => ColumnData::Numeric(
                    rows.iter()
                        .map(|&(s, r)| match &sources[s].columns[maps[s][j]] {
                            ColumnData::Numeric(v) => v[r],
                            _ => unreachable!(),
                        })
                        .collect(),
                ),
                ColumnKind::Categorical => {
                    let labels = rows
                        .iter()
                        .map(|&(s, r)| match &sources[s].columns[maps[s][j]] {
                            ColumnData::Categorical(c) => c.label(r),
                            _ => unreachable!(),
                        })
                        .collect::<Vec<_>>();
                    ColumnData::Categorical(CategoricalColumn::from_labels(&labels))
                }
            };
            columns.push(col);
        }
        Table::new(schema.clone(), columns)
    }

    /// Rows `indices` of this table, in that order.
    pub fn gather(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&r| (0, r)).collect::<Vec<_>>();
        Table::assemble(&self.schema, &[self], &rows)
    }

    /// Stack tables vertically, aligning columns by name and levels by label.
    pub fn concat(schema: &TableSchema, parts: &[&Table]) -> Result<Self> {
        let rows = parts.iter().enumerate().flat_map(|(s, t)| (0..t.n_rows).map(move |r| (s, r))).collect::<Vec<_>>();
        Table::assemble(schema, parts, &rows)
    }

    /// Projection onto the named columns.
    pub fn select(&self, names: &[&str]) -> Result<Self> {
        let schema = self.schema.select(names)?;
        let columns = names.iter().map(|n| self.column(n).cloned()).collect::<Result<Vec<_>>>()?;
        Table::new(schema, columns)
    }

    /// Same data with another schema of identical shape (e.g. to swap roles).
    pub fn with_schema(&self, schema: &TableSchema) -> Result<Self> {
        if !self.schema.same_shape(schema) {
            return Err(Error::SchemaMismatch("schemas differ in names or kinds".into()));
        }
        let columns = schema.columns().iter().map(|c| self.column(&c.name).cloned()).collect::<Result<Vec<_>>>()?;
        Table::new(schema.clone(), columns)
    }

    /// Replace one column's data, keeping everything else.
    pub fn with_column(&self, name: &str, data: ColumnData) -> Result<Self> {
        let idx = self.schema.index_of(name).ok_or_else(|| Error::MissingColumn(name.into()))?;
        let mut columns = self.columns.clone();
        columns[idx] = data;
        Table::new(self.schema.clone(), columns)
    }

    pub fn read_csv<R: Read>(reader: R, schema: &TableSchema) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let positions = schema
            .columns()
            .iter()
            .map(|c| {
                headers.iter().position(|h| h.trim() == c.name).ok_or_else(|| Error::MissingColumn(c.name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut numeric: Vec<Vec<f64>> = vec![Vec::new(); schema.len()];
        let mut labels: Vec<Vec<String>> = vec![Vec::new(); schema.len()];
        for (i, record) in rdr.records().enumerate() {
            let record = record?;
            let row = i + 1;
            for (j, spec) in schema.columns().iter().enumerate() {
                let raw = record.get(positions[j]).unwrap_or("");
                let value = raw.trim();
                if value.is_empty() {
                    return Err(Error::MissingValue { row, column: spec.name.clone() });
                }
                match spec.kind {
                    ColumnKind::Numeric => {
                        let x = value.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                            Error::UnparsableNumeric { row, column: spec.name.clone(), value: value.to_string() }
                        })?;
                        numeric[j].push(x);
                    }
                    ColumnKind::Categorical => labels[j].push(value.to_string()),
                }
            }
        }
        let columns = schema
            .columns()
            .iter()
            .enumerate()
            .map(|(j, spec)| match spec.kind {
                ColumnKind::Numeric => ColumnData::Numeric(std::mem::take(&mut numeric[j])),
                ColumnKind::Categorical => ColumnData::Categorical(CategoricalColumn::from_labels(&labels[j])),
            })
            .collect();
        Table::new(schema.clone(), columns)
    }

    pub fn load_csv(path: impl AsRef<Path>, schema: &TableSchema) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, schema)
    }

    /// Write with a header row in schema order. Numerics use the shortest
    /// representation that parses back to the same `f64`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.schema.columns().iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.columns.len());
        for r in 0..self.n_rows {
            record.clear();
            for col in &self.columns {
                record.push(match col {
                    ColumnData::Numeric(v) => format_f64(v[r]),
                    ColumnData::Categorical(c) => c.label(r).to_string(),
                });
            }
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(file)
    }
}

/// Shortest round-trip decimal rendering of a float.
pub fn format_f64(x: f64) -> String {
    format!("{x}")
}

/// Train fraction plus seed for a random row partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!("train fraction must lie in (0,1), got {train_fraction}")));
        }
        Ok(Self { train_fraction, seed })
    }

    pub fn train_size(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64).round() as usize).clamp(1, n - 1)
    }
}

/// Seeded random partition into (train, holdout). Each part keeps file order.
pub fn split(table: &Table, spec: SplitSpec) -> Result<(Table, Table)> {
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, got: n });
    }
    let spec = SplitSpec::new(spec.train_fraction, spec.seed)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seed::rng(spec.seed));
    let k = spec.train_size(n);
    let mut train = perm[..k].to_vec();
    let mut test = perm[k..].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((table.gather(&train)?, table.gather(&test)?))
}

/// Contingency counts `label → (real count, synthetic count)` over the union
/// of labels: real dictionary order first, then synthetic-only labels.
pub fn crosstab(real: &CategoricalColumn, synth: &CategoricalColumn) -> IndexMap<String, (usize, usize)> {
    let mut tab: IndexMap<String, (usize, usize)> = IndexMap::new();
    for (label, n) in real.levels().iter().zip(real.counts()) {
        if n > 0 {
            tab.entry(label.clone()).or_default().0 += n;
        }
    }
    for (label, n) in synth.levels().iter().zip(synth.counts()) {
        if n > 0 {
            tab.entry(label.clone()).or_default().1 += n;
        }
    }
    tab
}

/// Column-level crosstab by name with kind checks.
pub fn crosstab_columns(real: &Table, synth: &Table, column: &str) -> Result<IndexMap<String, (usize, usize)>> {
    Ok(crosstab(real.categorical(column)?, synth.categorical(column)?))
}
