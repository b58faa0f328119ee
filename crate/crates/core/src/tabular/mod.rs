//! Column-typed tabular data.
//!
//! A [`Schema`] describes each column's type and feature group; a
//! [`Dataset`] pairs a schema with validated rows. Everything downstream
//! (transforms, generators, metrics, benchmarks) works on these two types,
//! so the validation here is what lets the rest of the crate assume clean
//! input: finite numerics, category codes in range, at most one label
//! column, and names that survive round-trips through CSV and the text
//! model formats.

mod io;
mod split;

pub use io::{load_csv, load_schema, save_csv, save_schema, schema_from_text, schema_to_text};
pub use split::{kfold_partition, split_rows, FoldAssignment};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {msg}")]
    Csv { path: String, msg: String },
    #[error("header mismatch at position {position}: expected {expected:?}, found {found:?}")]
    HeaderMismatch {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("row {row}, column {column}: {msg}")]
    BadCell {
        row: usize,
        column: String,
        msg: String,
    },
    #[error("row {row} has {found} fields, expected {expected}")]
    RowWidth {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("need at least {need} rows, have {have}")]
    TooFewRows { need: usize, have: usize },
    #[error("fold count must be between 2 and the row count, got {0}")]
    BadFoldCount(usize),
    #[error("no column named {0:?}")]
    NoSuchColumn(String),
    #[error("column {0:?} is not numeric")]
    NotNumeric(String),
    #[error("column {0:?} is not categorical")]
    NotCategorical(String),
    #[error("dataset has no label column")]
    NoLabel,
}

/// Storage type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

/// Which feature family a column belongs to.
///
/// `Fin` are financial attributes, `Degree` holds counts of network
/// neighbours, `SocInt` are social-interaction aggregates, `Label` is the
/// binary default indicator, and `Other` covers anything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureGroup {
    Fin,
    Degree,
    SocInt,
    Label,
    Other,
}

/// Where a dataset's rows came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn valid_category(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| !c.is_whitespace() && c != ',' && c != '|' && c != '"')
}

/// One column: a name, its kind, its group, and (for categoricals) the
/// closed list of category codes.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSchema {
    name: String,
    kind: ColumnKind,
    group: FeatureGroup,
    categories: Vec<String>,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>, group: FeatureGroup) -> Result<Self, TabularError> {
        let col = ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Numeric,
            group,
            categories: Vec::new(),
        };
        col.validate()?;
        Ok(col)
    }

    pub fn categorical(
        name: impl Into<String>,
        group: FeatureGroup,
        categories: Vec<String>,
    ) -> Result<Self, TabularError> {
        let col = ColumnSchema {
            name: name.into(),
            kind: ColumnKind::Categorical,
            group,
            categories,
        };
        col.validate()?;
        Ok(col)
    }

    /// A label column: categorical with categories `["0", "1"]`.
    pub fn label(name: impl Into<String>) -> Result<Self, TabularError> {
        ColumnSchema::categorical(name, FeatureGroup::Label, vec!["0".into(), "1".into()])
    }

    fn validate(&self) -> Result<(), TabularError> {
        if !is_identifier(&self.name) {
            return Err(TabularError::Schema(format!(
                "column name {:?} is not a valid identifier",
                self.name
            )));
        }
        match self.kind {
            ColumnKind::Numeric => {
                if !self.categories.is_empty() {
                    return Err(TabularError::Schema(format!(
                        "numeric column {:?} must not list categories",
                        self.name
                    )));
                }
            }
            ColumnKind::Categorical => {
                if self.categories.is_empty() {
                    return Err(TabularError::Schema(format!(
                        "categorical column {:?} needs at least one category",
                        self.name
                    )));
                }
                for c in &self.categories {
                    if !valid_category(c) {
                        return Err(TabularError::Schema(format!(
                            "column {:?}: category {:?} contains whitespace or a reserved character",
                            self.name, c
                        )));
                    }
                }
                let mut sorted = self.categories.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != self.categories.len() {
                    return Err(TabularError::Schema(format!(
                        "column {:?} lists a category twice",
                        self.name
                    )));
                }
            }
        }
        if self.group == FeatureGroup::Label
            && (self.kind != ColumnKind::Categorical || self.categories != ["0", "1"])
        {
            return Err(TabularError::Schema(format!(
                "label column {:?} must be categorical with categories [\"0\", \"1\"]",
                self.name
            )));
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ColumnKind {
        self.kind
    }

    pub fn group(&self) -> FeatureGroup {
        self.group
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn category_index(&self, value: &str) -> Option<u32> {
        self.categories
            .iter()
            .position(|c| c == value)
            .map(|i| i as u32)
    }
}

/// An ordered list of columns with at most one label column.
#[derive(Debug, Clone, PartialEq)]
pub struct Schema {
    columns: Vec<ColumnSchema>,
    label: Option<usize>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSchema>) -> Result<Self, TabularError> {
        if columns.is_empty() {
            return Err(TabularError::Schema("schema has no columns".into()));
        }
        for (i, a) in columns.iter().enumerate() {
            a.validate()?;
            for b in &columns[..i] {
                if a.name == b.name {
                    return Err(TabularError::Schema(format!(
                        "duplicate column name {:?}",
                        a.name
                    )));
                }
            }
        }
        let labels: Vec<usize> = columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.group == FeatureGroup::Label)
            .map(|(i, _)| i)
            .collect();
        if labels.len() > 1 {
            return Err(TabularError::Schema(
                "schema has more than one label column".into(),
            ));
        }
        Ok(Schema {
            label: labels.first().copied(),
            columns,
        })
    }

    pub fn columns(&self) -> &[ColumnSchema] {
        &self.columns
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, idx: usize) -> &ColumnSchema {
        &self.columns[idx]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn label_index(&self) -> Option<usize> {
        self.label
    }

    /// Indices of every non-label column.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len())
            .filter(|i| Some(*i) != self.label)
            .collect()
    }

    /// A copy with one column moved to a different feature group.
    ///
    /// Moving a column into `Label` re-checks the binary-category rule and
    /// the single-label rule.
    pub fn with_group(&self, name: &str, group: FeatureGroup) -> Result<Schema, TabularError> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| TabularError::NoSuchColumn(name.to_string()))?;
        let mut columns = self.columns.clone();
        columns[idx].group = group;
        Schema::new(columns)
    }
}

/// One value: a finite float for numeric columns, a category code for
/// categorical ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell {
    Num(f64),
    Cat(u32),
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            Cell::Cat(_) => None,
        }
    }

    pub fn as_cat(&self) -> Option<u32> {
        match self {
            Cell::Cat(c) => Some(*c),
            Cell::Num(_) => None,
        }
    }
}

/// Rows validated against a schema, tagged with where they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    rows: Vec<Vec<Cell>>,
    provenance: Provenance,
}

impl Dataset {
    /// Builds a real-provenance dataset, checking every cell against the
    /// schema: width, kind, finiteness, category range.
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self, TabularError> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(TabularError::RowWidth {
                    row: r,
                    found: row.len(),
                    expected: schema.len(),
                });
            }
            for (col, cell) in schema.columns().iter().zip(row) {
                match (col.kind, cell) {
                    (ColumnKind::Numeric, Cell::Num(v)) => {
                        if !v.is_finite() {
                            return Err(TabularError::BadCell {
                                row: r,
                                column: col.name.clone(),
                                msg: format!("non-finite value {v}"),
                            });
                        }
                    }
                    (ColumnKind::Categorical, Cell::Cat(c)) => {
                        if *c as usize >= col.categories.len() {
                            return Err(TabularError::BadCell {
                                row: r,
                                column: col.name.clone(),
                                msg: format!(
                                    "category code {c} out of range ({} categories)",
                                    col.categories.len()
                                ),
                            });
                        }
                    }
                    _ => {
                        return Err(TabularError::BadCell {
                            row: r,
                            column: col.name.clone(),
                            msg: "cell type does not match column kind".into(),
                        });
                    }
                }
            }
        }
        Ok(Dataset {
            schema,
            rows,
            provenance: Provenance::Real,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[Cell] {
        &self.rows[i]
    }

    /// All values of one numeric column.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>, TabularError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| TabularError::NoSuchColumn(name.to_string()))?;
        if self.schema.column(idx).kind != ColumnKind::Numeric {
            return Err(TabularError::NotNumeric(name.to_string()));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r[idx].as_num().expect("validated numeric cell"))
            .collect())
    }

    /// All codes of one categorical column.
    pub fn categorical_column(&self, name: &str) -> Result<Vec<u32>, TabularError> {
        let idx = self
            .schema
            .index_of(name)
            .ok_or_else(|| TabularError::NoSuchColumn(name.to_string()))?;
        if self.schema.column(idx).kind != ColumnKind::Categorical {
            return Err(TabularError::NotCategorical(name.to_string()));
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r[idx].as_cat().expect("validated categorical cell"))
            .collect())
    }

    /// The label column as 0/1 values.
    pub fn labels(&self) -> Result<Vec<u8>, TabularError> {
        let idx = self.schema.label_index().ok_or(TabularError::NoLabel)?;
        Ok(self
            .rows
            .iter()
            .map(|r| r[idx].as_cat().expect("validated label cell") as u8)
            .collect())
    }

    /// A new dataset with only the named columns, in the order given.
    /// Provenance carries over.
    pub fn select_columns(&self, names: &[String]) -> Result<Dataset, TabularError> {
        let mut indices = Vec::with_capacity(names.len());
        for n in names {
            indices.push(
                self.schema
                    .index_of(n)
                    .ok_or_else(|| TabularError::NoSuchColumn(n.clone()))?,
            );
        }
        let columns: Vec<ColumnSchema> = indices
            .iter()
            .map(|&i| self.schema.column(i).clone())
            .collect();
        let schema = Schema::new(columns)?;
        let rows = self
            .rows
            .iter()
            .map(|r| indices.iter().map(|&i| r[i]).collect())
            .collect();
        Ok(Dataset {
            schema,
            rows,
            provenance: self.provenance,
        })
    }

    /// Keeps columns whose group is in `groups`; the label column is kept
    /// when `include_label` is set regardless of `groups`.
    pub fn select_groups(
        &self,
        groups: &[FeatureGroup],
        include_label: bool,
    ) -> Result<Dataset, TabularError> {
        let names: Vec<String> = self
            .schema
            .columns()
            .iter()
            .filter(|c| {
                if c.group == FeatureGroup::Label {
                    include_label
                } else {
                    groups.contains(&c.group)
                }
            })
            .map(|c| c.name.clone())
            .collect();
        self.select_columns(&names)
    }

    /// Rows at the given indices, in the given order. Provenance carries
    /// over.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: self.provenance,
        }
    }

    /// A copy whose label column is treated as an ordinary feature.
    pub fn label_as_feature(&self) -> Result<Dataset, TabularError> {
        let idx = self.schema.label_index().ok_or(TabularError::NoLabel)?;
        let name = self.schema.column(idx).name().to_string();
        let schema = self.schema.with_group(&name, FeatureGroup::Other)?;
        Ok(Dataset {
            schema,
            rows: self.rows.clone(),
            provenance: self.provenance,
        })
    }

    /// A copy with the named column promoted back to the label group.
    pub fn column_as_label(&self, name: &str) -> Result<Dataset, TabularError> {
        let schema = self.schema.with_group(name, FeatureGroup::Label)?;
        Ok(Dataset {
            schema,
            rows: self.rows.clone(),
            provenance: self.provenance,
        })
    }

    /// Stacks two datasets with identical schemas. The result keeps the
    /// provenance of `self` only if both sides agree, otherwise it is an
    /// error: mixed-origin rows have no single provenance.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset, TabularError> {
        if self.schema != other.schema {
            return Err(TabularError::Schema(
                "cannot concatenate datasets with different schemas".into(),
            ));
        }
        if self.provenance != other.provenance {
            return Err(TabularError::Schema(
                "cannot concatenate datasets with different provenance".into(),
            ));
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(Dataset {
            schema: self.schema.clone(),
            rows,
            provenance: self.provenance,
        })
    }
}
