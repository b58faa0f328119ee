//! CSV files for rows, TOML sidecars for schemas.
//!
//! Rows travel as plain UTF-8 CSV with a header. Numerics print through
//! `f64`'s `Display`, which emits the shortest decimal string that parses
//! back to the identical bit pattern, so a save/load cycle is lossless.
//! Categoricals travel as their category strings; the schema forbids the
//! characters that would need quoting.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Cell, ColumnKind, ColumnSchema, Dataset, FeatureGroup, Schema, TabularError};

fn io_err(path: &Path, source: std::io::Error) -> TabularError {
    TabularError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn csv_err(path: &Path, err: csv::Error) -> TabularError {
    TabularError::Csv {
        path: path.display().to_string(),
        msg: err.to_string(),
    }
}

/// Writes rows as CSV with one header line of column names.
pub fn save_csv(data: &Dataset, path: &Path) -> Result<(), TabularError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let names: Vec<&str> = data.schema().columns().iter().map(|c| c.name()).collect();
    w.write_record(&names).map_err(|e| csv_err(path, e))?;
    let mut record = Vec::with_capacity(names.len());
    for row in data.rows() {
        record.clear();
        for (col, cell) in data.schema().columns().iter().zip(row) {
            match cell {
                Cell::Num(v) => record.push(format!("{v}")),
                Cell::Cat(c) => record.push(col.categories()[*c as usize].clone()),
            }
        }
        w.write_record(&record).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Reads CSV rows against a known schema.
///
/// The header must list exactly the schema's column names in order. Numeric
/// fields must parse to finite floats; categorical fields must be listed in
/// the column's category set. The loaded dataset has real provenance.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Dataset, TabularError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;

    let headers = reader.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.len() != schema.len() {
        return Err(TabularError::Csv {
            path: path.display().to_string(),
            msg: format!(
                "header has {} columns, schema has {}",
                headers.len(),
                schema.len()
            ),
        });
    }
    for (i, col) in schema.columns().iter().enumerate() {
        if headers.get(i) != Some(col.name()) {
            return Err(TabularError::HeaderMismatch {
                position: i,
                expected: col.name().to_string(),
                found: headers.get(i).unwrap_or("").to_string(),
            });
        }
    }

    let lookups: Vec<Option<HashMap<&str, u32>>> = schema
        .columns()
        .iter()
        .map(|col| match col.kind() {
            ColumnKind::Numeric => None,
            ColumnKind::Categorical => Some(
                col.categories()
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (c.as_str(), i as u32))
                    .collect(),
            ),
        })
        .collect();

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(path, e))?;
        if record.len() != schema.len() {
            return Err(TabularError::RowWidth {
                row: r,
                found: record.len(),
                expected: schema.len(),
            });
        }
        let mut row = Vec::with_capacity(schema.len());
        for (i, col) in schema.columns().iter().enumerate() {
            let field = record.get(i).unwrap_or("");
            match &lookups[i] {
                None => {
                    let v: f64 = field.parse().map_err(|_| TabularError::BadCell {
                        row: r,
                        column: col.name().to_string(),
                        msg: format!("cannot parse {field:?} as a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(TabularError::BadCell {
                            row: r,
                            column: col.name().to_string(),
                            msg: format!("non-finite value {field:?}"),
                        });
                    }
                    row.push(Cell::Num(v));
                }
                Some(lookup) => {
                    let code = lookup.get(field).ok_or_else(|| TabularError::BadCell {
                        row: r,
                        column: col.name().to_string(),
                        msg: format!("unknown category {field:?}"),
                    })?;
                    row.push(Cell::Cat(*code));
                }
            }
        }
        rows.push(row);
    }
    Dataset::new(schema.clone(), rows)
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    column: Vec<ColumnDoc>,
}

#[derive(Serialize, Deserialize)]
struct ColumnDoc {
    name: String,
    kind: ColumnKind,
    group: FeatureGroup,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    categories: Vec<String>,
}

/// Schema rendered as a TOML document.
pub fn schema_to_text(schema: &Schema) -> String {
    let doc = SchemaDoc {
        column: schema
            .columns()
            .iter()
            .map(|c| ColumnDoc {
                name: c.name().to_string(),
                kind: c.kind(),
                group: c.group(),
                categories: c.categories().to_vec(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("schema serializes")
}

/// Parses a TOML schema document, re-running full validation.
pub fn schema_from_text(text: &str) -> Result<Schema, TabularError> {
    let doc: SchemaDoc =
        toml::from_str(text).map_err(|e| TabularError::Schema(e.to_string()))?;
    let mut columns = Vec::with_capacity(doc.column.len());
    for c in doc.column {
        let col = match c.kind {
            ColumnKind::Numeric => {
                if !c.categories.is_empty() {
                    return Err(TabularError::Schema(format!(
                        "numeric column {:?} must not list categories",
                        c.name
                    )));
                }
                ColumnSchema::numeric(c.name, c.group)?
            }
            ColumnKind::Categorical => ColumnSchema::categorical(c.name, c.group, c.categories)?,
        };
        columns.push(col);
    }
    Schema::new(columns)
}

/// Writes the schema sidecar as TOML.
pub fn save_schema(schema: &Schema, path: &Path) -> Result<(), TabularError> {
    fs::write(path, schema_to_text(schema)).map_err(|e| io_err(path, e))
}

/// Reads a schema sidecar, re-running full validation.
pub fn load_schema(path: &Path) -> Result<Schema, TabularError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    schema_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn schema() -> Schema {
        Schema::new(vec![
            ColumnSchema::numeric("amount", FeatureGroup::Fin).unwrap(),
            ColumnSchema::categorical(
                "grade",
                FeatureGroup::Fin,
                vec!["A".into(), "B".into(), "C".into()],
            )
            .unwrap(),
            ColumnSchema::label("y").unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let data = Dataset::new(
            schema(),
            vec![
                vec![Cell::Num(0.1), Cell::Cat(0), Cell::Cat(0)],
                vec![Cell::Num(-1.5e-12), Cell::Cat(2), Cell::Cat(1)],
                vec![Cell::Num(1.0 / 3.0), Cell::Cat(1), Cell::Cat(0)],
                vec![Cell::Num(9007199254740993.0), Cell::Cat(1), Cell::Cat(1)],
            ],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        save_csv(&data, &p).unwrap();
        let back = load_csv(&p, data.schema()).unwrap();
        assert_eq!(back.rows(), data.rows());
    }

    #[test]
    fn header_order_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let mut f = std::fs::File::create(&p).unwrap();
        writeln!(f, "grade,amount,y").unwrap();
        writeln!(f, "A,1.0,0").unwrap();
        drop(f);
        let err = load_csv(&p, &schema()).unwrap_err();
        assert!(matches!(err, TabularError::HeaderMismatch { position: 0, .. }));
    }

    #[test]
    fn rejects_unknown_category_and_bad_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        std::fs::write(&p, "amount,grade,y\n1.0,D,0\n").unwrap();
        assert!(matches!(
            load_csv(&p, &schema()),
            Err(TabularError::BadCell { .. })
        ));
        std::fs::write(&p, "amount,grade,y\nNaN,A,0\n").unwrap();
        assert!(load_csv(&p, &schema()).is_err());
        std::fs::write(&p, "amount,grade,y\noops,A,0\n").unwrap();
        assert!(load_csv(&p, &schema()).is_err());
    }

    #[test]
    fn schema_sidecar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("schema.toml");
        let s = schema();
        save_schema(&s, &p).unwrap();
        let back = load_schema(&p).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn sidecar_validation_still_applies() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("schema.toml");
        std::fs::write(
            &p,
            "[[column]]\nname = \"x\"\nkind = \"categorical\"\ngroup = \"other\"\ncategories = [\"a b\"]\n",
        )
        .unwrap();
        assert!(load_schema(&p).is_err());
    }
}
