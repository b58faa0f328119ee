//! Line-based text form of a fitted [`TransformSpec`], for audit and for
//! embedding inside saved generator files.
//!
//! ```text
//! transformspec v1
//! max_modes 5
//! width 7
//! columns 3
//! column amount fin numeric 2
//! mode -2.01 0.49 0.33
//! mode 6.02 1.01 0.67
//! column grade fin categorical 3
//! categories A|B|C
//! ```
//!
//! Floats are written with `f64`'s shortest round-trip `Display`, so
//! parsing the text back reproduces the exact spec. Category strings may
//! not contain `|` (the schema already forbids it), which makes the join
//! unambiguous.

use super::{Encoder, Mode, TransformError, TransformSpec, STD_FLOOR};
use crate::tabular::{ColumnSchema, FeatureGroup, Schema};

fn group_name(g: FeatureGroup) -> &'static str {
    match g {
        FeatureGroup::Fin => "fin",
        FeatureGroup::Degree => "degree",
        FeatureGroup::SocInt => "socint",
        FeatureGroup::Label => "label",
        FeatureGroup::Other => "other",
    }
}

fn parse_group(s: &str, line: usize) -> Result<FeatureGroup, TransformError> {
    match s {
        "fin" => Ok(FeatureGroup::Fin),
        "degree" => Ok(FeatureGroup::Degree),
        "socint" => Ok(FeatureGroup::SocInt),
        "label" => Ok(FeatureGroup::Label),
        "other" => Ok(FeatureGroup::Other),
        _ => Err(TransformError::Parse {
            line,
            msg: format!("unknown feature group {s:?}"),
        }),
    }
}

pub fn spec_to_text(spec: &TransformSpec) -> String {
    let mut out = String::new();
    out.push_str("transformspec v1\n");
    out.push_str(&format!("max_modes {}\n", spec.max_modes));
    out.push_str(&format!("width {}\n", spec.width));
    out.push_str(&format!("columns {}\n", spec.encoders.len()));
    for (i, encoder) in spec.encoders.iter().enumerate() {
        let col = spec.schema.column(i);
        match encoder {
            Encoder::Modes(modes) => {
                out.push_str(&format!(
                    "column {} {} numeric {}\n",
                    col.name(),
                    group_name(col.group()),
                    modes.len()
                ));
                for m in modes {
                    out.push_str(&format!("mode {} {} {}\n", m.mean, m.std, m.weight));
                }
            }
            Encoder::OneHot => {
                out.push_str(&format!(
                    "column {} {} categorical {}\n",
                    col.name(),
                    group_name(col.group()),
                    col.categories().len()
                ));
                out.push_str(&format!("categories {}\n", col.categories().join("|")));
            }
        }
    }
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    fn next(&mut self) -> Result<(usize, &'a str), TransformError> {
        match self.inner.next() {
            Some((i, l)) => Ok((i + 1, l)),
            None => Err(TransformError::Parse {
                line: 0,
                msg: "unexpected end of input".into(),
            }),
        }
    }
}

fn expect_tag<'a>(
    line: usize,
    text: &'a str,
    tag: &str,
) -> Result<&'a str, TransformError> {
    text.strip_prefix(tag)
        .map(str::trim)
        .ok_or_else(|| TransformError::Parse {
            line,
            msg: format!("expected {tag:?}"),
        })
}

fn parse_num<T: std::str::FromStr>(line: usize, s: &str) -> Result<T, TransformError> {
    s.parse().map_err(|_| TransformError::Parse {
        line,
        msg: format!("cannot parse {s:?}"),
    })
}

pub fn spec_from_text(text: &str) -> Result<TransformSpec, TransformError> {
    let mut lines = Lines::new(text);

    let (ln, header) = lines.next()?;
    if header.trim() != "transformspec v1" {
        return Err(TransformError::Parse {
            line: ln,
            msg: format!("unsupported header {header:?}"),
        });
    }
    let (ln, l) = lines.next()?;
    let max_modes: usize = parse_num(ln, expect_tag(ln, l, "max_modes ")?)?;
    if max_modes < 1 {
        return Err(TransformError::Parse {
            line: ln,
            msg: "max_modes must be at least 1".into(),
        });
    }
    let (ln, l) = lines.next()?;
    let width: usize = parse_num(ln, expect_tag(ln, l, "width ")?)?;
    let (ln, l) = lines.next()?;
    let n_columns: usize = parse_num(ln, expect_tag(ln, l, "columns ")?)?;

    let mut columns = Vec::with_capacity(n_columns);
    let mut encoders = Vec::with_capacity(n_columns);
    for _ in 0..n_columns {
        let (ln, l) = lines.next()?;
        let rest = expect_tag(ln, l, "column ")?;
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(TransformError::Parse {
                line: ln,
                msg: "column line needs: name group kind count".into(),
            });
        }
        let name = parts[0];
        let group = parse_group(parts[1], ln)?;
        let count: usize = parse_num(ln, parts[3])?;
        match parts[2] {
            "numeric" => {
                if count < 1 || count > max_modes {
                    return Err(TransformError::Parse {
                        line: ln,
                        msg: format!("mode count {count} outside 1..={max_modes}"),
                    });
                }
                let mut modes = Vec::with_capacity(count);
                for _ in 0..count {
                    let (mln, ml) = lines.next()?;
                    let rest = expect_tag(mln, ml, "mode ")?;
                    let nums: Vec<&str> = rest.split_whitespace().collect();
                    if nums.len() != 3 {
                        return Err(TransformError::Parse {
                            line: mln,
                            msg: "mode line needs: mean std weight".into(),
                        });
                    }
                    let mean: f64 = parse_num(mln, nums[0])?;
                    let std: f64 = parse_num(mln, nums[1])?;
                    let weight: f64 = parse_num(mln, nums[2])?;
                    if !mean.is_finite() || !std.is_finite() || std < STD_FLOOR {
                        return Err(TransformError::Parse {
                            line: mln,
                            msg: "mode mean/std out of range".into(),
                        });
                    }
                    if !(0.0..=1.0).contains(&weight) {
                        return Err(TransformError::Parse {
                            line: mln,
                            msg: format!("mode weight {weight} outside [0, 1]"),
                        });
                    }
                    modes.push(Mode { mean, std, weight });
                }
                let total: f64 = modes.iter().map(|m| m.weight).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(TransformError::Parse {
                        line: ln,
                        msg: format!("mode weights sum to {total}, expected 1"),
                    });
                }
                columns.push(ColumnSchema::numeric(name, group).map_err(|e| {
                    TransformError::Parse {
                        line: ln,
                        msg: e.to_string(),
                    }
                })?);
                encoders.push(Encoder::Modes(modes));
            }
            "categorical" => {
                let (cln, cl) = lines.next()?;
                let joined = expect_tag(cln, cl, "categories ")?;
                let cats: Vec<String> = joined.split('|').map(str::to_string).collect();
                if cats.len() != count {
                    return Err(TransformError::Parse {
                        line: cln,
                        msg: format!("expected {count} categories, found {}", cats.len()),
                    });
                }
                columns.push(
                    ColumnSchema::categorical(name, group, cats).map_err(|e| {
                        TransformError::Parse {
                            line: cln,
                            msg: e.to_string(),
                        }
                    })?,
                );
                encoders.push(Encoder::OneHot);
            }
            other => {
                return Err(TransformError::Parse {
                    line: ln,
                    msg: format!("unknown column kind {other:?}"),
                });
            }
        }
    }

    let schema = Schema::new(columns).map_err(|e| TransformError::Parse {
        line: 0,
        msg: e.to_string(),
    })?;
    let spec = TransformSpec::assemble(schema, encoders, max_modes);
    if spec.width != width {
        return Err(TransformError::Parse {
            line: 0,
            msg: format!("declared width {width} but columns add up to {}", spec.width),
        });
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Cell, Dataset};
    use crate::transform::fit_transform_spec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn fitted_spec() -> TransformSpec {
        let schema = Schema::new(vec![
            ColumnSchema::numeric("x", FeatureGroup::Fin).unwrap(),
            ColumnSchema::categorical("c", FeatureGroup::SocInt, vec!["u".into(), "v".into()])
                .unwrap(),
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n1 = Normal::new(-3.0, 0.7).unwrap();
        let n2 = Normal::new(4.0, 1.2).unwrap();
        let rows = (0..2_000)
            .map(|i| {
                let x = if i % 2 == 0 {
                    n1.sample(&mut rng)
                } else {
                    n2.sample(&mut rng)
                };
                vec![Cell::Num(x), Cell::Cat((i % 2) as u32)]
            })
            .collect();
        let d = Dataset::new(schema, rows).unwrap();
        fit_transform_spec(&d, 4, 17).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let spec = fitted_spec();
        let text = spec_to_text(&spec);
        let back = spec_from_text(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(spec_to_text(&back), text);
    }

    #[test]
    fn rejects_corrupted_input() {
        let spec = fitted_spec();
        let text = spec_to_text(&spec);

        let wrong_header = text.replace("transformspec v1", "transformspec v9");
        assert!(spec_from_text(&wrong_header).is_err());

        let bad_weight = text.replace("mode ", "mode nonsense ");
        assert!(spec_from_text(&bad_weight).is_err());

        let truncated: String = text.lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(spec_from_text(&truncated).is_err());
    }

    #[test]
    fn rejects_inconsistent_width() {
        let spec = fitted_spec();
        let text = spec_to_text(&spec);
        let declared = format!("width {}", spec.width());
        let wrong = text.replace(&declared, "width 99");
        assert!(spec_from_text(&wrong).is_err());
    }

    #[test]
    fn rejects_weights_not_summing_to_one() {
        let text = "transformspec v1\nmax_modes 2\nwidth 3\ncolumns 1\ncolumn x fin numeric 2\nmode 0 1 0.5\nmode 1 1 0.4\n";
        assert!(spec_from_text(text).is_err());
    }
}
