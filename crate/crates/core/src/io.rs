//! CSV serialization of [`LabeledDataset`] and atomic file output.
//!
//! Schema: header row with `id`, `f0..f{d-1}`, `group`, `observed`, and an
//! optional `gold`. Group values are non-negative integers; they are mapped
//! to dense indices in ascending order and the original values kept as the
//! dataset's group sidecar. Row numbers in errors count data rows from 0.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::dataset::{DatasetParts, LabeledDataset};
use crate::error::{Error, Result};

struct Layout {
    id: usize,
    features: Vec<usize>,
    group: usize,
    observed: usize,
    gold: Option<usize>,
}

fn layout(headers: &csv::StringRecord) -> Result<Layout> {
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    let required = |name: &str| {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let d = headers
        .iter()
        .filter(|h| {
            h.strip_prefix('f')
                .is_some_and(|rest| rest.parse::<usize>().is_ok())
        })
        .count();
    let features = (0..d)
        .map(|j| required(&format!("f{j}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Layout {
        id: required("id")?,
        features,
        group: required("group")?,
        observed: required("observed")?,
        gold: position.get("gold").copied(),
    })
}

fn cell<'r>(record: &'r csv::StringRecord, row: usize, col: usize, name: &str) -> Result<&'r str> {
    record.get(col).ok_or_else(|| Error::Parse {
        row,
        column: name.to_string(),
        message: "missing cell".into(),
    })
}

fn parse<T: std::str::FromStr>(raw: &str, row: usize, name: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| Error::Parse {
        row,
        column: name.to_string(),
        message: format!("cannot parse {raw:?}: {e}"),
    })
}

pub fn read_csv_from<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let layout = layout(rdr.headers()?)?;
    let d = layout.features.len();

    let mut features = Vec::new();
    let mut raw_groups = Vec::new();
    let mut observed = Vec::new();
    let mut gold = layout.gold.map(|_| Vec::new());
    let mut ids = Vec::new();
    let mut seen = HashMap::new();

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let id = cell(&record, row, layout.id, "id")?.to_string();
        if seen.insert(id.clone(), row).is_some() {
            return Err(Error::DuplicateId { row, id });
        }
        ids.push(id);
        for (j, &col) in layout.features.iter().enumerate() {
            let name = format!("f{j}");
            let value: f64 = parse(cell(&record, row, col, &name)?, row, &name)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteFeature { row, column: j });
            }
            features.push(value);
        }
        raw_groups.push(parse::<u64>(
            cell(&record, row, layout.group, "group")?,
            row,
            "group",
        )?);
        observed.push(parse_label(&record, row, layout.observed, "observed")?);
        if let (Some(col), Some(gold)) = (layout.gold, gold.as_mut()) {
            gold.push(parse_label(&record, row, col, "gold")?);
        }
    }

    let group_values: Vec<u64> = raw_groups
        .iter()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let dense: HashMap<u64, usize> = group_values
        .iter()
        .enumerate()
        .map(|(i, &v)| (v, i))
        .collect();
    let n = ids.len();
    let features =
        Array2::from_shape_vec((n, d), features).expect("row-major buffer has n*d cells");

    DatasetParts {
        features,
        groups: raw_groups.iter().map(|v| dense[v]).collect(),
        k: Some(group_values.len()),
        group_values: Some(group_values),
        observed,
        gold,
        ids,
    }
    .validate()
}

fn parse_label(record: &csv::StringRecord, row: usize, col: usize, name: &str) -> Result<u8> {
    let value: i64 = parse(cell(record, row, col, name)?, row, name)?;
    match value {
        0 | 1 => Ok(value as u8),
        _ => Err(Error::NonBinaryLabel {
            field: if name == "gold" { "gold" } else { "observed" },
            row,
            value,
        }),
    }
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(std::io::BufReader::new(file))
}

pub fn write_csv_to<W: Write>(dataset: &LabeledDataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((0..dataset.d()).map(|j| format!("f{j}")));
    header.extend(["group".to_string(), "observed".to_string()]);
    if dataset.gold().is_some() {
        header.push("gold".into());
    }
    wtr.write_record(&header)?;

    let features = dataset.features();
    for i in 0..dataset.n() {
        let mut record = Vec::with_capacity(header.len());
        record.push(dataset.ids()[i].clone());
        // `Display` for f64 prints the shortest string that parses back exactly.
        record.extend(features.row(i).iter().map(|v| v.to_string()));
        record.push(dataset.group_values()[dataset.groups()[i]].to_string());
        record.push(dataset.observed()[i].to_string());
        if let Some(gold) = dataset.gold() {
            record.push(gold[i].to_string());
        }
        wtr.write_record(&record)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn write_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_csv_to(dataset, &mut buf)?;
    write_atomic(path, &buf)
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "id,f0,f1,group,observed\na,1.5,2,0,1\nb,-0.25,3e2,1,0\n";

    #[test]
    fn reads_without_gold() {
        let ds = read_csv_from(BASIC.as_bytes()).unwrap();
        assert_eq!((ds.n(), ds.d(), ds.k()), (2, 2, 2));
        assert!(ds.gold().is_none());
        assert_eq!(ds.features()[[1, 1]], 300.0);
    }

    #[test]
    fn reads_with_gold_and_sparse_group_values() {
        let text = "id,f0,group,observed,gold\nx,0.1,7,1,0\ny,0.2,3,0,0\nz,0.3,7,0,1\n";
        let ds = read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(ds.gold(), Some(&[0u8, 0, 1][..]));
        assert_eq!(ds.group_values(), &[3, 7]);
        assert_eq!(ds.groups(), &[1, 0, 1]);
    }

    #[test]
    fn column_order_is_free() {
        let text = "observed,group,f1,id,f0\n1,0,2.0,a,1.0\n";
        let ds = read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(ds.features().row(0).to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn missing_column() {
        let err = read_csv_from("id,f0,group\na,1,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "observed"));
        let err = read_csv_from("id,f1,group,observed\na,1,0,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "f0"));
    }

    #[test]
    fn unparseable_cell_names_row_and_column() {
        let err =
            read_csv_from("id,f0,group,observed\na,1,0,1\nb,oops,0,1\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, column, .. } => assert_eq!((row, column.as_str()), (1, "f0")),
            other => panic!("unexpected {other:?}"),
        }
        let err = read_csv_from("id,f0,group,observed\na,1,0,2\n".as_bytes()).unwrap_err();
        assert!(matches!(
            err,
            Error::NonBinaryLabel {
                row: 0,
                value: 2,
                ..
            }
        ));
    }

    #[test]
    fn duplicate_id() {
        let err = read_csv_from("id,f0,group,observed\na,1,0,1\na,2,0,0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DuplicateId { row: 1, .. }));
    }

    #[test]
    fn rewrite_parses_to_same_values() {
        let ds = read_csv_from(BASIC.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_csv_to(&ds, &mut buf).unwrap();
        assert_eq!(read_csv_from(buf.as_slice()).unwrap(), ds);
    }
}
