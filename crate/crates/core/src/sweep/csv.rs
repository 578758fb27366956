use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{RowStatus, SweepRow};
use crate::error::{Error, Result};
use crate::pauli::PauliDecomposition;

pub const CSV_COLUMNS: [&str; 25] = [
    "sweep_value",
    "delta1",
    "delta2",
    "e0",
    "h1x",
    "h1y",
    "h1z",
    "h2x",
    "h2y",
    "h2z",
    "jxx",
    "jxy",
    "jxz",
    "jyx",
    "jyy",
    "jyz",
    "jzx",
    "jzy",
    "jzz",
    "jxx_over_delta",
    "jyy_over_delta",
    "jzz_over_delta",
    "subspace_gap",
    "min_singular",
    "status",
];

/// 17 significant digits: parses back to the same bits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn record(row: &SweepRow) -> Vec<String> {
    let mut rec = vec![num(row.sweep_value), opt(row.delta1), opt(row.delta2)];
    match &row.coefficients {
        Some(p) => {
            rec.push(num(p.e0));
            rec.extend(p.h1.iter().chain(&p.h2).map(|&x| num(x)));
            rec.extend(p.j.iter().flatten().map(|&x| num(x)));
        }
        None => rec.extend(std::iter::repeat_n(String::new(), 16)),
    }
    match row.ratios {
        Some(r) => rec.extend(r.iter().map(|&x| num(x))),
        None => rec.extend(std::iter::repeat_n(String::new(), 3)),
    }
    rec.push(opt(row.subspace_gap));
    rec.push(opt(row.min_singular));
    rec.push(row.status.to_string());
    rec
}

/// Header plus one line per row; LF line endings.
pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = ::csv::WriterBuilder::new()
        .terminator(::csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for row in rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

/// Write to a temporary file in the destination directory, then rename.
pub fn write_csv_atomic(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    write_csv(&mut tmp, rows)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn parse_field(rec: &::csv::StringRecord, i: usize, record: usize) -> Result<Option<f64>> {
    let s = rec.get(i).unwrap_or("");
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::CsvFormat {
        record,
        message: format!("column {}: `{s}` is not a number", CSV_COLUMNS[i]),
    })
}

/// Read a table written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SweepRow>> {
    let mut r = ::csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?;
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::CsvFormat {
            record: 0,
            message: format!("unexpected header; expected {}", CSV_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let n = idx + 1;
        let bad = |message: String| Error::CsvFormat { record: n, message };
        let vals = (0..CSV_COLUMNS.len() - 1)
            .map(|i| parse_field(&rec, i, n))
            .collect::<Result<Vec<_>>>()?;
        let status = RowStatus::parse(rec.get(CSV_COLUMNS.len() - 1).unwrap_or(""))
            .ok_or_else(|| bad("unknown status".into()))?;
        let sweep_value = vals[0].ok_or_else(|| bad("missing sweep_value".into()))?;
        let all = |range: std::ops::Range<usize>| -> Result<Option<Vec<f64>>> {
            let got: Vec<Option<f64>> = vals[range].to_vec();
            if got.iter().all(Option::is_some) {
                Ok(Some(got.into_iter().flatten().collect()))
            } else if got.iter().all(Option::is_none) {
                Ok(None)
            } else {
                Err(bad("partially filled coefficient block".into()))
            }
        };
        let coefficients = all(3..19)?.map(|c| PauliDecomposition {
            e0: c[0],
            h1: [c[1], c[2], c[3]],
            h2: [c[4], c[5], c[6]],
            j: [[c[7], c[8], c[9]], [c[10], c[11], c[12]], [c[13], c[14], c[15]]],
        });
        let ratios = all(19..22)?.map(|r| [r[0], r[1], r[2]]);
        if (status == RowStatus::Ok) != (coefficients.is_some() && ratios.is_some()) {
            return Err(bad("coefficients must be present exactly when status is ok".into()));
        }
        rows.push(SweepRow {
            sweep_value,
            delta1: vals[1],
            delta2: vals[2],
            coefficients,
            ratios,
            subspace_gap: vals[22],
            min_singular: vals[23],
            status,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            -1e3f64..1e3,
            (-300i32..300, 1.0f64..10.0).prop_map(|(e, m)| m * 10f64.powi(e)),
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
        ]
    }

    fn row() -> impl Strategy<Value = SweepRow> {
        (
            finite(),
            proptest::collection::vec(finite(), 24),
            0usize..3,
        )
            .prop_map(|(v, x, s)| {
                let status = [RowStatus::Ok, RowStatus::Hybridized, RowStatus::Failed][s];
                let ok = status == RowStatus::Ok;
                SweepRow {
                    sweep_value: v,
                    delta1: (status != RowStatus::Failed).then_some(x[0]),
                    delta2: (status != RowStatus::Failed).then_some(x[1]),
                    coefficients: ok.then(|| PauliDecomposition {
                        e0: x[2],
                        h1: [x[3], x[4], x[5]],
                        h2: [x[6], x[7], x[8]],
                        j: [[x[9], x[10], x[11]], [x[12], x[13], x[14]], [x[15], x[16], x[17]]],
                    }),
                    ratios: ok.then_some([x[18], x[19], x[20]]),
                    subspace_gap: (status != RowStatus::Failed).then_some(x[21]),
                    min_singular: (status != RowStatus::Failed).then_some(x[22]),
                    status,
                }
            })
    }

    fn bits(rows: &[SweepRow]) -> Vec<Vec<u64>> {
        rows.iter()
            .map(|r| record(r).iter().filter_map(|s| s.parse::<f64>().ok()).map(f64::to_bits).collect())
            .collect()
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(rows in proptest::collection::vec(row(), 0..6)) {
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(bits(&back), bits(&rows));
            prop_assert_eq!(back.iter().map(|r| r.status).collect::<Vec<_>>(), rows.iter().map(|r| r.status).collect::<Vec<_>>());
            let mut again = Vec::new();
            write_csv(&mut again, &back).unwrap();
            prop_assert_eq!(again, buf);
        }
    }

    #[test]
    fn layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[SweepRow::failed(0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_COLUMNS.join(","));
        assert_eq!(lines[1], format!("5.0000000000000000e-1{}failed", ",".repeat(24)));
    }

    #[test]
    fn rejects_foreign_tables() {
        assert!(matches!(read_csv("a,b\n1,2\n".as_bytes()), Err(Error::CsvFormat { record: 0, .. })));
        let mut buf = Vec::new();
        write_csv(&mut buf, &[SweepRow::failed(0.5)]).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("failed", "ok");
        assert!(matches!(read_csv(text.as_bytes()), Err(Error::CsvFormat { record: 1, .. })));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        fs::write(&path, "stale").unwrap();
        write_csv_atomic(&path, &[SweepRow::failed(1.0)]).unwrap();
        let back = read_csv(fs::File::open(&path).unwrap()).unwrap();
        assert_eq!(back, vec![SweepRow::failed(1.0)]);
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
