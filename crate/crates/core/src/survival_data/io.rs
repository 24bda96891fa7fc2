use std::io::Write;
use std::path::Path;

use super::{CurvePoint, RiskPoint, SurvivalRecord};
use crate::{Error, Result};

/// One parsed line of an arm CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmRow {
    pub record: SurvivalRecord,
    pub group: Option<String>,
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| parse_err(path, 1, format!("missing column `{name}`")))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(path, line, format!("{other:?}")),
    }
}

fn field_f64(rec: &csv::StringRecord, idx: usize, path: &Path) -> Result<f64> {
    let line = rec.position().map_or(0, |p| p.line());
    let raw = rec.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("not a number: `{raw}`")))
}

/// Reads an arm CSV with header `time,event` (event coded 0/1). When
/// `group_column` is given, that column is read as the subgroup label.
pub fn read_arm_csv(path: &Path, group_column: Option<&str>) -> Result<Vec<ArmRow>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let t_idx = column(&headers, "time", path)?;
    let e_idx = column(&headers, "event", path)?;
    let g_idx = group_column
        .map(|g| column(&headers, g, path))
        .transpose()?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let time = field_f64(&rec, t_idx, path)?;
        let event = match rec.get(e_idx).unwrap_or("") {
            "1" => true,
            "0" => false,
            other => {
                return Err(parse_err(
                    path,
                    line,
                    format!("event must be 0 or 1, got `{other}`"),
                ))
            }
        };
        let group = g_idx.map(|g| rec.get(g).unwrap_or("").to_string());
        rows.push(ArmRow {
            record: SurvivalRecord::new(time, event),
            group,
        });
    }
    Ok(rows)
}

/// Reads digitized curve coordinates, header `time,survival`.
pub fn read_coords_csv(path: &Path) -> Result<Vec<CurvePoint>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let t_idx = column(&headers, "time", path)?;
    let s_idx = column(&headers, "survival", path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            Ok(CurvePoint {
                time: field_f64(&rec, t_idx, path)?,
                survival: field_f64(&rec, s_idx, path)?,
            })
        })
        .collect()
}

/// Reads a published risk table, header `time,n_risk`.
pub fn read_risk_csv(path: &Path) -> Result<Vec<RiskPoint>> {
    let mut rdr = open(path)?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    let t_idx = column(&headers, "time", path)?;
    let n_idx = column(&headers, "n_risk", path)?;
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_err(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let raw = rec.get(n_idx).unwrap_or("");
            let n_risk = raw.parse::<u64>().map_err(|_| {
                parse_err(path, line, format!("n_risk must be a count, got `{raw}`"))
            })?;
            Ok(RiskPoint {
                time: field_f64(&rec, t_idx, path)?,
                n_risk,
            })
        })
        .collect()
}

pub fn write_arm_csv<W: Write>(records: &[SurvivalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("{other:?}")),
    };
    w.write_record(["time", "event"]).map_err(io)?;
    for r in records {
        w.write_record([r.time.to_string(), u8::from(r.event).to_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str, body: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("pie-io-{}-{name}", std::process::id()));
        std::fs::write(&dir, body).unwrap();
        dir
    }

    #[test]
    fn reads_arm_with_group() {
        let p = tmp("arm.csv", "time,event,pdl1\n2.5,1,pos\n# note\n3,0,neg\n");
        let rows = read_arm_csv(&p, Some("pdl1")).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].record, SurvivalRecord::new(2.5, true));
        assert_eq!(rows[1].group.as_deref(), Some("neg"));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn bad_event_code_is_parse_error() {
        let p = tmp("bad.csv", "time,event\n2.5,2\n");
        let err = read_arm_csv(&p, None).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn missing_column_is_reported() {
        let p = tmp("nocol.csv", "t,event\n1,1\n");
        assert!(matches!(read_arm_csv(&p, None), Err(Error::Parse { .. })));
        std::fs::remove_file(p).ok();
    }

    #[test]
    fn write_then_read() {
        let recs = vec![
            SurvivalRecord::new(1.25, true),
            SurvivalRecord::new(3.0, false),
        ];
        let mut buf = Vec::new();
        write_arm_csv(&recs, &mut buf).unwrap();
        let p = tmp("rt.csv", std::str::from_utf8(&buf).unwrap());
        let back: Vec<_> = read_arm_csv(&p, None)
            .unwrap()
            .into_iter()
            .map(|r| r.record)
            .collect();
        assert_eq!(back, recs);
        std::fs::remove_file(p).ok();
    }
}
