//! Readers and writers for the on-disk formats.
//!
//! * profiles CSV: `id,group,start_date,v0,v1,...`, kWh per half-hour, empty cells are missing;
//! * QMR CSV: `customer_id,class,mean_daily_kwh` (the demand may be empty);
//! * topology JSON: array of `{feeder_id, customers, substation_csv?}`;
//! * substation CSV: `timestamp,kwh`;
//! * catalogue JSON: array of `{type_tag, weekly_shape, non_operational_shape, holiday_rule}`;
//! * calendar JSON: array of `{date, kind}`.
//!
//! Floats are written in shortest round-trip form, so reading back is lossless.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::catalogue::StandardProfile;
use crate::error::{Error, Result};
use crate::ingestion::annualize::{HolidayCalendar, HolidayEntry};
use crate::ingestion::clean::RawSeries;
use crate::model::{CustomerClass, GroupKey, MonitoredProfile};
use crate::series::{slot_timestamp, HalfHourlySeries, SLOTS_PER_DAY};

pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M";

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn io_err(p: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path_str(p),
        source,
    }
}

pub(crate) fn parse_err(p: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path_str(p),
        line,
        message: message.into(),
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(io_err(dir))?;
        }
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::domain(format!("{} has no file name", path.display())))?;
    let mut tmp = PathBuf::from(path);
    tmp.set_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        f.write_all(bytes).map_err(io_err(&tmp))?;
        f.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| Error::Json {
        path: path_str(path),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path_str(path),
        source,
    })
}

/// Renders rows as CSV text.
pub fn csv_bytes<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
    let wrap = |source| Error::Csv {
        path: "<memory>".into(),
        source,
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        let row: Vec<String> = row.into_iter().collect();
        w.write_record(&row).map_err(wrap)?;
    }
    w.into_inner().map_err(|e| Error::domain(format!("csv flush: {e}")))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| Error::Csv {
            path: path_str(path),
            source,
        })
}

pub(crate) fn records(path: &Path) -> Result<(csv::StringRecord, Vec<(usize, csv::StringRecord)>)> {
    let mut r = csv_reader(path)?;
    let header = r
        .headers()
        .map_err(|source| Error::Csv {
            path: path_str(path),
            source,
        })?
        .clone();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|source| Error::Csv {
            path: path_str(path),
            source,
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        out.push((line, rec));
    }
    Ok((header, out))
}

pub(crate) fn parse_opt_f64(path: &Path, line: usize, s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("not a number: {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite number {s:?}")));
    }
    Ok(Some(v))
}

/// One row of a profiles CSV before cleaning.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub line: usize,
    pub id: String,
    pub group: GroupKey,
    pub raw: RawSeries,
}

/// Reads a profiles CSV. `valid_groups` lists the labels accepted in the group column.
pub fn read_profiles_csv(path: &Path, valid_groups: &[String]) -> Result<Vec<ProfileRow>> {
    let (header, rows) = records(path)?;
    let expected = ["id", "group", "start_date"];
    if header.len() < 3 || header.iter().take(3).ne(expected.iter().copied()) {
        return Err(parse_err(
            path,
            1,
            "header must start with id,group,start_date,v0,...",
        ));
    }
    let mut out = Vec::with_capacity(rows.len());
    for (line, rec) in rows {
        if rec.len() < 3 {
            return Err(parse_err(path, line, "row has fewer than 3 fields"));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(parse_err(path, line, "empty profile id"));
        }
        let label = &rec[1];
        let group: GroupKey = match label.parse() {
            Ok(g) if valid_groups.iter().any(|v| *v == GroupKey::to_string(&g)) => g,
            _ => {
                return Err(parse_err(
                    path,
                    line,
                    format!(
                        "unknown group {label:?}; valid groups: {}",
                        valid_groups.join(", ")
                    ),
                ))
            }
        };
        let start = NaiveDate::parse_from_str(&rec[2], "%Y-%m-%d")
            .map_err(|e| parse_err(path, line, format!("bad start_date {:?}: {e}", &rec[2])))?;
        let values = rec
            .iter()
            .skip(3)
            .map(|s| parse_opt_f64(path, line, s))
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() || values.len() % SLOTS_PER_DAY != 0 {
            return Err(parse_err(
                path,
                line,
                format!("{} values is not a whole number of days", values.len()),
            ));
        }
        let allows_negative = matches!(group, GroupKey::Domestic { has_solar: true, .. });
        out.push(ProfileRow {
            line,
            id,
            group,
            raw: RawSeries {
                start,
                values,
                allows_negative,
            },
        });
    }
    Ok(out)
}

pub fn write_profiles_csv(path: &Path, profiles: &[MonitoredProfile]) -> Result<()> {
    let width = profiles.iter().map(|p| p.series.len()).max().unwrap_or(0);
    let mut header: Vec<String> = vec!["id".into(), "group".into(), "start_date".into()];
    header.extend((0..width).map(|i| format!("v{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = profiles.iter().map(|p| {
        let mut row = vec![
            p.id.clone(),
            p.group.to_string(),
            p.series.start().format("%Y-%m-%d").to_string(),
        ];
        row.extend(p.series.values().iter().map(|v| v.to_string()));
        row
    });
    write_atomic(path, &csv_bytes(&header_refs, rows)?)
}

/// A row of the QMR file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QmrRecord {
    pub customer_id: String,
    pub class: CustomerClass,
    pub mean_daily_kwh: Option<f64>,
}

pub fn read_qmr_csv(path: &Path) -> Result<Vec<QmrRecord>> {
    let (header, rows) = records(path)?;
    if header.iter().ne(["customer_id", "class", "mean_daily_kwh"].iter().copied()) {
        return Err(parse_err(path, 1, "header must be customer_id,class,mean_daily_kwh"));
    }
    rows.into_iter()
        .map(|(line, rec)| {
            if rec.len() != 3 {
                return Err(parse_err(path, line, "expected 3 fields"));
            }
            let class = rec[1]
                .parse()
                .map_err(|e: Error| parse_err(path, line, e.to_string()))?;
            Ok(QmrRecord {
                customer_id: rec[0].to_string(),
                class,
                mean_daily_kwh: parse_opt_f64(path, line, &rec[2])?,
            })
        })
        .collect()
}

pub fn write_qmr_csv(path: &Path, records: &[QmrRecord]) -> Result<()> {
    let rows = records.iter().map(|r| {
        vec![
            r.customer_id.clone(),
            r.class.to_string(),
            r.mean_daily_kwh.map(|v| v.to_string()).unwrap_or_default(),
        ]
    });
    write_atomic(
        path,
        &csv_bytes(&["customer_id", "class", "mean_daily_kwh"], rows)?,
    )
}

/// Customers on a feeder and where its measured demand lives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederTopology {
    pub feeder_id: String,
    pub customers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substation_csv: Option<String>,
}

pub fn read_topology(path: &Path) -> Result<Vec<FeederTopology>> {
    read_json(path)
}

pub fn write_topology(path: &Path, feeders: &[FeederTopology]) -> Result<()> {
    write_json(path, feeders)
}

/// Reads a `timestamp,kwh` file; timestamps must run contiguously from 00:00.
pub fn read_substation_csv(path: &Path) -> Result<RawSeries> {
    let (header, rows) = records(path)?;
    if header.iter().ne(["timestamp", "kwh"].iter().copied()) {
        return Err(parse_err(path, 1, "header must be timestamp,kwh"));
    }
    let mut start = None;
    let mut values = Vec::with_capacity(rows.len());
    for (i, (line, rec)) in rows.iter().enumerate() {
        if rec.len() != 2 {
            return Err(parse_err(path, *line, "expected 2 fields"));
        }
        let ts = NaiveDateTime::parse_from_str(&rec[0], TIMESTAMP_FORMAT)
            .map_err(|e| parse_err(path, *line, format!("bad timestamp {:?}: {e}", &rec[0])))?;
        let first = *start.get_or_insert(ts.date());
        let expected = slot_timestamp(
            first + chrono::Days::new((i / SLOTS_PER_DAY) as u64),
            i % SLOTS_PER_DAY,
        );
        if ts != expected {
            return Err(parse_err(
                path,
                *line,
                format!("expected timestamp {}, found {}", expected.format(TIMESTAMP_FORMAT), &rec[0]),
            ));
        }
        values.push(parse_opt_f64(path, *line, &rec[1])?);
    }
    let start = start.ok_or_else(|| parse_err(path, 1, "no readings"))?;
    if values.len() % SLOTS_PER_DAY != 0 {
        return Err(parse_err(path, rows.len() + 1, "file does not end on a whole day"));
    }
    Ok(RawSeries {
        start,
        values,
        allows_negative: false,
    })
}

pub fn substation_csv_bytes(series: &HalfHourlySeries) -> Result<Vec<u8>> {
    let rows = series.values().iter().enumerate().map(|(t, v)| {
        let (date, h) = series.slot_datetime(t);
        vec![
            slot_timestamp(date, h).format(TIMESTAMP_FORMAT).to_string(),
            v.to_string(),
        ]
    });
    csv_bytes(&["timestamp", "kwh"], rows)
}

pub fn write_substation_csv(path: &Path, series: &HalfHourlySeries) -> Result<()> {
    write_atomic(path, &substation_csv_bytes(series)?)
}

pub fn read_catalogue(path: &Path) -> Result<Vec<StandardProfile>> {
    let cat: Vec<StandardProfile> = read_json(path)?;
    for sp in &cat {
        sp.validate()?;
    }
    Ok(cat)
}

pub fn write_catalogue(path: &Path, catalogue: &[StandardProfile]) -> Result<()> {
    write_json(path, catalogue)
}

pub fn read_calendar(path: &Path) -> Result<HolidayCalendar> {
    let entries: Vec<HolidayEntry> = read_json(path)?;
    Ok(HolidayCalendar::from_entries(entries))
}

pub fn write_calendar(path: &Path, cal: &HolidayCalendar) -> Result<()> {
    write_json(path, &cal.entries())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::HalfHourlySeries;

    fn monday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2015, 1, 5).unwrap()
    }

    fn labels() -> Vec<String> {
        let mut v = GroupKey::domestic_labels();
        v.push("ND:school".into());
        v
    }

    #[test]
    fn profiles_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profiles.csv");
        let vals: Vec<f64> = (0..96).map(|i| 0.1 + i as f64 / 7.0).collect();
        let p = MonitoredProfile::new(
            "m1",
            "PC1-FGH".parse().unwrap(),
            HalfHourlySeries::new(monday(), vals.clone()).unwrap(),
        )
        .unwrap();
        write_profiles_csv(&path, &[p]).unwrap();
        let rows = read_profiles_csv(&path, &labels()).unwrap();
        assert_eq!(rows.len(), 1);
        let back: Vec<f64> = rows[0].raw.values.iter().map(|v| v.unwrap()).collect();
        assert_eq!(back, vals);
        assert_eq!(rows[0].line, 2);
    }

    #[test]
    fn unknown_group_lists_valid_labels() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut text = String::from("id,group,start_date");
        for i in 0..48 {
            text.push_str(&format!(",v{i}"));
        }
        text.push('\n');
        text.push_str("a,PC9-A,2015-01-05");
        text.push_str(&",1".repeat(48));
        text.push('\n');
        fs::write(&path, text).unwrap();
        let err = read_profiles_csv(&path, &labels()).unwrap_err().to_string();
        assert!(err.contains(":2:"), "{err}");
        assert!(err.contains("PC1-A") && err.contains("ND:school"), "{err}");
    }

    #[test]
    fn malformed_number_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let mut text = String::from("id,group,start_date");
        for i in 0..48 {
            text.push_str(&format!(",v{i}"));
        }
        text.push('\n');
        for (k, cell) in ["1", "x"].iter().enumerate() {
            text.push_str(&format!("p{k},PC1-A,2015-01-05"));
            text.push_str(&format!(",{cell}").repeat(48));
            text.push('\n');
        }
        fs::write(&path, text).unwrap();
        let err = read_profiles_csv(&path, &labels()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn substation_round_trip_and_gap_detection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let s = HalfHourlySeries::new(monday(), (0..96).map(|i| i as f64 * 0.3).collect()).unwrap();
        write_substation_csv(&path, &s).unwrap();
        let back = read_substation_csv(&path).unwrap().into_series().unwrap();
        assert_eq!(back, s);
        let text = fs::read_to_string(&path).unwrap();
        let broken: String = text
            .lines()
            .enumerate()
            .filter(|(i, _)| *i != 5)
            .map(|(_, l)| format!("{l}\n"))
            .collect();
        fs::write(&path, broken).unwrap();
        assert!(read_substation_csv(&path).is_err());
    }

    #[test]
    fn qmr_allows_empty_demand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.csv");
        let recs = vec![
            QmrRecord {
                customer_id: "c1".into(),
                class: "PC2-C".parse().unwrap(),
                mean_daily_kwh: Some(12.25),
            },
            QmrRecord {
                customer_id: "c2".into(),
                class: "ND:school".parse().unwrap(),
                mean_daily_kwh: None,
            },
        ];
        write_qmr_csv(&path, &recs).unwrap();
        assert_eq!(read_qmr_csv(&path).unwrap(), recs);
    }

    #[test]
    fn atomic_write_leaves_no_temp_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/x.json");
        write_json(&path, &vec![1, 2, 3]).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path().join("sub"))
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("x.json")]);
    }
}
