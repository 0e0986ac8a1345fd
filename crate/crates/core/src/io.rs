//! File formats: trace CSV with a JSON metadata sidecar, JSON documents
//! (fit results, reports, configuration) and the power-law point table.
//!
//! Frequencies in files are ordinary frequencies in Hz.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::PowerLawPoint;
use crate::spectra::{CoupledModeParamsHz, SpectrumTrace, TraceMeta, TraceValues};
use crate::units::{to_angular, to_hz};

pub const COMPLEX_HEADER: [&str; 3] = ["freq_hz", "re_s21", "im_s21"];
pub const POWER_HEADER: [&str; 2] = ["freq_hz", "power"];
pub const POWER_LAW_HEADER: [&str; 5] = ["alpha_d", "g_hz", "stark_hz", "g_std_hz", "stark_std_hz"];

/// Metadata sidecar of a trace CSV.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceSidecar {
    pub drive_freq_hz: Option<f64>,
    pub drive_amp: Option<f64>,
    pub seed: Option<u64>,
    pub params: Option<CoupledModeParamsHz>,
}

impl From<&TraceMeta> for TraceSidecar {
    fn from(m: &TraceMeta) -> Self {
        Self {
            drive_freq_hz: m.drive_freq.map(to_hz),
            drive_amp: m.drive_amp,
            seed: m.seed,
            params: m.params.map(Into::into),
        }
    }
}

impl From<TraceSidecar> for TraceMeta {
    fn from(s: TraceSidecar) -> Self {
        Self {
            drive_freq: s.drive_freq_hz.map(to_angular),
            drive_amp: s.drive_amp,
            seed: s.seed,
            params: s.params.map(Into::into),
        }
    }
}

/// `trace.csv` → `trace.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
        }
        _ => Ok(()),
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        },
        _ => Error::parse(path, e.to_string()),
    }
}

/// Writes the trace values to `path` and its metadata to the sidecar.
pub fn write_trace(trace: &SpectrumTrace, path: &Path) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let freqs = trace.probe_freqs();
    let result = match trace.values() {
        TraceValues::Complex(v) => w.write_record(COMPLEX_HEADER).and_then(|_| {
            freqs.iter().zip(v).try_for_each(|(&f, z)| {
                w.write_record([to_hz(f).to_string(), z.re.to_string(), z.im.to_string()])
            })
        }),
        TraceValues::Power(v) => w.write_record(POWER_HEADER).and_then(|_| {
            freqs
                .iter()
                .zip(v)
                .try_for_each(|(&f, p)| w.write_record([to_hz(f).to_string(), p.to_string()]))
        }),
    };
    result.map_err(|e| csv_error(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    write_json(&sidecar_path(path), &TraceSidecar::from(&trace.meta))
}

fn parse_field(path: &Path, line: u64, key: &str, raw: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        Error::parse(path, format!("line {line}: column `{key}`: `{raw}` is not a number"))
    })
}

/// Reads a value table, checking the header matches one of the known layouts.
fn read_table(path: &Path, layouts: &[&[&str]]) -> Result<(usize, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    let layout = layouts
        .iter()
        .position(|l| l.len() == header.len() && l.iter().zip(&header).all(|(a, b)| a == b))
        .ok_or_else(|| {
            let expected: Vec<String> = layouts.iter().map(|l| l.join(",")).collect();
            Error::parse(
                path,
                format!("line 1: header `{}` is not one of: {}", header.join(","), expected.join(" | ")),
            )
        })?;
    let keys = layouts[layout];
    let mut rows = Vec::new();
    for record in r.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != keys.len() {
            return Err(Error::parse(
                path,
                format!("line {line}: expected {} fields, found {}", keys.len(), record.len()),
            ));
        }
        rows.push(
            keys.iter()
                .zip(record.iter())
                .map(|(k, raw)| parse_field(path, line, k, raw))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((layout, rows))
}

/// Single-document JSON form of a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceDocument {
    pub freq_hz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_s21: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im_s21: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power: Option<Vec<f64>>,
    #[serde(default)]
    pub meta: TraceSidecar,
}

impl From<&SpectrumTrace> for TraceDocument {
    fn from(t: &SpectrumTrace) -> Self {
        let freq_hz = t.probe_freqs().iter().map(|&f| to_hz(f)).collect();
        let meta = TraceSidecar::from(&t.meta);
        match t.values() {
            TraceValues::Complex(v) => Self {
                freq_hz,
                re_s21: Some(v.iter().map(|z| z.re).collect()),
                im_s21: Some(v.iter().map(|z| z.im).collect()),
                power: None,
                meta,
            },
            TraceValues::Power(v) => Self {
                freq_hz,
                re_s21: None,
                im_s21: None,
                power: Some(v.clone()),
                meta,
            },
        }
    }
}

impl TraceDocument {
    fn into_trace(self, path: &Path) -> Result<SpectrumTrace> {
        let values = match (self.re_s21, self.im_s21, self.power) {
            (Some(re), Some(im), None) if re.len() == im.len() => {
                TraceValues::Complex(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect())
            }
            (None, None, Some(p)) => TraceValues::Power(p),
            _ => {
                return Err(Error::parse(
                    path,
                    "trace needs equally long `re_s21` and `im_s21`, or `power` alone",
                ))
            }
        };
        let freqs = self.freq_hz.into_iter().map(to_angular).collect();
        SpectrumTrace::new(freqs, values, self.meta.into()).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Writes `<path>` as one JSON document.
pub fn write_trace_json(trace: &SpectrumTrace, path: &Path) -> Result<()> {
    write_json(path, &TraceDocument::from(trace))
}

/// Reads a trace from CSV (with optional sidecar) or, for a `.json`
/// extension, from a single [`TraceDocument`].
pub fn read_trace(path: &Path) -> Result<SpectrumTrace> {
    if path.extension().is_some_and(|e| e == "json") {
        return read_json::<TraceDocument>(path)?.into_trace(path);
    }
    let (layout, rows) = read_table(path, &[&COMPLEX_HEADER, &POWER_HEADER])?;
    let freqs = rows.iter().map(|r| to_angular(r[0])).collect();
    let values = if layout == 0 {
        TraceValues::Complex(rows.iter().map(|r| Complex64::new(r[1], r[2])).collect())
    } else {
        TraceValues::Power(rows.iter().map(|r| r[1]).collect())
    };
    let side = sidecar_path(path);
    let meta = if side.exists() {
        read_json::<TraceSidecar>(&side)?.into()
    } else {
        TraceMeta::default()
    };
    SpectrumTrace::new(freqs, values, meta).map_err(|e| Error::parse(path, e.to_string()))
}

/// Power-law table: `alpha_d,g_hz,stark_hz` with optional std-error columns.
pub fn read_power_law_points(path: &Path) -> Result<Vec<PowerLawPoint>> {
    let (layout, rows) = read_table(path, &[&POWER_LAW_HEADER[..3], &POWER_LAW_HEADER])?;
    Ok(rows
        .iter()
        .map(|r| PowerLawPoint {
            alpha_d: r[0],
            g: to_angular(r[1]),
            stark: to_angular(r[2]),
            g_std: (layout == 1).then(|| to_angular(r[3])),
            stark_std: (layout == 1).then(|| to_angular(r[4])),
        })
        .collect())
}

pub fn write_power_law_points(points: &[PowerLawPoint], path: &Path) -> Result<()> {
    create_parent(path)?;
    let with_std = points.iter().all(|p| p.g_std.is_some() && p.stark_std.is_some());
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: &[&str] = if with_std { &POWER_LAW_HEADER } else { &POWER_LAW_HEADER[..3] };
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for p in points {
        let mut row = vec![p.alpha_d.to_string(), to_hz(p.g).to_string(), to_hz(p.stark).to_string()];
        if with_std {
            row.push(to_hz(p.g_std.unwrap_or(0.0)).to_string());
            row.push(to_hz(p.stark_std.unwrap_or(0.0)).to_string());
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    fs::write(path, to_json_string(value)?).map_err(|e| Error::io(path, e))
}

/// Parses a JSON document; errors name the file, line and offending key.
pub fn parse_json<T: DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        let location = format!("line {} column {}", inner.line(), inner.column());
        if key == "." {
            Error::parse(path, format!("{location}: {inner}"))
        } else {
            Error::parse(path, format!("{location}: key `{key}`: {inner}"))
        }
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_json(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::FitConfig;

    #[test]
    fn json_error_names_line_and_key() {
        let text = "{\n  \"max_iterations\": 10,\n  \"gradient_tolerance\": \"tiny\"\n}";
        let err = parse_json::<FitConfig>(text, Path::new("fit.json")).unwrap_err().to_string();
        assert!(err.contains("fit.json"), "{err}");
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("gradient_tolerance"), "{err}");
    }

    #[test]
    fn unknown_key_is_named() {
        let text = "{\"max_iteration\": 10}";
        let err = parse_json::<FitConfig>(text, Path::new("c.json")).unwrap_err().to_string();
        assert!(err.contains("max_iteration"), "{err}");
    }
}
