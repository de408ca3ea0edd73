//! Series and snapshot CSV files. Numbers use the shortest round-trip decimal form.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::format::format_number;
use crate::functionals::EnergySample;
use crate::grid::RadialGrid;
use crate::solver::State;

pub const SERIES_HEADER: [&str; 11] = [
    "t",
    "F",
    "D",
    "f_norm2",
    "g_norm2",
    "mass_u",
    "mass_v",
    "sup_u",
    "sup_v",
    "grad_v_norm2",
    "lp_norm",
];

pub const SNAPSHOT_HEADER: [&str; 3] = ["r", "u", "v"];

/// Relative tolerance on snapshot radii against the grid centres.
const RADIUS_TOL: f64 = 1e-12;

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("output path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_error(context: &str, e: csv::Error) -> Error {
    Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    }
}

fn to_csv<I, R>(header: &[&str], rows: I) -> Result<Vec<u8>>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| csv_error("csv writer", e))?;
    for row in rows {
        w.write_record(row)
            .map_err(|e| csv_error("csv writer", e))?;
    }
    w.into_inner().map_err(|e| Error::Parse {
        context: "csv writer".into(),
        message: e.to_string(),
    })
}

pub fn series_csv(series: &[EnergySample]) -> Result<Vec<u8>> {
    to_csv(
        &SERIES_HEADER,
        series.iter().map(|s| {
            let mut row: Vec<String> = [
                s.t,
                s.f,
                s.d,
                s.f_norm2,
                s.g_norm2,
                s.mass_u,
                s.mass_v,
                s.sup_u,
                s.sup_v,
                s.grad_v_norm2,
            ]
            .iter()
            .map(|&x| format_number(x))
            .collect();
            row.push(s.lp_norm.map(format_number).unwrap_or_default());
            row
        }),
    )
}

pub fn write_series(path: &Path, series: &[EnergySample]) -> Result<()> {
    write_atomic(path, &series_csv(series)?)
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &[&str], context: &str) -> Result<()> {
    let header = reader.headers().map_err(|e| csv_error(context, e))?;
    if header.iter().map(str::trim).ne(expected.iter().copied()) {
        return Err(Error::Parse {
            context: context.to_string(),
            message: format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    Ok(())
}

fn number(field: &str, context: &str, row: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|e| Error::Parse {
        context: format!("{context}, row {row}"),
        message: format!("`{field}`: {e}"),
    })
}

pub fn parse_series(text: &str) -> Result<Vec<EnergySample>> {
    let context = "series csv";
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &SERIES_HEADER, context)?;
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(context, e))?;
        let row = i + 1;
        let x = |k: usize| number(&rec[k], context, row);
        let lp = rec[10].trim();
        out.push(EnergySample {
            t: x(0)?,
            f: x(1)?,
            d: x(2)?,
            f_norm2: x(3)?,
            g_norm2: x(4)?,
            mass_u: x(5)?,
            mass_v: x(6)?,
            sup_u: x(7)?,
            sup_v: x(8)?,
            grad_v_norm2: x(9)?,
            lp_norm: if lp.is_empty() {
                None
            } else {
                Some(number(lp, context, row)?)
            },
        });
    }
    Ok(out)
}

pub fn read_series(path: &Path) -> Result<Vec<EnergySample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text)
}

pub fn snapshot_csv(state: &State, grid: &RadialGrid) -> Result<Vec<u8>> {
    state.validate(grid)?;
    to_csv(
        &SNAPSHOT_HEADER,
        grid.centers()
            .iter()
            .zip(state.u.values())
            .zip(state.v.values())
            .map(|((&r, &u), &v)| [format_number(r), format_number(u), format_number(v)]),
    )
}

pub fn write_snapshot(path: &Path, state: &State, grid: &RadialGrid) -> Result<()> {
    write_atomic(path, &snapshot_csv(state, grid)?)
}

/// Reads `r,u,v` rows; the radii must match the grid centres. The time stamp is `t`.
pub fn parse_snapshot(text: &str, grid: &RadialGrid, t: f64) -> Result<State> {
    let context = "snapshot csv";
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    check_header(&mut reader, &SNAPSHOT_HEADER, context)?;
    let mut u = Vec::with_capacity(grid.len());
    let mut v = Vec::with_capacity(grid.len());
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(context, e))?;
        let row = i + 1;
        if i >= grid.len() {
            return Err(Error::LengthMismatch {
                expected: grid.len(),
                found: i + 1,
            });
        }
        let r = number(&rec[0], context, row)?;
        let rc = grid.centers()[i];
        if (r - rc).abs() > RADIUS_TOL * grid.radius() {
            return Err(Error::Parse {
                context: format!("{context}, row {row}"),
                message: format!("radius {r} does not match grid centre {rc}"),
            });
        }
        u.push(number(&rec[1], context, row)?);
        v.push(number(&rec[2], context, row)?);
    }
    let state = State::new(t, grid.field(u)?, grid.field(v)?);
    state.validate(grid)?;
    Ok(state)
}

pub fn read_snapshot(path: &Path, grid: &RadialGrid) -> Result<State> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_snapshot(&text, grid, 0.0).map_err(|e| match e {
        Error::Parse { context, message } => Error::Parse {
            context: format!("{} ({context})", path.display()),
            message,
        },
        other => other,
    })
}
