//! ESRI ASCII grid (`.asc`) reading and writing.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::TerrainGrid;
use crate::error::{Error, Result};

pub const NODATA: f64 = -9999.0;

/// Which elevation channel to export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Base,
    Depth,
    Trace,
    Rendered,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Base => "base",
            Channel::Depth => "depth",
            Channel::Trace => "trace",
            Channel::Rendered => "rendered",
        }
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "base" => Ok(Channel::Base),
            "depth" => Ok(Channel::Depth),
            "trace" => Ok(Channel::Trace),
            "rendered" => Ok(Channel::Rendered),
            other => Err(format!(
                "unknown channel `{other}` (expected base, depth, trace or rendered)"
            )),
        }
    }
}

fn fmt6(v: f64) -> String {
    let s = format!("{v:.6}");
    if s == "-0.000000" {
        "0.000000".to_owned()
    } else {
        s
    }
}

fn render(grid: &TerrainGrid, value: impl Fn(usize, usize) -> String) -> String {
    let res = grid.resolution();
    let (ox, oy) = grid.origin();
    let mut out = String::new();
    let _ = writeln!(out, "ncols {}", grid.nx());
    let _ = writeln!(out, "nrows {}", grid.ny());
    let _ = writeln!(out, "xllcorner {}", fmt6(ox - 0.5 * res));
    let _ = writeln!(out, "yllcorner {}", fmt6(oy - 0.5 * res));
    let _ = writeln!(out, "cellsize {}", fmt6(res));
    let _ = writeln!(out, "NODATA_value -9999");
    // First data row is the northern edge.
    for j in (0..grid.ny()).rev() {
        let row: Vec<String> = (0..grid.nx()).map(|i| value(i, j)).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_asc(grid: &TerrainGrid, channel: Channel, path: &Path) -> Result<()> {
    let text = render(grid, |i, j| fmt6(grid.channel(channel, i, j)));
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes a 0/1 grid marking cells whose permanent depth exceeds `threshold_mm`.
pub fn write_mask(grid: &TerrainGrid, threshold_mm: f64, path: &Path) -> Result<()> {
    let limit = -threshold_mm / 1000.0;
    let text = render(grid, |i, j| {
        if grid.depth(i, j) < limit { "1" } else { "0" }.to_owned()
    });
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an `.asc` file into the base channel of a fresh grid.
pub fn read_asc(path: &Path) -> Result<TerrainGrid> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_asc(&text).map_err(|message| Error::Parse {
        path: path.to_path_buf(),
        message,
    })
}

fn parse_asc(text: &str) -> std::result::Result<TerrainGrid, String> {
    let mut tokens = text.split_whitespace().peekable();
    let mut ncols = None;
    let mut nrows = None;
    let mut xll = None;
    let mut yll = None;
    let mut centered = false;
    let mut cellsize = None;
    let mut nodata = NODATA;

    while let Some(tok) = tokens.peek() {
        if tok.parse::<f64>().is_ok() {
            break;
        }
        let key = tokens.next().unwrap().to_ascii_lowercase();
        let val = tokens
            .next()
            .ok_or_else(|| format!("header key `{key}` has no value"))?;
        let num: f64 = val
            .parse()
            .map_err(|_| format!("header `{key}` has non-numeric value `{val}`"))?;
        match key.as_str() {
            "ncols" => ncols = Some(num as usize),
            "nrows" => nrows = Some(num as usize),
            "xllcorner" => xll = Some(num),
            "yllcorner" => yll = Some(num),
            "xllcenter" => {
                xll = Some(num);
                centered = true;
            }
            "yllcenter" => {
                yll = Some(num);
                centered = true;
            }
            "cellsize" => cellsize = Some(num),
            "nodata_value" => nodata = num,
            other => return Err(format!("unknown header key `{other}`")),
        }
    }
    let nx = ncols.ok_or("missing ncols")?;
    let ny = nrows.ok_or("missing nrows")?;
    let res = cellsize.ok_or("missing cellsize")?;
    let (xll, yll) = (
        xll.ok_or("missing xllcorner")?,
        yll.ok_or("missing yllcorner")?,
    );
    let origin = if centered {
        (xll, yll)
    } else {
        (xll + 0.5 * res, yll + 0.5 * res)
    };

    let values: Vec<f64> = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| format!("bad cell value `{t}`"))
        })
        .collect::<std::result::Result<_, _>>()?;
    if values.len() != nx * ny {
        return Err(format!(
            "expected {} cells, found {}",
            nx * ny,
            values.len()
        ));
    }
    if values.contains(&nodata) {
        return Err("NODATA cells are not supported in terrain input".into());
    }
    let mut grid = TerrainGrid::flat(nx, ny, res, origin).map_err(|e| e.to_string())?;
    for (row, chunk) in values.chunks(nx).enumerate() {
        let j = ny - 1 - row;
        for (i, &v) in chunk.iter().enumerate() {
            grid.set_base(i, j, v).map_err(|e| e.to_string())?;
        }
    }
    Ok(grid)
}
