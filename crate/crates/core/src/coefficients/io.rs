//! Field files.
//!
//! Text layout:
//! ```text
//! field <scalar|vector|matrix> <N> <nodes> <times>
//! times t_0 t_1 ... t_M
//! <time_idx> <node_idx> v_1 ... v_c
//! ...
//! ```
//! Binary layout (little endian): magic `STFB`, `u32` kind (0 scalar,
//! 1 vector, 2 matrix), `u32` N, `u64` nodes, `u64` times, then the time
//! instants and the values `[time][node][component]` as `f64`.

use std::io::{Read, Write};

use super::{CoefficientError, FieldKind, SpaceTimeField, TimeGrid};

const MAGIC: &[u8; 4] = b"STFB";

fn err(msg: impl Into<String>) -> CoefficientError {
    CoefficientError::Io(msg.into())
}

fn kind_from(name: &str, n: usize) -> Result<FieldKind, CoefficientError> {
    match name {
        "scalar" => Ok(FieldKind::Scalar),
        "vector" => Ok(FieldKind::Vector(n)),
        "matrix" => Ok(FieldKind::Matrix(n)),
        other => Err(err(format!("unknown field kind `{other}`"))),
    }
}

/// Reconstructs the uniform grid from listed instants.
fn grid_from_times(times: &[f64]) -> Result<TimeGrid, CoefficientError> {
    if times.len() < 2 || times[0] != 0.0 {
        return Err(err("need at least two instants starting at 0"));
    }
    let grid = TimeGrid::new(*times.last().unwrap(), times.len() - 1)?;
    for (m, t) in times.iter().enumerate() {
        if (t - grid.time(m)).abs() > 1e-9 * grid.t_end {
            return Err(err(format!("time instant {m} = {t} is off the uniform grid")));
        }
    }
    Ok(grid)
}

pub fn write_text(field: &SpaceTimeField, mut out: impl Write) -> std::io::Result<()> {
    let kind = field.kind();
    let grid = field.grid();
    writeln!(out, "field {} {} {} {}", kind.name(), kind.dim(), field.n_nodes(), grid.n_times())?;
    let times: Vec<String> = (0..grid.n_times()).map(|m| format!("{:.17e}", grid.time(m))).collect();
    writeln!(out, "times {}", times.join(" "))?;
    let nc = field.components();
    for m in 0..grid.n_times() {
        let s = field.sample(m);
        for node in 0..field.n_nodes() {
            write!(out, "{m} {node}")?;
            for v in &s[node * nc..(node + 1) * nc] {
                write!(out, " {v:.17e}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

pub fn read_text(src: &str) -> Result<SpaceTimeField, CoefficientError> {
    let mut lines = src.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let header: Vec<&str> = lines.next().ok_or_else(|| err("empty file"))?.split_whitespace().collect();
    if header.len() != 5 || header[0] != "field" {
        return Err(err("header must be `field <kind> <N> <nodes> <times>`"));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad integer `{s}`")));
    let kind = kind_from(header[1], parse_usize(header[2])?)?;
    let n_nodes = parse_usize(header[3])?;
    let n_times = parse_usize(header[4])?;
    let tline: Vec<&str> = lines.next().ok_or_else(|| err("missing times line"))?.split_whitespace().collect();
    if tline.first() != Some(&"times") || tline.len() != n_times + 1 {
        return Err(err(format!("times line must list {n_times} instants")));
    }
    let times: Vec<f64> = tline[1..]
        .iter()
        .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad time `{s}`"))))
        .collect::<Result<_, _>>()?;
    let grid = grid_from_times(&times)?;
    let nc = kind.components();
    let mut values = vec![f64::NAN; n_times * n_nodes * nc];
    let mut seen = vec![false; n_times * n_nodes];
    for line in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 + nc {
            return Err(err(format!("record `{line}` must have {} fields", 2 + nc)));
        }
        let m = parse_usize(toks[0])?;
        let node = parse_usize(toks[1])?;
        if m >= n_times || node >= n_nodes {
            return Err(err(format!("record index ({m}, {node}) out of range")));
        }
        let slot = m * n_nodes + node;
        if seen[slot] {
            return Err(err(format!("duplicate record ({m}, {node})")));
        }
        seen[slot] = true;
        for (c, tok) in toks[2..].iter().enumerate() {
            values[slot * nc + c] = tok.parse::<f64>().map_err(|_| err(format!("bad value `{tok}`")))?;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(err(format!("missing record ({}, {})", missing / n_nodes, missing % n_nodes)));
    }
    SpaceTimeField::from_samples(kind, n_nodes, grid, values)
}

pub fn write_binary(field: &SpaceTimeField, mut out: impl Write) -> std::io::Result<()> {
    let kind = field.kind();
    let code: u32 = match kind {
        FieldKind::Scalar => 0,
        FieldKind::Vector(_) => 1,
        FieldKind::Matrix(_) => 2,
    };
    out.write_all(MAGIC)?;
    out.write_all(&code.to_le_bytes())?;
    out.write_all(&(kind.dim() as u32).to_le_bytes())?;
    out.write_all(&(field.n_nodes() as u64).to_le_bytes())?;
    out.write_all(&(field.grid().n_times() as u64).to_le_bytes())?;
    for m in 0..field.grid().n_times() {
        out.write_all(&field.grid().time(m).to_le_bytes())?;
    }
    for v in field.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_binary(mut src: impl Read) -> Result<SpaceTimeField, CoefficientError> {
    let mut buf = Vec::new();
    src.read_to_end(&mut buf).map_err(|e| err(e.to_string()))?;
    let mut pos = 0usize;
    let mut take = |n: usize| -> Result<&[u8], CoefficientError> {
        let s = buf.get(pos..pos + n).ok_or_else(|| err("truncated binary field"))?;
        pos += n;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(err("bad magic"));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
    let u64_at = |b: &[u8]| u64::from_le_bytes(b.try_into().unwrap());
    let code = u32_at(take(4)?);
    let n = u32_at(take(4)?) as usize;
    let n_nodes = u64_at(take(8)?) as usize;
    let n_times = u64_at(take(8)?) as usize;
    let kind = kind_from(
        match code {
            0 => "scalar",
            1 => "vector",
            2 => "matrix",
            _ => return Err(err(format!("unknown kind code {code}"))),
        },
        n,
    )?;
    let mut times = Vec::with_capacity(n_times);
    for _ in 0..n_times {
        times.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    let count = n_times
        .checked_mul(n_nodes)
        .and_then(|v| v.checked_mul(kind.components()))
        .ok_or_else(|| err("size overflow"))?;
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(f64::from_le_bytes(take(8)?.try_into().unwrap()));
    }
    if pos != buf.len() {
        return Err(err("trailing bytes after binary field"));
    }
    SpaceTimeField::from_samples(kind, n_nodes, grid_from_times(&times)?, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SpaceTimeField {
        let grid = TimeGrid::new(0.3, 3).unwrap();
        let values: Vec<f64> = (0..4 * 2 * 4).map(|i| (i as f64).sin() / 3.0).collect();
        SpaceTimeField::from_samples(FieldKind::Matrix(2), 2, grid, values).unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_text(&f, &mut buf).unwrap();
        let g = read_text(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(g.values(), f.values());
        assert_eq!(g.kind(), f.kind());
        assert_eq!(g.grid().intervals, 3);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let f = sample();
        let mut buf = Vec::new();
        write_binary(&f, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"STFB");
        let g = read_binary(buf.as_slice()).unwrap();
        assert_eq!(g.values(), f.values());
        buf.pop();
        assert!(read_binary(buf.as_slice()).is_err());
    }

    #[test]
    fn text_errors() {
        assert!(read_text("").is_err());
        assert!(read_text("field scalar 1 2 2\ntimes 0 1\n0 0 1\n0 1 1\n1 0 1\n").is_err());
        assert!(read_text("field scalar 1 1 3\ntimes 0 0.2 1\n0 0 1\n1 0 1\n2 0 1\n").is_err());
        let ok = read_text("field scalar 1 1 2\ntimes 0 1\n1 0 2\n0 0 1\n").unwrap();
        assert_eq!(ok.values(), &[1.0, 2.0]);
    }
}
