//! Plain-text file formats.
//!
//! Tensor series: a header `dims=p1,...,pr;T=<T>` followed by `T` lines of
//! `∏p_m` whitespace-separated values in the first-index-fastest layout.
//!
//! Matrix lists (mixing matrices, mode unmixers): one block per matrix, a
//! header `matrix rows=<R>;cols=<C>` followed by `R` lines of `C` values.
//! Values are written with 17 significant digits so that reading back is exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{BssError, Result};
use crate::tensor::{Matrix, Tensor, TensorSeries};

fn fmt_value(out: &mut String, v: f64) {
    write!(out, "{v:.16e}").unwrap();
}

pub fn format_series(s: &TensorSeries) -> String {
    let dims: Vec<String> = s.dims().iter().map(|p| p.to_string()).collect();
    let mut out = format!("dims={};T={}\n", dims.join(","), s.len());
    for f in s.frames() {
        for (k, &v) in f.data().iter().enumerate() {
            if k > 0 {
                out.push(' ');
            }
            fmt_value(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn parse_series(text: &str) -> Result<TensorSeries> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(BssError::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let (dims, t) = parse_series_header(header)?;
    let n: usize = dims.iter().product();
    let mut frames = Vec::with_capacity(t);
    for (ln, line) in lines {
        let data = parse_values(line, ln + 1)?;
        if data.len() != n {
            return Err(BssError::Parse {
                line: ln + 1,
                msg: format!("expected {n} values, found {}", data.len()),
            });
        }
        frames.push(Tensor::new(dims.clone(), data)?);
    }
    if frames.len() != t {
        return Err(BssError::Parse {
            line: 1,
            msg: format!("header declares T={t} but {} frames follow", frames.len()),
        });
    }
    TensorSeries::new(frames)
}

fn parse_series_header(header: &str) -> Result<(Vec<usize>, usize)> {
    let bad = |msg: &str| BssError::Parse {
        line: 1,
        msg: format!("{msg} in header {header:?}"),
    };
    let mut dims = None;
    let mut t = None;
    for part in header.trim().split(';') {
        let (k, v) = part.split_once('=').ok_or_else(|| bad("missing '='"))?;
        match k.trim() {
            "dims" => {
                dims = Some(
                    v.split(',')
                        .map(|p| p.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad dims"))?,
                )
            }
            "T" => t = Some(v.trim().parse::<usize>().map_err(|_| bad("bad T"))?),
            _ => return Err(bad("unknown key")),
        }
    }
    match (dims, t) {
        (Some(d), Some(t)) => Ok((d, t)),
        _ => Err(bad("missing dims or T")),
    }
}

fn parse_values(line: &str, ln: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| BssError::Parse {
                line: ln,
                msg: format!("invalid number {tok:?}"),
            })
        })
        .collect()
}

pub fn read_series(path: impl AsRef<Path>) -> Result<TensorSeries> {
    parse_series(&fs::read_to_string(path)?)
}

pub fn write_series(path: impl AsRef<Path>, s: &TensorSeries) -> Result<()> {
    fs::write(path, format_series(s))?;
    Ok(())
}

pub fn format_matrices(mats: &[Matrix]) -> String {
    let mut out = String::new();
    for m in mats {
        writeln!(out, "matrix rows={};cols={}", m.nrows(), m.ncols()).unwrap();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if j > 0 {
                    out.push(' ');
                }
                fmt_value(&mut out, m[(i, j)]);
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_matrices(text: &str) -> Result<Vec<Matrix>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut mats = Vec::new();
    while let Some((ln, header)) = lines.next() {
        let bad = |msg: String| BssError::Parse { line: ln + 1, msg };
        let spec = header
            .trim()
            .strip_prefix("matrix")
            .ok_or_else(|| bad(format!("expected a matrix header, found {header:?}")))?;
        let mut rows = None;
        let mut cols = None;
        for part in spec.trim().split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("malformed header {header:?}")))?;
            let v: usize = v.trim().parse().map_err(|_| bad(format!("bad size {v:?}")))?;
            match k.trim() {
                "rows" => rows = Some(v),
                "cols" => cols = Some(v),
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let (rows, cols) = rows.zip(cols).ok_or_else(|| bad("missing rows or cols".into()))?;
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows {
            let (rl, line) = lines.next().ok_or_else(|| bad("truncated matrix".into()))?;
            let vals = parse_values(line, rl + 1)?;
            if vals.len() != cols {
                return Err(BssError::Parse {
                    line: rl + 1,
                    msg: format!("expected {cols} values, found {}", vals.len()),
                });
            }
            for (j, v) in vals.into_iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        mats.push(m);
    }
    Ok(mats)
}

pub fn read_matrices(path: impl AsRef<Path>) -> Result<Vec<Matrix>> {
    parse_matrices(&fs::read_to_string(path)?)
}

pub fn write_matrices(path: impl AsRef<Path>, mats: &[Matrix]) -> Result<()> {
    fs::write(path, format_matrices(mats))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn series_round_trip_is_exact(
            vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 12..=12),
            t in 1usize..4,
        ) {
            let frames = (0..t)
                .map(|k| Tensor::new(vec![3, 2, 2], vals.iter().map(|v| v * (k as f64 + 1.0)).collect()).unwrap())
                .filter(|f| f.data().iter().all(|v| v.is_finite()))
                .collect::<Vec<_>>();
            prop_assume!(!frames.is_empty());
            let s = TensorSeries::new(frames).unwrap();
            let back = parse_series(&format_series(&s)).unwrap();
            prop_assert_eq!(back, s);
        }

        #[test]
        fn matrix_round_trip_is_exact(vals in proptest::collection::vec(-1e300f64..1e300, 6..=6)) {
            let m = Matrix::from_row_slice(2, 3, &vals);
            let back = parse_matrices(&format_matrices(&[m.clone(), m.transpose()])).unwrap();
            prop_assert_eq!(back, vec![m.clone(), m.transpose()]);
        }
    }

    #[test]
    fn header_layout() {
        let s = TensorSeries::new(vec![Tensor::new(vec![2, 1], vec![1.0, 0.5]).unwrap()]).unwrap();
        let text = format_series(&s);
        assert!(text.starts_with("dims=2,1;T=1\n"));
    }

    #[test]
    fn malformed_inputs() {
        assert!(parse_series("").is_err());
        assert!(parse_series("dims=2;T=2\n1 2\n").is_err());
        assert!(parse_series("dims=2;T=1\n1 x\n").is_err());
        assert!(parse_series("dims=2;T=1\n1 2 3\n").is_err());
        assert!(parse_series("foo=2;T=1\n1 2\n").is_err());
        assert!(parse_matrices("matrix rows=2;cols=2\n1 2\n").is_err());
        assert!(parse_matrices("rows=2;cols=2\n1 2\n3 4\n").is_err());
    }
}
