//! Plain-text checkpoints.
//!
//! Layout: a `rankforge-ckpt v1` header, the architecture code (or
//! `custom`), one `layer` header per layer, then each tensor as a `tensor
//! <name> <rows> <cols>` line followed by its rows.  Floats are written
//! with 17 significant digits, which round-trips every finite `f64`
//! bit-for-bit through decimal.  Running batchnorm statistics are part of
//! the checkpoint — evaluation-mode scores depend on them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::matrix::DenseMatrix;
use super::network::{ArchCode, Layer, LayerSpec, Network};
use crate::error::{Error, Result};

const HEADER: &str = "rankforge-ckpt v1";

fn push_tensor(out: &mut String, name: &str, rows: usize, cols: usize, data: &[f64]) {
    assert_eq!(data.len(), rows * cols);
    writeln!(out, "tensor {name} {rows} {cols}").unwrap();
    for r in 0..rows {
        let row = &data[r * cols..(r + 1) * cols];
        let mut line = String::with_capacity(cols * 26);
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            // 17 significant digits: exact decimal round-trip for f64.
            write!(line, "{v:.16e}").unwrap();
        }
        out.push_str(&line);
        out.push('\n');
    }
}

/// Write `net` to `path` as a version-1 text checkpoint.
pub fn save_checkpoint(net: &Network, path: &Path) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    match net.arch() {
        Some(code) => writeln!(out, "arch {code}").unwrap(),
        None => writeln!(out, "arch custom").unwrap(),
    }
    writeln!(out, "layers {}", net.layers.len()).unwrap();
    for (li, layer) in net.layers.iter().enumerate() {
        let s = layer.spec;
        writeln!(
            out,
            "layer {li} in {} out {} act {} bn {}",
            s.in_dim,
            s.out_dim,
            s.activation.name(),
            u8::from(s.batchnorm)
        )
        .unwrap();
        push_tensor(&mut out, "weight", s.out_dim, s.in_dim, layer.weight.as_slice());
        push_tensor(&mut out, "bias", 1, s.out_dim, &layer.bias);
        if s.batchnorm {
            push_tensor(&mut out, "gamma", 1, s.out_dim, &layer.gamma);
            push_tensor(&mut out, "beta", 1, s.out_dim, &layer.beta);
            push_tensor(&mut out, "running_mean", 1, s.out_dim, &layer.running_mean);
            push_tensor(&mut out, "running_var", 1, s.out_dim, &layer.running_var);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

struct LineReader<'a> {
    path: &'a Path,
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> LineReader<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.lines.next() {
            Some((i, line)) => Ok((i + 1, line)),
            None => Err(Error::Data(format!(
                "{}: truncated checkpoint, expected {what}",
                self.path.display()
            ))),
        }
    }

    fn err(&self, line_no: usize, msg: impl std::fmt::Display) -> Error {
        Error::Data(format!("{}:{line_no}: {msg}", self.path.display()))
    }
}

fn parse_usize(r: &LineReader, line_no: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>()
        .map_err(|_| r.err(line_no, format!("invalid {what} `{tok}`")))
}

fn read_tensor(
    r: &mut LineReader,
    name: &str,
    rows: usize,
    cols: usize,
) -> Result<Vec<f64>> {
    let (ln, header) = r.next(&format!("tensor {name}"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "tensor" || toks[1] != name {
        return Err(r.err(ln, format!("expected `tensor {name} {rows} {cols}`, got `{header}`")));
    }
    let got_rows = parse_usize(r, ln, toks[2], "row count")?;
    let got_cols = parse_usize(r, ln, toks[3], "column count")?;
    if (got_rows, got_cols) != (rows, cols) {
        return Err(r.err(
            ln,
            format!("tensor {name} has shape {got_rows}x{got_cols}, expected {rows}x{cols}"),
        ));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows {
        let (ln, line) = r.next(&format!("row of tensor {name}"))?;
        let mut n = 0usize;
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| r.err(ln, format!("invalid float `{tok}`")))?;
            data.push(v);
            n += 1;
        }
        if n != cols {
            return Err(r.err(ln, format!("expected {cols} values, found {n}")));
        }
    }
    Ok(data)
}

/// Load a version-1 text checkpoint.
pub fn load_checkpoint(path: &Path) -> Result<Network> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut r = LineReader {
        path,
        lines: text.lines().enumerate(),
    };

    let (ln, header) = r.next("header")?;
    if header.trim() != HEADER {
        return Err(r.err(ln, format!("not a rankforge checkpoint (header `{header}`)")));
    }
    let (ln, arch_line) = r.next("arch line")?;
    let arch = match arch_line.strip_prefix("arch ") {
        Some("custom") => None,
        Some(code) => Some(code.parse::<ArchCode>().map_err(|e| r.err(ln, e))?),
        None => return Err(r.err(ln, format!("expected `arch ...`, got `{arch_line}`"))),
    };
    let (ln, layers_line) = r.next("layer count")?;
    let n_layers = match layers_line.strip_prefix("layers ") {
        Some(tok) => parse_usize(&r, ln, tok, "layer count")?,
        None => return Err(r.err(ln, format!("expected `layers N`, got `{layers_line}`"))),
    };
    if n_layers == 0 {
        return Err(r.err(ln, "checkpoint declares zero layers"));
    }

    let mut layers = Vec::with_capacity(n_layers);
    let mut prev_out: Option<usize> = None;
    for li in 0..n_layers {
        let (ln, line) = r.next("layer header")?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 10
            || toks[0] != "layer"
            || toks[2] != "in"
            || toks[4] != "out"
            || toks[6] != "act"
            || toks[8] != "bn"
        {
            return Err(r.err(ln, format!("malformed layer header `{line}`")));
        }
        let idx = parse_usize(&r, ln, toks[1], "layer index")?;
        if idx != li {
            return Err(r.err(ln, format!("layer index {idx}, expected {li}")));
        }
        let in_dim = parse_usize(&r, ln, toks[3], "input dim")?;
        let out_dim = parse_usize(&r, ln, toks[5], "output dim")?;
        let activation = toks[7].parse().map_err(|e| r.err(ln, e))?;
        let batchnorm = match toks[9] {
            "0" => false,
            "1" => true,
            other => return Err(r.err(ln, format!("invalid bn flag `{other}`"))),
        };
        if in_dim == 0 || out_dim == 0 {
            return Err(r.err(ln, "degenerate layer shape"));
        }
        if let Some(prev) = prev_out {
            if prev != in_dim {
                return Err(r.err(
                    ln,
                    format!("layer {li} input dim {in_dim} does not chain from {prev}"),
                ));
            }
        }
        prev_out = Some(out_dim);

        let spec = LayerSpec {
            in_dim,
            out_dim,
            activation,
            batchnorm,
        };
        let weight = DenseMatrix::from_vec(
            out_dim,
            in_dim,
            read_tensor(&mut r, "weight", out_dim, in_dim)?,
        );
        let bias = read_tensor(&mut r, "bias", 1, out_dim)?;
        let (gamma, beta, running_mean, running_var) = if batchnorm {
            (
                read_tensor(&mut r, "gamma", 1, out_dim)?,
                read_tensor(&mut r, "beta", 1, out_dim)?,
                read_tensor(&mut r, "running_mean", 1, out_dim)?,
                read_tensor(&mut r, "running_var", 1, out_dim)?,
            )
        } else {
            (Vec::new(), Vec::new(), Vec::new(), Vec::new())
        };
        layers.push(Layer {
            spec,
            weight,
            bias,
            gamma,
            beta,
            running_mean,
            running_var,
        });
    }
    Ok(Network { arch, layers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ArchCode, DenseMatrix, Network};

    #[test]
    fn round_trip_is_bit_identical() {
        let mut net = Network::new(ArchCode::Ce4L, 6, 99);
        // Move parameters and running stats off their initial values,
        // including awkward decimals.
        let x = DenseMatrix::from_rows(&[
            vec![0.1, 0.2, 1.0 / 3.0, -0.7, 2.5, 0.0],
            vec![-0.4, 0.9, 0.05, 0.66, -1.25, 0.31],
            vec![1.1, -2.2, 3.3, -4.4, 5.5, -6.6],
        ]);
        net.forward_train(&x).unwrap();
        net.layers[0].weight.set(0, 0, std::f64::consts::PI);
        net.layers[2].bias[3] = 1.0 / 7.0;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, net, "checkpoint round trip must be exact");
        assert_eq!(loaded.arch(), Some(ArchCode::Ce4L));

        // Same eval scores, bit for bit.
        let probe = DenseMatrix::from_rows(&[vec![0.3, -0.1, 0.8, 0.0, -0.9, 1.7]]);
        assert_eq!(
            net.score_eval(&probe).unwrap(),
            loaded.score_eval(&probe).unwrap()
        );
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "some other file\n").unwrap();
        match load_checkpoint(&path) {
            Err(crate::Error::Data(msg)) => assert!(msg.contains("not a rankforge checkpoint")),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_checkpoint_is_rejected() {
        let net = Network::new(ArchCode::R5, 3, 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        std::fs::write(&path, cut).unwrap();
        match load_checkpoint(&path) {
            Err(crate::Error::Data(msg)) => {
                assert!(msg.contains("truncated") || msg.contains("expected"), "{msg}")
            }
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn custom_stacks_round_trip_without_an_arch_code() {
        use crate::numerics::{Activation, LayerSpec};
        let net = Network::from_specs(
            &[
                LayerSpec {
                    in_dim: 2,
                    out_dim: 3,
                    activation: Activation::Relu,
                    batchnorm: true,
                },
                LayerSpec {
                    in_dim: 3,
                    out_dim: 1,
                    activation: Activation::Linear,
                    batchnorm: false,
                },
            ],
            5,
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("custom.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, net);
        assert_eq!(loaded.arch(), None);
    }
}
