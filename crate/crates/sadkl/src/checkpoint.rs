//! Text checkpoints of a trained encoder and its centroid.
//!
//! ```text
//! sadkl-checkpoint 1
//! dims 2 100 100 2
//! layer 0
//! w <n_in values>        one line per output unit
//! b <n_out values>
//! layer 1
//! ...
//! centroid <latent values>
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use sadkl_core::net::{Centroid, Layer, Mlp};

use crate::csvio::fmt_f64;
use crate::error::{CliError, Context, Result};

pub const MAGIC: &str = "sadkl-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: Mlp,
    pub centroid: Centroid,
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|&v| fmt_f64(v))
        .collect::<Vec<_>>()
        .join(" ")
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let dims: Vec<String> = self.encoder.dims().iter().map(usize::to_string).collect();
        let _ = writeln!(s, "{MAGIC} {VERSION}");
        let _ = writeln!(s, "dims {}", dims.join(" "));
        for (i, layer) in self.encoder.layers.iter().enumerate() {
            let _ = writeln!(s, "layer {i}");
            for row in layer.weights.chunks_exact(layer.n_in) {
                let _ = writeln!(s, "w {}", join(row));
            }
            let _ = writeln!(s, "b {}", join(&layer.bias));
        }
        let _ = writeln!(s, "centroid {}", join(&self.centroid.0));
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|(line, message)| CliError::parse(path, line, message))
    }

    /// Parses the text form; errors carry a 1-based line number.
    pub fn parse(text: &str) -> std::result::Result<Self, (u64, String)> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
            line: 0,
        };
        let head = lines.expect(MAGIC)?;
        let version: u32 = head
            .first()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| lines.err("missing format version"))?;
        if version != VERSION || head.len() != 1 {
            return Err(lines.err(format!("unsupported format version {}", head.join(" "))));
        }
        let dims = lines
            .expect("dims")?
            .iter()
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| lines.err(format!("bad dimension {d:?}")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if dims.len() < 2 || dims.contains(&0) {
            return Err(lines.err("need at least two positive layer widths"));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for (i, w) in dims.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let tag = lines.expect("layer")?;
            if tag != [i.to_string()] {
                return Err(lines.err(format!("expected layer {i}")));
            }
            let mut weights = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_out {
                weights.extend(lines.floats("w", n_in)?);
            }
            let bias = lines.floats("b", n_out)?;
            layers.push(Layer {
                n_in,
                n_out,
                weights,
                bias,
            });
        }
        let latent = *dims.last().expect("checked length");
        let centroid = Centroid(lines.floats("centroid", latent)?);
        if let Some((i, extra)) = lines.inner.find(|(_, l)| !l.trim().is_empty()) {
            return Err((
                (i + 1) as u64,
                format!("unexpected trailing content {extra:?}"),
            ));
        }
        let encoder = Mlp::from_layers(layers).map_err(|e| (lines.line, e.to_string()))?;
        Ok(Checkpoint { encoder, centroid })
    }
}

struct Lines<'a, I: Iterator<Item = (usize, &'a str)>> {
    inner: I,
    line: u64,
}

impl<'a, I: Iterator<Item = (usize, &'a str)>> Lines<'a, I> {
    fn err(&self, message: impl Into<String>) -> (u64, String) {
        (self.line, message.into())
    }

    /// Next nonblank line, which must start with `key`; returns its other
    /// fields.
    fn expect(&mut self, key: &str) -> std::result::Result<Vec<&'a str>, (u64, String)> {
        loop {
            let Some((i, l)) = self.inner.next() else {
                return Err((
                    self.line + 1,
                    format!("unexpected end of file, expected {key}"),
                ));
            };
            self.line = (i + 1) as u64;
            let mut fields = l.split_whitespace();
            match fields.next() {
                None => continue,
                Some(k) if k == key => return Ok(fields.collect()),
                Some(k) => return Err(self.err(format!("expected {key}, found {k}"))),
            }
        }
    }

    fn floats(&mut self, key: &str, n: usize) -> std::result::Result<Vec<f64>, (u64, String)> {
        let fields = self.expect(key)?;
        if fields.len() != n {
            return Err(self.err(format!(
                "{key}: expected {n} values, found {}",
                fields.len()
            )));
        }
        fields
            .iter()
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(self.err(format!("{key}: {f:?} is not a finite number"))),
            })
            .collect()
    }
}

/// Checks the checkpoint against a dataset's feature dimension.
pub fn check_input_dim(ckpt: &Checkpoint, dim: usize) -> Result<()> {
    if ckpt.encoder.input_dim() != dim {
        return Err(sadkl_core::Error::DimensionMismatch {
            expected: ckpt.encoder.input_dim(),
            got: dim,
        })
        .context("checkpoint and data");
    }
    if ckpt.centroid.0.len() != ckpt.encoder.output_dim() {
        return Err(CliError::config(
            "checkpoint",
            "centroid dimension differs from the encoder output",
        ));
    }
    Ok(())
}
