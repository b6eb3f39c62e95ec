use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Fgn,
    Fbm,
    Fou,
    Wiener,
    Hermite,
    Custom,
}

impl Model {
    fn tag(self) -> &'static str {
        match self {
            Model::Fgn => "fgn",
            Model::Fbm => "fbm",
            Model::Fou => "fou",
            Model::Wiener => "wiener",
            Model::Hermite => "hermite",
            Model::Custom => "custom",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        Ok(match s {
            "fgn" => Model::Fgn,
            "fbm" => Model::Fbm,
            "fou" => Model::Fou,
            "wiener" => Model::Wiener,
            "hermite" => Model::Hermite,
            "custom" => Model::Custom,
            other => return Err(Error::Data(format!("unknown model tag {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMeta {
    pub model: Model,
    pub h: Option<f64>,
    pub eps: Option<f64>,
    pub seed: u64,
    pub mode: String,
}

impl PathMeta {
    pub fn new(model: Model, seed: u64) -> Self {
        Self { model, h: None, eps: None, seed, mode: String::new() }
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }

    pub fn with_mode(mut self, mode: impl Into<String>) -> Self {
        self.mode = mode.into();
        self
    }
}

/// Uniformly sampled path in `ℝ^dim`. Values are stored row-major:
/// `values[k * dim + i]` is component `i` at time `t0 + k dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub t0: f64,
    pub dt: f64,
    pub dim: usize,
    pub values: Vec<f64>,
    pub meta: PathMeta,
}

const MAGIC: &[u8; 8] = b"GRIDPTH1";

impl GridPath {
    pub fn new(t0: f64, dt: f64, dim: usize, values: Vec<f64>, meta: PathMeta) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        if dim == 0 || values.len() % dim != 0 {
            return Err(Error::Argument(format!("{} values do not split into rows of {dim}", values.len())));
        }
        if values.len() / dim < 2 {
            return Err(Error::Argument("a grid path needs at least two points".into()));
        }
        Ok(Self { t0, dt, dim, values, meta })
    }

    pub fn scalar(t0: f64, dt: f64, values: Vec<f64>, meta: PathMeta) -> Result<Self> {
        Self::new(t0, dt, 1, values, meta)
    }

    /// Number of grid points.
    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.dim + i]
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.value(k, i)).collect()
    }

    /// Grid index of time `t`, if `t` lies on the grid up to `1e-9 dt`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        let k = x.round();
        if (x - k).abs() < 1e-9 && k >= 0.0 && (k as usize) < self.len() {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Linear interpolation of component `i` at time `t` (clamped to the grid).
    pub fn interpolate(&self, i: usize, t: f64) -> f64 {
        let x = ((t - self.t0) / self.dt).clamp(0.0, (self.len() - 1) as f64);
        let k = (x.floor() as usize).min(self.len() - 2);
        let w = x - k as f64;
        (1.0 - w) * self.value(k, i) + w * self.value(k + 1, i)
    }

    /// Every `stride`-th point starting at index 0.
    pub fn subsample(&self, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Argument("stride must be positive".into()));
        }
        let mut values = Vec::with_capacity(self.values.len() / stride + self.dim);
        for k in (0..self.len()).step_by(stride) {
            values.extend_from_slice(self.row(k));
        }
        Self::new(self.t0, self.dt * stride as f64, self.dim, values, self.meta.clone())
    }

    /// Points with time in `[a, b]`.
    pub fn window(&self, a: f64, b: f64) -> Result<Self> {
        let first = (((a - self.t0) / self.dt) - 1e-9).ceil().max(0.0) as usize;
        let last = ((((b - self.t0) / self.dt) + 1e-9).floor() as usize).min(self.len() - 1);
        if first >= last {
            return Err(Error::Argument(format!("window [{a}, {b}] holds fewer than two grid points")));
        }
        let values = self.values[first * self.dim..(last + 1) * self.dim].to_vec();
        Self::new(self.time(first), self.dt, self.dim, values, self.meta.clone())
    }

    /// CSV with header `t,x0,x1,...`. Floats use the shortest round-trip
    /// representation, so identical paths give identical bytes.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("t");
        for i in 0..self.dim {
            header.push_str(&format!(",x{i}"));
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for k in 0..self.len() {
            line.clear();
            line.push_str(&format!("{}", self.time(k)));
            for v in self.row(k) {
                line.push(',');
                line.push_str(&format!("{v}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`GridPath::write_csv`]. The metadata
    /// is not part of the CSV and must be supplied.
    pub fn read_csv<R: BufRead>(r: R, meta: PathMeta) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Data("empty csv".into()))??;
        let dim = header.split(',').count().saturating_sub(1);
        if dim == 0 {
            return Err(Error::Data("csv header has no value columns".into()));
        }
        let mut times = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| Error::Data(format!("row {} is short", lineno + 2)))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Data(format!("row {}: {e}", lineno + 2)))
            };
            times.push(parse(fields.next())?);
            for _ in 0..dim {
                values.push(parse(fields.next())?);
            }
        }
        if times.len() < 2 {
            return Err(Error::Data("csv holds fewer than two rows".into()));
        }
        let dt = times[1] - times[0];
        Self::new(times[0], dt, dim, values, meta)
    }

    /// Binary column format: magic, JSON header length (u64 LE), JSON
    /// header `{model, H, eps, dt, seed, ...}`, then little-endian f64
    /// values row-major.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let header = serde_json::json!({
            "model": self.meta.model.tag(),
            "H": self.meta.h,
            "eps": self.meta.eps,
            "dt": self.dt,
            "t0": self.t0,
            "dim": self.dim,
            "len": self.len(),
            "seed": self.meta.seed,
            "mode": self.meta.mode,
        });
        let bytes = serde_json::to_vec(&header)?;
        w.write_all(MAGIC)?;
        w.write_all(&(bytes.len() as u64).to_le_bytes())?;
        w.write_all(&bytes)?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Data("not a grid path file".into()));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        r.read_exact(&mut header)?;
        let h: serde_json::Value = serde_json::from_slice(&header)?;
        let field = |k: &str| h.get(k).ok_or_else(|| Error::Data(format!("header lacks {k}")));
        let num = |k: &str| -> Result<f64> { field(k)?.as_f64().ok_or_else(|| Error::Data(format!("{k} is not a number"))) };
        let int = |k: &str| -> Result<u64> { field(k)?.as_u64().ok_or_else(|| Error::Data(format!("{k} is not an integer"))) };
        let model = Model::from_tag(field("model")?.as_str().unwrap_or_default())?;
        let dim = int("dim")? as usize;
        let n = int("len")? as usize;
        let mut values = vec![0.0; n * dim];
        let mut buf = [0u8; 8];
        for v in values.iter_mut() {
            r.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        let meta = PathMeta {
            model,
            h: h.get("H").and_then(|v| v.as_f64()),
            eps: h.get("eps").and_then(|v| v.as_f64()),
            seed: int("seed")?,
            mode: h.get("mode").and_then(|v| v.as_str()).unwrap_or_default().to_string(),
        };
        Self::new(num("t0")?, num("dt")?, dim, values, meta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> GridPath {
        let meta = PathMeta::new(Model::Fbm, 9).with_h(0.7).with_mode("circulant");
        GridPath::new(-0.5, 0.25, 2, (0..10).map(|i| i as f64 * 0.1 - 0.3).collect(), meta).unwrap()
    }

    #[test]
    fn accessors() {
        let p = sample();
        assert_eq!(p.len(), 5);
        assert_eq!(p.time(2), 0.0);
        assert_eq!(p.index_of(0.0), Some(2));
        assert_eq!(p.index_of(0.1), None);
        assert_eq!(p.component(1)[0], p.value(0, 1));
        assert!((p.interpolate(0, -0.375) - 0.5 * (p.value(0, 0) + p.value(1, 0))).abs() < 1e-15);
        let s = p.subsample(2).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.row(1), p.row(2));
        let w = p.window(0.0, 0.5).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.t0, 0.0);
    }

    #[test]
    fn invalid_paths_rejected() {
        let meta = PathMeta::new(Model::Custom, 0);
        assert!(GridPath::scalar(0.0, 0.0, vec![1.0, 2.0], meta.clone()).is_err());
        assert!(GridPath::scalar(0.0, 1.0, vec![1.0], meta.clone()).is_err());
        assert!(GridPath::new(0.0, 1.0, 2, vec![1.0, 2.0, 3.0], meta).is_err());
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let p = sample();
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(GridPath::read_binary(&buf[..]).unwrap(), p);
        let mut csv = Vec::new();
        p.write_csv(&mut csv).unwrap();
        let q = GridPath::read_csv(&csv[..], p.meta.clone()).unwrap();
        assert_eq!(q.values, p.values);
        assert_eq!(q.dim, 2);
    }
}
