//! `reducer.model` binary format, little-endian:
//!
//! ```text
//! b"LLRM" | u32 version | u32 n | u32 d
//! | u32 n_neighbors | f64 min_dist | f64 spread | u32 n_epochs
//! | u32 negative_sample_rate | u32 metric | u64 seed
//! | n*d f32 training vectors (row-major) | n*2 f32 coords
//! | f64 curve_a | f64 curve_b
//! ```
//! `metric` is 0 for cosine and 1 for euclidean.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Metric, ReduceError, ReducerModel, ReducerParams};

pub const MAGIC: &[u8; 4] = b"LLRM";
pub const MODEL_VERSION: u32 = 1;
pub const MODEL_FILE: &str = "reducer.model";

pub fn model_to_bytes(model: &ReducerModel) -> Vec<u8> {
    let (n, d) = (model.n(), model.dim());
    let p = &model.params;
    let mut out = Vec::with_capacity(64 + 4 * n * (d + 2));
    out.extend_from_slice(MAGIC);
    for v in [model.version, n as u32, d as u32, p.n_neighbors as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&p.min_dist.to_le_bytes());
    out.extend_from_slice(&p.spread.to_le_bytes());
    let epochs = p.epochs_for(n) as u32;
    for v in [epochs, p.negative_sample_rate as u32, p.metric.code()] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&p.seed.to_le_bytes());
    for v in model.training.iter().chain(model.coords.iter()) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(&model.curve_a.to_le_bytes());
    out.extend_from_slice(&model.curve_b.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], ReduceError> {
        if self.buf.len() < N {
            return Err(ReduceError::Corrupt("unexpected end of file".into()));
        }
        let (head, rest) = self.buf.split_at(N);
        self.buf = rest;
        Ok(head.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, ReduceError> {
        self.take().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64, ReduceError> {
        self.take().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, ReduceError> {
        self.take().map(f64::from_le_bytes)
    }

    fn f32s(&mut self, count: usize) -> Result<Vec<f32>, ReduceError> {
        let bytes = count
            .checked_mul(4)
            .filter(|&b| b <= self.buf.len())
            .ok_or_else(|| ReduceError::Corrupt("unexpected end of file".into()))?;
        let (head, rest) = self.buf.split_at(bytes);
        self.buf = rest;
        Ok(head
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect())
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<ReducerModel, ReduceError> {
    let mut r = Reader { buf: bytes };
    if r.take::<4>().map_err(|_| ReduceError::BadMagic)? != *MAGIC {
        return Err(ReduceError::BadMagic);
    }
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(ReduceError::UnsupportedVersion(version));
    }
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let n_neighbors = r.u32()? as usize;
    let min_dist = r.f64()?;
    let spread = r.f64()?;
    let n_epochs = r.u32()? as usize;
    let negative_sample_rate = r.u32()? as usize;
    let metric_code = r.u32()?;
    let metric = Metric::from_code(metric_code)
        .ok_or_else(|| ReduceError::Corrupt(format!("unknown metric code {metric_code}")))?;
    let seed = r.u64()?;
    let training = r.f32s(n.saturating_mul(d))?;
    let coords = r.f32s(n.saturating_mul(2))?;
    let curve_a = r.f64()?;
    let curve_b = r.f64()?;
    if !r.buf.is_empty() {
        return Err(ReduceError::Corrupt(format!("{} trailing bytes", r.buf.len())));
    }
    let params = ReducerParams {
        n_neighbors,
        min_dist,
        spread,
        n_epochs: Some(n_epochs),
        negative_sample_rate,
        metric,
        seed,
    };
    let shape_err = |e: ndarray::ShapeError| ReduceError::Corrupt(e.to_string());
    ReducerModel::from_parts(
        params,
        Array2::from_shape_vec((n, d), training).map_err(shape_err)?,
        Array2::from_shape_vec((n, 2), coords).map_err(shape_err)?,
        curve_a,
        curve_b,
    )
}

pub fn save_model(model: &ReducerModel, path: &Path) -> Result<(), ReduceError> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ReducerModel, ReduceError> {
    model_from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduce::fit;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> ReducerModel {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array2::from_shape_fn((15, 3), |_| rng.random_range(-1.0f32..1.0));
        let params = ReducerParams {
            n_neighbors: 4,
            n_epochs: Some(20),
            ..ReducerParams::default()
        };
        fit(x.view(), &params).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let bytes = model_to_bytes(&m);
        assert_eq!(&bytes[..4], b"LLRM");
        assert_eq!(bytes.len(), 4 + 4 * 4 + 8 + 8 + 4 * 3 + 8 + 4 * 15 * 5 + 16);
        let back = model_from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(model_to_bytes(&back), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(MODEL_FILE);
        let m = model();
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn rejects_bad_magic_and_version() {
        let mut bytes = model_to_bytes(&model());
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert_eq!(model_from_bytes(&wrong).unwrap_err(), ReduceError::BadMagic);
        assert_eq!(model_from_bytes(b"LL").unwrap_err(), ReduceError::BadMagic);
        bytes[4..8].copy_from_slice(&999u32.to_le_bytes());
        assert_eq!(
            model_from_bytes(&bytes).unwrap_err(),
            ReduceError::UnsupportedVersion(999)
        );
    }

    #[test]
    fn rejects_truncation_and_missing_file() {
        let bytes = model_to_bytes(&model());
        assert!(matches!(
            model_from_bytes(&bytes[..bytes.len() - 3]),
            Err(ReduceError::Corrupt(_))
        ));
        let err = load_model(Path::new("/nonexistent/reducer.model")).unwrap_err();
        assert!(matches!(err, ReduceError::IoFailure(_)));
    }
}
