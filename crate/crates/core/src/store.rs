//! Versioned binary checkpoints.
//!
//! Byte layout (all integers and floats little-endian):
//!
//! ```text
//! magic    "SSRBMCKP"                      8 bytes
//! version  major: u16, minor: u16
//! sections tag: [u8; 4], length: u64, payload
//!   LAYT   n_visible, n_states, n_hidden, n_labels: u64
//!   META   regime: u8 (0 ff, 1 ff-gen-only, 2 pcd), k: u64, learning_rate: f64,
//!          minibatch_size: u64, update_count: u64, seed: u64,
//!          combination: u8 (0 average, 1 alternate), readout: u8 (0 argmax, 1 sample),
//!          dataset_fingerprint: u64            (absent in format 0)
//!   ALPH   symbols as UTF-8
//!   LABL   count: u64, then per name length: u64 and UTF-8 bytes
//!   PARM   a, b, c, w, d as f64 arrays in row-major order
//!   POOL   optional: n_chains, seed, step_counter: u64, then per chain
//!          visible bytes, hidden bytes, label: u64,
//!          rng key: [u8; 32], rng stream: u64, rng word position: u128
//!   END    empty
//! checksum CRC-32 (IEEE) of every preceding byte: u32
//! ```
//!
//! Unknown sections are skipped. Files with a newer major version are
//! rejected; format 0 files load with a zero dataset fingerprint.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{ChainState, Layout, ModelParams};
use crate::rng::ChainRng;
use crate::sampler::{ChainPool, Readout};
use crate::trainer::{GradientCombination, Regime, TrainConfig};

pub const MAGIC: &[u8; 8] = b"SSRBMCKP";
pub const FORMAT_MAJOR: u16 = 1;
pub const FORMAT_MINOR: u16 = 0;

/// How the stored model was trained.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub regime: Regime,
    pub k: u64,
    pub learning_rate: f64,
    pub minibatch_size: u64,
    /// Gradient updates applied so far (the model's age).
    pub update_count: u64,
    pub seed: u64,
    pub combination: GradientCombination,
    pub readout: Readout,
    pub dataset_fingerprint: u64,
}

impl TrainingMeta {
    pub fn from_config(config: &TrainConfig, update_count: u64, dataset_fingerprint: u64) -> Self {
        TrainingMeta {
            regime: config.regime,
            k: config.k as u64,
            learning_rate: config.learning_rate,
            minibatch_size: config.minibatch_size as u64,
            update_count,
            seed: config.seed,
            combination: config.combination,
            readout: config.readout,
            dataset_fingerprint,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub meta: TrainingMeta,
    pub alphabet: Vec<char>,
    pub label_names: Vec<String>,
    pub pool: Option<ChainPool>,
}

impl Checkpoint {
    pub fn layout(&self) -> Layout {
        self.params.layout
    }

    /// Warns (without failing) when `dataset` differs from the training data.
    pub fn check_fingerprint(&self, dataset: &LabeledDataset) -> bool {
        let fp = dataset.fingerprint();
        let same = fp == self.meta.dataset_fingerprint;
        if !same {
            log::warn!(
                "dataset fingerprint {fp:016x} differs from the training fingerprint {:016x}",
                self.meta.dataset_fingerprint
            );
        }
        same
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        encode(self, FORMAT_MAJOR, FORMAT_MINOR)
    }
}

fn regime_code(r: Regime) -> u8 {
    match r {
        Regime::Ff => 0,
        Regime::FfGenerationOnly => 1,
        Regime::Pcd => 2,
    }
}

fn section(out: &mut Vec<u8>, tag: &[u8; 4], payload: &[u8]) {
    out.extend_from_slice(tag);
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    buf.reserve(xs.len() * 8);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

fn encode(ck: &Checkpoint, major: u16, minor: u16) -> Vec<u8> {
    let l = ck.params.layout;
    let mut out = Vec::with_capacity(64 + ck.params.n_parameters() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&major.to_le_bytes());
    out.extend_from_slice(&minor.to_le_bytes());

    let mut buf = Vec::new();
    for x in [l.n_visible, l.n_states, l.n_hidden, l.n_labels] {
        put_u64(&mut buf, x as u64);
    }
    section(&mut out, b"LAYT", &buf);

    let m = &ck.meta;
    buf.clear();
    buf.push(regime_code(m.regime));
    put_u64(&mut buf, m.k);
    buf.extend_from_slice(&m.learning_rate.to_le_bytes());
    put_u64(&mut buf, m.minibatch_size);
    put_u64(&mut buf, m.update_count);
    put_u64(&mut buf, m.seed);
    buf.push(u8::from(m.combination == GradientCombination::Alternate));
    buf.push(u8::from(m.readout == Readout::FinalSample));
    if major >= 1 {
        put_u64(&mut buf, m.dataset_fingerprint);
    }
    section(&mut out, b"META", &buf);

    section(&mut out, b"ALPH", ck.alphabet.iter().collect::<String>().as_bytes());

    buf.clear();
    put_u64(&mut buf, ck.label_names.len() as u64);
    for name in &ck.label_names {
        put_u64(&mut buf, name.len() as u64);
        buf.extend_from_slice(name.as_bytes());
    }
    section(&mut out, b"LABL", &buf);

    buf.clear();
    for (_, group) in ck.params.groups() {
        put_f64s(&mut buf, group);
    }
    section(&mut out, b"PARM", &buf);

    if let Some(pool) = &ck.pool {
        buf.clear();
        put_u64(&mut buf, pool.len() as u64);
        put_u64(&mut buf, pool.seed());
        put_u64(&mut buf, pool.step_counter());
        for (state, rng) in pool.states().iter().zip(pool.rngs()) {
            buf.extend_from_slice(&state.visible);
            buf.extend_from_slice(&state.hidden);
            put_u64(&mut buf, state.label as u64);
            buf.extend_from_slice(&rng.get_seed());
            put_u64(&mut buf, rng.get_stream());
            buf.extend_from_slice(&rng.get_word_pos().to_le_bytes());
        }
        section(&mut out, b"POOL", &buf);
    }

    section(&mut out, b"END ", &[]);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Writes `checkpoint` atomically: a temporary file in the target directory
/// is renamed over `path` only once fully written.
pub fn save(checkpoint: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_atomic(path, &checkpoint.to_bytes())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Bounds-checked little-endian reader over one section.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], path: &'a Path, what: &'static str) -> Self {
        Reader { bytes, pos: 0, path, what }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated {
                path: self.path.into(),
                what: self.what.into(),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().expect("16 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        let x = self.u64()?;
        usize::try_from(x).map_err(|_| self.dimension(format!("{} value {x} too large", self.what)))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.dimension("array too large".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn string(&mut self, n: usize) -> Result<String> {
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| Error::parse(self.path, format!("{} is not UTF-8", self.what)))
    }

    fn dimension(&self, message: String) -> Error {
        Error::Dimension {
            path: self.path.into(),
            message,
        }
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(self.dimension(format!("{} bytes left over in {}", self.bytes.len() - self.pos, self.what)));
        }
        Ok(())
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes, path)
}

/// Parses a checkpoint image; `path` is only used in error messages.
pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let n = bytes.len().min(MAGIC.len());
    if bytes[..n] != MAGIC[..n] {
        return Err(Error::BadMagic { path: path.into() });
    }
    let mut head = Reader::new(bytes, path, "header");
    head.take(MAGIC.len())?;
    let major = head.u16()?;
    let minor = head.u16()?;
    if major > FORMAT_MAJOR {
        return Err(Error::UnsupportedVersion {
            path: path.into(),
            found_major: major,
            found_minor: minor,
            supported_major: FORMAT_MAJOR,
        });
    }

    let mut sections: Vec<([u8; 4], &[u8])> = Vec::new();
    let mut walk = Reader::new(bytes, path, "section table");
    walk.pos = head.pos;
    loop {
        let tag: [u8; 4] = walk.take(4)?.try_into().expect("4 bytes");
        let len = walk.usize()?;
        let payload = walk.take(len)?;
        if &tag == b"END " {
            break;
        }
        sections.push((tag, payload));
    }
    let body_end = walk.pos;
    walk.what = "checksum";
    let stored = u32::from_le_bytes(walk.take(4)?.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: path.into(),
            stored,
            computed,
        });
    }
    walk.finish()?;

    let find = |tag: &[u8; 4], what: &'static str| -> Result<Reader> {
        sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, p)| Reader::new(p, path, what))
            .ok_or_else(|| Error::parse(path, format!("missing {what} section")))
    };

    let mut r = find(b"LAYT", "layout")?;
    let layout = Layout {
        n_visible: r.usize()?,
        n_states: r.usize()?,
        n_hidden: r.usize()?,
        n_labels: r.usize()?,
    };
    r.finish()?;
    layout.validate().map_err(|e| r.dimension(e.to_string()))?;

    let mut r = find(b"META", "metadata")?;
    let regime = match r.u8()? {
        0 => Regime::Ff,
        1 => Regime::FfGenerationOnly,
        2 => Regime::Pcd,
        x => return Err(Error::parse(path, format!("unknown regime code {x}"))),
    };
    let k = r.u64()?;
    let learning_rate = r.f64()?;
    let minibatch_size = r.u64()?;
    let update_count = r.u64()?;
    let seed = r.u64()?;
    let combination = if r.u8()? == 1 { GradientCombination::Alternate } else { GradientCombination::Average };
    let readout = if r.u8()? == 1 { Readout::FinalSample } else { Readout::FinalArgmax };
    // Format 0 predates dataset fingerprints.
    let dataset_fingerprint = if major >= 1 { r.u64()? } else { 0 };
    r.finish()?;
    let meta = TrainingMeta {
        regime,
        k,
        learning_rate,
        minibatch_size,
        update_count,
        seed,
        combination,
        readout,
        dataset_fingerprint,
    };

    let mut r = find(b"ALPH", "alphabet")?;
    let alphabet: Vec<char> = r.string(r.bytes.len())?.chars().collect();
    if alphabet.len() != layout.n_states {
        return Err(r.dimension(format!("{} alphabet symbols for {} states", alphabet.len(), layout.n_states)));
    }

    let mut r = find(b"LABL", "label names")?;
    let count = r.usize()?;
    if count != layout.n_labels {
        return Err(r.dimension(format!("{count} label names for {} labels", layout.n_labels)));
    }
    let mut label_names = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.usize()?;
        label_names.push(r.string(len)?);
    }
    r.finish()?;

    let mut r = find(b"PARM", "parameters")?;
    let fs = layout.field_states();
    let (nv, nh, nl) = (layout.n_visible, layout.n_hidden, layout.n_labels);
    let expected = (nv * fs + nh + nl + nv * fs * nh + nl * nh) * 8;
    if r.bytes.len() != expected {
        return Err(r.dimension(format!("parameter block is {} bytes, layout needs {expected}", r.bytes.len())));
    }
    let params = ModelParams {
        layout,
        visible_bias: Array2::from_shape_vec((nv, fs), r.f64s(nv * fs)?).expect("sized"),
        hidden_bias: Array1::from(r.f64s(nh)?),
        label_bias: Array1::from(r.f64s(nl)?),
        weights: Array3::from_shape_vec((nv, fs, nh), r.f64s(nv * fs * nh)?).expect("sized"),
        label_weights: Array2::from_shape_vec((nl, nh), r.f64s(nl * nh)?).expect("sized"),
    };

    let pool = match sections.iter().find(|(t, _)| t == b"POOL") {
        None => None,
        Some((_, payload)) => {
            let mut r = Reader::new(payload, path, "chain pool");
            let chains = r.usize()?;
            let pool_seed = r.u64()?;
            let step_counter = r.u64()?;
            let per_chain = nv + nh + 8 + 32 + 8 + 16;
            if chains.checked_mul(per_chain) != Some(payload.len() - 24) {
                return Err(r.dimension(format!("pool of {chains} chains does not match its section size")));
            }
            let mut states = Vec::with_capacity(chains);
            let mut rngs: Vec<ChainRng> = Vec::with_capacity(chains);
            for _ in 0..chains {
                let visible = r.take(nv)?.to_vec();
                let hidden = r.take(nh)?.to_vec();
                let label = r.usize()?;
                let key: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(r.u64()?);
                rng.set_word_pos(r.u128()?);
                states.push(ChainState { visible, hidden, label });
                rngs.push(rng);
            }
            Some(ChainPool::from_parts(layout, states, rngs, pool_seed, step_counter).map_err(|e| r.dimension(e.to_string()))?)
        }
    };

    let checkpoint = Checkpoint {
        params,
        meta,
        alphabet,
        label_names,
        pool,
    };
    Ok(checkpoint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{self, ClampMode};

    fn sample(with_pool: bool) -> Checkpoint {
        let layout = Layout::new(5, 3, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::random_gaussian(layout, 0.3, &mut rng);
        let pool = with_pool.then(|| {
            let mut p = ChainPool::init_random(3, layout, 9).unwrap();
            sampler::run(&mut p, &params, ClampMode::Free, 4).unwrap();
            p
        });
        Checkpoint {
            params,
            meta: TrainingMeta {
                regime: Regime::Pcd,
                k: 100,
                learning_rate: 0.01,
                minibatch_size: 3,
                update_count: 17,
                seed: 42,
                combination: GradientCombination::Average,
                readout: Readout::FinalArgmax,
                dataset_fingerprint: 0xdead_beef,
            },
            alphabet: vec!['A', 'B', '-'],
            label_names: vec!["x".into(), "yy".into()],
            pool,
        }
    }

    #[test]
    fn round_trip_with_and_without_pool() {
        let dir = tempfile::tempdir().unwrap();
        for with_pool in [false, true] {
            let ck = sample(with_pool);
            let p = dir.path().join("m.ckpt");
            save(&ck, &p).unwrap();
            let back = load(&p).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_bytes(), fs::read(&p).unwrap());
        }
    }

    #[test]
    fn resumed_pool_continues_identically() {
        let ck = sample(true);
        let mut back = from_bytes(&ck.to_bytes(), Path::new("mem")).unwrap();
        let mut original = ck.pool.clone().unwrap();
        let resumed = back.pool.as_mut().unwrap();
        sampler::run(&mut original, &ck.params, ClampMode::Free, 3).unwrap();
        sampler::run(resumed, &ck.params, ClampMode::Free, 3).unwrap();
        assert_eq!(&original, resumed);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = sample(false).to_bytes();
        let mut flipped = bytes.clone();
        let mid = bytes.len() / 2;
        flipped[mid] ^= 0x40;
        assert!(matches!(from_bytes(&flipped, Path::new("x")), Err(Error::ChecksumMismatch { .. })));

        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(from_bytes(&magic, Path::new("x")), Err(Error::BadMagic { .. })));

        let mut newer = bytes.clone();
        newer[8..10].copy_from_slice(&2u16.to_le_bytes());
        assert!(matches!(from_bytes(&newer, Path::new("x")), Err(Error::UnsupportedVersion { found_major: 2, .. })));
    }

    #[test]
    fn every_truncation_fails_cleanly() {
        let bytes = sample(true).to_bytes();
        for len in 0..bytes.len() {
            let err = from_bytes(&bytes[..len], Path::new("t")).unwrap_err();
            assert!(
                matches!(err, Error::Truncated { .. } | Error::ChecksumMismatch { .. } | Error::Dimension { .. }),
                "len {len}: {err}"
            );
        }
    }

    #[test]
    fn format_zero_migrates_with_zero_fingerprint() {
        let ck = sample(false);
        let old = encode(&ck, 0, 3);
        let back = from_bytes(&old, Path::new("v0")).unwrap();
        assert_eq!(back.meta.dataset_fingerprint, 0);
        assert_eq!(back.params, ck.params);
        assert_eq!(back.meta.update_count, 17);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut ck = sample(false);
        ck.alphabet.pop();
        assert!(matches!(from_bytes(&ck.to_bytes(), Path::new("d")), Err(Error::Dimension { .. })));
    }
}
