//! Versioned model container.
//!
//! Layout (little-endian): magic `TFMD`, `u16` version, `u8` kind, `u64`
//! payload length, payload, SHA-256 of the payload. Every matrix is stored as
//! `u64 rows`, `u64 cols` and raw `f64` values, so loading is bit-exact.

use std::path::Path;

use sha2::{Digest, Sha256};
use tiedfactor_core::head::RegressionHead;
use tiedfactor_core::network::{Activation, Layer, LayerSpec};
use tiedfactor_core::{
    AdaptMethod, LatentFactors, Matrix, NetworkParams, SpeakerModel, SufficientStats, UbmModel,
};

use crate::error::{IoError, IoResult};
use crate::fsutil::write_atomic;

pub const MODEL_MAGIC: &[u8; 4] = b"TFMD";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Ubm(Box<UbmModel>),
    Speakers(Vec<SpeakerModel>),
    Stats(Vec<(String, SufficientStats)>),
}

impl Model {
    fn kind(&self) -> u8 {
        match self {
            Model::Ubm(_) => 1,
            Model::Speakers(_) => 2,
            Model::Stats(_) => 3,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        kind_name(self.kind())
    }

    pub fn into_ubm(self) -> IoResult<UbmModel> {
        match self {
            Model::Ubm(u) => Ok(*u),
            other => Err(IoError::Kind {
                expected: "ubm",
                found: other.kind_name(),
            }),
        }
    }

    pub fn into_speakers(self) -> IoResult<Vec<SpeakerModel>> {
        match self {
            Model::Speakers(s) => Ok(s),
            other => Err(IoError::Kind {
                expected: "speakers",
                found: other.kind_name(),
            }),
        }
    }

    pub fn into_stats(self) -> IoResult<Vec<(String, SufficientStats)>> {
        match self {
            Model::Stats(s) => Ok(s),
            other => Err(IoError::Kind {
                expected: "stats",
                found: other.kind_name(),
            }),
        }
    }
}

fn kind_name(k: u8) -> &'static str {
    match k {
        1 => "ubm",
        2 => "speakers",
        3 => "stats",
        _ => "unknown",
    }
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.0.extend_from_slice(s.as_bytes());
    }
    fn matrix(&mut self, m: &Matrix) {
        self.u64(m.rows() as u64);
        self.u64(m.cols() as u64);
        for &x in m.as_slice() {
            self.f64(x);
        }
    }
    fn opt_matrix(&mut self, m: Option<&Matrix>) {
        match m {
            Some(m) => {
                self.u8(1);
                self.matrix(m);
            }
            None => self.u8(0),
        }
    }
    fn stats(&mut self, s: &SufficientStats) {
        self.matrix(&s.syy);
        self.matrix(&s.syx);
        self.u64(s.n);
    }
    fn network(&mut self, p: &NetworkParams) {
        self.u64(p.session_rank() as u64);
        self.u64(p.speaker_rank() as u64);
        self.u64(p.layers().len() as u64);
        for l in p.layers() {
            self.u64(l.spec.in_dim as u64);
            self.u64(l.spec.out_dim as u64);
            self.u8(match l.spec.activation {
                Activation::Softplus => 0,
                Activation::Linear => 1,
            });
            self.u8(l.spec.tf2 as u8);
            self.u8(l.spec.dropout_site as u8);
            self.matrix(&l.w);
            self.f64s(&l.b);
            self.opt_matrix(l.v_session.as_ref());
            self.opt_matrix(l.v_speaker.as_ref());
        }
    }
    fn head(&mut self, h: &RegressionHead) {
        self.matrix(&h.b);
        self.f64s(&h.psi);
        self.f64(h.beta);
        self.f64(h.lambda0);
        self.matrix(&h.prior_mean);
    }
    fn method(&mut self, m: &AdaptMethod) {
        match *m {
            AdaptMethod::MapPrior => self.u8(0),
            AdaptMethod::Interpolated { alpha, normalize } => {
                self.u8(1);
                self.f64(alpha);
                self.u8(normalize as u8);
            }
            AdaptMethod::Factor { iterations, rate } => {
                self.u8(2);
                self.u64(iterations as u64);
                self.f64(rate);
            }
            AdaptMethod::FactorInterpolated {
                iterations,
                rate,
                alpha,
                normalize,
            } => {
                self.u8(3);
                self.u64(iterations as u64);
                self.f64(rate);
                self.f64(alpha);
                self.u8(normalize as u8);
            }
        }
    }
}

struct Dec<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(what: &str) -> IoError {
    IoError::Format(format!("model payload ends inside {what}"))
}

impl<'a> Dec<'a> {
    fn take(&mut self, n: usize, what: &str) -> IoResult<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(what))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self, what: &str) -> IoResult<u8> {
        Ok(self.take(1, what)?[0])
    }
    fn flag(&mut self, what: &str) -> IoResult<bool> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(IoError::Format(format!("{what}: invalid flag {v}"))),
        }
    }
    fn u64(&mut self, what: &str) -> IoResult<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn len(&mut self, what: &str, elem: usize) -> IoResult<usize> {
        let n = self.u64(what)?;
        let remaining = (self.bytes.len() - self.pos) as u64;
        if n.saturating_mul(elem as u64) > remaining {
            return Err(corrupt(what));
        }
        Ok(n as usize)
    }
    fn f64(&mut self, what: &str) -> IoResult<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
    fn f64s(&mut self, what: &str) -> IoResult<Vec<f64>> {
        let n = self.len(what, 8)?;
        (0..n).map(|_| self.f64(what)).collect()
    }
    fn str(&mut self, what: &str) -> IoResult<String> {
        let n = self.len(what, 1)?;
        String::from_utf8(self.take(n, what)?.to_vec())
            .map_err(|_| IoError::Format(format!("{what}: invalid UTF-8")))
    }
    fn matrix(&mut self, what: &str) -> IoResult<Matrix> {
        let r = self.u64(what)? as usize;
        let c = self.len(what, 8)?;
        let n = r.checked_mul(c).ok_or_else(|| corrupt(what))?;
        if n.saturating_mul(8) > self.bytes.len() - self.pos {
            return Err(corrupt(what));
        }
        let v = (0..n)
            .map(|_| self.f64(what))
            .collect::<IoResult<Vec<_>>>()?;
        Ok(Matrix::from_vec(r, c, v)?)
    }
    fn opt_matrix(&mut self, what: &str) -> IoResult<Option<Matrix>> {
        if self.flag(what)? {
            Ok(Some(self.matrix(what)?))
        } else {
            Ok(None)
        }
    }
    fn stats(&mut self) -> IoResult<SufficientStats> {
        let syy = self.matrix("stats S_yy")?;
        let syx = self.matrix("stats S_yx")?;
        let n = self.u64("stats count")?;
        if syy.rows() != syy.cols() || syy.rows() != syx.rows() {
            return Err(IoError::Format("inconsistent stats shapes".into()));
        }
        Ok(SufficientStats { syy, syx, n })
    }
    fn network(&mut self) -> IoResult<NetworkParams> {
        let r1 = self.u64("network ranks")? as usize;
        let r2 = self.u64("network ranks")? as usize;
        let n = self.len("layer count", 1)?;
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let in_dim = self.u64("layer spec")? as usize;
            let out_dim = self.u64("layer spec")? as usize;
            let activation = match self.u8("layer activation")? {
                0 => Activation::Softplus,
                1 => Activation::Linear,
                v => return Err(IoError::Format(format!("unknown activation tag {v}"))),
            };
            let tf2 = self.flag("layer factor flag")?;
            let dropout_site = self.flag("layer dropout flag")?;
            layers.push(Layer {
                spec: LayerSpec {
                    in_dim,
                    out_dim,
                    activation,
                    tf2,
                    dropout_site,
                },
                w: self.matrix("layer weights")?,
                b: self.f64s("layer bias")?,
                v_session: self.opt_matrix("session loading")?,
                v_speaker: self.opt_matrix("speaker loading")?,
            });
        }
        Ok(NetworkParams::from_layers(layers, r1, r2)?)
    }
    fn head(&mut self) -> IoResult<RegressionHead> {
        let b = self.matrix("head weights")?;
        let psi = self.f64s("head variances")?;
        let beta = self.f64("head precision")?;
        let lambda0 = self.f64("head prior precision")?;
        let prior_mean = self.matrix("head prior mean")?;
        // validate through the constructor, then keep the stored precision verbatim
        let mut head = RegressionHead::new(b, psi, lambda0, prior_mean)?;
        head.beta = beta;
        Ok(head)
    }
    fn method(&mut self) -> IoResult<AdaptMethod> {
        Ok(match self.u8("adaptation method")? {
            0 => AdaptMethod::MapPrior,
            1 => AdaptMethod::Interpolated {
                alpha: self.f64("alpha")?,
                normalize: self.flag("normalize")?,
            },
            2 => AdaptMethod::Factor {
                iterations: self.u64("iterations")? as usize,
                rate: self.f64("rate")?,
            },
            3 => AdaptMethod::FactorInterpolated {
                iterations: self.u64("iterations")? as usize,
                rate: self.f64("rate")?,
                alpha: self.f64("alpha")?,
                normalize: self.flag("normalize")?,
            },
            v => return Err(IoError::Format(format!("unknown adaptation tag {v}"))),
        })
    }
}

fn encode_payload(model: &Model) -> Vec<u8> {
    let mut e = Enc::default();
    match model {
        Model::Ubm(u) => {
            e.network(&u.params);
            e.head(&u.head);
            e.stats(&u.stats);
            e.matrix(&u.factors.session);
            e.matrix(&u.factors.speaker);
        }
        Model::Speakers(list) => {
            e.u64(list.len() as u64);
            for s in list {
                e.str(&s.id);
                e.matrix(&s.b);
                match &s.z_speaker {
                    Some(z) => {
                        e.u8(1);
                        e.f64s(z);
                    }
                    None => e.u8(0),
                }
                e.method(&s.method);
            }
        }
        Model::Stats(list) => {
            e.u64(list.len() as u64);
            for (id, st) in list {
                e.str(id);
                e.stats(st);
            }
        }
    }
    e.0
}

fn decode_payload(kind: u8, bytes: &[u8]) -> IoResult<Model> {
    let mut d = Dec { bytes, pos: 0 };
    let model = match kind {
        1 => {
            let params = d.network()?;
            let head = d.head()?;
            let stats = d.stats()?;
            let session = d.matrix("session factors")?;
            let speaker = d.matrix("speaker factors")?;
            Model::Ubm(Box::new(UbmModel {
                params,
                head,
                stats,
                factors: LatentFactors { session, speaker },
            }))
        }
        2 => {
            let n = d.len("speaker count", 1)?;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let id = d.str("speaker id")?;
                let b = d.matrix("speaker weights")?;
                let z_speaker = if d.flag("speaker factor flag")? {
                    Some(d.f64s("speaker factor")?)
                } else {
                    None
                };
                let method = d.method()?;
                list.push(SpeakerModel {
                    id,
                    b,
                    z_speaker,
                    method,
                });
            }
            Model::Speakers(list)
        }
        3 => {
            let n = d.len("stats count", 1)?;
            let mut list = Vec::with_capacity(n);
            for _ in 0..n {
                let id = d.str("stats id")?;
                list.push((id, d.stats()?));
            }
            Model::Stats(list)
        }
        k => return Err(IoError::Format(format!("unknown model kind {k}"))),
    };
    if d.pos != bytes.len() {
        return Err(IoError::Format("trailing bytes in model payload".into()));
    }
    Ok(model)
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let payload = encode_payload(model);
    let mut out = Vec::with_capacity(payload.len() + 47);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.push(model.kind());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&Sha256::digest(&payload));
    out
}

pub fn decode_model(bytes: &[u8]) -> IoResult<Model> {
    if bytes.len() < 6 || &bytes[..4] != MODEL_MAGIC {
        return Err(IoError::Format("not a model file (bad magic)".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(IoError::Version {
            found: version,
            expected: MODEL_VERSION,
        });
    }
    if bytes.len() < 15 {
        return Err(IoError::Format("model header truncated".into()));
    }
    let kind = bytes[6];
    let len = u64::from_le_bytes(bytes[7..15].try_into().unwrap());
    let rest = &bytes[15..];
    if (rest.len() as u64) != len.saturating_add(32) {
        return Err(IoError::Format(format!(
            "model payload length {len} does not match file size"
        )));
    }
    let (payload, digest) = rest.split_at(len as usize);
    if Sha256::digest(payload).as_slice() != digest {
        return Err(IoError::Checksum);
    }
    decode_payload(kind, payload)
}

pub fn save_model(path: &Path, model: &Model) -> IoResult<()> {
    write_atomic(path, &encode_model(model))
}

pub fn load_model(path: &Path) -> IoResult<Model> {
    let bytes = std::fs::read(path).map_err(|e| IoError::at(path, e))?;
    decode_model(&bytes).map_err(|e| e.in_file(path))
}

pub fn load_ubm(path: &Path) -> IoResult<UbmModel> {
    load_model(path)?.into_ubm().map_err(|e| e.in_file(path))
}

pub fn load_speakers(path: &Path) -> IoResult<Vec<SpeakerModel>> {
    load_model(path)?
        .into_speakers()
        .map_err(|e| e.in_file(path))
}
