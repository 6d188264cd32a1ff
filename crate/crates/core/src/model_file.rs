//! Versioned binary storage for trained surrogates.
//!
//! Layout (little endian): 8-byte magic, `u32` version, `u8` kind, a free
//! text tag, payload, `u64` FNV-1a checksum of everything before it. Models store their
//! training data and hyperparameters and are refactorized on load, which
//! reproduces predictions bit for bit.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelParams, TrainingSet};
use crate::robustness::SurrogateBundle;
use crate::sampling::BoxDomain;
use crate::warp::{Tail, WarpSpec, WarpedGpModel};

pub const MAGIC: &[u8; 8] = b"RDOPTSRG";
pub const VERSION: u32 = 1;

const KIND_GP: u8 = 1;
const KIND_WARPED: u8 = 2;
const KIND_BUNDLE: u8 = 3;
/// Guards against absurd allocations from corrupt length fields.
const MAX_LEN: u64 = 1 << 32;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}

#[derive(Default)]
struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        v.iter().for_each(|x| self.f64(*x));
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn gp(&mut self, m: &GpModel) {
        let t = m.training();
        self.u64(t.dim() as u64);
        self.u64(t.count() as u64);
        for p in t.points() {
            p.iter().for_each(|x| self.f64(*x));
        }
        t.values().iter().for_each(|x| self.f64(*x));
        let k = m.params();
        self.f64(k.mu0);
        self.f64(k.sigma0_sq);
        self.f64(k.noise_sq);
        self.f64s(&k.length_scales);
    }

    fn tail(&mut self, t: Option<Tail>) {
        match t {
            Some(t) => {
                self.u8(1);
                self.f64(t.bound);
                self.f64(t.cutoff);
            }
            None => self.u8(0),
        }
    }

    fn warped(&mut self, m: &WarpedGpModel) {
        self.tail(m.warp().lower());
        self.tail(m.warp().upper());
        self.f64(m.warp().position());
        self.gp(m.gp());
    }

    fn domain(&mut self, d: &BoxDomain) {
        self.f64s(&d.lower);
        self.f64s(&d.upper);
        self.u64(d.names.len() as u64);
        d.names.iter().for_each(|n| self.str(n));
    }

    fn finish(mut self) -> Vec<u8> {
        let sum = fnv1a(&self.buf);
        self.u64(sum);
        self.buf
    }
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(|| format_err("truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        if n > MAX_LEN {
            return Err(format_err(format!("length field {n} is implausible")));
        }
        Ok(n as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len()?;
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.len()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| format_err("name is not UTF-8"))
    }

    fn gp(&mut self) -> Result<GpModel> {
        let dim = self.len()?;
        let count = self.len()?;
        if dim.checked_mul(count).is_none_or(|n| n > self.buf.len()) {
            return Err(format_err("training set size exceeds the file"));
        }
        let points = (0..count).map(|_| (0..dim).map(|_| self.f64()).collect()).collect::<Result<Vec<Vec<f64>>>>()?;
        let values = (0..count).map(|_| self.f64()).collect::<Result<Vec<f64>>>()?;
        let mu0 = self.f64()?;
        let sigma0_sq = self.f64()?;
        let noise_sq = self.f64()?;
        let length_scales = self.f64s()?;
        GpModel::new(TrainingSet::new(points, values)?, KernelParams { mu0, sigma0_sq, length_scales, noise_sq })
    }

    fn tail(&mut self) -> Result<Option<Tail>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(Tail { bound: self.f64()?, cutoff: self.f64()? })),
            t => Err(format_err(format!("invalid tail flag {t}"))),
        }
    }

    fn warped(&mut self) -> Result<WarpedGpModel> {
        let lower = self.tail()?;
        let upper = self.tail()?;
        let warp = WarpSpec::new(lower, upper, self.f64()?)?;
        Ok(WarpedGpModel::new(warp, self.gp()?))
    }

    fn domain(&mut self) -> Result<BoxDomain> {
        let lower = self.f64s()?;
        let upper = self.f64s()?;
        let n = self.len()?;
        let names = (0..n).map(|_| self.str()).collect::<Result<Vec<_>>>()?;
        BoxDomain::new(lower, upper, names)
    }
}

fn header(kind: u8, tag: &str) -> Encoder {
    let mut e = Encoder::default();
    e.buf.extend_from_slice(MAGIC);
    e.buf.extend_from_slice(&VERSION.to_le_bytes());
    e.u8(kind);
    e.str(tag);
    e
}

fn open(bytes: &[u8], kind: u8) -> Result<Decoder<'_>> {
    if bytes.len() < MAGIC.len() + 4 + 1 + 8 || &bytes[..8] != MAGIC {
        return Err(format_err("not a surrogate model file"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}, expected {VERSION}")));
    }
    let (body, sum) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(sum.try_into().expect("8 bytes")) {
        return Err(format_err("checksum mismatch"));
    }
    if bytes[12] != kind {
        return Err(format_err(format!("file holds model kind {}, expected {kind}", bytes[12])));
    }
    let mut d = Decoder { buf: body, pos: 13 };
    d.str()?;
    Ok(d)
}

/// Tag stored in a model file of any kind.
pub fn file_tag(bytes: &[u8]) -> Result<String> {
    let kind = *bytes.get(12).ok_or_else(|| format_err("not a surrogate model file"))?;
    let mut d = open(bytes, kind)?;
    d.pos = 13;
    d.str()
}

fn done(d: Decoder<'_>) -> Result<()> {
    if d.pos != d.buf.len() {
        return Err(format_err("trailing bytes after model"));
    }
    Ok(())
}

pub fn encode_gp(m: &GpModel, tag: &str) -> Vec<u8> {
    let mut e = header(KIND_GP, tag);
    e.gp(m);
    e.finish()
}

pub fn decode_gp(bytes: &[u8]) -> Result<GpModel> {
    let mut d = open(bytes, KIND_GP)?;
    let m = d.gp()?;
    done(d)?;
    Ok(m)
}

pub fn encode_warped(m: &WarpedGpModel, tag: &str) -> Vec<u8> {
    let mut e = header(KIND_WARPED, tag);
    e.warped(m);
    e.finish()
}

pub fn decode_warped(bytes: &[u8]) -> Result<WarpedGpModel> {
    let mut d = open(bytes, KIND_WARPED)?;
    let m = d.warped()?;
    done(d)?;
    Ok(m)
}

pub fn encode_bundle(b: &SurrogateBundle, tag: &str) -> Vec<u8> {
    let mut e = header(KIND_BUNDLE, tag);
    e.domain(&b.domain);
    e.gp(&b.lambda_model);
    e.warped(&b.fp_model);
    e.warped(&b.eta_model);
    e.finish()
}

pub fn decode_bundle(bytes: &[u8]) -> Result<SurrogateBundle> {
    let mut d = open(bytes, KIND_BUNDLE)?;
    let domain = d.domain()?;
    let lambda = d.gp()?;
    let fp = d.warped()?;
    let eta = d.warped()?;
    done(d)?;
    SurrogateBundle::new(lambda, fp, eta, domain)
}

pub fn write_bundle<W: Write>(mut out: W, b: &SurrogateBundle, tag: &str) -> Result<()> {
    out.write_all(&encode_bundle(b, tag))?;
    Ok(())
}

pub fn read_bundle<R: Read>(mut input: R) -> Result<SurrogateBundle> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    decode_bundle(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::fit;
    use crate::warp::fit_warped;

    fn training() -> TrainingSet {
        let pts: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0, ((i * 7) % 20) as f64 / 19.0]).collect();
        let vals = pts.iter().map(|p| 0.2 + 0.6 * (p[0] * 2.0).sin().powi(2) * (0.5 + 0.5 * p[1])).collect();
        TrainingSet::new(pts, vals).unwrap()
    }

    #[test]
    fn gp_round_trip_is_exact() {
        let m = fit(training(), 0.0).unwrap();
        let back = decode_gp(&encode_gp(&m, "t")).unwrap();
        let q = [0.37, 0.81];
        assert_eq!(m.predict(&q).unwrap(), back.predict(&q).unwrap());
        assert_eq!(m.params(), back.params());
    }

    #[test]
    fn warped_round_trip_is_exact() {
        let m = fit_warped(training(), 0.0, 1.0).unwrap();
        let back = decode_warped(&encode_warped(&m, "t")).unwrap();
        assert_eq!(m.warp(), back.warp());
        let q = [0.9, 0.1];
        assert_eq!(m.predict_bounded(&q).unwrap(), back.predict_bounded(&q).unwrap());
    }

    #[test]
    fn corruption_is_detected() {
        let m = fit(training(), 0.0).unwrap();
        let bytes = encode_gp(&m, "config=abc seed=3");
        assert_eq!(file_tag(&bytes).unwrap(), "config=abc seed=3");
        let mut flipped = bytes.clone();
        flipped[40] ^= 1;
        assert!(matches!(decode_gp(&flipped), Err(Error::Format(_))));
        assert!(decode_gp(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode_warped(&bytes).is_err());
        let mut wrong_version = bytes.clone();
        wrong_version[8] = 9;
        assert!(decode_gp(&wrong_version).is_err());
        assert!(decode_gp(b"garbage").is_err());
    }
}
