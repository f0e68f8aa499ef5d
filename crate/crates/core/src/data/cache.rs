//! Binary segment cache.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic "DCSEGSET" | version u32 | variates u32 | window u32
//! n_train u32 | n_test u32 | n_labels u32 | n_labels x (len u32, utf-8 bytes)
//! (n_train + n_test) x (variates*window f32 | label u32 | user u32)
//! ```
//!
//! Train segments precede test segments.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Segment, SegmentSet};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const CACHE_MAGIC: &[u8; 8] = b"DCSEGSET";
pub const CACHE_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::format(format!("{v} does not fit in u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

pub fn write_cache<W: Write>(set: &SegmentSet, mut writer: W) -> Result<()> {
    set.validate()?;
    let mut out = Vec::new();
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    for v in [
        set.variates,
        set.window,
        set.train.len(),
        set.test.len(),
        set.label_names.len(),
    ] {
        put_u32(&mut out, v)?;
    }
    for name in &set.label_names {
        put_u32(&mut out, name.len())?;
        out.extend_from_slice(name.as_bytes());
    }
    for s in set.train.iter().chain(&set.test) {
        for &v in s.image.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        put_u32(&mut out, s.label)?;
        out.extend_from_slice(&s.user_id.to_le_bytes());
    }
    writer
        .write_all(&out)
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io("<cache>", e))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("segment cache is truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn count(&mut self) -> Result<usize> {
        self.u32().map(|v| v as usize)
    }
}

pub fn read_cache<R: Read>(mut reader: R) -> Result<SegmentSet> {
    let mut bytes = Vec::new();
    reader
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<cache>", e))?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if c.take(8)? != CACHE_MAGIC {
        return Err(Error::format("not a segment cache (bad magic)"));
    }
    let version = c.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::format(format!(
            "segment cache version {version}, expected {CACHE_VERSION}"
        )));
    }
    let variates = c.count()?;
    let window = c.count()?;
    let n_train = c.count()?;
    let n_test = c.count()?;
    let n_labels = c.count()?;
    let mut label_names = Vec::with_capacity(n_labels.min(1024));
    for _ in 0..n_labels {
        let len = c.count()?;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|_| Error::format("label name is not utf-8"))?;
        label_names.push(name.to_owned());
    }
    let item = variates * window;
    let read_segment = |c: &mut Cursor| -> Result<Segment> {
        let raw = c.take(item * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes(b.try_into().unwrap())))
            .collect();
        Ok(Segment {
            image: Tensor::from_vec(&[1, variates, window], data)?,
            label: c.count()?,
            user_id: c.u32()?,
        })
    };
    let train = (0..n_train)
        .map(|_| read_segment(&mut c))
        .collect::<Result<Vec<_>>>()?;
    let test = (0..n_test)
        .map(|_| read_segment(&mut c))
        .collect::<Result<Vec<_>>>()?;
    if c.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after segment cache",
            bytes.len() - c.pos
        )));
    }
    let set = SegmentSet {
        train,
        test,
        label_names,
        variates,
        window,
    };
    set.validate()?;
    Ok(set)
}

pub fn write_cache_file(set: &SegmentSet, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_cache(set, BufWriter::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn read_cache_file(path: &Path) -> Result<SegmentSet> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_cache(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        Error::Format(msg) => Error::format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_set() -> impl Strategy<Value = SegmentSet> {
        (1usize..4, 1usize..6, 0usize..4, 0usize..4).prop_flat_map(|(m, k, n_train, n_test)| {
            let seg = (prop::collection::vec(-1e4f32..1e4, m * k), 0usize..6, any::<u32>())
                .prop_map(move |(v, label, user_id)| Segment {
                    image: Tensor::from_vec(&[1, m, k], v.into_iter().map(f64::from).collect())
                        .unwrap(),
                    label,
                    user_id,
                });
            (
                prop::collection::vec(seg.clone(), n_train),
                prop::collection::vec(seg, n_test),
            )
                .prop_map(move |(train, test)| SegmentSet {
                    train,
                    test,
                    label_names: crate::data::LabelScheme::V2.label_names(),
                    variates: m,
                    window: k,
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(set in arb_set()) {
            let mut bytes = Vec::new();
            write_cache(&set, &mut bytes).unwrap();
            let back = read_cache(&bytes[..]).unwrap();
            prop_assert_eq!(&back, &set);
            let mut again = Vec::new();
            write_cache(&back, &mut again).unwrap();
            prop_assert_eq!(bytes, again);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(read_cache(&b"NOTACACHE..."[..]), Err(Error::Format(_))));
        let set = SegmentSet {
            train: vec![],
            test: vec![],
            label_names: vec!["a".into()],
            variates: 3,
            window: 4,
        };
        let mut bytes = Vec::new();
        write_cache(&set, &mut bytes).unwrap();
        bytes.push(0);
        assert!(matches!(read_cache(&bytes[..]), Err(Error::Format(_))));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(read_cache(&bytes[..]), Err(Error::Format(_))));
    }
}
