//! Little-endian binary formats for feature maps and point features.
//!
//! Feature map: `B23D`, u32 version, u32 view id, u32 rows, u32 cols,
//! u32 dim, u8 class-token flag, 3 padding bytes, rows·cols·dim f32
//! (row, col, channel), then dim f32 of class token if flagged.
//!
//! Point features: u32 N, u32 d, then N·d f32.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureError, FeatureMap, PointFeatureSet};

pub const MAGIC: &[u8; 4] = b"B23D";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 28;

fn io_err(e: std::io::Error) -> FeatureError {
    FeatureError::Io {
        path: String::new(),
        source: e,
    }
}

pub fn write_feature_map(map: &FeatureMap, mut out: impl Write) -> Result<(), FeatureError> {
    let mut buf = Vec::with_capacity(HEADER_LEN + 4 * (map.values().len() + map.dim()));
    buf.extend_from_slice(MAGIC);
    for v in [FORMAT_VERSION, map.view_id, map.rows(), map.cols(), map.dim() as u32] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.push(u8::from(map.class_token().is_some()));
    buf.extend_from_slice(&[0; 3]);
    for v in map.values().iter().chain(map.class_token().into_iter().flatten()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)
}

fn u32_at(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().expect("4 bytes"))
}

fn f32_values(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect()
}

pub fn read_feature_map(mut input: impl Read) -> Result<FeatureMap, FeatureError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() < HEADER_LEN {
        return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            FeatureError::BadMagic
        } else {
            FeatureError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            }
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(FeatureError::BadMagic);
    }
    let version = u32_at(&bytes, 4);
    if version != FORMAT_VERSION {
        return Err(FeatureError::UnsupportedVersion(version));
    }
    let view_id = u32_at(&bytes, 8);
    let (rows, cols, dim) = (u32_at(&bytes, 12), u32_at(&bytes, 16), u32_at(&bytes, 20));
    let has_token = bytes[24] != 0;
    let grid = rows as usize * cols as usize * dim as usize;
    let floats = grid + if has_token { dim as usize } else { 0 };
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < floats * 4 {
        return Err(FeatureError::Truncated {
            expected: floats * 4,
            found: payload.len(),
        });
    }
    if payload.len() > floats * 4 {
        return Err(FeatureError::TrailingBytes);
    }
    let mut values = f32_values(payload);
    let token = has_token.then(|| values.split_off(grid));
    FeatureMap::new(view_id, rows, cols, dim, values, token)
}

/// File name used for a view's feature map.
pub fn feature_file_name(view_id: u32) -> String {
    format!("{view_id}.b23d")
}

pub fn save_feature_map(map: &FeatureMap, dir: impl AsRef<Path>) -> Result<std::path::PathBuf, FeatureError> {
    let path = dir.as_ref().join(feature_file_name(map.view_id));
    let mut buf = Vec::new();
    write_feature_map(map, &mut buf)?;
    fs::write(&path, buf).map_err(|e| FeatureError::io(&path, e))?;
    Ok(path)
}

pub fn load_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap, FeatureError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| FeatureError::io(path, e))?;
    read_feature_map(std::io::BufReader::new(file))
}

/// Values are narrowed to f32.
pub fn write_point_features(set: &PointFeatureSet, mut out: impl Write) -> Result<(), FeatureError> {
    let mut buf = Vec::with_capacity(8 + 4 * set.values().len());
    buf.extend_from_slice(&(set.len() as u32).to_le_bytes());
    buf.extend_from_slice(&(set.dim() as u32).to_le_bytes());
    for &v in set.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&buf).map_err(io_err)
}

pub fn read_point_features(mut input: impl Read) -> Result<PointFeatureSet, FeatureError> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(io_err)?;
    if bytes.len() < 8 {
        return Err(FeatureError::Truncated {
            expected: 8,
            found: bytes.len(),
        });
    }
    let (n, d) = (u32_at(&bytes, 0) as usize, u32_at(&bytes, 4) as usize);
    let payload = &bytes[8..];
    if payload.len() != n * d * 4 {
        return Err(FeatureError::Truncated {
            expected: n * d * 4,
            found: payload.len(),
        });
    }
    let values: Vec<f64> = f32_values(payload).into_iter().map(f64::from).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite);
    }
    Ok(PointFeatureSet::new(d, values, vec![1; n], "file"))
}

pub fn save_point_features(set: &PointFeatureSet, path: impl AsRef<Path>) -> Result<(), FeatureError> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_point_features(set, &mut buf)?;
    fs::write(path, buf).map_err(|e| FeatureError::io(path, e))
}

pub fn load_point_features(path: impl AsRef<Path>) -> Result<PointFeatureSet, FeatureError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FeatureError::io(path, e))?;
    read_point_features(bytes.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_fixed() {
        let map = FeatureMap::new(7, 1, 2, 1, vec![1.0, -2.0], Some(vec![0.5])).unwrap();
        let mut buf = Vec::new();
        write_feature_map(&map, &mut buf).unwrap();
        let mut expected = b"B23D".to_vec();
        for v in [1u32, 7, 1, 2, 1] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        expected.extend_from_slice(&[1, 0, 0, 0]);
        for v in [1.0f32, -2.0, 0.5] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(buf, expected);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(read_feature_map(&b"NOPE"[..]), Err(FeatureError::BadMagic)));
        let map = FeatureMap::constant(0, 2, 2, &[1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_feature_map(&map, &mut buf).unwrap();
        assert!(matches!(
            read_feature_map(&buf[..buf.len() - 1]),
            Err(FeatureError::Truncated { .. })
        ));
        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_feature_map(long.as_slice()), Err(FeatureError::TrailingBytes)));
        let mut v2 = buf.clone();
        v2[4] = 2;
        assert!(matches!(
            read_feature_map(v2.as_slice()),
            Err(FeatureError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn point_features_round_trip() {
        let set = PointFeatureSet::new(2, vec![0.5, 1.0, -3.0, 4.25], vec![1, 0], "synth");
        let mut buf = Vec::new();
        write_point_features(&set, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 16);
        let back = read_point_features(buf.as_slice()).unwrap();
        assert_eq!(back.values(), set.values());
        assert_eq!(back.len(), 2);
    }

    proptest! {
        #[test]
        fn feature_map_round_trip(
            view in 0u32..1000,
            rows in 1u32..5,
            cols in 1u32..5,
            dim in 1u32..6,
            token in any::<bool>(),
            seed in proptest::collection::vec(-1e6f32..1e6, 150),
        ) {
            let n = (rows * cols * dim) as usize;
            let values = seed.iter().cycle().take(n).copied().collect();
            let tok = token.then(|| seed[..dim as usize].to_vec());
            let map = FeatureMap::new(view, rows, cols, dim, values, tok).unwrap();
            let mut buf = Vec::new();
            write_feature_map(&map, &mut buf).unwrap();
            prop_assert_eq!(buf.len(), HEADER_LEN + 4 * (n + if token { dim as usize } else { 0 }));
            let back = read_feature_map(buf.as_slice()).unwrap();
            prop_assert_eq!(back, map);
        }
    }
}
