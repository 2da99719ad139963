use std::path::Path;

use super::{read_maybe_gz, DatasetError, Result};
use crate::matrix::SampleMatrix;

pub const CIFAR_PIXELS: usize = 3072;
/// One label byte followed by the R, G and B planes.
pub const CIFAR_RECORD: usize = 1 + CIFAR_PIXELS;

/// Parses concatenated CIFAR-10 binary records, keeping the channel-major pixel order.
pub fn parse_cifar_records(bytes: &[u8]) -> Result<(SampleMatrix, Vec<u8>)> {
    if bytes.len() % CIFAR_RECORD != 0 {
        return Err(DatasetError::Format(format!(
            "{} bytes is not a whole number of {CIFAR_RECORD}-byte records",
            bytes.len()
        )));
    }
    let n = bytes.len() / CIFAR_RECORD;
    let mut pixels = Vec::with_capacity(n * CIFAR_PIXELS);
    let mut labels = Vec::with_capacity(n);
    for record in bytes.chunks_exact(CIFAR_RECORD) {
        labels.push(record[0]);
        pixels.extend(record[1..].iter().map(|&b| b as f64 / 255.0));
    }
    super::check_labels(&labels)?;
    Ok((SampleMatrix::from_vec(n, CIFAR_PIXELS, pixels), labels))
}

/// Loads and concatenates batch files in the order given.
pub fn load_cifar10<P: AsRef<Path>>(batch_paths: &[P]) -> Result<(SampleMatrix, Vec<u8>)> {
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for path in batch_paths {
        let (m, y) = parse_cifar_records(&read_maybe_gz(path.as_ref())?)
            .map_err(|e| e.in_file(path.as_ref()))?;
        pixels.extend(m.into_vec());
        labels.extend(y);
    }
    Ok((SampleMatrix::from_vec(labels.len(), CIFAR_PIXELS, pixels), labels))
}

pub fn write_cifar_records(labels: &[u8], pixels: &[u8]) -> Vec<u8> {
    assert_eq!(pixels.len(), labels.len() * CIFAR_PIXELS);
    let mut out = Vec::with_capacity(labels.len() * CIFAR_RECORD);
    for (y, p) in labels.iter().zip(pixels.chunks_exact(CIFAR_PIXELS)) {
        out.push(*y);
        out.extend_from_slice(p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_record_fixture() {
        let mut bytes = vec![3u8];
        bytes.extend((0..CIFAR_PIXELS).map(|i| (i % 256) as u8));
        bytes.push(9);
        bytes.extend((0..CIFAR_PIXELS).map(|i| if i < 1024 { 255 } else { 0 }));
        let (m, y) = parse_cifar_records(&bytes).unwrap();
        assert_eq!(y, vec![3, 9]);
        assert_eq!((m.rows(), m.cols()), (2, 3072));
        assert_eq!(m.row(0)[257], 1.0 / 255.0);
        assert_eq!(m.row(1)[1023], 1.0);
        assert_eq!(m.row(1)[1024], 0.0);
    }

    #[test]
    fn misaligned_and_bad_labels() {
        assert!(matches!(parse_cifar_records(&[0u8; CIFAR_RECORD + 1]), Err(DatasetError::Format(_))));
        let mut rec = vec![0u8; 2 * CIFAR_RECORD];
        rec[CIFAR_RECORD] = 10;
        assert!(matches!(parse_cifar_records(&rec), Err(DatasetError::Label { index: 1, label: 10 })));
    }

    #[test]
    fn batches_concatenate_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut paths = Vec::new();
        for b in 0..3u8 {
            let labels = [b, b + 1];
            let pixels: Vec<u8> = (0..2 * CIFAR_PIXELS).map(|i| (i as u8).wrapping_add(b)).collect();
            let path = dir.path().join(format!("batch_{b}.bin"));
            std::fs::write(&path, write_cifar_records(&labels, &pixels)).unwrap();
            paths.push(path);
        }
        let (m, y) = load_cifar10(&paths).unwrap();
        assert_eq!(y, vec![0, 1, 1, 2, 2, 3]);
        assert_eq!(m.rows(), 6);
        assert_eq!(m.row(4)[0], 2.0 / 255.0);
    }
}
