//! Binary parameter files.
//!
//! Layout, all little-endian: the 5-byte magic `RHOX1`, a `u32` count of layer
//! widths, each width as `u32`, then every layer's weights (row-major) followed
//! by its biases as `f64`.

use std::io::{Read, Write};

use super::{Layer, MlpParams, NnetError};

pub const CHECKPOINT_MAGIC: &[u8; 5] = b"RHOX1";

pub fn write_params<W: Write>(out: &mut W, params: &MlpParams) -> Result<(), NnetError> {
    let widths = params.widths();
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&(widths.len() as u32).to_le_bytes())?;
    for w in &widths {
        out.write_all(&(*w as u32).to_le_bytes())?;
    }
    for layer in params.layers() {
        for v in layer.weights.iter().chain(&layer.biases) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32, NnetError> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64s<R: Read>(input: &mut R, n: usize) -> Result<Vec<f64>, NnetError> {
    let mut buf = [0u8; 8];
    (0..n)
        .map(|_| {
            input.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        })
        .collect()
}

pub fn read_params<R: Read>(input: &mut R) -> Result<MlpParams, NnetError> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnetError::BadCheckpoint(format!("bad magic {magic:?}")));
    }
    let count = read_u32(input)? as usize;
    if !(2..=64).contains(&count) {
        return Err(NnetError::BadCheckpoint(format!(
            "implausible layer count {count}"
        )));
    }
    let widths = (0..count)
        .map(|_| read_u32(input).map(|w| w as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let layers = widths
        .windows(2)
        .map(|w| {
            Ok(Layer {
                inputs: w[0],
                outputs: w[1],
                weights: read_f64s(input, w[0] * w[1])?,
                biases: read_f64s(input, w[1])?,
            })
        })
        .collect::<Result<Vec<_>, NnetError>>()?;
    MlpParams::from_layers(layers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_layout() {
        let p = MlpParams::zeros(&[2, 3, 1]).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &p).unwrap();
        assert_eq!(&bytes[..5], b"RHOX1");
        assert_eq!(&bytes[5..9], &3u32.to_le_bytes());
        assert_eq!(&bytes[9..13], &2u32.to_le_bytes());
        assert_eq!(bytes.len(), 5 + 4 * 4 + 8 * p.param_count());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let p = MlpParams::zeros(&[2, 3, 1]).unwrap();
        let mut bytes = Vec::new();
        write_params(&mut bytes, &p).unwrap();
        let mut wrong = bytes.clone();
        wrong[0] = b'X';
        assert!(matches!(
            read_params(&mut wrong.as_slice()),
            Err(NnetError::BadCheckpoint(_))
        ));
        bytes.pop();
        assert!(matches!(
            read_params(&mut bytes.as_slice()),
            Err(NnetError::Io(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), hidden in 1usize..20, inputs in 1usize..8) {
            let p = MlpParams::he_uniform(&[inputs, hidden, hidden, 3], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let mut bytes = Vec::new();
            write_params(&mut bytes, &p).unwrap();
            let back = read_params(&mut bytes.as_slice()).unwrap();
            let mut again = Vec::new();
            write_params(&mut again, &back).unwrap();
            prop_assert_eq!(bytes, again);
            prop_assert_eq!(back, p);
        }
    }
}
