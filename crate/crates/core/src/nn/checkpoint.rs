//! HZGW parameter checkpoint files.
//!
//! Layout (little-endian): magic `"HZGW"`, u32 version, u64 header
//! length, a JSON header describing input shape, layer table and array
//! shapes, then every array as contiguous f64 blocks in header order
//! (trainable arrays first, then running arrays, per layer).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::layer::{LayerSpec, LayerState};
use super::network::NetworkParams;

const MAGIC: &[u8; 4] = b"HZGW";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    input_shape: (usize, usize, usize),
    specs: Vec<LayerSpec>,
    arrays: Vec<ArrayRecord>,
}

#[derive(Serialize, Deserialize)]
struct ArrayRecord {
    layer: usize,
    role: Role,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize, PartialEq, Clone, Copy)]
#[serde(rename_all = "snake_case")]
enum Role {
    Trainable,
    Running,
}

pub fn save_network(network: &NetworkParams, path: &Path) -> Result<()> {
    let mut arrays = Vec::new();
    let mut blocks: Vec<&ArrayD<f64>> = Vec::new();
    for (li, state) in network.states().iter().enumerate() {
        for a in &state.trainable {
            arrays.push(ArrayRecord {
                layer: li,
                role: Role::Trainable,
                shape: a.shape().to_vec(),
            });
            blocks.push(a);
        }
        for a in &state.running {
            arrays.push(ArrayRecord {
                layer: li,
                role: Role::Running,
                shape: a.shape().to_vec(),
            });
            blocks.push(a);
        }
    }
    let header = Header {
        input_shape: network.input_shape(),
        specs: network.specs().to_vec(),
        arrays,
    };
    let header_bytes =
        serde_json::to_vec(&header).map_err(|e| Error::Config(format!("checkpoint header: {}", e)))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u64::<LittleEndian>(header_bytes.len() as u64)?;
    w.write_all(&header_bytes)?;
    for block in blocks {
        for &v in block.iter() {
            w.write_f64::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_network(path: &Path) -> Result<NetworkParams> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"HZGW\""));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {}", version)));
    }
    let header_len = r.read_u64::<LittleEndian>()? as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::format(16, format!("malformed header: {}", e)))?;

    let mut states: Vec<LayerState> = header
        .specs
        .iter()
        .map(|_| LayerState {
            trainable: Vec::new(),
            running: Vec::new(),
        })
        .collect();
    for record in &header.arrays {
        if record.layer >= states.len() {
            return Err(Error::format(
                16,
                format!("array record references layer {}", record.layer),
            ));
        }
        let len: usize = record.shape.iter().product();
        let mut data = vec![0.0f64; len];
        r.read_f64_into::<LittleEndian>(&mut data)?;
        let array = ArrayD::from_shape_vec(IxDyn(&record.shape), data)
            .map_err(|e| Error::format(0, format!("array shape: {}", e)))?;
        match record.role {
            Role::Trainable => states[record.layer].trainable.push(array),
            Role::Running => states[record.layer].running.push(array),
        }
    }

    let network = NetworkParams::from_parts(header.specs, states, header.input_shape);
    // a checkpoint must describe a coherent network
    network.shape_chain()?;
    Ok(network)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::layer::Pad2;
    use crate::rng::RunRng;

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let specs = vec![
            LayerSpec::Conv {
                in_channels: 2,
                out_channels: 3,
                filter: 3,
                stride: (1, 1),
                pad: Pad2::symmetric(1, 1),
            },
            LayerSpec::BatchNorm {
                features: 3,
                momentum: 0.99,
                eps: 1e-5,
            },
            LayerSpec::Flatten,
            LayerSpec::Dense {
                in_features: 3 * 4 * 4,
                out_features: 2,
            },
        ];
        let mut stream = RunRng::new(5).stream("ckpt", &[]);
        let net = NetworkParams::build(specs, (2, 4, 4), &mut stream).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.hzgw");
        save_network(&net, &path).unwrap();
        let back = load_network(&path).unwrap();

        assert_eq!(back.specs(), net.specs());
        assert_eq!(back.input_shape(), net.input_shape());
        for (a, b) in net.states().iter().zip(back.states()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.hzgw");
        std::fs::write(&path, b"JUNKxxxxxxxxxxxxxxxx").unwrap();
        assert!(load_network(&path).is_err());
    }
}
