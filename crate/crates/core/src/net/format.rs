//! On-disk network format.
//!
//! A network is stored as one JSON document:
//!
//! ```text
//! {
//!   "format": "expressivity-network",
//!   "version": 1,
//!   "activation": "hardtanh" | "relu",
//!   "input_dim": 784,
//!   "hidden_widths": [100, 100],
//!   "output_dim": 10,              // 0 when there is no readout
//!   "init": {"sigma_w_sq": 3.0, "sigma_b_sq": 0.01, "seed": 0} | null,
//!   "layers": [                    // hidden layers, then the readout
//!     {"fan_out": 100, "fan_in": 784, "weights": [...row-major...], "bias": [...]},
//!     ...
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so `read(write(net)) == net`
//! bit for bit.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::network::{Dense, InitSpec, Network};
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "expressivity-network";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    version: u32,
    activation: Activation,
    input_dim: usize,
    hidden_widths: Vec<usize>,
    output_dim: usize,
    init: Option<InitSpec>,
    layers: Vec<LayerRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerRecord {
    fan_out: usize,
    fan_in: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl From<&Dense> for LayerRecord {
    fn from(d: &Dense) -> Self {
        Self {
            fan_out: d.fan_out(),
            fan_in: d.fan_in(),
            weights: d.weights.iter().copied().collect(),
            bias: d.bias.to_vec(),
        }
    }
}

impl TryFrom<LayerRecord> for Dense {
    type Error = Error;

    fn try_from(r: LayerRecord) -> Result<Self> {
        let weights = Array2::from_shape_vec((r.fan_out, r.fan_in), r.weights)
            .map_err(|e| Error::format("network", format!("weight block: {e}")))?;
        Dense::new(weights, Array1::from(r.bias))
    }
}

pub fn write_network<W: Write>(net: &Network, writer: W) -> Result<()> {
    let arch = net.architecture();
    let file = NetworkFile {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        activation: arch.activation,
        input_dim: arch.input_dim,
        hidden_widths: arch.hidden_widths,
        output_dim: arch.output_dim,
        init: net.init().copied(),
        layers: net.layers().map(LayerRecord::from).collect(),
    };
    serde_json::to_writer(writer, &file)?;
    Ok(())
}

pub fn read_network<R: Read>(reader: R) -> Result<Network> {
    let file: NetworkFile = serde_json::from_reader(reader)?;
    if file.format != FORMAT_NAME {
        return Err(Error::format("network", format!("unexpected format tag `{}`", file.format)));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::format("network", format!("unsupported version {}", file.version)));
    }
    let expected_layers = file.hidden_widths.len() + usize::from(file.output_dim > 0);
    if file.layers.len() != expected_layers {
        return Err(Error::dims("layer records", expected_layers, file.layers.len()));
    }
    let mut layers = file
        .layers
        .into_iter()
        .map(Dense::try_from)
        .collect::<Result<Vec<_>>>()?;
    let readout = if file.output_dim > 0 { layers.pop() } else { None };
    let net = Network::from_layers(layers, readout, file.activation)?;
    let arch = net.architecture();
    if arch.input_dim != file.input_dim || arch.hidden_widths != file.hidden_widths || arch.output_dim != file.output_dim {
        return Err(Error::format("network", "header does not match layer shapes"));
    }
    Ok(net.with_init(file.init))
}

pub fn to_string(net: &Network) -> Result<String> {
    let mut buf = Vec::new();
    write_network(net, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json emits utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Architecture;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), depth in 1usize..4, relu in any::<bool>()) {
            let arch = Architecture::uniform(3, 5, depth, 2, if relu { Activation::ReLU } else { Activation::HardTanh });
            let net = Network::sample(&arch, &InitSpec::new(2.0, 0.7, seed)).unwrap();
            let text = to_string(&net).unwrap();
            let back = read_network(text.as_bytes()).unwrap();
            prop_assert_eq!(back, net);
        }
    }

    #[test]
    fn explicit_network_without_readout_round_trips() {
        let net = Network::from_explicit(
            vec![Array2::eye(2)],
            vec![Array1::from(vec![0.1, -0.25])],
            Activation::ReLU,
        )
        .unwrap();
        let back = read_network(to_string(&net).unwrap().as_bytes()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn rejects_wrong_tag_and_shapes() {
        let net = Network::from_explicit(vec![Array2::eye(2)], vec![Array1::zeros(2)], Activation::ReLU).unwrap();
        let text = to_string(&net).unwrap();
        let bad_tag = text.replace(FORMAT_NAME, "something-else");
        assert!(read_network(bad_tag.as_bytes()).is_err());
        let bad_shape = text.replace("\"fan_in\":2", "\"fan_in\":3");
        assert!(read_network(bad_shape.as_bytes()).is_err());
        let bad_version = text.replace("\"version\":1", "\"version\":9");
        assert!(read_network(bad_version.as_bytes()).is_err());
    }
}
