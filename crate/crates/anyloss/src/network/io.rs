//! Trained-model serialization.
//!
//! Models are stored in a line-oriented `key value...` text format, one key
//! per line, floats printed in shortest round-trip form:
//!
//! ```text
//! anyloss-model v1
//! arch slp|mlp
//! input_dim <int>
//! seed <int>
//! scale_l <float>
//! out_bias <float>
//! out_weights <float> ...
//! hidden <int>                 (mlp only)
//! hidden_bias <float> ...      (mlp only)
//! hidden_weights <float> ...   (mlp only, row-major input_dim x hidden)
//! batch_norm 0|1               (mlp only)
//! bn_eps / bn_momentum / bn_gamma / bn_shift /
//! bn_running_mean / bn_running_var               (when batch_norm 1)
//! ```
//!
//! The layout is stable: readers ignore unknown keys, and every value a
//! forward pass needs (weights, batch-norm statistics, the amplifying
//! scale, and the init seed) is recorded.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::approx::AmplifyingScale;
use crate::error::{Error, Result};
use crate::network::{Architecture, BatchNorm, HiddenLayer, Network, NetworkConfig};

/// A deserialized model: the network plus the amplifying scale it was
/// trained with.
#[derive(Debug, Clone)]
pub struct SavedModel {
    pub network: Network,
    pub scale: AmplifyingScale,
}

fn push_vec(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
    out.push_str(key);
    for v in values {
        write!(out, " {v}").expect("writing to string cannot fail");
    }
    out.push('\n');
}

/// Serializes a trained network to `path`.
pub fn save_model(net: &Network, scale: AmplifyingScale, path: &Path) -> Result<()> {
    let mut out = String::from("anyloss-model v1\n");
    let cfg = net.config();
    match cfg.arch {
        Architecture::Slp => out.push_str("arch slp\n"),
        Architecture::Mlp { .. } => out.push_str("arch mlp\n"),
    }
    writeln!(out, "input_dim {}", cfg.input_dim).unwrap();
    writeln!(out, "seed {}", cfg.seed).unwrap();
    writeln!(out, "scale_l {}", scale.value()).unwrap();
    writeln!(out, "out_bias {}", net.out_bias()).unwrap();
    push_vec(&mut out, "out_weights", net.out_weights().iter().copied());
    if let Some(layer) = net.hidden() {
        writeln!(out, "hidden {}", layer.bias.len()).unwrap();
        push_vec(&mut out, "hidden_bias", layer.bias.iter().copied());
        push_vec(&mut out, "hidden_weights", layer.weights.iter().copied());
        match &layer.batch_norm {
            None => out.push_str("batch_norm 0\n"),
            Some(bn) => {
                out.push_str("batch_norm 1\n");
                writeln!(out, "bn_eps {}", bn.eps).unwrap();
                writeln!(out, "bn_momentum {}", bn.momentum).unwrap();
                push_vec(&mut out, "bn_gamma", bn.gamma.iter().copied());
                push_vec(&mut out, "bn_shift", bn.shift.iter().copied());
                push_vec(&mut out, "bn_running_mean", bn.running_mean.iter().copied());
                push_vec(&mut out, "bn_running_var", bn.running_var.iter().copied());
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

struct Fields(HashMap<String, Vec<String>>);

impl Fields {
    fn get(&self, key: &str) -> Result<&[String]> {
        self.0
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Config(format!("model file is missing key '{key}'")))
    }

    fn scalar<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let vals = self.get(key)?;
        if vals.len() != 1 {
            return Err(Error::Config(format!(
                "model key '{key}' expects one value, found {}",
                vals.len()
            )));
        }
        vals[0]
            .parse()
            .map_err(|_| Error::Config(format!("model key '{key}': cannot parse '{}'", vals[0])))
    }

    fn floats(&self, key: &str, expect: usize) -> Result<Vec<f64>> {
        let vals = self.get(key)?;
        if vals.len() != expect {
            return Err(Error::Config(format!(
                "model key '{key}' expects {expect} values, found {}",
                vals.len()
            )));
        }
        vals.iter()
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("model key '{key}': cannot parse '{v}'")))
            })
            .collect()
    }
}

/// Loads a model written by [`save_model`].
pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header.trim() != "anyloss-model v1" {
        return Err(Error::Config(format!(
            "unrecognized model header '{header}'"
        )));
    }
    let mut map = HashMap::new();
    for line in lines {
        let mut parts = line.split_whitespace().map(str::to_string);
        if let Some(key) = parts.next() {
            map.insert(key, parts.collect());
        }
    }
    let fields = Fields(map);

    let input_dim: usize = fields.scalar("input_dim")?;
    let seed: u64 = fields.scalar("seed")?;
    let scale = AmplifyingScale::new(fields.scalar("scale_l")?)?;
    let out_bias: f64 = fields.scalar("out_bias")?;
    let arch_name = fields.scalar::<String>("arch")?;

    let (arch, hidden) = match arch_name.as_str() {
        "slp" => (Architecture::Slp, None),
        "mlp" => {
            let h: usize = fields.scalar("hidden")?;
            let has_bn = fields.scalar::<u8>("batch_norm")? == 1;
            let bias = Array1::from(fields.floats("hidden_bias", h)?);
            let weights = Array2::from_shape_vec(
                (input_dim, h),
                fields.floats("hidden_weights", input_dim * h)?,
            )
            .expect("shape matches element count");
            let batch_norm = if has_bn {
                Some(BatchNorm {
                    gamma: Array1::from(fields.floats("bn_gamma", h)?),
                    shift: Array1::from(fields.floats("bn_shift", h)?),
                    running_mean: Array1::from(fields.floats("bn_running_mean", h)?),
                    running_var: Array1::from(fields.floats("bn_running_var", h)?),
                    eps: fields.scalar("bn_eps")?,
                    momentum: fields.scalar("bn_momentum")?,
                })
            } else {
                None
            };
            (
                Architecture::Mlp {
                    hidden: h,
                    batch_norm: has_bn,
                },
                Some(HiddenLayer {
                    weights,
                    bias,
                    batch_norm,
                }),
            )
        }
        other => return Err(Error::Config(format!("unknown architecture '{other}'"))),
    };

    let out_len = match arch {
        Architecture::Slp => input_dim,
        Architecture::Mlp { hidden, .. } => hidden,
    };
    let network = Network {
        config: NetworkConfig {
            arch,
            input_dim,
            seed,
        },
        hidden,
        out_weights: Array1::from(fields.floats("out_weights", out_len)?),
        out_bias,
    };
    Ok(SavedModel { network, scale })
}
