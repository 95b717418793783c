//! Model file: magic `DDNM`, format version, configuration, optional
//! scalers, epoch, then every weight matrix (row-major) and bias vector,
//! then the Adam step count and moment buffers in the same order. All
//! numbers little-endian; reals are 64-bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, AdamState, EpochRecord, NetworkConfig, NetworkState, Penalty};
use crate::binio::{LeReader, LeWriter};
use crate::dataset::Scalers;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DDNM";
const FORMAT_VERSION: u32 = 1;

pub const HISTORY_HEADER: [&str; 8] = [
    "epoch",
    "train_total",
    "train_price",
    "train_deriv",
    "val_total",
    "val_price",
    "val_deriv",
    "lr",
];

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Softplus => 0,
        Activation::Linear => 1,
    }
}

fn activation_from(tag: u8) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Softplus),
        1 => Ok(Activation::Linear),
        t => Err(Error::Format(format!("unknown activation tag {t}"))),
    }
}

fn write_config<W: Write>(w: &mut LeWriter<W>, c: &NetworkConfig) -> Result<()> {
    w.u32(c.layer_sizes.len() as u32)?;
    for &n in &c.layer_sizes {
        w.u64(n as u64)?;
    }
    w.u8(activation_tag(c.activation))?;
    w.u8(activation_tag(c.output_activation))?;
    w.f64(c.beta)?;
    w.f64(c.dropout_rate)?;
    w.f64(c.deriv_loss_weight)?;
    w.f64(c.reg_coefficient)?;
    w.u8(match c.penalty {
        Penalty::L2sq => 0,
        Penalty::L2 => 1,
    })?;
    w.f64(c.lr0)?;
    w.f64(c.lr_decay)?;
    w.u64(c.decay_every as u64)?;
    w.u64(c.batch_size as u64)?;
    w.u64(c.epochs as u64)?;
    w.u64(c.seed)
}

fn read_config<R: Read>(r: &mut LeReader<R>) -> Result<NetworkConfig> {
    let n = r.u32()? as usize;
    if n > 1 << 16 {
        return Err(Error::Format(format!("implausible layer count {n}")));
    }
    let layer_sizes = (0..n).map(|_| r.u64().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let c = NetworkConfig {
        layer_sizes,
        activation: activation_from(r.u8()?)?,
        output_activation: activation_from(r.u8()?)?,
        beta: r.f64()?,
        dropout_rate: r.f64()?,
        deriv_loss_weight: r.f64()?,
        reg_coefficient: r.f64()?,
        penalty: match r.u8()? {
            0 => Penalty::L2sq,
            1 => Penalty::L2,
            t => return Err(Error::Format(format!("unknown penalty tag {t}"))),
        },
        lr0: r.f64()?,
        lr_decay: r.f64()?,
        decay_every: r.u64()? as usize,
        batch_size: r.u64()? as usize,
        epochs: r.u64()? as usize,
        seed: r.u64()?,
    };
    c.validate().map_err(|e| Error::Format(format!("stored configuration is invalid: {e}")))?;
    Ok(c)
}

fn write_params<W: Write>(w: &mut LeWriter<W>, ws: &[Array2<f64>], bs: &[Array1<f64>]) -> Result<()> {
    for (m, b) in ws.iter().zip(bs) {
        // iteration order of a standard-layout array is row-major
        for &x in m.iter() {
            w.f64(x)?;
        }
        for &x in b.iter() {
            w.f64(x)?;
        }
    }
    Ok(())
}

fn read_params<R: Read>(r: &mut LeReader<R>, sizes: &[usize]) -> Result<(Vec<Array2<f64>>, Vec<Array1<f64>>)> {
    let mut ws = Vec::new();
    let mut bs = Vec::new();
    for pair in sizes.windows(2) {
        let (n_in, n_out) = (pair[0], pair[1]);
        let data = (0..n_in * n_out).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        ws.push(Array2::from_shape_vec((n_out, n_in), data).expect("shape matches length"));
        bs.push((0..n_out).map(|_| r.f64()).collect::<Result<Array1<_>>>()?);
    }
    Ok((ws, bs))
}

pub fn save_model(path: impl AsRef<Path>, state: &NetworkState) -> Result<()> {
    let mut w = LeWriter(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    write_config(&mut w, &state.config)?;
    match &state.scalers {
        Some(s) => {
            w.u8(1)?;
            w.f64s(&s.feature_min)?;
            w.f64s(&s.feature_max)?;
            w.f64(s.price_min)?;
            w.f64(s.price_max)?;
        }
        None => w.u8(0)?,
    }
    w.u64(state.epoch as u64)?;
    write_params(&mut w, &state.weights, &state.biases)?;
    w.u64(state.adam.t)?;
    write_params(&mut w, &state.adam.m_w, &state.adam.m_b)?;
    write_params(&mut w, &state.adam.v_w, &state.adam.v_b)?;
    w.0.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<NetworkState> {
    let mut r = LeReader(BufReader::new(File::open(path)?));
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported model format version {version}")));
    }
    let config = read_config(&mut r)?;
    let scalers = match r.u8()? {
        0 => None,
        1 => Some(Scalers {
            feature_min: r.f64_array()?,
            feature_max: r.f64_array()?,
            price_min: r.f64()?,
            price_max: r.f64()?,
        }),
        t => return Err(Error::Format(format!("bad scaler flag {t}"))),
    };
    let epoch = r.u64()? as usize;
    let (weights, biases) = read_params(&mut r, &config.layer_sizes)?;
    let t = r.u64()?;
    let (m_w, m_b) = read_params(&mut r, &config.layer_sizes)?;
    let (v_w, v_b) = read_params(&mut r, &config.layer_sizes)?;
    r.expect_eof()?;
    let state = NetworkState {
        config,
        scalers,
        weights,
        biases,
        epoch,
        adam: AdamState { t, m_w, v_w, m_b, v_b },
    };
    if !state.params().all(|x| x.is_finite()) {
        return Err(Error::Format("model contains non-finite weights".into()));
    }
    Ok(state)
}

pub fn write_history_csv(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HISTORY_HEADER)?;
    for h in history {
        w.write_record([
            h.epoch.to_string(),
            format!("{:e}", h.train.total),
            format!("{:e}", h.train.price_term),
            format!("{:e}", h.train.derivative_term),
            format!("{:e}", h.validation.total),
            format!("{:e}", h.validation.price_term),
            format!("{:e}", h.validation.derivative_term),
            format!("{:e}", h.lr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ddn::{adam_step, forward, init_xavier, Gradients, Mode};
    use ndarray::Array;

    #[test]
    fn model_roundtrip_is_exact() {
        let mut c = NetworkConfig::with_hidden(2, 5);
        c.penalty = Penalty::L2;
        c.seed = u64::MAX;
        let mut s = init_xavier(&c, 3).unwrap();
        s.scalers = Some(Scalers {
            feature_min: [0.1; 9],
            feature_max: [1.7; 9],
            price_min: 0.0,
            price_max: 123.456,
        });
        let mut g = Gradients::zeros_like(&s);
        g.weights[1].fill(0.3);
        adam_step(&mut s, &g, 1e-2);
        s.epoch = 17;

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        save_model(&path, &s).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, s);

        let x = Array::from_shape_fn((3, 9), |(i, j)| (i * 9 + j) as f64 / 27.0);
        let (a, _) = forward(&s, x.view(), Mode::Eval).unwrap();
        let (b, _) = forward(&back, x.view(), Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_other_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        std::fs::write(&path, b"DDN1\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
        let s = init_xavier(&NetworkConfig::with_hidden(1, 2), 0).unwrap();
        save_model(&path, &s).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));
    }

    #[test]
    fn history_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        write_history_csv(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.trim(), "epoch,train_total,train_price,train_deriv,val_total,val_price,val_deriv,lr");
    }
}
