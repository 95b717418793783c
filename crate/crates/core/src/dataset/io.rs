//! Dataset container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic            b"DDN1"
//! format version   u32
//! generator vers.  u32
//! seed             u64
//! n samples        u64
//! ranges           9 x (lo f64, hi f64)
//! samples          n x 15 f64, in CSV column order
//! split sizes      3 x u64 (train, validation, test)
//! split indices    u64 each, train then validation then test
//! has scalers      u8
//! scalers          9 min f64, 9 max f64, price min f64, price max f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use super::{Dataset, DatasetSplit, LabeledSample, ParameterRanges, Scalers};
use crate::binio::{LeReader, LeWriter};
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"DDN1";
const FORMAT_VERSION: u32 = 1;

pub const CSV_HEADER: [&str; 15] = [
    "kappa", "lambda", "sigma", "rho", "v0", "r", "tau", "s0", "k", "price", "dk", "dl", "ds", "drho", "dv0",
];

pub fn save_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let mut w = LeWriter(BufWriter::new(File::create(path)?));
    w.bytes(MAGIC)?;
    w.u32(FORMAT_VERSION)?;
    w.u32(ds.generator_version)?;
    w.u64(ds.seed)?;
    w.u64(ds.samples.len() as u64)?;
    for j in 0..9 {
        w.f64(ds.ranges.lo[j])?;
        w.f64(ds.ranges.hi[j])?;
    }
    for s in &ds.samples {
        w.f64s(&s.to_row())?;
    }
    let parts = [&ds.split.train, &ds.split.validation, &ds.split.test];
    for p in parts {
        w.u64(p.len() as u64)?;
    }
    for p in parts {
        for &i in p.iter() {
            w.u64(i as u64)?;
        }
    }
    match &ds.scalers {
        Some(sc) => {
            w.u8(1)?;
            w.f64s(&sc.feature_min)?;
            w.f64s(&sc.feature_max)?;
            w.f64(sc.price_min)?;
            w.f64(sc.price_max)?;
        }
        None => w.u8(0)?,
    }
    w.0.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut r = LeReader(BufReader::new(File::open(path)?));
    r.magic(MAGIC)?;
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset format version {version}")));
    }
    let generator_version = r.u32()?;
    let seed = r.u64()?;
    let n = r.u64()? as usize;
    let mut ranges = ParameterRanges {
        lo: [0.0; 9],
        hi: [0.0; 9],
    };
    for j in 0..9 {
        ranges.lo[j] = r.f64()?;
        ranges.hi[j] = r.f64()?;
    }
    let mut samples = Vec::with_capacity(n.min(1 << 24));
    for _ in 0..n {
        samples.push(LabeledSample::from_row(&r.f64_array::<15>()?));
    }
    let sizes = [r.u64()? as usize, r.u64()? as usize, r.u64()? as usize];
    if sizes.iter().sum::<usize>() != n {
        return Err(Error::Format(format!("split sizes {sizes:?} do not add up to {n} samples")));
    }
    let mut parts: [Vec<usize>; 3] = Default::default();
    let mut seen = vec![false; n];
    for (part, &len) in parts.iter_mut().zip(&sizes) {
        for _ in 0..len {
            let i = r.u64()? as usize;
            if i >= n || seen[i] {
                return Err(Error::Format(format!("split index {i} repeated or out of range")));
            }
            seen[i] = true;
            part.push(i);
        }
    }
    let [train, validation, test] = parts;
    let scalers = match r.u8()? {
        0 => None,
        1 => Some(Scalers {
            feature_min: r.f64_array()?,
            feature_max: r.f64_array()?,
            price_min: r.f64()?,
            price_max: r.f64()?,
        }),
        other => return Err(Error::Format(format!("bad scaler flag {other}"))),
    };
    r.expect_eof()?;
    Ok(Dataset {
        ranges,
        seed,
        generator_version,
        samples,
        split: DatasetSplit {
            train,
            validation,
            test,
        },
        scalers,
    })
}

/// Writes one row per sample with raw sensitivities.
pub fn export_csv(path: impl AsRef<Path>, samples: &[LabeledSample]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for s in samples {
        w.write_record(s.to_row().iter().map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{fit_scalers, split_dataset, GENERATOR_VERSION};
    use crate::heston::{HestonParams, PricingInput};
    use proptest::prelude::*;

    fn dataset(values: &[[f64; 15]], seed: u64) -> Dataset {
        let samples: Vec<_> = values.iter().map(LabeledSample::from_row).collect();
        let split = split_dataset(samples.len(), seed);
        let scalers = fit_scalers(&samples, &split).ok();
        Dataset {
            ranges: ParameterRanges::default(),
            seed,
            generator_version: GENERATOR_VERSION,
            samples,
            split,
            scalers,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn roundtrip_is_bit_exact(
            values in prop::collection::vec(prop::array::uniform15(any::<f64>()), 0..40),
            seed in any::<u64>(),
        ) {
            let ds = dataset(&values, seed);
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("d.bin");
            save_dataset(&path, &ds).unwrap();
            let back = load_dataset(&path).unwrap();
            let bits = |d: &Dataset| d.samples.iter().flat_map(|s| s.to_row()).map(f64::to_bits).collect::<Vec<_>>();
            prop_assert_eq!(bits(&ds), bits(&back));
            prop_assert_eq!(&ds.split, &back.split);
            prop_assert_eq!(ds.seed, back.seed);
            prop_assert_eq!(ds.ranges, back.ranges);
            prop_assert_eq!(ds.generator_version, back.generator_version);
            prop_assert_eq!(ds.scalers.map(|s| s.price_min.to_bits()), back.scalers.map(|s| s.price_min.to_bits()));
        }
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.bin");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format(_))));
        std::fs::write(&path, b"DDN1\x01\x00\x00\x00").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn csv_has_expected_header() {
        let s = LabeledSample {
            theta: PricingInput::new(HestonParams::new(1.0, 0.1, 0.2, -0.3, 0.04), 100.0, 0.01, 0.5, 105.0),
            price: 4.2,
            grad: [0.1, 0.2, 0.3, 0.4, 0.5],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        export_csv(&path, &[s]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("kappa,lambda,sigma,rho,v0,r,tau,s0,k,price,dk,dl,ds,drho,dv0\n"));
        let mut rdr = csv::Reader::from_path(&path).unwrap();
        let row: Vec<f64> = rdr.records().next().unwrap().unwrap().iter().map(|x| x.parse().unwrap()).collect();
        assert_eq!(row, s.to_row().to_vec());
    }
}
