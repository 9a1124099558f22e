//! Line-oriented checkpoint format.
//!
//! ```text
//! ifenet-checkpoint/1
//! arch ifenet
//! d 4
//! ...
//! tensor bn.gamma 1 4 1.0000000000000000e0 ...
//! checksum <sha256 of every preceding byte>
//! ```
//!
//! Reals are written with 17 significant digits, which parse back to the
//! identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::{Architecture, BatchNormState, FnnParams, IfeNetParams, ModelMeta};
use crate::error::{Error, Result};
use crate::ife::IfeParams;
use crate::matrix::Matrix;

pub const CHECKPOINT_VERSION: &str = "ifenet-checkpoint/1";

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn put_tensor(out: &mut String, name: &str, m: &Matrix) {
    let _ = write!(out, "tensor {name} {} {}", m.rows(), m.cols());
    for &v in m.as_slice() {
        out.push(' ');
        out.push_str(&real(v));
    }
    out.push('\n');
}

fn put_vector(out: &mut String, name: &str, v: &[f64]) {
    put_tensor(out, name, &Matrix::row_vector(v));
}

pub fn to_text(p: &IfeNetParams) -> String {
    let mut out = String::new();
    let m = &p.meta;
    let _ = writeln!(out, "{CHECKPOINT_VERSION}");
    let _ = writeln!(out, "arch {}", m.arch.as_str());
    let _ = writeln!(out, "d {}", m.d);
    let _ = writeln!(out, "classes {}", m.n_classes);
    let _ = writeln!(out, "hidden {}", m.hidden);
    let _ = writeln!(out, "r {}", real(m.r));
    let _ = writeln!(out, "seed {}", m.seed);
    let _ = writeln!(out, "encoder {}", m.encoder.as_deref().unwrap_or("-"));
    let _ = writeln!(
        out,
        "features {}",
        serde_json::to_string(&m.feature_names).expect("string list")
    );
    let _ = writeln!(out, "bn_momentum {}", real(p.bn.momentum));
    let _ = writeln!(out, "bn_epsilon {}", real(p.bn.epsilon));
    put_tensor(&mut out, "bn.gamma", &p.bn.gamma);
    put_tensor(&mut out, "bn.beta", &p.bn.beta);
    put_vector(&mut out, "bn.running_mean", &p.bn.running_mean);
    put_vector(&mut out, "bn.running_var", &p.bn.running_var);
    for (j, w) in p.ife.weights().iter().enumerate() {
        put_tensor(&mut out, &format!("ife.w{j}"), w);
    }
    put_tensor(&mut out, "fnn.w1", &p.fnn.w1);
    put_tensor(&mut out, "fnn.b1", &p.fnn.b1);
    put_tensor(&mut out, "fnn.w2", &p.fnn.w2);
    put_tensor(&mut out, "fnn.b2", &p.fnn.b2);
    let digest = hex::encode(Sha256::digest(out.as_bytes()));
    let _ = writeln!(out, "checksum {digest}");
    out
}

struct Lines<'a> {
    inner: std::iter::Peekable<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self
            .inner
            .next()
            .ok_or_else(|| Error::Corrupt(format!("missing `{key}`")))?;
        line.strip_prefix(key)
            .and_then(|rest| rest.strip_prefix(' '))
            .ok_or_else(|| Error::Corrupt(format!("expected `{key}`, found `{line}`")))
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.field(key)?;
        v.parse()
            .map_err(|_| Error::Corrupt(format!("bad value `{v}` for `{key}`")))
    }

    fn tensor(&mut self, name: &str, shape: (usize, usize)) -> Result<Matrix> {
        let rest = self.field("tensor")?;
        let mut parts = rest.split(' ');
        let found = parts.next().unwrap_or_default();
        if found != name {
            return Err(Error::Corrupt(format!("expected tensor `{name}`, found `{found}`")));
        }
        let dims: Vec<usize> = parts
            .by_ref()
            .take(2)
            .map(|s| s.parse().map_err(|_| Error::Corrupt(format!("bad shape for `{name}`"))))
            .collect::<Result<_>>()?;
        if dims != [shape.0, shape.1] {
            return Err(Error::Corrupt(format!(
                "tensor `{name}` has shape {dims:?}, expected {shape:?}"
            )));
        }
        let values = parts
            .map(|s| s.parse::<f64>().map_err(|_| Error::Corrupt(format!("bad value in `{name}`"))))
            .collect::<Result<Vec<_>>>()?;
        Matrix::from_vec(shape.0, shape.1, values).map_err(|e| Error::Corrupt(e.to_string()))
    }
}

pub fn from_text(text: &str) -> Result<IfeNetParams> {
    let first = text.lines().next().unwrap_or_default();
    if first != CHECKPOINT_VERSION {
        if first.starts_with("ifenet-checkpoint/") {
            return Err(Error::Version {
                expected: CHECKPOINT_VERSION.into(),
                found: first.into(),
            });
        }
        return Err(Error::Corrupt("not an ifenet checkpoint".into()));
    }

    let body_end = text
        .trim_end_matches('\n')
        .rfind('\n')
        .map(|i| i + 1)
        .ok_or_else(|| Error::Corrupt("truncated".into()))?;
    let (body, tail) = text.split_at(body_end);
    let expected = tail
        .trim_end()
        .strip_prefix("checksum ")
        .ok_or_else(|| Error::Corrupt("missing checksum line".into()))?;
    let actual = hex::encode(Sha256::digest(body.as_bytes()));
    if actual != expected {
        return Err(Error::Corrupt("checksum mismatch".into()));
    }

    let mut lines = Lines {
        inner: body.lines().peekable(),
    };
    lines.inner.next();
    let arch = match lines.field("arch")? {
        "ifenet" => Architecture::IfeNet,
        "fnn" => Architecture::Fnn,
        other => return Err(Error::Corrupt(format!("unknown arch `{other}`"))),
    };
    let d: usize = lines.parse("d")?;
    let n_classes: usize = lines.parse("classes")?;
    let hidden: usize = lines.parse("hidden")?;
    let r: f64 = lines.parse("r")?;
    let seed: u64 = lines.parse("seed")?;
    let encoder = match lines.field("encoder")? {
        "-" => None,
        h => Some(h.to_string()),
    };
    let feature_names: Vec<String> = serde_json::from_str(lines.field("features")?)
        .map_err(|e| Error::Corrupt(format!("features: {e}")))?;
    let momentum: f64 = lines.parse("bn_momentum")?;
    let epsilon: f64 = lines.parse("bn_epsilon")?;
    let bn = BatchNormState {
        gamma: lines.tensor("bn.gamma", (1, d))?,
        beta: lines.tensor("bn.beta", (1, d))?,
        running_mean: lines.tensor("bn.running_mean", (1, d))?.into_vec(),
        running_var: lines.tensor("bn.running_var", (1, d))?.into_vec(),
        momentum,
        epsilon,
    };
    let weights = (0..d)
        .map(|j| lines.tensor(&format!("ife.w{j}"), (d, n_classes)))
        .collect::<Result<Vec<_>>>()?;
    let ife = IfeParams::new(weights, r).map_err(|e| Error::Corrupt(e.to_string()))?;
    let fnn = FnnParams {
        w1: lines.tensor("fnn.w1", (d, hidden))?,
        b1: lines.tensor("fnn.b1", (1, hidden))?,
        w2: lines.tensor("fnn.w2", (hidden, n_classes))?,
        b2: lines.tensor("fnn.b2", (1, n_classes))?,
    };
    if feature_names.len() != d {
        return Err(Error::Corrupt(format!("{} feature names for d = {d}", feature_names.len())));
    }
    Ok(IfeNetParams {
        meta: ModelMeta {
            arch,
            d,
            n_classes,
            hidden,
            r,
            seed,
            encoder,
            feature_names,
        },
        bn,
        ife,
        fnn,
    })
}

pub fn save(p: &IfeNetParams, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_text(p))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<IfeNetParams> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init, predict, Architecture};
    use proptest::prelude::*;

    fn bits(p: &IfeNetParams) -> Vec<u64> {
        let mut v: Vec<u64> = p
            .trainable()
            .iter()
            .flat_map(|m| m.as_slice().iter().map(|x| x.to_bits()))
            .collect();
        v.extend(p.bn.running_mean.iter().chain(&p.bn.running_var).map(|x| x.to_bits()));
        v.push(p.meta.r.to_bits());
        v
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut p = init(Architecture::IfeNet, 4, 3, Some(6), 2.7, 99).unwrap();
        p.bn.running_mean = vec![0.1, -1e-300, 3.3e12, 1.0 / 3.0];
        p.meta.encoder = Some("abc123".into());
        p.meta.feature_names = vec!["a,b".into(), "c=\"d\"".into(), "e".into(), "f".into()];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save(&p, &path).unwrap();
        let q = load(&path).unwrap();
        assert_eq!(bits(&p), bits(&q));
        assert_eq!(p, q);
        let x = Matrix::from_rows(&[[0.5, -2.0, 1.0, 7.0]]).unwrap();
        assert_eq!(predict(&p, &x).unwrap(), predict(&q, &x).unwrap());
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let p = init(Architecture::Fnn, 4, 2, None, 3.0, 1).unwrap();
        let text = to_text(&p);
        for cut in [text.len() / 2, text.len() - 10, 30] {
            assert!(matches!(from_text(&text[..cut]), Err(Error::Corrupt(_))), "cut {cut}");
        }
        let tampered = text.replacen("tensor bn.beta 1 4 0", "tensor bn.beta 1 4 1", 1);
        assert!(matches!(from_text(&tampered), Err(Error::Corrupt(_))));
    }

    #[test]
    fn version_mismatch() {
        let p = init(Architecture::IfeNet, 3, 2, None, 3.0, 1).unwrap();
        let text = to_text(&p).replacen(CHECKPOINT_VERSION, "ifenet-checkpoint/9", 1);
        assert!(matches!(from_text(&text), Err(Error::Version { .. })));
    }

    #[test]
    fn wrong_width_fails_at_use() {
        let p = init(Architecture::IfeNet, 4, 2, None, 3.0, 1).unwrap();
        let q = from_text(&to_text(&p)).unwrap();
        assert!(matches!(
            predict(&q, &Matrix::zeros(2, 5)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn arbitrary_reals_round_trip(v in proptest::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 4)) {
            let mut p = init(Architecture::IfeNet, 2, 2, Some(1), 1.0, 0).unwrap();
            p.fnn.w2 = Matrix::from_vec(1, 2, v[..2].to_vec()).unwrap();
            p.bn.beta = Matrix::from_vec(1, 2, v[2..].to_vec()).unwrap();
            let q = from_text(&to_text(&p)).unwrap();
            prop_assert_eq!(bits(&p), bits(&q));
        }
    }
}
