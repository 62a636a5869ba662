use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dense, LinearHead, MlpHead, ProbeHead};
use crate::error::{Error, Result};
use crate::store::npy;

/// Contents of `head.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadMeta {
    #[serde(rename = "type")]
    pub kind: String,
    pub d: usize,
    #[serde(rename = "C")]
    pub c: usize,
    pub h: Option<usize>,
}

fn write_layer(dir: &Path, suffix: &str, layer: &Dense) -> Result<()> {
    npy::write(
        dir.join(format!("W{suffix}.npy")),
        &[layer.outputs(), layer.inputs()],
        layer.weight(),
    )?;
    npy::write(
        dir.join(format!("b{suffix}.npy")),
        &[layer.outputs()],
        layer.bias(),
    )
}

fn read_layer(dir: &Path, suffix: &str) -> Result<Dense> {
    let (ws, w) = npy::read::<f32>(dir.join(format!("W{suffix}.npy")))?;
    let (bs, b) = npy::read::<f32>(dir.join(format!("b{suffix}.npy")))?;
    match (ws.as_slice(), bs.as_slice()) {
        ([o, i], [ob]) if o == ob => Dense::new(*o, *i, w, b),
        _ => Err(Error::Shape(format!(
            "layer {suffix}: W shape {ws:?} incompatible with b shape {bs:?}"
        ))),
    }
}

/// Write `head.json` plus `W.npy`/`b.npy` (linear) or `W0..W2`/`b0..b2` (MLP).
pub fn save_head(dir: impl AsRef<Path>, head: &ProbeHead) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = HeadMeta {
        kind: head.kind().to_string(),
        d: head.dim(),
        c: head.n_classes(),
        h: match head {
            ProbeHead::Linear(_) => None,
            ProbeHead::Mlp(m) => Some(m.hidden_width()),
        },
    };
    match head {
        ProbeHead::Linear(l) => write_layer(dir, "", &l.layer)?,
        ProbeHead::Mlp(m) => {
            for (i, layer) in m.layers.iter().enumerate() {
                write_layer(dir, &i.to_string(), layer)?;
            }
        }
    }
    let path = dir.join("head.json");
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

pub fn load_head(dir: impl AsRef<Path>) -> Result<ProbeHead> {
    let dir = dir.as_ref();
    let path = dir.join("head.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: HeadMeta = serde_json::from_str(&text)?;
    let head: ProbeHead = match meta.kind.as_str() {
        "linear" => LinearHead {
            layer: read_layer(dir, "")?,
        }
        .into(),
        "mlp" => MlpHead::new([
            read_layer(dir, "0")?,
            read_layer(dir, "1")?,
            read_layer(dir, "2")?,
        ])?
        .into(),
        other => return Err(Error::Format(format!("unknown head type '{other}'"))),
    };
    if head.dim() != meta.d || head.n_classes() != meta.c {
        return Err(Error::Shape(format!(
            "head.json declares d={} C={}, arrays have d={} C={}",
            meta.d,
            meta.c,
            head.dim(),
            head.n_classes()
        )));
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_and_mlp_heads_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lin: ProbeHead =
            LinearHead::new(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.5, -0.5])
                .unwrap()
                .into();
        save_head(dir.path().join("lin"), &lin).unwrap();
        assert_eq!(load_head(dir.path().join("lin")).unwrap(), lin);

        let layer = |o, i| Dense::new(o, i, vec![0.25; o * i], vec![0.1; o]).unwrap();
        let mlp: ProbeHead = MlpHead::new([layer(4, 3), layer(4, 4), layer(2, 4)])
            .unwrap()
            .into();
        save_head(dir.path().join("mlp"), &mlp).unwrap();
        assert_eq!(load_head(dir.path().join("mlp")).unwrap(), mlp);
        let meta: HeadMeta =
            serde_json::from_str(&fs::read_to_string(dir.path().join("mlp/head.json")).unwrap())
                .unwrap();
        assert_eq!(meta.kind, "mlp");
        assert_eq!(meta.h, Some(4));
    }
}
