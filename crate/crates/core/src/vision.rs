//! Attention over image feature maps: a `C × H × W` map becomes `N = H·W`
//! token rows of width `C`, is attended, and is added back to the input.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attention::{attend, project, AttentionMechanism, ProjectionWeights};
use crate::error::{Error, Result};
use crate::tensor::{tsr, Matrix, Rng};

/// Channel-major feature map: `C` planes of `H × W`, each row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        // Matrix validates length and finiteness for the same layout.
        let hw = height.checked_mul(width).ok_or(Error::DataLength {
            rows: channels,
            cols: usize::MAX,
            len: data.len(),
        })?;
        let m = Matrix::from_vec(channels, hw, data)?;
        Ok(FeatureMap {
            channels,
            height,
            width,
            data: m.into_vec(),
        })
    }

    pub fn seeded(rng: &mut Rng, channels: usize, height: usize, width: usize) -> Self {
        let data = rng
            .standard_normal_matrix::<f64>(channels, height * width)
            .into_vec();
        FeatureMap {
            channels,
            height,
            width,
            data,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    fn pixels(&self) -> usize {
        self.height * self.width
    }
}

/// `(H·W) × C` matrix; row `y·W + x` holds the channels of pixel `(y, x)`.
pub fn flatten(fm: &FeatureMap) -> Matrix {
    let (c, hw) = (fm.channels, fm.pixels());
    let mut data = vec![0.0; hw * c];
    for ch in 0..c {
        for p in 0..hw {
            data[p * c + ch] = fm.data[ch * hw + p];
        }
    }
    Matrix::from_raw(hw, c, data)
}

/// Inverse of [`flatten`].
pub fn unflatten(m: &Matrix, height: usize, width: usize) -> Result<FeatureMap> {
    if height.checked_mul(width) != Some(m.rows()) {
        return Err(Error::shape("unflatten", m.shape(), (height, width)));
    }
    let (hw, c) = m.shape();
    let mut data = vec![0.0; hw * c];
    for (p, row) in m.row_iter().enumerate() {
        for (ch, &x) in row.iter().enumerate() {
            data[ch * hw + p] = x;
        }
    }
    FeatureMap::new(c, height, width, data)
}

/// Inference-only attention block with an identity residual:
/// `out = X + attend(X Wq, X Wk, X Wv)` on flattened pixels.
#[derive(Clone, Debug)]
pub struct AttentionLayer {
    weights: ProjectionWeights,
    mechanism: AttentionMechanism,
    eps: f64,
}

impl AttentionLayer {
    /// `Wv` must map `C` channels back to `C` for the residual.
    pub fn new(weights: ProjectionWeights, mechanism: AttentionMechanism, eps: f64) -> Result<Self> {
        if weights.dv() != weights.dx() {
            return Err(Error::shape(
                "attention layer (wv must be C x C)",
                weights.wv().shape(),
                (weights.dx(), weights.dx()),
            ));
        }
        crate::tensor::ops::check_eps(eps)?;
        Ok(AttentionLayer {
            weights,
            mechanism,
            eps,
        })
    }

    pub fn channels(&self) -> usize {
        self.weights.dx()
    }

    pub fn weights(&self) -> &ProjectionWeights {
        &self.weights
    }

    pub fn mechanism(&self) -> &AttentionMechanism {
        &self.mechanism
    }
}

pub fn layer_forward(layer: &AttentionLayer, fm: &FeatureMap) -> Result<FeatureMap> {
    if fm.channels != layer.channels() {
        return Err(Error::shape(
            "layer_forward",
            (fm.channels, fm.pixels()),
            layer.weights.wq().shape(),
        ));
    }
    let x = flatten(fm);
    let qkv = project(&x, &layer.weights)?;
    let attended = attend(&layer.mechanism, &qkv.q, &qkv.k, &qkv.v, layer.eps)?;
    let out = x.add(&attended.out)?;
    unflatten(&out, fm.height, fm.width)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    height: usize,
    width: usize,
}

/// `map.tsr` → `map.tsr.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the map as a `C × (H·W)` f64 TSR plus the `{height, width}`
/// sidecar next to it.
pub fn save(fm: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let m = Matrix::from_raw(fm.channels, fm.pixels(), fm.data.clone());
    tsr::write(&m, path)?;
    let sidecar = sidecar_path(path);
    let json = serde_json::to_string(&Sidecar {
        height: fm.height,
        width: fm.width,
    })
    .map_err(|e| Error::Sidecar(e.to_string()))?;
    fs::write(&sidecar, json).map_err(|e| Error::io(sidecar, e))
}

pub fn load(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let m = tsr::read::<f64>(path)?;
    let sidecar = sidecar_path(path);
    let text = fs::read_to_string(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
    let dims: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Sidecar(format!("{}: {e}", sidecar.display())))?;
    if dims.height.checked_mul(dims.width) != Some(m.cols()) {
        return Err(Error::Sidecar(format!(
            "height {} x width {} does not match {} pixels in {}",
            dims.height,
            dims.width,
            m.cols(),
            path.display()
        )));
    }
    let (c, _) = m.shape();
    FeatureMap::new(c, dims.height, dims.width, m.into_vec())
}

/// File names of the projection matrices inside a weights directory.
pub const WEIGHT_FILES: [&str; 3] = ["wq.tsr", "wk.tsr", "wv.tsr"];

pub fn save_weights(weights: &ProjectionWeights, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for (name, m) in WEIGHT_FILES
        .iter()
        .zip([weights.wq(), weights.wk(), weights.wv()])
    {
        tsr::write(m, dir.join(name))?;
    }
    Ok(())
}

/// Reads `wq.tsr`, `wk.tsr` and `wv.tsr` (f64) from `dir`.
pub fn load_weights(dir: impl AsRef<Path>) -> Result<ProjectionWeights> {
    let dir = dir.as_ref();
    let [wq, wk, wv] = WEIGHT_FILES.map(|name| tsr::read::<f64>(dir.join(name)));
    ProjectionWeights::new(wq?, wk?, wv?)
}
