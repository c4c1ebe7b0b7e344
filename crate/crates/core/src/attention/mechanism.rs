use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{elu_plus_one, Real};

/// Registered nonnegative feature maps for kernel attention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FeatureMap {
    EluPlusOne,
}

impl FeatureMap {
    pub const ALL: [FeatureMap; 1] = [FeatureMap::EluPlusOne];

    pub fn resolve(id: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.id() == id)
            .ok_or_else(|| Error::UnknownFeatureMap(id.to_owned()))
    }

    pub fn id(self) -> &'static str {
        match self {
            FeatureMap::EluPlusOne => "elu_plus_one",
        }
    }

    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            FeatureMap::EluPlusOne => elu_plus_one(x),
        }
    }
}

/// Which attention computation to run.
///
/// Kernel variants carry a feature-map id that is resolved when the
/// mechanism is applied. The textual form, used on the command line and in
/// reports, is `softmax`, `softmax_normalized_qk`, `kernel[:<map>]`,
/// `kernel_unfactored[:<map>]`, `linear_rowwise` or `linear_vectorized`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum AttentionMechanism {
    Softmax,
    /// Softmax over L2-normalized queries and keys.
    SoftmaxNormalizedQK,
    Kernel(String),
    KernelUnfactored(String),
    LinearRowwise,
    LinearVectorized,
}

impl AttentionMechanism {
    pub fn kernel(map: FeatureMap) -> Self {
        AttentionMechanism::Kernel(map.id().to_owned())
    }

    pub fn kernel_unfactored(map: FeatureMap) -> Self {
        AttentionMechanism::KernelUnfactored(map.id().to_owned())
    }

    /// Every built-in mechanism, kernel variants with `elu_plus_one`.
    pub fn builtin() -> Vec<Self> {
        vec![
            AttentionMechanism::Softmax,
            AttentionMechanism::SoftmaxNormalizedQK,
            AttentionMechanism::kernel(FeatureMap::EluPlusOne),
            AttentionMechanism::kernel_unfactored(FeatureMap::EluPlusOne),
            AttentionMechanism::LinearRowwise,
            AttentionMechanism::LinearVectorized,
        ]
    }

    /// Whether the mechanism materializes an `N × N` intermediate.
    pub fn is_quadratic_memory(&self) -> bool {
        matches!(
            self,
            AttentionMechanism::Softmax | AttentionMechanism::SoftmaxNormalizedQK
        )
    }
}

impl fmt::Display for AttentionMechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttentionMechanism::Softmax => f.write_str("softmax"),
            AttentionMechanism::SoftmaxNormalizedQK => f.write_str("softmax_normalized_qk"),
            AttentionMechanism::Kernel(id) => write!(f, "kernel:{id}"),
            AttentionMechanism::KernelUnfactored(id) => write!(f, "kernel_unfactored:{id}"),
            AttentionMechanism::LinearRowwise => f.write_str("linear_rowwise"),
            AttentionMechanism::LinearVectorized => f.write_str("linear_vectorized"),
        }
    }
}

impl FromStr for AttentionMechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, map) = match s.split_once(':') {
            Some((name, map)) => (name, Some(map)),
            None => (s, None),
        };
        let kernel_map = || -> Result<String> {
            let id = map.unwrap_or(FeatureMap::EluPlusOne.id());
            FeatureMap::resolve(id).map(|m| m.id().to_owned())
        };
        let plain = |m: AttentionMechanism| match map {
            None => Ok(m),
            Some(_) => Err(Error::UnknownMechanism(s.to_owned())),
        };
        match name {
            "softmax" => plain(AttentionMechanism::Softmax),
            "softmax_normalized_qk" => plain(AttentionMechanism::SoftmaxNormalizedQK),
            "kernel" => Ok(AttentionMechanism::Kernel(kernel_map()?)),
            "kernel_unfactored" => Ok(AttentionMechanism::KernelUnfactored(kernel_map()?)),
            "linear_rowwise" => plain(AttentionMechanism::LinearRowwise),
            "linear_vectorized" => plain(AttentionMechanism::LinearVectorized),
            _ => Err(Error::UnknownMechanism(s.to_owned())),
        }
    }
}

impl From<AttentionMechanism> for String {
    fn from(m: AttentionMechanism) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for AttentionMechanism {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}
