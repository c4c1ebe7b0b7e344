//! Seeded property and oracle-equivalence suites over random attention
//! instances. Each suite reports the worst value it observed against a
//! fixed threshold.

use serde::Serialize;

use crate::analysis::{hull_excursion, taylor_residual_max, weight_matrix};
use crate::attention::{
    attend, kernel_attention_factored, kernel_attention_unfactored, linear_attention_rowwise,
    linear_attention_vectorized, softmax_attention, AttentionMechanism, FeatureMap,
};
use crate::error::{Error, Result};
use crate::par;
use crate::tensor::ops::dot;
use crate::tensor::{l2_normalize_rows, Matrix, Rng, DEFAULT_EPS};

pub const LINEAR_EQUIVALENCE_TOL: f64 = 1e-9;
pub const KERNEL_EQUIVALENCE_REL_TOL: f64 = 1e-8;
pub const SIMILARITY_RANGE_TOL: f64 = 1e-12;
pub const DENOMINATOR_TOL: f64 = 1e-9;
pub const WEIGHT_SUM_TOL: f64 = 1e-9;
pub const HULL_TOL: f64 = 1e-9;
pub const SINGLE_ROW_TOL: f64 = 1e-12;
pub const CONSTANT_VALUE_TOL: f64 = 1e-12;
pub const PERMUTATION_TOL: f64 = 1e-9;
pub const SCALE_INVARIANCE_TOL: f64 = 1e-9;
/// Softmax outputs on the scaling witness must move by more than this.
pub const SOFTMAX_SCALE_WITNESS_MIN: f64 = 1e-6;
pub const TAYLOR_BOUND_SLACK: f64 = 1e-9;
pub const TAYLOR_GRID_STEP: f64 = 1e-3;
/// Accepted band for `aux(2N) / aux(N)` of softmax attention.
pub const SOFTMAX_AUX_RATIO: (f64, f64) = (3.5, 4.5);

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    pub eps: f64,
    pub instances: usize,
    pub max_n: usize,
    pub max_dk: usize,
    pub max_dv: usize,
    /// Mechanisms covered by the all-mechanism suites.
    pub mechanisms: Vec<AttentionMechanism>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            eps: DEFAULT_EPS,
            instances: 1000,
            max_n: 64,
            max_dk: 16,
            max_dv: 16,
            mechanisms: AttentionMechanism::builtin(),
        }
    }
}

impl VerifyConfig {
    pub fn validate(&self) -> Result<()> {
        crate::tensor::ops::check_eps(self.eps)?;
        for (name, value) in [
            ("instances", self.instances),
            ("max_n", self.max_n),
            ("max_dk", self.max_dk),
            ("max_dv", self.max_dv),
            ("mechanisms", self.mechanisms.len()),
        ] {
            if value == 0 {
                return Err(Error::ZeroCount(name));
            }
        }
        for m in &self.mechanisms {
            if let AttentionMechanism::Kernel(id) | AttentionMechanism::KernelUnfactored(id) = m {
                FeatureMap::resolve(id)?;
            }
        }
        Ok(())
    }
}

/// Whether the observed value must stay at or below the threshold, or
/// strictly exceed it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    AtMost,
    Above,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub observed: f64,
    pub bound: Bound,
    pub threshold: f64,
    pub instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub all_passed: bool,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn suite(&self, name: &str) -> Option<&SuiteResult> {
        self.suites.iter().find(|s| s.name == name)
    }
}

/// One random `(q, k, v)` triple with `1 ≤ N ≤ max_n`, `2 ≤ Dk ≤ max_dk`,
/// `1 ≤ Dv ≤ max_dv`, entries standard normal. `Dk = 1` is excluded: there
/// every cosine is ±1 and the linear denominator vanishes with positive
/// probability.
#[derive(Clone, Debug)]
pub struct Instance {
    pub index: usize,
    pub q: Matrix,
    pub k: Matrix,
    pub v: Matrix,
}

impl Instance {
    pub fn generate(config: &VerifyConfig, index: usize) -> Self {
        let mut rng = Rng::derive(config.seed, index as u64);
        let n = 1 + rng.index(config.max_n);
        let dk = 2 + rng.index(config.max_dk.max(2) - 1);
        let dv = 1 + rng.index(config.max_dv);
        Instance {
            index,
            q: rng.standard_normal_matrix(n, dk),
            k: rng.standard_normal_matrix(n, dk),
            v: rng.standard_normal_matrix(n, dv),
        }
    }

    pub fn n(&self) -> usize {
        self.k.rows()
    }
}

fn suite(
    name: &'static str,
    bound: Bound,
    threshold: f64,
    instances: usize,
    observed: Result<f64>,
) -> SuiteResult {
    match observed {
        Ok(observed) => SuiteResult {
            name,
            passed: match bound {
                Bound::AtMost => observed <= threshold,
                Bound::Above => observed > threshold,
            },
            observed,
            bound,
            threshold,
            instances,
            error: None,
        },
        Err(e) => SuiteResult {
            name,
            passed: false,
            observed: f64::NAN,
            bound,
            threshold,
            instances,
            error: Some(e.to_string()),
        },
    }
}

/// Worst value of `f` over the configured instance family. The first error
/// (by instance index) aborts the suite.
fn worst_over<F>(config: &VerifyConfig, f: F) -> Result<f64>
where
    F: Fn(&Instance) -> Result<f64> + Send + Sync,
{
    let values = par::map_indices(config.instances, |i| f(&Instance::generate(config, i)));
    values
        .into_iter()
        .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
}

fn worst_over_mechanisms<F>(config: &VerifyConfig, f: F) -> Result<f64>
where
    F: Fn(&AttentionMechanism, &Instance) -> Result<f64> + Send + Sync,
{
    worst_over(config, |inst| {
        config
            .mechanisms
            .iter()
            .try_fold(0.0f64, |acc, m| f(m, inst).map(|v| acc.max(v)))
    })
}

pub fn linear_equivalence(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over(config, |inst| {
        let slow = linear_attention_rowwise(&inst.q, &inst.k, &inst.v, config.eps)?;
        let fast = linear_attention_vectorized(&inst.q, &inst.k, &inst.v, config.eps)?;
        fast.out.max_abs_diff(&slow.out)
    });
    suite(
        "linear_vectorized_vs_rowwise",
        Bound::AtMost,
        LINEAR_EQUIVALENCE_TOL,
        config.instances,
        observed,
    )
}

pub fn kernel_equivalence(config: &VerifyConfig) -> SuiteResult {
    let map = FeatureMap::EluPlusOne;
    let observed = worst_over(config, |inst| {
        let slow = kernel_attention_unfactored(&inst.q, &inst.k, &inst.v, map)?;
        let fast = kernel_attention_factored(&inst.q, &inst.k, &inst.v, map)?;
        fast.out.max_rel_diff(&slow.out)
    });
    suite(
        "kernel_factored_vs_unfactored",
        Bound::AtMost,
        KERNEL_EQUIVALENCE_REL_TOL,
        config.instances,
        observed,
    )
}

/// Worst excursion of `1 + q̂ᵢᵀk̂ⱼ` outside `[0, 2]`.
pub fn similarity_range(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over(config, |inst| {
        let qn = l2_normalize_rows(&inst.q, config.eps)?;
        let kn = l2_normalize_rows(&inst.k, config.eps)?;
        let mut worst = 0.0f64;
        for qi in qn.row_iter() {
            for kj in kn.row_iter() {
                let sim = 1.0 + dot(qi, kj);
                worst = worst.max(-sim).max(sim - 2.0);
            }
        }
        Ok(worst)
    });
    suite(
        "linear_similarity_range",
        Bound::AtMost,
        SIMILARITY_RANGE_TOL,
        config.instances,
        observed,
    )
}

/// `Σⱼ (1 + q̂ᵢᵀk̂ⱼ)` against the shared-sum denominator `N + q̂ᵢᵀΣⱼk̂ⱼ`.
pub fn denominator_identity(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over(config, |inst| {
        let qn = l2_normalize_rows(&inst.q, config.eps)?;
        let kn = l2_normalize_rows(&inst.k, config.eps)?;
        let mut z = vec![0.0; kn.cols()];
        for kj in kn.row_iter() {
            z.iter_mut().zip(kj).for_each(|(a, b)| *a += b);
        }
        let n = kn.rows() as f64;
        let mut worst = 0.0f64;
        for qi in qn.row_iter() {
            let row_sum: f64 = kn.row_iter().map(|kj| 1.0 + dot(qi, kj)).sum();
            worst = worst.max((row_sum - (n + dot(qi, &z))).abs());
        }
        Ok(worst)
    });
    suite(
        "linear_denominator_equals_similarity_sum",
        Bound::AtMost,
        DENOMINATOR_TOL,
        config.instances,
        observed,
    )
}

/// Explicit weight rows must be nonnegative and sum to one.
pub fn weight_normalization(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over_mechanisms(config, |m, inst| {
        let w = weight_matrix(m, &inst.q, &inst.k, config.eps)?;
        let mut worst = 0.0f64;
        for row in w.row_iter() {
            worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            worst = row.iter().fold(worst, |acc, &x| acc.max(-x));
        }
        Ok(worst)
    });
    suite(
        "weight_rows_on_simplex",
        Bound::AtMost,
        WEIGHT_SUM_TOL,
        config.instances,
        observed,
    )
}

pub fn convex_hull(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over_mechanisms(config, |m, inst| {
        let out = attend(m, &inst.q, &inst.k, &inst.v, config.eps)?.out;
        Ok(hull_excursion(&out, &inst.v))
    });
    suite(
        "convex_hull_containment",
        Bound::AtMost,
        HULL_TOL,
        config.instances,
        observed,
    )
}

pub fn single_row_identity(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over_mechanisms(config, |m, inst| {
        let (q, k, v) = (
            first_row(&inst.q),
            first_row(&inst.k),
            first_row(&inst.v),
        );
        attend(m, &q, &k, &v, config.eps)?.out.max_abs_diff(&v)
    });
    suite(
        "single_row_returns_v",
        Bound::AtMost,
        SINGLE_ROW_TOL,
        config.instances,
        observed,
    )
}

fn first_row(m: &Matrix) -> Matrix {
    Matrix::from_rows(&[m.row(0).to_vec()]).expect("row of a valid matrix")
}

pub fn constant_values(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over_mechanisms(config, |m, inst| {
        let c = inst.v.row(0).to_vec();
        let v = Matrix::from_rows(&vec![c; inst.n()])?;
        attend(m, &inst.q, &inst.k, &v, config.eps)?.out.max_abs_diff(
            &Matrix::from_rows(&vec![v.row(0).to_vec(); inst.q.rows()])?,
        )
    });
    suite(
        "constant_values_pass_through",
        Bound::AtMost,
        CONSTANT_VALUE_TOL,
        config.instances,
        observed,
    )
}

pub fn key_value_permutation(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over_mechanisms(config, |m, inst| {
        let perm = Rng::derive(config.seed ^ 0x5045_524d, inst.index as u64).permutation(inst.n());
        let kp = inst.k.permute_rows(&perm)?;
        let vp = inst.v.permute_rows(&perm)?;
        let base = attend(m, &inst.q, &inst.k, &inst.v, config.eps)?.out;
        let permuted = attend(m, &inst.q, &kp, &vp, config.eps)?.out;
        base.max_abs_diff(&permuted)
    });
    suite(
        "key_value_permutation_invariance",
        Bound::AtMost,
        PERMUTATION_TOL,
        config.instances,
        observed,
    )
}

/// Linear attention ignores positive per-row scaling of the queries.
pub fn query_scale_invariance(config: &VerifyConfig) -> SuiteResult {
    let observed = worst_over(config, |inst| {
        let mut rng = Rng::derive(config.seed ^ 0x5343_414c, inst.index as u64);
        let scales: Vec<f64> = (0..inst.q.rows())
            .map(|_| 10f64.powf(rng.uniform(-3.0, 3.0)))
            .collect();
        let qs = inst.q.scale_rows(&scales)?;
        let mut worst = 0.0f64;
        for m in [AttentionMechanism::LinearRowwise, AttentionMechanism::LinearVectorized] {
            let base = attend(&m, &inst.q, &inst.k, &inst.v, config.eps)?.out;
            let scaled = attend(&m, &qs, &inst.k, &inst.v, config.eps)?.out;
            worst = worst.max(base.max_abs_diff(&scaled)?);
        }
        Ok(worst)
    });
    suite(
        "linear_query_scale_invariance",
        Bound::AtMost,
        SCALE_INVARIANCE_TOL,
        config.instances,
        observed,
    )
}

/// Query `(1, 0)` against keys `(1, 0)`, `(0, 1)` with values `1`, `0`,
/// before and after scaling the query by 10.
pub fn scale_witness() -> (Matrix, Matrix, Matrix, Matrix) {
    let q = Matrix::from_rows(&[vec![1.0, 0.0]]).expect("literal");
    let qs = Matrix::from_rows(&[vec![10.0, 0.0]]).expect("literal");
    let k = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).expect("literal");
    let v = Matrix::from_rows(&[vec![1.0], vec![0.0]]).expect("literal");
    (q, qs, k, v)
}

/// On the witness, raw softmax output must move while linear attention
/// output must not.
pub fn softmax_scale_witness(config: &VerifyConfig) -> SuiteResult {
    let (q, qs, k, v) = scale_witness();
    let observed = (|| {
        let base = softmax_attention(&q, &k, &v)?.out;
        let scaled = softmax_attention(&qs, &k, &v)?.out;
        let linear_shift = linear_attention_vectorized(&q, &k, &v, config.eps)?
            .out
            .max_abs_diff(&linear_attention_vectorized(&qs, &k, &v, config.eps)?.out)?;
        if linear_shift > SCALE_INVARIANCE_TOL {
            return Ok(0.0);
        }
        base.max_abs_diff(&scaled)
    })();
    suite(
        "softmax_query_scale_witness",
        Bound::Above,
        SOFTMAX_SCALE_WITNESS_MIN,
        1,
        observed,
    )
}

pub fn taylor_bound() -> SuiteResult {
    let (_, residual) = taylor_residual_max(TAYLOR_GRID_STEP);
    suite(
        "taylor_residual_bound",
        Bound::AtMost,
        std::f64::consts::E - 2.0 + TAYLOR_BOUND_SLACK,
        (2.0 / TAYLOR_GRID_STEP).round() as usize + 1,
        Ok(residual),
    )
}

/// Softmax `aux(2N)/aux(N)` must stay in the quadratic band and the linear
/// accumulators must not change with N. Reports the worst distance outside
/// the band (zero when inside), or infinity when linear accumulators differ.
pub fn aux_memory_scaling(config: &VerifyConfig) -> SuiteResult {
    let sizes = [1024usize, 2048, 4096];
    let observed = (|| {
        let mut rng = Rng::derive(config.seed, 0x0041_5558);
        let mut softmax_aux = Vec::new();
        let mut linear_acc = Vec::new();
        for &n in &sizes {
            let q: Matrix = rng.standard_normal_matrix(n, 4);
            let k: Matrix = rng.standard_normal_matrix(n, 4);
            let v: Matrix = rng.standard_normal_matrix(n, 4);
            softmax_aux.push(softmax_attention(&q, &k, &v)?.aux_bytes() as f64);
            linear_acc.push(linear_attention_vectorized(&q, &k, &v, config.eps)?.aux.accumulators);
        }
        if linear_acc.windows(2).any(|w| w[0] != w[1]) {
            return Ok(f64::INFINITY);
        }
        let (lo, hi) = SOFTMAX_AUX_RATIO;
        Ok(softmax_aux
            .windows(2)
            .map(|w| w[1] / w[0])
            .map(|r| (lo - r).max(r - hi).max(0.0))
            .fold(0.0, f64::max))
    })();
    suite("aux_memory_scaling", Bound::AtMost, 0.0, sizes.len(), observed)
}

/// Runs every suite.
pub fn run(config: &VerifyConfig) -> Result<VerifyReport> {
    config.validate()?;
    let suites = vec![
        linear_equivalence(config),
        kernel_equivalence(config),
        similarity_range(config),
        denominator_identity(config),
        weight_normalization(config),
        convex_hull(config),
        single_row_identity(config),
        constant_values(config),
        key_value_permutation(config),
        query_scale_invariance(config),
        softmax_scale_witness(config),
        taylor_bound(),
        aux_memory_scaling(config),
    ];
    Ok(VerifyReport {
        seed: config.seed,
        all_passed: suites.iter().all(|s| s.passed),
        suites,
    })
}
