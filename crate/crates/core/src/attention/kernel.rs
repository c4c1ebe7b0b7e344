use crate::attention::{bytes_of, check_denominator, check_qkv, AttentionOutput, AuxPlan, FeatureMap};
use crate::error::Result;
use crate::par;
use crate::tensor::ops::{axpy, dot};
use crate::tensor::{Matrix, Real};

fn feature_mapped<T: Real>(m: &Matrix<T>, map: FeatureMap) -> Matrix<T> {
    let data = m.as_slice().iter().map(|&x| map.apply(x)).collect();
    Matrix::from_raw(m.rows(), m.cols(), data)
}

/// Kernel attention by explicit double loop:
/// `outᵢ = Σⱼ φ(qᵢ)ᵀφ(kⱼ) vⱼ / Σⱼ φ(qᵢ)ᵀφ(kⱼ)`.
pub fn kernel_attention_unfactored<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    map: FeatureMap,
) -> Result<AttentionOutput<T>> {
    check_qkv("kernel_attention_unfactored", q, k, v)?;
    let fq = feature_mapped(q, map);
    let fk = feature_mapped(k, map);
    let mut out = Matrix::zeros(q.rows(), v.cols());
    par::try_for_each_row(out.data_mut(), v.cols(), |i, row| {
        let fqi = fq.row(i);
        let mut den = T::zero();
        for j in 0..fk.rows() {
            let s = dot(fqi, fk.row(j));
            den = den + s;
            axpy(row, s, v.row(j));
        }
        check_denominator("kernel_attention_unfactored", i, den)?;
        row.iter_mut().for_each(|x| *x = *x / den);
        Ok(())
    })?;
    out.check_finite("kernel_attention_unfactored")?;
    let aux = AuxPlan {
        buffers: fq.bytes() + fk.bytes(),
        accumulators: 0,
    };
    Ok(AttentionOutput { out, aux })
}

/// Kernel attention with the key/value sum shared across queries:
/// `S = Σⱼ φ(kⱼ)vⱼᵀ`, `z = Σⱼ φ(kⱼ)`, `outᵢ = φ(qᵢ)ᵀS / φ(qᵢ)ᵀz`.
pub fn kernel_attention_factored<T: Real>(
    q: &Matrix<T>,
    k: &Matrix<T>,
    v: &Matrix<T>,
    map: FeatureMap,
) -> Result<AttentionOutput<T>> {
    check_qkv("kernel_attention_factored", q, k, v)?;
    let (dk, dv) = (k.cols(), v.cols());
    let fq = feature_mapped(q, map);
    let fk = feature_mapped(k, map);

    let mut s = vec![T::zero(); dk * dv];
    let mut z = vec![T::zero(); dk];
    for (fkj, vj) in fk.row_iter().zip(v.row_iter()) {
        for (a, &phi) in fkj.iter().enumerate() {
            axpy(&mut s[a * dv..(a + 1) * dv], phi, vj);
            z[a] = z[a] + phi;
        }
    }

    let mut out = Matrix::zeros(q.rows(), dv);
    par::try_for_each_row(out.data_mut(), dv, |i, row| {
        let fqi = fq.row(i);
        for (a, &phi) in fqi.iter().enumerate() {
            axpy(row, phi, &s[a * dv..(a + 1) * dv]);
        }
        let den = dot(fqi, &z);
        check_denominator("kernel_attention_factored", i, den)?;
        row.iter_mut().for_each(|x| *x = *x / den);
        Ok(())
    })?;
    out.check_finite("kernel_attention_factored")?;
    let aux = AuxPlan {
        buffers: fq.bytes() + fk.bytes(),
        accumulators: bytes_of::<T>(s.len() + z.len()),
    };
    Ok(AttentionOutput { out, aux })
}
