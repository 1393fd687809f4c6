//! Per-slice matrix products over leading (batch, channel) axes.

use super::tensor::{shape_len, Tensor};
use crate::error::{Error, Result};

fn split_matrix_shape(t: &Tensor, what: &str) -> Result<(Vec<usize>, usize, usize)> {
    let s = t.shape();
    if s.len() < 2 {
        return Err(Error::Dimension(format!("{what} must have rank >= 2, got shape {s:?}")));
    }
    Ok((s[..s.len() - 2].to_vec(), s[s.len() - 2], s[s.len() - 1]))
}

fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let row = &a[i * k..(i + 1) * k];
        let dst = &mut out[i * n..(i + 1) * n];
        for (p, &av) in row.iter().enumerate() {
            let src = &b[p * n..(p + 1) * n];
            for (o, &bv) in dst.iter_mut().zip(src) {
                *o += av * bv;
            }
        }
    }
}

/// `out[c] = a[c] · b[c]` for `a: [d, m, k]`, `b: [d, k, n]`.
pub fn channel_matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.rank() != 3 || b.rank() != 3 {
        return Err(Error::Dimension(format!(
            "channel_matmul expects rank-3 operands, got {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    batched_matmul(a, b)
}

/// Matrix product over the last two axes; all leading axes must agree.
pub fn batched_matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (lead_a, m, k) = split_matrix_shape(a, "left operand")?;
    let (lead_b, k2, n) = split_matrix_shape(b, "right operand")?;
    if lead_a != lead_b || k != k2 {
        return Err(Error::Dimension(format!(
            "cannot multiply {:?} by {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let slices = shape_len(&lead_a);
    let mut out = vec![0.0; slices * m * n];
    for c in 0..slices {
        matmul_into(
            &a.data()[c * m * k..(c + 1) * m * k],
            &b.data()[c * k * n..(c + 1) * k * n],
            &mut out[c * m * n..(c + 1) * m * n],
            m,
            k,
            n,
        );
    }
    let mut shape = lead_a;
    shape.extend([m, n]);
    Tensor::new(shape, out)
}

/// `a[..., m, k] · v[..., k] -> [..., m]`.
pub fn batched_matvec(a: &Tensor, v: &Tensor) -> Result<Tensor> {
    let (lead_a, m, k) = split_matrix_shape(a, "matrix operand")?;
    let vs = v.shape();
    if vs.is_empty() || vs[..vs.len() - 1] != lead_a[..] || vs[vs.len() - 1] != k {
        return Err(Error::Dimension(format!(
            "cannot multiply {:?} by vector {:?}",
            a.shape(),
            vs
        )));
    }
    let slices = shape_len(&lead_a);
    let mut out = vec![0.0; slices * m];
    for c in 0..slices {
        matmul_into(
            &a.data()[c * m * k..(c + 1) * m * k],
            &v.data()[c * k..(c + 1) * k],
            &mut out[c * m..(c + 1) * m],
            m,
            k,
            1,
        );
    }
    let mut shape = lead_a;
    shape.push(m);
    Tensor::new(shape, out)
}

/// `a[..., m, k] · p[k, n]` with `p` shared by every leading slice.
pub fn matmul_shared_right(a: &Tensor, p: &Tensor) -> Result<Tensor> {
    let (lead, m, k) = split_matrix_shape(a, "left operand")?;
    if p.rank() != 2 || p.shape()[0] != k {
        return Err(Error::Dimension(format!(
            "cannot multiply {:?} by shared matrix {:?}",
            a.shape(),
            p.shape()
        )));
    }
    let n = p.shape()[1];
    let slices = shape_len(&lead);
    let mut out = vec![0.0; slices * m * n];
    for c in 0..slices {
        matmul_into(
            &a.data()[c * m * k..(c + 1) * m * k],
            p.data(),
            &mut out[c * m * n..(c + 1) * m * n],
            m,
            k,
            n,
        );
    }
    let mut shape = lead;
    shape.extend([m, n]);
    Tensor::new(shape, out)
}

/// `p[m, k] · a[..., k, n]` with `p` shared by every leading slice.
pub fn matmul_shared_left(p: &Tensor, a: &Tensor) -> Result<Tensor> {
    let (lead, k, n) = split_matrix_shape(a, "right operand")?;
    if p.rank() != 2 || p.shape()[1] != k {
        return Err(Error::Dimension(format!(
            "cannot multiply shared matrix {:?} by {:?}",
            p.shape(),
            a.shape()
        )));
    }
    let m = p.shape()[0];
    let slices = shape_len(&lead);
    let mut out = vec![0.0; slices * m * n];
    for c in 0..slices {
        matmul_into(
            p.data(),
            &a.data()[c * k * n..(c + 1) * k * n],
            &mut out[c * m * n..(c + 1) * m * n],
            m,
            k,
            n,
        );
    }
    let mut shape = lead;
    shape.extend([m, n]);
    Tensor::new(shape, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn identity_left_factor() {
        let a = t(&[1, 2, 2], &[1.0, 0.0, 0.0, 1.0]);
        let b = t(&[1, 2, 2], &[2.0, 3.0, 4.0, 5.0]);
        assert_eq!(channel_matmul(&a, &b).unwrap(), b);
    }

    #[test]
    fn row_times_column() {
        let a = t(&[1, 1, 2], &[1.0, 1.0]);
        let b = t(&[1, 2, 1], &[2.0, 3.0]);
        assert_eq!(channel_matmul(&a, &b).unwrap(), t(&[1, 1, 1], &[5.0]));
    }

    #[test]
    fn channels_stay_separate() {
        let a = t(&[2, 2, 2], &[1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 2.0]);
        let b = t(&[2, 2, 2], &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(channel_matmul(&a, &b).unwrap(), a);
    }

    #[test]
    fn mismatch_names_both_shapes() {
        let a = Tensor::zeros(&[2, 2, 3]);
        let b = Tensor::zeros(&[2, 2, 3]);
        let msg = channel_matmul(&a, &b).unwrap_err().to_string();
        assert!(msg.contains("[2, 2, 3]"), "{msg}");
        let c = Tensor::zeros(&[1, 3, 3]);
        assert!(channel_matmul(&a, &c).is_err());
    }

    #[test]
    fn matvec_and_shared_products() {
        let a = t(&[1, 2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let v = t(&[1, 2], &[1.0, -1.0]);
        assert_eq!(batched_matvec(&a, &v).unwrap(), t(&[1, 2], &[-1.0, -1.0]));
        let p = t(&[2, 1], &[1.0, 1.0]);
        assert_eq!(matmul_shared_right(&a, &p).unwrap(), t(&[1, 2, 1], &[3.0, 7.0]));
        let q = t(&[1, 2], &[1.0, 1.0]);
        assert_eq!(matmul_shared_left(&q, &a).unwrap(), t(&[1, 1, 2], &[4.0, 6.0]));
    }
}
