//! Einstein-summation contractions over [`Tensor`] operands.
//!
//! Specs look like `"edpj,bdpk->bejk"` (the Unicode arrow `→` is accepted too).
//! A letter repeated inside one operand selects its diagonal, letters missing
//! from the output are summed. Operands are reduced pairwise left to right,
//! keeping only the letters still needed by later operands or the output.

use std::borrow::Cow;
use std::cell::RefCell;
use std::collections::HashMap;
use std::rc::Rc;

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Letters are ASCII alphabetic, so at most 52 distinct axes.
const MAX_AXES: usize = 52;

/// A parsed spec with the letter bookkeeping of every pairwise step, which
/// does not depend on the operand extents.
struct Plan {
    inputs: Vec<Vec<u8>>,
    output: Vec<u8>,
    /// Letters of each input after taking repeated-letter diagonals.
    unique: Vec<Vec<u8>>,
    /// For step `k >= 1`: the letters kept after folding in input `k`.
    keeps: Vec<Vec<u8>>,
}

fn spec_error(spec: &str, reason: impl Into<String>) -> Error {
    Error::ContractSpec {
        spec: spec.to_string(),
        reason: reason.into(),
    }
}

fn dedup(letters: &[u8]) -> Vec<u8> {
    let mut unique = Vec::with_capacity(letters.len());
    for &c in letters {
        if !unique.contains(&c) {
            unique.push(c);
        }
    }
    unique
}

fn parse(spec: &str) -> Result<Plan> {
    let normalized = spec.replace('→', "->");
    let (lhs, rhs) = normalized
        .split_once("->")
        .ok_or_else(|| spec_error(spec, "missing `->`"))?;
    let letters = |s: &str| -> Result<Vec<u8>> {
        s.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                if c.is_ascii_alphabetic() {
                    Ok(c as u8)
                } else {
                    Err(spec_error(spec, format!("unexpected character `{c}`")))
                }
            })
            .collect()
    };
    let inputs = lhs.split(',').map(letters).collect::<Result<Vec<_>>>()?;
    let output = letters(rhs)?;
    for (i, c) in output.iter().enumerate() {
        if output[..i].contains(c) {
            return Err(spec_error(spec, format!("output letter `{}` repeated", *c as char)));
        }
        if !inputs.iter().any(|inp| inp.contains(c)) {
            return Err(spec_error(
                spec,
                format!("output letter `{}` absent from inputs", *c as char),
            ));
        }
    }
    let unique: Vec<Vec<u8>> = inputs.iter().map(|l| dedup(l)).collect();
    let mut keeps = vec![Vec::new()];
    let mut cur = unique[0].clone();
    for k in 1..unique.len() {
        let mut union = cur.clone();
        union.extend(unique[k].iter().copied().filter(|c| !cur.contains(c)));
        // The last pair writes straight into output order.
        let keep = if k + 1 == unique.len() {
            output.clone()
        } else {
            let mut needed = output.clone();
            unique[k + 1..].iter().for_each(|l| needed.extend_from_slice(l));
            union.into_iter().filter(|c| needed.contains(c)).collect()
        };
        cur = keep.clone();
        keeps.push(keep);
    }
    Ok(Plan {
        inputs,
        output,
        unique,
        keeps,
    })
}

thread_local! {
    static PLANS: RefCell<HashMap<String, Rc<Plan>>> = RefCell::new(HashMap::new());
}

fn plan(spec: &str) -> Result<Rc<Plan>> {
    if let Some(p) = PLANS.with(|m| m.borrow().get(spec).cloned()) {
        return Ok(p);
    }
    let p = Rc::new(parse(spec)?);
    PLANS.with(|m| m.borrow_mut().insert(spec.to_string(), p.clone()));
    Ok(p)
}

/// Takes the diagonal over repeated letters so each letter appears once.
fn dedup_diagonal<'a>(t: &'a Tensor, letters: &[u8], unique: &[u8]) -> Cow<'a, Tensor> {
    if unique.len() == letters.len() {
        return Cow::Borrowed(t);
    }
    let shape: Vec<usize> = unique
        .iter()
        .map(|c| t.shape()[letters.iter().position(|l| l == c).unwrap()])
        .collect();
    let positions: Vec<usize> = letters
        .iter()
        .map(|c| unique.iter().position(|u| u == c).unwrap())
        .collect();
    let mut src = vec![0usize; letters.len()];
    Cow::Owned(Tensor::from_fn(&shape, |idx| {
        for (slot, &p) in src.iter_mut().zip(&positions) {
            *slot = idx[p];
        }
        t.get(&src)
    }))
}

/// Contracts `a` (letters `la`) with `b` (letters `lb`) into the letters `keep`.
fn pair_contract(a: &Tensor, la: &[u8], b: &Tensor, lb: &[u8], keep: &[u8], extents: &[usize; 128]) -> Tensor {
    let mut union = [0u8; MAX_AXES];
    let mut n = 0;
    for &c in la.iter().chain(lb) {
        if !union[..n].contains(&c) {
            union[n] = c;
            n += 1;
        }
    }
    let union = &union[..n];
    let out_shape: Vec<usize> = keep.iter().map(|&c| extents[c as usize]).collect();
    let mut out = Tensor::zeros(&out_shape);
    if union.iter().any(|&c| extents[c as usize] == 0) {
        return out;
    }
    let stride_in = |letters: &[u8], shape: &[usize], c: u8| -> usize {
        match letters.iter().position(|&l| l == c) {
            Some(p) => shape[p + 1..].iter().product(),
            None => 0,
        }
    };
    let (mut ext, mut st_a, mut st_b, mut st_o) = (
        [0usize; MAX_AXES],
        [0usize; MAX_AXES],
        [0usize; MAX_AXES],
        [0usize; MAX_AXES],
    );
    for (k, &c) in union.iter().enumerate() {
        ext[k] = extents[c as usize];
        st_a[k] = stride_in(la, a.shape(), c);
        st_b[k] = stride_in(lb, b.shape(), c);
        st_o[k] = stride_in(keep, &out_shape, c);
    }

    let (ad, bd) = (a.data(), b.data());
    let od = out.data_mut();
    let mut idx = [0usize; MAX_AXES];
    let (mut oa, mut ob, mut oo) = (0usize, 0usize, 0usize);
    loop {
        od[oo] += ad[oa] * bd[ob];
        let mut axis = n;
        loop {
            if axis == 0 {
                return out;
            }
            axis -= 1;
            idx[axis] += 1;
            oa += st_a[axis];
            ob += st_b[axis];
            oo += st_o[axis];
            if idx[axis] < ext[axis] {
                break;
            }
            oa -= st_a[axis] * ext[axis];
            ob -= st_b[axis] * ext[axis];
            oo -= st_o[axis] * ext[axis];
            idx[axis] = 0;
        }
    }
}

/// Evaluates an einsum-style contraction.
pub fn contract(spec: &str, operands: &[&Tensor]) -> Result<Tensor> {
    let plan = plan(spec)?;
    if plan.inputs.len() != operands.len() {
        return Err(spec_error(
            spec,
            format!("{} input terms but {} operands", plan.inputs.len(), operands.len()),
        ));
    }
    let mut extents = [usize::MAX; 128];
    for (k, (letters, op)) in plan.inputs.iter().zip(operands).enumerate() {
        if letters.len() != op.rank() {
            return Err(Error::Dimension(format!(
                "operand {k} has shape {:?} but spec term `{}` has {} letters",
                op.shape(),
                String::from_utf8_lossy(letters),
                letters.len()
            )));
        }
        for (&c, &n) in letters.iter().zip(op.shape()) {
            let slot = &mut extents[c as usize];
            if *slot != usize::MAX && *slot != n {
                return Err(Error::Dimension(format!(
                    "letter `{}` has extents {} and {n} in `{spec}`",
                    c as char, *slot
                )));
            }
            *slot = n;
        }
    }

    let first = dedup_diagonal(operands[0], &plan.inputs[0], &plan.unique[0]);
    if operands.len() == 1 {
        return Ok(pair_contract(
            &first,
            &plan.unique[0],
            &Tensor::scalar(1.0),
            &[],
            &plan.output,
            &extents,
        ));
    }
    let mut cur = first;
    let mut cur_letters: &[u8] = &plan.unique[0];
    for (k, operand) in operands.iter().enumerate().skip(1) {
        let op = dedup_diagonal(operand, &plan.inputs[k], &plan.unique[k]);
        let keep = &plan.keeps[k];
        cur = Cow::Owned(pair_contract(&cur, cur_letters, &op, &plan.unique[k], keep, &extents));
        cur_letters = keep;
    }
    debug_assert_eq!(cur_letters, plan.output.as_slice());
    Ok(cur.into_owned())
}
