//! Design-matrix assembly for the reading-time GAMMs: linear surprisal
//! terms, length-by-frequency tensor smooths, a position spline, the
//! previous-fixation indicator, and per-subject random intercepts.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::corpus::RegressionRow;
use crate::error::{Error, Result};

use super::basis::{bspline_basis, difference_penalty, kronecker, row_tensor};

/// Basis sizes for the smooth terms.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BasisSpec {
    /// Basis dimension of the position spline.
    pub spline_basis: usize,
    /// Basis dimension of each tensor margin.
    pub tensor_margin_basis: usize,
    pub degree: usize,
    pub penalty_order: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec {
            spline_basis: 10,
            tensor_margin_basis: 5,
            degree: 3,
            penalty_order: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Linear,
    Spline,
    Tensor,
    RandomIntercept,
    Binary,
    Intercept,
}

/// One penalty acting on a block, tied to a smoothing parameter by index.
#[derive(Debug, Clone)]
pub struct Penalty {
    pub matrix: DMatrix<f64>,
    pub lambda_index: usize,
}

/// One block of design columns with its penalties.
#[derive(Debug, Clone)]
pub struct DesignBlock {
    pub name: String,
    pub kind: BlockKind,
    pub columns: DMatrix<f64>,
    pub penalties: Vec<Penalty>,
    pub constrained: bool,
}

impl DesignBlock {
    fn unpenalized(name: &str, kind: BlockKind, columns: DMatrix<f64>) -> Self {
        DesignBlock {
            name: name.to_string(),
            kind,
            columns,
            penalties: Vec::new(),
            constrained: false,
        }
    }
}

/// Null-space basis of the sum-to-zero constraint via a Householder
/// reflection of the column-sum vector. Returns an m x (m-1) matrix Z with
/// 1'XZ = 0.
fn sum_to_zero_null_space(col_sums: &DVector<f64>) -> DMatrix<f64> {
    let m = col_sums.len();
    let norm = col_sums.norm();
    let mut v = col_sums.clone();
    v[0] += col_sums[0].signum() * norm;
    let vtv = v.dot(&v);
    let mut h = DMatrix::identity(m, m);
    if vtv > 0.0 {
        h -= (&v * v.transpose()) * (2.0 / vtv);
    }
    h.columns(1, m - 1).into_owned()
}

/// Applies the sum-to-zero constraint to a block, dropping one degree of
/// freedom and transforming every penalty accordingly.
pub fn constrain_sum_to_zero(block: DesignBlock) -> DesignBlock {
    let col_sums = DVector::from_iterator(
        block.columns.ncols(),
        block.columns.column_iter().map(|c| c.sum()),
    );
    let z = sum_to_zero_null_space(&col_sums);
    DesignBlock {
        name: block.name,
        kind: block.kind,
        columns: &block.columns * &z,
        penalties: block
            .penalties
            .into_iter()
            .map(|p| Penalty {
                matrix: z.transpose() * &p.matrix * &z,
                lambda_index: p.lambda_index,
            })
            .collect(),
        constrained: true,
    }
}

/// Tensor-product smooth of two marginal bases: row-wise Kronecker columns
/// with penalties S1 (x) I and I (x) S2, each under its own smoothing
/// parameter.
pub fn tensor_basis(
    name: &str,
    b1: &DMatrix<f64>,
    s1: &DMatrix<f64>,
    b2: &DMatrix<f64>,
    s2: &DMatrix<f64>,
    first_lambda_index: usize,
) -> Result<DesignBlock> {
    let columns = row_tensor(b1, b2)?;
    let i1 = DMatrix::identity(b1.ncols(), b1.ncols());
    let i2 = DMatrix::identity(b2.ncols(), b2.ncols());
    Ok(DesignBlock {
        name: name.to_string(),
        kind: BlockKind::Tensor,
        columns,
        penalties: vec![
            Penalty {
                matrix: kronecker(s1, &i2),
                lambda_index: first_lambda_index,
            },
            Penalty {
                matrix: kronecker(&i1, s2),
                lambda_index: first_lambda_index + 1,
            },
        ],
        constrained: false,
    })
}

/// Maps a covariate onto [0,1]; `None` when it has no variance.
fn to_unit_interval(values: &[f64]) -> Option<Vec<f64>> {
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > min) {
        return None;
    }
    Some(values.iter().map(|v| (v - min) / (max - min)).collect())
}

/// The assembled model: blocks, response, the number of smoothing
/// parameters, and any blocks dropped for lack of variance.
pub struct AssembledDesign {
    pub blocks: Vec<DesignBlock>,
    pub response: DVector<f64>,
    pub n_lambdas: usize,
    pub dropped: Vec<String>,
}

impl AssembledDesign {
    pub fn n_columns(&self) -> usize {
        self.blocks.iter().map(|b| b.columns.ncols()).sum()
    }
}

/// Builds the GAMM design for the paper's term structure. The baseline
/// model is obtained with `include_surprisal = false`, which omits exactly
/// the two linear surprisal columns.
pub fn assemble_design(
    rows: &[RegressionRow],
    include_surprisal: bool,
    spec: &BasisSpec,
) -> Result<AssembledDesign> {
    if rows.is_empty() {
        return Err(Error::Argument("cannot assemble a design from zero rows".into()));
    }
    let n = rows.len();
    let mut blocks = Vec::new();
    let mut dropped = Vec::new();
    let mut next_lambda = 0usize;

    blocks.push(DesignBlock::unpenalized(
        "intercept",
        BlockKind::Intercept,
        DMatrix::from_element(n, 1, 1.0),
    ));

    if include_surprisal {
        let mut cols = DMatrix::zeros(n, 2);
        for (i, r) in rows.iter().enumerate() {
            cols[(i, 0)] = r.surp_cur;
            cols[(i, 1)] = r.surp_prev;
        }
        blocks.push(DesignBlock::unpenalized("surprisal", BlockKind::Linear, cols));
    }

    let margin_penalty =
        difference_penalty(spec.tensor_margin_basis, spec.degree, spec.penalty_order);
    let add_tensor = |name: &str,
                          a: Vec<f64>,
                          b: Vec<f64>,
                          blocks: &mut Vec<DesignBlock>,
                          dropped: &mut Vec<String>,
                          next_lambda: &mut usize|
     -> Result<()> {
        match (to_unit_interval(&a), to_unit_interval(&b)) {
            (Some(a), Some(b)) => {
                let (ba, _) = bspline_basis(&a, spec.tensor_margin_basis, spec.degree)?;
                let (bb, _) = bspline_basis(&b, spec.tensor_margin_basis, spec.degree)?;
                let block = tensor_basis(name, &ba, &margin_penalty, &bb, &margin_penalty, *next_lambda)?;
                *next_lambda += 2;
                blocks.push(constrain_sum_to_zero(block));
            }
            _ => dropped.push(name.to_string()),
        }
        Ok(())
    };

    add_tensor(
        "te(len_cur,logfreq_cur)",
        rows.iter().map(|r| r.len_cur as f64).collect(),
        rows.iter().map(|r| r.logfreq_cur).collect(),
        &mut blocks,
        &mut dropped,
        &mut next_lambda,
    )?;
    add_tensor(
        "te(len_prev,logfreq_prev)",
        rows.iter().map(|r| r.len_prev as f64).collect(),
        rows.iter().map(|r| r.logfreq_prev).collect(),
        &mut blocks,
        &mut dropped,
        &mut next_lambda,
    )?;

    let positions: Vec<f64> = rows.iter().map(|r| r.position).collect();
    match to_unit_interval(&positions) {
        Some(scaled) => {
            let (b, _) = bspline_basis(&scaled, spec.spline_basis, spec.degree)?;
            let block = DesignBlock {
                name: "s(position)".to_string(),
                kind: BlockKind::Spline,
                columns: b,
                penalties: vec![Penalty {
                    matrix: difference_penalty(spec.spline_basis, spec.degree, spec.penalty_order),
                    lambda_index: next_lambda,
                }],
                constrained: false,
            };
            next_lambda += 1;
            blocks.push(constrain_sum_to_zero(block));
        }
        None => dropped.push("s(position)".to_string()),
    }

    let fixated: Vec<f64> = rows
        .iter()
        .map(|r| if r.prev_fixated { 1.0 } else { 0.0 })
        .collect();
    if to_unit_interval(&fixated).is_some() {
        blocks.push(DesignBlock::unpenalized(
            "prev_fixated",
            BlockKind::Binary,
            DMatrix::from_iterator(n, 1, fixated),
        ));
    } else {
        dropped.push("prev_fixated".to_string());
    }

    let subjects: BTreeSet<&str> = rows.iter().map(|r| r.subject_id.as_str()).collect();
    if subjects.len() >= 2 {
        let subjects: Vec<&str> = subjects.into_iter().collect();
        let mut cols = DMatrix::zeros(n, subjects.len());
        for (i, r) in rows.iter().enumerate() {
            let j = subjects.binary_search(&r.subject_id.as_str()).unwrap();
            cols[(i, j)] = 1.0;
        }
        blocks.push(DesignBlock {
            name: "subject".to_string(),
            kind: BlockKind::RandomIntercept,
            columns: cols,
            penalties: vec![Penalty {
                matrix: DMatrix::identity(subjects.len(), subjects.len()),
                lambda_index: next_lambda,
            }],
            constrained: false,
        });
        next_lambda += 1;
    } else {
        dropped.push("subject".to_string());
    }

    let response = DVector::from_iterator(n, rows.iter().map(|r| r.response_ms));
    Ok(AssembledDesign {
        blocks,
        response,
        n_lambdas: next_lambda,
        dropped,
    })
}
