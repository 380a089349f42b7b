//! Attention visibility masks.
//!
//! Masks are built as boolean matrices (`true` = the query row may attend to
//! the context column) and converted to an additive 0/−∞ form only at the
//! attention call. Construction rejects rows with no visible column, since
//! such a row would have an undefined softmax.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MaskError {
    #[error("query length {n} exceeds context length {m}")]
    QueryLongerThanContext { n: usize, m: usize },
    #[error("window length {w} out of range for context length {m}")]
    BadWindow { w: usize, m: usize },
    #[error("mask shapes differ: {a_rows}x{a_cols} vs {b_rows}x{b_cols}")]
    ShapeMismatch {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("row {row} has no visible column")]
    EmptyRow { row: usize },
    #[error("mask dimensions must be nonzero")]
    ZeroDimension,
}

/// An n×m visibility matrix. Row i is a query slot, column j a context slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    n_rows: usize,
    m_cols: usize,
    visible: Vec<bool>,
}

impl AttentionMask {
    /// Build from a row-major boolean buffer, rejecting all-hidden rows.
    pub fn from_visible(n_rows: usize, m_cols: usize, visible: Vec<bool>) -> Result<Self, MaskError> {
        if n_rows == 0 || m_cols == 0 {
            return Err(MaskError::ZeroDimension);
        }
        assert_eq!(visible.len(), n_rows * m_cols, "visibility buffer size");
        for i in 0..n_rows {
            if !visible[i * m_cols..(i + 1) * m_cols].iter().any(|&v| v) {
                return Err(MaskError::EmptyRow { row: i + 1 });
            }
        }
        Ok(Self { n_rows, m_cols, visible })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn m_cols(&self) -> usize {
        self.m_cols
    }

    /// Visibility of cell (i, j), 0-based.
    #[inline]
    pub fn is_visible(&self, i: usize, j: usize) -> bool {
        self.visible[i * self.m_cols + j]
    }

    /// Row i as a slice of column visibilities.
    #[inline]
    pub fn row(&self, i: usize) -> &[bool] {
        &self.visible[i * self.m_cols..(i + 1) * self.m_cols]
    }

    /// Additive form: 0.0 where visible, −∞ where hidden.
    pub fn to_additive(&self) -> Vec<f64> {
        self.visible
            .iter()
            .map(|&v| if v { 0.0 } else { f64::NEG_INFINITY })
            .collect()
    }

    /// Elementwise AND of two masks. −∞ dominates when additive masks are
    /// added, so this is the boolean equivalent of that addition.
    pub fn combine(&self, other: &AttentionMask) -> Result<AttentionMask, MaskError> {
        if self.n_rows != other.n_rows || self.m_cols != other.m_cols {
            return Err(MaskError::ShapeMismatch {
                a_rows: self.n_rows,
                a_cols: self.m_cols,
                b_rows: other.n_rows,
                b_cols: other.m_cols,
            });
        }
        let visible = self
            .visible
            .iter()
            .zip(&other.visible)
            .map(|(&a, &b)| a && b)
            .collect();
        AttentionMask::from_visible(self.n_rows, self.m_cols, visible)
    }

    /// Render as a 0/1 grid, one row per line (1 = visible).
    pub fn to_grid_string(&self) -> String {
        let mut out = String::with_capacity(self.n_rows * (2 * self.m_cols + 1));
        for i in 0..self.n_rows {
            let row: Vec<&str> = self.row(i).iter().map(|&v| if v { "1" } else { "0" }).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Square causal mask: row i sees columns j ≤ i (1-based).
pub fn vanilla_causal(n: usize) -> Result<AttentionMask, MaskError> {
    let mut visible = vec![false; n * n];
    for i in 0..n {
        for j in 0..=i {
            visible[i * n + j] = true;
        }
    }
    AttentionMask::from_visible(n, n, visible)
}

/// Final-block causal mask for n query slots over an m-token context:
/// row i sees the full context prefix plus i tokens of the final block,
/// i.e. columns j ≤ m − n + i (1-based).
pub fn final_block_causal(n: usize, m: usize) -> Result<AttentionMask, MaskError> {
    if n > m {
        return Err(MaskError::QueryLongerThanContext { n, m });
    }
    let mut visible = vec![false; n * m];
    for i in 0..n {
        let limit = m - n + i + 1; // visible column count for 1-based row i+1
        for j in 0..limit {
            visible[i * m + j] = true;
        }
    }
    AttentionMask::from_visible(n, m, visible)
}

/// Scale mask: every row sees only the last w context columns.
pub fn scale_mask(n: usize, m: usize, w: usize) -> Result<AttentionMask, MaskError> {
    if w == 0 || w > m {
        return Err(MaskError::BadWindow { w, m });
    }
    let mut visible = vec![false; n * m];
    for i in 0..n {
        for j in (m - w)..m {
            visible[i * m + j] = true;
        }
    }
    AttentionMask::from_visible(n, m, visible)
}

/// Padding mask for a left-padded context: columns 1..=pad_count hidden in
/// every row.
pub fn padding_mask(pad_count: usize, n: usize, m: usize) -> Result<AttentionMask, MaskError> {
    if pad_count >= m {
        return Err(MaskError::EmptyRow { row: 1 });
    }
    let mut visible = vec![false; n * m];
    for i in 0..n {
        for j in pad_count..m {
            visible[i * m + j] = true;
        }
    }
    AttentionMask::from_visible(n, m, visible)
}
