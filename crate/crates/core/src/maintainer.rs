//! Deferred-update store for the piecewise-quadratic coefficients used by the
//! bounded-isotonic-regression dynamic program.
//!
//! Pieces are pairs `(alpha, beta)` with `alpha` in `{0} U {1/(2m)}`. The
//! store supports range shifts of `beta`, insertion/deletion of pieces, and a
//! global counter `tau` that realizes the whole-array transform
//! `(alpha, beta) <- (alpha/(2a+1), beta/(2a+1))` and its inverse in O(1),
//! by encoding each piece as `(k, h)` relative to `tau`.

use serde::Serialize;

use crate::segtree::{Applies, SegTree, Semigroup};
use crate::{cast, Error, Result, Scalar};

/// Deferred range operation `add_{t,s,p,l}`. The `t` channel stamps the
/// global time the operation was issued; `s` and `p` drive first- and
/// second-order shifts of quadratic leaves, `l` shifts linear leaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemigroupElem<F> {
    pub t: u64,
    pub s: F,
    pub p: F,
    pub l: F,
}

impl<F: Scalar> SemigroupElem<F> {
    pub fn new(t: u64, s: F, p: F, l: F) -> Self {
        debug_assert!(t > 0 || (s.is_zero() && p.is_zero() && l.is_zero()));
        SemigroupElem { t, s, p, l }
    }
}

impl<F: Scalar> Semigroup for SemigroupElem<F> {
    fn identity() -> Self {
        SemigroupElem {
            t: 0,
            s: F::zero(),
            p: F::zero(),
            l: F::zero(),
        }
    }

    fn compose(g2: &Self, g1: &Self) -> Self {
        if g1.t == 0 {
            return *g2;
        }
        if g2.t == 0 {
            return *g1;
        }
        // abelian: relabel so `lo` carries the smaller time stamp
        let (lo, hi) = if g1.t <= g2.t { (g1, g2) } else { (g2, g1) };
        let dt = cast::<F>((hi.t - lo.t) as f64);
        SemigroupElem {
            t: lo.t,
            s: lo.s + hi.s,
            p: lo.p + hi.p + dt * hi.s,
            l: lo.l + hi.l,
        }
    }

    fn is_identity(&self) -> bool {
        self.t == 0
    }
}

/// Per-piece payload: `k = 0` marks a linear piece with `beta = h`; `k >= 1`
/// marks a quadratic piece whose coefficients are reconstructed from the
/// global time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafState<F> {
    pub k: u64,
    pub h: F,
}

impl<F: Scalar> Applies<LeafState<F>> for SemigroupElem<F> {
    fn apply_to(&self, leaf: &LeafState<F>) -> LeafState<F> {
        if self.t == 0 {
            return *leaf;
        }
        if leaf.k == 0 {
            LeafState {
                k: 0,
                h: self.l + leaf.h,
            }
        } else {
            debug_assert!(self.t + 1 > leaf.k);
            let scale = cast::<F>((self.t + 1 - leaf.k) as f64);
            LeafState {
                k: leaf.k,
                h: scale * self.s + self.p + leaf.h,
            }
        }
    }
}

/// Elements acting on themselves by composition: this instantiation makes
/// the segment tree an array of semigroup elements.
impl<F: Scalar> Applies<SemigroupElem<F>> for SemigroupElem<F> {
    fn apply_to(&self, v: &SemigroupElem<F>) -> SemigroupElem<F> {
        Self::compose(self, v)
    }
}

/// Quadratic and linear coefficient of one piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PieceCoeffs<F> {
    pub alpha: F,
    pub beta: F,
}

/// Coefficient store backed by the lazy segment tree plus the global counter.
#[derive(Debug, Clone)]
pub struct BirPartialMaintainer<F> {
    tree: SegTree<SemigroupElem<F>, LeafState<F>>,
    tau: u64,
}

impl<F: Scalar> Default for BirPartialMaintainer<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> BirPartialMaintainer<F> {
    /// Starts at global time 1 so the first quadratic insertions receive
    /// `k >= 1`, keeping `k = 0` reserved for linear pieces.
    pub fn new() -> Self {
        BirPartialMaintainer {
            tree: SegTree::new(),
            tau: 1,
        }
    }

    pub fn with_capacity(cap: usize) -> Self {
        BirPartialMaintainer {
            tree: SegTree::with_capacity(cap),
            tau: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.tree.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tree.is_empty()
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    pub fn height(&self) -> usize {
        self.tree.height()
    }

    fn coeffs_of(&self, leaf: LeafState<F>) -> PieceCoeffs<F> {
        if leaf.k == 0 {
            PieceCoeffs {
                alpha: F::zero(),
                beta: leaf.h,
            }
        } else {
            debug_assert!(self.tau + 1 > leaf.k);
            let m = cast::<F>((self.tau + 1 - leaf.k) as f64);
            PieceCoeffs {
                alpha: (cast::<F>(2.0) * m).recip(),
                beta: leaf.h / m,
            }
        }
    }

    /// Current `(alpha, beta)` of the piece at position `j` (0-based).
    pub fn query(&self, j: usize) -> Result<PieceCoeffs<F>> {
        if j >= self.len() {
            return Err(Error::IndexOutOfBounds {
                index: j,
                size: self.len(),
            });
        }
        Ok(self.coeffs_of(self.tree.get(j)))
    }

    /// Shifts `beta` by `delta` for every piece in `[l, r]` (inclusive).
    pub fn add(&mut self, l: usize, r: usize, delta: F) -> Result<()> {
        if r >= self.len() || l > r {
            return Err(Error::IndexOutOfBounds {
                index: r,
                size: self.len(),
            });
        }
        if delta.is_zero() {
            return Ok(());
        }
        let g = SemigroupElem::new(self.tau, delta, F::zero(), delta);
        self.tree.apply_range(&g, l, r);
        Ok(())
    }

    /// Inserts a piece with coefficients `(alpha, beta)` at position `j`.
    /// `alpha` must be `0` or `1/(2m)` for an integer `1 <= m <= tau`.
    pub fn insert_piece(&mut self, j: usize, alpha: F, beta: F) -> Result<()> {
        if j > self.len() {
            return Err(Error::IndexOutOfBounds {
                index: j,
                size: self.len(),
            });
        }
        let leaf = if alpha.is_zero() {
            LeafState { k: 0, h: beta }
        } else {
            let inv = (cast::<F>(2.0) * alpha).recip().to_f64().unwrap_or(-1.0);
            let m = inv.round();
            let rel_err = (inv - m).abs() / inv.abs().max(1.0);
            if !(m >= 1.0) || rel_err > 1e-9 || m > self.tau as f64 {
                return Err(Error::InvalidPieceCoefficient {
                    alpha: alpha.to_f64().unwrap_or(f64::NAN),
                    max_m: self.tau,
                });
            }
            let m_int = m as u64;
            LeafState {
                k: self.tau + 1 - m_int,
                h: beta * cast::<F>(m),
            }
        };
        self.tree.insert(j, leaf);
        Ok(())
    }

    pub fn delete_piece(&mut self, j: usize) -> Result<()> {
        if j >= self.len() {
            return Err(Error::IndexOutOfBounds {
                index: j,
                size: self.len(),
            });
        }
        self.tree.delete(j);
        Ok(())
    }

    /// `(alpha, beta) <- (alpha/(2a+1), beta/(2a+1))` on every piece; O(1).
    pub fn update_all(&mut self) {
        self.tau += 1;
    }

    /// Inverse of [`update_all`]; exact because only the counter moves.
    pub fn inv_update_all(&mut self) -> Result<()> {
        if self.tau <= 1 {
            return Err(Error::Internal(
                "inv_update_all would rewind past the initial time".into(),
            ));
        }
        self.tau -= 1;
        Ok(())
    }

    /// All pieces in order; O(n).
    pub fn dump(&self) -> Vec<PieceCoeffs<F>> {
        self.tree
            .collect()
            .into_iter()
            .map(|leaf| self.coeffs_of(leaf))
            .collect()
    }

    /// Debug dump of `(index, alpha, beta)` triples as JSON.
    pub fn dump_json(&self) -> String
    where
        F: Serialize,
    {
        let rows: Vec<(usize, F, F)> = self
            .dump()
            .into_iter()
            .enumerate()
            .map(|(i, c)| (i, c.alpha, c.beta))
            .collect();
        serde_json::to_string(&rows).expect("serializable")
    }
}
