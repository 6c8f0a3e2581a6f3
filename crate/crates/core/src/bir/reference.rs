//! Reference solver used as an independent test oracle.
//!
//! Works directly on the primal: it propagates the value function
//! `P_i(t) = min { sum_{j<=i} (v_j - y_j)^2 : v_i = t, constraints }`
//! as an explicit list of quadratic pieces, applying the sliding-window
//! minimum induced by the gap constraints at each step. Exact up to float
//! rounding; O(n^2) in the worst case, so intended for moderate n.

use crate::{cast, Error, Result, Scalar};

#[derive(Debug, Clone, Copy)]
struct Piece<F> {
    lo: F,
    hi: F,
    a2: F,
    a1: F,
    a0: F,
}

impl<F: Scalar> Piece<F> {
    fn eval(&self, t: F) -> F {
        (self.a2 * t + self.a1) * t + self.a0
    }

    /// Minimizer of the piece over its own interval.
    fn argmin(&self) -> F {
        if self.a2 > F::zero() {
            let stat = -self.a1 / (cast::<F>(2.0) * self.a2);
            stat.max(self.lo).min(self.hi)
        } else if self.a1 > F::zero() {
            self.lo
        } else if self.a1 < F::zero() {
            self.hi
        } else {
            self.lo
        }
    }

    /// Same quadratic expressed in the shifted variable `t -> t - shift`.
    fn shifted(&self, shift: F) -> Piece<F> {
        let a2 = self.a2;
        let a1 = self.a1 - cast::<F>(2.0) * self.a2 * shift;
        let a0 = (self.a2 * shift - self.a1) * shift + self.a0;
        Piece {
            lo: self.lo + shift,
            hi: self.hi + shift,
            a2,
            a1,
            a0,
        }
    }
}

fn argmin_of<F: Scalar>(pieces: &[Piece<F>]) -> (F, F) {
    let mut best_t = pieces[0].lo;
    let mut best_v = pieces[0].eval(best_t);
    for p in pieces {
        let t = p.argmin();
        let v = p.eval(t);
        if v < best_v {
            best_v = v;
            best_t = t;
        }
    }
    (best_t, best_v)
}

/// Exact minimizer of `sum (v_i - y_i)^2` subject to
/// `a_i <= v_{i+1} - v_i <= b_i` and `v in [0, 1]^n`.
pub(crate) fn solve_window_dp<F: Scalar>(y: &[F], a: &[F], b: &[F]) -> Result<Vec<F>> {
    let n = y.len();
    let zero = F::zero();
    let one = F::one();
    let two = cast::<F>(2.0);

    let mut pieces: Vec<Piece<F>> = vec![Piece {
        lo: zero,
        hi: one,
        a2: one,
        a1: -two * y[0],
        a0: y[0] * y[0],
    }];
    let mut minimizers: Vec<F> = Vec::with_capacity(n);

    for i in 0..n - 1 {
        let (m, pm) = argmin_of(&pieces);
        minimizers.push(m);

        // window minimum: left branch shifted by a_i, flat middle, right
        // branch shifted by b_i
        let mut next: Vec<Piece<F>> = Vec::with_capacity(pieces.len() + 2);
        for p in &pieces {
            if p.lo >= m {
                break;
            }
            let mut q = *p;
            q.hi = q.hi.min(m);
            next.push(q.shifted(a[i]));
        }
        if b[i] > a[i] {
            next.push(Piece {
                lo: m + a[i],
                hi: m + b[i],
                a2: zero,
                a1: zero,
                a0: pm,
            });
        }
        for p in &pieces {
            if p.hi <= m {
                continue;
            }
            let mut q = *p;
            q.lo = q.lo.max(m);
            next.push(q.shifted(b[i]));
        }

        // clip to the box and add the next squared deviation
        let yn = y[i + 1];
        let mut clipped: Vec<Piece<F>> = Vec::with_capacity(next.len());
        for p in &mut next {
            let lo = p.lo.max(zero);
            let hi = p.hi.min(one);
            if lo > hi {
                continue;
            }
            clipped.push(Piece {
                lo,
                hi,
                a2: p.a2 + one,
                a1: p.a1 - two * yn,
                a0: p.a0 + yn * yn,
            });
        }
        if clipped.is_empty() {
            return Err(Error::Infeasible { position: i + 1 });
        }
        pieces = clipped;
    }

    let (last, _) = argmin_of(&pieces);
    let mut v = vec![zero; n];
    v[n - 1] = last;
    for i in (0..n - 1).rev() {
        let lo = v[i + 1] - b[i];
        let hi = v[i + 1] - a[i];
        v[i] = minimizers[i].max(lo).min(hi).max(zero).min(one);
    }
    Ok(v)
}
