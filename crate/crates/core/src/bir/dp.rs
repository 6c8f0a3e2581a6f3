//! Dual dynamic program behind `solve_bir`.
//!
//! The dual objective decomposes into partial minimizations `A_i(f_i)` whose
//! derivatives are convex piecewise-linear functions, maintained as pieces
//! `(alpha_j, beta_j)` in the deferred-update store. A forward pass builds
//! `A_1 .. A_{n-2}`, the terminal step assembles the full objective and
//! locates its zero subgradient, and a backward pass rewinds the store to
//! recover every `f_i` by binary search over the stored structure.
//!
//! Piece boundaries are reconstructed from derivative continuity; the single
//! non-smooth point (the `|f|` kink at 0 introduced each round) is tracked
//! by index. The only pieces ever born are linear edges with slopes
//! `e_i -+ 1`, the quadratic image `(1/2, 0)` of the previous kink, and
//! duplicates created when splitting at the new kink, so every adjacent pair
//! of pieces off the tracked kink has distinct quadratic coefficients.

use super::Instance;
use crate::maintainer::BirPartialMaintainer;
use crate::{cast, Error, Result, Scalar};

/// Saturation data of one minimization layer: `h*(f)` clamps to `u` below
/// `u + e - 1 + gap_minus` and to `w` above `w + e + 1 - gap_plus`; between,
/// the optimal previous variable moves through pieces `ell..=r`.
#[derive(Debug, Clone, Copy)]
struct Thresholds<F> {
    e: F,
    u: F,
    w: F,
    gap_minus: F,
    gap_plus: F,
    ell: usize,
    r: usize,
    left_edge: bool,
    right_edge: bool,
}

/// Undo record for one forward round.
#[derive(Debug)]
struct RoundLog<F> {
    th: Thresholds<F>,
    c: F,
    d: F,
    z_before: Option<usize>,
    kink_pos: Option<usize>,
    split_pos: Option<usize>,
    add_z: Option<usize>,
    pref: (usize, usize),
    suff: (usize, usize),
}

struct Engine<F> {
    m: BirPartialMaintainer<F>,
    /// left piece index of the tracked `|f|` kink, if any
    z: Option<usize>,
}

impl<F: Scalar> Engine<F> {
    fn new(n: usize) -> Self {
        Engine {
            m: BirPartialMaintainer::with_capacity(2 * n + 8),
            z: None,
        }
    }

    fn len(&self) -> usize {
        self.m.len()
    }

    fn coeff(&self, j: usize) -> (F, F) {
        let c = self.m.query(j).expect("piece index in range");
        (c.alpha, c.beta)
    }

    /// Boundary between pieces `j` and `j+1`, from derivative continuity.
    fn vertex(&self, j: usize) -> F {
        if self.z == Some(j) {
            return F::zero();
        }
        let (aj, bj) = self.coeff(j);
        let (an, bn) = self.coeff(j + 1);
        let da = aj - an;
        debug_assert!(
            !da.is_zero(),
            "identical adjacent quadratic coefficients off the kink"
        );
        (bn - bj) / (cast::<F>(2.0) * da)
    }

    /// Derivative at the left end of piece `j` (`-inf` for an unbounded
    /// quadratic head).
    fn start_deriv(&self, j: usize) -> F {
        let (a, b) = self.coeff(j);
        if a.is_zero() {
            b
        } else if j == 0 {
            F::neg_infinity()
        } else {
            cast::<F>(2.0) * a * self.vertex(j - 1) + b
        }
    }

    /// Derivative at the right end of piece `j`.
    fn end_deriv(&self, j: usize) -> F {
        let (a, b) = self.coeff(j);
        if a.is_zero() {
            b
        } else if j == self.len() - 1 {
            F::infinity()
        } else {
            cast::<F>(2.0) * a * self.vertex(j) + b
        }
    }

    fn find_last_start_le(&self, e: F) -> Option<usize> {
        if self.start_deriv(0) > e {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.len() - 1);
        while lo < hi {
            let mid = (lo + hi).div_ceil(2);
            if self.start_deriv(mid) <= e {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        Some(lo)
    }

    fn find_first_end_ge(&self, e: F) -> Option<usize> {
        if self.end_deriv(self.len() - 1) < e {
            return None;
        }
        let (mut lo, mut hi) = (0usize, self.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.end_deriv(mid) >= e {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }

    /// Computes the clip points for the next minimization layer.
    fn thresholds(&self, e: F) -> Thresholds<F> {
        let s = self.len();
        let e_lo = e - F::one();
        let e_hi = e + F::one();

        // left clip u: maximal point with derivative e - 1
        let (mut u, ell, mut left_edge);
        match self.find_last_start_le(e_lo) {
            None => {
                u = F::neg_infinity();
                ell = 0;
                left_edge = false;
            }
            Some(j) => {
                let (a, b) = self.coeff(j);
                if !a.is_zero() {
                    let cand = (e_lo - b) / (cast::<F>(2.0) * a);
                    if j == s - 1 || cand <= self.vertex(j) {
                        u = cand;
                        ell = j;
                        left_edge = true;
                    } else {
                        // derivative jumps over e-1 at the kink vertex
                        u = self.vertex(j);
                        ell = j + 1;
                        left_edge = true;
                    }
                } else if j == s - 1 {
                    // flat tail at or below e-1: keep it as the left tail
                    u = if j == 0 {
                        F::neg_infinity()
                    } else {
                        self.vertex(j - 1)
                    };
                    ell = j;
                    left_edge = false;
                } else {
                    u = self.vertex(j);
                    ell = j + 1;
                    left_edge = true;
                }
            }
        }
        // never leave a fresh linear edge adjacent to a kept linear piece
        if left_edge && ell < s {
            let (a, _) = self.coeff(ell);
            let kink_at_boundary = self.z.is_some_and(|z| z + 1 == ell);
            if a.is_zero() && !kink_at_boundary {
                left_edge = false;
                u = if ell == 0 {
                    F::neg_infinity()
                } else {
                    self.vertex(ell - 1)
                };
            }
        }

        // right clip w: minimal point with derivative e + 1
        let (mut w, r, mut right_edge);
        match self.find_first_end_ge(e_hi) {
            None => {
                w = F::infinity();
                r = s - 1;
                right_edge = false;
            }
            Some(j) => {
                let (a, b) = self.coeff(j);
                if !a.is_zero() {
                    let cand = (e_hi - b) / (cast::<F>(2.0) * a);
                    if j == 0 || cand >= self.vertex(j - 1) {
                        w = cand;
                        r = j;
                        right_edge = true;
                    } else {
                        w = self.vertex(j - 1);
                        r = j - 1;
                        right_edge = true;
                    }
                } else if j == 0 {
                    // flat head at or above e+1: keep it as the right tail
                    w = if s == 1 {
                        F::infinity()
                    } else {
                        self.vertex(0)
                    };
                    r = 0;
                    right_edge = false;
                } else {
                    // flat at e+1 exactly, or a kink jump past it
                    w = self.vertex(j - 1);
                    r = j - 1;
                    right_edge = true;
                }
            }
        }
        if right_edge && r < s {
            let (a, _) = self.coeff(r);
            let kink_at_boundary = self.z == Some(r);
            if a.is_zero() && !kink_at_boundary {
                right_edge = false;
                w = if r == s - 1 {
                    F::infinity()
                } else {
                    self.vertex(r)
                };
            }
        }

        let gap_minus = if u.is_finite() && ell < s {
            (self.start_deriv(ell) - e_lo).max(F::zero())
        } else {
            F::zero()
        };
        let gap_plus = if w.is_finite() {
            (e_hi - self.end_deriv(r)).max(F::zero())
        } else {
            F::zero()
        };

        Thresholds {
            e,
            u,
            w,
            gap_minus,
            gap_plus,
            ell,
            r,
            left_edge,
            right_edge,
        }
    }

    /// `argmin_h [ A(h) + min_g (e g + |g| + (f - h - g)^2 / 2) ]` over the
    /// structure described by `th`.
    fn best_prev(&self, f: F, th: &Thresholds<F>) -> F {
        let e_lo = th.e - F::one();
        let e_hi = th.e + F::one();
        if f <= th.u + e_lo + th.gap_minus {
            return th.u;
        }
        if f >= th.w + e_hi - th.gap_plus {
            return th.w;
        }
        if th.ell > th.r {
            // both clips landed on the kink; the whole middle maps to 0
            return F::zero();
        }
        // smallest piece j in [ell, r] whose image interval reaches f
        let f_hi = |j: usize| -> F {
            if j == th.r {
                F::infinity()
            } else {
                let (a, b) = self.coeff(j);
                (cast::<F>(2.0) * a + F::one()) * self.vertex(j) + b
            }
        };
        let (mut lo, mut hi) = (th.ell, th.r);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if f_hi(mid) >= f {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let (a, b) = self.coeff(lo);
        if lo > th.ell {
            let f_lo = (cast::<F>(2.0) * a + F::one()) * self.vertex(lo - 1) + b;
            if f < f_lo {
                // inside the kink's image interval
                return F::zero();
            }
        }
        (f - b) / (cast::<F>(2.0) * a + F::one())
    }

    /// Locates the piece whose closed interval contains 0; the flag says the
    /// point sits exactly on the piece's right boundary.
    fn find_zero_piece(&self) -> (usize, bool) {
        let s = self.len();
        if s == 1 || self.vertex_ge_zero_first() == s - 1 {
            return (s - 1, false);
        }
        let j = self.vertex_ge_zero_first();
        (j, self.vertex(j).is_zero())
    }

    /// First piece whose right boundary is `>= 0`, or `s-1` if none.
    fn vertex_ge_zero_first(&self) -> usize {
        let s = self.len();
        if s == 1 || self.vertex(s - 2) < F::zero() {
            return s - 1;
        }
        let (mut lo, mut hi) = (0usize, s - 2);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.vertex(mid) >= F::zero() {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    fn init_base(&mut self, c: F, d: F, e: F) -> Result<()> {
        let half = cast::<F>(0.5);
        if d > F::zero() {
            self.m.insert_piece(0, F::zero(), c - d + e - F::one())?;
            self.m.insert_piece(1, half, c - d)?;
            self.m.insert_piece(2, half, c + d)?;
            self.m.insert_piece(3, F::zero(), c + d + e + F::one())?;
            self.z = Some(1);
        } else {
            self.m.insert_piece(0, F::zero(), c + e - F::one())?;
            self.m.insert_piece(1, half, c)?;
            self.m.insert_piece(2, F::zero(), c + e + F::one())?;
            self.z = None;
        }
        Ok(())
    }

    /// One forward round: `A_{i-1} -> A_i` with coefficients `(c, d, e)`.
    fn forward_round(
        &mut self,
        round: usize,
        c: F,
        d: F,
        e: F,
        deleted: &mut Vec<(F, F)>,
    ) -> Result<RoundLog<F>> {
        let s = self.len();
        let th = self.thresholds(e);
        let z_before = self.z;

        // clip: deletions outside [ell, r]
        let suff_start = deleted.len();
        for _ in th.r + 1..s {
            let (a, b) = self.coeff(th.r + 1);
            deleted.push((a, b));
            self.m.delete_piece(th.r + 1)?;
        }
        let suff = (suff_start, deleted.len() - suff_start);
        let pref_start = deleted.len();
        for _ in 0..th.ell {
            let (a, b) = self.coeff(0);
            deleted.push((a, b));
            self.m.delete_piece(0)?;
        }
        let pref = (pref_start, deleted.len() - pref_start);

        // fresh linear edges are invariant under the global transform, so
        // they may go in before update_all
        if th.right_edge {
            let len = self.len();
            self.m.insert_piece(len, F::zero(), e + F::one())?;
        }
        if th.left_edge {
            self.m.insert_piece(0, F::zero(), e - F::one())?;
        }
        self.m.update_all();

        // image of the previous kink: a fresh (1/2, 0) piece
        let le = th.left_edge as usize;
        let kink_pos = match z_before {
            Some(zp)
                if (zp >= th.ell && zp < th.r)
                    || (zp + 1 == th.ell && th.u.is_zero())
                    || (zp == th.r && th.w.is_zero()) =>
            {
                let pos = zp + 1 - th.ell + le;
                self.m.insert_piece(pos, cast::<F>(0.5), F::zero())?;
                Some(pos)
            }
            _ => None,
        };
        self.z = None;

        // new kink at 0 from c f + d |f|
        let (split_pos, add_z) = if d > F::zero() {
            let (pz, on_boundary) = self.find_zero_piece();
            let split = if on_boundary {
                None
            } else {
                let (a, b) = self.coeff(pz);
                self.m.insert_piece(pz + 1, a, b)?;
                Some(pz)
            };
            let len = self.len();
            self.m.add(0, pz, c - d)?;
            self.m.add(pz + 1, len - 1, c + d)?;
            self.z = Some(pz);
            (split, Some(pz))
        } else {
            if !c.is_zero() {
                let len = self.len();
                self.m.add(0, len - 1, c)?;
            }
            (None, None)
        };

        debug_assert!(
            self.len() <= 2 * round + 2,
            "piece count {} exceeds 2i+2 = {} at round {round}",
            self.len(),
            2 * round + 2
        );

        Ok(RoundLog {
            th,
            c,
            d,
            z_before,
            kink_pos,
            split_pos,
            add_z,
            pref,
            suff,
        })
    }

    /// Exact inverse of `forward_round`.
    fn undo_round(&mut self, log: &RoundLog<F>, deleted: &[(F, F)]) -> Result<()> {
        if let Some(z) = log.add_z {
            let len = self.len();
            self.m.add(0, z, -(log.c - log.d))?;
            self.m.add(z + 1, len - 1, -(log.c + log.d))?;
        } else if !log.c.is_zero() {
            let len = self.len();
            self.m.add(0, len - 1, -log.c)?;
        }
        if let Some(p) = log.split_pos {
            self.m.delete_piece(p + 1)?;
        }
        if let Some(kp) = log.kink_pos {
            self.m.delete_piece(kp)?;
        }
        self.m.inv_update_all()?;
        if log.left_edge() {
            self.m.delete_piece(0)?;
        }
        if log.right_edge() {
            let len = self.len();
            self.m.delete_piece(len - 1)?;
        }
        let (ps, pl) = log.pref;
        for &(a, b) in deleted[ps..ps + pl].iter().rev() {
            self.m.insert_piece(0, a, b)?;
        }
        let (ss, sl) = log.suff;
        for &(a, b) in deleted[ss..ss + sl].iter() {
            let len = self.len();
            self.m.insert_piece(len, a, b)?;
        }
        self.z = log.z_before;
        Ok(())
    }
}

impl<F: Scalar> RoundLog<F> {
    fn left_edge(&self) -> bool {
        self.th.left_edge
    }
    fn right_edge(&self) -> bool {
        self.th.right_edge
    }
}

fn softshrink<F: Scalar>(x: F) -> F {
    if x > F::one() {
        x - F::one()
    } else if x < -F::one() {
        x + F::one()
    } else {
        F::zero()
    }
}

/// Solves the dual by the forward/backward dynamic program and maps the
/// optimizer back to the primal; requires n >= 3 and a feasible instance.
pub(super) fn solve_dual_dp<F: Scalar>(instance: &Instance<F>) -> Result<Vec<F>> {
    let n = instance.len();
    debug_assert!(n >= 3);
    let duals = super::dualize(instance)?;
    let (c, d, e) = (&duals.c, &duals.d, &duals.e);

    let mut eng = Engine::new(n);
    eng.init_base(c[0], d[0], e[0])?;

    let mut logs: Vec<RoundLog<F>> = Vec::with_capacity(n.saturating_sub(3));
    let mut deleted: Vec<(F, F)> = Vec::new();
    for i in 2..=n - 2 {
        let log = eng.forward_round(i, c[i - 1], d[i - 1], e[i - 1], &mut deleted)?;
        logs.push(log);
    }

    // terminal assembly: A_{n-1}(f) = c f + d |f| + M(f) + T(f), where M
    // couples to A_{n-2} through (e_{n-1}, g_{n-1}) and T handles g_n. Its
    // derivative is monotone and cheap to evaluate pointwise, so the zero
    // subgradient is found by bisection to float fixed-point.
    let term = eng.thresholds(e[n - 2]);
    let (cn, dn, en) = (c[n - 2], d[n - 2], e[n - 1]);
    let one = F::one();
    let deriv = |f: F| -> F {
        let h = eng.best_prev(f, &term);
        let m_part = (f - h).max(e[n - 2] - one).min(e[n - 2] + one);
        let t_part = f.max(-en - one).min(-en + one);
        let cd = if f > F::zero() {
            cn + dn
        } else if f < F::zero() {
            cn - dn
        } else {
            cn
        };
        cd + m_part + t_part
    };
    // Beyond computable saturation points the derivative is constant, so a
    // finite upper bracket exists in exact arithmetic; when the constant tail
    // value is zero (fully rigid instances) any point past it is optimal.
    let f_m_right = if term.w.is_finite() {
        term.w + term.e + one
    } else {
        let mut fm = F::zero();
        if term.u.is_finite() {
            fm = fm.max(term.u + term.e - one + term.gap_minus);
        }
        if term.r > term.ell {
            let (a, b) = eng.coeff(term.r);
            fm = fm.max((cast::<F>(2.0) * a + one) * eng.vertex(term.r - 1) + b);
        }
        fm
    };
    let mut hi = f_m_right.max(-en + one).max(F::zero()) + one;
    if deriv(hi) < F::zero() {
        // flat tail within float noise: hi itself is (near-)optimal
    } else {
        let mut lo = hi.min(F::zero()) - cast::<F>(16.0);
        let mut tries = 0;
        while deriv(lo) > F::zero() {
            lo = lo * cast::<F>(4.0);
            tries += 1;
            if tries > 60 {
                return Err(Error::Internal(
                    "dual derivative does not bracket a zero from below".into(),
                ));
            }
        }
        for _ in 0..200 {
            let mid = (lo + hi) * cast::<F>(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if deriv(mid) < F::zero() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let fstar = hi;

    let mut f = vec![F::zero(); n - 1];
    f[n - 2] = fstar;
    f[n - 3] = eng.best_prev(fstar, &term);

    for (k, i) in (2..=n - 2).rev().enumerate() {
        let log = &logs[logs.len() - 1 - k];
        eng.undo_round(log, &deleted)?;
        f[i - 2] = eng.best_prev(f[i - 1], &log.th);
    }

    let mut g = vec![F::zero(); n];
    g[0] = softshrink(f[0] - e[0]);
    for i in 1..n - 1 {
        g[i] = softshrink(f[i] - f[i - 1] - e[i]);
    }
    g[n - 1] = softshrink(-f[n - 2] - e[n - 1]);

    let half = cast::<F>(0.5);
    let y = &instance.y;
    let mut v = vec![F::zero(); n];
    v[0] = y[0] - half * (f[0] - g[0]);
    for i in 1..n - 1 {
        v[i] = y[i] - half * (f[i] - f[i - 1] - g[i]);
    }
    v[n - 1] = y[n - 1] + half * (f[n - 2] + g[n - 1]);
    Ok(v)
}
