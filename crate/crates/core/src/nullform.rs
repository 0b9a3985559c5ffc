//! Quadratic nonlinearities `N_i = Σ_{k,l} Q^{(i,k,l)}(∂Φ_k, ∂Φ_l)`.
//!
//! With `p = LΦ = (∂_t + ∂_x)Φ` and `q = L̄Φ = (∂_t - ∂_x)Φ` we have
//! `∂_tΦ = (p+q)/2` and `∂_xΦ = (p-q)/2`, so each Cartesian block
//! `Q_{μν}` becomes a null-frame block with coefficients of `p p'`, `p q'`,
//! `q p'` and `q q'`. A block is null exactly when the `pp` and `qq`
//! coefficients vanish.
//!
//! Specs are stored in the null frame. Null blocks carry exact zeros in the
//! `pp`/`qq` slots, so a pure traveling wave (`p ≡ 0` or `q ≡ 0`) produces a
//! nonlinearity that is bit-for-bit zero.

use crate::error::{Error, Result};

/// Cartesian table `Q_{μν}`, `μ, ν ∈ {t, x}`. `tx` and `xt` are kept
/// distinct: `Q(∂φ, ∂ψ) = Σ Q_{μν} ∂_μφ ∂_νψ` is not symmetrized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticForm {
    pub tt: f64,
    pub tx: f64,
    pub xt: f64,
    pub xx: f64,
}

impl QuadraticForm {
    pub fn new(tt: f64, tx: f64, xt: f64, xx: f64) -> Result<Self> {
        let q = Self { tt, tx, xt, xx };
        if q.as_array().iter().all(|c| c.is_finite()) {
            Ok(q)
        } else {
            Err(Error::Domain(format!("non-finite quadratic form {q:?}")))
        }
    }

    /// `|∂_tφ|²`, the model non-null nonlinearity.
    pub fn john() -> Self {
        Self { tt: 1.0, tx: 0.0, xt: 0.0, xx: 0.0 }
    }

    /// `∂_tφ ∂_tψ - ∂_xφ ∂_xψ`.
    pub fn wave_null() -> Self {
        Self { tt: 1.0, tx: 0.0, xt: 0.0, xx: -1.0 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.tt, self.tx, self.xt, self.xx]
    }

    /// `Q(a, b) = Σ Q_{μν} a^μ b^ν` on Cartesian vectors `(a_t, a_x)`.
    pub fn apply(&self, a: (f64, f64), b: (f64, f64)) -> f64 {
        self.tt * a.0 * b.0 + self.tx * a.0 * b.1 + self.xt * a.1 * b.0 + self.xx * a.1 * b.1
    }

    /// Inverse of [`to_null_frame`].
    pub fn from_null_frame(c: &NullFrameForm) -> Self {
        Self {
            tt: c.pp + c.pq + c.qp + c.qq,
            tx: c.pp - c.pq + c.qp - c.qq,
            xt: c.pp + c.pq - c.qp - c.qq,
            xx: c.pp - c.pq - c.qp + c.qq,
        }
    }
}

/// Coefficients of `pp'`, `pq'`, `qp'`, `qq'`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NullFrameForm {
    pub pp: f64,
    pub pq: f64,
    pub qp: f64,
    pub qq: f64,
}

impl NullFrameForm {
    pub const ZERO: Self = Self { pp: 0.0, pq: 0.0, qp: 0.0, qq: 0.0 };

    /// `α Lφ L̄ψ + β L̄φ Lψ`.
    pub fn null(alpha: f64, beta: f64) -> Self {
        Self { pp: 0.0, pq: alpha, qp: beta, qq: 0.0 }
    }

    pub fn new(pp: f64, pq: f64, qp: f64, qq: f64) -> Result<Self> {
        let c = Self { pp, pq, qp, qq };
        if [pp, pq, qp, qq].iter().all(|v| v.is_finite()) {
            Ok(c)
        } else {
            Err(Error::Domain(format!("non-finite null-frame form {c:?}")))
        }
    }

    pub fn is_null(&self) -> bool {
        self.pp == 0.0 && self.qq == 0.0
    }

    pub fn is_zero(&self) -> bool {
        self.is_null() && self.pq == 0.0 && self.qp == 0.0
    }

    #[inline]
    pub fn apply(&self, p: f64, q: f64, p2: f64, q2: f64) -> f64 {
        self.pp * p * p2 + self.pq * p * q2 + self.qp * q * p2 + self.qq * q * q2
    }
}

pub fn to_null_frame(q: &QuadraticForm) -> NullFrameForm {
    NullFrameForm {
        pp: 0.25 * (q.tt + q.tx + q.xt + q.xx),
        pq: 0.25 * (q.tt - q.tx + q.xt - q.xx),
        qp: 0.25 * (q.tt + q.tx - q.xt - q.xx),
        qq: 0.25 * (q.tt - q.tx - q.xt + q.xx),
    }
}

/// `Q(L, L)` and `Q(L̄, L̄)` both vanish (within `tol`).
pub fn is_null(q: &QuadraticForm, tol: f64) -> bool {
    let c = to_null_frame(q);
    c.pp.abs() <= tol && c.qq.abs() <= tol
}

/// Input frame for one coefficient block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    Cartesian,
    Null,
}

/// One `(i, k, l)` block as supplied by a config file (0-based indices).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block {
    pub i: usize,
    pub k: usize,
    pub l: usize,
    pub frame: Frame,
    pub coeffs: [f64; 4],
}

/// Dense `n × n × n` table of null-frame blocks, index `(i, k, l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearitySpec {
    n: usize,
    blocks: Vec<NullFrameForm>,
    zero: bool,
}

impl NonlinearitySpec {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            blocks: vec![NullFrameForm::ZERO; n * n * n],
            zero: true,
        }
    }

    /// `N_i = Σ C_i^{kl} LΦ_k L̄Φ_l`, with `C` laid out as `c[(i*n + k)*n + l]`.
    pub fn from_null_constants(n: usize, c: &[f64]) -> Result<Self> {
        if c.len() != n * n * n {
            return Err(Error::Dimension { expected: n * n * n, got: c.len() });
        }
        if let Some(v) = c.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite coefficient {v}")));
        }
        let blocks = c.iter().map(|&v| NullFrameForm::null(v, 0.0)).collect();
        Ok(Self::with_blocks(n, blocks))
    }

    /// Builds a spec from `(i, k, l)` blocks; unspecified blocks are zero and
    /// repeated blocks add. Blocks whose `pp`/`qq` coefficients are within
    /// `null_tol` of zero are stored with those coefficients set to exactly 0.
    pub fn from_blocks(n: usize, blocks: &[Block], null_tol: f64) -> Result<Self> {
        let mut table = vec![NullFrameForm::ZERO; n * n * n];
        for b in blocks {
            for idx in [b.i, b.k, b.l] {
                if idx >= n {
                    return Err(Error::Dimension { expected: n, got: idx + 1 });
                }
            }
            let [a, c1, c2, d] = b.coeffs;
            let form = match b.frame {
                Frame::Cartesian => to_null_frame(&QuadraticForm::new(a, c1, c2, d)?),
                Frame::Null => NullFrameForm::new(a, c1, c2, d)?,
            };
            let slot = &mut table[(b.i * n + b.k) * n + b.l];
            slot.pp += form.pp;
            slot.pq += form.pq;
            slot.qp += form.qp;
            slot.qq += form.qq;
        }
        for slot in &mut table {
            if slot.pp.abs() <= null_tol && slot.qq.abs() <= null_tol {
                slot.pp = 0.0;
                slot.qq = 0.0;
            }
        }
        Ok(Self::with_blocks(n, table))
    }

    fn with_blocks(n: usize, blocks: Vec<NullFrameForm>) -> Self {
        let zero = blocks.iter().all(NullFrameForm::is_zero);
        Self { n, blocks, zero }
    }

    /// Single field, `N = |∂_tφ|²`.
    pub fn john() -> Self {
        Self::with_blocks(1, vec![to_null_frame(&QuadraticForm::john())])
    }

    /// Single field, `N = c LΦ L̄Φ`.
    pub fn single_null(c: f64) -> Self {
        Self::with_blocks(1, vec![NullFrameForm::null(c, 0.0)])
    }

    /// Two fields with `N_1 = LΦ_1 L̄Φ_2 - LΦ_2 L̄Φ_1 = -N_2`.
    ///
    /// The coupling is antisymmetric in `(k, l)`, so it vanishes identically
    /// on spatially homogeneous data where `LΦ_k = L̄Φ_k`.
    pub fn antisymmetric_pair() -> Self {
        let mut c = vec![0.0; 8];
        c[1] = 1.0; // (1, 1, 2)
        c[2] = -1.0; // (1, 2, 1)
        c[5] = -1.0; // (2, 1, 2)
        c[6] = 1.0; // (2, 2, 1)
        Self::from_null_constants(2, &c).unwrap()
    }

    pub fn fields(&self) -> usize {
        self.n
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn is_null(&self) -> bool {
        self.blocks.iter().all(NullFrameForm::is_null)
    }

    pub fn block(&self, i: usize, k: usize, l: usize) -> &NullFrameForm {
        &self.blocks[(i * self.n + k) * self.n + l]
    }

    pub fn blocks(&self) -> impl Iterator<Item = ((usize, usize, usize), &NullFrameForm)> {
        let n = self.n;
        self.blocks
            .iter()
            .enumerate()
            .map(move |(idx, b)| ((idx / (n * n), (idx / n) % n, idx % n), b))
    }

    pub fn evaluate(&self, p: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        for len in [p.len(), q.len()] {
            if len != self.n {
                return Err(Error::Dimension { expected: self.n, got: len });
            }
        }
        let mut out = vec![0.0; self.n];
        self.evaluate_into(p, q, &mut out);
        Ok(out)
    }

    /// Unchecked hot-loop form of [`evaluate`](Self::evaluate).
    #[inline]
    pub fn evaluate_into(&self, p: &[f64], q: &[f64], out: &mut [f64]) {
        let n = self.n;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            let row = &self.blocks[i * n * n..(i + 1) * n * n];
            for k in 0..n {
                for l in 0..n {
                    acc += row[k * n + l].apply(p[k], q[k], p[l], q[l]);
                }
            }
            *o = acc;
        }
    }

    /// `∂N_i/∂p_m` into `dp[i*n + m]` and `∂N_i/∂q_m` into `dq[i*n + m]`.
    pub fn jacobian_into(&self, p: &[f64], q: &[f64], dp: &mut [f64], dq: &mut [f64]) {
        let n = self.n;
        dp.iter_mut().for_each(|v| *v = 0.0);
        dq.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let b = self.block(i, k, l);
                    // pp p_k p_l + pq p_k q_l + qp q_k p_l + qq q_k q_l
                    dp[i * n + k] += b.pp * p[l] + b.pq * q[l];
                    dp[i * n + l] += b.pp * p[k] + b.qp * q[k];
                    dq[i * n + l] += b.pq * p[k] + b.qq * q[k];
                    dq[i * n + k] += b.qp * p[l] + b.qq * q[l];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn frame(q: QuadraticForm) -> [f64; 4] {
        let c = to_null_frame(&q);
        [c.pp, c.pq, c.qp, c.qq]
    }

    #[test]
    fn frame_conversion_examples() {
        assert_eq!(frame(QuadraticForm::wave_null()), [0.0, 0.5, 0.5, 0.0]);
        assert_eq!(frame(QuadraticForm::john()), [0.25; 4]);
        assert_eq!(
            frame(QuadraticForm::new(1.0, 0.0, 0.0, 1.0).unwrap()),
            [0.5, 0.0, 0.0, 0.5]
        );
    }

    #[test]
    fn null_decision_examples() {
        assert!(is_null(&QuadraticForm::wave_null(), 0.0));
        assert!(!is_null(&QuadraticForm::john(), 0.0));
        for (alpha, beta) in [(1.0, 0.0), (0.0, 1.0), (-2.5, 0.75), (3.0, 3.0)] {
            let q = QuadraticForm::from_null_frame(&NullFrameForm::null(alpha, beta));
            assert!(is_null(&q, 0.0), "{q:?}");
        }
    }

    #[test]
    fn evaluate_examples() {
        let s = NonlinearitySpec::single_null(1.0);
        assert_eq!(s.evaluate(&[2.0], &[3.0]).unwrap(), vec![6.0]);
        assert_eq!(s.evaluate(&[0.0], &[-7.0]).unwrap()[0].to_bits(), 0);
        let john = NonlinearitySpec::john();
        assert_eq!(john.evaluate(&[2.0], &[0.0]).unwrap(), vec![1.0]);
        assert!(!john.is_null());
        assert!(matches!(
            s.evaluate(&[1.0, 2.0], &[1.0]),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn antisymmetric_pair_vanishes_on_equal_pq() {
        let s = NonlinearitySpec::antisymmetric_pair();
        assert!(s.is_null());
        let n = s.evaluate(&[0.3, -1.2], &[0.3, -1.2]).unwrap();
        assert_eq!(n, vec![0.0, 0.0]);
        let n = s.evaluate(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(n, vec![1.0, -1.0]);
    }

    #[test]
    fn from_blocks_validates_indices_and_zeroes_null_slots() {
        let b = Block { i: 0, k: 0, l: 1, frame: Frame::Cartesian, coeffs: [1.0, 0.0, 0.0, -1.0] };
        assert!(matches!(
            NonlinearitySpec::from_blocks(1, &[b], 0.0),
            Err(Error::Dimension { .. })
        ));
        // 0.1 is not exact in binary; the tolerance path must hard-zero pp/qq.
        let b = Block {
            i: 0,
            k: 0,
            l: 0,
            frame: Frame::Cartesian,
            coeffs: [0.1, 0.3, -0.3, -0.1],
        };
        let s = NonlinearitySpec::from_blocks(1, &[b], 1e-15).unwrap();
        assert!(s.is_null());
        assert_eq!(s.evaluate(&[0.0], &[5.0]).unwrap()[0].to_bits(), 0);
    }

    #[test]
    fn zero_spec_flag() {
        assert!(NonlinearitySpec::zero(3).is_zero());
        let s = NonlinearitySpec::from_blocks(2, &[], 0.0).unwrap();
        assert!(s.is_zero());
        assert!(!NonlinearitySpec::single_null(1.0).is_zero());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let blocks: Vec<Block> = (0..8)
            .map(|idx| Block {
                i: idx / 4,
                k: (idx / 2) % 2,
                l: idx % 2,
                frame: Frame::Null,
                coeffs: [0.3 * idx as f64 - 1.0, 0.7, -0.2 * idx as f64, 0.1 + 0.05 * idx as f64],
            })
            .collect();
        let s = NonlinearitySpec::from_blocks(2, &blocks, 0.0).unwrap();
        let p = [0.4, -1.1];
        let q = [0.9, 0.25];
        let mut dp = vec![0.0; 4];
        let mut dq = vec![0.0; 4];
        s.jacobian_into(&p, &q, &mut dp, &mut dq);
        let h = 1e-6;
        for m in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[m] += h;
            pm[m] -= h;
            let fp = s.evaluate(&pp, &q).unwrap();
            let fm = s.evaluate(&pm, &q).unwrap();
            let mut qp = q;
            let mut qm = q;
            qp[m] += h;
            qm[m] -= h;
            let gp = s.evaluate(&p, &qp).unwrap();
            let gm = s.evaluate(&p, &qm).unwrap();
            for i in 0..2 {
                assert!((dp[i * 2 + m] - (fp[i] - fm[i]) / (2.0 * h)).abs() < 1e-8);
                assert!((dq[i * 2 + m] - (gp[i] - gm[i]) / (2.0 * h)).abs() < 1e-8);
            }
        }
    }

    proptest! {
        #[test]
        fn null_frame_matches_cartesian(
            c in proptest::array::uniform4(-3.0f64..3.0),
            dphi in proptest::array::uniform2(-5.0f64..5.0),
            dpsi in proptest::array::uniform2(-5.0f64..5.0),
        ) {
            let q = QuadraticForm::new(c[0], c[1], c[2], c[3]).unwrap();
            let cart = q.apply((dphi[0], dphi[1]), (dpsi[0], dpsi[1]));
            let (p1, q1) = (dphi[0] + dphi[1], dphi[0] - dphi[1]);
            let (p2, q2) = (dpsi[0] + dpsi[1], dpsi[0] - dpsi[1]);
            let nf = to_null_frame(&q).apply(p1, q1, p2, q2);
            let scale: f64 = c.iter().map(|v| v.abs()).sum::<f64>()
                * (dphi[0].abs() + dphi[1].abs()) * (dpsi[0].abs() + dpsi[1].abs());
            prop_assert!((cart - nf).abs() <= 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn null_specs_annihilate_traveling_waves(
            c in proptest::collection::vec(-2.0f64..2.0, 8),
            v in proptest::array::uniform2(-10.0f64..10.0),
        ) {
            let s = NonlinearitySpec::from_null_constants(2, &c).unwrap();
            for n in s.evaluate(&[0.0, 0.0], &v).unwrap() {
                prop_assert_eq!(n.to_bits(), 0);
            }
            for n in s.evaluate(&v, &[0.0, 0.0]).unwrap() {
                prop_assert_eq!(n.to_bits(), 0);
            }
        }
    }
}
