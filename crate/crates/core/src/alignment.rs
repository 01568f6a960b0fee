//! Precoders, diagonal channels, and the zero-forcing post-processor.
//!
//! All transmitters share one random precoder V of size n x n/2. A diagonal
//! channel H that stayed constant over the whole block commutes with any
//! matrix, so the projector D onto the orthogonal complement of span(V)
//! annihilates every cross-link term D H V x = H D V x = 0. What survives of
//! the desired signal is governed by the rank identity
//!
//! ```text
//! rank([V | H V]) a.s.= min(d_v + min(d_v, n - F), n),
//! ```
//!
//! where F is the longest constant run of H. `verify_lemma1` checks the
//! identity by sampling; `free_interference_dims` is the resulting count
//! min(n/2, n - F) of decodable layers for a realization.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::coherence::ChannelTrace;
use crate::error::{Error, Result};

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<Complex64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Shared transmit precoder: n x n/2, full column rank, scaled so that
/// (1/n) E tr(Vx (Vx)^H) = P_t for unit-power layer symbols, i.e.
/// ||V||_F^2 = n P_t.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    v: DMatrix<Complex64>,
    p_t: f64,
}

impl Precoder {
    /// Wraps an externally supplied matrix, rescaling to the power
    /// normalization. Shape and finiteness are enforced here; column rank is
    /// checked where it matters, in `zero_forcing_matrix`.
    pub fn from_matrix(v: DMatrix<Complex64>, p_t: f64) -> Result<Self> {
        let n = v.nrows();
        if n < 2 || n % 2 != 0 {
            return Err(Error::param("n", format!("need even n >= 2, got {n}")));
        }
        if v.ncols() != n / 2 {
            return Err(Error::param(
                "v",
                format!("need n x n/2, got {} x {}", n, v.ncols()),
            ));
        }
        if !(p_t > 0.0 && p_t.is_finite()) {
            return Err(Error::param("p_t", format!("must be positive, got {p_t}")));
        }
        let fro2 = v.norm_squared();
        if !fro2.is_finite() || fro2 == 0.0 {
            return Err(Error::param("v", "entries must be finite and not all zero"));
        }
        let scale = (n as f64 * p_t / fro2).sqrt();
        Ok(Precoder { v: v * Complex64::from(scale), p_t })
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    /// Number of layers carried, d_v = n/2.
    pub fn layer_count(&self) -> usize {
        self.v.ncols()
    }

    pub fn total_power(&self) -> f64 {
        self.p_t
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.v
    }
}

/// Generates the shared precoder with i.i.d. CN(0,1) entries, then applies
/// the power normalization. Rank deficiency has probability zero; if the
/// numerical check still trips, the draw is retried up to 3 times on the
/// same stream.
pub fn gen_precoder(n: usize, p_t: f64, seed: u64) -> Result<Precoder> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_precoder_with_rng(n, p_t, &mut rng)
}

pub fn gen_precoder_with_rng(n: usize, p_t: f64, rng: &mut impl Rng) -> Result<Precoder> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::param("n", format!("need even n >= 2, got {n}")));
    }
    for _ in 0..3 {
        let prec = Precoder::from_matrix(gaussian_matrix(n, n / 2, rng), p_t)?;
        if numerical_rank(prec.matrix())? == n / 2 {
            return Ok(prec);
        }
    }
    Err(Error::Numerical(format!(
        "precoder rank deficient after 3 draws (n = {n})"
    )))
}

/// Zero-forcing post-processor: the orthogonal projector onto the complement
/// of span(V), D = I - V (V^H V)^-1 V^H. Hermitian, idempotent, rank n/2.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroForcer {
    d: DMatrix<Complex64>,
}

impl ZeroForcer {
    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.d
    }
}

/// Builds the projector via a thin QR of V: D = I - Q Q^H. Equivalent to the
/// normal-equation form but does not square the condition number.
pub fn zero_forcing_matrix(prec: &Precoder) -> Result<ZeroForcer> {
    let n = prec.n();
    let d_v = prec.layer_count();
    let rank = numerical_rank(prec.matrix())?;
    if rank < d_v {
        return Err(Error::Numerical(format!(
            "precoder has numerical rank {rank} < {d_v}; projector undefined"
        )));
    }
    let q = prec.matrix().clone().qr().q();
    let d = DMatrix::identity(n, n) - &q * q.adjoint();
    Ok(ZeroForcer { d })
}

/// Per-snapshot diagonal channel H = diag(h_1..h_n).
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalChannel {
    diag: Vec<Complex64>,
}

impl DiagonalChannel {
    pub fn from_values(diag: Vec<Complex64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::param("diag", "must have at least 1 entry"));
        }
        if diag
            .iter()
            .any(|h| !(h.re.is_finite() && h.im.is_finite()) || h.norm_sqr() == 0.0)
        {
            return Err(Error::param("diag", "entries must be finite and nonzero"));
        }
        Ok(DiagonalChannel { diag })
    }

    pub fn from_trace(trace: &ChannelTrace) -> Result<Self> {
        Self::from_values(trace.values().to_vec())
    }

    /// Block-constant channel, the cross-link assumption.
    pub fn constant(n: usize, value: Complex64) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("n", "must be >= 1"));
        }
        Self::from_values(vec![value; n])
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[Complex64] {
        &self.diag
    }

    pub fn to_matrix(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&DVector::from_column_slice(&self.diag))
    }

    /// H * M without materializing the n x n diagonal.
    pub fn apply(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let mut out = m.clone();
        for (i, &h) in self.diag.iter().enumerate() {
            for j in 0..out.ncols() {
                out[(i, j)] *= h;
            }
        }
        out
    }

    /// H * v for a column vector.
    pub fn apply_vec(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = v.clone();
        for (i, &h) in self.diag.iter().enumerate() {
            out[i] *= h;
        }
        out
    }
}

/// Count of singular values above rel_tol * sigma_max with the default
/// rel_tol = 1e-10 * max(rows, cols).
pub fn numerical_rank(m: &DMatrix<Complex64>) -> Result<usize> {
    let rel_tol = 1e-10 * m.nrows().max(m.ncols()) as f64;
    numerical_rank_with_tol(m, rel_tol)
}

pub fn numerical_rank_with_tol(m: &DMatrix<Complex64>, rel_tol: f64) -> Result<usize> {
    if m.iter().any(|e| !(e.re.is_finite() && e.im.is_finite())) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    if smax <= 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * smax).count())
}

/// Predicted rank of [V | H V]: min(d_v + min(d_v, n - F), n).
pub fn lemma1_predicted_rank(n: usize, d_v: usize, f: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::param("n", "must be >= 1"));
    }
    if d_v < 1 || d_v > n {
        return Err(Error::param("d_v", format!("must be in 1..={n}, got {d_v}")));
    }
    if f < 1 || f > n {
        return Err(Error::param("f", format!("must be in 1..={n}, got {f}")));
    }
    Ok((d_v + d_v.min(n - f)).min(n))
}

/// Diagonal with longest constant run exactly F: one run of length F first,
/// then filler runs, each shorter than F so the maximum stays F. For F = 1
/// the filler must also be length 1; every run tying at 1 still makes the
/// longest run 1. Values are i.i.d. CN(0,1) per run.
fn diag_with_longest_run(n: usize, f: usize, rng: &mut impl Rng) -> Vec<Complex64> {
    let chunk = if f >= 2 { f - 1 } else { 1 };
    let mut diag = Vec::with_capacity(n);
    let mut run = f;
    let mut rem = n - f;
    loop {
        let h = complex_gaussian(rng);
        diag.extend(std::iter::repeat(h).take(run));
        if rem == 0 {
            break;
        }
        run = chunk.min(rem);
        rem -= run;
    }
    diag
}

/// Samples `trials` independent (V, H) pairs with longest run of H exactly
/// `f` and returns the fraction where numerical_rank([V | H V]) equals the
/// prediction. Trial t draws from seed + t.
pub fn verify_lemma1(n: usize, d_v: usize, f: usize, trials: usize, seed: u64) -> Result<f64> {
    verify_lemma1_with_tol(n, d_v, f, trials, seed, None)
}

/// verify_lemma1 with an overridable relative rank tolerance; None keeps
/// the numerical_rank default. A tolerance of 0 counts roundoff directions
/// and is useful as a negative control.
pub fn verify_lemma1_with_tol(
    n: usize,
    d_v: usize,
    f: usize,
    trials: usize,
    seed: u64,
    rel_tol: Option<f64>,
) -> Result<f64> {
    let predicted = lemma1_predicted_rank(n, d_v, f)?;
    if trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    let mut agree = 0usize;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed + t as u64);
        let v = gaussian_matrix(n, d_v, &mut rng);
        let diag = diag_with_longest_run(n, f, &mut rng);
        let mut stacked = DMatrix::zeros(n, 2 * d_v);
        for i in 0..n {
            for j in 0..d_v {
                stacked[(i, j)] = v[(i, j)];
                stacked[(i, d_v + j)] = diag[i] * v[(i, j)];
            }
        }
        let rank = match rel_tol {
            Some(t) => numerical_rank_with_tol(&stacked, t)?,
            None => numerical_rank(&stacked)?,
        };
        if rank == predicted {
            agree += 1;
        }
    }
    Ok(agree as f64 / trials as f64)
}

/// Rank of the zero-forced desired signal D H V, thresholded against the
/// scale of H V before projection. Anchoring to the input keeps a fully
/// annihilated signal at rank 0 instead of counting roundoff directions.
pub fn zero_forced_signal_rank(
    zf: &ZeroForcer,
    chan: &DiagonalChannel,
    prec: &Precoder,
) -> Result<usize> {
    if zf.n() != prec.n() || chan.n() != prec.n() {
        return Err(Error::param(
            "dims",
            format!(
                "mismatched sizes: projector {}, channel {}, precoder {}",
                zf.n(),
                chan.n(),
                prec.n()
            ),
        ));
    }
    let through = chan.apply(prec.matrix());
    let scale = through.clone().svd(false, false).singular_values.max();
    let forced = zf.matrix() * through;
    if forced.iter().any(|e| !(e.re.is_finite() && e.im.is_finite())) {
        return Err(Error::Numerical("matrix has non-finite entries".into()));
    }
    let tol = 1e-10 * forced.nrows().max(forced.ncols()) as f64 * scale;
    let sv = forced.svd(false, false).singular_values;
    Ok(sv.iter().filter(|&&s| s > tol).count())
}

/// Decodable layer count for a realization: min(n/2, n - F) with F the
/// longest run of the direct channel.
pub fn free_interference_dims(n: usize, f_direct: usize) -> Result<usize> {
    if n < 2 || n % 2 != 0 {
        return Err(Error::param("n", format!("need even n >= 2, got {n}")));
    }
    if f_direct < 1 || f_direct > n {
        return Err(Error::param(
            "f_direct",
            format!("must be in 1..={n}, got {f_direct}"),
        ));
    }
    Ok((n / 2).min(n - f_direct))
}

/// Max |entry| of D H V x, the interference leaking past the zero-forcer.
/// Exactly zero in exact arithmetic when H is block-constant; the caller
/// compares against a tolerance scaled by the size of H V x.
pub fn check_interference_nulled(
    zf: &ZeroForcer,
    cross: &DiagonalChannel,
    prec: &Precoder,
    x: &[Complex64],
) -> Result<f64> {
    let n = prec.n();
    if zf.n() != n || cross.n() != n {
        return Err(Error::param(
            "dims",
            format!("zero-forcer {} / channel {} / precoder {}", zf.n(), cross.n(), n),
        ));
    }
    if x.len() != prec.layer_count() {
        return Err(Error::param(
            "x",
            format!("need {} symbols, got {}", prec.layer_count(), x.len()),
        ));
    }
    let xv = DVector::from_column_slice(x);
    let through = cross.apply_vec(&(prec.matrix() * xv));
    let residual = zf.matrix() * through;
    Ok(residual.iter().map(|e| e.norm()).fold(0.0, f64::max))
}
