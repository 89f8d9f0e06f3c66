//! Multi-chain convergence diagnostics: within/between-chain covariances,
//! the pooled posterior covariance, per-parameter PSRF and the multivariate
//! MPSRF.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::error::DiagnosticsError;
use crate::grid::fmt_real;
use crate::mcmc::ChainTrace;

/// Condition number of `W` above which the pseudo-inverse path is taken.
pub const MAX_CONDITION: f64 = 1e12;

/// Default spacing between checkpoints, in post-burn-in draws per chain.
pub const DEFAULT_CHECKPOINT_EVERY: usize = 250;

/// `k` chains of `l` draws of `n` parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMatrix {
    k: usize,
    l: usize,
    n: usize,
    // chain-major, then draw, then parameter
    data: Vec<f64>,
}

impl ChainMatrix {
    pub fn new(k: usize, l: usize, n: usize, data: Vec<f64>) -> Result<Self, DiagnosticsError> {
        if k < 2 || l < 2 || n == 0 {
            return Err(DiagnosticsError::Argument(format!(
                "need at least 2 chains of 2 draws of 1 parameter, got k={k}, l={l}, n={n}"
            )));
        }
        if data.len() != k * l * n {
            return Err(DiagnosticsError::Argument(format!(
                "{} values do not fill {k}x{l}x{n}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(DiagnosticsError::Argument(format!("non-finite sample at flat index {pos}")));
        }
        Ok(Self { k, l, n, data })
    }

    /// `chains[j][c]` is draw `c` of chain `j`.
    pub fn from_chains(chains: &[Vec<Vec<f64>>]) -> Result<Self, DiagnosticsError> {
        let k = chains.len();
        let l = chains.first().map_or(0, Vec::len);
        let n = chains.first().and_then(|c| c.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(k * l * n);
        for (j, chain) in chains.iter().enumerate() {
            if chain.len() != l {
                return Err(DiagnosticsError::Argument(format!(
                    "chain {j} has {} draws, chain 0 has {l}",
                    chain.len()
                )));
            }
            for draw in chain {
                if draw.len() != n {
                    return Err(DiagnosticsError::Argument(format!("chain {j} has a draw of length {}", draw.len())));
                }
                data.extend_from_slice(draw);
            }
        }
        Self::new(k, l, n, data)
    }

    /// Draws `burn_in .. burn_in + draws` of every trace.
    pub fn from_traces(traces: &[ChainTrace], burn_in: usize, draws: usize) -> Result<Self, DiagnosticsError> {
        let k = traces.len();
        let n = traces.first().map_or(0, ChainTrace::n);
        let mut data = Vec::with_capacity(k * draws * n);
        for (j, t) in traces.iter().enumerate() {
            if t.n() != n {
                return Err(DiagnosticsError::Argument(format!("trace {j} has {} parameters, trace 0 has {n}", t.n())));
            }
            if t.len() < burn_in + draws {
                return Err(DiagnosticsError::Argument(format!(
                    "trace {j} has {} iterations, need {}",
                    t.len(),
                    burn_in + draws
                )));
            }
            for it in burn_in..burn_in + draws {
                data.extend_from_slice(t.theta(it));
            }
        }
        Self::new(k, draws, n, data)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn draw(&self, chain: usize, c: usize) -> &[f64] {
        let start = (chain * self.l + c) * self.n;
        &self.data[start..start + self.n]
    }

    fn chain_means(&self) -> Vec<Vec<f64>> {
        (0..self.k)
            .map(|j| {
                let mut m = vec![0.0; self.n];
                for c in 0..self.l {
                    for (mi, &v) in m.iter_mut().zip(self.draw(j, c)) {
                        *mi += v;
                    }
                }
                m.iter_mut().for_each(|v| *v /= self.l as f64);
                m
            })
            .collect()
    }
}

fn add_outer(acc: &mut DMatrix<f64>, d: &[f64]) {
    for a in 0..d.len() {
        for b in 0..=a {
            acc[(a, b)] += d[a] * d[b];
        }
    }
}

fn symmetrize_lower(m: &mut DMatrix<f64>) {
    for a in 0..m.nrows() {
        for b in 0..a {
            m[(b, a)] = m[(a, b)];
        }
    }
}

/// `W = 1/(k(l-1)) sum_j sum_c (theta_jc - mean_j)(theta_jc - mean_j)^T`.
pub fn within_chain_cov(chains: &ChainMatrix) -> Result<DMatrix<f64>, DiagnosticsError> {
    let (k, l, n) = (chains.k, chains.l, chains.n);
    let means = chains.chain_means();
    let mut w = DMatrix::zeros(n, n);
    let mut d = vec![0.0; n];
    for (j, mean) in means.iter().enumerate() {
        let mut moved = false;
        for c in 0..l {
            for ((di, &v), &m) in d.iter_mut().zip(chains.draw(j, c)).zip(mean) {
                *di = v - m;
                moved |= *di != 0.0;
            }
            add_outer(&mut w, &d);
        }
        if !moved {
            return Err(DiagnosticsError::DegenerateChain { chain: j });
        }
    }
    symmetrize_lower(&mut w);
    Ok(w / (k * (l - 1)) as f64)
}

/// `B = l/(k-1) sum_j (mean_j - mean)(mean_j - mean)^T`.
pub fn between_chain_cov(chains: &ChainMatrix) -> DMatrix<f64> {
    let (k, l, n) = (chains.k, chains.l, chains.n);
    let means = chains.chain_means();
    let mut grand = vec![0.0; n];
    for m in &means {
        for (g, &v) in grand.iter_mut().zip(m) {
            *g += v / k as f64;
        }
    }
    let mut b = DMatrix::zeros(n, n);
    let mut d = vec![0.0; n];
    for m in &means {
        for ((di, &v), &g) in d.iter_mut().zip(m).zip(&grand) {
            *di = v - g;
        }
        add_outer(&mut b, &d);
    }
    symmetrize_lower(&mut b);
    b * (l as f64 / (k - 1) as f64)
}

/// `V = (l-1)/l W + (1 + 1/k) B / l`.
pub fn posterior_cov(w: &DMatrix<f64>, b: &DMatrix<f64>, k: usize, l: usize) -> Result<DMatrix<f64>, DiagnosticsError> {
    if w.shape() != b.shape() || w.nrows() != w.ncols() {
        return Err(DiagnosticsError::Argument(format!(
            "W is {:?} and B is {:?}",
            w.shape(),
            b.shape()
        )));
    }
    if k == 0 || l == 0 {
        return Err(DiagnosticsError::Argument("k and l must be positive".into()));
    }
    let (kf, lf) = (k as f64, l as f64);
    Ok(w * ((lf - 1.0) / lf) + b * ((1.0 + 1.0 / kf) / lf))
}

/// `PSRF_i = sqrt(V_ii / W_ii)`, with no degrees-of-freedom correction.
pub fn psrf(w: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<Vec<f64>, DiagnosticsError> {
    if w.shape() != v.shape() {
        return Err(DiagnosticsError::Argument(format!("W is {:?} and V is {:?}", w.shape(), v.shape())));
    }
    (0..w.nrows())
        .map(|i| {
            let wi = w[(i, i)];
            if !(wi > 0.0) {
                return Err(DiagnosticsError::DegenerateParameter { index: i });
            }
            Ok((v[(i, i)] / wi).sqrt())
        })
        .collect()
}

/// Outcome of [`mpsrf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mpsrf {
    pub value: f64,
    /// Largest eigenvalue of `W^-1 B / l`.
    pub lambda: f64,
    /// `W` was too ill-conditioned and its pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

/// `MPSRF = sqrt((l-1)/l + (k+1)/k lambda)`, `lambda` the largest eigenvalue
/// of `W^-1 B / l`, found from the symmetric problem `B x = mu W x`.
pub fn mpsrf(w: &DMatrix<f64>, b: &DMatrix<f64>, k: usize, l: usize) -> Result<Mpsrf, DiagnosticsError> {
    if w.shape() != b.shape() || w.nrows() != w.ncols() || w.nrows() == 0 {
        return Err(DiagnosticsError::Argument(format!("W is {:?} and B is {:?}", w.shape(), b.shape())));
    }
    if k == 0 || l == 0 {
        return Err(DiagnosticsError::Argument("k and l must be positive".into()));
    }
    let eig_w = SymmetricEigen::new(w.clone());
    let wmax = eig_w.eigenvalues.max();
    let wmin = eig_w.eigenvalues.min();
    if !(wmax > 0.0) {
        return Err(DiagnosticsError::Argument("W has no positive eigenvalue".into()));
    }
    let well_conditioned = wmin > 0.0 && wmax / wmin <= MAX_CONDITION;

    let chol = if well_conditioned { w.clone().cholesky() } else { None };
    let (mu, pseudo_inverse) = match chol {
        Some(ch) => {
            // L^-1 B L^-T
            let l_mat = ch.l();
            let x = l_mat.solve_lower_triangular(b).expect("cholesky factor is nonsingular");
            let c = l_mat
                .solve_lower_triangular(&x.transpose())
                .expect("cholesky factor is nonsingular");
            let c = (&c + c.transpose()) * 0.5;
            (SymmetricEigen::new(c).eigenvalues.max(), false)
        }
        None => {
            log::warn!("within-chain covariance is ill-conditioned (eigenvalues {wmin:e}..{wmax:e}); using its pseudo-inverse");
            let cutoff = wmax * 1e-12;
            let u = &eig_w.eigenvectors;
            let inv_sqrt = eig_w.eigenvalues.map(|d| if d > cutoff { 1.0 / d.sqrt() } else { 0.0 });
            let s = u * DMatrix::from_diagonal(&inv_sqrt) * u.transpose();
            let c = &s * b * &s;
            let c = (&c + c.transpose()) * 0.5;
            (SymmetricEigen::new(c).eigenvalues.max(), true)
        }
    };
    let (kf, lf) = (k as f64, l as f64);
    let lambda = mu.max(0.0) / lf;
    Ok(Mpsrf {
        value: ((lf - 1.0) / lf + (kf + 1.0) / kf * lambda).sqrt(),
        lambda,
        pseudo_inverse,
    })
}

/// Everything computed from one chain matrix.
#[derive(Debug, Clone)]
pub struct Summary {
    pub w: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub psrf: Vec<f64>,
    pub mpsrf: Mpsrf,
}

impl Summary {
    pub fn max_psrf(&self) -> f64 {
        self.psrf.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn summarize(chains: &ChainMatrix) -> Result<Summary, DiagnosticsError> {
    let w = within_chain_cov(chains)?;
    let b = between_chain_cov(chains);
    let v = posterior_cov(&w, &b, chains.k, chains.l)?;
    let psrf = psrf(&w, &v)?;
    let mpsrf = mpsrf(&w, &b, chains.k, chains.l)?;
    Ok(Summary { w, b, v, psrf, mpsrf })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Post-burn-in draws per chain.
    pub draws: usize,
    pub max_psrf: f64,
    pub mpsrf: f64,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsReport {
    pub series: Vec<Checkpoint>,
    /// Summary over every post-burn-in draw, when it could be computed.
    pub last: Option<Summary>,
    /// Skipped checkpoints and numerical fallbacks.
    pub notices: Vec<String>,
}

/// `every, 2 every, ...` up to `total`, always ending at `total`.
pub fn checkpoints(every: usize, total: usize) -> Vec<usize> {
    let every = every.max(1);
    let mut out: Vec<usize> = (1..=total / every).map(|j| j * every).collect();
    if total > 0 && out.last() != Some(&total) {
        out.push(total);
    }
    out
}

/// Evaluates max PSRF and MPSRF on the first `c` post-burn-in draws of every
/// trace, for each checkpoint `c`.
pub fn diagnostics_series(
    traces: &[ChainTrace],
    burn_in: usize,
    checkpoints: &[usize],
) -> Result<DiagnosticsReport, DiagnosticsError> {
    if traces.len() < 2 {
        return Err(DiagnosticsError::Argument(format!(
            "diagnostics need at least 2 chains, got {}",
            traces.len()
        )));
    }
    let len = traces[0].len();
    if let Some(j) = traces.iter().position(|t| t.len() != len) {
        return Err(DiagnosticsError::Argument(format!(
            "trace {j} has {} iterations, trace 0 has {len}",
            traces[j].len()
        )));
    }
    if burn_in >= len {
        return Err(DiagnosticsError::Argument(format!("burn-in {burn_in} leaves no draws out of {len}")));
    }
    let available = len - burn_in;

    let results: Vec<(usize, Result<Summary, DiagnosticsError>)> = checkpoints
        .par_iter()
        .map(|&c| {
            let r = if c < 2 {
                Err(DiagnosticsError::Argument(format!("checkpoint {c} has fewer than 2 draws")))
            } else if c > available {
                Err(DiagnosticsError::Argument(format!("checkpoint {c} exceeds the {available} available draws")))
            } else {
                ChainMatrix::from_traces(traces, burn_in, c).and_then(|m| summarize(&m))
            };
            (c, r)
        })
        .collect();

    let mut series = Vec::new();
    let mut notices = Vec::new();
    for (c, r) in results {
        match r {
            Ok(s) => {
                if s.mpsrf.pseudo_inverse {
                    notices.push(format!("checkpoint {c}: W ill-conditioned, pseudo-inverse used"));
                }
                series.push(Checkpoint {
                    draws: c,
                    max_psrf: s.max_psrf(),
                    mpsrf: s.mpsrf.value,
                });
            }
            Err(e) => notices.push(format!("checkpoint {c} skipped: {e}")),
        }
    }
    for n in &notices {
        log::info!("{n}");
    }
    let last = ChainMatrix::from_traces(traces, burn_in, available)
        .and_then(|m| summarize(&m))
        .ok();
    Ok(DiagnosticsReport { series, last, notices })
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> DiagnosticsError + '_ {
    move |source| DiagnosticsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `checkpoint,max_psrf,mpsrf`.
pub fn write_series_csv(series: &[Checkpoint], path: impl AsRef<Path>) -> Result<(), DiagnosticsError> {
    let path = path.as_ref();
    let io = io_err(path);
    let mut out = BufWriter::new(fs::File::create(path).map_err(&io)?);
    writeln!(out, "checkpoint,max_psrf,mpsrf").map_err(&io)?;
    for p in series {
        writeln!(out, "{},{},{}", p.draws, fmt_real(p.max_psrf), fmt_real(p.mpsrf)).map_err(&io)?;
    }
    out.flush().map_err(&io)
}

pub fn read_series_csv(path: impl AsRef<Path>) -> Result<Vec<Checkpoint>, DiagnosticsError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, msg: &str| DiagnosticsError::Argument(format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "checkpoint,max_psrf,mpsrf" => {}
        _ => return Err(bad(1, "expected header `checkpoint,max_psrf,mpsrf`")),
    }
    let mut out = Vec::new();
    for (k, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split(',').collect();
        if toks.len() != 3 {
            return Err(bad(k + 1, "expected 3 columns"));
        }
        let draws = toks[0].parse().map_err(|_| bad(k + 1, "bad checkpoint"))?;
        let max_psrf = toks[1].parse().map_err(|_| bad(k + 1, "bad max_psrf"))?;
        let mpsrf = toks[2].parse().map_err(|_| bad(k + 1, "bad mpsrf"))?;
        out.push(Checkpoint { draws, max_psrf, mpsrf });
    }
    Ok(out)
}

/// Whitespace-separated columns for gnuplot, one block per labelled series.
pub fn write_gnuplot_data(series: &[(&str, &[Checkpoint])], path: impl AsRef<Path>) -> Result<(), DiagnosticsError> {
    let path = path.as_ref();
    let io = io_err(path);
    let mut out = BufWriter::new(fs::File::create(path).map_err(&io)?);
    for (block, (label, points)) in series.iter().enumerate() {
        if block > 0 {
            writeln!(out, "\n").map_err(&io)?;
        }
        writeln!(out, "# {label}").map_err(&io)?;
        writeln!(out, "# draws_per_chain max_psrf mpsrf").map_err(&io)?;
        for p in points.iter() {
            writeln!(out, "{} {} {}", p.draws, fmt_real(p.max_psrf), fmt_real(p.mpsrf)).map_err(&io)?;
        }
    }
    out.flush().map_err(&io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn scalar_chains(chains: &[&[f64]]) -> ChainMatrix {
        let v: Vec<Vec<Vec<f64>>> = chains.iter().map(|c| c.iter().map(|&x| vec![x]).collect()).collect();
        ChainMatrix::from_chains(&v).unwrap()
    }

    fn gaussian_chains(rng: &mut ChaCha8Rng, k: usize, l: usize, n: usize, offsets: &[f64]) -> ChainMatrix {
        let mut data = Vec::with_capacity(k * l * n);
        for j in 0..k {
            for _ in 0..l {
                for _ in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    data.push(z + offsets[j]);
                }
            }
        }
        ChainMatrix::new(k, l, n, data).unwrap()
    }

    #[test]
    fn within_examples() {
        let m = scalar_chains(&[&[0.0, 2.0], &[0.0, 2.0]]);
        assert_relative_eq!(within_chain_cov(&m).unwrap()[(0, 0)], 2.0, epsilon = 1e-15);
        let constant = scalar_chains(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(within_chain_cov(&constant), Err(DiagnosticsError::DegenerateChain { chain: 0 })));
    }

    #[test]
    fn within_is_mean_of_chain_covariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = gaussian_chains(&mut rng, 3, 7, 2, &[0.0, 1.0, -1.0]);
        let w = within_chain_cov(&m).unwrap();
        let mut avg = DMatrix::<f64>::zeros(2, 2);
        for j in 0..3 {
            let x = DMatrix::from_fn(7, 2, |c, i| m.draw(j, c)[i]);
            let mean = x.row_mean();
            let centered = DMatrix::from_fn(7, 2, |c, i| x[(c, i)] - mean[i]);
            avg += centered.transpose() * &centered / 6.0;
        }
        avg /= 3.0;
        assert!((w - avg).abs().max() < 1e-13);
    }

    #[test]
    fn between_examples() {
        let m = scalar_chains(&[&[0.0, 0.0, 0.0, 0.0], &[1.0, 1.0, 1.0, 1.0]]);
        assert_relative_eq!(between_chain_cov(&m)[(0, 0)], 2.0, epsilon = 1e-15);
        let same = scalar_chains(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(between_chain_cov(&same)[(0, 0)], 0.0);
    }

    #[test]
    fn between_rank_at_most_k_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = gaussian_chains(&mut rng, 3, 5, 6, &[0.0, 0.5, 1.0]);
        let eig = SymmetricEigen::new(between_chain_cov(&m)).eigenvalues;
        let top = eig.max();
        assert!(eig.iter().filter(|&&e| e.abs() > 1e-10 * top).count() <= 2);
    }

    #[test]
    fn posterior_examples() {
        let w = DMatrix::<f64>::identity(3, 3);
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(posterior_cov(&w, &z, 4, 10).unwrap(), &w * 0.9);
        let l = 50;
        let b = DMatrix::<f64>::identity(3, 3) * l as f64;
        let v = posterior_cov(&w, &b, 4, l).unwrap();
        assert!((v - &w * (49.0 / 50.0 + 1.25)).abs().max() < 1e-14);
        assert!(posterior_cov(&w, &DMatrix::zeros(2, 2), 4, 10).is_err());
    }

    #[test]
    fn posterior_large_l_limit() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let b_over_l = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.2]);
        let limit = &w + &b_over_l * 1.25;
        let mut prev = f64::INFINITY;
        for l in [100usize, 10_000, 1_000_000] {
            let v = posterior_cov(&w, &(&b_over_l * l as f64), 4, l).unwrap();
            let gap = (v - &limit).abs().max();
            assert!(gap < prev);
            assert_relative_eq!(gap, w.abs().max() / l as f64, max_relative = 1e-9);
            prev = gap;
        }
    }

    #[test]
    fn psrf_examples() {
        let w = DMatrix::<f64>::identity(2, 2) * 3.0;
        let v = posterior_cov(&w, &DMatrix::zeros(2, 2), 4, 100).unwrap();
        for p in psrf(&w, &v).unwrap() {
            assert_relative_eq!(p, 0.99f64.sqrt(), epsilon = 1e-15);
            assert_relative_eq!(p, 0.99499, epsilon = 1e-5);
        }
        let mut w0 = w.clone();
        w0[(1, 1)] = 0.0;
        assert!(matches!(psrf(&w0, &v), Err(DiagnosticsError::DegenerateParameter { index: 1 })));
    }

    #[test]
    fn mpsrf_examples() {
        let w = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = mpsrf(&w, &DMatrix::zeros(2, 2), 4, 100).unwrap();
        assert_relative_eq!(r.value, 0.99f64.sqrt(), epsilon = 1e-15);
        assert!(!r.pseudo_inverse);
        let (wv, bv, k, l) = (1.7, 0.9, 3usize, 20usize);
        let r = mpsrf(&DMatrix::from_element(1, 1, wv), &DMatrix::from_element(1, 1, bv), k, l).unwrap();
        let expected = ((l as f64 - 1.0) / l as f64 + (k as f64 + 1.0) / k as f64 * bv / (l as f64 * wv)).sqrt();
        assert_relative_eq!(r.value, expected, epsilon = 1e-15);
    }

    #[test]
    fn mpsrf_falls_back_on_singular_w() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]);
        let r = mpsrf(&w, &b, 2, 10).unwrap();
        assert!(r.pseudo_inverse);
        // along (1,1): x'Bx / x'Wx = 2
        assert_relative_eq!(r.lambda, 0.2, epsilon = 1e-12);
    }

    /// Hand evaluation for k=2, l=3, n=2.
    #[test]
    fn hand_oracle_k2_l3_n2() {
        let chains = vec![
            vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 0.0]],
            vec![vec![4.0, 1.0], vec![2.0, 3.0], vec![3.0, 5.0]],
        ];
        let m = ChainMatrix::from_chains(&chains).unwrap();
        // chain means (2, 1) and (3, 3); grand mean (2.5, 2).
        // chain 1 deviations: (-1,1), (1,0), (0,-1) -> S1 = [[2,-1],[-1,2]]
        // chain 2 deviations: (1,-2), (-1,0), (0,2) -> S2 = [[2,-2],[-2,8]]
        // W = (S1 + S2) / (k (l-1)) = [[4,-3],[-3,10]] / 4
        let w_hand = [1.0, -0.75, -0.75, 2.5];
        // mean deviations (-0.5,-1), (0.5,1): sum of outers [[0.5,1],[1,2]]; B = 3 * that
        let b_hand = [1.5, 3.0, 3.0, 6.0];
        // V = 2/3 W + (3/2) B / 3 = 2/3 W + B / 2
        let v_hand: Vec<f64> = w_hand.iter().zip(&b_hand).map(|(w, b)| 2.0 / 3.0 * w + b / 2.0).collect();
        let psrf_hand = [(v_hand[0] / w_hand[0]).sqrt(), (v_hand[3] / w_hand[3]).sqrt()];
        // largest root of det(B - mu W) = 0:
        // det(W) mu^2 - (w11 b22 + w22 b11 - 2 w12 b12) mu + det(B) = 0, det(B) = 0
        let det_w = w_hand[0] * w_hand[3] - w_hand[1] * w_hand[2];
        let tr = w_hand[0] * b_hand[3] + w_hand[3] * b_hand[0] - 2.0 * w_hand[1] * b_hand[1];
        let mu = tr / det_w;
        let mpsrf_hand = (2.0 / 3.0 + 1.5 * mu / 3.0).sqrt();

        let s = summarize(&m).unwrap();
        for (idx, (&wv, (&bv, &vv))) in w_hand.iter().zip(b_hand.iter().zip(&v_hand)).enumerate() {
            let (a, b) = (idx / 2, idx % 2);
            assert!((s.w[(a, b)] - wv).abs() <= 1e-12);
            assert!((s.b[(a, b)] - bv).abs() <= 1e-12);
            assert!((s.v[(a, b)] - vv).abs() <= 1e-12);
        }
        for (p, h) in s.psrf.iter().zip(psrf_hand) {
            assert!((p - h).abs() <= 1e-12);
        }
        assert!((s.mpsrf.value - mpsrf_hand).abs() <= 1e-12, "{} vs {mpsrf_hand}", s.mpsrf.value);
    }

    #[test]
    fn mpsrf_bounds_max_psrf_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let k = rng.random_range(2..6);
            let l = rng.random_range(3..40);
            let n = rng.random_range(1..8);
            let offsets: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = gaussian_chains(&mut rng, k, l, n, &offsets);
            let s = summarize(&m).unwrap();
            assert!(s.mpsrf.value >= s.max_psrf() - 1e-8, "{} < {}", s.mpsrf.value, s.max_psrf());
        }
    }

    #[test]
    fn same_distribution_converges() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = gaussian_chains(&mut rng, 4, 10_000, 20, &[0.0; 4]);
        let s = summarize(&m).unwrap();
        assert!(s.mpsrf.value <= 1.05, "{}", s.mpsrf.value);
    }

    #[test]
    fn offset_chains_do_not_converge() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = gaussian_chains(&mut rng, 4, 10_000, 20, &[0.0, 3.0, 0.0, 3.0]);
        let s = summarize(&m).unwrap();
        assert!(s.mpsrf.value > 1.2, "{}", s.mpsrf.value);
    }

    fn trace_from(draws: &[Vec<f64>]) -> ChainTrace {
        let mut t = ChainTrace::with_capacity(draws[0].len(), draws.len());
        for d in draws {
            t.push(d, true, true, 0.0);
        }
        t
    }

    #[test]
    fn series_on_identical_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)]).collect();
        let t = trace_from(&draws);
        let report = diagnostics_series(&[t.clone(), t], 10, &[1, 10, 30, 31]).unwrap();
        assert_eq!(report.series.len(), 2);
        assert_eq!(report.notices.len(), 2);
        for p in &report.series {
            let l = p.draws as f64;
            assert_relative_eq!(p.max_psrf, ((l - 1.0) / l).sqrt(), epsilon = 1e-12);
            assert_relative_eq!(p.mpsrf, ((l - 1.0) / l).sqrt(), epsilon = 1e-12);
        }
        assert!(report.last.is_some());
    }

    #[test]
    fn series_requires_two_chains() {
        let t = trace_from(&[vec![0.0], vec![1.0], vec![2.0]]);
        assert!(diagnostics_series(&[t], 0, &[2]).is_err());
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(250, 1000), vec![250, 500, 750, 1000]);
        assert_eq!(checkpoints(250, 600), vec![250, 500, 600]);
        assert!(checkpoints(250, 0).is_empty());
    }

    #[test]
    fn series_csv_round_trip() {
        let series = vec![
            Checkpoint { draws: 250, max_psrf: 1.0 / 3.0, mpsrf: 1.5 },
            Checkpoint { draws: 500, max_psrf: 1.1, mpsrf: std::f64::consts::PI },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        write_series_csv(&series, &p).unwrap();
        assert_eq!(read_series_csv(&p).unwrap(), series);
        let g = dir.path().join("d.dat");
        write_gnuplot_data(&[("conditioned", &series), ("unconditioned", &series)], &g).unwrap();
        let text = fs::read_to_string(&g).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("250 ")).count(), 2);
    }
}
