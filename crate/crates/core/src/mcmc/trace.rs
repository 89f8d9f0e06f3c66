//! Per-iteration chain records and their CSV form:
//! `iteration,theta_1,...,theta_n,coarse_accept,fine_accept,loglik`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::McmcError;
use crate::grid::{fmt_real, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    n: usize,
    thetas: Vec<f64>,
    coarse_accept: Vec<bool>,
    fine_accept: Vec<bool>,
    loglik: Vec<f64>,
    /// Accepted fields at requested iterations.
    pub snapshots: Vec<(usize, ScalarField)>,
}

impl ChainTrace {
    pub fn with_capacity(n: usize, iterations: usize) -> Self {
        Self {
            n,
            thetas: Vec::with_capacity(n * iterations),
            coarse_accept: Vec::with_capacity(iterations),
            fine_accept: Vec::with_capacity(iterations),
            loglik: Vec::with_capacity(iterations),
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, theta: &[f64], coarse: bool, fine: bool, loglik: f64) {
        debug_assert_eq!(theta.len(), self.n);
        self.thetas.extend_from_slice(theta);
        self.coarse_accept.push(coarse);
        self.fine_accept.push(fine);
        self.loglik.push(loglik);
    }

    /// Number of parameters per state.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of recorded iterations.
    pub fn len(&self) -> usize {
        self.loglik.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loglik.is_empty()
    }

    /// State after iteration `it` (0-based).
    pub fn theta(&self, it: usize) -> &[f64] {
        &self.thetas[it * self.n..(it + 1) * self.n]
    }

    pub fn coarse_accepted(&self) -> &[bool] {
        &self.coarse_accept
    }

    pub fn fine_accepted(&self) -> &[bool] {
        &self.fine_accept
    }

    pub fn logliks(&self) -> &[f64] {
        &self.loglik
    }

    pub fn coarse_accepts(&self) -> usize {
        self.coarse_accept.iter().filter(|&&a| a).count()
    }

    pub fn fine_accepts(&self) -> usize {
        self.fine_accept.iter().filter(|&&a| a).count()
    }

    /// Fine accepts over iterations.
    pub fn overall_rate(&self) -> f64 {
        self.fine_accepts() as f64 / self.len().max(1) as f64
    }

    /// Coarse accepts over iterations.
    pub fn coarse_rate(&self) -> f64 {
        self.coarse_accepts() as f64 / self.len().max(1) as f64
    }

    /// Fine accepts over proposals that reached the fine stage.
    pub fn fine_stage_rate(&self) -> f64 {
        self.fine_accepts() as f64 / self.coarse_accepts().max(1) as f64
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), McmcError> {
        let path = path.as_ref();
        let io = |source| McmcError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
        let mut header = vec!["iteration".to_string()];
        header.extend((1..=self.n).map(|k| format!("theta_{k}")));
        header.extend(["coarse_accept", "fine_accept", "loglik"].map(String::from));
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        for it in 0..self.len() {
            let mut row = vec![(it + 1).to_string()];
            row.extend(self.theta(it).iter().map(|&v| fmt_real(v)));
            row.push(u8::from(self.coarse_accept[it]).to_string());
            row.push(u8::from(self.fine_accept[it]).to_string());
            row.push(fmt_real(self.loglik[it]));
            writeln!(out, "{}", row.join(",")).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, McmcError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| McmcError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let err = |line: usize, msg: String| McmcError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty trace file".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let n = cols.len().checked_sub(4).ok_or_else(|| err(1, "header too short".into()))?;
        let expected_tail = ["coarse_accept", "fine_accept", "loglik"];
        if cols[0] != "iteration"
            || cols[n + 1..] != expected_tail
            || (1..=n).any(|k| cols[k] != format!("theta_{k}"))
        {
            return Err(err(1, format!("unexpected header `{header}`")));
        }
        let mut trace = ChainTrace::with_capacity(n, 0);
        for (lineno, line) in lines {
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split(',').collect();
            if toks.len() != n + 4 {
                return Err(err(lineno, format!("expected {} columns, got {}", n + 4, toks.len())));
            }
            let num = |t: &str| t.trim().parse::<f64>().map_err(|_| err(lineno, format!("non-numeric token `{t}`")));
            let flag = |t: &str| match t.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(err(lineno, format!("expected 0/1 flag, got `{other}`"))),
            };
            let theta = toks[1..=n].iter().map(|t| num(t)).collect::<Result<Vec<_>, _>>()?;
            trace.push(&theta, flag(toks[n + 1])?, flag(toks[n + 2])?, num(toks[n + 3])?);
        }
        Ok(trace)
    }
}
