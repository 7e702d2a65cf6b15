//! Flexible right-preconditioned GMRES.
//!
//! The preconditioned directions are stored, so the preconditioner may change
//! from one iteration to the next (e.g. when it contains inner iterations).
//! With a fixed linear preconditioner this is plain right-preconditioned GMRES.

use crate::dense::{axpy, dot, norm2, ZERO};
use crate::error::{Error, Result};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions {
    pub tol: f64,
    pub maxit: usize,
    /// Restart length; `None` runs without restarts.
    pub restart: Option<usize>,
}

impl GmresOptions {
    pub fn new(tol: f64, maxit: usize) -> Self {
        GmresOptions { tol, maxit, restart: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresStats {
    pub iterations: usize,
    /// Relative residual `||b - A x_k|| / ||b||` after each iteration, starting at 1.
    pub residuals: Vec<f64>,
    pub converged: bool,
    /// Residual recomputed from the returned iterate.
    pub true_residual: f64,
}

/// Observer called after every iteration with the iteration count and the current iterate.
pub type Monitor<'a> = &'a mut dyn FnMut(usize, &[C64]);

/// Right-preconditioned GMRES without restarts.
pub fn gmres<A, P>(apply_a: A, apply_p: P, b: &[C64], tol: f64, maxit: usize) -> Result<(Vec<C64>, GmresStats)>
where
    A: FnMut(&[C64]) -> Result<Vec<C64>>,
    P: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    fgmres(apply_a, apply_p, b, &GmresOptions::new(tol, maxit), None)
}

/// Flexible GMRES with optional restarts and an iteration monitor.
pub fn fgmres<A, P>(
    mut apply_a: A,
    mut apply_p: P,
    b: &[C64],
    opts: &GmresOptions,
    mut monitor: Option<Monitor>,
) -> Result<(Vec<C64>, GmresStats)>
where
    A: FnMut(&[C64]) -> Result<Vec<C64>>,
    P: FnMut(&[C64]) -> Result<Vec<C64>>,
{
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(Error::InvalidParameter(format!("GMRES tolerance {} outside (0, 1)", opts.tol)));
    }
    if opts.maxit == 0 {
        return Err(Error::InvalidParameter("GMRES needs maxit ≥ 1".into()));
    }
    if opts.restart == Some(0) {
        return Err(Error::InvalidParameter("GMRES restart length must be ≥ 1".into()));
    }
    let n = b.len();
    let bnorm = norm2(b);
    let mut x = vec![ZERO; n];
    if bnorm == 0.0 {
        let stats = GmresStats { iterations: 0, residuals: vec![0.0], converged: true, true_residual: 0.0 };
        return Ok((x, stats));
    }

    let mut total = 0usize;
    let mut residuals = vec![1.0];
    let mut first = true;
    let (converged, true_residual) = loop {
        let r = if first {
            b.to_vec()
        } else {
            let ax = checked(apply_a(&x)?, n)?;
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        first = false;
        let beta = norm2(&r);
        let rel = beta / bnorm;
        if !rel.is_finite() {
            return Err(Error::Breakdown(total));
        }
        if rel <= opts.tol {
            break (true, rel);
        }
        if total >= opts.maxit {
            break (false, rel);
        }
        let m = opts.restart.unwrap_or(opts.maxit).min(opts.maxit - total);

        let mut v: Vec<Vec<C64>> = vec![r.iter().map(|z| z / beta).collect()];
        let mut z: Vec<Vec<C64>> = Vec::with_capacity(m);
        let mut h: Vec<Vec<C64>> = Vec::with_capacity(m); // columns, length j + 2
        let mut cs: Vec<C64> = Vec::with_capacity(m);
        let mut sn: Vec<C64> = Vec::with_capacity(m);
        let mut g = vec![C64::new(beta, 0.0)];

        for j in 0..m {
            let zj = checked(apply_p(&v[j])?, n)?;
            let mut w = checked(apply_a(&zj)?, n)?;
            z.push(zj);
            let mut col = vec![ZERO; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(vi, &w);
                axpy(-hij, vi, &mut w);
                col[i] = hij;
            }
            let wn = norm2(&w);
            let proj: Vec<C64> = v.iter().map(|vi| dot(vi, &w)).collect();
            if proj.iter().any(|c| c.norm() > 1e-8 * wn) {
                for (i, vi) in v.iter().enumerate() {
                    axpy(-proj[i], vi, &mut w);
                    col[i] += proj[i];
                }
            }
            let hn = norm2(&w);
            if !hn.is_finite() || col.iter().any(|c| !c.is_finite()) {
                return Err(Error::Breakdown(total + 1));
            }
            col[j + 1] = C64::new(hn, 0.0);

            for i in 0..j {
                let (a, bb) = (col[i], col[i + 1]);
                col[i] = cs[i].conj() * a + sn[i].conj() * bb;
                col[i + 1] = -sn[i] * a + cs[i] * bb;
            }
            let (a, bb) = (col[j], col[j + 1]);
            let d = (a.norm_sqr() + bb.norm_sqr()).sqrt();
            let (c, s) = if d == 0.0 { (C64::new(1.0, 0.0), ZERO) } else { (a / d, bb / d) };
            col[j] = C64::new(d, 0.0);
            col[j + 1] = ZERO;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = c.conj() * gj;
            g.push(-s * gj);
            h.push(col);
            total += 1;

            let res = g[j + 1].norm() / bnorm;
            if !res.is_finite() {
                return Err(Error::Breakdown(total));
            }
            residuals.push(res);
            if let Some(mon) = monitor.as_deref_mut() {
                let mut xc = x.clone();
                update(&mut xc, &h, &g, &z, j + 1);
                mon(total, &xc);
            }
            let happy = hn <= 1e-14 * d.max(f64::MIN_POSITIVE);
            if res <= opts.tol || happy || total >= opts.maxit {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        let k = h.len();
        update(&mut x, &h, &g, &z, k);
    };
    let stats = GmresStats { iterations: total, residuals, converged, true_residual };
    Ok((x, stats))
}

fn checked(v: Vec<C64>, n: usize) -> Result<Vec<C64>> {
    crate::error::check_len(n, v.len())?;
    Ok(v)
}

/// `x += Z y` where `y` solves the leading `k × k` triangular least-squares system.
fn update(x: &mut [C64], h: &[Vec<C64>], g: &[C64], z: &[Vec<C64>], k: usize) {
    let mut y = vec![ZERO; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for (jj, yj) in y.iter().enumerate().take(k).skip(i + 1) {
            s -= h[jj][i] * yj;
        }
        y[i] = if h[i][i] == ZERO { ZERO } else { s / h[i][i] };
    }
    for (yi, zi) in y.iter().zip(z) {
        axpy(*yi, zi, x);
    }
}
