//! Interface traces and the polarized sweeping machinery, shared by the
//! layer level and the cell level.
//!
//! Subdomains `0..n` are stacked along one axis; interface `k` separates
//! subdomain `k` from `k + 1`. A trace at interface `k` holds two lines of
//! values: the last line of subdomain `k` followed by the first line of
//! subdomain `k + 1`. Subdomain `ℓ` sees interface `ℓ - 1` as its *lead*
//! boundary and interface `ℓ` as its *trail* boundary.
//!
//! The only problem-specific ingredient is [`SubdomainGreens::apply`], the
//! discrete Green's representation of one subdomain: given two-line data on its
//! boundaries it returns the represented field on the two lines of each
//! boundary. With `x` the exact traces this reproduces the solution on the
//! subdomain's own lines and zero on the lines outside it.

use crate::error::{check_len, Result};
use crate::sparse::gmres::{fgmres, GmresOptions, GmresStats, Monitor};
use crate::C64;

/// Boundary data for one application: `(lead, trail)`, `None` meaning zero.
pub type Input<'a> = (Option<&'a [C64]>, Option<&'a [C64]>);

/// Samples on the lead and trail interfaces of a subdomain; empty when the
/// subdomain has no such interface.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub lead: Vec<C64>,
    pub trail: Vec<C64>,
}

/// Green's representation of a stack of subdomains.
pub trait SubdomainGreens: Sync {
    fn num_subdomains(&self) -> usize;

    /// Length of one two-line trace.
    fn trace_len(&self) -> usize;

    fn apply(&self, l: usize, lead: Option<&[C64]>, trail: Option<&[C64]>) -> Result<Samples>;

    /// Several applications on the same subdomain; implementations may batch them.
    fn apply_batch(&self, l: usize, inputs: &[Input]) -> Result<Vec<Samples>> {
        inputs.iter().map(|(a, b)| self.apply(l, *a, *b)).collect()
    }

    fn num_interfaces(&self) -> usize {
        self.num_subdomains().saturating_sub(1)
    }
}

/// Two-line traces at every interface.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSet {
    width: usize,
    traces: Vec<Vec<C64>>,
}

impl TraceSet {
    pub fn zeros(interfaces: usize, width: usize) -> TraceSet {
        TraceSet { width, traces: vec![vec![C64::new(0.0, 0.0); 2 * width]; interfaces] }
    }

    pub fn from_traces(width: usize, traces: Vec<Vec<C64>>) -> Result<TraceSet> {
        for t in &traces {
            check_len(2 * width, t.len())?;
        }
        Ok(TraceSet { width, traces })
    }

    pub fn num_interfaces(&self) -> usize {
        self.traces.len()
    }

    /// Points per line.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn trace(&self, k: usize) -> &[C64] {
        &self.traces[k]
    }

    pub fn trace_mut(&mut self, k: usize) -> &mut Vec<C64> {
        &mut self.traces[k]
    }

    /// Line on the lower-index side of interface `k` (the row above, for layers).
    pub fn above(&self, k: usize) -> &[C64] {
        &self.traces[k][..self.width]
    }

    /// Line on the higher-index side of interface `k`.
    pub fn below(&self, k: usize) -> &[C64] {
        &self.traces[k][self.width..]
    }

    pub fn flatten(&self) -> Vec<C64> {
        self.traces.concat()
    }

    pub fn from_flat(interfaces: usize, width: usize, v: &[C64]) -> Result<TraceSet> {
        check_len(interfaces * 2 * width, v.len())?;
        let traces = v.chunks(2 * width.max(1)).take(interfaces).map(|c| c.to_vec()).collect();
        Ok(TraceSet { width, traces })
    }

    pub fn norm(&self) -> f64 {
        self.traces.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn add(&self, other: &TraceSet) -> TraceSet {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &TraceSet) -> TraceSet {
        self.zip(other, |a, b| a - b)
    }

    pub fn scaled(&self, alpha: C64) -> TraceSet {
        TraceSet {
            width: self.width,
            traces: self.traces.iter().map(|t| t.iter().map(|z| z * alpha).collect()).collect(),
        }
    }

    fn zip(&self, other: &TraceSet, f: impl Fn(C64, C64) -> C64) -> TraceSet {
        assert_eq!(self.traces.len(), other.traces.len());
        TraceSet {
            width: self.width,
            traces: self
                .traces
                .iter()
                .zip(&other.traces)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect())
                .collect(),
        }
    }

    /// `||self - other|| / ||other||`.
    pub fn rel_diff(&self, other: &TraceSet) -> f64 {
        crate::dense::rel_diff(&self.flatten(), &other.flatten())
    }
}

/// Down-going and up-going traces.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizedTraceSet {
    pub down: TraceSet,
    pub up: TraceSet,
}

impl PolarizedTraceSet {
    pub fn zeros(interfaces: usize, width: usize) -> Self {
        PolarizedTraceSet { down: TraceSet::zeros(interfaces, width), up: TraceSet::zeros(interfaces, width) }
    }

    /// `u = u↓ + u↑`.
    pub fn recombine(&self) -> TraceSet {
        self.down.add(&self.up)
    }

    /// Down traces for interfaces `0..K`, then up traces for `K-1..=0`.
    pub fn flatten(&self) -> Vec<C64> {
        let mut v = self.down.flatten();
        for k in (0..self.up.num_interfaces()).rev() {
            v.extend_from_slice(self.up.trace(k));
        }
        v
    }

    pub fn from_flat(interfaces: usize, width: usize, v: &[C64]) -> Result<Self> {
        let half = interfaces * 2 * width;
        check_len(2 * half, v.len())?;
        let down = TraceSet::from_flat(interfaces, width, &v[..half])?;
        let mut up = TraceSet::zeros(interfaces, width);
        for (i, k) in (0..interfaces).rev().enumerate() {
            up.traces[k].copy_from_slice(&v[half + i * 2 * width..half + (i + 1) * 2 * width]);
        }
        Ok(PolarizedTraceSet { down, up })
    }

    pub fn norm(&self) -> f64 {
        (self.down.norm().powi(2) + self.up.norm().powi(2)).sqrt()
    }
}

fn sub_assign(a: &mut [C64], b: &[C64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x -= y;
    }
}

fn add_assign(a: &mut [C64], b: &[C64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn check_traces<G: SubdomainGreens + ?Sized>(g: &G, t: &TraceSet) -> Result<()> {
    check_len(g.num_interfaces(), t.num_interfaces())?;
    check_len(g.trace_len(), 2 * t.width())
}

fn lead_of(t: &TraceSet, l: usize) -> Option<&[C64]> {
    (l >= 1).then(|| t.trace(l - 1))
}

fn trail_of(t: &TraceSet, l: usize) -> Option<&[C64]> {
    (l < t.num_interfaces()).then(|| t.trace(l))
}

/// Unpolarized interface operator:
/// `(M x)_k = x_k - S_k(x_{k-1}, x_k)|trail - S_{k+1}(x_k, x_{k+1})|lead`.
pub fn apply_jump<G: SubdomainGreens + ?Sized>(g: &G, x: &TraceSet) -> Result<TraceSet> {
    check_traces(g, x)?;
    let n = g.num_subdomains();
    let r = crate::par::try_map(n, |l| g.apply(l, lead_of(x, l), trail_of(x, l)))?;
    let mut out = x.clone();
    for k in 0..x.num_interfaces() {
        sub_assign(&mut out.traces[k], &r[k].trail);
        sub_assign(&mut out.traces[k], &r[k + 1].lead);
    }
    Ok(out)
}

/// Observer of the polarized iterate, called after every outer iteration.
pub type TraceMonitor<'a> = &'a mut dyn FnMut(usize, &PolarizedTraceSet);

/// Polarized operator; the two output halves sum to [`apply_jump`] of `u↓ + u↑`.
///
/// ```text
/// down_k = u↓_k - S_k(u_{k-1}, u↑_k)|trail - S_{k+1}(u↑_k, 0)|lead
/// up_k   = u↑_k - S_{k+1}(u↓_k, u_{k+1})|lead - S_k(0, u↓_k)|trail
/// ```
pub fn apply_polarized<G: SubdomainGreens + ?Sized>(g: &G, p: &PolarizedTraceSet) -> Result<PolarizedTraceSet> {
    check_traces(g, &p.down)?;
    check_traces(g, &p.up)?;
    let x = p.recombine();
    let kk = x.num_interfaces();
    let n = g.num_subdomains();
    // Per subdomain: P = S(u↑_{ℓ-1}, 0), Q = S(0, u↓_ℓ), R = S(u_{ℓ-1}, u_ℓ).
    let res = crate::par::try_map(n, |l| {
        let has_lead = l >= 1;
        let has_trail = l < kk;
        let mut inputs: Vec<Input> = Vec::with_capacity(3);
        if has_lead {
            inputs.push((lead_of(&p.up, l), None));
        }
        if has_trail {
            inputs.push((None, trail_of(&p.down, l)));
        }
        inputs.push((lead_of(&x, l), trail_of(&x, l)));
        let mut out = g.apply_batch(l, &inputs)?.into_iter();
        let pp = if has_lead { out.next() } else { None };
        let qq = if has_trail { out.next() } else { None };
        let rr = out.next().expect("batch returns one sample per input");
        Ok((pp, qq, rr))
    })?;
    let mut down = p.down.clone();
    let mut up = p.up.clone();
    for k in 0..kk {
        let (_, q_k, r_k) = &res[k];
        let (p_next, _, r_next) = &res[k + 1];
        let q_k = q_k.as_ref().expect("interface has a trail side");
        let p_next = p_next.as_ref().expect("interface has a lead side");
        let d = &mut down.traces[k];
        sub_assign(d, &r_k.trail);
        add_assign(d, &q_k.trail);
        sub_assign(d, &p_next.lead);
        let u = &mut up.traces[k];
        sub_assign(u, &r_next.lead);
        add_assign(u, &p_next.lead);
        sub_assign(u, &q_k.trail);
    }
    Ok(PolarizedTraceSet { down, up })
}

/// Block Gauss–Seidel preconditioner: inverts the lower block triangle
/// `[[D↓, 0], [L, D↑]]` with one downward and one upward sweep.
pub fn gauss_seidel<G: SubdomainGreens + ?Sized>(g: &G, v: &PolarizedTraceSet) -> Result<PolarizedTraceSet> {
    check_traces(g, &v.down)?;
    check_traces(g, &v.up)?;
    let kk = v.down.num_interfaces();
    let n = g.num_subdomains();

    // y↓ = (D↓)⁻¹ v↓
    let mut yd = v.down.clone();
    for k in 1..kk {
        let s = g.apply(k, Some(yd.trace(k - 1)), None)?;
        add_assign(&mut yd.traces[k], &s.trail);
    }

    // w = v↑ - L y↓
    let r = crate::par::try_map(n, |l| g.apply(l, lead_of(&yd, l), trail_of(&yd, l)))?;
    let mut w = v.up.clone();
    for k in 0..kk {
        add_assign(&mut w.traces[k], &r[k + 1].lead);
        add_assign(&mut w.traces[k], &r[k].trail);
        if k >= 1 {
            // S_k(0, y↓_k) = S_k(y↓_{k-1}, y↓_k) - S_k(y↓_{k-1}, 0), the latter known from the sweep.
            sub_assign(&mut w.traces[k], &yd.traces[k]);
            add_assign(&mut w.traces[k], &v.down.traces[k]);
        }
    }

    // y↑ = (D↑)⁻¹ w
    let mut yu = w;
    for k in (0..kk.saturating_sub(1)).rev() {
        let s = g.apply(k + 1, None, Some(yu.trace(k + 1)))?;
        add_assign(&mut yu.traces[k], &s.lead);
    }
    Ok(PolarizedTraceSet { down: yd, up: yu })
}

/// GMRES on the polarized system, preconditioned by [`gauss_seidel`].
pub fn solve_polarized<G: SubdomainGreens + ?Sized>(
    g: &G,
    rhs: &PolarizedTraceSet,
    opts: &GmresOptions,
    monitor: Option<TraceMonitor>,
) -> Result<(PolarizedTraceSet, GmresStats)> {
    let kk = rhs.down.num_interfaces();
    let width = rhs.down.width();
    let unflat = |v: &[C64]| PolarizedTraceSet::from_flat(kk, width, v);
    let apply_a = |v: &[C64]| Ok(apply_polarized(g, &unflat(v)?)?.flatten());
    let apply_p = |v: &[C64]| Ok(gauss_seidel(g, &unflat(v)?)?.flatten());
    let mut wrapped;
    let mon: Option<Monitor> = match monitor {
        Some(m) => {
            wrapped = move |it: usize, x: &[C64]| {
                if let Ok(p) = PolarizedTraceSet::from_flat(kk, width, x) {
                    m(it, &p)
                }
            };
            Some(&mut wrapped)
        }
        None => None,
    };
    let (x, stats) = fgmres(apply_a, apply_p, &rhs.flatten(), opts, mon)?;
    Ok((unflat(&x)?, stats))
}
