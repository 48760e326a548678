//! Gated message passing with edge attention, and its exact gradient.
//!
//! ```text
//! h⁰_v   = tanh(W_i x_v + b_i)
//! λ_uv   = σ(a₂ · relu(A₁ [h_u; h_v] + a₁) + a₂ᵦ)
//! m_v    = Σ_{u ∈ N(v)} λ_uv W_m h_u
//! z      = σ(W_z m + U_z h + b_z)
//! r      = σ(W_r m + U_r h)
//! n      = tanh(W_n m + r ⊙ U_n h + b_n)
//! h'     = (1 − z) ⊙ n + z ⊙ h
//! score  = o₂ · relu(O₁ h + o₁) + o₂ᵦ      (prolongation nodes)
//! ```
//!
//! Scores are turned into one softmax per cross-flow. All parameters live in
//! one flat vector in the order of [`Layout`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{AnalysisGraph, FEATURES};

/// Offsets of the parameter blocks; matrices are row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub features: usize,
    pub hidden: usize,
    pub w_init: usize,
    pub b_init: usize,
    pub w_msg: usize,
    /// `W_z, W_r, W_n`, each `H × H`.
    pub w_gru: usize,
    /// `U_z, U_r, U_n`, each `H × H`.
    pub u_gru: usize,
    pub b_z: usize,
    pub b_n: usize,
    /// `H × 2H`, left half for the sender.
    pub a1: usize,
    pub a1_b: usize,
    pub a2: usize,
    pub a2_b: usize,
    pub o1: usize,
    pub o1_b: usize,
    pub o2: usize,
    pub o2_b: usize,
    pub total: usize,
}

impl Layout {
    pub fn new(features: usize, hidden: usize) -> Self {
        let (f, h) = (features, hidden);
        let mut at = 0;
        let mut take = |n: usize| {
            let o = at;
            at += n;
            o
        };
        let w_init = take(h * f);
        let b_init = take(h);
        let w_msg = take(h * h);
        let w_gru = take(3 * h * h);
        let u_gru = take(3 * h * h);
        let b_z = take(h);
        let b_n = take(h);
        let a1 = take(2 * h * h);
        let a1_b = take(h);
        let a2 = take(h);
        let a2_b = take(1);
        let o1 = take(h * h);
        let o1_b = take(h);
        let o2 = take(h);
        let o2_b = take(1);
        Layout {
            features: f,
            hidden: h,
            w_init,
            b_init,
            w_msg,
            w_gru,
            u_gru,
            b_z,
            b_n,
            a1,
            a1_b,
            a2,
            a2_b,
            o1,
            o1_b,
            o2,
            o2_b,
            total: at,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub layout: Layout,
    pub data: Vec<f64>,
}

impl Params {
    pub fn zeros(hidden: usize) -> Self {
        let layout = Layout::new(FEATURES, hidden);
        Params {
            data: vec![0.0; layout.total],
            layout,
        }
    }

    /// Uniform Glorot-style initialization; biases start at zero.
    pub fn init(hidden: usize, seed: u64) -> Self {
        let mut p = Self::zeros(hidden);
        let l = p.layout;
        let (f, h) = (l.features, l.hidden);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let blocks = [
            (l.w_init, h * f, f + h),
            (l.w_msg, h * h, 2 * h),
            (l.w_gru, 3 * h * h, 2 * h),
            (l.u_gru, 3 * h * h, 2 * h),
            (l.a1, 2 * h * h, 3 * h),
            (l.a2, h, h + 1),
            (l.o1, h * h, 2 * h),
            (l.o2, h, h + 1),
        ];
        for (off, n, fan) in blocks {
            let bound = (6.0 / fan as f64).sqrt();
            for v in &mut p.data[off..off + n] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    pub fn hidden(&self) -> usize {
        self.layout.hidden
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `self += scale · grad`.
    pub fn add_scaled(&mut self, grad: &[f64], scale: f64) {
        for (p, g) in self.data.iter_mut().zip(grad) {
            *p += scale * g;
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `out += M x` for a row-major `rows × cols` block.
fn matvec_add(m: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let row = &m[i * cols..(i + 1) * cols];
        out[i] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `out += Mᵀ y`.
fn matvec_t_add(m: &[f64], rows: usize, cols: usize, y: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        if y[i] == 0.0 {
            continue;
        }
        let row = &m[i * cols..(i + 1) * cols];
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * y[i];
        }
    }
}

/// `G += y xᵀ`.
fn outer_add(g: &mut [f64], cols: usize, y: &[f64], x: &[f64]) {
    for (i, yi) in y.iter().enumerate() {
        if *yi == 0.0 {
            continue;
        }
        for (gv, xv) in g[i * cols..(i + 1) * cols].iter_mut().zip(x) {
            *gv += yi * xv;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-flow categorical distributions over prolongation options, in the
/// order of [`AnalysisGraph::groups`].
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyOutput {
    pub probs: Vec<Vec<f64>>,
}

struct Step {
    h: Vec<Vec<f64>>,
    /// `W_m h_u` per node.
    msg: Vec<Vec<f64>>,
    /// Attention pre-activations per directed edge.
    q: Vec<Vec<f64>>,
    lambda: Vec<f64>,
    m: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
    /// `U_n h` per node.
    k: Vec<Vec<f64>>,
}

struct Trace {
    h0: Vec<Vec<f64>>,
    steps: Vec<Step>,
    h_final: Vec<Vec<f64>>,
    /// Readout pre-activations per prolongation node.
    y: Vec<Option<Vec<f64>>>,
    scores: Vec<f64>,
    output: PolicyOutput,
}

fn directed_edges(g: &AnalysisGraph) -> Vec<(usize, usize)> {
    g.edges.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect()
}

fn run(g: &AnalysisGraph, p: &Params, iterations: usize) -> Trace {
    let l = &p.layout;
    let (f, h) = (l.features, l.hidden);
    let d = &p.data;
    let n_nodes = g.len();
    let edges = directed_edges(g);

    let h0: Vec<Vec<f64>> = g
        .features
        .iter()
        .map(|x| {
            let mut v = d[l.b_init..l.b_init + h].to_vec();
            matvec_add(&d[l.w_init..l.w_init + h * f], h, f, x, &mut v);
            v.iter_mut().for_each(|a| *a = a.tanh());
            v
        })
        .collect();

    let mut steps = Vec::with_capacity(iterations);
    let mut cur = h0.clone();
    let a1 = &d[l.a1..l.a1 + 2 * h * h];
    for _ in 0..iterations {
        let msg: Vec<Vec<f64>> = cur
            .iter()
            .map(|hv| {
                let mut v = vec![0.0; h];
                matvec_add(&d[l.w_msg..l.w_msg + h * h], h, h, hv, &mut v);
                v
            })
            .collect();
        // A₁ [h_u; h_v] split into sender and receiver halves
        let (mut left, mut right) = (vec![vec![0.0; h]; n_nodes], vec![vec![0.0; h]; n_nodes]);
        for v in 0..n_nodes {
            for i in 0..h {
                let row = &a1[i * 2 * h..(i + 1) * 2 * h];
                left[v][i] = dot(&row[..h], &cur[v]);
                right[v][i] = dot(&row[h..], &cur[v]);
            }
        }
        let mut q = Vec::with_capacity(edges.len());
        let mut lambda = Vec::with_capacity(edges.len());
        let mut m = vec![vec![0.0; h]; n_nodes];
        for &(u, v) in &edges {
            let qe: Vec<f64> = (0..h).map(|i| left[u][i] + right[v][i] + d[l.a1_b + i]).collect();
            let c = qe.iter().zip(&d[l.a2..l.a2 + h]).map(|(x, w)| x.max(0.0) * w).sum::<f64>() + d[l.a2_b];
            let lam = sigmoid(c);
            for (mi, gi) in m[v].iter_mut().zip(&msg[u]) {
                *mi += lam * gi;
            }
            q.push(qe);
            lambda.push(lam);
        }
        let (mut zs, mut rs, mut ns, mut ks, mut next) = (
            Vec::with_capacity(n_nodes),
            Vec::with_capacity(n_nodes),
            Vec::with_capacity(n_nodes),
            Vec::with_capacity(n_nodes),
            Vec::with_capacity(n_nodes),
        );
        let w = |k: usize| &d[l.w_gru + k * h * h..l.w_gru + (k + 1) * h * h];
        let u = |k: usize| &d[l.u_gru + k * h * h..l.u_gru + (k + 1) * h * h];
        for v in 0..n_nodes {
            let mut z = d[l.b_z..l.b_z + h].to_vec();
            matvec_add(w(0), h, h, &m[v], &mut z);
            matvec_add(u(0), h, h, &cur[v], &mut z);
            z.iter_mut().for_each(|a| *a = sigmoid(*a));
            let mut r = vec![0.0; h];
            matvec_add(w(1), h, h, &m[v], &mut r);
            matvec_add(u(1), h, h, &cur[v], &mut r);
            r.iter_mut().for_each(|a| *a = sigmoid(*a));
            let mut k = vec![0.0; h];
            matvec_add(u(2), h, h, &cur[v], &mut k);
            let mut nv = d[l.b_n..l.b_n + h].to_vec();
            matvec_add(w(2), h, h, &m[v], &mut nv);
            for i in 0..h {
                nv[i] = (nv[i] + r[i] * k[i]).tanh();
            }
            let hn: Vec<f64> = (0..h).map(|i| (1.0 - z[i]) * nv[i] + z[i] * cur[v][i]).collect();
            zs.push(z);
            rs.push(r);
            ns.push(nv);
            ks.push(k);
            next.push(hn);
        }
        steps.push(Step {
            h: std::mem::replace(&mut cur, next),
            msg,
            q,
            lambda,
            m,
            z: zs,
            r: rs,
            n: ns,
            k: ks,
        });
    }

    let mut y = vec![None; n_nodes];
    let mut scores = vec![0.0; n_nodes];
    for grp in &g.groups {
        for &v in &grp.nodes {
            let mut yv = d[l.o1_b..l.o1_b + h].to_vec();
            matvec_add(&d[l.o1..l.o1 + h * h], h, h, &cur[v], &mut yv);
            scores[v] = yv.iter().zip(&d[l.o2..l.o2 + h]).map(|(a, w)| a.max(0.0) * w).sum::<f64>() + d[l.o2_b];
            y[v] = Some(yv);
        }
    }
    let probs = g
        .groups
        .iter()
        .map(|grp| {
            let max = grp.nodes.iter().map(|&v| scores[v]).fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = grp.nodes.iter().map(|&v| (scores[v] - max).exp()).collect();
            let sum: f64 = e.iter().sum();
            e.into_iter().map(|x| x / sum).collect()
        })
        .collect();
    Trace {
        h0,
        steps,
        h_final: cur,
        y,
        scores,
        output: PolicyOutput { probs },
    }
}

/// Default number of message-passing rounds: the graph diameter.
pub fn default_iterations(g: &AnalysisGraph) -> usize {
    g.diameter()
}

pub fn forward(g: &AnalysisGraph, p: &Params, iterations: usize) -> PolicyOutput {
    run(g, p, iterations).output
}

/// Raw scores of all nodes (zero for non-prolongation nodes).
pub fn scores(g: &AnalysisGraph, p: &Params, iterations: usize) -> Vec<f64> {
    run(g, p, iterations).scores
}

/// Gradient of `weight · Σ_flows log π(picks[flow])` with respect to every
/// parameter, together with the forward output.
pub fn backward(g: &AnalysisGraph, p: &Params, iterations: usize, picks: &[usize], weight: f64) -> (Vec<f64>, PolicyOutput) {
    let t = run(g, p, iterations);
    let l = &p.layout;
    let (f, h) = (l.features, l.hidden);
    let d = &p.data;
    let mut grad = vec![0.0; l.total];
    let n_nodes = g.len();
    if weight == 0.0 {
        return (grad, t.output);
    }

    let mut dh = vec![vec![0.0; h]; n_nodes];
    for (grp, (probs, &pick)) in g.groups.iter().zip(t.output.probs.iter().zip(picks)) {
        for (j, &v) in grp.nodes.iter().enumerate() {
            let ds = weight * (if j == pick { 1.0 } else { 0.0 } - probs[j]);
            if ds == 0.0 {
                continue;
            }
            let yv = t.y[v].as_ref().expect("prolongation node has a readout");
            let gv: Vec<f64> = yv.iter().map(|a| a.max(0.0)).collect();
            for i in 0..h {
                grad[l.o2 + i] += ds * gv[i];
            }
            grad[l.o2_b] += ds;
            let dy: Vec<f64> = (0..h)
                .map(|i| if yv[i] > 0.0 { ds * d[l.o2 + i] } else { 0.0 })
                .collect();
            outer_add(&mut grad[l.o1..l.o1 + h * h], h, &dy, &t.h_final[v]);
            for i in 0..h {
                grad[l.o1_b + i] += dy[i];
            }
            matvec_t_add(&d[l.o1..l.o1 + h * h], h, h, &dy, &mut dh[v]);
        }
    }

    let edges = directed_edges(g);
    for s in t.steps.iter().rev() {
        let mut dprev = vec![vec![0.0; h]; n_nodes];
        let mut dm = vec![vec![0.0; h]; n_nodes];
        for v in 0..n_nodes {
            let (z, r, nv, k, hv) = (&s.z[v], &s.r[v], &s.n[v], &s.k[v], &s.h[v]);
            let dhn = &dh[v];
            let mut da_n = vec![0.0; h];
            let mut da_z = vec![0.0; h];
            let mut da_r = vec![0.0; h];
            let mut dk = vec![0.0; h];
            for i in 0..h {
                dprev[v][i] += dhn[i] * z[i];
                let dn = dhn[i] * (1.0 - z[i]);
                let dz = dhn[i] * (hv[i] - nv[i]);
                da_n[i] = dn * (1.0 - nv[i] * nv[i]);
                dk[i] = da_n[i] * r[i];
                da_r[i] = da_n[i] * k[i] * r[i] * (1.0 - r[i]);
                da_z[i] = dz * z[i] * (1.0 - z[i]);
            }
            for (gate, da) in [(0, &da_z), (1, &da_r), (2, &da_n)] {
                let wo = l.w_gru + gate * h * h;
                outer_add(&mut grad[wo..wo + h * h], h, da, &s.m[v]);
                matvec_t_add(&d[wo..wo + h * h], h, h, da, &mut dm[v]);
            }
            for (gate, da) in [(0, &da_z), (1, &da_r), (2, &dk)] {
                let uo = l.u_gru + gate * h * h;
                outer_add(&mut grad[uo..uo + h * h], h, da, hv);
                matvec_t_add(&d[uo..uo + h * h], h, h, da, &mut dprev[v]);
            }
            for i in 0..h {
                grad[l.b_z + i] += da_z[i];
                grad[l.b_n + i] += da_n[i];
            }
        }
        let mut dmsg = vec![vec![0.0; h]; n_nodes];
        let mut dleft = vec![vec![0.0; h]; n_nodes];
        let mut dright = vec![vec![0.0; h]; n_nodes];
        for (e, &(u, v)) in edges.iter().enumerate() {
            let lam = s.lambda[e];
            let dlam = dot(&dm[v], &s.msg[u]);
            for i in 0..h {
                dmsg[u][i] += lam * dm[v][i];
            }
            let dc = dlam * lam * (1.0 - lam);
            if dc == 0.0 {
                continue;
            }
            let q = &s.q[e];
            for i in 0..h {
                grad[l.a2 + i] += dc * q[i].max(0.0);
                if q[i] > 0.0 {
                    let dq = dc * d[l.a2 + i];
                    grad[l.a1_b + i] += dq;
                    dleft[u][i] += dq;
                    dright[v][i] += dq;
                }
            }
            grad[l.a2_b] += dc;
        }
        for v in 0..n_nodes {
            outer_add(&mut grad[l.w_msg..l.w_msg + h * h], h, &dmsg[v], &s.h[v]);
            matvec_t_add(&d[l.w_msg..l.w_msg + h * h], h, h, &dmsg[v], &mut dprev[v]);
            for i in 0..h {
                let row = l.a1 + i * 2 * h;
                if dleft[v][i] != 0.0 {
                    for j in 0..h {
                        grad[row + j] += dleft[v][i] * s.h[v][j];
                        dprev[v][j] += dleft[v][i] * d[row + j];
                    }
                }
                if dright[v][i] != 0.0 {
                    for j in 0..h {
                        grad[row + h + j] += dright[v][i] * s.h[v][j];
                        dprev[v][j] += dright[v][i] * d[row + h + j];
                    }
                }
            }
        }
        dh = dprev;
    }

    for v in 0..n_nodes {
        let da: Vec<f64> = (0..h).map(|i| dh[v][i] * (1.0 - t.h0[v][i] * t.h0[v][i])).collect();
        outer_add(&mut grad[l.w_init..l.w_init + h * f], f, &da, &g.features[v]);
        for i in 0..h {
            grad[l.b_init + i] += da[i];
        }
    }
    (grad, t.output)
}

/// `Σ_flows log π(picks[flow])`.
pub fn log_prob(out: &PolicyOutput, picks: &[usize]) -> f64 {
    out.probs.iter().zip(picks).map(|(p, &i)| p[i].ln()).sum()
}
