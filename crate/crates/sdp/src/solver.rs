//! Infeasible-start primal-dual interior-point method.
//!
//! Nesterov–Todd scaling on every cone block (the LP part uses the scalar
//! special case), Mehrotra predictor-corrector steps, separate primal and
//! dual step lengths. Free variables are kept in the Newton system as an
//! augmented block instead of being split, so the reduced system is
//!
//! ```text
//! [ A_c H A_cᵀ   A_f ] [Δy  ]   [r_p − A_c(R − H r_d)]
//! [ A_fᵀ          0  ] [Δx_f] = [r_d,free            ]
//! ```
//!
//! with `H` the NT scaling operator of the cone variables.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::problem::{SdpProblem, VarRef};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
    IterationLimit,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::NumericalTrouble => "numerical-trouble",
            Status::IterationLimit => "iteration-limit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Bound on relative primal residual, dual residual and duality gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Threshold on the normalized Farkas residual for declaring
    /// infeasibility or unboundedness.
    pub infeasibility_tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 200, infeasibility_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: Status,
    pub free: Vec<f64>,
    pub nonneg: Vec<f64>,
    pub blocks: Vec<DMatrix<f64>>,
    /// Equality-row multipliers.
    pub y: Vec<f64>,
    pub dual_nonneg: Vec<f64>,
    pub dual_blocks: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `‖b − Ax‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖c − Aᵀy − s‖ / (1 + ‖c‖)`.
    pub dual_residual: f64,
    /// `|primal − dual| / (1 + |primal|)`.
    pub gap: f64,
    pub iterations: usize,
}

impl SdpSolution {
    pub fn value(&self, v: VarRef) -> f64 {
        match v {
            VarRef::Free(i) => self.free[i],
            VarRef::NonNeg(i) => self.nonneg[i],
            VarRef::Psd { block, row, col } => self.blocks[block][(row, col)],
        }
    }

    /// Largest of the three relative optimality measures.
    pub fn max_violation(&self) -> f64 {
        self.primal_residual.max(self.dual_residual).max(self.gap)
    }

    pub fn min_block_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sparse view of one row restricted to a PSD block: `(a, b, v)` with
/// `a <= b` means `v * X[a][b]`.
type BlockEntries = Vec<(usize, usize, f64)>;

struct Data {
    m: usize,
    nf: usize,
    nl: usize,
    dims: Vec<usize>,
    af: DMatrix<f64>,
    al: DMatrix<f64>,
    blk_rows: Vec<Vec<(usize, BlockEntries)>>,
    b: DVector<f64>,
    cf: DVector<f64>,
    cl: DVector<f64>,
    cblk: Vec<DMatrix<f64>>,
}

fn entries_to_matrix(n: usize, entries: &[(usize, usize, f64)], scale: f64, out: &mut DMatrix<f64>) {
    debug_assert_eq!(out.nrows(), n);
    for &(a, b, v) in entries {
        if a == b {
            out[(a, a)] += scale * v;
        } else {
            out[(a, b)] += 0.5 * scale * v;
            out[(b, a)] += 0.5 * scale * v;
        }
    }
}

fn entries_dot(entries: &[(usize, usize, f64)], x: &DMatrix<f64>) -> f64 {
    entries.iter().map(|&(a, b, v)| v * x[(a, b)]).sum()
}

impl Data {
    fn new(p: &SdpProblem) -> Self {
        let m = p.rows.len();
        let nf = p.n_free;
        let nl = p.n_nonneg;
        let mut af = DMatrix::zeros(m, nf);
        let mut al = DMatrix::zeros(m, nl);
        let mut per_block: Vec<Vec<(usize, BlockEntries)>> = vec![Vec::new(); p.blocks.len()];
        for (i, row) in p.rows.iter().enumerate() {
            let mut psd: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
            for &(v, c) in row {
                match v {
                    VarRef::Free(j) => af[(i, j)] += c,
                    VarRef::NonNeg(j) => al[(i, j)] += c,
                    VarRef::Psd { block, row, col } => *psd.entry((block, row, col)).or_insert(0.0) += c,
                }
            }
            let mut cur: Option<usize> = None;
            for ((k, a, b), v) in psd {
                if v == 0.0 {
                    continue;
                }
                if cur != Some(k) {
                    per_block[k].push((i, Vec::new()));
                    cur = Some(k);
                }
                per_block[k].last_mut().unwrap().1.push((a, b, v));
            }
        }
        let mut cf = DVector::zeros(nf);
        let mut cl = DVector::zeros(nl);
        let mut cblk: Vec<DMatrix<f64>> = p.blocks.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for &(v, c) in &p.objective {
            match v {
                VarRef::Free(j) => cf[j] += c,
                VarRef::NonNeg(j) => cl[j] += c,
                VarRef::Psd { block, row, col } => {
                    let n = p.blocks[block];
                    entries_to_matrix(n, &[(row, col, c)], 1.0, &mut cblk[block]);
                }
            }
        }
        Data {
            m,
            nf,
            nl,
            dims: p.blocks.clone(),
            af,
            al,
            blk_rows: per_block,
            b: DVector::from_vec(p.rhs.clone()),
            cf,
            cl,
            cblk,
        }
    }

    fn nu(&self) -> f64 {
        (self.nl + self.dims.iter().sum::<usize>()) as f64
    }

    /// `A_c(x_l, X) + A_f x_f`.
    fn apply(&self, xf: &DVector<f64>, xl: &DVector<f64>, xb: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = &self.af * xf + &self.al * xl;
        for (k, rows) in self.blk_rows.iter().enumerate() {
            for (i, ent) in rows {
                out[*i] += entries_dot(ent, &xb[k]);
            }
        }
        out
    }

    /// Cone part of `Aᵀy`: the nonneg vector and one symmetric matrix per block.
    fn adjoint_cone(&self, y: &DVector<f64>) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let l = self.al.tr_mul(y);
        let mut blocks: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (k, rows) in self.blk_rows.iter().enumerate() {
            for (i, ent) in rows {
                if y[*i] != 0.0 {
                    entries_to_matrix(self.dims[k], ent, y[*i], &mut blocks[k]);
                }
            }
        }
        (l, blocks)
    }

    fn b_norm(&self) -> f64 {
        self.b.norm()
    }

    fn c_norm(&self) -> f64 {
        (self.cf.norm_squared() + self.cl.norm_squared() + self.cblk.iter().map(|c| c.norm_squared()).sum::<f64>())
            .sqrt()
    }
}

#[derive(Clone)]
struct Iterate {
    xf: DVector<f64>,
    xl: DVector<f64>,
    xb: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    sl: DVector<f64>,
    sb: Vec<DMatrix<f64>>,
}

struct Residuals {
    rp: DVector<f64>,
    rdf: DVector<f64>,
    rdl: DVector<f64>,
    rdb: Vec<DMatrix<f64>>,
    pobj: f64,
    dobj: f64,
    pinf: f64,
    dinf: f64,
    gap: f64,
    mu: f64,
}

struct BlockScaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    lambda: DVector<f64>,
}

struct Scaling {
    /// `x/s` for the nonneg part.
    hl: DVector<f64>,
    /// `(x/s)^{1/4}` for the nonneg part.
    gl: DVector<f64>,
    lambda_l: DVector<f64>,
    blocks: Vec<BlockScaling>,
}

struct Direction {
    xf: DVector<f64>,
    xl: DVector<f64>,
    xb: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    sl: DVector<f64>,
    sb: Vec<DMatrix<f64>>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.dot(b)
}

fn nt_block(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<BlockScaling> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let p = ls.transpose() * &lx;
    let svd = p.svd(true, true);
    let v = svd.v_t.as_ref()?.transpose();
    let d = svd.singular_values.clone();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    let n = x.nrows();
    let mut g = &lx * &v;
    let mut dhalf_vt = v.transpose();
    for j in 0..n {
        let s = d[j].sqrt();
        for i in 0..n {
            g[(i, j)] /= s;
        }
        for i in 0..n {
            dhalf_vt[(j, i)] *= s;
        }
    }
    let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let ginv = dhalf_vt * lx_inv;
    let w = sym(&(&g * g.transpose()));
    Some(BlockScaling { g, ginv, w, lambda: d })
}

/// Largest `a` with `x + a·dx` positive semidefinite (capped at `f64::MAX`).
fn psd_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let l = x.clone().cholesky()?.l();
    let t = l.solve_lower_triangular(dx)?;
    let e = l.solve_lower_triangular(&t.transpose())?;
    let lmin = sym(&e).symmetric_eigenvalues().min();
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::MAX })
}

fn lp_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, &d)| d < 0.0)
        .map(|(&xi, &d)| -xi / d)
        .fold(f64::MAX, f64::min)
}

struct Kkt {
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    k: DMatrix<f64>,
    d: DVector<f64>,
}

impl Kkt {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        let scaled = rhs.component_mul(&self.d);
        let mut z = self.lu.solve(&scaled)?;
        let mut x = z.component_mul(&self.d);
        // one round of iterative refinement against the unscaled matrix
        let r = rhs - &self.k * &x;
        z = self.lu.solve(&r.component_mul(&self.d))?;
        x += z.component_mul(&self.d);
        if x.iter().all(|v| v.is_finite()) {
            Some(x)
        } else {
            None
        }
    }
}

struct Ipm<'a> {
    data: &'a Data,
    settings: Settings,
}

impl<'a> Ipm<'a> {
    fn initial(&self) -> Iterate {
        let d = self.data;
        let mut xb = Vec::new();
        let mut sb = Vec::new();
        for (k, &n) in d.dims.iter().enumerate() {
            let nf = n as f64;
            let mut xi: f64 = 10f64.max(nf.sqrt());
            let mut eta: f64 = 10f64.max(nf.sqrt()).max(d.cblk[k].norm());
            for (i, ent) in &d.blk_rows[k] {
                let anorm = ent.iter().map(|e| e.2 * e.2).sum::<f64>().sqrt();
                xi = xi.max(nf * (1.0 + d.b[*i].abs()) / (1.0 + anorm));
                eta = eta.max(anorm);
            }
            eta = eta.max(1.0 + d.cblk[k].norm());
            xb.push(DMatrix::identity(n, n) * xi);
            sb.push(DMatrix::identity(n, n) * eta);
        }
        let mut xi_l: f64 = 10.0;
        let mut eta_l: f64 = 10.0;
        for j in 0..d.nl {
            let col = d.al.column(j);
            let anorm = col.norm();
            for i in 0..d.m {
                if col[i] != 0.0 {
                    xi_l = xi_l.max((1.0 + d.b[i].abs()) / (1.0 + anorm));
                }
            }
            eta_l = eta_l.max(anorm).max(d.cl[j].abs() + 1.0);
        }
        Iterate {
            xf: DVector::zeros(d.nf),
            xl: DVector::from_element(d.nl, xi_l),
            xb,
            y: DVector::zeros(d.m),
            sl: DVector::from_element(d.nl, eta_l),
            sb,
        }
    }

    fn residuals(&self, it: &Iterate, bnorm: f64, cnorm: f64) -> Residuals {
        let d = self.data;
        let rp = &d.b - d.apply(&it.xf, &it.xl, &it.xb);
        let (atl, atb) = d.adjoint_cone(&it.y);
        let rdf = &d.cf - d.af.tr_mul(&it.y);
        let rdl = &d.cl - atl - &it.sl;
        let rdb: Vec<DMatrix<f64>> =
            d.cblk.iter().zip(atb.iter()).zip(it.sb.iter()).map(|((c, a), s)| c - a - s).collect();
        let pobj = d.cf.dot(&it.xf)
            + d.cl.dot(&it.xl)
            + d.cblk.iter().zip(it.xb.iter()).map(|(c, x)| inner(c, x)).sum::<f64>();
        let dobj = d.b.dot(&it.y);
        let comp = it.xl.dot(&it.sl) + it.xb.iter().zip(it.sb.iter()).map(|(x, s)| inner(x, s)).sum::<f64>();
        let nu = d.nu();
        let mu = if nu > 0.0 { comp / nu } else { 0.0 };
        let dnorm =
            (rdf.norm_squared() + rdl.norm_squared() + rdb.iter().map(|r| r.norm_squared()).sum::<f64>()).sqrt();
        Residuals {
            pinf: rp.norm() / (1.0 + bnorm),
            dinf: dnorm / (1.0 + cnorm),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs()),
            rp,
            rdf,
            rdl,
            rdb,
            pobj,
            dobj,
            mu,
        }
    }

    fn scaling(&self, it: &Iterate) -> Option<Scaling> {
        let mut blocks = Vec::with_capacity(it.xb.len());
        for (x, s) in it.xb.iter().zip(it.sb.iter()) {
            blocks.push(nt_block(x, s)?);
        }
        let hl = it.xl.component_div(&it.sl);
        let gl = hl.map(|v| v.sqrt().sqrt());
        let lambda_l = it.xl.component_mul(&it.sl).map(f64::sqrt);
        Some(Scaling { hl, gl, lambda_l, blocks })
    }

    fn kkt(&self, sc: &Scaling) -> Option<Kkt> {
        let d = self.data;
        let m = d.m;
        let n = m + d.nf;
        let mut k = DMatrix::zeros(n, n);
        {
            // LP part: A_l diag(h) A_lᵀ
            let mut scaled = d.al.clone();
            for j in 0..d.nl {
                let h = sc.hl[j];
                scaled.column_mut(j).scale_mut(h);
            }
            let lp = &scaled * d.al.transpose();
            k.view_mut((0, 0), (m, m)).copy_from(&lp);
        }
        for (blk, rows) in d.blk_rows.iter().enumerate() {
            let w = &sc.blocks[blk].w;
            let dim = d.dims[blk];
            let mut t = DMatrix::zeros(dim, dim);
            for (pi, (i, ent_i)) in rows.iter().enumerate() {
                t.fill(0.0);
                for &(a, b, v) in ent_i {
                    let wa = w.column(a);
                    let wb = w.column(b);
                    if a == b {
                        t.ger(v, &wa, &wa, 1.0);
                    } else {
                        t.ger(0.5 * v, &wa, &wb, 1.0);
                        t.ger(0.5 * v, &wb, &wa, 1.0);
                    }
                }
                for (j, ent_j) in rows[..=pi].iter() {
                    let val = entries_dot(ent_j, &t);
                    k[(*i, *j)] += val;
                    if i != j {
                        k[(*j, *i)] += val;
                    }
                }
            }
        }
        k.view_mut((0, m), (m, d.nf)).copy_from(&d.af);
        k.view_mut((m, 0), (d.nf, m)).copy_from(&d.af.transpose());
        if !k.iter().all(|v| v.is_finite()) {
            return None;
        }
        let mut dscale = DVector::from_element(n, 1.0);
        for i in 0..n {
            let mx = k.row(i).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if mx > 0.0 {
                dscale[i] = 1.0 / mx.sqrt();
            }
        }
        let mut ks = k.clone();
        for j in 0..n {
            for i in 0..n {
                ks[(i, j)] *= dscale[i] * dscale[j];
            }
        }
        let lu = ks.lu();
        if !lu.is_invertible() {
            return None;
        }
        Some(Kkt { lu, k, d: dscale })
    }

    /// Solves the Newton system for complementarity targets `rc_l`, `rc_b`
    /// (the right-hand sides of `Δx + H Δs = R`).
    fn direction(
        &self,
        kkt: &Kkt,
        sc: &Scaling,
        res: &Residuals,
        rc_l: &DVector<f64>,
        rc_b: &[DMatrix<f64>],
    ) -> Option<Direction> {
        let d = self.data;
        let tl = rc_l - sc.hl.component_mul(&res.rdl);
        let tb: Vec<DMatrix<f64>> = rc_b
            .iter()
            .zip(res.rdb.iter())
            .zip(sc.blocks.iter())
            .map(|((r, rd), b)| r - &b.w * rd * &b.w)
            .collect();
        let zero_f = DVector::zeros(d.nf);
        let rhs1 = &res.rp - d.apply(&zero_f, &tl, &tb);
        let mut rhs = DVector::zeros(d.m + d.nf);
        rhs.rows_mut(0, d.m).copy_from(&rhs1);
        rhs.rows_mut(d.m, d.nf).copy_from(&res.rdf);
        let mut sol = kkt.solve(&rhs)?;
        // Refine against the operator form of the reduced system; the formed
        // Schur matrix loses accuracy as the scaling degenerates near the optimum.
        let rhs_norm = rhs.amax();
        for _ in 0..3 {
            let dy = sol.rows(0, d.m).into_owned();
            let dxf = sol.rows(d.m, d.nf).into_owned();
            let (atl, atb) = d.adjoint_cone(&dy);
            let vl = sc.hl.component_mul(&atl);
            let vb: Vec<DMatrix<f64>> = atb.iter().zip(&sc.blocks).map(|(a, b)| &b.w * a * &b.w).collect();
            let mut r = DVector::zeros(d.m + d.nf);
            r.rows_mut(0, d.m).copy_from(&(&rhs1 - d.apply(&dxf, &vl, &vb)));
            r.rows_mut(d.m, d.nf).copy_from(&(&res.rdf - d.af.tr_mul(&dy)));
            if r.amax() <= 1e-15 * (1.0 + rhs_norm) {
                break;
            }
            sol += kkt.solve(&r)?;
        }
        let dy = sol.rows(0, d.m).into_owned();
        let dxf = sol.rows(d.m, d.nf).into_owned();
        let (atl, atb) = d.adjoint_cone(&dy);
        let dsl = &res.rdl - atl;
        let dsb: Vec<DMatrix<f64>> = res.rdb.iter().zip(atb.iter()).map(|(r, a)| r - a).collect();
        let dxl = rc_l - sc.hl.component_mul(&dsl);
        let dxb: Vec<DMatrix<f64>> = rc_b
            .iter()
            .zip(dsb.iter())
            .zip(sc.blocks.iter())
            .map(|((r, ds), b)| sym(&(r - &b.w * ds * &b.w)))
            .collect();
        Some(Direction { xf: dxf, xl: dxl, xb: dxb, y: dy, sl: dsl, sb: dsb.iter().map(sym).collect() })
    }

    fn max_steps(&self, it: &Iterate, dir: &Direction) -> Option<(f64, f64)> {
        let mut ap = lp_step(&it.xl, &dir.xl);
        let mut ad = lp_step(&it.sl, &dir.sl);
        for k in 0..it.xb.len() {
            ap = ap.min(psd_step(&it.xb[k], &dir.xb[k])?);
            ad = ad.min(psd_step(&it.sb[k], &dir.sb[k])?);
        }
        Some((ap, ad))
    }

    /// Complementarity right-hand side `G Z Gᵀ` where `λ∘Z = target`.
    fn complementarity_rhs(
        &self,
        sc: &Scaling,
        sigma_mu: f64,
        pred: Option<&Direction>,
    ) -> (DVector<f64>, Vec<DMatrix<f64>>) {
        let nl = self.data.nl;
        let mut rl = DVector::zeros(nl);
        for j in 0..nl {
            let lam = sc.lambda_l[j];
            let mut t = sigma_mu - lam * lam;
            if let Some(p) = pred {
                t -= p.xl[j] * p.sl[j];
            }
            let z = t / lam;
            rl[j] = sc.gl[j] * sc.gl[j] * z;
        }
        let mut rb = Vec::with_capacity(sc.blocks.len());
        for (k, b) in sc.blocks.iter().enumerate() {
            let n = b.lambda.len();
            let mut t = DMatrix::zeros(n, n);
            for i in 0..n {
                t[(i, i)] = sigma_mu - b.lambda[i] * b.lambda[i];
            }
            if let Some(p) = pred {
                let dxs = &b.ginv * &p.xb[k] * b.ginv.transpose();
                let dss = b.g.transpose() * &p.sb[k] * &b.g;
                let prod = &dxs * &dss;
                t -= sym(&prod);
            }
            let mut z = DMatrix::zeros(n, n);
            for j in 0..n {
                for i in 0..n {
                    z[(i, j)] = 2.0 * t[(i, j)] / (b.lambda[i] + b.lambda[j]);
                }
            }
            rb.push(sym(&(&b.g * z * b.g.transpose())));
        }
        (rl, rb)
    }

    fn step(&self, it: &Iterate, dir: &Direction, ap: f64, ad: f64) -> Iterate {
        Iterate {
            xf: &it.xf + &dir.xf * ap,
            xl: &it.xl + &dir.xl * ap,
            xb: it.xb.iter().zip(dir.xb.iter()).map(|(x, d)| sym(&(x + d * ap))).collect(),
            y: &it.y + &dir.y * ad,
            sl: &it.sl + &dir.sl * ad,
            sb: it.sb.iter().zip(dir.sb.iter()).map(|(s, d)| sym(&(s + d * ad))).collect(),
        }
    }

    fn complementarity_after(&self, it: &Iterate, dir: &Direction, ap: f64, ad: f64) -> f64 {
        let mut c = 0.0;
        for j in 0..it.xl.len() {
            c += (it.xl[j] + ap * dir.xl[j]) * (it.sl[j] + ad * dir.sl[j]);
        }
        for k in 0..it.xb.len() {
            c += inner(&(&it.xb[k] + &dir.xb[k] * ap), &(&it.sb[k] + &dir.sb[k] * ad));
        }
        c / self.data.nu()
    }

    fn finish(&self, it: &Iterate, res: &Residuals, status: Status, iterations: usize) -> SdpSolution {
        SdpSolution {
            status,
            free: it.xf.iter().copied().collect(),
            nonneg: it.xl.iter().copied().collect(),
            blocks: it.xb.clone(),
            y: it.y.iter().copied().collect(),
            dual_nonneg: it.sl.iter().copied().collect(),
            dual_blocks: it.sb.clone(),
            primal_objective: res.pobj,
            dual_objective: res.dobj,
            primal_residual: res.pinf,
            dual_residual: res.dinf,
            gap: res.gap,
            iterations,
        }
    }

    fn infeasibility(&self, res: &Residuals, bnorm: f64, cnorm: f64) -> Option<Status> {
        let tol = self.settings.infeasibility_tol;
        // Farkas ray for the primal: Aᵀŷ + ŝ ≈ 0 with bᵀŷ = 1.
        if res.dobj > 0.0 {
            let ray_res = (cnorm + res.dinf * (1.0 + cnorm)) / res.dobj;
            if ray_res < tol && res.dobj > 1e8 * (1.0 + bnorm) {
                return Some(Status::Infeasible);
            }
        }
        if res.pobj < 0.0 {
            let ray_res = (bnorm + res.pinf * (1.0 + bnorm)) / (-res.pobj);
            if ray_res < tol && -res.pobj > 1e8 * (1.0 + cnorm) {
                return Some(Status::Unbounded);
            }
        }
        None
    }

    fn run(&self) -> SdpSolution {
        let d = self.data;
        let bnorm = d.b_norm();
        let cnorm = d.c_norm();
        let mut it = self.initial();
        let mut step_frac = 0.9;
        let mut best: Option<(f64, Iterate)> = None;
        let mut stalls = 0usize;
        let mut prev_viol = f64::INFINITY;
        for iter in 0..=self.settings.max_iter {
            let res = self.residuals(&it, bnorm, cnorm);
            let viol = res.pinf.max(res.dinf).max(res.gap);
            if viol <= self.settings.tol {
                return self.finish(&it, &res, Status::Optimal, iter);
            }
            if let Some(st) = self.infeasibility(&res, bnorm, cnorm) {
                return self.finish(&it, &res, st, iter);
            }
            // Fallback iterate: primal feasibility weighs most, since callers
            // can still certify from a feasible but suboptimal point.
            let merit = res.pinf.max(1e-2 * res.dinf.max(res.gap));
            if best.as_ref().is_none_or(|(v, _)| merit < *v) {
                best = Some((merit, it.clone()));
            }
            if iter == self.settings.max_iter {
                return self.finish(&it, &res, Status::IterationLimit, iter);
            }
            if viol > 0.999 * prev_viol {
                stalls += 1;
            } else {
                stalls = 0;
            }
            prev_viol = prev_viol.min(viol);
            if stalls >= 8 || !res.mu.is_finite() {
                return self.trouble(best, bnorm, cnorm, iter);
            }
            let step = (|| {
                let sc = self.scaling(&it)?;
                let kkt = self.kkt(&sc)?;
                let (rl, rb) = self.complementarity_rhs(&sc, 0.0, None);
                let pred = self.direction(&kkt, &sc, &res, &rl, &rb)?;
                let (ap, ad) = self.max_steps(&it, &pred)?;
                let (ap, ad) = (ap.min(1.0), ad.min(1.0));
                let mu_aff = self.complementarity_after(&it, &pred, ap, ad);
                let sigma = if res.mu > 0.0 { (mu_aff / res.mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };
                let (rl, rb) = self.complementarity_rhs(&sc, sigma * res.mu, Some(&pred));
                let corr = self.direction(&kkt, &sc, &res, &rl, &rb)?;
                let (ap, ad) = self.max_steps(&it, &corr)?;
                let ap = (step_frac * ap).min(1.0);
                let ad = (step_frac * ad).min(1.0);
                Some((corr, ap, ad))
            })();
            let Some((dir, ap, ad)) = step else {
                return self.trouble(best, bnorm, cnorm, iter);
            };
            it = self.step(&it, &dir, ap, ad);
            step_frac = 0.9 + 0.09 * ap.min(ad);
        }
        unreachable!("loop returns on the final iteration")
    }

    fn trouble(&self, best: Option<(f64, Iterate)>, bnorm: f64, cnorm: f64, iter: usize) -> SdpSolution {
        let it = best.map(|b| b.1).unwrap_or_else(|| self.initial());
        let res = self.residuals(&it, bnorm, cnorm);
        self.finish(&it, &res, Status::NumericalTrouble, iter)
    }
}

/// Solves `problem` with the interior-point method.
///
/// Deterministic: identical inputs and settings give bitwise-identical
/// output. Malformed problems are reported as `NumericalTrouble` with empty
/// iterates; call [`SdpProblem::validate`] first for a diagnostic.
pub fn solve(problem: &SdpProblem, settings: &Settings) -> SdpSolution {
    if problem.validate().is_err() {
        return SdpSolution {
            status: Status::NumericalTrouble,
            free: vec![f64::NAN; problem.n_free],
            nonneg: vec![f64::NAN; problem.n_nonneg],
            blocks: problem.blocks.iter().map(|&n| DMatrix::from_element(n, n, f64::NAN)).collect(),
            y: vec![f64::NAN; problem.rows.len()],
            dual_nonneg: vec![f64::NAN; problem.n_nonneg],
            dual_blocks: problem.blocks.iter().map(|&n| DMatrix::from_element(n, n, f64::NAN)).collect(),
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            gap: f64::INFINITY,
            iterations: 0,
        };
    }
    let data = Data::new(problem);
    Ipm { data: &data, settings: *settings }.run()
}
