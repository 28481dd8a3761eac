//! Operator-splitting solver for linear programs over products of PSD and
//! nonnegative cones.
//!
//! The problem is `min ⟨c, x⟩ s.t. Ax = b, x ∈ K` where `x` collects every
//! block in scaled coordinates (off-diagonal PSD entries carry a factor `√2`,
//! so the Euclidean inner product is the trace inner product). Each iteration
//! projects onto the affine set, over-relaxes, then projects onto the cone.
//!
//! The affine projection is factored once. Constraints with a single term and
//! zero right-hand side only pin a coordinate, so they become a mask. The
//! remaining rows are split into connected components (rows sharing a free
//! coordinate) and each component gets its own small pseudo-inverse Gram
//! matrix. For the theta program this leaves a single trace row, i.e. the
//! closed-form "zero the edges, shift the diagonal" projection.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symmat::{self, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Psd(usize),
    NonNeg(usize),
}

impl Cone {
    fn dim(self) -> usize {
        match self {
            Cone::Psd(m) => m * (m + 1) / 2,
            Cone::NonNeg(d) => d,
        }
    }
}

/// `coef · X_ij` in block `block`. For PSD blocks `(i, j)` and `(j, i)` name
/// the same variable; for nonnegative blocks `j` is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub coef: f64,
}

impl Term {
    pub fn new(block: usize, i: usize, j: usize, coef: f64) -> Self {
        Term { block, i, j, coef }
    }

    pub fn entry(block: usize, i: usize, coef: f64) -> Self {
        Term { block, i, j: i, coef }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub terms: Vec<Term>,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(terms: Vec<Term>, rhs: f64) -> Self {
        LinearConstraint { terms, rhs }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    pub blocks: Vec<Cone>,
    pub objective: Vec<Term>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, Copy)]
pub struct ConicOptions {
    pub eps: f64,
    pub max_iter: usize,
    /// Over-relaxation factor in `(0, 2)`.
    pub alpha: f64,
    /// Initial penalty.
    pub rho: f64,
    /// Print one diagnostic line every this many iterations (0 = silent).
    pub verbose_every: usize,
}

impl Default for ConicOptions {
    fn default() -> Self {
        ConicOptions {
            eps: 1e-7,
            max_iter: 20_000,
            alpha: 1.6,
            rho: 1.0,
            verbose_every: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockValue {
    Psd(SymMatrix),
    NonNeg(Vec<f64>),
}

impl BlockValue {
    pub fn as_psd(&self) -> Option<&SymMatrix> {
        match self {
            BlockValue::Psd(m) => Some(m),
            BlockValue::NonNeg(_) => None,
        }
    }

    pub fn as_nonneg(&self) -> Option<&[f64]> {
        match self {
            BlockValue::NonNeg(v) => Some(v),
            BlockValue::Psd(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    /// Primal blocks, exactly in the cone.
    pub primal: Vec<BlockValue>,
    /// Dual slack `c − Aᵀy`, exactly in the (self-dual) cone.
    pub slack: Vec<BlockValue>,
    /// Equality multipliers, one per constraint, in input order.
    pub duals: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `‖Ax − b‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖c − Aᵀy − s‖ / (1 + ‖c‖)`.
    pub dual_residual: f64,
    /// `|pobj − dobj| / (1 + |pobj| + |dobj|)`.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// A row of `A` in scaled coordinates.
#[derive(Debug, Clone)]
struct Row {
    entries: Vec<(usize, f64)>,
    rhs: f64,
}

#[derive(Debug)]
struct Component {
    rows: Vec<usize>,
    coords: Vec<usize>,
    /// Dense `rows × coords` restriction of `A`.
    a: DMatrix<f64>,
    gram_pinv: DMatrix<f64>,
}

#[derive(Debug)]
struct AffineSet {
    rows: Vec<Row>,
    /// `(row, coord, coef)` for rows that only pin a coordinate to zero.
    masks: Vec<(usize, usize, f64)>,
    /// Per mask: other rows with a coefficient on the pinned coordinate.
    mask_overlap: Vec<Vec<(usize, f64)>>,
    components: Vec<Component>,
}

impl AffineSet {
    fn new(rows: Vec<Row>, dim: usize) -> Self {
        let mut masks = Vec::new();
        let mut masked = vec![false; dim];
        let mut general = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.entries.len() == 1 && row.rhs == 0.0 && row.entries[0].1 != 0.0 {
                let (c, coef) = row.entries[0];
                if !masked[c] {
                    masked[c] = true;
                    masks.push((r, c, coef));
                }
            } else {
                general.push(r);
            }
        }

        // Union rows that share a free coordinate.
        let mut parent: Vec<usize> = (0..general.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut owner = vec![usize::MAX; dim];
        for (gi, &r) in general.iter().enumerate() {
            for &(c, _) in &rows[r].entries {
                if masked[c] {
                    continue;
                }
                if owner[c] == usize::MAX {
                    owner[c] = gi;
                } else {
                    let (a, b) = (find(&mut parent, owner[c]), find(&mut parent, gi));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut group_of = vec![usize::MAX; general.len()];
        for gi in 0..general.len() {
            let root = find(&mut parent, gi);
            if group_of[root] == usize::MAX {
                group_of[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[group_of[root]].push(general[gi]);
        }

        let mut local = vec![usize::MAX; dim];
        let components = groups
            .into_iter()
            .map(|grp| {
                let mut coords = Vec::new();
                for &r in &grp {
                    for &(c, _) in &rows[r].entries {
                        if !masked[c] && local[c] == usize::MAX {
                            local[c] = coords.len();
                            coords.push(c);
                        }
                    }
                }
                let mut a = DMatrix::zeros(grp.len(), coords.len());
                for (ri, &r) in grp.iter().enumerate() {
                    for &(c, coef) in &rows[r].entries {
                        if !masked[c] {
                            a[(ri, local[c])] += coef;
                        }
                    }
                }
                for &c in &coords {
                    local[c] = usize::MAX;
                }
                let gram = &a * a.transpose();
                Component {
                    rows: grp,
                    coords,
                    gram_pinv: pinv_sym(gram),
                    a,
                }
            })
            .collect();
        let mut mask_slot = vec![usize::MAX; dim];
        for (k, &(_, c, _)) in masks.iter().enumerate() {
            mask_slot[c] = k;
        }
        let mut mask_overlap = vec![Vec::new(); masks.len()];
        for (r, row) in rows.iter().enumerate() {
            for &(c, a) in &row.entries {
                let k = mask_slot[c];
                if k != usize::MAX && masks[k].0 != r {
                    mask_overlap[k].push((r, a));
                }
            }
        }
        AffineSet {
            rows,
            masks,
            mask_overlap,
            components,
        }
    }

    /// Projects `v` onto `{x : Ax = rhs_scale·b}` and writes the multipliers
    /// `ν` with `x = v − Aᵀν` into `nu`.
    fn project(&self, v: &mut [f64], rhs_scale: f64, nu: &mut [f64]) {
        let before: Vec<(usize, f64)> = self.masks.iter().map(|&(_, c, _)| (c, v[c])).collect();
        for comp in &self.components {
            let m = comp.rows.len();
            let mut resid = vec![0.0; m];
            for (ri, &r) in comp.rows.iter().enumerate() {
                let mut s = -rhs_scale * self.rows[r].rhs;
                for (ci, &c) in comp.coords.iter().enumerate() {
                    s += comp.a[(ri, ci)] * v[c];
                }
                resid[ri] = s;
            }
            let mut local_nu = vec![0.0; m];
            for (ri, slot) in local_nu.iter_mut().enumerate() {
                *slot = (0..m).map(|q| comp.gram_pinv[(ri, q)] * resid[q]).sum();
            }
            for (ci, &c) in comp.coords.iter().enumerate() {
                let delta: f64 = (0..m).map(|ri| comp.a[(ri, ci)] * local_nu[ri]).sum();
                v[c] -= delta;
            }
            for (ri, &r) in comp.rows.iter().enumerate() {
                nu[r] = local_nu[ri];
            }
        }
        for (k, &(r, c, coef)) in self.masks.iter().enumerate() {
            // x_c = 0 = v_c − coef·ν_r − Σ_other a·ν_other.
            let other: f64 = self.mask_overlap[k].iter().map(|&(q, a)| a * nu[q]).sum();
            nu[r] = (before[k].1 - other) / coef;
            v[c] = 0.0;
        }
    }
}

fn pinv_sym(g: DMatrix<f64>) -> DMatrix<f64> {
    let n = g.nrows();
    if n == 1 {
        let v = g[(0, 0)];
        return DMatrix::from_element(1, 1, if v.abs() > 1e-300 { 1.0 / v } else { 0.0 });
    }
    let (vals, vecs) = symmat::sym_eig(&g);
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = DMatrix::zeros(n, n);
    for (k, &l) in vals.iter().enumerate() {
        if l.abs() > 1e-12 * top.max(1e-300) {
            let q = vecs.column(k);
            out.ger(1.0 / l, &q, &q, 1.0);
        }
    }
    out
}

/// Layout of all blocks in one flat coordinate vector.
#[derive(Debug, Clone)]
struct Layout {
    blocks: Vec<Cone>,
    offsets: Vec<usize>,
    dim: usize,
}

impl Layout {
    fn new(blocks: &[Cone]) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in blocks {
            offsets.push(dim);
            dim += b.dim();
        }
        Layout {
            blocks: blocks.to_vec(),
            offsets,
            dim,
        }
    }

    /// Flat index and scale of a term's variable (scale converts a
    /// matrix-entry coefficient into a coordinate coefficient).
    fn locate(&self, t: &Term) -> Result<(usize, f64)> {
        let cone = *self.blocks.get(t.block).ok_or_else(|| {
            Error::Dimension(format!("term refers to block {} of {}", t.block, self.blocks.len()))
        })?;
        match cone {
            Cone::Psd(m) => {
                if t.i >= m || t.j >= m {
                    return Err(Error::Dimension(format!(
                        "entry ({}, {}) outside PSD block of order {m}",
                        t.i, t.j
                    )));
                }
                let (i, j) = (t.i.min(t.j), t.i.max(t.j));
                let idx = svec_index(m, i, j);
                let scale = if i == j { 1.0 } else { 1.0 / SQRT_2 };
                Ok((self.offsets[t.block] + idx, scale))
            }
            Cone::NonNeg(d) => {
                if t.i >= d {
                    return Err(Error::Dimension(format!(
                        "entry {} outside nonnegative block of length {d}",
                        t.i
                    )));
                }
                Ok((self.offsets[t.block] + t.i, 1.0))
            }
        }
    }

    fn linear_form(&self, terms: &[Term]) -> Result<Vec<(usize, f64)>> {
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for t in terms {
            if !t.coef.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
            let (c, s) = self.locate(t)?;
            out.push((c, t.coef * s));
        }
        out.sort_by_key(|e| e.0);
        out.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        out.retain(|e| e.1 != 0.0);
        Ok(out)
    }

    fn project_cone(&self, v: &mut [f64]) {
        for (b, &cone) in self.blocks.iter().enumerate() {
            let off = self.offsets[b];
            match cone {
                Cone::NonNeg(d) => v[off..off + d].iter_mut().for_each(|x| *x = x.max(0.0)),
                Cone::Psd(m) => {
                    let mat = unpack(&v[off..off + cone.dim()], m);
                    let p = symmat::project_psd_in_place(mat, 0.0, f64::INFINITY);
                    pack(&p, &mut v[off..off + cone.dim()]);
                }
            }
        }
    }

    fn values(&self, v: &[f64]) -> Vec<BlockValue> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(b, &cone)| {
                let off = self.offsets[b];
                match cone {
                    Cone::NonNeg(d) => BlockValue::NonNeg(v[off..off + d].to_vec()),
                    Cone::Psd(m) => {
                        BlockValue::Psd(SymMatrix::symmetrize(unpack(&v[off..off + cone.dim()], m)))
                    }
                }
            })
            .collect()
    }
}

fn svec_index(m: usize, i: usize, j: usize) -> usize {
    // Row r holds (r, r), (r, r+1), …, (r, m−1) and starts at Σ_{q<r} (m − q).
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

fn unpack(v: &[f64], m: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        out[(i, i)] = v[k];
        k += 1;
        for j in i + 1..m {
            let x = v[k] / SQRT_2;
            out[(i, j)] = x;
            out[(j, i)] = x;
            k += 1;
        }
    }
    out
}

fn pack(mat: &DMatrix<f64>, v: &mut [f64]) {
    let m = mat.nrows();
    let mut k = 0;
    for i in 0..m {
        v[k] = mat[(i, i)];
        k += 1;
        for j in i + 1..m {
            v[k] = SQRT_2 * 0.5 * (mat[(i, j)] + mat[(j, i)]);
            k += 1;
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Residuals {
    primal: f64,
    dual: f64,
    gap: f64,
    pobj: f64,
    dobj: f64,
}

impl Residuals {
    fn worst(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

pub fn solve_conic(prob: &ConicProblem, opts: &ConicOptions) -> Result<ConicSolution> {
    if !(opts.eps > 0.0) || !(opts.alpha > 0.0 && opts.alpha < 2.0) || !(opts.rho > 0.0) {
        return Err(Error::InvalidArgument(
            "eps and rho must be positive and alpha in (0, 2)".into(),
        ));
    }
    let layout = Layout::new(&prob.blocks);
    let dim = layout.dim;
    let mut c = vec![0.0; dim];
    for (idx, coef) in layout.linear_form(&prob.objective)? {
        c[idx] += coef;
    }
    let mut rows = Vec::with_capacity(prob.constraints.len());
    for con in &prob.constraints {
        if !con.rhs.is_finite() {
            return Err(Error::InvalidArgument("non-finite right-hand side".into()));
        }
        rows.push(Row {
            entries: layout.linear_form(&con.terms)?,
            rhs: con.rhs,
        });
    }
    let b: Vec<f64> = rows.iter().map(|r| r.rhs).collect();
    let affine = AffineSet::new(rows, dim);
    let b_norm = norm(&b);
    let c_norm = norm(&c);
    let m = b.len();

    let mut w = vec![0.0; dim];
    let mut u = vec![0.0; dim];
    let mut x = vec![0.0; dim];
    let mut v = vec![0.0; dim];
    let mut nu = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut rho = opts.rho;

    let evaluate = |w: &[f64], u: &[f64], rho: f64, y: &mut [f64]| -> Residuals {
        // Primal: ‖Aw − b‖.
        let mut rp = 0.0;
        for row in &affine.rows {
            let s: f64 = row.entries.iter().map(|&(ci, a)| a * w[ci]).sum::<f64>() - row.rhs;
            rp += s * s;
        }
        // Dual: s = −ρu; y from the least-squares fit of c − s.
        let mut r: Vec<f64> = c.iter().zip(u).map(|(ci, ui)| ci + rho * ui).collect();
        affine.project(&mut r, 0.0, y);
        let pobj = dot(&c, w);
        let dobj = dot(&b, y);
        Residuals {
            primal: rp.sqrt() / (1.0 + b_norm),
            dual: norm(&r) / (1.0 + c_norm),
            gap: (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()),
            pobj,
            dobj,
        }
    };

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, f64)> = None;
    let mut iterations = 0;
    let mut converged = false;
    let mut last_res = evaluate(&w, &u, rho, &mut y);
    while iterations < opts.max_iter {
        iterations += 1;
        for i in 0..dim {
            x[i] = w[i] - u[i] - c[i] / rho;
        }
        affine.project(&mut x, 1.0, &mut nu);
        for i in 0..dim {
            let relaxed = opts.alpha * x[i] + (1.0 - opts.alpha) * w[i];
            v[i] = relaxed + u[i];
        }
        w.copy_from_slice(&v);
        layout.project_cone(&mut w);
        for i in 0..dim {
            u[i] = v[i] - w[i];
        }

        let res = evaluate(&w, &u, rho, &mut y);
        if opts.verbose_every > 0 && iterations % opts.verbose_every == 0 {
            eprintln!(
                "iter {iterations} primal {:.3e} dual {:.3e} gap {:.3e} rho {:.3e} obj {:.10}",
                res.primal, res.dual, res.gap, rho, res.pobj
            );
        }
        let worst = res.worst();
        if best.as_ref().map_or(true, |bst| worst < bst.0) {
            best = Some((worst, w.clone(), u.clone(), rho));
        }
        if worst <= opts.eps {
            converged = true;
            last_res = res;
            break;
        }
        if iterations % 25 == 0 {
            let scale = if res.primal > 10.0 * res.dual {
                Some(2.0)
            } else if res.dual > 10.0 * res.primal {
                Some(0.5)
            } else {
                None
            };
            if let Some(f) = scale {
                rho *= f;
                u.iter_mut().for_each(|ui| *ui /= f);
            }
        }
        last_res = res;
    }

    if !converged {
        if let Some((_, bw, bu, brho)) = best {
            w = bw;
            u = bu;
            rho = brho;
            last_res = evaluate(&w, &u, rho, &mut y);
        }
    }
    let s: Vec<f64> = u.iter().map(|ui| -rho * ui).collect();
    Ok(ConicSolution {
        primal: layout.values(&w),
        slack: layout.values(&s),
        duals: y,
        primal_objective: last_res.pobj,
        dual_objective: last_res.dobj,
        primal_residual: last_res.primal,
        dual_residual: last_res.dual,
        gap: last_res.gap,
        iterations,
        converged,
    })
}
