//! Tape-based reverse-mode differentiation over dense 2-D arrays.
//!
//! Every operation appends a node holding its forward value and the ids of
//! its inputs. Nodes are created in topological order, so the backward pass
//! is a single reverse sweep over the tape. Gradients are only accumulated
//! into nodes that (transitively) depend on a parameter; constants such as
//! input features never allocate a gradient buffer.

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    MatMul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Softplus(Var),
    Clamp(Var, f64, f64),
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MeanSquare(Var, Var),
}

struct Node {
    value: Grid,
    grad: Option<Grid>,
    op: Op,
    tracked: bool,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

// c = beta * c + op(a) * op(b), with op = optional transpose.
pub(crate) fn gemm(a: &Grid, ta: bool, b: &Grid, tb: bool, beta: f64, c: &mut Grid) {
    let (m, k) = if ta { (a.cols(), a.rows()) } else { a.shape() };
    let (kb, n) = if tb { (b.cols(), b.rows()) } else { b.shape() };
    assert_eq!(k, kb, "gemm inner dimension");
    assert_eq!(c.shape(), (m, n), "gemm output shape");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        for v in c.as_mut_slice() {
            *v *= beta;
        }
        return;
    }
    let (rsa, csa) = if ta { (1, a.cols()) } else { (a.cols(), 1) };
    let (rsb, csb) = if tb { (1, b.cols()) } else { (b.cols(), 1) };
    let rsc = c.cols() as isize;
    // SAFETY: strides and dimensions above describe exactly the row-major
    // buffers of `a`, `b` and `c`; `c` does not alias either input.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_slice().as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_slice().as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_slice().as_mut_ptr(),
            rsc,
            1,
        );
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Grid, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
            tracked,
        });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A leaf whose gradient is wanted.
    pub fn param(&mut self, value: Grid) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a fixed input.
    pub fn constant(&mut self, value: Grid) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Grid {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`backward`](Self::backward) target with respect
    /// to `v`, if any flowed into it.
    pub fn grad(&self, v: Var) -> Option<&Grid> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn same_shape(&self, a: Var, b: Var, ctx: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(ctx, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        ctx: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<Var> {
        self.same_shape(a, b, ctx)?;
        let value = self.value(a).zip_map(self.value(b), f)?;
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(value, op, tracked))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        let tracked = self.tracked(a);
        self.push(value, op, tracked)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise quotient.
    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "div", |x, y| x / y, Op::Div(a, b))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.shape(a);
        let (kb, n) = self.shape(b);
        if k != kb {
            return Err(Error::shape("matmul", (k, n), (kb, n)));
        }
        let mut out = Grid::zeros(m, n);
        gemm(self.value(a), false, self.value(b), false, 0.0, &mut out);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::MatMul(a, b), tracked))
    }

    /// Adds the `1 x n` row `bias` to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (m, n) = self.shape(a);
        if self.shape(bias) != (1, n) {
            return Err(Error::shape("add_row", (1, n), self.shape(bias)));
        }
        let mut out = self.value(a).clone();
        let b = self.value(bias).as_slice().to_vec();
        for r in 0..m {
            for (o, bv) in out.row_mut(r).iter_mut().zip(&b) {
                *o += bv;
            }
        }
        let tracked = self.tracked(a) || self.tracked(bias);
        Ok(self.push(out, Op::AddRow(a, bias), tracked))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        self.unary(a, |x| k * x, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.unary(a, |x| x + c, Op::AddScalar(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, Op::Exp(a))
    }

    /// `ln(1 + e^x)`, computed without overflow.
    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, Op::Softplus(a))
    }

    /// Gradient passes through where `lo <= x <= hi`, zero elsewhere.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    /// Columns `start..start + len` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let (m, n) = self.shape(a);
        if start + len > n {
            return Err(Error::InvalidArgument(format!(
                "slice {start}..{} out of {n} columns",
                start + len
            )));
        }
        let src = self.value(a);
        let out = Grid::from_fn(m, len, |r, c| src.get(r, start + c));
        let tracked = self.tracked(a);
        Ok(self.push(out, Op::SliceCols(a, start), tracked))
    }

    /// Side-by-side concatenation of same-height arrays.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let m = parts
            .first()
            .map(|&p| self.shape(p).0)
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let mut n = 0;
        for &p in parts {
            if self.shape(p).0 != m {
                return Err(Error::shape(
                    "concat_cols",
                    (m, self.shape(p).1),
                    self.shape(p),
                ));
            }
            n += self.shape(p).1;
        }
        let mut out = Grid::zeros(m, n);
        for r in 0..m {
            let mut off = 0;
            for &p in parts {
                let src = self.value(p).row(r);
                out.row_mut(r)[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), tracked))
    }

    /// Vertical stacking of same-width arrays.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let n = parts
            .first()
            .map(|&p| self.shape(p).1)
            .ok_or_else(|| Error::InvalidArgument("concat of nothing".into()))?;
        let mut data = Vec::new();
        let mut m = 0;
        for &p in parts {
            if self.shape(p).1 != n {
                return Err(Error::shape(
                    "concat_rows",
                    (self.shape(p).0, n),
                    self.shape(p),
                ));
            }
            data.extend_from_slice(self.value(p).as_slice());
            m += self.shape(p).0;
        }
        let out = Grid::from_vec(m, n, data)?;
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::ConcatRows(parts.to_vec()), tracked))
    }

    /// `mean((a - b)^2)` as a `1 x 1` array.
    pub fn mean_square(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mean_square")?;
        let n = self.value(a).len().max(1) as f64;
        let s: f64 = self
            .value(a)
            .as_slice()
            .iter()
            .zip(self.value(b).as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(Grid::filled(1, 1, s / n), Op::MeanSquare(a, b), tracked))
    }

    fn accumulate(&mut self, v: Var, g: Grid) {
        if !self.nodes[v.0].tracked {
            return;
        }
        let node = &mut self.nodes[v.0];
        match &mut node.grad {
            Some(acc) => {
                for (a, b) in acc.as_mut_slice().iter_mut().zip(g.as_slice()) {
                    *a += b;
                }
            }
            None => node.grad = Some(g),
        }
    }

    fn accumulate_with(&mut self, v: Var, g: &Grid, f: impl Fn(f64, f64) -> f64, other: &Grid) {
        if !self.tracked(v) {
            return;
        }
        let contrib = g.zip_map(other, f).expect("gradient shape");
        self.accumulate(v, contrib);
    }

    /// Reverse sweep from the scalar `target`. Earlier gradients are cleared.
    pub fn backward(&mut self, target: Var) -> Result<()> {
        if self.shape(target) != (1, 1) {
            return Err(Error::shape("backward", (1, 1), self.shape(target)));
        }
        for n in &mut self.nodes {
            n.grad = None;
        }
        if !self.tracked(target) {
            return Ok(());
        }
        self.nodes[target.0].grad = Some(Grid::filled(1, 1, 1.0));

        for i in (0..=target.0).rev() {
            let Some(g) = self.nodes[i].grad.take() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            self.propagate(Var(i), &op, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn propagate(&mut self, out: Var, op: &Op, g: &Grid) {
        match *op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone());
                if self.tracked(b) {
                    self.accumulate(b, g.map(|x| -x));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(a).clone(), self.value(b).clone());
                self.accumulate_with(a, g, |g, y| g * y, &vb);
                self.accumulate_with(b, g, |g, x| g * x, &va);
            }
            Op::Div(a, b) => {
                let vb = self.value(b).clone();
                self.accumulate_with(a, g, |g, y| g / y, &vb);
                if self.tracked(b) {
                    let q = self.value(out).clone();
                    let gq = g.zip_map(&q, |g, q| g * q).expect("shape");
                    self.accumulate_with(b, &gq, |gq, y| -gq / y, &vb);
                }
            }
            Op::MatMul(a, b) => {
                if self.tracked(a) {
                    let mut da = Grid::zeros(self.shape(a).0, self.shape(a).1);
                    gemm(g, false, self.value(b), true, 0.0, &mut da);
                    self.accumulate(a, da);
                }
                if self.tracked(b) {
                    let mut db = Grid::zeros(self.shape(b).0, self.shape(b).1);
                    gemm(self.value(a), true, g, false, 0.0, &mut db);
                    self.accumulate(b, db);
                }
            }
            Op::AddRow(a, bias) => {
                self.accumulate(a, g.clone());
                if self.tracked(bias) {
                    let mut db = Grid::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (d, x) in db.as_mut_slice().iter_mut().zip(g.row(r)) {
                            *d += x;
                        }
                    }
                    self.accumulate(bias, db);
                }
            }
            Op::Scale(a, k) => self.accumulate(a, g.map(|x| k * x)),
            Op::AddScalar(a) => self.accumulate(a, g.clone()),
            Op::Sigmoid(a) => {
                let y = self.value(out).clone();
                self.accumulate_with(a, g, |g, s| g * s * (1.0 - s), &y);
            }
            Op::Tanh(a) => {
                let y = self.value(out).clone();
                self.accumulate_with(a, g, |g, t| g * (1.0 - t * t), &y);
            }
            Op::Relu(a) => {
                let x = self.value(a).clone();
                self.accumulate_with(a, g, |g, x| if x > 0.0 { g } else { 0.0 }, &x);
            }
            Op::Exp(a) => {
                let y = self.value(out).clone();
                self.accumulate_with(a, g, |g, y| g * y, &y);
            }
            Op::Softplus(a) => {
                let x = self.value(a).clone();
                self.accumulate_with(a, g, |g, x| g * sigmoid(x), &x);
            }
            Op::Clamp(a, lo, hi) => {
                let x = self.value(a).clone();
                self.accumulate_with(
                    a,
                    g,
                    |g, x| if (lo..=hi).contains(&x) { g } else { 0.0 },
                    &x,
                );
            }
            Op::SliceCols(a, start) => {
                if self.tracked(a) {
                    let (m, n) = self.shape(a);
                    let mut da = Grid::zeros(m, n);
                    for r in 0..m {
                        da.row_mut(r)[start..start + g.cols()].copy_from_slice(g.row(r));
                    }
                    self.accumulate(a, da);
                }
            }
            Op::ConcatCols(ref parts) => {
                let mut off = 0;
                for &p in parts {
                    let (m, n) = self.shape(p);
                    if self.tracked(p) {
                        let dp = Grid::from_fn(m, n, |r, c| g.get(r, off + c));
                        self.accumulate(p, dp);
                    }
                    off += n;
                }
            }
            Op::ConcatRows(ref parts) => {
                let mut off = 0;
                for &p in parts {
                    let (m, _) = self.shape(p);
                    if self.tracked(p) {
                        self.accumulate(p, g.slice_rows(off, m));
                    }
                    off += m;
                }
            }
            Op::MeanSquare(a, b) => {
                let scale = 2.0 * g.get(0, 0) / self.value(a).len().max(1) as f64;
                let diff = self
                    .value(a)
                    .zip_map(self.value(b), |x, y| scale * (x - y))
                    .expect("shape");
                if self.tracked(b) {
                    self.accumulate(b, diff.map(|d| -d));
                }
                self.accumulate(a, diff);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> Grid {
        Grid::from_fn(r, c, |_, _| rng.random_range(lo..hi))
    }

    /// Checks d(sum(w . f(x)))/dx against central differences, where `w`
    /// is a fixed random weighting so every output element matters.
    fn check_unary(build: impl Fn(&mut Graph, Var) -> Result<Var>, x0: Grid, rng: &mut ChaCha8Rng) {
        let (r, c) = x0.shape();
        let loss_of = |x: &Grid, w_out: &Option<Grid>| -> (f64, Option<Grid>) {
            let mut g = Graph::new();
            let xv = g.param(x.clone());
            let y = build(&mut g, xv).unwrap();
            let w = w_out
                .clone()
                .unwrap_or_else(|| Grid::filled(g.shape(y).0, g.shape(y).1, 1.0));
            let wv = g.constant(w);
            let zero = g.constant(Grid::zeros(g.shape(y).0, g.shape(y).1));
            // sum(w*y) recovered from mean_square identity would be awkward;
            // use mean_square(w*y + 1, 0) which has a nonzero gradient everywhere.
            let wy = g.mul(wv, y).unwrap();
            let shifted = g.add_scalar(wy, 1.0);
            let loss = g.mean_square(shifted, zero).unwrap();
            g.backward(loss).unwrap();
            (g.value(loss).get(0, 0), g.grad(xv).cloned())
        };
        let probe = {
            let mut g = Graph::new();
            let xv = g.param(x0.clone());
            let y = build(&mut g, xv).unwrap();
            g.shape(y)
        };
        let w = Some(random(rng, probe.0, probe.1, 0.5, 1.5));
        let (_, analytic) = loss_of(&x0, &w);
        let analytic = analytic.unwrap_or_else(|| Grid::zeros(r, c));
        let h = 1e-5;
        for i in 0..x0.len() {
            let mut xp = x0.clone();
            xp.as_mut_slice()[i] += h;
            let mut xm = x0.clone();
            xm.as_mut_slice()[i] -= h;
            let numeric = (loss_of(&xp, &w).0 - loss_of(&xm, &w).0) / (2.0 * h);
            let a = analytic.as_slice()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            assert!(rel < 1e-6, "element {i}: analytic {a} numeric {numeric}");
        }
    }

    #[test]
    fn sigmoid_slope_at_zero() {
        let mut g = Graph::new();
        let x = g.param(Grid::zeros(1, 1));
        let y = g.sigmoid(x);
        let zero = g.constant(Grid::zeros(1, 1));
        // d/dx of mean_square(y, 0) = 2 y y' = 2 * 0.5 * 0.25
        let l = g.mean_square(y, zero).unwrap();
        g.backward(l).unwrap();
        assert!((g.grad(x).unwrap().get(0, 0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn mean_square_of_self_is_flat() {
        let mut g = Graph::new();
        let a = g.param(Grid::from_vec(1, 3, vec![1.0, -2.0, 3.0]).unwrap());
        let l = g.mean_square(a, a).unwrap();
        g.backward(l).unwrap();
        assert_eq!(g.value(l).get(0, 0), 0.0);
        assert!(g.grad(a).unwrap().as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(g.grad(l).unwrap().get(0, 0), 1.0);
    }

    #[test]
    fn shape_errors_at_construction() {
        let mut g = Graph::new();
        let a = g.param(Grid::zeros(2, 3));
        let b = g.param(Grid::zeros(3, 2));
        assert!(g.add(a, b).is_err());
        assert!(g.mul(a, b).is_err());
        assert!(g.matmul(a, a).is_err());
        assert!(g.matmul(a, b).is_ok());
        assert!(g.slice_cols(a, 2, 2).is_err());
        assert!(g.concat_rows(&[a, b]).is_err());
        assert!(g.concat_cols(&[a, b]).is_err());
        assert!(g.add_row(a, b).is_err());
        let l = g.add(a, a).unwrap();
        assert!(g.backward(l).is_err());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let c = g.constant(Grid::filled(2, 2, 3.0));
        let p = g.param(Grid::filled(2, 2, 1.0));
        let y = g.mul(c, p).unwrap();
        let z = g.constant(Grid::zeros(2, 2));
        let l = g.mean_square(y, z).unwrap();
        g.backward(l).unwrap();
        assert!(g.grad(c).is_none());
        assert!(g.grad(p).is_some());
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random(&mut rng, 3, 4, -2.0, 2.0);
        let other = random(&mut rng, 3, 4, 0.5, 2.0);
        check_unary(|g, x| Ok(g.sigmoid(x)), x.clone(), &mut rng);
        check_unary(|g, x| Ok(g.tanh(x)), x.clone(), &mut rng);
        check_unary(|g, x| Ok(g.exp(x)), x.clone(), &mut rng);
        check_unary(|g, x| Ok(g.softplus(x)), x.clone(), &mut rng);
        check_unary(|g, x| Ok(g.scale(x, -1.7)), x.clone(), &mut rng);
        check_unary(|g, x| Ok(g.add_scalar(x, 0.3)), x.clone(), &mut rng);
        // keep away from the kinks at 0 and +-1
        let away = x.map(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
        let away = away.map(|v| {
            if (v.abs() - 1.0).abs() < 0.05 {
                v * 1.1
            } else {
                v
            }
        });
        check_unary(|g, x| Ok(g.relu(x)), away.clone(), &mut rng);
        check_unary(|g, x| Ok(g.clamp(x, -1.0, 1.0)), away, &mut rng);

        let o = other.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(o.clone());
                g.add(x, c)
            },
            x.clone(),
            &mut rng,
        );
        let o = other.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(o.clone());
                g.sub(c, x)
            },
            x.clone(),
            &mut rng,
        );
        let o = other.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(o.clone());
                g.mul(x, c)
            },
            x.clone(),
            &mut rng,
        );
        let o = other.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(o.clone());
                g.div(c, x)
            },
            other.map(|v| v + 1.0),
            &mut rng,
        );
        let o = other.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(o.clone());
                g.div(x, c)
            },
            x.clone(),
            &mut rng,
        );
        let o = other.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(o.clone());
                g.mean_square(x, c)
            },
            x.clone(),
            &mut rng,
        );
        // same variable on both sides
        check_unary(|g, x| g.mul(x, x), x.clone(), &mut rng);
    }

    #[test]
    fn structural_ops_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random(&mut rng, 3, 4, -1.0, 1.0);
        let w = random(&mut rng, 4, 5, -1.0, 1.0);
        let left = random(&mut rng, 2, 3, -1.0, 1.0);
        let bias = random(&mut rng, 1, 4, -1.0, 1.0);

        let wc = w.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(wc.clone());
                g.matmul(x, c)
            },
            x.clone(),
            &mut rng,
        );
        let lc = left.clone();
        check_unary(
            move |g, x| {
                let c = g.constant(lc.clone());
                g.matmul(c, x)
            },
            x.clone(),
            &mut rng,
        );
        let xc = x.clone();
        check_unary(
            move |g, b| {
                let c = g.constant(xc.clone());
                g.add_row(c, b)
            },
            bias.clone(),
            &mut rng,
        );
        check_unary(|g, x| g.slice_cols(x, 1, 2), x.clone(), &mut rng);
        check_unary(
            |g, x| {
                let s = g.slice_cols(x, 0, 2)?;
                g.concat_cols(&[x, s])
            },
            x.clone(),
            &mut rng,
        );
        check_unary(
            |g, x| {
                let t = g.tanh(x);
                g.concat_rows(&[t, x, t])
            },
            x.clone(),
            &mut rng,
        );
    }
}
