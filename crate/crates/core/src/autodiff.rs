//! A small reverse-mode tape over row-major 2D arrays.
//!
//! Parameters live outside the tape and are referenced by index, so building
//! a graph never copies weights. Every primitive is smooth, which keeps
//! finite-difference checks meaningful.

use ndarray::{concatenate, s, Array2, Axis, Zip};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Param(usize),
    Node(usize),
}

#[derive(Debug, Clone)]
enum Op {
    Input,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Gelu(Var),
    Tanh(Var),
    Softplus(Var),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LayerNorm { x: Var, inv_std: Vec<f64> },
    Transpose(Var),
    ConcatCols(Var, Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    Gather(Var, Vec<usize>),
    Reshape(Var),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [Array2<f64>],
    nodes: Vec<Node>,
}

const GELU_C: f64 = 0.797_884_560_802_865_4;
const GELU_A: f64 = 0.044_715;
pub const LAYERNORM_EPS: f64 = 1e-5;

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let th = (GELU_C * (x + GELU_A * x * x * x)).tanh();
    0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}

/// Parameter gradients produced by [`Tape::backward`]; `None` where a
/// parameter did not influence the seeded outputs.
pub struct Grads {
    pub params: Vec<Option<Array2<f64>>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Array2<f64>]) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match v {
            Var::Param(i) => &self.params[i],
            Var::Node(i) => &self.nodes[i].value,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var::Node(self.nodes.len() - 1)
    }

    /// A constant with no gradient path.
    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) * self.value(b);
        self.push(v, Op::Mul(a, b))
    }

    /// Adds a `1 x n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) + self.value(row);
        self.push(v, Op::AddRow(a, row))
    }

    /// Multiplies every row of `a` elementwise by a `1 x n` row.
    pub fn mul_row(&mut self, a: Var, row: Var) -> Var {
        let v = self.value(a) * self.value(row);
        self.push(v, Op::MulRow(a, row))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) * c;
        self.push(v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let v = self.value(a) + c;
        self.push(v, Op::AddScalar(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(gelu);
        self.push(v, Op::Gelu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(softplus);
        self.push(v, Op::Softplus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.value(a).mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for mut row in v.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - m).exp());
            let z = row.sum();
            row /= z;
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    /// Normalizes each row to zero mean and unit variance.
    pub fn layer_norm(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let n = x.ncols() as f64;
        let mut v = x.clone();
        let mut inv_std = Vec::with_capacity(x.nrows());
        for mut row in v.rows_mut() {
            let mean = row.sum() / n;
            row -= mean;
            let var = row.iter().map(|d| d * d).sum::<f64>() / n;
            let is = 1.0 / (var + LAYERNORM_EPS).sqrt();
            row *= is;
            inv_std.push(is);
        }
        self.push(v, Op::LayerNorm { x: a, inv_std })
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.value(a).t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let v = concatenate(Axis(1), &[self.value(a).view(), self.value(b).view()])
            .expect("row counts agree");
        self.push(v, Op::ConcatCols(a, b))
    }

    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![start..end, ..]).to_owned();
        self.push(v, Op::SliceRows(a, start))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.value(a).slice(s![.., start..end]).to_owned();
        self.push(v, Op::SliceCols(a, start))
    }

    /// Row lookup, as for an embedding table.
    pub fn gather_rows(&mut self, a: Var, idx: Vec<usize>) -> Var {
        let src = self.value(a);
        let mut v = Array2::zeros((idx.len(), src.ncols()));
        for (mut row, &i) in v.rows_mut().into_iter().zip(&idx) {
            row.assign(&src.row(i));
        }
        self.push(v, Op::Gather(a, idx))
    }

    /// Row-major reshape.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let x = self.value(a);
        let flat: Vec<f64> = x.iter().copied().collect();
        let v = Array2::from_shape_vec((rows, cols), flat).expect("reshape preserves size");
        self.push(v, Op::Reshape(a))
    }

    /// Back-propagates the given output adjoints through the whole tape.
    pub fn backward(&self, seeds: Vec<(Var, Array2<f64>)>) -> Grads {
        let mut g: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        let mut pg: Vec<Option<Array2<f64>>> = vec![None; self.params.len()];
        fn send(
            g: &mut [Option<Array2<f64>>],
            pg: &mut [Option<Array2<f64>>],
            v: Var,
            d: Array2<f64>,
        ) {
            match v {
                Var::Node(i) => accumulate(&mut g[i], d),
                Var::Param(i) => accumulate(&mut pg[i], d),
            }
        }
        for (v, d) in seeds {
            send(&mut g, &mut pg, v, d);
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(dy) = g[i].take() else { continue };
            let y = &self.nodes[i].value;
            match &self.nodes[i].op {
                Op::Input => {}
                Op::MatMul(a, b) => {
                    let da = dy.dot(&self.value(*b).t());
                    let db = self.value(*a).t().dot(&dy);
                    send(&mut g, &mut pg, *a, da);
                    send(&mut g, &mut pg, *b, db);
                }
                Op::Add(a, b) => {
                    send(&mut g, &mut pg, *a, dy.clone());
                    send(&mut g, &mut pg, *b, dy);
                }
                Op::Mul(a, b) => {
                    let da = &dy * self.value(*b);
                    let db = &dy * self.value(*a);
                    send(&mut g, &mut pg, *a, da);
                    send(&mut g, &mut pg, *b, db);
                }
                Op::AddRow(a, row) => {
                    let dr = dy.sum_axis(Axis(0)).insert_axis(Axis(0));
                    send(&mut g, &mut pg, *a, dy);
                    send(&mut g, &mut pg, *row, dr);
                }
                Op::MulRow(a, row) => {
                    let dr = (&dy * self.value(*a))
                        .sum_axis(Axis(0))
                        .insert_axis(Axis(0));
                    let da = &dy * self.value(*row);
                    send(&mut g, &mut pg, *a, da);
                    send(&mut g, &mut pg, *row, dr);
                }
                Op::Scale(a, c) => send(&mut g, &mut pg, *a, dy * *c),
                Op::AddScalar(a) => send(&mut g, &mut pg, *a, dy),
                Op::Gelu(a) => {
                    let mut d = dy;
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| *d *= gelu_grad(x));
                    send(&mut g, &mut pg, *a, d);
                }
                Op::Tanh(a) => {
                    let mut d = dy;
                    Zip::from(&mut d).and(y).for_each(|d, &t| *d *= 1.0 - t * t);
                    send(&mut g, &mut pg, *a, d);
                }
                Op::Softplus(a) => {
                    let mut d = dy;
                    Zip::from(&mut d)
                        .and(self.value(*a))
                        .for_each(|d, &x| *d *= sigmoid(x));
                    send(&mut g, &mut pg, *a, d);
                }
                Op::Sigmoid(a) => {
                    let mut d = dy;
                    Zip::from(&mut d)
                        .and(y)
                        .for_each(|d, &s| *d *= s * (1.0 - s));
                    send(&mut g, &mut pg, *a, d);
                }
                Op::SoftmaxRows(a) => {
                    let mut d = &dy * y;
                    for (mut row, yr) in d.rows_mut().into_iter().zip(y.rows()) {
                        let dot = row.sum();
                        Zip::from(&mut row).and(&yr).for_each(|r, &p| *r -= p * dot);
                    }
                    send(&mut g, &mut pg, *a, d);
                }
                Op::LayerNorm { x, inv_std } => {
                    let n = y.ncols() as f64;
                    let mut d = dy;
                    for ((mut row, yr), &is) in d.rows_mut().into_iter().zip(y.rows()).zip(inv_std)
                    {
                        let mean_d = row.sum() / n;
                        let mean_dy = row.iter().zip(&yr).map(|(a, b)| a * b).sum::<f64>() / n;
                        Zip::from(&mut row)
                            .and(&yr)
                            .for_each(|r, &xh| *r = is * (*r - mean_d - xh * mean_dy));
                    }
                    send(&mut g, &mut pg, *x, d);
                }
                Op::Transpose(a) => send(&mut g, &mut pg, *a, dy.t().to_owned()),
                Op::ConcatCols(a, b) => {
                    let split = self.value(*a).ncols();
                    let da = dy.slice(s![.., ..split]).to_owned();
                    let db = dy.slice(s![.., split..]).to_owned();
                    send(&mut g, &mut pg, *a, da);
                    send(&mut g, &mut pg, *b, db);
                }
                Op::SliceRows(a, start) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    d.slice_mut(s![*start..*start + dy.nrows(), ..]).assign(&dy);
                    send(&mut g, &mut pg, *a, d);
                }
                Op::SliceCols(a, start) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    d.slice_mut(s![.., *start..*start + dy.ncols()]).assign(&dy);
                    send(&mut g, &mut pg, *a, d);
                }
                Op::Gather(a, idx) => {
                    let mut d = Array2::zeros(self.value(*a).raw_dim());
                    for (row, &i) in dy.rows().into_iter().zip(idx) {
                        let mut target = d.row_mut(i);
                        target += &row;
                    }
                    send(&mut g, &mut pg, *a, d);
                }
                Op::Reshape(a) => {
                    let shape = self.value(*a).raw_dim();
                    let flat: Vec<f64> = dy.iter().copied().collect();
                    send(
                        &mut g,
                        &mut pg,
                        *a,
                        Array2::from_shape_vec(shape, flat).expect("same size"),
                    );
                }
            }
        }
        Grads { params: pg }
    }
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    /// Central-difference check of `sum(w * f(params))` for a random weight `w`.
    fn check(params: Vec<Array2<f64>>, f: impl Fn(&mut Tape) -> Var) {
        let weight = |t: &Tape, out: Var| {
            let v = t.value(out);
            Array2::from_shape_fn(v.raw_dim(), |(i, j)| {
                ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.6
            })
        };
        let eval = |ps: &[Array2<f64>]| {
            let mut t = Tape::new(ps);
            let out = f(&mut t);
            (t.value(out) * &weight(&t, out)).sum()
        };
        let mut tape = Tape::new(&params);
        let out = f(&mut tape);
        let w = weight(&tape, out);
        let grads = tape.backward(vec![(out, w)]);
        let h = 1e-6;
        for p in 0..params.len() {
            let analytic = grads.params[p]
                .clone()
                .unwrap_or_else(|| Array2::zeros(params[p].raw_dim()));
            for idx in 0..params[p].len() {
                let (r, c) = (idx / params[p].ncols(), idx % params[p].ncols());
                let mut plus = params.clone();
                plus[p][[r, c]] += h;
                let mut minus = params.clone();
                minus[p][[r, c]] -= h;
                let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                let a = analytic[[r, c]];
                assert!(
                    (fd - a).abs() <= 1e-6 * (1.0 + fd.abs().max(a.abs())),
                    "param {p} [{r},{c}]: fd {fd} vs analytic {a}"
                );
            }
        }
    }

    fn a() -> Array2<f64> {
        array![[0.3, -1.2, 0.5], [0.9, 0.1, -0.4]]
    }

    fn b() -> Array2<f64> {
        array![[0.2, 0.7], [-0.5, 0.3], [1.1, -0.8]]
    }

    #[test]
    fn matmul_and_activations() {
        check(vec![a(), b()], |t| {
            let m = t.matmul(Var::Param(0), Var::Param(1));
            let g = t.gelu(m);
            let s = t.softplus(g);
            t.tanh(s)
        });
        check(vec![a()], |t| {
            let s = t.sigmoid(Var::Param(0));
            let sc = t.scale(s, 2.5);
            t.add_scalar(sc, 1.0)
        });
    }

    #[test]
    fn broadcasts_and_products() {
        let row = array![[0.4, -0.3, 1.5]];
        check(vec![a(), row.clone()], |t| {
            let m = t.mul_row(Var::Param(0), Var::Param(1));
            let ad = t.add_row(m, Var::Param(1));
            t.mul(ad, Var::Param(0))
        });
        check(vec![a(), a() * 0.5], |t| {
            t.add(Var::Param(0), Var::Param(1))
        });
    }

    #[test]
    fn normalizations() {
        check(vec![a()], |t| t.softmax_rows(Var::Param(0)));
        check(vec![a()], |t| t.layer_norm(Var::Param(0)));
    }

    #[test]
    fn structural_ops() {
        check(vec![a(), b()], |t| {
            let bt = t.transpose(Var::Param(1));
            let c = t.concat_cols(Var::Param(0), bt);
            let r = t.slice_rows(c, 1, 2);
            let s = t.slice_cols(c, 2, 5);
            let g = t.gather_rows(s, vec![1, 0, 1]);
            let rs = t.reshape(g, 1, 9);
            let rr = t.reshape(r, 1, 6);
            let joined = t.concat_cols(rs, rr);
            t.tanh(joined)
        });
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
    }

    #[test]
    fn zero_seed_gives_zero_gradient() {
        let params = vec![a(), b()];
        let mut t = Tape::new(&params);
        let m = t.matmul(Var::Param(0), Var::Param(1));
        let grads = t.backward(vec![(m, Array2::zeros((2, 2)))]);
        assert!(grads
            .params
            .iter()
            .flatten()
            .all(|g| g.iter().all(|&x| x == 0.0)));
    }
}
