use rand::Rng;

use super::{Graph, Matrix, ParamId, ParamStore, Var};
use crate::error::{Error, Result};

/// Fully connected layer `x · W + b`, `W` stored `in x out`.
#[derive(Debug, Clone, Copy)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub d_in: usize,
    pub d_out: usize,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_out: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let weight = store.add_uniform(format!("{name}.weight"), d_in, d_out, d_in, rng)?;
        let bias = store.add_uniform(format!("{name}.bias"), 1, d_out, d_in, rng)?;
        Ok(Self {
            weight,
            bias,
            d_in,
            d_out,
        })
    }

    pub fn lookup(store: &ParamStore, name: &str) -> Result<Self> {
        let weight = lookup(store, &format!("{name}.weight"))?;
        let bias = lookup(store, &format!("{name}.bias"))?;
        let (d_in, d_out) = store.value(weight).shape();
        if store.value(bias).shape() != (1, d_out) {
            return Err(Error::shape(format!("{name}.bias does not match weight")));
        }
        Ok(Self {
            weight,
            bias,
            d_in,
            d_out,
        })
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> BoundLinear {
        BoundLinear {
            weight: g.param(store, self.weight),
            bias: g.param(store, self.bias),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundLinear {
    weight: Var,
    bias: Var,
}

impl BoundLinear {
    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let xw = g.matmul(x, self.weight)?;
        g.add_row(xw, self.bias)
    }
}

/// Scaled dot-product self-attention with tanh projections.
///
/// `Q = tanh(X Wq)`, `K = tanh(X Wk)`, `V = tanh(X Wv)` and
/// `H = softmax(Q Kᵀ / sqrt(d_att)) V`, the softmax taken per query row.
#[derive(Debug, Clone, Copy)]
pub struct AttentionBlock {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub d_in: usize,
    pub d_att: usize,
}

impl AttentionBlock {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        name: &str,
        d_in: usize,
        d_att: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let wq = store.add_uniform(format!("{name}.wq"), d_in, d_att, d_in, rng)?;
        let wk = store.add_uniform(format!("{name}.wk"), d_in, d_att, d_in, rng)?;
        let wv = store.add_uniform(format!("{name}.wv"), d_in, d_att, d_in, rng)?;
        Ok(Self {
            wq,
            wk,
            wv,
            d_in,
            d_att,
        })
    }

    pub fn lookup(store: &ParamStore, name: &str) -> Result<Self> {
        let wq = lookup(store, &format!("{name}.wq"))?;
        let wk = lookup(store, &format!("{name}.wk"))?;
        let wv = lookup(store, &format!("{name}.wv"))?;
        let (d_in, d_att) = store.value(wq).shape();
        if store.value(wk).shape() != (d_in, d_att) || store.value(wv).shape() != (d_in, d_att) {
            return Err(Error::shape(format!("{name}: projection widths differ")));
        }
        Ok(Self {
            wq,
            wk,
            wv,
            d_in,
            d_att,
        })
    }

    pub fn bind(&self, g: &mut Graph, store: &ParamStore) -> BoundAttention {
        BoundAttention {
            wq: g.param(store, self.wq),
            wk: g.param(store, self.wk),
            wv: g.param(store, self.wv),
            d_in: self.d_in,
            d_att: self.d_att,
        }
    }

    /// Forward pass on plain values, for callers that do not need gradients.
    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        let mut g = Graph::new();
        let att = self.bind(&mut g, store);
        let xv = g.constant(x.clone());
        let h = att.forward(&mut g, xv)?;
        Ok(g.value(h).clone())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundAttention {
    wq: Var,
    wk: Var,
    wv: Var,
    d_in: usize,
    d_att: usize,
}

/// Projected queries, keys and values of one input.
#[derive(Debug, Clone, Copy)]
pub struct Projections {
    pub q: Var,
    pub k: Var,
    pub v: Var,
}

impl BoundAttention {
    pub fn project(&self, g: &mut Graph, x: Var) -> Result<Projections> {
        let (rows, cols) = g.shape(x);
        if rows == 0 || cols != self.d_in {
            return Err(Error::shape(format!(
                "attention input {rows}x{cols}, expected l x {} with l >= 1",
                self.d_in
            )));
        }
        let q = g.matmul(x, self.wq)?;
        let k = g.matmul(x, self.wk)?;
        let v = g.matmul(x, self.wv)?;
        Ok(Projections {
            q: g.tanh(q),
            k: g.tanh(k),
            v: g.tanh(v),
        })
    }

    pub fn attend(&self, g: &mut Graph, p: Projections) -> Result<Var> {
        let scores = g.matmul_bt(p.q, p.k)?;
        let scaled = g.scale(scores, 1.0 / (self.d_att as f64).sqrt());
        let weights = g.softmax_rows(scaled);
        g.matmul(weights, p.v)
    }

    pub fn forward(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let p = self.project(g, x)?;
        self.attend(g, p)
    }
}

/// Additive summary of a set of rows.
pub fn context(g: &mut Graph, h: Var) -> Var {
    g.sum_rows(h)
}

fn lookup(store: &ParamStore, name: &str) -> Result<ParamId> {
    store
        .id(name)
        .ok_or_else(|| Error::invalid(format!("missing parameter {name}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Matrix {
        Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap()
    }

    #[test]
    fn single_row_attends_to_itself() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::new();
        let att = AttentionBlock::new(&mut store, "att", 4, 8, &mut rng).unwrap();
        let x = random_matrix(1, 4, &mut rng);
        let h = att.forward(&store, &x).unwrap();
        let v = x.matmul(store.value(att.wv)).unwrap().map(f64::tanh);
        for (a, b) in h.data().iter().zip(v.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_input_zero_weights() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let att = AttentionBlock::new(&mut store, "att", 4, 8, &mut rng).unwrap();
        for p in store.iter_mut() {
            p.value.fill(0.0);
        }
        let h = att.forward(&store, &Matrix::zeros(5, 4)).unwrap();
        assert!(h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn wrong_width_is_shape_error() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let att = AttentionBlock::new(&mut store, "att", 4, 8, &mut rng).unwrap();
        assert!(matches!(att.forward(&store, &Matrix::zeros(2, 3)), Err(Error::Shape(_))));
        assert!(att.forward(&store, &Matrix::zeros(0, 4)).is_err());
    }

    #[test]
    fn context_sums_rows() {
        let mut g = Graph::new();
        let h = g.constant(Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap());
        let c = context(&mut g, h);
        assert_eq!(g.value(c).data(), &[4.0, 6.0]);
        let single = g.constant(Matrix::from_rows(&[[7.0, 8.0]]).unwrap());
        let c = context(&mut g, single);
        assert_eq!(g.value(c).data(), &[7.0, 8.0]);
    }

    #[test]
    fn lookup_round_trip() {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Linear::new(&mut store, "fc", 3, 2, &mut rng).unwrap();
        let l = Linear::lookup(&store, "fc").unwrap();
        assert_eq!((l.d_in, l.d_out), (3, 2));
        assert!(Linear::lookup(&store, "missing").is_err());
    }
}
