//! Central finite-difference checks of tape gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Graph, Result, Tensor, Value};

const H: f64 = 1e-5;

/// A graph builder over leaf inputs.
pub type Builder = Box<dyn Fn(&mut Graph, &[Value]) -> Result<Value> + Send + Sync>;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("shape")
}

/// Reduces the output of `f` to a scalar with a fixed random weighting and
/// returns the norm-wise relative error between the analytic gradient and
/// central differences over every input entry.
pub fn relative_error<F>(inputs: &[Tensor], f: F, seed: u64) -> f64
where
    F: Fn(&mut Graph, &[Value]) -> Result<Value>,
{
    let eval = |ts: &[Tensor], grads: bool| -> (f64, Vec<Tensor>) {
        let mut g = Graph::new();
        let vs: Vec<Value> = ts.iter().map(|t| g.leaf(t.clone(), true)).collect();
        let out = f(&mut g, &vs).expect("forward");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = g.value(out).shape().to_vec();
        let len = g.value(out).len();
        let w = Tensor::new(shape, (0..len).map(|_| rng.gen_range(0.5..1.5)).collect()).expect("shape");
        let w = g.constant(w);
        let weighted = g.mul(out, w).expect("mul");
        let loss = g.sum_all(weighted).expect("sum");
        let value = g.value(loss).item();
        if !grads {
            return (value, Vec::new());
        }
        g.backward(loss).expect("backward");
        let grads = vs
            .iter()
            .map(|&v| g.grad(v).cloned().unwrap_or_else(|| Tensor::zeros(g.value(v).shape())))
            .collect();
        (value, grads)
    };
    let (_, analytic) = eval(inputs, true);
    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    for (k, t) in inputs.iter().enumerate() {
        for i in 0..t.len() {
            let mut plus = inputs.to_vec();
            plus[k].data_mut()[i] += H;
            let mut minus = inputs.to_vec();
            minus[k].data_mut()[i] -= H;
            let numeric = (eval(&plus, false).0 - eval(&minus, false).0) / (2.0 * H);
            let a = analytic[k].data()[i];
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
        }
    }
    diff.sqrt() / norm_a.sqrt().max(norm_n.sqrt()).max(1e-8)
}

/// Largest relative error over `points` random input draws.
pub fn worst_error<F>(shapes: &[(usize, usize)], points: u64, f: F) -> f64
where
    F: Fn(&mut Graph, &[Value]) -> Result<Value>,
{
    (0..points)
        .map(|point| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + point);
            let inputs: Vec<Tensor> = shapes.iter().map(|&(r, c)| random_matrix(&mut rng, r, c)).collect();
            relative_error(&inputs, &f, point)
        })
        .fold(0.0, f64::max)
}

pub struct OpCase {
    pub name: &'static str,
    pub shapes: Vec<(usize, usize)>,
    pub build: Builder,
}

fn case<F>(name: &'static str, shapes: &[(usize, usize)], f: F) -> OpCase
where
    F: Fn(&mut Graph, &[Value]) -> Result<Value> + Send + Sync + 'static,
{
    OpCase {
        name,
        shapes: shapes.to_vec(),
        build: Box::new(f),
    }
}

/// One case per differentiable op.
pub fn op_cases() -> Vec<OpCase> {
    let softmax_mask: Vec<bool> = (0..15).map(|i| i % 3 != 1 && i != 5).collect();
    vec![
        case("matmul", &[(4, 5), (5, 3)], |g, v| g.matmul(v[0], v[1])),
        case("transpose", &[(3, 4)], |g, v| g.transpose(v[0])),
        case("add", &[(3, 4), (3, 4)], |g, v| g.add(v[0], v[1])),
        case("sub", &[(3, 4), (3, 4)], |g, v| g.sub(v[0], v[1])),
        case("mul", &[(3, 4), (3, 4)], |g, v| g.mul(v[0], v[1])),
        case("add_row", &[(3, 4), (1, 4)], |g, v| g.add_row(v[0], v[1])),
        case("scale", &[(3, 4)], |g, v| g.scale(v[0], -2.5)),
        case("add_scalar", &[(3, 4)], |g, v| g.add_scalar(v[0], 0.7)),
        case("relu", &[(3, 4)], |g, v| g.relu(v[0])),
        case("sigmoid", &[(3, 4)], |g, v| g.sigmoid(v[0])),
        case("exp", &[(3, 4)], |g, v| g.exp(v[0])),
        case("log", &[(3, 4)], |g, v| {
            let s = g.add_scalar(v[0], 3.0)?;
            g.log(s)
        }),
        case("tanh", &[(3, 4)], |g, v| g.tanh(v[0])),
        case("clamp", &[(3, 4)], |g, v| g.clamp(v[0], -0.5, 0.5)),
        case("layer_norm", &[(3, 6), (1, 6), (1, 6)], |g, v| g.layer_norm(v[0], v[1], v[2], 1e-5)),
        case("concat_cols", &[(3, 2), (3, 4)], |g, v| g.concat_cols(&[v[0], v[1], v[0]])),
        case("gather_rows", &[(4, 3)], |g, v| g.gather_rows(v[0], &[3, 0, 3, 1])),
        case("softmax_rows", &[(3, 5)], |g, v| g.softmax_rows(v[0])),
        case("masked_softmax_rows", &[(3, 5)], move |g, v| g.masked_softmax_rows(v[0], &softmax_mask)),
        case("sum_all", &[(4, 3)], |g, v| g.sum_all(v[0])),
        case("mean_all", &[(4, 3)], |g, v| g.mean_all(v[0])),
        case("mean_rows", &[(4, 3)], |g, v| g.mean_rows(v[0], &[true, false, true, true])),
        case("additive_scores", &[(3, 4), (5, 4), (1, 4)], |g, v| g.additive_scores(v[0], v[1], v[2])),
    ]
}
