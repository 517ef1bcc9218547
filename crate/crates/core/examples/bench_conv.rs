use cali_core::numkit::{Graph, Tensor};
use cali_core::numkit::rng::Rng;
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(0);
    let x = Tensor::new(vec![16, 32, 32], (0..16*32*32).map(|_| rng.normal()).collect()).unwrap();
    let w = Tensor::new(vec![16, 16, 3, 3], (0..16*16*9).map(|_| rng.normal()*0.1).collect()).unwrap();
    let b = Tensor::zeros(vec![16]);

    // forward+backward of a 3-conv stack, like the extractor
    let iters = 300;
    let t0 = Instant::now();
    let mut sink = 0.0;
    for _ in 0..iters {
        let mut g = Graph::new();
        let xi = g.constant(&x);
        let wi = g.leaf(&w);
        let bi = g.leaf(&b);
        let c1 = g.conv2d(xi, wi, 1).unwrap();
        let c1b = g.add_bias(c1, bi).unwrap();
        let a1 = g.leaky_relu(c1b, 0.2);
        let c2 = g.conv2d(a1, wi, 1).unwrap();
        let a2 = g.leaky_relu(c2, 0.2);
        let c3 = g.conv2d(a2, wi, 1).unwrap();
        let a3 = g.leaky_relu(c3, 0.2);
        let s = g.sum(a3);
        g.backward(s).unwrap();
        sink += g.scalar_value(s);
    }
    let dt = t0.elapsed().as_secs_f64();
    // flops: 3 convs fwd (2*16*16*9*1024 each) + backward ~2x
    let flops_per_iter = 3.0 * (2.0 * 16.0*16.0*9.0*1024.0) * 3.0;
    println!("sink {sink:.3}  {:.1} ms/iter  {:.2} GFLOP/s", dt/iters as f64*1e3, flops_per_iter*iters as f64/dt/1e9);
}
