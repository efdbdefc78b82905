//! Kernel families, their gradients, and the covariance matrices they build.
//!
//! ```text
//! cargo run --example kernels
//! ```

use sparse_sde::kernels::{cov_matrix, default_bounds, KernelFamily, KernelSpec};
use sparse_sde::numerics::factor_psd;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let specs = [
        KernelSpec::new(KernelFamily::SeConst, vec![1.0, 4.0], 25.0, 0.0)?,
        KernelSpec::new(KernelFamily::SumSe, vec![2.0, 4.0, 0.25], 25.0, 0.0)?,
        KernelSpec::new(KernelFamily::RationalQuadratic, vec![0.5, 4.0], 25.0, 0.0)?,
    ];
    let xs = [0.0, 0.25, 0.5, 1.0, 2.0];
    for spec in &specs {
        let row: Vec<String> = xs.iter().map(|&x| format!("{:.4}", spec.eval(0.0, x))).collect();
        let grad = spec.eval_grad(0.0, 0.5);
        println!("{:18} k(0, x) = [{}]", spec.family.to_string(), row.join(", "));
        println!("{:18} dk/dtheta at (0, 0.5) = {:?}, length scale {:.3}", "", &grad.d_theta[..spec.family.n_params()], spec.length_scale());
        let k = cov_matrix(spec, &xs, &xs, true);
        let logdet = factor_psd(&k).map(|f| f.logdet());
        println!("{:18} log det K = {:?}, bounds for range 4: {:?}", "", logdet, default_bounds(spec, 4.0)?);
    }
    Ok(())
}
