//! Generates the distributed ridge-regression instance, prints its
//! constants and checks the closed-form minimizer against the gradient.
//!
//! ```text
//! cargo run --example ridge_oracle
//! ```

use rcpp::objectives::RidgeSettings;
use rcpp::{DecentralizedObjective, RidgeProblem};

fn main() -> rcpp::Result<()> {
    let pb = RidgeProblem::generate(&RidgeSettings::default())?;
    println!("n = {}, p = {}, rho = {}", pb.agents(), pb.dim(), pb.rho);
    println!("L = {:.4}, mu = {:.4}, f* = {:.6}", pb.smoothness, pb.pl_constant, pb.optimal_value);
    let xs: Vec<_> = pb.minimizer.iter().map(|v| format!("{v:.4}")).collect();
    println!("x* = [{}]", xs.join(", "));
    let g = pb.gradient(pb.minimizer.as_slice());
    println!("|grad f(x*)| = {:.3e}", g.norm());

    let zero = vec![0.0; pb.dim()];
    println!("f(0) - f* = {:.6}", pb.excess(&zero));

    let mut buf = Vec::new();
    pb.write_csv(&mut buf)?;
    let back = RidgeProblem::read_csv(buf.as_slice())?;
    println!("CSV round trip exact: {}", back.features == pb.features && back.observations == pb.observations);
    Ok(())
}
