//! The penalized objective is not differentiable where parameters are zero.
//! Its steepest descent direction still exists and three cases cover it:
//! nonzero entries, zero entries in a nonzero feature row, and zero rows.
//!
//! cargo run --example descent_direction

use lsplm::{descent_direction, directional_derivative, orthant_mask, ParamMatrix};

fn main() -> lsplm::Result<()> {
    // 3 features, 1 region: columns are (divider, fitter)
    let theta = ParamMatrix::from_vec(3, 1, vec![0.8, -0.5, 0.0, 0.3, 0.0, 0.0])?;
    let grad = ParamMatrix::from_vec(3, 1, vec![0.2, 0.4, -1.5, 0.1, 0.6, -0.9])?;
    let (beta, lambda) = (0.5, 0.3);

    let d = descent_direction(&theta, &grad, beta, lambda);
    let mask = orthant_mask(&theta, &d);
    for i in 0..3 {
        println!(
            "row {i}: theta {:?}  grad {:?}  d [{:.4}, {:.4}]  orthant {:?}",
            theta.row(i),
            grad.row(i),
            d.get(i, 0),
            d.get(i, 1),
            &mask.as_slice()[2 * i..2 * i + 2]
        );
    }
    let slope = directional_derivative(&theta, &d, &grad, beta, lambda);
    println!("f'(theta; d) = {slope:.6} = -|d|^2 = {:.6}", -d.dot(&d));

    // row 2 stays zero: its shrunken gradient is too small to pay the group penalty
    let strong = descent_direction(&theta, &grad, beta, 2.0);
    println!("with lambda=2 row 2 of d is {:?}", strong.row(2));
    Ok(())
}
