//! Box and polytope arithmetic, then the maximal robust positive invariant
//! set of the LQR-controlled double integrator.
//!
//! Run with `cargo run --release --example geometry`.

use armpc::geometry::Hyperbox;
use armpc::invariant::{is_rpi, max_rpi};
use armpc::optimization::dlqr;
use nalgebra::{DMatrix, DVector};

fn main() -> armpc::Result<()> {
    let a = Hyperbox::new(DVector::from_row_slice(&[0.5, -0.5]), DVector::from_row_slice(&[1.0, 0.5]))?;
    let b = Hyperbox::symmetric(DVector::from_row_slice(&[0.2, 0.1]))?;
    let sum = a.minkowski_sum(&b)?;
    println!("A + B: lower {:?} upper {:?}", sum.lower().as_slice(), sum.upper().as_slice());
    println!("(A + B) - B equals A: {}", sum.pontryagin_diff(&b)? == a);

    let x = Hyperbox::symmetric(DVector::from_row_slice(&[4.0, 3.0]))?.to_polytope();
    let tight = x.pontryagin_diff(&b)?;
    let (c, r) = tight.chebyshev_center()?;
    println!("X - B has {} vertices, Chebyshev centre {:?}, radius {r:.3}", tight.vertices()?.len(), c.as_slice());

    let am = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
    let bm = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
    let lqr = dlqr(&am, &bm, &DMatrix::identity(2, 2), &DMatrix::identity(1, 1))?;
    let a_cl = &am - &bm * &lqr.k;
    let u = Hyperbox::symmetric(DVector::from_element(1, 2.0))?.to_polytope();
    for w in [0.0, 0.05, 0.1, 0.2] {
        let d = Hyperbox::symmetric(DVector::from_element(2, w))?;
        match max_rpi(&a_cl, &d, &x, &u, &lqr.k)? {
            Some(o) => {
                let o_set = o.set.remove_redundant()?;
                println!(
                    "|d| <= {w:.2}: O has {} facets after {} iterations, invariant {}",
                    o_set.nrows(),
                    o.iterations,
                    is_rpi(&o_set, &a_cl, &d, &x, &u, &lqr.k)
                );
            }
            None => println!("|d| <= {w:.2}: O is empty"),
        }
    }
    Ok(())
}
