//! Angular distance and its analytic gradient next to a central difference.

use textmetric::geometry::{angular_distance, angular_gradient, cosine_similarity, DistanceKind};

fn main() -> textmetric::Result<()> {
    let u = [0.3, -1.2, 0.8, 0.05];
    let v = [1.1, 0.4, -0.2, 0.7];
    println!("cosine    {:.6}", cosine_similarity(&u, &v)?);
    println!("angular   {:.6}", angular_distance(&u, &v)?);
    println!("half-cos  {:.6}", DistanceKind::HalfCosine.distance(&u, &v)?);

    let analytic = angular_gradient(&u, &v)?;
    let h = 1e-6;
    for (i, g) in analytic.iter().enumerate() {
        let (mut up, mut down) = (u, u);
        up[i] += h;
        down[i] -= h;
        let numeric = (angular_distance(&up, &v)? - angular_distance(&down, &v)?) / (2.0 * h);
        println!("d/du[{i}]  analytic {g:+.8}  numeric {numeric:+.8}");
    }
    Ok(())
}
