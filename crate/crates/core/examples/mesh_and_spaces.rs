//! Build a space-time mesh, split its boundary by the sign of (ũ,ñ) and
//! interpolate a function into continuous and discontinuous Q_k spaces.

use std::sync::Arc;

use stils::spaces::nodal_interpolate;
use stils::{build_mesh, build_space, classify_boundary, Continuity, NormKind, VelocityField};

fn main() -> stils::Result<()> {
    let mesh = Arc::new(build_mesh(6, 4, (0.0, 1.0), (0.0, 0.5))?);
    let u = VelocityField::constant(1.0);
    let part = classify_boundary(&mesh, &u);
    println!(
        "{} cells, {} edges, h = {:.4}, {} inflow / {} other boundary edges",
        mesh.num_cells(),
        mesh.edges().len(),
        mesh.h(),
        part.inflow.len(),
        part.other.len()
    );

    for c in [Continuity::Continuous, Continuity::Discontinuous] {
        for k in 1..=3 {
            let space = build_space(mesh.clone(), k, c)?;
            let field = nodal_interpolate(&space, |x, t| (x - t).sin());
            let err = field.l2_error(|x, t| (x - t).sin());
            println!(
                "{c:?} Q{k}: {:4} dofs, interpolation L2 error {err:.2e}, |S c| = {:.2e}",
                space.ndofs(),
                field.norm(NormKind::Energy1u, &u).unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}
