//! Assemble the penalized least-squares system and the DG system for a
//! small problem and inspect their structure.

use std::sync::Arc;

use stils::forms::{assemble_dg, assemble_penalized};
use stils::spaces::nodal_interpolate;
use stils::{build_mesh, build_space, Continuity, InflowData, ProblemSpec, Source, VelocityField};

fn main() -> stils::Result<()> {
    let spec = ProblemSpec::new(
        VelocityField::constant(1.0),
        Source::affine(-1.0, 0.5),
        InflowData::constant(1.0),
        (0.0, 1.0),
        (0.0, 1.0),
    )?;
    let mesh = Arc::new(build_mesh(4, 4, (0.0, 1.0), (0.0, 1.0))?);

    let cont = build_space(mesh.clone(), 1, Continuity::Continuous)?;
    let pen = assemble_penalized(&cont, &spec, 5.0 / 12.0)?;
    println!(
        "penalized: {} dofs, {} constrained, nnz {}, bandwidth {:?}, asymmetry {:.1e}",
        pen.dim(),
        pen.constrained.len(),
        pen.matrix.nnz(),
        pen.matrix.bandwidth(),
        pen.matrix.asymmetry()
    );

    let dg = build_space(mesh, 1, Continuity::Discontinuous)?;
    let guess = nodal_interpolate(&dg, |_, _| 1.0);
    let sys = assemble_dg(&dg, &spec, &guess)?;
    println!(
        "dg: {} dofs, nnz {}, bandwidth {:?}, asymmetry {:.1e}",
        sys.dim(),
        sys.matrix.nnz(),
        sys.matrix.bandwidth(),
        sys.matrix.asymmetry()
    );
    Ok(())
}
