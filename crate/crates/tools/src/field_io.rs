//! Realization fields as CSV grids: `ny` rows of `nx` comma-separated values,
//! row 0 at `y = 0`, preceded by `# key=value` lines describing the grid.

use std::io::Write;

use ensemble_cma::problems::RealizationField;

use crate::{fmt_f64, Result};

pub fn write_field<W: Write>(mut out: W, field: &RealizationField) -> Result<()> {
    writeln!(out, "# nx={}", field.nx)?;
    writeln!(out, "# ny={}", field.ny)?;
    writeln!(out, "# cell_size={}", fmt_f64(field.cell_size))?;
    writeln!(out, "# realization_id={}", field.realization_id)?;
    for iy in 0..field.ny {
        let row: Vec<String> = (0..field.nx).map(|ix| fmt_f64(field.at(ix, iy))).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}
