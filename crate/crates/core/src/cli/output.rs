//! File emission: legacy ASCII VTK, the study CSV and a gnuplot script.
//! All floats are printed with 17 significant digits so identical runs
//! produce byte-identical files.

use crate::mesh::Mesh;
use std::io::Write;
use std::path::Path;

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_vtk_header<W: Write>(w: &mut W, title: &str, mesh: &Mesh) -> std::io::Result<()> {
    writeln!(w, "# vtk DataFile Version 2.0")?;
    writeln!(w, "{title}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", fmt(p[0]), fmt(p[1]))?;
    }
    let nt = mesh.n_triangles();
    writeln!(w, "CELLS {} {}", nt, 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    Ok(())
}

/// Displacement file: one scalar per vertex.
pub fn write_vtk_point_scalar(
    path: &Path,
    mesh: &Mesh,
    name: &str,
    values: &[f64],
) -> std::io::Result<()> {
    assert_eq!(values.len(), mesh.n_vertices());
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk_header(&mut w, name, mesh)?;
    writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    for v in values {
        writeln!(w, "{}", fmt(*v))?;
    }
    Ok(())
}

/// Cell fields: multiplier and error indicator per element.
pub fn write_vtk_cell_scalars(
    path: &Path,
    mesh: &Mesh,
    fields: &[(&str, &[f64])],
) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_vtk_header(&mut w, "cell fields", mesh)?;
    writeln!(w, "CELL_DATA {}", mesh.n_triangles())?;
    for (name, values) in fields {
        assert_eq!(values.len(), mesh.n_triangles());
        writeln!(w, "SCALARS {name} double 1")?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for v in *values {
            writeln!(w, "{}", fmt(*v))?;
        }
    }
    Ok(())
}

pub const CSV_HEADER: &str = "level,h,ndof_u,ndof_lambda,N,ring_vertices,err_u_h1,err_lambda_neg,eta,S,rate_u,rate_lambda,slope_N,iters";

/// One study row; rate cells are empty when undefined.
#[derive(Clone, Debug, Default)]
pub struct CsvRow {
    pub level: usize,
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_lambda: usize,
    pub ring_vertices: usize,
    pub err_u_h1: f64,
    pub err_lambda_neg: f64,
    pub eta: f64,
    pub s_term: f64,
    pub rate_u: Option<f64>,
    pub rate_lambda: Option<f64>,
    pub slope_n: Option<f64>,
    pub iters: usize,
}

pub fn write_csv(path: &Path, rows: &[CsvRow]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    let opt = |v: Option<f64>| v.map(fmt).unwrap_or_default();
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            fmt(r.h),
            r.ndof_u,
            r.ndof_lambda,
            r.ndof_u + r.ndof_lambda,
            r.ring_vertices,
            fmt(r.err_u_h1),
            fmt(r.err_lambda_neg),
            fmt(r.eta),
            fmt(r.s_term),
            opt(r.rate_u),
            opt(r.rate_lambda),
            opt(r.slope_n),
            r.iters
        )?;
    }
    Ok(())
}

/// gnuplot script plotting the errors against h and against the dof count.
pub fn write_gnuplot(path: &Path, csv_name: &str) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "set datafile separator \",\"")?;
    writeln!(w, "set logscale xy")?;
    writeln!(w, "set key left bottom")?;
    writeln!(w, "set terminal svg size 900,600")?;
    writeln!(w, "set output \"error_vs_h.svg\"")?;
    writeln!(w, "set xlabel \"h\"")?;
    writeln!(w, "set ylabel \"error\"")?;
    writeln!(
        w,
        "plot \"{csv_name}\" using 2:7 with linespoints title \"H1 error of u\", \\"
    )?;
    writeln!(
        w,
        "     \"{csv_name}\" using 2:8 with linespoints title \"discrete negative-norm error of lambda\", \\"
    )?;
    writeln!(w, "     \"{csv_name}\" using 2:9 with linespoints title \"eta\"")?;
    writeln!(w, "set output \"error_vs_dofs.svg\"")?;
    writeln!(w, "set xlabel \"degrees of freedom\"")?;
    writeln!(
        w,
        "plot \"{csv_name}\" using 5:7 with linespoints title \"H1 error of u\", \\"
    )?;
    writeln!(
        w,
        "     \"{csv_name}\" using 5:9 with linespoints title \"eta\""
    )?;
    Ok(())
}
