//! Extended-XYZ reading and writing.
//!
//! Each frame is: an atom count line; a comment line of space-separated
//! `key=value` pairs (`energy=<eV>` is recognised, everything else is kept
//! verbatim and ignored); then one line per atom,
//! `species x y z [fx fy fz]`, with integer species indices.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::structure::{LabeledStructure, Structure, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub structure: Structure,
    pub energy: Option<f64>,
    pub forces: Option<Vec<Vec3>>,
}

impl Frame {
    pub fn labeled(&self) -> Option<LabeledStructure> {
        let energy = self.energy?;
        let forces = self.forces.clone()?;
        LabeledStructure::new(self.structure.clone(), energy, forces).ok()
    }
}

fn parse_f64(tok: &str, line: usize, what: &str) -> Result<f64> {
    tok.parse::<f64>()
        .map_err(|_| Error::Parse { line, msg: format!("invalid {what} '{tok}'") })
}

pub fn parse_xyz(text: &str) -> Result<Vec<Frame>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut frames = Vec::new();
    let mut at = 0;
    while at < lines.len() {
        if lines[at].trim().is_empty() {
            at += 1;
            continue;
        }
        let count_line = at + 1;
        let n: usize = lines[at].trim().parse().map_err(|_| Error::Parse {
            line: count_line,
            msg: format!("expected atom count, found '{}'", lines[at].trim()),
        })?;
        if n == 0 {
            return Err(Error::Parse { line: count_line, msg: "frame has zero atoms".into() });
        }
        let comment = lines.get(at + 1).ok_or(Error::Parse {
            line: count_line + 1,
            msg: "missing comment line".into(),
        })?;
        let mut energy = None;
        for kv in comment.split_whitespace() {
            if let Some((k, v)) = kv.split_once('=') {
                if k.eq_ignore_ascii_case("energy") {
                    energy = Some(parse_f64(v, count_line + 1, "energy")?);
                }
            }
        }
        let mut species = Vec::with_capacity(n);
        let mut positions = Vec::with_capacity(n);
        let mut forces = Vec::with_capacity(n);
        let mut with_forces = None;
        for a in 0..n {
            let line_no = at + 3 + a;
            let line = lines.get(at + 2 + a).ok_or(Error::Parse {
                line: line_no,
                msg: format!("expected {n} atom lines, file ended after {a}"),
            })?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            let has_f = match toks.len() {
                4 => false,
                7 => true,
                k => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected 4 or 7 columns, found {k}"),
                    })
                }
            };
            if *with_forces.get_or_insert(has_f) != has_f {
                return Err(Error::Parse { line: line_no, msg: "inconsistent force columns".into() });
            }
            let z: usize = toks[0].parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("invalid species index '{}'", toks[0]),
            })?;
            species.push(z);
            positions.push([
                parse_f64(toks[1], line_no, "coordinate")?,
                parse_f64(toks[2], line_no, "coordinate")?,
                parse_f64(toks[3], line_no, "coordinate")?,
            ]);
            if has_f {
                forces.push([
                    parse_f64(toks[4], line_no, "force")?,
                    parse_f64(toks[5], line_no, "force")?,
                    parse_f64(toks[6], line_no, "force")?,
                ]);
            }
        }
        let structure = Structure::new(species, positions)
            .map_err(|e| Error::Parse { line: count_line, msg: e.to_string() })?;
        frames.push(Frame {
            structure,
            energy,
            forces: with_forces.unwrap_or(false).then_some(forces),
        });
        at += 2 + n;
    }
    Ok(frames)
}

pub fn read_xyz(path: &Path) -> Result<Vec<Frame>> {
    parse_xyz(&fs::read_to_string(path)?)
}

pub fn write_structure<W: Write>(mut w: W, s: &Structure, energy: Option<f64>, forces: Option<&[Vec3]>) -> Result<()> {
    writeln!(w, "{}", s.n_atoms())?;
    match energy {
        Some(e) => writeln!(w, "energy={e:e}")?,
        None => writeln!(w)?,
    }
    for (a, (z, p)) in s.species().iter().zip(s.positions()).enumerate() {
        write!(w, "{z} {:e} {:e} {:e}", p[0], p[1], p[2])?;
        if let Some(f) = forces {
            write!(w, " {:e} {:e} {:e}", f[a][0], f[a][1], f[a][2])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_labeled<W: Write>(mut w: W, frames: &[LabeledStructure]) -> Result<()> {
    for f in frames {
        write_structure(&mut w, &f.structure, Some(f.energy), Some(&f.forces))?;
    }
    Ok(())
}
