//! Off-surface evaluation of scattered and total fields, evaluation
//! grids, and pointwise error estimation against overresolved references.
//!
//! Far targets use the plain smooth rule with the weight-corrected coarse
//! density. Targets in a panel's near zone replace that panel's
//! contribution with kernel-split product integration. Targets near a
//! Gamma* region replace the whole star contribution of that vertex with
//! quadrature over the reconstructed fine grid, where the density is
//! panelwise smooth again.

use crate::geometry::{PanelMesh, NODES_PER_PANEL};
use crate::kernels::{kernel, KernelPoint, OpKind, SourcePoint, TargetPoint};
use crate::quadrature::{corrected_row, near_targets, target_context};
use crate::rcip::{reconstruct_fine_density, CompressedInverse, FineDensity};
use crate::solver::{incident_plane_wave, BoundaryCondition, BoundaryData, Solution};
use crate::{Error, Result, C64};
use rayon::prelude::*;

const NPP: usize = NODES_PER_PANEL;

/// Fraction of the local panel arclength inside which grid points are
/// masked instead of evaluated.
pub const EXCLUSION_BAND: f64 = 1e-3;

/// A Cartesian evaluation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// x0, x1, y0, y1.
    pub bbox: [f64; 4],
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<C64> {
        let [x0, x1, y0, y1] = self.bbox;
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for iy in 0..self.ny {
            let y = if self.ny > 1 { y0 + (y1 - y0) * iy as f64 / (self.ny - 1) as f64 } else { y0 };
            for ix in 0..self.nx {
                let x =
                    if self.nx > 1 { x0 + (x1 - x0) * ix as f64 / (self.nx - 1) as f64 } else { x0 };
                pts.push(C64::new(x, y));
            }
        }
        pts
    }
}

/// Complex field values on a grid, row-major, with an exclusion mask.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    pub spec: GridSpec,
    pub values: Vec<C64>,
    /// true = inside the exclusion band of Gamma, value not evaluated.
    pub mask: Vec<bool>,
}

/// Pointwise absolute differences of two fields.
#[derive(Debug, Clone)]
pub struct ErrorGrid {
    pub spec: GridSpec,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
    /// Relative l2 error over the unmasked points.
    pub rel_l2: f64,
}

/// Everything needed to evaluate one solution's field anywhere.
pub struct FieldEvaluator<'a> {
    mesh: &'a PanelMesh,
    solution: &'a Solution,
    op: OpKind,
    /// Fine densities per vertex (backward recursion output).
    fine: Vec<FineDensity>,
    /// Per panel: Some(vertex) if the panel belongs to that vertex's star.
    star_of_panel: Vec<Option<usize>>,
}

impl<'a> FieldEvaluator<'a> {
    /// Reconstructs the fine densities near every vertex up front.
    pub fn new(
        mesh: &'a PanelMesh,
        solution: &'a Solution,
        rs: &[CompressedInverse],
    ) -> Result<Self> {
        let op = match solution.problem.bc {
            BoundaryCondition::Dirichlet => OpKind::S,
            BoundaryCondition::Neumann => OpKind::K,
        };
        let mut fine = Vec::with_capacity(rs.len());
        for ci in rs {
            let q = ci.q();
            let mut rho_star = vec![C64::new(0.0, 0.0); 2 * q];
            for (li, &gi) in ci.star_nodes.iter().enumerate() {
                rho_star[li] = solution.rho1_tilde[gi];
                rho_star[q + li] = solution.rho2_tilde[gi];
            }
            fine.push(reconstruct_fine_density(ci, &rho_star)?);
        }
        Ok(FieldEvaluator {
            mesh,
            solution,
            op,
            fine,
            star_of_panel: mesh.star_panel_flags(),
        })
    }

    /// Scattered field at arbitrary targets. `on_curve` marks targets that
    /// lie on Gamma itself (principal-value evaluation).
    pub fn eval_points(&self, targets: &[C64], on_curve: bool) -> Result<Vec<C64>> {
        let near = near_targets(self.mesh, targets);
        targets
            .par_iter()
            .zip(&near)
            .map(|(&z, near_panels)| self.eval_one(z, near_panels, on_curve))
            .collect()
    }

    fn eval_one(&self, z: C64, near_panels: &[usize], on_curve: bool) -> Result<C64> {
        let mesh = self.mesh;
        let rho = &self.solution.rho2_hat;
        let tgt = TargetPoint { z, normal: None };
        let mut u = C64::new(0.0, 0.0);
        // vertices whose star contribution is replaced by the fine grid
        let mut fine_vertices: Vec<usize> = near_panels
            .iter()
            .filter_map(|&p| self.star_of_panel[p])
            .collect();
        fine_vertices.sort_unstable();
        fine_vertices.dedup();

        for (p, panel) in mesh.panels.iter().enumerate() {
            let in_fine = self.star_of_panel[p].map_or(false, |v| fine_vertices.contains(&v));
            if in_fine {
                continue;
            }
            if near_panels.contains(&p) {
                let Some(ctx) = target_context(mesh, p, z, None, on_curve) else {
                    return Err(Error::Field(
                        "no parameter preimage for a near-zone target".into(),
                    ));
                };
                let row = corrected_row(mesh, p, &tgt, &ctx, self.op, self.solution.problem.k)?;
                for (j, c) in row.iter().enumerate() {
                    u += c * rho[panel.first_node + j];
                }
            } else {
                for j in panel.nodes() {
                    let src = SourcePoint { z: mesh.z[j], normal: mesh.normal[j], dz: mesh.dz[j] };
                    u += kernel(self.op, &KernelPoint { source: src, target: tgt }, self.solution.problem.k)?
                        * mesh.weight[j]
                        * rho[j];
                }
            }
        }

        for &v in &fine_vertices {
            u += self.eval_fine(v, z, on_curve)?;
        }
        Ok(u)
    }

    // Contribution of one vertex's Gamma* region, integrated over the
    // reconstructed fine grid in vertex-centered coordinates.
    fn eval_fine(&self, vertex: usize, z: C64, on_curve: bool) -> Result<C64> {
        let fine = &self.fine[vertex];
        let fmesh = &fine.mesh;
        let z_loc = z - fmesh.origin;
        let tgt = TargetPoint { z: z_loc, normal: None };
        let k = self.solution.problem.k;
        let near = near_targets(fmesh, &[z_loc]);
        let mut u = C64::new(0.0, 0.0);
        for (p, panel) in fmesh.panels.iter().enumerate() {
            if near[0].contains(&p) {
                let Some(ctx) = target_context(fmesh, p, z_loc, None, on_curve) else {
                    return Err(Error::Field(
                        "no parameter preimage for a fine-grid target".into(),
                    ));
                };
                let row = corrected_row(fmesh, p, &tgt, &ctx, self.op, k)?;
                for (j, c) in row.iter().enumerate() {
                    u += c * fine.rho2[panel.first_node + j];
                }
            } else {
                for j in panel.nodes() {
                    let src =
                        SourcePoint { z: fmesh.z[j], normal: fmesh.normal[j], dz: fmesh.dz[j] };
                    u += kernel(self.op, &KernelPoint { source: src, target: tgt }, k)?
                        * fmesh.weight[j]
                        * fine.rho2[j];
                }
            }
        }
        Ok(u)
    }

    /// Distance from z to the curve if within `limit` of some panel.
    fn curve_distance_below(&self, z: C64, limit_frac: f64) -> bool {
        let mesh = self.mesh;
        for (p, panel) in mesh.panels.iter().enumerate() {
            let len = mesh.panel_arclength(p);
            // quick reject by chord midpoint
            let mid = 0.5 * (panel.z0 + panel.z1);
            if (z - mid).norm() > 1.5 * len {
                continue;
            }
            let limit = limit_frac * len;
            if let Some(v) = crate::quadrature::locate_preimage(mesh, p, z) {
                let vr = v.re.clamp(-1.0, 1.0);
                let half = 0.5 * (panel.d1 - panel.d0);
                let edge = &mesh.geom.edges[panel.edge];
                let on_curve =
                    edge.position_rel_c(panel.anchor, C64::new(panel.d0 + (vr + 1.0) * half, 0.0))
                        + panel.corr;
                if (z - on_curve).norm() < limit {
                    return true;
                }
            } else {
                // conservative: fall back to node distance
                let min_node = panel
                    .nodes()
                    .map(|j| (z - mesh.z[j]).norm())
                    .fold(f64::INFINITY, f64::min);
                if min_node < limit {
                    return true;
                }
            }
        }
        false
    }

    /// Evaluate the scattered (or total) field on a grid, masking points
    /// inside the exclusion band of Gamma.
    pub fn eval_grid(&self, spec: &GridSpec, total: bool) -> Result<FieldGrid> {
        self.eval_grid_with_band(spec, total, EXCLUSION_BAND)
    }

    pub fn eval_grid_with_band(
        &self,
        spec: &GridSpec,
        total: bool,
        band: f64,
    ) -> Result<FieldGrid> {
        let pts = spec.points();
        let mask: Vec<bool> = pts
            .par_iter()
            .map(|&z| self.curve_distance_below(z, band))
            .collect();
        let near = near_targets(self.mesh, &pts);
        let values: Vec<C64> = pts
            .par_iter()
            .zip(&near)
            .zip(&mask)
            .map(|((&z, near_panels), &masked)| {
                if masked {
                    return Ok(C64::new(f64::NAN, f64::NAN));
                }
                let mut u = self.eval_one(z, near_panels, false)?;
                if total {
                    match &self.solution.problem.data {
                        BoundaryData::PlaneWave { theta } => {
                            u += incident_plane_wave(self.solution.problem.k, *theta, z);
                        }
                        _ => {
                            return Err(Error::Field(
                                "total field requires plane-wave data".into(),
                            ))
                        }
                    }
                }
                Ok(u)
            })
            .collect::<Result<Vec<C64>>>()?;
        Ok(FieldGrid { spec: spec.clone(), values, mask })
    }

    /// Total field at arbitrary points.
    pub fn eval_total_points(&self, targets: &[C64], on_curve: bool) -> Result<Vec<C64>> {
        let sc = self.eval_points(targets, on_curve)?;
        match &self.solution.problem.data {
            BoundaryData::PlaneWave { theta } => Ok(sc
                .iter()
                .zip(targets)
                .map(|(u, &z)| u + incident_plane_wave(self.solution.problem.k, *theta, z))
                .collect()),
            _ => Err(Error::Field("total field requires plane-wave data".into())),
        }
    }
}

/// Pointwise |u - u_ref| and the relative l2 error over unmasked points.
pub fn error_grid(num: &FieldGrid, reference: &FieldGrid) -> Result<ErrorGrid> {
    if num.spec != reference.spec {
        return Err(Error::Field("error_grid: mismatched grids".into()));
    }
    let mut values = Vec::with_capacity(num.values.len());
    let mut mask = Vec::with_capacity(num.values.len());
    let mut num2 = 0.0;
    let mut den2 = 0.0;
    for i in 0..num.values.len() {
        let m = num.mask[i] || reference.mask[i];
        mask.push(m);
        if m {
            values.push(0.0);
        } else {
            let d = (num.values[i] - reference.values[i]).norm();
            values.push(d);
            num2 += d * d;
            den2 += reference.values[i].norm_sqr();
        }
    }
    Ok(ErrorGrid {
        spec: num.spec.clone(),
        values,
        mask,
        rel_l2: (num2 / den2.max(1e-300)).sqrt(),
    })
}
