//! Speaker-array acoustic fields: monopole (Rayleigh) summation, circular
//! piston directivity, aperture planarity, layout ranking and the
//! speaker-count parameter sweep.

pub mod bessel;
mod layouts;
mod sweep;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use layouts::{shipped_layouts, LayoutFile, COLUMN_PITCH_M, ELEMENT_RADIUS_M, RING_RADIUS_M, ROW_PITCH_M};
pub use sweep::{load_sweep_table, load_sweep_table_path, shipped_sweep_table, sweep_parameters, SweepRow};

pub const SPEED_OF_SOUND_M_S: f64 = 343.0;
/// Diameter of the housing's central opening.
pub const OPENING_DIAMETER_M: f64 = 0.0225;
/// Array-to-opening distance of the best configuration.
pub const ARRAY_RANGE_M: f64 = 0.018;

pub type Point3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayLayout {
    pub name: String,
    /// Element positions (m). Elements radiate toward +z.
    pub elements: Vec<Point3>,
    pub element_radius_m: f64,
    pub amplitude_weights: Vec<f64>,
    pub phase_offsets_rad: Vec<f64>,
}

impl ArrayLayout {
    /// Unit weights, zero phases.
    pub fn uniform(name: impl Into<String>, elements: Vec<Point3>, element_radius_m: f64) -> Result<Self> {
        let n = elements.len();
        let layout = Self {
            name: name.into(),
            elements,
            element_radius_m,
            amplitude_weights: vec![1.0; n],
            phase_offsets_rad: vec![0.0; n],
        };
        layout.validate()?;
        Ok(layout)
    }

    /// Centered `rows × cols` grid in the z = 0 plane; columns run along x.
    pub fn grid(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        column_pitch_m: f64,
        row_pitch_m: f64,
        element_radius_m: f64,
    ) -> Result<Self> {
        let mut elements = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                elements.push([
                    (c as f64 - (cols as f64 - 1.0) / 2.0) * column_pitch_m,
                    (r as f64 - (rows as f64 - 1.0) / 2.0) * row_pitch_m,
                    0.0,
                ]);
            }
        }
        Self::uniform(name, elements, element_radius_m)
    }

    /// `n` elements evenly spaced on a circle in the z = 0 plane.
    pub fn ring(name: impl Into<String>, n: usize, radius_m: f64, element_radius_m: f64) -> Result<Self> {
        let elements = (0..n)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / n as f64;
                [radius_m * a.cos(), radius_m * a.sin(), 0.0]
            })
            .collect();
        Self::uniform(name, elements, element_radius_m)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.elements.len();
        if n == 0 {
            return Err(Error::param("elements", "layout has no elements"));
        }
        if self.amplitude_weights.len() != n || self.phase_offsets_rad.len() != n {
            return Err(Error::param(
                "elements",
                format!(
                    "{n} elements but {} weights and {} phases",
                    self.amplitude_weights.len(),
                    self.phase_offsets_rad.len()
                ),
            ));
        }
        if !(self.element_radius_m >= 0.0) {
            return Err(Error::param("element_radius_m", "must be non-negative"));
        }
        if self.elements.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::param("elements", "positions must be finite"));
        }
        if self.element_radius_m > 0.0 {
            let min_gap = 2.0 * self.element_radius_m;
            for i in 0..n {
                for j in i + 1..n {
                    if distance(&self.elements[i], &self.elements[j]) < min_gap - 1e-12 {
                        return Err(Error::param(
                            "elements",
                            format!("elements {i} and {j} overlap (closer than {min_gap} m)"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Returns a copy translated by `offset`.
    pub fn translated(&self, offset: Point3) -> Self {
        let mut out = self.clone();
        for e in &mut out.elements {
            for (c, o) in e.iter_mut().zip(offset) {
                *c += o;
            }
        }
        out
    }
}

/// Binary aperture model of the housing: elements outside the open disk
/// are attenuated by `blocked_attenuation_db`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstructionMask {
    pub open_disk_center: [f64; 2],
    pub open_disk_diameter_m: f64,
    pub blocked_attenuation_db: f64,
}

impl Default for ObstructionMask {
    fn default() -> Self {
        Self {
            open_disk_center: [0.0, 0.0],
            open_disk_diameter_m: OPENING_DIAMETER_M,
            blocked_attenuation_db: 40.0,
        }
    }
}

impl ObstructionMask {
    pub fn validate(&self) -> Result<()> {
        if !(self.open_disk_diameter_m > 0.0) {
            return Err(Error::param("open_disk_diameter_m", "must be positive"));
        }
        if !(self.blocked_attenuation_db >= 0.0) {
            return Err(Error::param("blocked_attenuation_db", "must be non-negative"));
        }
        Ok(())
    }

    pub fn is_open(&self, p: &Point3) -> bool {
        let dx = p[0] - self.open_disk_center[0];
        let dy = p[1] - self.open_disk_center[1];
        (dx * dx + dy * dy).sqrt() <= self.open_disk_diameter_m / 2.0 + 1e-12
    }

    /// Linear amplitude factor for an element at `p`.
    pub fn factor(&self, p: &Point3) -> f64 {
        if self.is_open(p) {
            1.0
        } else {
            10f64.powf(-self.blocked_attenuation_db / 20.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementModel {
    #[default]
    Monopole,
    /// Monopole weighted by the circular-piston pattern of radius
    /// `element_radius_m` about +z.
    Piston,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldOptions {
    pub speed_of_sound_m_s: f64,
    pub element_model: ElementModel,
}

impl Default for FieldOptions {
    fn default() -> Self {
        Self {
            speed_of_sound_m_s: SPEED_OF_SOUND_M_S,
            element_model: ElementModel::Monopole,
        }
    }
}

/// Complex pressure sampled at a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub points: Vec<Point3>,
    pub pressure: Vec<Complex64>,
}

impl FieldGrid {
    pub fn new(points: Vec<Point3>, pressure: Vec<Complex64>) -> Result<Self> {
        if points.len() != pressure.len() {
            return Err(Error::param(
                "field",
                format!("{} points but {} pressures", points.len(), pressure.len()),
            ));
        }
        if pressure.iter().any(|p| !p.re.is_finite() || !p.im.is_finite()) {
            return Err(Error::param("field", "pressures must be finite"));
        }
        Ok(Self { points, pressure })
    }

    pub fn magnitude_db(&self, i: usize) -> f64 {
        20.0 * self.pressure[i].norm().max(1e-300).log10()
    }

    /// CSV with header `x_mm,y_mm,z_mm,re,im,magnitude_db`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(["x_mm", "y_mm", "z_mm", "re", "im", "magnitude_db"])?;
        for (i, (pt, p)) in self.points.iter().zip(&self.pressure).enumerate() {
            w.write_record(&[
                format!("{}", pt[0] * 1e3),
                format!("{}", pt[1] * 1e3),
                format!("{}", pt[2] * 1e3),
                format!("{}", p.re),
                format!("{}", p.im),
                format!("{}", self.magnitude_db(i)),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn distance(a: &Point3, b: &Point3) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Free-space field `p(r) = Σ wⱼ·mⱼ·e^{i(k·Rⱼ + φⱼ)}/Rⱼ`, where `mⱼ` is the
/// obstruction factor of element `j`.
pub fn array_field(
    layout: &ArrayLayout,
    frequency_hz: f64,
    grid_points: &[Point3],
    mask: Option<&ObstructionMask>,
) -> Result<FieldGrid> {
    array_field_with(layout, frequency_hz, grid_points, mask, FieldOptions::default())
}

pub fn array_field_with(
    layout: &ArrayLayout,
    frequency_hz: f64,
    grid_points: &[Point3],
    mask: Option<&ObstructionMask>,
    options: FieldOptions,
) -> Result<FieldGrid> {
    layout.validate()?;
    if !(frequency_hz > 0.0) {
        return Err(Error::param("frequency_hz", "must be positive"));
    }
    if !(options.speed_of_sound_m_s > 0.0) {
        return Err(Error::param("speed_of_sound_m_s", "must be positive"));
    }
    if let Some(m) = mask {
        m.validate()?;
    }
    let k = 2.0 * PI * frequency_hz / options.speed_of_sound_m_s;
    let ka = k * layout.element_radius_m;
    let gains: Vec<f64> = layout
        .elements
        .iter()
        .zip(&layout.amplitude_weights)
        .map(|(e, w)| w * mask.map_or(1.0, |m| m.factor(e)))
        .collect();

    let mut pressure = Vec::with_capacity(grid_points.len());
    for (pi, pt) in grid_points.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (ei, e) in layout.elements.iter().enumerate() {
            let r = distance(pt, e);
            if r < 1e-12 {
                return Err(Error::Singularity { point: pi, element: ei });
            }
            let mut amp = gains[ei] / r;
            if options.element_model == ElementModel::Piston {
                let lateral = ((pt[0] - e[0]).powi(2) + (pt[1] - e[1]).powi(2)).sqrt();
                amp *= piston_directivity(ka, (lateral / r).asin());
            }
            acc += Complex64::from_polar(amp, k * r + layout.phase_offsets_rad[ei]);
        }
        pressure.push(acc);
    }
    FieldGrid::new(grid_points.to_vec(), pressure)
}

/// Far-field circular-piston gain `|2·J₁(ka·sin θ)/(ka·sin θ)|`.
pub fn piston_directivity(ka: f64, theta_rad: f64) -> f64 {
    bessel::jinc(ka.max(0.0) * theta_rad.sin()).abs()
}

/// `ka·sin θ` of the piston pattern's first null.
pub fn piston_first_null() -> f64 {
    bessel::j1_first_zero()
}

/// Polar sample grid over a disk: the center plus `rings` rings, ring `i`
/// holding `8·i` points. The disk lies in the plane `z = z` about `center`.
pub fn aperture_grid(center: [f64; 2], z: f64, diameter_m: f64, rings: usize) -> Vec<Point3> {
    let mut pts = vec![[center[0], center[1], z]];
    for i in 1..=rings {
        let r = diameter_m / 2.0 * i as f64 / rings as f64;
        let n = 8 * i;
        for j in 0..n {
            let a = 2.0 * PI * j as f64 / n as f64;
            pts.push([center[0] + r * a.cos(), center[1] + r * a.sin(), z]);
        }
    }
    pts
}

const MIN_APERTURE_POINTS: usize = 16;

/// RMS deviation (rad) of the field phase from its best-fit constant over
/// the points within `aperture_diameter_m / 2` of the grid centroid.
///
/// Phases are taken relative to the circular mean of the unit phasors, so
/// deviations must stay within ±π (true for any field worth calling planar).
pub fn planarity(field: &FieldGrid, aperture_diameter_m: f64) -> Result<f64> {
    if !(aperture_diameter_m > 0.0) {
        return Err(Error::param("aperture_diameter_m", "must be positive"));
    }
    let pts = &field.points;
    if pts.len() < MIN_APERTURE_POINTS {
        return Err(Error::param(
            "field",
            format!("{} points, need at least {MIN_APERTURE_POINTS}", pts.len()),
        ));
    }
    check_coplanar(pts)?;
    let n = pts.len() as f64;
    let centroid = [0, 1, 2].map(|c| pts.iter().map(|p| p[c]).sum::<f64>() / n);
    let radius = aperture_diameter_m / 2.0;
    let inside: Vec<Complex64> = pts
        .iter()
        .zip(&field.pressure)
        .filter(|(p, _)| distance(p, &centroid) <= radius + 1e-12)
        .map(|(_, p)| *p)
        .collect();
    if inside.len() < MIN_APERTURE_POINTS {
        return Err(Error::param(
            "field",
            format!(
                "{} points inside the aperture, need at least {MIN_APERTURE_POINTS}",
                inside.len()
            ),
        ));
    }
    let mean_dir: Complex64 = inside.iter().map(|p| p / p.norm().max(1e-300)).sum();
    let rot = Complex64::from_polar(1.0, -mean_dir.arg());
    let dev: Vec<f64> = inside.iter().map(|p| (p * rot).arg()).collect();
    let m = dev.iter().sum::<f64>() / dev.len() as f64;
    Ok((dev.iter().map(|d| (d - m).powi(2)).sum::<f64>() / dev.len() as f64).sqrt())
}

fn check_coplanar(pts: &[Point3]) -> Result<()> {
    let p0 = pts[0];
    let far = pts
        .iter()
        .max_by(|a, b| distance(a, &p0).total_cmp(&distance(b, &p0)))
        .copied()
        .unwrap_or(p0);
    let u = sub(&far, &p0);
    let (normal, area) = pts
        .iter()
        .map(|p| {
            let c = cross(&u, &sub(p, &p0));
            let n = norm(&c);
            (c, n)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or(([0.0; 3], 0.0));
    if area < 1e-18 {
        return Err(Error::param("field", "points are collinear"));
    }
    let nrm = normal.map(|c| c / area);
    for (i, p) in pts.iter().enumerate() {
        let d = dot(&nrm, &sub(p, &p0)).abs();
        if d > 1e-9 {
            return Err(Error::param(
                "field",
                format!("point {i} lies {d:.3e} m off the aperture plane"),
            ));
        }
    }
    Ok(())
}

fn sub(a: &Point3, b: &Point3) -> Point3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: &Point3, b: &Point3) -> Point3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn dot(a: &Point3, b: &Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: &Point3) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedLayout {
    pub layout: ArrayLayout,
    /// On-axis level at the aperture center, dB re unit monopole at 1 m.
    pub on_axis_spl_db: f64,
    pub planarity_rad: f64,
}

/// Aperture rings used by [`rank_layouts`].
pub const RANKING_RINGS: usize = 8;

/// Evaluates each layout on the mask's opening at `range_m` and sorts by
/// planarity (ascending), then on-axis level (descending), then name.
pub fn rank_layouts(
    layouts: &[ArrayLayout],
    frequency_hz: f64,
    range_m: f64,
    mask: &ObstructionMask,
) -> Result<Vec<RankedLayout>> {
    rank_layouts_with(layouts, frequency_hz, range_m, mask, true)
}

/// As [`rank_layouts`]; `apply_mask = false` evaluates the same aperture
/// with every element unobstructed.
pub fn rank_layouts_with(
    layouts: &[ArrayLayout],
    frequency_hz: f64,
    range_m: f64,
    mask: &ObstructionMask,
    apply_mask: bool,
) -> Result<Vec<RankedLayout>> {
    if layouts.len() < 2 {
        return Err(Error::param("layouts", "ranking needs at least two layouts"));
    }
    if !(range_m > 0.0) {
        return Err(Error::param("range_m", "must be positive"));
    }
    mask.validate()?;
    let grid = aperture_grid(mask.open_disk_center, range_m, mask.open_disk_diameter_m, RANKING_RINGS);
    let mut ranked = layouts
        .iter()
        .map(|layout| {
            let field = array_field(layout, frequency_hz, &grid, apply_mask.then_some(mask))?;
            Ok(RankedLayout {
                layout: layout.clone(),
                on_axis_spl_db: field.magnitude_db(0),
                planarity_rad: planarity(&field, mask.open_disk_diameter_m)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ranked.sort_by(|a, b| {
        a.planarity_rad
            .total_cmp(&b.planarity_rad)
            .then(b.on_axis_spl_db.total_cmp(&a.on_axis_spl_db))
            .then_with(|| a.layout.name.cmp(&b.layout.name))
    });
    Ok(ranked)
}
