//! Area and perimeter of the `phi > 0` region from the marching-squares
//! reconstruction of the `phi = 0` contour on the lattice of cell centres.
//! The lattice is not wrapped, so only regions away from periodic seams are
//! measured correctly.

use crate::grid::Field;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourMetrics {
    pub area: f64,
    pub perimeter: f64,
}

impl ContourMetrics {
    /// `4 pi A / P^2`; 1 for a circle.
    pub fn circularity(&self) -> f64 {
        if self.perimeter > 0.0 {
            4.0 * std::f64::consts::PI * self.area / (self.perimeter * self.perimeter)
        } else {
            0.0
        }
    }
}

type P = (f64, f64);

const CORNERS: [P; 4] = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)];

fn shoelace(poly: &[P]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    0.5 * twice.abs()
}

fn dist(a: P, b: P) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Returns `(area, perimeter)` of the positive part of one unit cell.
fn cell(v: [f64; 4]) -> (f64, f64) {
    let pos = v.map(|x| x > 0.0);
    let count = pos.iter().filter(|&&p| p).count();
    if count == 0 {
        return (0.0, 0.0);
    }
    if count == 4 {
        return (1.0, 0.0);
    }
    let crossing = |k: usize| -> Option<P> {
        let (a, b) = (k, (k + 1) % 4);
        (pos[a] != pos[b]).then(|| {
            let t = v[a] / (v[a] - v[b]);
            let (pa, pb) = (CORNERS[a], CORNERS[b]);
            (pa.0 + t * (pb.0 - pa.0), pa.1 + t * (pb.1 - pa.1))
        })
    };
    let saddle = count == 2 && pos[0] == pos[2];
    let centre_positive = v.iter().sum::<f64>() > 0.0;
    if saddle && !centre_positive {
        // Two separate positive corners.
        let mut area = 0.0;
        let mut perimeter = 0.0;
        for k in (0..4).filter(|&k| pos[k]) {
            let before = crossing((k + 3) % 4).expect("sign change");
            let after = crossing(k).expect("sign change");
            area += shoelace(&[before, CORNERS[k], after]);
            perimeter += dist(before, after);
        }
        return (area, perimeter);
    }
    let mut poly = Vec::with_capacity(6);
    let mut perimeter = 0.0;
    for k in 0..4 {
        if pos[k] {
            poly.push(CORNERS[k]);
        }
        if let Some(p) = crossing(k) {
            poly.push(p);
        }
    }
    if saddle {
        for k in (0..4).filter(|&k| !pos[k]) {
            let before = crossing((k + 3) % 4).expect("sign change");
            let after = crossing(k).expect("sign change");
            perimeter += dist(before, after);
        }
    } else {
        let points: Vec<P> = (0..4).filter_map(crossing).collect();
        perimeter = dist(points[0], points[1]);
    }
    (shoelace(&poly), perimeter)
}

pub fn zero_contour_metrics(phi: &Field) -> ContourMetrics {
    let (n, m) = phi.grid().shape();
    let dr = phi.grid().dr;
    let u = phi.values();
    let (mut area, mut perimeter) = (0.0, 0.0);
    for i in 0..n - 1 {
        for j in 0..m - 1 {
            let (a, p) = cell([u[[i, j]], u[[i, j + 1]], u[[i + 1, j + 1]], u[[i + 1, j]]]);
            area += a;
            perimeter += p;
        }
    }
    ContourMetrics {
        area: area * dr * dr,
        perimeter: perimeter * dr,
    }
}

/// `4 pi A / P^2` of the `phi = 0` contour around the positive region.
pub fn circularity(phi: &Field) -> f64 {
    zero_contour_metrics(phi).circularity()
}
