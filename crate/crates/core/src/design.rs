//! Codebook design from a rotated PAM mother constellation.
//!
//! The recipe: take an `M`-point PAM constellation as the first layer, derive
//! the other layers colliding on a resource by rotating it, pick the rotation
//! angles that maximize a closed-form lower bound on the mutual information
//! between one received resource sample and the alphabet of superposed
//! values, then scatter the layers over a `K x J` indicator matrix to obtain
//! every user's codebook.
//!
//! All mutual-information values are in bits.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::codebook::{Codebook, CodebookSet};
use crate::error::{Error, Result};

/// The points one user places on one resource.
#[derive(Debug, Clone, PartialEq)]
pub struct UserConstellation {
    pub points: Vec<Complex64>,
    /// 1-based layer label used by [`IndicatorMatrix`].
    pub label: usize,
}

impl UserConstellation {
    pub fn new(label: usize, points: Vec<Complex64>) -> Self {
        Self { points, label }
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    /// `(1/M) sum |x_m|^2`.
    pub fn average_energy(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }

    pub fn min_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                best = best.min((a - b).norm());
            }
        }
        best
    }

    /// Copy scaled to unit average energy.
    pub fn normalized(&self) -> Self {
        self.scaled(1.0 / self.average_energy().sqrt())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            points: self.points.iter().map(|p| p * factor).collect(),
            label: self.label,
        }
    }

    /// Copy with both coordinates rounded to `decimals` places.
    pub fn rounded(&self, decimals: i32) -> Self {
        let f = 10f64.powi(decimals);
        let r = |x: f64| {
            let v = (x * f).round() / f;
            if v == 0.0 {
                0.0
            } else {
                v
            }
        };
        Self {
            points: self.points.iter().map(|p| Complex64::new(r(p.re), r(p.im))).collect(),
            label: self.label,
        }
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = label;
        self
    }
}

/// `M` equally spaced real points in `[-1, 1]`, optionally scaled to unit energy.
pub fn pam_mother(m: usize, unit_energy: bool) -> Result<UserConstellation> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("PAM order {m} is below 2")));
    }
    let step = 2.0 / (m - 1) as f64;
    let points = (0..m).map(|i| Complex64::new(-1.0 + step * i as f64, 0.0)).collect();
    let c = UserConstellation::new(1, points);
    Ok(if unit_energy { c.normalized() } else { c })
}

/// Every point multiplied by `exp(i theta)`.
pub fn rotate(c: &UserConstellation, theta: f64) -> UserConstellation {
    let r = Complex64::from_polar(1.0, theta);
    UserConstellation {
        points: c.points.iter().map(|p| p * r).collect(),
        label: c.label,
    }
}

/// The superposed values of `d_f` colliding layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SumAlphabet {
    pub values: Vec<Complex64>,
    pub contributors: usize,
}

impl SumAlphabet {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// All `M^d` sums, first constellation's index varying slowest.
pub fn sum_alphabet(constellations: &[UserConstellation]) -> Result<SumAlphabet> {
    let first = constellations
        .first()
        .ok_or_else(|| Error::InvalidArgument("no constellations".into()))?;
    let m = first.order();
    if constellations.iter().any(|c| c.order() != m) {
        return Err(Error::Dimension("constellations differ in size".into()));
    }
    let mut values = vec![Complex64::new(0.0, 0.0)];
    for c in constellations {
        values = values
            .iter()
            .flat_map(|v| c.points.iter().map(move |p| v + p))
            .collect();
    }
    Ok(SumAlphabet {
        values,
        contributors: constellations.len(),
    })
}

/// Closed-form lower bound on `I(Y; S)` in bits:
///
/// `log2|S| - log2(1 + (1/|S|) sum_j sum_{i != j} exp(-|s_j - s_i|^2 / (4 N0)))`.
pub fn mi_lower_bound(values: &[Complex64], n0: f64) -> f64 {
    let n = values.len();
    let mut pair_sum = 0.0;
    for (j, a) in values.iter().enumerate() {
        for b in &values[j + 1..] {
            pair_sum += (-(a - b).norm_sqr() / (4.0 * n0)).exp();
        }
    }
    let size = n as f64;
    size.log2() - (1.0 + 2.0 * pair_sum / size).log2()
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MiEstimate {
    pub bits: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Estimates `I(Y; S)` for equiprobable `S` over `CN(s, N0)` noise.
///
/// Each sample draws `j` uniformly and `y = s_j + n`, and evaluates
/// `log2|S| - log2 sum_i exp(-(|y - s_i|^2 - |y - s_j|^2) / N0)`; the estimate
/// is the sample mean.
pub fn mi_exact_estimate<R: Rng + ?Sized>(
    values: &[Complex64],
    n0: f64,
    samples: usize,
    rng: &mut R,
) -> Result<MiEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(n0 > 0.0) {
        return Err(Error::InvalidArgument(format!("noise level {n0} must be positive")));
    }
    if values.is_empty() {
        return Err(Error::InvalidArgument("empty alphabet".into()));
    }
    let size = values.len();
    let log_size = (size as f64).log2();
    let sigma = (n0 / 2.0).sqrt();
    let mut exponents = vec![0.0; size];
    let (mut mean, mut m2) = (0.0, 0.0);
    for t in 0..samples {
        let j = rng.random_range(0..size);
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let noise = Complex64::new(re * sigma, im * sigma);
        let y = values[j] + noise;
        let own = noise.norm_sqr();
        for (e, s) in exponents.iter_mut().zip(values) {
            *e = -((y - s).norm_sqr() - own) / n0;
        }
        let max = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + exponents.iter().map(|e| (e - max).exp()).sum::<f64>().ln();
        let x = log_size - lse / std::f64::consts::LN_2;
        // Welford running mean and variance.
        let delta = x - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = if samples > 1 { m2 / (samples - 1) as f64 } else { 0.0 };
    Ok(MiEstimate {
        bits: mean,
        std_error: (var / samples as f64).sqrt(),
        samples,
    })
}

/// Result of the rotation-angle grid search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSearch {
    pub theta2_deg: f64,
    pub theta3_deg: f64,
    /// Lower-bound mutual information at the optimum, bits.
    pub objective: f64,
}

/// Lower-bound objective for the three layers `{u1, rot(u1, t2), rot(u1, t3)}`.
pub fn rotation_objective(u1: &UserConstellation, n0: f64, theta2_deg: f64, theta3_deg: f64) -> f64 {
    let layers = [
        u1.clone(),
        rotate(u1, theta2_deg.to_radians()),
        rotate(u1, theta3_deg.to_radians()),
    ];
    let s = sum_alphabet(&layers).expect("equal orders");
    mi_lower_bound(&s.values, n0)
}

/// Exhaustive search over `(theta2, theta3)` on a degree grid covering `[0, 360)`.
///
/// Values within a relative `1e-12` of the best count as ties, and ties go to
/// the lexicographically smallest `(theta2, theta3)`.
pub fn optimize_rotation_angles(u1: &UserConstellation, n0: f64, grid_step_deg: f64) -> Result<AngleSearch> {
    let steps = 360.0 / grid_step_deg;
    if !(grid_step_deg > 0.0) || (steps - steps.round()).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "grid step {grid_step_deg} does not divide 360"
        )));
    }
    let steps = steps.round() as usize;
    let angles: Vec<f64> = (0..steps).map(|i| i as f64 * grid_step_deg).collect();
    let objectives: Vec<Vec<f64>> = angles
        .par_iter()
        .map(|&t2| angles.iter().map(|&t3| rotation_objective(u1, n0, t2, t3)).collect())
        .collect();

    let mut best = AngleSearch {
        theta2_deg: 0.0,
        theta3_deg: 0.0,
        objective: objectives[0][0],
    };
    for (a, row) in objectives.iter().enumerate() {
        for (b, &v) in row.iter().enumerate() {
            if v > best.objective + 1e-12 * best.objective.abs().max(1.0) {
                best = AngleSearch {
                    theta2_deg: angles[a],
                    theta3_deg: angles[b],
                    objective: v,
                };
            }
        }
    }
    Ok(best)
}

/// Convex hull (counter-clockwise, no collinear points) by monotone chain.
pub fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Complex64, a: Complex64, b: Complex64| (a - o).re * (b - o).im - (a - o).im * (b - o).re;
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Shoelace area of a simple polygon.
pub fn polygon_area(vertices: &[Complex64]) -> f64 {
    let n = vertices.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a.re * b.im - b.re * a.im
        })
        .sum();
    twice.abs() / 2.0
}

/// `gamma_s = V^(2/n) / (6 E_av)` with `V` the convex-hull area of the points.
///
/// Only the complex plane (`n = 2`) is supported.
pub fn shaping_gain(points: &[Complex64], n: usize) -> Result<f64> {
    if n != 2 {
        return Err(Error::InvalidArgument(format!(
            "shaping gain is defined here for n = 2, got {n}"
        )));
    }
    let hull = convex_hull(points);
    let area = if hull.len() >= 3 { polygon_area(&hull) } else { 0.0 };
    let e_av = points.iter().map(|p| p.norm_sqr()).sum::<f64>() / points.len().max(1) as f64;
    let scale = points.iter().map(|p| p.norm_sqr()).fold(0.0, f64::max);
    if !(area > 1e-12 * scale) || e_av == 0.0 {
        return Err(Error::InvalidArgument(
            "points are collinear or coincident; the hull has no area".into(),
        ));
    }
    Ok(area.powf(2.0 / n as f64) / (6.0 * e_av))
}

/// One nonempty cell of an [`IndicatorMatrix`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorCell {
    /// 1-based layer label.
    pub label: usize,
    /// Optional symbol relabeling: codeword `m` takes layer point `permutation[m]`.
    pub permutation: Option<Vec<usize>>,
}

impl IndicatorCell {
    pub fn label(label: usize) -> Self {
        Self {
            label,
            permutation: None,
        }
    }

    pub fn permuted(label: usize, permutation: Vec<usize>) -> Self {
        Self {
            label,
            permutation: Some(permutation),
        }
    }
}

/// `K x J` grid naming which layer a user places on each of its resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    cells: Vec<Vec<Option<IndicatorCell>>>,
}

impl IndicatorMatrix {
    /// Every column must have the same, nonzero number of filled cells.
    pub fn new(cells: Vec<Vec<Option<IndicatorCell>>>) -> Result<Self> {
        let k = cells.len();
        let j = cells.first().map_or(0, Vec::len);
        if k == 0 || j == 0 || cells.iter().any(|r| r.len() != j) {
            return Err(Error::InvalidArgument("indicator matrix is empty or ragged".into()));
        }
        let count = |c: usize| cells.iter().filter(|r| r[c].is_some()).count();
        let n = count(0);
        if n == 0 || (0..j).any(|c| count(c) != n) {
            return Err(Error::InvalidArgument(
                "indicator columns must have the same nonzero number of filled cells".into(),
            ));
        }
        if let Some(r) = (0..k).find(|&r| cells[r].iter().all(Option::is_none)) {
            return Err(Error::InvalidArgument(format!("indicator row {} is empty", r + 1)));
        }
        Ok(Self { cells })
    }

    /// From a label grid where 0 means empty.
    pub fn from_labels(labels: &[Vec<usize>]) -> Result<Self> {
        Self::new(
            labels
                .iter()
                .map(|row| row.iter().map(|&l| (l > 0).then(|| IndicatorCell::label(l))).collect())
                .collect(),
        )
    }

    pub fn resources(&self) -> usize {
        self.cells.len()
    }

    pub fn users(&self) -> usize {
        self.cells[0].len()
    }

    pub fn cell(&self, k: usize, j: usize) -> Option<&IndicatorCell> {
        self.cells[k][j].as_ref()
    }

    /// The implied binary factor-graph matrix.
    pub fn pattern(&self) -> Vec<Vec<u8>> {
        self.cells
            .iter()
            .map(|row| row.iter().map(|c| u8::from(c.is_some())).collect())
            .collect()
    }
}

/// Builds every user's codebook by placing layer points on the indicated rows.
///
/// `layers[l - 1]` is the constellation for label `l`.
pub fn assemble_codebooks(layers: &[UserConstellation], indicator: &IndicatorMatrix) -> Result<CodebookSet> {
    let m = layers
        .first()
        .ok_or_else(|| Error::InvalidArgument("no layers".into()))?
        .order();
    if layers.iter().any(|l| l.order() != m) {
        return Err(Error::Dimension("layers differ in size".into()));
    }
    let (k, j) = (indicator.resources(), indicator.users());
    let zero = Complex64::new(0.0, 0.0);
    let mut books = Vec::with_capacity(j);
    for user in 0..j {
        let mut rows = vec![vec![zero; m]; k];
        let mut pattern = Vec::new();
        for (r, row) in rows.iter_mut().enumerate() {
            let Some(cell) = indicator.cell(r, user) else {
                continue;
            };
            let layer = cell.label.checked_sub(1).and_then(|l| layers.get(l)).ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "indicator cell ({}, {}) names unknown layer {}",
                    r + 1,
                    user + 1,
                    cell.label
                ))
            })?;
            let identity: Vec<usize> = (0..m).collect();
            let perm = cell.permutation.as_ref().unwrap_or(&identity);
            let mut seen = perm.clone();
            seen.sort_unstable();
            if seen != identity {
                return Err(Error::InvalidArgument(format!(
                    "indicator cell ({}, {}) has an invalid permutation",
                    r + 1,
                    user + 1
                )));
            }
            for (s, &p) in perm.iter().enumerate() {
                row[s] = layer.points[p];
            }
            pattern.push(r);
        }
        books.push(Codebook::with_pattern(user + 1, rows, &pattern)?);
    }
    CodebookSet::new(books)
}

/// The three printed layers of the worked 6x4 design (unscaled).
pub fn printed_layers() -> [UserConstellation; 3] {
    let c = Complex64::new;
    [
        UserConstellation::new(1, vec![c(-1.0, 0.0), c(-0.333, 0.0), c(0.333, 0.0), c(1.0, 0.0)]),
        UserConstellation::new(2, vec![c(-0.1109, -0.3), c(0.6, 1.0), c(-0.6, -1.0), c(0.1109, 0.3)]),
        UserConstellation::new(3, vec![c(0.3, -0.3), c(-0.6, 1.0), c(0.6, -1.0), c(-0.3, 0.3)]),
    ]
}

/// Symbol order for `b` maximizing the minimum squared distance between the
/// two-resource codewords `(a[m], b[perm[m]])`. Ties keep the
/// lexicographically first order, so the identity wins when it is optimal.
pub fn best_pairing(a: &UserConstellation, b: &UserConstellation) -> Vec<usize> {
    let m = a.order().min(b.order());
    let score = |perm: &[usize]| {
        let mut best = f64::INFINITY;
        for i in 0..m {
            for j in i + 1..m {
                let d = (a.points[i] - a.points[j]).norm_sqr() + (b.points[perm[i]] - b.points[perm[j]]).norm_sqr();
                best = best.min(d);
            }
        }
        best
    };
    let mut perm: Vec<usize> = (0..m).collect();
    let mut best = (score(&perm), perm.clone());
    while next_permutation(&mut perm) {
        let s = score(&perm);
        if s > best.0 * (1.0 + 1e-12) {
            best = (s, perm.clone());
        }
    }
    best.1
}

/// Advances to the next lexicographic permutation; false after the last one.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("successor exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Indicator from `labels` where every user's lower cell is reordered by
/// [`best_pairing`] against its upper cell. Users must occupy two resources.
pub fn paired_indicator(labels: &[Vec<usize>], layers: &[UserConstellation]) -> Result<IndicatorMatrix> {
    let mut cells: Vec<Vec<Option<IndicatorCell>>> = labels
        .iter()
        .map(|r| r.iter().map(|&l| (l != 0).then(|| IndicatorCell::label(l))).collect())
        .collect();
    let users = labels.first().map_or(0, Vec::len);
    let layer = |l: usize| {
        layers
            .iter()
            .find(|c| c.label == l)
            .ok_or_else(|| Error::InvalidArgument(format!("no layer labeled {l}")))
    };
    for j in 0..users {
        let rows: Vec<usize> = (0..labels.len()).filter(|&k| labels[k][j] != 0).collect();
        let &[top, bottom] = rows.as_slice() else {
            return Err(Error::InvalidArgument(format!(
                "user {} does not use exactly two resources",
                j + 1
            )));
        };
        let perm = best_pairing(layer(labels[top][j])?, layer(labels[bottom][j])?);
        if perm.iter().enumerate().any(|(i, &p)| i != p) {
            cells[bottom][j] = Some(IndicatorCell::permuted(labels[bottom][j], perm));
        }
    }
    IndicatorMatrix::new(cells)
}

/// Layer placement of the worked 6x4 design, labels only.
pub fn indicator_6x4() -> IndicatorMatrix {
    IndicatorMatrix::from_labels(&[
        vec![1, 0, 2, 0, 3, 0],
        vec![0, 2, 3, 0, 0, 1],
        vec![2, 0, 0, 1, 0, 3],
        vec![0, 1, 0, 3, 2, 0],
    ])
    .expect("valid indicator")
}

/// [`indicator_6x4`] with the symbol relabeling the bundled 6x4 tables use:
/// users 3 and 5 carry layer 2 with its points in order (3, 1, 4, 2).
pub fn indicator_6x4_tabulated() -> IndicatorMatrix {
    let mut cells: Vec<Vec<Option<IndicatorCell>>> = indicator_6x4().cells;
    cells[0][2] = Some(IndicatorCell::permuted(2, vec![2, 0, 3, 1]));
    cells[3][4] = Some(IndicatorCell::permuted(2, vec![2, 0, 3, 1]));
    IndicatorMatrix::new(cells).expect("valid indicator")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn pairing_search() {
        let [u1, u2, u3] = fixtures::table2_layers();
        // The published tables pair layer 2 and layer 3 with the inverse of this reordering.
        assert_eq!(best_pairing(&u2, &u3), vec![1, 3, 0, 2]);
        assert_eq!(best_pairing(&u1, &u2), vec![0, 1, 2, 3]);
        let mut p = vec![0, 1, 2];
        let mut all = vec![p.clone()];
        while next_permutation(&mut p) {
            all.push(p.clone());
        }
        assert_eq!(all.len(), 6);
        assert_eq!(all[1], vec![0, 2, 1]);
        assert!(paired_indicator(&[vec![1], vec![0]], &[u1]).is_err());
    }

    #[test]
    fn pam_points() {
        let u = pam_mother(4, false).unwrap();
        for (p, want) in u.points.iter().zip([-1.0, -0.333, 0.333, 1.0]) {
            assert!((p.re - want).abs() < 1e-3 && p.im == 0.0);
        }
        assert!((u.points[2].re - u.points[1].re - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(pam_mother(2, false).unwrap().points, vec![c(-1.0, 0.0), c(1.0, 0.0)]);
        assert!(pam_mother(1, false).is_err());
    }

    #[test]
    fn pam_unit_energy_scaling() {
        let third = 1.0f64 / 3.0;
        let factor = 1.0 / ((1.0 + third * third + third * third + 1.0) / 4.0f64).sqrt();
        let u = pam_mother(4, true).unwrap();
        for (p, raw) in u.points.iter().zip([-1.0, -third, third, 1.0]) {
            assert!((p.re - raw * factor).abs() < 1e-12);
        }
        assert!((u.average_energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rotation_cases() {
        let u = pam_mother(4, false).unwrap();
        assert_eq!(rotate(&u, 0.0), u);
        let pair = pam_mother(2, false).unwrap();
        let flipped = rotate(&pair, std::f64::consts::PI);
        assert!((flipped.points[0] - c(1.0, 0.0)).norm() < 1e-12);
        assert!((flipped.points[1] - c(-1.0, 0.0)).norm() < 1e-12);
        let r = rotate(&u, 120f64.to_radians());
        for (a, b) in r.points.iter().zip(&u.points) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
        assert!((r.average_energy() - u.average_energy()).abs() < 1e-12);
    }

    #[test]
    fn sum_alphabet_enumeration() {
        let u = pam_mother(4, false).unwrap();
        assert_eq!(sum_alphabet(std::slice::from_ref(&u)).unwrap().values, u.points);

        let a = UserConstellation::new(1, vec![c(0.0, 0.0), c(1.0, 0.0)]);
        let b = UserConstellation::new(2, vec![c(0.0, 0.0), c(2.0, 0.0)]);
        let s = sum_alphabet(&[a, b]).unwrap();
        assert_eq!(s.values, vec![c(0.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(3.0, 0.0)]);

        let [u1, u2, u3] = printed_layers();
        let s = sum_alphabet(&[u1, u2, u3]).unwrap();
        assert_eq!(s.len(), 64);
        // (m1, m2, m3) = (1, 2, 3) in 1-based terms.
        let v = s.values[4 + 2];
        assert!((v - c(0.2, 0.0)).norm() < 1e-12, "{v}");
    }

    #[test]
    fn lower_bound_cases() {
        let same = vec![c(0.3, 0.1); 8];
        assert!(mi_lower_bound(&same, 0.7).abs() < 1e-12);

        let bpsk = [c(-1.0, 0.0), c(1.0, 0.0)];
        let closed = (2f64.ln() - (1.0 + (-2.0f64).exp()).ln()) / std::f64::consts::LN_2;
        assert!((mi_lower_bound(&bpsk, 0.5) - closed).abs() < 1e-12);
        assert!((mi_lower_bound(&bpsk, 1e-4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_is_rotation_and_translation_invariant() {
        let [u1, u2, u3] = printed_layers();
        let s = sum_alphabet(&[u1, u2, u3]).unwrap().values;
        let base = mi_lower_bound(&s, 0.1);
        let r = Complex64::from_polar(1.0, 0.7);
        let moved: Vec<_> = s.iter().map(|v| v * r + c(3.0, -2.0)).collect();
        assert!((mi_lower_bound(&moved, 0.1) - base).abs() < 1e-12);
        assert!(base <= 6.0);
    }

    #[test]
    fn exact_estimate_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let one = mi_exact_estimate(&[c(0.5, 0.5)], 0.2, 100, &mut rng).unwrap();
        assert!(one.bits.abs() < 1e-12);
        assert!(one.std_error < 1e-12);

        let far: Vec<_> = (0..16)
            .map(|i| c((i % 4) as f64 * 10.0, (i / 4) as f64 * 10.0))
            .collect();
        let est = mi_exact_estimate(&far, 0.5, 2000, &mut rng).unwrap();
        assert!((est.bits - 4.0).abs() <= 3.0 * est.std_error + 1e-9, "{est:?}");
        assert!(mi_exact_estimate(&far, 0.5, 0, &mut rng).is_err());
    }

    #[test]
    fn objective_symmetry_and_improvement() {
        let u1 = pam_mother(4, true).unwrap();
        let n0 = 0.1;
        for (a, b) in [(10.0, 75.0), (60.0, 120.0), (33.0, 270.0)] {
            let x = rotation_objective(&u1, n0, a, b);
            let y = rotation_objective(&u1, n0, b, a);
            assert!((x - y).abs() < 1e-12);
        }
        assert!(rotation_objective(&u1, n0, 60.0, 120.0) >= rotation_objective(&u1, n0, 0.0, 0.0));
    }

    #[test]
    fn coarse_grid_search() {
        // With a 30 degree grid the optimum class still contains (60, 120).
        let u1 = pam_mother(4, true).unwrap();
        let best = optimize_rotation_angles(&u1, 0.1, 30.0).unwrap();
        assert_eq!((best.theta2_deg, best.theta3_deg), (60.0, 120.0));
        assert!(optimize_rotation_angles(&u1, 0.1, 7.0).is_err());
    }

    #[test]
    fn shaping_gain_cases() {
        let square = [c(0.5, 0.5), c(-0.5, 0.5), c(-0.5, -0.5), c(0.5, -0.5)];
        assert!((shaping_gain(&square, 2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let scaled: Vec<_> = square.iter().map(|p| p * 3.7).collect();
        assert!((shaping_gain(&scaled, 2).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let line = pam_mother(4, false).unwrap();
        assert!(shaping_gain(&line.points, 2).is_err());
        assert!(shaping_gain(&square, 3).is_err());
    }

    #[test]
    fn hull_drops_interior_points() {
        let pts = [
            c(0.0, 0.0),
            c(2.0, 0.0),
            c(2.0, 2.0),
            c(0.0, 2.0),
            c(1.0, 1.0),
            c(1.0, 0.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!((polygon_area(&hull) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn tabulated_indicator_reproduces_table1() {
        let cbs = assemble_codebooks(&printed_layers(), &indicator_6x4_tabulated()).unwrap();
        assert_eq!(cbs, fixtures::table1());
        let first = cbs.encode(0, 0).unwrap();
        assert_eq!(
            first.values(),
            &[c(-1.0, 0.0), c(0.0, 0.0), c(-0.1109, -0.3), c(0.0, 0.0)]
        );
    }

    #[test]
    fn plain_indicator_matches_table1_up_to_relabeling() {
        let cbs = assemble_codebooks(&printed_layers(), &indicator_6x4()).unwrap();
        assert!(cbs.validate_against_graph(&fixtures::graph_6x4()).passed());
        let t1 = fixtures::table1();
        for (a, b) in cbs.codebooks().iter().zip(t1.codebooks()) {
            for (ra, rb) in a.rows().iter().zip(b.rows()) {
                let mut x: Vec<_> = ra.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
                let mut y: Vec<_> = rb.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect();
                x.sort_unstable();
                y.sort_unstable();
                assert_eq!(x, y);
            }
        }
    }

    #[test]
    fn single_cell_indicator() {
        let u = pam_mother(4, false).unwrap();
        let ind = IndicatorMatrix::from_labels(&[vec![1]]).unwrap();
        let cbs = assemble_codebooks(std::slice::from_ref(&u), &ind).unwrap();
        assert_eq!(cbs.resources(), 1);
        assert_eq!(cbs.codebook(0).rows()[0], u.points);
    }

    #[test]
    fn malformed_indicators() {
        assert!(IndicatorMatrix::from_labels(&[vec![1, 0], vec![1, 0]]).is_err());
        assert!(IndicatorMatrix::from_labels(&[vec![1, 1], vec![0, 1]]).is_err());
        let ind = IndicatorMatrix::from_labels(&[vec![4]]).unwrap();
        assert!(assemble_codebooks(&printed_layers(), &ind).is_err());
        let ind = IndicatorMatrix::new(vec![vec![Some(IndicatorCell::permuted(1, vec![0, 0, 1, 2]))]]).unwrap();
        assert!(assemble_codebooks(&printed_layers(), &ind).is_err());
    }
}
