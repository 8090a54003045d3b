//! Boxes `B_L(x)`, boundary shells and the dangerous-cube cover.
//!
//! All distances are sup-norm distances on `Z^d`. Sites inside a box are
//! ordered lexicographically (first coordinate most significant); that
//! ordering is the row/column ordering of every assembled operator.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of `Z^d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn origin(d: usize) -> Self {
        Site(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// `self − other`.
    pub fn displacement(&self, other: &Site) -> Vec<i64> {
        self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()
    }

    pub fn sup_dist(&self, other: &Site) -> i64 {
        sup_dist(&self.0, &other.0)
    }

    /// `self + t·e_axis`.
    pub fn shifted(&self, axis: usize, t: i64) -> Site {
        let mut c = self.0.clone();
        c[axis] += t;
        Site(c)
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site(v)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn sup_dist(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// The cube `B_L(x) = {y : ‖y − x‖∞ ≤ L}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeBox {
    center: Site,
    radius: i64,
}

impl LatticeBox {
    pub fn new(center: Site, radius: i64) -> Result<Self> {
        if center.dim() == 0 {
            return Err(Error::invalid("d≥1", "zero-dimensional center"));
        }
        if radius < 1 {
            return Err(Error::invalid("L≥1", format!("radius = {radius}")));
        }
        Ok(LatticeBox { center, radius })
    }

    /// `B_L(0)` in `Z^d`.
    pub fn centered(d: usize, radius: i64) -> Result<Self> {
        Self::new(Site::origin(d), radius)
    }

    pub fn center(&self) -> &Site {
        &self.center
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn side(&self) -> i64 {
        2 * self.radius + 1
    }

    /// Sup-norm diameter `2L`.
    pub fn diameter(&self) -> i64 {
        2 * self.radius
    }

    /// `(2L+1)^d`, or `None` on overflow.
    pub fn checked_len(&self) -> Option<usize> {
        let side = usize::try_from(self.side()).ok()?;
        side.checked_pow(u32::try_from(self.dim()).ok()?)
    }

    /// `(2L+1)^d`. Panics on overflow; use [`checked_len`](Self::checked_len)
    /// for untrusted radii.
    pub fn len(&self) -> usize {
        self.checked_len().expect("box site count overflows usize")
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, y: &[i64]) -> bool {
        y.len() == self.dim() && sup_dist(y, &self.center.0) <= self.radius
    }

    /// `true` when every site of `self` lies in `other`.
    pub fn is_subset_of(&self, other: &LatticeBox) -> bool {
        self.dim() == other.dim()
            && self.center.sup_dist(&other.center) + self.radius <= other.radius
    }

    /// Set distance `min ‖a − b‖∞` over `a ∈ self`, `b ∈ other`.
    pub fn distance_to(&self, other: &LatticeBox) -> i64 {
        (self.center.sup_dist(&other.center) - self.radius - other.radius).max(0)
    }

    /// Lexicographic index of `y`, if inside.
    pub fn index_of(&self, y: &[i64]) -> Option<usize> {
        if !self.contains(y) {
            return None;
        }
        let side = self.side() as usize;
        Some(
            y.iter()
                .zip(&self.center.0)
                .fold(0usize, |acc, (yc, cc)| acc * side + (yc - cc + self.radius) as usize),
        )
    }

    /// Writes the coordinates of site `index` into `out`.
    pub fn coords_into(&self, mut index: usize, out: &mut [i64]) {
        let side = self.side() as usize;
        for k in (0..self.dim()).rev() {
            out[k] = self.center.0[k] - self.radius + (index % side) as i64;
            index /= side;
        }
    }

    pub fn site_at(&self, index: usize) -> Site {
        let mut c = vec![0; self.dim()];
        self.coords_into(index, &mut c);
        Site(c)
    }

    /// All sites, in lexicographic order.
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len()).map(move |i| self.site_at(i))
    }

    /// Flat `len × d` coordinate table in site order.
    pub fn coordinate_table(&self) -> Vec<i64> {
        let d = self.dim();
        let mut out = vec![0; self.len() * d];
        for (i, chunk) in out.chunks_mut(d).enumerate() {
            self.coords_into(i, chunk);
        }
        out
    }

    /// Indices of `sub`'s sites inside `self`, in `sub`'s site order.
    pub fn indices_of(&self, sub: &LatticeBox) -> Result<Vec<usize>> {
        if !sub.is_subset_of(self) {
            return Err(Error::Precondition(format!(
                "box B_{}{} is not contained in B_{}{}",
                sub.radius, sub.center, self.radius, self.center
            )));
        }
        let mut buf = vec![0; self.dim()];
        Ok((0..sub.len())
            .map(|i| {
                sub.coords_into(i, &mut buf);
                self.index_of(&buf).expect("subset site")
            })
            .collect())
    }

    /// `L^{4/5}`, the inner radius of the out-shell.
    pub fn out_shell_threshold(&self) -> f64 {
        (self.radius as f64).powf(0.8)
    }

    /// `true` for `L^{4/5} < ‖y − x‖∞ ≤ L`.
    pub fn in_out_shell(&self, y: &[i64]) -> bool {
        self.contains(y) && (sup_dist(y, &self.center.0) as f64) > self.out_shell_threshold()
    }

    /// Indices of the out-shell sites (empty for `L = 1`).
    pub fn out_shell_indices(&self) -> Vec<usize> {
        let mut buf = vec![0; self.dim()];
        let threshold = self.out_shell_threshold();
        (0..self.len())
            .filter(|&i| {
                self.coords_into(i, &mut buf);
                (sup_dist(&buf, &self.center.0) as f64) > threshold
            })
            .collect()
    }
}

impl fmt::Display for LatticeBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B_{}{}", self.radius, self.center)
    }
}

/// The boundary shell `B_L^out(x) = {y ∈ B_L(x) : ‖y − x‖ > L^{4/5}}`.
pub fn out_shell_sites(b: &LatticeBox) -> Result<Vec<Site>> {
    if b.radius() < 2 {
        return Err(Error::invalid("L≥2", format!("radius = {}", b.radius())));
    }
    Ok(b.out_shell_indices().into_iter().map(|i| b.site_at(i)).collect())
}

/// Componentwise clamp of `z` into `B_{L−m}(x)`.
///
/// The result `z*` satisfies `‖z* − x‖ ≤ L − m` and `‖z* − z‖ ≤ m`.
pub fn clamp_center(z: &Site, x: &Site, big_l: i64, margin: i64) -> Result<Site> {
    if margin > big_l || margin < 0 {
        return Err(Error::invalid("0≤m≤L", format!("m = {margin}, L = {big_l}")));
    }
    if z.dim() != x.dim() {
        return Err(Error::Precondition(format!("dimension mismatch: {z} vs {x}")));
    }
    if z.sup_dist(x) > big_l {
        return Err(Error::Precondition(format!("‖z − x‖ > L for z = {z}, x = {x}, L = {big_l}")));
    }
    let reach = big_l - margin;
    Ok(Site(
        z.0.iter()
            .zip(&x.0)
            .map(|(&zk, &xk)| zk.clamp(xk - reach, xk + reach))
            .collect(),
    ))
}

/// Integer midpoint, rounding half-integers up.
fn parity_midpoint(a: &Site, b: &Site) -> Site {
    Site(
        a.0.iter()
            .zip(&b.0)
            .map(|(&p, &q)| (p + q).div_euclid(2) + (p + q).rem_euclid(2))
            .collect(),
    )
}

/// Which branch of the cover construction produced a cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverCase {
    /// No bad centers.
    Empty,
    /// Every `B_{2l}(z_i*)` kept separately.
    Separate,
    /// A close pair merged into one `8l`-cube; a third center (if any) keeps
    /// its `2l`-cube.
    MergedPair,
    /// Everything merged into a single `26l`-cube.
    MergedAll,
}

/// Dangerous cubes isolating up to three bad `l`-cubes inside a parent box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DangerousCover {
    pub parent: LatticeBox,
    pub l: i64,
    pub case: CoverCase,
    pub cubes: Vec<LatticeBox>,
    /// The clamped centers `z_i*` of the `2l`-cubes, in input order.
    pub starred: Vec<Site>,
}

/// Outcome of the four structural checks on a cover.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverInvariants {
    /// `dist(B_i, B_j) ≥ 2l` for `i ≠ j`.
    pub separated: bool,
    /// `∪ B_i ⊇ ∪ B_{2l}(z_i*)`.
    pub covers_starred: bool,
    /// `Σ diam(B_i) ≤ 52l`.
    pub diameter_budget: bool,
    /// Every `B_i ⊆ parent`.
    pub inside_parent: bool,
}

impl CoverInvariants {
    pub fn all(&self) -> bool {
        self.separated && self.covers_starred && self.diameter_budget && self.inside_parent
    }
}

impl DangerousCover {
    /// Assembles a cover from explicit cubes (for diagnostics and
    /// counterexample searches).
    pub fn from_parts(parent: LatticeBox, l: i64, cubes: Vec<LatticeBox>, starred: Vec<Site>) -> Self {
        DangerousCover {
            parent,
            l,
            case: CoverCase::Separate,
            cubes,
            starred,
        }
    }

    pub fn total_diameter(&self) -> i64 {
        self.cubes.iter().map(LatticeBox::diameter).sum()
    }

    pub fn contains(&self, y: &[i64]) -> bool {
        self.cubes.iter().any(|c| c.contains(y))
    }

    /// Checks the structural invariants by enumeration.
    pub fn invariants(&self) -> CoverInvariants {
        let l = self.l;
        let separated = self.cubes.iter().enumerate().all(|(i, a)| {
            self.cubes[i + 1..].iter().all(|b| a.distance_to(b) >= 2 * l)
        });
        let covers_starred = self.starred.iter().all(|z| {
            let b = LatticeBox {
                center: z.clone(),
                radius: 2 * l,
            };
            let mut buf = vec![0; b.dim()];
            (0..b.len()).all(|i| {
                b.coords_into(i, &mut buf);
                self.contains(&buf)
            })
        });
        CoverInvariants {
            separated,
            covers_starred,
            diameter_budget: self.total_diameter() <= 52 * l,
            inside_parent: self.cubes.iter().all(|c| c.is_subset_of(&self.parent)),
        }
    }
}

/// Builds the dangerous cubes for up to three bad `l`-cube centers.
///
/// Requires `B_l(z_i) ⊆ parent` for every center and `L ≥ 26l`.
pub fn dangerous_cover(bad_centers: &[Site], parent: &LatticeBox, l: i64) -> Result<DangerousCover> {
    if l < 1 {
        return Err(Error::invalid("l≥1", format!("l = {l}")));
    }
    if bad_centers.len() > 3 {
        return Err(Error::Precondition(format!(
            "at most 3 bad centers, got {}",
            bad_centers.len()
        )));
    }
    let big_l = parent.radius();
    if big_l < 26 * l {
        return Err(Error::invalid("L≥26l", format!("L = {big_l}, l = {l}")));
    }
    let x = parent.center();
    for z in bad_centers {
        if z.dim() != parent.dim() || z.sup_dist(x) > big_l - l {
            return Err(Error::Precondition(format!("B_{l}{z} is not contained in {parent}")));
        }
    }

    let starred: Vec<Site> = bad_centers
        .iter()
        .map(|z| clamp_center(z, x, big_l, 2 * l))
        .collect::<Result<_>>()?;
    let cube = |c: &Site, r: i64| LatticeBox {
        center: c.clone(),
        radius: r,
    };
    let done = |case, cubes| {
        Ok(DangerousCover {
            parent: parent.clone(),
            l,
            case,
            cubes,
            starred: starred.clone(),
        })
    };

    if starred.is_empty() {
        return done(CoverCase::Empty, Vec::new());
    }
    // dist(B_2l(a), B_2l(b)) < 2l  ⇔  ‖a − b‖ < 6l
    let close = [(0, 1), (0, 2), (1, 2)]
        .into_iter()
        .find(|&(i, j)| j < starred.len() && starred[i].sup_dist(&starred[j]) < 6 * l);
    let Some((i, j)) = close else {
        return done(
            CoverCase::Separate,
            starred.iter().map(|z| cube(z, 2 * l)).collect(),
        );
    };

    let merged_center = clamp_center(&parity_midpoint(&starred[i], &starred[j]), x, big_l, 8 * l)?;
    let third = (0..starred.len()).find(|&k| k != i && k != j);
    let Some(k) = third else {
        return done(CoverCase::MergedPair, vec![cube(&merged_center, 8 * l)]);
    };

    let third_center = clamp_center(&starred[k], x, big_l, 8 * l)?;
    // dist(B_8l(a), B_8l(b)) ≥ 2l  ⇔  ‖a − b‖ ≥ 18l
    if merged_center.sup_dist(&third_center) >= 18 * l {
        return done(
            CoverCase::MergedPair,
            vec![cube(&merged_center, 8 * l), cube(&starred[k], 2 * l)],
        );
    }
    let all_center = clamp_center(
        &parity_midpoint(&merged_center, &third_center),
        x,
        big_l,
        26 * l,
    )?;
    done(CoverCase::MergedAll, vec![cube(&all_center, 26 * l)])
}

/// Result of the exhaustive disjointness check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Disjointness {
    Pass { checked: usize },
    Fail { witness: Site, bad_center: Site },
}

impl Disjointness {
    pub fn passed(&self) -> bool {
        matches!(self, Disjointness::Pass { .. })
    }
}

/// Verifies that every `z` in the parent with `‖z − x‖ ≤ L − l` and outside
/// the cover has `B_l(z) ∩ B_l(z_i) = ∅` for every bad center `z_i`.
pub fn cover_disjointness_check(cover: &DangerousCover, bad_centers: &[Site], l: i64) -> Disjointness {
    let parent = &cover.parent;
    let x = parent.center().coords();
    let reach = parent.radius() - l;
    let mut buf = vec![0; parent.dim()];
    let mut checked = 0;
    for idx in 0..parent.len() {
        parent.coords_into(idx, &mut buf);
        if sup_dist(&buf, x) > reach || cover.contains(&buf) {
            continue;
        }
        checked += 1;
        if let Some(z) = bad_centers.iter().find(|z| sup_dist(&buf, z.coords()) <= 2 * l) {
            return Disjointness::Fail {
                witness: Site(buf),
                bad_center: z.clone(),
            };
        }
    }
    Disjointness::Pass { checked }
}
