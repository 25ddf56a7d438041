//! Discrete approximations of planar domains on δZ² with two marked
//! boundary points and the induced two-arc partition of the boundary.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Lattice vertex in integer units; the physical position is δ·(i, j).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site {
    pub i: i32,
    pub j: i32,
}

impl Site {
    pub const fn new(i: i32, j: i32) -> Self {
        Site { i, j }
    }
    pub fn offset(self, d: (i32, i32)) -> Site {
        Site::new(self.i + d.0, self.j + d.1)
    }
    pub fn pos(self, delta: f64) -> [f64; 2] {
        [self.i as f64 * delta, self.j as f64 * delta]
    }
}

pub const DIRS: [(i32, i32); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    Square { origin: [f64; 2], side: f64 },
    Disk { center: [f64; 2], radius: f64 },
    Polygon { vertices: Vec<[f64; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    #[serde(flatten)]
    pub shape: Shape,
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl ShapeSpec {
    pub fn unit_square(a: [f64; 2], b: [f64; 2]) -> Self {
        ShapeSpec { shape: Shape::Square { origin: [0.0, 0.0], side: 1.0 }, a, b }
    }
    pub fn unit_disk(a: [f64; 2], b: [f64; 2]) -> Self {
        ShapeSpec { shape: Shape::Disk { center: [0.0, 0.0], radius: 1.0 }, a, b }
    }

    /// Parse `key = value` text (TOML) such as
    /// `shape = "disk"`, `center = [0,0]`, `radius = 1`, `a = [-1,0]`, `b = [1,0]`.
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.shape {
            Shape::Square { side, .. } if !(*side > 0.0) => {
                return Err(Error::BadParam("square side must be positive".into()))
            }
            Shape::Disk { radius, .. } if !(*radius > 0.0) => {
                return Err(Error::BadParam("disk radius must be positive".into()))
            }
            Shape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::BadParam("polygon needs at least 3 vertices".into()));
                }
                if polygon_self_intersects(vertices) {
                    return Err(Error::BadParam("polygon is not simple".into()));
                }
            }
            _ => {}
        }
        let scale = self.diameter();
        let tol = 1e-9 * scale.max(1.0);
        for (name, p) in [("a", self.a), ("b", self.b)] {
            if self.boundary_distance(p) > tol {
                return Err(Error::BadParam(format!("mark {name} is not on the shape boundary")));
            }
        }
        if (self.a[0] - self.b[0]).hypot(self.a[1] - self.b[1]) <= tol {
            return Err(Error::DegenerateMarks);
        }
        Ok(())
    }

    pub fn contains_strict(&self, p: [f64; 2]) -> bool {
        let eps = 1e-12 * self.diameter().max(1.0);
        match &self.shape {
            Shape::Square { origin, side } => {
                p[0] > origin[0] + eps
                    && p[0] < origin[0] + side - eps
                    && p[1] > origin[1] + eps
                    && p[1] < origin[1] + side - eps
            }
            Shape::Disk { center, radius } => {
                (p[0] - center[0]).hypot(p[1] - center[1]) < radius - eps
            }
            Shape::Polygon { vertices } => {
                point_in_polygon(vertices, p) && polygon_boundary_distance(vertices, p) > eps
            }
        }
    }

    pub fn boundary_distance(&self, p: [f64; 2]) -> f64 {
        match &self.shape {
            Shape::Square { origin, side } => {
                let v = [
                    *origin,
                    [origin[0] + side, origin[1]],
                    [origin[0] + side, origin[1] + side],
                    [origin[0], origin[1] + side],
                ];
                polygon_boundary_distance(&v, p)
            }
            Shape::Disk { center, radius } => {
                ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs()
            }
            Shape::Polygon { vertices } => polygon_boundary_distance(vertices, p),
        }
    }

    pub fn bbox(&self) -> ([f64; 2], [f64; 2]) {
        match &self.shape {
            Shape::Square { origin, side } => (*origin, [origin[0] + side, origin[1] + side]),
            Shape::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius],
                [center[0] + radius, center[1] + radius],
            ),
            Shape::Polygon { vertices } => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for v in vertices {
                    for k in 0..2 {
                        lo[k] = lo[k].min(v[k]);
                        hi[k] = hi[k].max(v[k]);
                    }
                }
                (lo, hi)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi[0] - lo[0]).hypot(hi[1] - lo[1])
    }

    /// Points along the continuum boundary, roughly `n` of them.
    pub fn boundary_samples(&self, n: usize) -> Vec<[f64; 2]> {
        match &self.shape {
            Shape::Disk { center, radius } => (0..n)
                .map(|k| {
                    let t = std::f64::consts::TAU * k as f64 / n as f64;
                    [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
                })
                .collect(),
            Shape::Square { origin, side } => {
                let v = vec![
                    *origin,
                    [origin[0] + side, origin[1]],
                    [origin[0] + side, origin[1] + side],
                    [origin[0], origin[1] + side],
                ];
                sample_polyline(&v, n)
            }
            Shape::Polygon { vertices } => sample_polyline(vertices, n),
        }
    }
}

fn sample_polyline(v: &[[f64; 2]], n: usize) -> Vec<[f64; 2]> {
    let m = v.len();
    let lens: Vec<f64> = (0..m)
        .map(|k| {
            let (p, q) = (v[k], v[(k + 1) % m]);
            (q[0] - p[0]).hypot(q[1] - p[1])
        })
        .collect();
    let total: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let mut t = total * s as f64 / n as f64;
        let mut k = 0;
        while k + 1 < m && t > lens[k] {
            t -= lens[k];
            k += 1;
        }
        let (p, q) = (v[k], v[(k + 1) % m]);
        let f = if lens[k] > 0.0 { t / lens[k] } else { 0.0 };
        out.push([p[0] + f * (q[0] - p[0]), p[1] + f * (q[1] - p[1])]);
    }
    out
}

pub(crate) fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let l2 = dx * dx + dy * dy;
    let t = if l2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn polygon_boundary_distance(v: &[[f64; 2]], p: [f64; 2]) -> f64 {
    (0..v.len()).map(|k| seg_dist(p, v[k], v[(k + 1) % v.len()])).fold(f64::INFINITY, f64::min)
}

fn point_in_polygon(v: &[[f64; 2]], p: [f64; 2]) -> bool {
    let mut inside = false;
    let n = v.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (v[i], v[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    };
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn polygon_self_intersects(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Signed area, positive for counterclockwise vertex order.
pub fn polygon_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    (0..n).map(|k| v[k][0] * v[(k + 1) % n][1] - v[(k + 1) % n][0] * v[k][1]).sum::<f64>() / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcSide {
    Minus,
    Plus,
}

/// One unit segment of ∂Ω̂ between an interior vertex `inner` and the
/// non-interior neighbour `outer`, oriented with the interior on its left.
/// Corner coordinates are doubled so that they stay integral.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HullSegment {
    pub inner: Site,
    pub outer: Site,
    pub start: (i32, i32),
    pub end: (i32, i32),
}

impl HullSegment {
    fn new(inner: Site, d: (i32, i32)) -> Self {
        // direction t = rot90(d) keeps the interior on the left
        let t = (-d.1, d.0);
        let c = (2 * inner.i + d.0, 2 * inner.j + d.1);
        HullSegment {
            inner,
            outer: inner.offset(d),
            start: (c.0 - t.0, c.1 - t.1),
            end: (c.0 + t.0, c.1 + t.1),
        }
    }
    pub fn dir(&self) -> (i32, i32) {
        ((self.end.0 - self.start.0) / 2, (self.end.1 - self.start.1) / 2)
    }
}

/// Where the two boundary arcs meet: the hull corner between the last
/// segment on one arc and the first segment on the other.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Junction {
    /// Doubled coordinates of the hull corner.
    pub corner: (i32, i32),
    /// Segment index (in `hull`) of the segment leaving the corner.
    pub seg: usize,
}

#[derive(Clone, Debug)]
pub struct DiscreteDomain {
    pub delta: f64,
    pub shape: ShapeSpec,
    /// Interior vertices in lexicographic order.
    pub interior: Vec<Site>,
    /// Boundary vertices: `arc_minus` followed by `arc_plus`.
    pub boundary: Vec<Site>,
    pub arc_minus: Vec<Site>,
    pub arc_plus: Vec<Site>,
    pub a_mark: Site,
    pub b_mark: Site,
    pub bounding_radius: f64,
    /// ∂Ω̂ as a closed counterclockwise loop of unit segments, starting at the a-junction.
    pub hull: Vec<HullSegment>,
    /// Arc label of every hull segment (the arc of its outer vertex).
    pub hull_side: Vec<ArcSide>,
    pub a_junction: Junction,
    pub b_junction: Junction,
    /// V − E + F of the hull complex, counting the unbounded face.
    pub euler: i64,
    grid: Grid,
}

#[derive(Clone, Debug)]
struct Grid {
    i0: i32,
    j0: i32,
    w: i32,
    h: i32,
    /// −1 outside, otherwise the vertex index (interior first, then boundary).
    cell: Vec<i32>,
}

impl Grid {
    #[inline]
    fn get(&self, s: Site) -> i32 {
        let (x, y) = (s.i - self.i0, s.j - self.j0);
        if x < 0 || y < 0 || x >= self.w || y >= self.h {
            -1
        } else {
            self.cell[(y * self.w + x) as usize]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VertexKind {
    Interior,
    Boundary(ArcSide),
    Outside,
}

pub fn build_domain(shape: &ShapeSpec, delta: f64) -> Result<DiscreteDomain> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::BadParam("delta must be positive".into()));
    }
    shape.validate()?;
    let (lo, hi) = shape.bbox();
    let i_lo = (lo[0] / delta).floor() as i32 - 1;
    let i_hi = (hi[0] / delta).ceil() as i32 + 1;
    let j_lo = (lo[1] / delta).floor() as i32 - 1;
    let j_hi = (hi[1] / delta).ceil() as i32 + 1;
    let mut interior = Vec::new();
    for i in i_lo..=i_hi {
        for j in j_lo..=j_hi {
            let s = Site::new(i, j);
            if shape.contains_strict(s.pos(delta)) {
                interior.push(s);
            }
        }
    }
    if interior.is_empty() {
        return Err(Error::EmptyDomain);
    }
    interior.sort();
    DiscreteDomain::from_sites(shape.clone(), delta, interior)
}

impl DiscreteDomain {
    /// Domain from an explicit interior vertex set. Marks are taken from `shape.a`, `shape.b`.
    pub fn from_sites(shape: ShapeSpec, delta: f64, mut interior: Vec<Site>) -> Result<Self> {
        if interior.is_empty() {
            return Err(Error::EmptyDomain);
        }
        interior.sort();
        interior.dedup();
        let i0 = interior.iter().map(|s| s.i).min().unwrap() - 2;
        let j0 = interior.iter().map(|s| s.j).min().unwrap() - 2;
        let w = interior.iter().map(|s| s.i).max().unwrap() - i0 + 3;
        let h = interior.iter().map(|s| s.j).max().unwrap() - j0 + 3;
        let mut grid = Grid { i0, j0, w, h, cell: vec![-1; (w * h) as usize] };
        let idx = |g: &Grid, s: Site| ((s.j - g.j0) * g.w + (s.i - g.i0)) as usize;
        for (k, s) in interior.iter().enumerate() {
            let c = idx(&grid, *s);
            grid.cell[c] = k as i32;
        }

        // 4-connectivity of the interior
        let n = interior.len();
        let mut seen = vec![false; n];
        let mut q = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(k) = q.pop_front() {
            for d in DIRS {
                let m = grid.get(interior[k].offset(d));
                if m >= 0 && !seen[m as usize] {
                    seen[m as usize] = true;
                    count += 1;
                    q.push_back(m as usize);
                }
            }
        }
        if count != n {
            return Err(Error::NotSimplyConnected("interior is disconnected".into()));
        }

        // holes: every non-interior cell of the padded box must be 4-connected to the frame
        let total = (w * h) as usize;
        let mut out_seen = vec![false; total];
        let mut q = VecDeque::new();
        for c in 0..total {
            let (x, y) = ((c as i32) % w, (c as i32) / w);
            if (x == 0 || y == 0 || x == w - 1 || y == h - 1) && grid.cell[c] < 0 {
                out_seen[c] = true;
                q.push_back(c);
            }
        }
        while let Some(c) = q.pop_front() {
            let (x, y) = ((c as i32) % w, (c as i32) / w);
            for d in DIRS {
                let (nx, ny) = (x + d.0, y + d.1);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let nc = (ny * w + nx) as usize;
                if grid.cell[nc] < 0 && !out_seen[nc] {
                    out_seen[nc] = true;
                    q.push_back(nc);
                }
            }
        }
        if (0..total).any(|c| grid.cell[c] < 0 && !out_seen[c]) {
            return Err(Error::NotSimplyConnected("hull has a hole".into()));
        }

        // Euler characteristic of the closed hull complex
        let mut corners = std::collections::HashSet::new();
        let mut edges = std::collections::HashSet::new();
        for s in &interior {
            let (x, y) = (2 * s.i, 2 * s.j);
            for (dx, dy) in [(-1, -1), (1, -1), (1, 1), (-1, 1)] {
                corners.insert((x + dx, y + dy));
            }
            for d in DIRS {
                edges.insert((x + d.0, y + d.1));
            }
        }
        let euler = corners.len() as i64 - edges.len() as i64 + n as i64 + 1;
        if euler != 2 {
            return Err(Error::NotSimplyConnected(format!("Euler characteristic {euler} != 2")));
        }

        // hull segments and their ccw traversal
        let mut segs = Vec::new();
        for s in &interior {
            for d in DIRS {
                if grid.get(s.offset(d)) < 0 {
                    segs.push(HullSegment::new(*s, d));
                }
            }
        }
        let mut by_start: HashMap<(i32, i32), Vec<usize>> = HashMap::new();
        for (k, sg) in segs.iter().enumerate() {
            by_start.entry(sg.start).or_default().push(k);
        }
        if by_start.values().any(|v| v.len() != 1) {
            return Err(Error::NotSimplyConnected("pinched hull".into()));
        }
        let first = (0..segs.len()).min_by_key(|&k| (segs[k].inner, segs[k].outer)).unwrap();
        let mut order = Vec::with_capacity(segs.len());
        let mut cur = first;
        loop {
            order.push(cur);
            let nxt = by_start[&segs[cur].end][0];
            if nxt == first {
                break;
            }
            if order.len() > segs.len() {
                return Err(Error::NotSimplyConnected("hull traversal does not close".into()));
            }
            cur = nxt;
        }
        if order.len() != segs.len() {
            return Err(Error::NotSimplyConnected("hull boundary has several loops".into()));
        }
        let loop_segs: Vec<HullSegment> = order.iter().map(|&k| segs[k]).collect();

        // boundary vertices, marks
        let mut bset: Vec<Site> = loop_segs.iter().map(|s| s.outer).collect();
        bset.sort();
        bset.dedup();
        let nearest = |p: [f64; 2]| -> Site {
            *bset
                .iter()
                .min_by(|x, y| {
                    let dx = dist2(x.pos(delta), p);
                    let dy = dist2(y.pos(delta), p);
                    dx.partial_cmp(&dy).unwrap().then(x.cmp(y))
                })
                .unwrap()
        };
        let a_mark = nearest(shape.a);
        let b_mark = nearest(shape.b);
        if a_mark == b_mark {
            return Err(Error::DegenerateMarks);
        }

        // rotate the loop so it starts at the first segment whose outer vertex is a_mark
        // and whose predecessor is not a_mark
        let m = loop_segs.len();
        let start = (0..m)
            .find(|&k| loop_segs[k].outer == a_mark && loop_segs[(k + m - 1) % m].outer != a_mark)
            .unwrap();
        let hull: Vec<HullSegment> = (0..m).map(|k| loop_segs[(start + k) % m]).collect();
        let b_pos = (0..m)
            .find(|&k| hull[k].outer == b_mark && hull[(k + m - 1) % m].outer != b_mark)
            .unwrap();

        let mut side_of: HashMap<Site, ArcSide> = HashMap::new();
        let mut arc_minus = Vec::new();
        let mut arc_plus = Vec::new();
        for (k, sg) in hull.iter().enumerate() {
            let side = if k < b_pos { ArcSide::Minus } else { ArcSide::Plus };
            if let Some(prev) = side_of.get(&sg.outer) {
                if *prev != side {
                    continue;
                }
            } else {
                side_of.insert(sg.outer, side);
                match side {
                    ArcSide::Minus => arc_minus.push(sg.outer),
                    ArcSide::Plus => arc_plus.push(sg.outer),
                }
            }
        }
        let hull_side: Vec<ArcSide> = hull.iter().map(|s| side_of[&s.outer]).collect();
        let changes = (0..m).filter(|&k| hull_side[k] != hull_side[(k + m - 1) % m]).count();
        if changes != 2 || arc_minus.is_empty() || arc_plus.is_empty() {
            return Err(Error::DegenerateMarks);
        }
        let b_seg = (0..m)
            .find(|&k| hull_side[k] == ArcSide::Plus && hull_side[(k + m - 1) % m] == ArcSide::Minus)
            .unwrap();
        let a_junction = Junction { corner: hull[0].start, seg: 0 };
        let b_junction = Junction { corner: hull[b_seg].start, seg: b_seg };

        let mut boundary = arc_minus.clone();
        boundary.extend_from_slice(&arc_plus);
        for (k, s) in boundary.iter().enumerate() {
            let c = idx(&grid, *s);
            grid.cell[c] = (n + k) as i32;
        }
        let bounding_radius = interior
            .iter()
            .map(|s| {
                let p = s.pos(delta);
                p[0].hypot(p[1])
            })
            .fold(0.0, f64::max);

        Ok(DiscreteDomain {
            delta,
            shape,
            interior,
            boundary,
            arc_minus,
            arc_plus,
            a_mark,
            b_mark,
            bounding_radius,
            hull,
            hull_side,
            a_junction,
            b_junction,
            euler,
            grid,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    /// Number of vertices in interior ∪ boundary.
    pub fn n_vertices(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    /// Vertex index (interior first, then boundary in `boundary` order).
    #[inline]
    pub fn index(&self, s: Site) -> Option<usize> {
        let v = self.grid.get(s);
        if v < 0 { None } else { Some(v as usize) }
    }

    #[inline]
    pub fn site(&self, idx: usize) -> Site {
        if idx < self.interior.len() {
            self.interior[idx]
        } else {
            self.boundary[idx - self.interior.len()]
        }
    }

    pub fn kind(&self, s: Site) -> VertexKind {
        match self.index(s) {
            None => VertexKind::Outside,
            Some(k) if k < self.interior.len() => VertexKind::Interior,
            Some(k) => {
                if k - self.interior.len() < self.arc_minus.len() {
                    VertexKind::Boundary(ArcSide::Minus)
                } else {
                    VertexKind::Boundary(ArcSide::Plus)
                }
            }
        }
    }

    pub fn is_interior(&self, s: Site) -> bool {
        matches!(self.index(s), Some(k) if k < self.interior.len())
    }

    pub fn pos(&self, s: Site) -> [f64; 2] {
        s.pos(self.delta)
    }

    /// Nearest interior vertex to a continuum point.
    pub fn nearest_interior(&self, p: [f64; 2]) -> Option<usize> {
        let s = Site::new((p[0] / self.delta).round() as i32, (p[1] / self.delta).round() as i32);
        if self.is_interior(s) {
            return self.index(s);
        }
        (0..self.interior.len()).min_by(|&x, &y| {
            dist2(self.interior[x].pos(self.delta), p)
                .partial_cmp(&dist2(self.interior[y].pos(self.delta), p))
                .unwrap()
        })
    }

    /// Edges E(Ω_δ): lattice edges with at least one interior endpoint, as vertex index pairs.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let n = self.interior.len();
        let mut out = Vec::with_capacity(2 * n + self.boundary.len());
        for (k, s) in self.interior.iter().enumerate() {
            for d in DIRS {
                let m = self.index(s.offset(d)).expect("neighbour of interior is in the domain");
                if m >= n || (d == (1, 0) || d == (0, 1)) {
                    out.push((k as u32, m as u32));
                }
            }
        }
        out
    }

    /// Stable content hash (mesh, interior set, marks).
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.delta.to_le_bytes());
        for s in &self.interior {
            h.update(s.i.to_le_bytes());
            h.update(s.j.to_le_bytes());
        }
        for s in [self.a_mark, self.b_mark] {
            h.update(s.i.to_le_bytes());
            h.update(s.j.to_le_bytes());
        }
        hex(&h.finalize())
    }

    /// Vertex/arc listing: `i,j,x,y,kind`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,x,y,kind\n");
        let rows = self
            .interior
            .iter()
            .map(|v| (v, "interior"))
            .chain(self.arc_minus.iter().map(|v| (v, "minus")))
            .chain(self.arc_plus.iter().map(|v| (v, "plus")));
        for (v, kind) in rows {
            let p = v.pos(self.delta);
            let _ = writeln!(s, "{},{},{},{},{}", v.i, v.j, p[0], p[1], kind);
        }
        s
    }

    /// ∂Ω̂ as a closed polygon in physical coordinates (counterclockwise).
    pub fn hull_polygon(&self) -> Vec<[f64; 2]> {
        let mut pts = Vec::new();
        let m = self.hull.len();
        for k in 0..m {
            // keep only corners where the direction changes
            let prev = self.hull[(k + m - 1) % m].dir();
            if prev != self.hull[k].dir() {
                let c = self.hull[k].start;
                pts.push([c.0 as f64 * self.delta / 2.0, c.1 as f64 * self.delta / 2.0]);
            }
        }
        pts
    }

    /// Hausdorff distance between ∂Ω̂ (hull corners and segment midpoints) and the
    /// continuum boundary (sampled).
    pub fn hull_hausdorff(&self, samples: usize) -> f64 {
        let pts: Vec<[f64; 2]> = self
            .hull
            .iter()
            .flat_map(|s| {
                let c = [s.start.0 as f64 * self.delta / 2.0, s.start.1 as f64 * self.delta / 2.0];
                let m = [
                    (s.start.0 + s.end.0) as f64 * self.delta / 4.0,
                    (s.start.1 + s.end.1) as f64 * self.delta / 4.0,
                ];
                [c, m]
            })
            .collect();
        let one = pts.iter().map(|p| self.shape.boundary_distance(*p)).fold(0.0, f64::max);
        let poly = self.hull_polygon();
        let two = self
            .shape
            .boundary_samples(samples)
            .iter()
            .map(|q| polygon_boundary_distance(&poly, *q))
            .fold(0.0, f64::max);
        one.max(two)
    }

    pub fn arc(&self, side: ArcSide) -> &[Site] {
        match side {
            ArcSide::Minus => &self.arc_minus,
            ArcSide::Plus => &self.arc_plus,
        }
    }
}

/// Interior vertices within Euclidean distance `eta` of the chosen arc (indices, increasing).
pub fn arc_neighborhood(domain: &DiscreteDomain, side: ArcSide, eta: f64) -> Vec<usize> {
    let arc = domain.arc(side);
    let r = (eta / domain.delta).floor() as i32 + 1;
    let eta2 = (eta / domain.delta).powi(2) * (1.0 + 1e-12);
    let mut hit = vec![false; domain.n_interior()];
    for b in arc {
        for di in -r..=r {
            for dj in -r..=r {
                if (di * di + dj * dj) as f64 > eta2 {
                    continue;
                }
                let s = b.offset((di, dj));
                if let Some(k) = domain.index(s) {
                    if k < hit.len() {
                        hit[k] = true;
                    }
                }
            }
        }
    }
    (0..hit.len()).filter(|&k| hit[k]).collect()
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_quarter_mesh() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 0.25).unwrap();
        let want: Vec<Site> = (1..=3).flat_map(|i| (1..=3).map(move |j| Site::new(i, j))).collect();
        assert_eq!(d.interior, want);
        assert_eq!(d.boundary.len(), 12);
        assert_eq!(d.euler, 2);
    }

    #[test]
    fn square_half_mesh_single_vertex() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]), 0.5).unwrap();
        assert_eq!(d.interior, vec![Site::new(1, 1)]);
        let mut b = d.boundary.clone();
        b.sort();
        assert_eq!(b, vec![Site::new(0, 1), Site::new(1, 0), Site::new(1, 2), Site::new(2, 1)]);
    }

    #[test]
    fn disk_arcs_partition() {
        let d = build_domain(&ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]), 0.125).unwrap();
        // independent flood fill for the boundary set
        let mut brute = std::collections::BTreeSet::new();
        for s in &d.interior {
            for dd in DIRS {
                let w = s.offset(dd);
                if !d.interior.contains(&w) {
                    brute.insert(w);
                }
            }
        }
        let mut got: Vec<Site> = d.arc_minus.iter().chain(&d.arc_plus).copied().collect();
        got.sort();
        let n = got.len();
        got.dedup();
        assert_eq!(n, got.len(), "arcs overlap");
        assert_eq!(got, brute.into_iter().collect::<Vec<_>>());
        assert!(!d.arc_minus.is_empty() && !d.arc_plus.is_empty());
        // ccw from a=-1 to b=+1 passes through the lower half
        assert!(d.arc_minus.iter().all(|s| s.j <= 0));
        assert!(d.arc_plus.iter().all(|s| s.j >= 0));
    }

    #[test]
    fn empty_and_bad_inputs() {
        let tiny = ShapeSpec {
            shape: Shape::Disk { center: [0.5, 0.5], radius: 0.1 },
            a: [0.4, 0.5],
            b: [0.6, 0.5],
        };
        assert!(matches!(build_domain(&tiny, 1.0), Err(Error::EmptyDomain)));
        let off = ShapeSpec::unit_square([0.5, 0.5], [1.0, 1.0]);
        assert!(build_domain(&off, 0.1).is_err());
    }

    #[test]
    fn polygon_l_shape() {
        let spec = ShapeSpec {
            shape: Shape::Polygon {
                vertices: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]],
            },
            a: [0.0, 0.5],
            b: [2.0, 0.5],
        };
        let d = build_domain(&spec, 0.125).unwrap();
        assert_eq!(d.euler, 2);
        // 15x7 + 7x8 interior points
        assert_eq!(d.n_interior(), 15 * 7 + 7 * 8);
    }

    #[test]
    fn hole_rejected() {
        let mut sites = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if (i, j) != (1, 1) {
                    sites.push(Site::new(i, j));
                }
            }
        }
        let spec = ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]);
        assert!(matches!(
            DiscreteDomain::from_sites(spec, 1.0, sites),
            Err(Error::NotSimplyConnected(_))
        ));
    }

    #[test]
    fn arc_neighborhood_matches_brute_force() {
        let d = build_domain(&ShapeSpec::unit_square([0.0, 0.5], [1.0, 0.5]), 0.125).unwrap();
        let got = arc_neighborhood(&d, ArcSide::Minus, 0.2);
        let brute: Vec<usize> = (0..d.n_interior())
            .filter(|&k| {
                let p = d.pos(d.interior[k]);
                d.arc_minus.iter().any(|b| dist2(d.pos(*b), p).sqrt() <= 0.2)
            })
            .collect();
        assert_eq!(got, brute);
        assert!(arc_neighborhood(&d, ArcSide::Minus, 0.06).is_empty());
        assert_eq!(arc_neighborhood(&d, ArcSide::Plus, 2.0).len(), d.n_interior());
    }

    #[test]
    fn hausdorff_scales_with_mesh() {
        for spec in [
            ShapeSpec::unit_square([0.0, 0.0], [1.0, 1.0]),
            ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]),
        ] {
            for m in [8, 16, 32, 64] {
                let delta = 1.0 / m as f64;
                let d = build_domain(&spec, delta).unwrap();
                assert!(d.hull_hausdorff(2000) <= 2.0 * delta, "mesh 1/{m}");
            }
        }
    }

    #[test]
    fn deterministic_rebuild() {
        let spec = ShapeSpec::unit_disk([-1.0, 0.0], [0.0, 1.0]);
        let a = build_domain(&spec, 1.0 / 24.0).unwrap();
        let b = build_domain(&spec, 1.0 / 24.0).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.arc_minus, b.arc_minus);
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn toml_spec() {
        let s = ShapeSpec::from_toml("shape = \"disk\"\ncenter = [0.0, 0.0]\nradius = 1.0\na = [-1.0, 0.0]\nb = [1.0, 0.0]\n").unwrap();
        assert_eq!(s, ShapeSpec::unit_disk([-1.0, 0.0], [1.0, 0.0]));
    }
}
