//! Meshes of the truncated cylinder `C_Y = Ω × (0, Y)`.
//!
//! A cylinder mesh is the tensor product of a base mesh of `Ω` (an interval
//! partition of `(0,1)` or a uniform grid of `(0,1)^2`) with a partition of
//! `[0, Y]` graded towards `y = 0`.
//!
//! Degrees of freedom are numbered line by line: every interior base vertex
//! owns one vertical line of `M` unknowns (levels `0..M`, the top level `M`
//! lies on the Dirichlet face `Ω × {Y}`), and
//! `dof = line * M + level`. Lines are therefore contiguous blocks, which is
//! what the line smoothers and the Kronecker-structured assembly rely on.

use crate::error::{invalid, Error, Result};

/// Partition `0 = y_0 < y_1 < ... < y_M = Y` with `y_k = (k/M)^γ Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedInterval {
    points: Vec<f64>,
    grading: f64,
    height: f64,
}

impl GradedInterval {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Number of cells `M`.
    pub fn cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn widths(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Graded partition of `[0, Y]` into `m` cells with exponent `grading`.
pub fn graded_points(m: usize, grading: f64, height: f64) -> Result<GradedInterval> {
    if m == 0 {
        return invalid("graded interval needs at least one cell");
    }
    if !(grading > 0.0 && grading.is_finite()) {
        return invalid(format!("grading exponent must be positive, got {grading}"));
    }
    if !(height > 0.0 && height.is_finite()) {
        return invalid(format!("truncation height must be positive, got {height}"));
    }
    let mf = m as f64;
    let mut points: Vec<f64> = (0..=m).map(|k| height * (k as f64 / mf).powf(grading)).collect();
    points[m] = height;
    Ok(GradedInterval {
        points,
        grading,
        height,
    })
}

/// Grading exponent `1.05 · 3/(2s)`, five percent above the threshold
/// `3/(2s)` that the graded estimates need.
pub fn default_grading(s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("fractional order must lie in (0,1), got {s}"));
    }
    Ok(1.05 * 3.0 / (2.0 * s))
}

/// Truncation height `Y = 1 + ln(#cells)/3`.
pub fn truncation_height(num_base_cells: usize) -> Result<f64> {
    if num_base_cells == 0 {
        return invalid("base mesh has no cells");
    }
    Ok(1.0 + (num_base_cells as f64).ln() / 3.0)
}

/// Number of extended-direction cells matching a base mesh: the nearest
/// integer to `(#cells)^{1/n}`, at least one.
pub fn matching_cells(num_base_cells: usize, dim: usize) -> usize {
    let m = (num_base_cells as f64).powf(1.0 / dim as f64).round() as usize;
    m.max(1)
}

/// Partition of `(0, 1)` by its vertices, with a bisection generation per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMesh {
    vertices: Vec<f64>,
    generations: Vec<u32>,
}

impl IntervalMesh {
    /// `vertices` must start at 0, end at 1 and increase strictly.
    pub fn from_vertices(vertices: Vec<f64>) -> Result<Self> {
        if vertices.len() < 2 {
            return invalid("an interval mesh needs at least two vertices");
        }
        if vertices[0] != 0.0 || *vertices.last().unwrap() != 1.0 {
            return invalid("interval mesh must cover [0, 1]");
        }
        if vertices.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("interval mesh vertices must increase strictly");
        }
        let generations = vec![0; vertices.len() - 1];
        Ok(Self { vertices, generations })
    }

    pub fn uniform(cells: usize) -> Self {
        let n = cells as f64;
        let mut vertices: Vec<f64> = (0..=cells).map(|i| i as f64 / n).collect();
        vertices[cells] = 1.0;
        Self {
            vertices,
            generations: vec![0; cells],
        }
    }

    pub fn vertices(&self) -> &[f64] {
        &self.vertices
    }

    pub fn generations(&self) -> &[u32] {
        &self.generations
    }

    pub fn num_cells(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn cell(&self, i: usize) -> (f64, f64) {
        (self.vertices[i], self.vertices[i + 1])
    }

    pub fn max_width(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Vertex indices `1..=num_cells-1`.
    pub fn interior_vertices(&self) -> std::ops::Range<usize> {
        1..self.vertices.len() - 1
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        v == 0 || v + 1 == self.vertices.len()
    }

    /// Split every marked cell at its midpoint.
    pub fn bisect(&self, marked: &[usize]) -> Result<Self> {
        let n = self.num_cells();
        let mut flag = vec![false; n];
        for &c in marked {
            if c >= n {
                return invalid(format!("cell {c} out of range ({n} cells)"));
            }
            flag[c] = true;
        }
        let mut vertices = Vec::with_capacity(self.vertices.len() + marked.len());
        let mut generations = Vec::with_capacity(n + marked.len());
        for c in 0..n {
            let (a, b) = self.cell(c);
            vertices.push(a);
            if flag[c] {
                vertices.push(0.5 * (a + b));
                generations.push(self.generations[c] + 1);
                generations.push(self.generations[c] + 1);
            } else {
                generations.push(self.generations[c]);
            }
        }
        vertices.push(1.0);
        Ok(Self { vertices, generations })
    }

    /// Bisect every cell once.
    pub fn refine_uniform(&self) -> Self {
        let all: Vec<usize> = (0..self.num_cells()).collect();
        self.bisect(&all).expect("all cells are in range")
    }
}

/// Mesh of `Ω`: an interval partition (`n = 1`) or a tensor grid of the unit
/// square (`n = 2`) whose two factors are interval partitions.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseMesh {
    Interval(IntervalMesh),
    Square { x: IntervalMesh, y: IntervalMesh },
}

impl BaseMesh {
    pub fn dim(&self) -> usize {
        match self {
            BaseMesh::Interval(_) => 1,
            BaseMesh::Square { .. } => 2,
        }
    }

    pub fn num_cells(&self) -> usize {
        match self {
            BaseMesh::Interval(m) => m.num_cells(),
            BaseMesh::Square { x, y } => x.num_cells() * y.num_cells(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        match self {
            BaseMesh::Interval(m) => m.vertices().len(),
            BaseMesh::Square { x, y } => x.vertices().len() * y.vertices().len(),
        }
    }

    /// Boundary flag per vertex; square vertices are numbered `j * (nx+1) + i`.
    pub fn boundary_flags(&self) -> Vec<bool> {
        match self {
            BaseMesh::Interval(m) => (0..m.vertices().len()).map(|v| m.is_boundary_vertex(v)).collect(),
            BaseMesh::Square { x, y } => {
                let nx = x.vertices().len();
                let ny = y.vertices().len();
                let mut flags = Vec::with_capacity(nx * ny);
                for j in 0..ny {
                    for i in 0..nx {
                        flags.push(x.is_boundary_vertex(i) || y.is_boundary_vertex(j));
                    }
                }
                flags
            }
        }
    }

    /// Coordinates of a vertex (second component zero when `n = 1`).
    pub fn vertex(&self, v: usize) -> [f64; 2] {
        match self {
            BaseMesh::Interval(m) => [m.vertices()[v], 0.0],
            BaseMesh::Square { x, y } => {
                let nx = x.vertices().len();
                [x.vertices()[v % nx], y.vertices()[v / nx]]
            }
        }
    }

    /// Interior vertices in line order (lexicographic, `x1` fastest).
    pub fn interior_vertices(&self) -> Vec<usize> {
        self.boundary_flags()
            .iter()
            .enumerate()
            .filter(|(_, &b)| !b)
            .map(|(v, _)| v)
            .collect()
    }

    /// Largest cell diameter.
    pub fn mesh_size(&self) -> f64 {
        match self {
            BaseMesh::Interval(m) => m.max_width(),
            BaseMesh::Square { x, y } => x.max_width().hypot(y.max_width()),
        }
    }

    /// Uniform refinement (bisection in every coordinate direction).
    pub fn refine_uniform(&self) -> Self {
        match self {
            BaseMesh::Interval(m) => BaseMesh::Interval(m.refine_uniform()),
            BaseMesh::Square { x, y } => BaseMesh::Square {
                x: x.refine_uniform(),
                y: y.refine_uniform(),
            },
        }
    }

    pub fn as_interval(&self) -> Option<&IntervalMesh> {
        match self {
            BaseMesh::Interval(m) => Some(m),
            BaseMesh::Square { .. } => None,
        }
    }
}

/// Uniform mesh of `(0,1)^n` with `cells_per_side` cells per direction.
pub fn uniform_base(dim: usize, cells_per_side: usize) -> Result<BaseMesh> {
    if cells_per_side == 0 {
        return invalid("need at least one cell per side");
    }
    match dim {
        1 => Ok(BaseMesh::Interval(IntervalMesh::uniform(cells_per_side))),
        2 => Ok(BaseMesh::Square {
            x: IntervalMesh::uniform(cells_per_side),
            y: IntervalMesh::uniform(cells_per_side),
        }),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Bisect the marked cells of a one-dimensional base mesh.
pub fn bisect_marked(base: &BaseMesh, marked: &[usize]) -> Result<BaseMesh> {
    match base {
        BaseMesh::Interval(m) => Ok(BaseMesh::Interval(m.bisect(marked)?)),
        BaseMesh::Square { .. } => Err(Error::UnsupportedDimension(2)),
    }
}

/// Tensor product of a base mesh with a graded interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMesh {
    base: BaseMesh,
    interval: GradedInterval,
    lines: Vec<usize>,
    line_of_vertex: Vec<Option<usize>>,
}

impl TensorMesh {
    pub fn base(&self) -> &BaseMesh {
        &self.base
    }

    pub fn interval(&self) -> &GradedInterval {
        &self.interval
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Extended-direction cell count `M`.
    pub fn m(&self) -> usize {
        self.interval.cells()
    }

    pub fn height(&self) -> f64 {
        self.interval.height()
    }

    /// Base vertex owning each line.
    pub fn lines(&self) -> &[usize] {
        &self.lines
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    /// Line index of a base vertex, `None` for boundary vertices.
    pub fn line_of_vertex(&self, v: usize) -> Option<usize> {
        self.line_of_vertex[v]
    }

    pub fn num_elements(&self) -> usize {
        self.base.num_cells() * self.m()
    }

    /// Number of free DoFs, `#lines · M`.
    pub fn num_free(&self) -> usize {
        self.lines.len() * self.m()
    }

    /// Number of mesh nodes, Dirichlet ones included.
    pub fn num_nodes(&self) -> usize {
        self.base.num_vertices() * (self.m() + 1)
    }

    /// Global free DoF of (line, level); `level < M`.
    #[inline]
    pub fn dof(&self, line: usize, level: usize) -> usize {
        line * self.m() + level
    }

    /// Node index `vertex * (M+1) + level` over all nodes.
    #[inline]
    pub fn node(&self, vertex: usize, level: usize) -> usize {
        vertex * (self.m() + 1) + level
    }

    /// Dirichlet flag per node (lateral boundary and top face).
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let m = self.m();
        let flags = self.base.boundary_flags();
        let mut mask = Vec::with_capacity(self.num_nodes());
        for &b in &flags {
            for level in 0..=m {
                mask.push(b || level == m);
            }
        }
        mask
    }

    /// Free DoF of a node, if any.
    pub fn free_dof_of_node(&self, vertex: usize, level: usize) -> Option<usize> {
        if level >= self.m() {
            return None;
        }
        self.line_of_vertex[vertex].map(|l| self.dof(l, level))
    }

    /// Expand free DoF values to all nodes (zeros on the Dirichlet part).
    pub fn to_nodal(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.num_free());
        let m = self.m();
        let mut out = vec![0.0; self.num_nodes()];
        for (line, &vert) in self.lines.iter().enumerate() {
            for level in 0..m {
                out[self.node(vert, level)] = v[self.dof(line, level)];
            }
        }
        out
    }

    /// Trace values (level 0) per line.
    pub fn trace(&self, v: &[f64]) -> Vec<f64> {
        (0..self.num_lines()).map(|l| v[self.dof(l, 0)]).collect()
    }
}

/// Cylinder mesh `base × interval`.
pub fn build_tensor(base: BaseMesh, interval: GradedInterval) -> TensorMesh {
    let lines = base.interior_vertices();
    let mut line_of_vertex = vec![None; base.num_vertices()];
    for (l, &v) in lines.iter().enumerate() {
        line_of_vertex[v] = Some(l);
    }
    TensorMesh {
        base,
        interval,
        lines,
        line_of_vertex,
    }
}
