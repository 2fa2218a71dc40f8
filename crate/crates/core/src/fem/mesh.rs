/// Rectangular mesh of unit-square bilinear elements, one per pixel.
///
/// Elements and nodes are numbered column by column starting at the upper
/// left corner. Indices are 0-based: element `(row, col)` is
/// `col * n1 + row` and node `(row, col)` is `col * (n1 + 1) + row`, where
/// `n1` counts element rows and `n2` element columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMesh {
    n1: usize,
    n2: usize,
    theta: Vec<[usize; 4]>,
    boundary_nodes: Vec<usize>,
}

impl GridMesh {
    /// # Panics
    ///
    /// If either side has zero elements.
    pub fn new(n1: usize, n2: usize) -> Self {
        assert!(n1 >= 1 && n2 >= 1, "mesh needs at least one element per side");
        let stride = n1 + 1;
        let mut theta = Vec::with_capacity(n1 * n2);
        for c in 0..n2 {
            for s in 0..n1 {
                let ul = c * stride + s;
                // upper-left, lower-left, lower-right, upper-right
                theta.push([ul, ul + 1, ul + stride + 1, ul + stride]);
            }
        }
        let mut boundary_nodes = Vec::with_capacity(2 * (n1 + n2));
        for c in 0..=n2 {
            for s in 0..=n1 {
                if c == 0 || c == n2 || s == 0 || s == n1 {
                    boundary_nodes.push(c * stride + s);
                }
            }
        }
        GridMesh {
            n1,
            n2,
            theta,
            boundary_nodes,
        }
    }

    /// Element rows.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Element columns.
    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn element_count(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn node_count(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    /// Connectivity table, one row of four global node indices per element.
    pub fn theta(&self) -> &[[usize; 4]] {
        &self.theta
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        self.theta[e]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (s, c) = self.node_position(node);
        c == 0 || c == self.n2 || s == 0 || s == self.n1
    }

    pub fn element_index(&self, row: usize, col: usize) -> usize {
        col * self.n1 + row
    }

    pub fn node_index(&self, row: usize, col: usize) -> usize {
        col * (self.n1 + 1) + row
    }

    /// `(row, col)` of a node on the `(n1+1) x (n2+1)` node grid.
    pub fn node_position(&self, node: usize) -> (usize, usize) {
        (node % (self.n1 + 1), node / (self.n1 + 1))
    }

    /// Largest `|i - j|` over node pairs sharing an element.
    pub fn half_bandwidth(&self) -> usize {
        self.n1 + 2
    }

    /// Gathers the four nodal values of element `e`.
    #[inline]
    pub fn gather(&self, e: usize, values: &[f64]) -> [f64; 4] {
        let t = &self.theta[e];
        [values[t[0]], values[t[1]], values[t[2]], values[t[3]]]
    }

    /// The boundary edges as node pairs, counter-clockwise around the domain.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        let (n1, n2) = (self.n1, self.n2);
        let mut edges = Vec::with_capacity(2 * (n1 + n2));
        for s in 0..n1 {
            edges.push([self.node_index(s, 0), self.node_index(s + 1, 0)]);
        }
        for c in 0..n2 {
            edges.push([self.node_index(n1, c), self.node_index(n1, c + 1)]);
        }
        for s in (0..n1).rev() {
            edges.push([self.node_index(s + 1, n2), self.node_index(s, n2)]);
        }
        for c in (0..n2).rev() {
            edges.push([self.node_index(0, c + 1), self.node_index(0, c)]);
        }
        edges
    }
}
