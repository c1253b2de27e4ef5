/// Points per leaf before splitting stops.
pub const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Static 2-D k-d tree over borrowed points, median split on alternating
/// axes. Read-only after construction.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a [(f64, f64)],
    order: Vec<usize>,
    nodes: Vec<Node>,
}

fn coord(p: (f64, f64), axis: usize) -> f64 {
    if axis == 0 {
        p.0
    } else {
        p.1
    }
}

/// Squared distance, evaluated the same way everywhere so that results from
/// different search strategies compare bit for bit.
#[inline]
pub(crate) fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

impl<'a> KdTree<'a> {
    pub fn build(points: &'a [(f64, f64)]) -> Self {
        let mut tree = Self {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build_node(0, points.len(), 0);
        }
        tree
    }

    fn build_node(&mut self, start: usize, end: usize, depth: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let axis = depth % 2;
        let mid = start + (end - start) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            coord(pts[a], axis).total_cmp(&coord(pts[b], axis))
        });
        let value = coord(pts[self.order[mid]], axis);
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, mid, depth + 1);
        let right = self.build_node(mid, end, depth + 1);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Nearest point to `points[query]` other than itself, as
    /// `(index, squared distance)`. Equal distances go to the smaller index.
    pub fn nearest_excluding(&self, query: usize) -> Option<(usize, f64)> {
        if self.points.len() < 2 {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, query, &mut best);
        Some(best)
    }

    fn search(&self, node: usize, query: usize, best: &mut (usize, f64)) {
        let q = self.points[query];
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if i == query {
                        continue;
                    }
                    let d = dist2(q, self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = coord(q, axis) - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, query, best);
                // `<=` keeps equal-distance candidates with smaller indices reachable
                if diff * diff <= best.1 {
                    self.search(far, query, best);
                }
            }
        }
    }
}
