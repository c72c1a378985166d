//! Track-to-detection association: overlap costs, gating and optimal assignment.

use std::ops::{Add, Sub};

use crate::state::BoundingBox;

/// Intersection over union of two boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (al, ar, at, ab) = (a.left(), a.right(), a.top(), a.bottom());
    let (bl, br, bt, bb) = (b.left(), b.right(), b.top(), b.bottom());
    let iw = ar.min(br) - al.max(bl);
    let ih = ab.min(bb) - at.max(bt);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    // areas from the same corner arithmetic as the intersection, so iou(a, a) is exactly 1
    let inter = iw * ih;
    let union = (ar - al) * (ab - at) + (br - bl) * (bb - bt) - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Dense `n_tracks × n_detections` costs with an admissibility mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    admissible: Vec<bool>,
}

impl CostMatrix {
    /// Row-major costs; every entry starts admissible when finite.
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>) -> Self {
        assert_eq!(costs.len(), rows * cols, "cost buffer does not match shape");
        let admissible = costs.iter().map(|c| c.is_finite()).collect();
        Self {
            rows,
            cols,
            costs,
            admissible,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let costs = (0..rows)
            .flat_map(|i| (0..cols).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(rows, cols, costs)
    }

    /// `1 − IoU` between every track box and every detection box.
    pub fn iou_costs(tracks: &[BoundingBox], detections: &[BoundingBox]) -> Self {
        Self::from_fn(tracks.len(), detections.len(), |i, j| {
            1.0 - iou(&tracks[i], &detections[j])
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn cost(&self, track: usize, detection: usize) -> f64 {
        self.costs[track * self.cols + detection]
    }

    pub fn is_admissible(&self, track: usize, detection: usize) -> bool {
        self.admissible[track * self.cols + detection]
    }

    pub fn set_admissible(&mut self, track: usize, detection: usize, admissible: bool) {
        let cost = self.cost(track, detection);
        self.admissible[track * self.cols + detection] = admissible && cost.is_finite();
    }

    /// Marks every pair for which `reject` returns true as inadmissible.
    pub fn gate(&mut self, mut reject: impl FnMut(usize, usize) -> bool) {
        for i in 0..self.rows {
            for j in 0..self.cols {
                if reject(i, j) {
                    self.set_admissible(i, j, false);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Assignment {
    /// `(track, detection)` pairs sorted by track index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, costs: &CostMatrix) -> f64 {
        self.matches.iter().map(|&(i, j)| costs.cost(i, j)).sum()
    }
}

/// Cost ordered first by the number of unusable cells in an assignment,
/// then by the summed cost of the usable ones.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Lex {
    unusable: i64,
    cost: f64,
}

impl Lex {
    const ZERO: Lex = Lex {
        unusable: 0,
        cost: 0.0,
    };
    const BLOCKED: Lex = Lex {
        unusable: 1,
        cost: 0.0,
    };
    const INF: Lex = Lex {
        unusable: i64::MAX / 4,
        cost: 0.0,
    };
}

impl Add for Lex {
    type Output = Lex;
    fn add(self, o: Lex) -> Lex {
        Lex {
            unusable: self.unusable + o.unusable,
            cost: self.cost + o.cost,
        }
    }
}

impl Sub for Lex {
    type Output = Lex;
    fn sub(self, o: Lex) -> Lex {
        Lex {
            unusable: self.unusable - o.unusable,
            cost: self.cost - o.cost,
        }
    }
}

/// Optimal assignment restricted to admissible pairs with cost ≤ `max_cost`.
///
/// Among all such matchings, returns one with the most matched pairs and,
/// among those, the smallest total cost. Rectangular inputs are padded
/// internally; padded pairs never appear as matches. The result depends only
/// on the input values and order.
pub fn solve_assignment(costs: &CostMatrix, max_cost: f64) -> Assignment {
    let (rows, cols) = (costs.rows(), costs.cols());
    let n = rows.max(cols);
    let usable = |i: usize, j: usize| {
        i < rows && j < cols && costs.is_admissible(i, j) && costs.cost(i, j) <= max_cost
    };
    let cell = |i: usize, j: usize| {
        if usable(i, j) {
            Lex {
                unusable: 0,
                cost: costs.cost(i, j),
            }
        } else {
            Lex::BLOCKED
        }
    };

    // Shortest augmenting path Hungarian method, 1-based with a virtual column 0.
    let mut u = vec![Lex::ZERO; n + 1];
    let mut v = vec![Lex::ZERO; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![Lex::INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = Lex::INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cell(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] = u[row_of_col[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut col_of_row = vec![usize::MAX; n];
    for j in 1..=n {
        if row_of_col[j] > 0 {
            col_of_row[row_of_col[j] - 1] = j - 1;
        }
    }

    let mut out = Assignment::default();
    let mut detection_matched = vec![false; cols];
    for (i, &j) in col_of_row.iter().enumerate().take(rows) {
        if j != usize::MAX && usable(i, j) {
            out.matches.push((i, j));
            detection_matched[j] = true;
        } else {
            out.unmatched_tracks.push(i);
        }
    }
    out.unmatched_detections = (0..cols).filter(|&j| !detection_matched[j]).collect();
    out
}
