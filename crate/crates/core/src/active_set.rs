//! Working set of constraints treated as equalities during a projection.

use std::fmt;

/// Which side of a univariate bound is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    /// Sign of the implicit unit gradient when the bound is written as `s·φ_i ≤ s·bound`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }
}

/// Identifies a global constraint or one side of a variable bound.
///
/// The derived ordering puts global constraints first, by id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ConstraintId {
    Global(usize),
    Bound(usize, Side),
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::Global(j) => write!(f, "g{j}"),
            ConstraintId::Bound(i, Side::Lower) => write!(f, "lower{i}"),
            ConstraintId::Bound(i, Side::Upper) => write!(f, "upper{i}"),
        }
    }
}

/// Ordered working set. Local order is: globals in insertion order, then
/// bounds in insertion order.
///
/// Global ids below `n_equalities` are pinned and can never be removed.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSet {
    globals: Vec<usize>,
    bounds: Vec<(usize, Side)>,
    global_member: Vec<bool>,
    bound_member: Vec<Option<Side>>,
    n_equalities: usize,
}

impl ActiveSet {
    /// Empty set of inequalities with all `n_equalities` equalities pinned.
    pub fn new(dimension: usize, n_globals: usize, n_equalities: usize) -> Self {
        assert!(n_equalities <= n_globals);
        let mut global_member = vec![false; n_globals];
        global_member[..n_equalities].fill(true);
        Self {
            globals: (0..n_equalities).collect(),
            bounds: Vec::new(),
            global_member,
            bound_member: vec![None; dimension],
            n_equalities,
        }
    }

    pub fn len(&self) -> usize {
        self.globals.len() + self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_equalities(&self) -> usize {
        self.n_equalities
    }

    pub fn globals(&self) -> &[usize] {
        &self.globals
    }

    pub fn bounds(&self) -> &[(usize, Side)] {
        &self.bounds
    }

    /// Active side of variable `i`, if any.
    pub fn bound_side(&self, i: usize) -> Option<Side> {
        self.bound_member[i]
    }

    pub fn contains(&self, id: ConstraintId) -> bool {
        match id {
            ConstraintId::Global(j) => self.global_member[j],
            ConstraintId::Bound(i, side) => self.bound_member[i] == Some(side),
        }
    }

    pub fn is_pinned(&self, id: ConstraintId) -> bool {
        matches!(id, ConstraintId::Global(j) if j < self.n_equalities)
    }

    /// Inserts `id`. Activating the opposite side of an already active bound
    /// replaces it. Returns whether membership changed.
    pub fn insert(&mut self, id: ConstraintId) -> bool {
        match id {
            ConstraintId::Global(j) => {
                if self.global_member[j] {
                    return false;
                }
                self.global_member[j] = true;
                self.globals.push(j);
                true
            }
            ConstraintId::Bound(i, side) => match self.bound_member[i] {
                Some(s) if s == side => false,
                Some(_) => {
                    self.bound_member[i] = Some(side);
                    if let Some(entry) = self.bounds.iter_mut().find(|(v, _)| *v == i) {
                        entry.1 = side;
                    }
                    true
                }
                None => {
                    self.bound_member[i] = Some(side);
                    self.bounds.push((i, side));
                    true
                }
            },
        }
    }

    /// Removes `id` unless it is a pinned equality. Returns whether membership changed.
    pub fn remove(&mut self, id: ConstraintId) -> bool {
        self.remove_all(&[id]) == 1
    }

    /// Bulk removal; pinned equalities are skipped. Returns the number removed.
    pub fn remove_all(&mut self, ids: &[ConstraintId]) -> usize {
        let mut removed = 0;
        let mut drop_globals = false;
        let mut drop_bounds = false;
        for &id in ids {
            if self.is_pinned(id) || !self.contains(id) {
                continue;
            }
            match id {
                ConstraintId::Global(j) => {
                    self.global_member[j] = false;
                    drop_globals = true;
                }
                ConstraintId::Bound(i, _) => {
                    self.bound_member[i] = None;
                    drop_bounds = true;
                }
            }
            removed += 1;
        }
        if drop_globals {
            let member = &self.global_member;
            self.globals.retain(|&j| member[j]);
        }
        if drop_bounds {
            let member = &self.bound_member;
            self.bounds.retain(|&(i, s)| member[i] == Some(s));
        }
        removed
    }

    /// Removes every inequality, leaving only pinned equalities.
    pub fn clear_inequalities(&mut self) {
        for &j in &self.globals[self.n_equalities.min(self.globals.len())..] {
            self.global_member[j] = false;
        }
        self.globals.retain(|&j| j < self.n_equalities);
        for &(i, _) in &self.bounds {
            self.bound_member[i] = None;
        }
        self.bounds.clear();
    }

    /// Entries in local order.
    pub fn ids(&self) -> impl Iterator<Item = ConstraintId> + '_ {
        self.globals
            .iter()
            .map(|&j| ConstraintId::Global(j))
            .chain(self.bounds.iter().map(|&(i, s)| ConstraintId::Bound(i, s)))
    }

    /// Local position → constraint identifier.
    pub fn local_to_global(&self) -> Vec<ConstraintId> {
        self.ids().collect()
    }
}

/// Lagrange multipliers split like the active set: `y1` over active globals,
/// `y2` over active bounds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultiplierVector {
    pub globals: Vec<usize>,
    pub bounds: Vec<(usize, Side)>,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl MultiplierVector {
    pub fn new(active: &ActiveSet, y1: Vec<f64>, y2: Vec<f64>) -> Self {
        assert_eq!(y1.len(), active.globals().len());
        assert_eq!(y2.len(), active.bounds().len());
        Self {
            globals: active.globals().to_vec(),
            bounds: active.bounds().to_vec(),
            y1,
            y2,
        }
    }

    pub fn len(&self) -> usize {
        self.y1.len() + self.y2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (ConstraintId, f64)> + '_ {
        self.globals
            .iter()
            .zip(&self.y1)
            .map(|(&j, &y)| (ConstraintId::Global(j), y))
            .chain(
                self.bounds
                    .iter()
                    .zip(&self.y2)
                    .map(|(&(i, s), &y)| (ConstraintId::Bound(i, s), y)),
            )
    }

    pub fn get(&self, id: ConstraintId) -> Option<f64> {
        self.iter().find(|(c, _)| *c == id).map(|(_, y)| y)
    }

    /// Smallest multiplier among inequality entries (globals with id ≥
    /// `n_equalities`, and all bounds). Ties go to the lowest identifier.
    pub fn min_inequality(&self, n_equalities: usize) -> Option<(ConstraintId, f64)> {
        self.iter()
            .filter(|(id, _)| !matches!(id, ConstraintId::Global(j) if *j < n_equalities))
            .fold(None, |best: Option<(ConstraintId, f64)>, (id, y)| match best {
                Some((bid, by)) if by < y || (by == y && bid < id) => Some((bid, by)),
                _ => Some((id, y)),
            })
    }
}
