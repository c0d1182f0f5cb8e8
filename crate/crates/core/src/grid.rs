//! Cube-grid occupancy inside a bounding sphere.
//!
//! Space is cut into axis-aligned cubes of side `cube_size`; cube `i` is
//! centred at `i * cube_size`. A cube is usable when an object of the
//! largest radius centred there stays inside the sphere. Each usable cube
//! holds at most one object.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

pub type Cube = Vec<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("cube size {cube_size} cannot hold an object of radius {radius}")]
    CubeTooSmall { cube_size: f64, radius: f64 },
    #[error("position {0:?} lies outside the bounding sphere")]
    OutOfBounds(Vec<f64>),
    #[error("cube {0:?} is already occupied")]
    Occupied(Cube),
    #[error("object {0} is not on the grid")]
    Unknown(u64),
    #[error("no free position is reachable")]
    Full,
}

/// An object displaced from one cube to another.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Move {
    pub id: u64,
    pub from: Cube,
    pub to: Cube,
}

/// Where a new object goes and which objects had to move to make room.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Placement {
    pub cube: Cube,
    pub moves: Vec<Move>,
}

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    cube_size: f64,
    sphere_radius: f64,
    max_object_radius: f64,
    occupancy: BTreeMap<Cube, u64>,
    objects: BTreeMap<u64, Cube>,
    usable: usize,
}

impl Grid {
    pub fn new(
        dim: usize,
        cube_size: f64,
        sphere_radius: f64,
        max_object_radius: f64,
    ) -> Result<Self, GridError> {
        assert!(dim > 0, "grid dimension must be positive");
        if cube_size < 2.0 * max_object_radius * (1.0 - 1e-12) || cube_size <= 0.0 {
            return Err(GridError::CubeTooSmall {
                cube_size,
                radius: max_object_radius,
            });
        }
        let mut g = Grid {
            dim,
            cube_size,
            sphere_radius,
            max_object_radius,
            occupancy: BTreeMap::new(),
            objects: BTreeMap::new(),
            usable: 0,
        };
        g.usable = g.usable_cubes().len();
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cube_size(&self) -> f64 {
        self.cube_size
    }

    pub fn sphere_radius(&self) -> f64 {
        self.sphere_radius
    }

    pub fn center_of(&self, cube: &[i64]) -> Vec<f64> {
        cube.iter().map(|&i| i as f64 * self.cube_size).collect()
    }

    pub fn is_usable(&self, cube: &[i64]) -> bool {
        let r2: f64 = self.center_of(cube).iter().map(|x| x * x).sum();
        r2.sqrt() + self.max_object_radius <= self.sphere_radius * (1.0 + 1e-12)
    }

    pub fn cube_of(&self, p: &[f64]) -> Result<Cube, GridError> {
        let cube: Cube = p
            .iter()
            .take(self.dim)
            .map(|x| (x / self.cube_size + 0.5).floor() as i64)
            .collect();
        if self.is_usable(&cube) {
            Ok(cube)
        } else {
            Err(GridError::OutOfBounds(p.to_vec()))
        }
    }

    /// All usable cubes, in lexicographic order.
    pub fn usable_cubes(&self) -> Vec<Cube> {
        let m = (self.sphere_radius / self.cube_size).floor() as i64;
        let mut out = Vec::new();
        let mut cur = vec![-m; self.dim];
        loop {
            if self.is_usable(&cur) {
                out.push(cur.clone());
            }
            let mut axis = self.dim;
            loop {
                if axis == 0 {
                    return out;
                }
                axis -= 1;
                if cur[axis] < m {
                    cur[axis] += 1;
                    for a in cur.iter_mut().skip(axis + 1) {
                        *a = -m;
                    }
                    break;
                }
            }
        }
    }

    /// Number of usable cubes (the most objects the sphere can hold).
    pub fn capacity(&self) -> usize {
        self.usable
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.occupancy.len() >= self.usable
    }

    pub fn occupant(&self, cube: &[i64]) -> Option<u64> {
        self.occupancy.get(cube).copied()
    }

    pub fn cube_of_object(&self, id: u64) -> Option<&Cube> {
        self.objects.get(&id)
    }

    pub fn objects(&self) -> impl Iterator<Item = (u64, &Cube)> + '_ {
        self.objects.iter().map(|(id, c)| (*id, c))
    }

    fn is_free(&self, cube: &[i64]) -> bool {
        self.is_usable(cube) && !self.occupancy.contains_key(cube)
    }

    pub fn place(&mut self, id: u64, cube: Cube) -> Result<(), GridError> {
        if !self.is_usable(&cube) {
            return Err(GridError::OutOfBounds(self.center_of(&cube)));
        }
        if self.occupancy.contains_key(&cube) {
            return Err(GridError::Occupied(cube));
        }
        if let Some(old) = self.objects.remove(&id) {
            self.occupancy.remove(&old);
        }
        self.occupancy.insert(cube.clone(), id);
        self.objects.insert(id, cube);
        Ok(())
    }

    pub fn remove(&mut self, id: u64) -> Result<Cube, GridError> {
        let cube = self.objects.remove(&id).ok_or(GridError::Unknown(id))?;
        self.occupancy.remove(&cube);
        Ok(cube)
    }

    /// The 2n axis directions in fixed order: (axis 0, -), (axis 0, +), ...
    fn directions(&self) -> Vec<(usize, i64)> {
        (0..self.dim).flat_map(|a| [(a, -1), (a, 1)]).collect()
    }

    fn step(cube: &[i64], (axis, sign): (usize, i64)) -> Cube {
        let mut c = cube.to_vec();
        c[axis] += sign;
        c
    }

    /// Finds a cube next to `parent` for a newborn object. A free neighbour
    /// is taken directly (uniformly at random among free ones). Otherwise a
    /// random direction's chain of objects is pushed one cube forward; an
    /// object blocked by the sphere boundary at the end of the chain is
    /// moved to a free cube beside it instead. The grid is updated with the
    /// moves but the returned cube itself is left empty for the caller.
    pub fn getpos<R: Rng + ?Sized>(
        &mut self,
        parent: &[i64],
        rng: &mut R,
    ) -> Result<Placement, GridError> {
        let dirs = self.directions();
        let free: Vec<Cube> = dirs
            .iter()
            .map(|&d| Self::step(parent, d))
            .filter(|c| self.is_free(c))
            .collect();
        if !free.is_empty() {
            let cube = free[rng.gen_range(0..free.len())].clone();
            return Ok(Placement {
                cube,
                moves: Vec::new(),
            });
        }
        let mut order = dirs.clone();
        order.shuffle(rng);
        for d in order {
            if let Some(moves) = self.push_chain(parent, d) {
                for m in &moves {
                    self.occupancy.remove(&m.from);
                }
                for m in &moves {
                    self.occupancy.insert(m.to.clone(), m.id);
                    self.objects.insert(m.id, m.to.clone());
                }
                return Ok(Placement {
                    cube: Self::step(parent, d),
                    moves,
                });
            }
        }
        Err(GridError::Full)
    }

    /// Whether [`Grid::getpos`] from `parent` would succeed. Does not draw
    /// randomness: success does not depend on the draws.
    pub fn getpos_feasible(&self, parent: &[i64]) -> bool {
        self.directions().into_iter().any(|d| {
            let c = Self::step(parent, d);
            self.is_free(&c) || self.push_chain(parent, d).is_some()
        })
    }

    /// Moves needed to empty the neighbour of `parent` in direction `d`,
    /// or `None` if that is impossible.
    fn push_chain(&self, parent: &[i64], d: (usize, i64)) -> Option<Vec<Move>> {
        let target = Self::step(parent, d);
        if !self.is_usable(&target) {
            return None;
        }
        let mut chain = Vec::new();
        let mut cur = target;
        while let Some(&id) = self.occupancy.get(&cur) {
            let next = Self::step(&cur, d);
            chain.push((id, cur));
            if !self.is_usable(&next) {
                break;
            }
            cur = next;
        }
        let (last_id, last_cube) = chain.last()?.clone();
        let forward = Self::step(&last_cube, d);
        let mut moves = Vec::with_capacity(chain.len());
        if self.is_free(&forward) {
            moves.push(Move {
                id: last_id,
                from: last_cube,
                to: forward,
            });
        } else {
            // blocked by the boundary: look for room beside the last object
            let side = self
                .directions()
                .into_iter()
                .map(|dd| Self::step(&last_cube, dd))
                .find(|c| self.is_free(c))?;
            moves.push(Move {
                id: last_id,
                from: last_cube,
                to: side,
            });
        }
        for w in chain.windows(2).rev() {
            let (id, from) = &w[0];
            moves.push(Move {
                id: *id,
                from: from.clone(),
                to: w[1].1.clone(),
            });
        }
        Some(moves)
    }

    /// Puts `id` at `cube`, resolving a conflict with the current occupant
    /// getpos-style. `Err(Full)` is the bottom result: nothing changes.
    pub fn arrange<R: Rng + ?Sized>(
        &mut self,
        id: u64,
        cube: Cube,
        rng: &mut R,
    ) -> Result<Placement, GridError> {
        if let Some(old) = self.objects.remove(&id) {
            self.occupancy.remove(&old);
        }
        if self.is_free(&cube) {
            self.place(id, cube.clone())?;
            return Ok(Placement {
                cube,
                moves: Vec::new(),
            });
        }
        if !self.is_usable(&cube) {
            return Err(GridError::OutOfBounds(self.center_of(&cube)));
        }
        let snapshot = self.clone();
        match self.getpos(&cube, rng) {
            Ok(p) => {
                self.place(id, p.cube.clone())?;
                Ok(p)
            }
            Err(e) => {
                *self = snapshot;
                Err(e)
            }
        }
    }

    /// True when every object sits in its own usable cube and the two
    /// indices agree.
    pub fn is_consistent(&self) -> bool {
        self.occupancy.len() == self.objects.len()
            && self
                .objects
                .iter()
                .all(|(id, c)| self.occupancy.get(c) == Some(id) && self.is_usable(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn cube_of_rounds_to_nearest_center() {
        let g = Grid::new(3, 2.0, 10.0, 1.0).unwrap();
        assert_eq!(g.cube_of(&[0.0, 0.0, 0.0]).unwrap(), vec![0, 0, 0]);
        assert_eq!(g.cube_of(&[2.8, 0.0, 0.0]).unwrap(), vec![1, 0, 0]);
        for c in g.usable_cubes() {
            assert_eq!(g.cube_of(&g.center_of(&c)).unwrap(), c);
        }
        assert!(g.cube_of(&[20.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn free_neighbour_needs_no_push() {
        let mut g = Grid::new(2, 1.0, 5.0, 0.5).unwrap();
        g.place(1, vec![0, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = g.getpos(&[0, 0], &mut rng).unwrap();
        assert!(p.moves.is_empty());
        let d: i64 = p.cube.iter().map(|x| x.abs()).sum();
        assert_eq!(d, 1);
    }

    #[test]
    fn three_cube_line_is_full() {
        // 1D: usable cubes -1, 0, 1
        let mut g = Grid::new(1, 1.0, 1.5, 0.5).unwrap();
        assert_eq!(g.capacity(), 3);
        for (id, c) in [(1, -1), (2, 0), (3, 1)] {
            g.place(id, vec![c]).unwrap();
        }
        assert!(g.is_full());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(g.getpos(&[0], &mut rng), Err(GridError::Full));
        assert!(g.is_consistent());
    }

    #[test]
    fn arrange_moves_into_free_neighbour() {
        let mut g = Grid::new(2, 1.0, 1.5, 0.5).unwrap();
        g.place(1, vec![0, 0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = g.arrange(2, vec![0, 0], &mut rng).unwrap();
        assert_ne!(p.cube, vec![0, 0]);
        assert!(g.is_consistent());
        assert_eq!(g.len(), 2);
    }
}
