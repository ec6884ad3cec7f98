//! Exact coverage-maximizing direction assignment.
//!
//! Every sensor may face one of four directions spaced a quarter turn apart,
//! the first being its current heading and the rest following in the direction
//! of increasing orientation. The solver picks one direction per sensor so that
//! the number of targets inside at least one chosen wedge is maximal.

use crate::env::{Action, EnvConfig, WorldState};
use crate::geometry::{is_covered, normalize_angle, relative_polar, Pose, PolarRelation};

use super::direction_to_action;

/// Number of candidate directions per sensor.
pub const DIRECTIONS: usize = 4;
const QUARTER_TURN: f64 = 360.0 / DIRECTIONS as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageInstance {
    pub sensors: Vec<Pose>,
    pub targets: Vec<(f64, f64)>,
    pub rho_max: f64,
    pub alpha_max: f64,
}

impl CoverageInstance {
    pub fn from_state(state: &WorldState, config: &EnvConfig) -> Self {
        Self {
            sensors: state.sensors.clone(),
            targets: state.targets.iter().map(|t| t.position()).collect(),
            rho_max: config.rho_max,
            alpha_max: config.alpha_max,
        }
    }

    /// Whether target `k` lies in the wedge of sensor `i` facing direction `d` (0-based).
    pub fn in_wedge(&self, i: usize, d: usize, k: usize) -> bool {
        let rel = relative_polar(&self.sensors[i], self.targets[k])
            .expect("finite instance coordinates");
        let off_axis = normalize_angle(rel.alpha - d as f64 * QUARTER_TURN)
            .expect("finite relative angle");
        is_covered(
            &PolarRelation { rho: rel.rho, alpha: off_axis },
            self.rho_max,
            self.alpha_max,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectionAssignment {
    /// Chosen 1-based direction per sensor; `None` when the sensor is left unassigned.
    pub directions: Vec<Option<usize>>,
    pub covered: Vec<bool>,
    /// Number of covered targets.
    pub objective: usize,
}

impl DirectionAssignment {
    /// The binary `n x 4` selection matrix.
    pub fn selection_matrix(&self) -> Vec<[u8; DIRECTIONS]> {
        self.directions
            .iter()
            .map(|d| {
                let mut row = [0u8; DIRECTIONS];
                if let Some(j) = d {
                    row[j - 1] = 1;
                }
                row
            })
            .collect()
    }

    pub fn actions(&self) -> Vec<Action> {
        self.directions
            .iter()
            .map(|&d| direction_to_action(d).expect("solver emits directions in 1..=4"))
            .collect()
    }
}

#[derive(Clone, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn zeros(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn set(&mut self, k: usize) {
        self.0[k / 64] |= 1 << (k % 64);
    }

    fn get(&self, k: usize) -> bool {
        self.0[k / 64] >> (k % 64) & 1 == 1
    }

    fn union(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a | b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn count_new(&self, covered: &Bits) -> usize {
        self.0
            .iter()
            .zip(&covered.0)
            .map(|(a, c)| (a & !c).count_ones() as usize)
            .sum()
    }
}

struct Search {
    wedges: Vec<[Bits; DIRECTIONS]>,
    /// `reach[i]`: targets coverable by any direction of sensors `i..`.
    reach: Vec<Bits>,
    chosen: Vec<usize>,
    best: Option<(usize, Vec<usize>, Bits)>,
}

impl Search {
    fn run(&mut self, i: usize, covered: Bits) {
        let count = covered.count();
        if i == self.wedges.len() {
            if self.best.as_ref().is_none_or(|(b, _, _)| count > *b) {
                self.best = Some((count, self.chosen.clone(), covered));
            }
            return;
        }
        if let Some((best, _, _)) = &self.best {
            let bound = count + self.reach[i].count_new(&covered);
            if bound <= *best {
                return;
            }
        }
        for d in 0..DIRECTIONS {
            self.chosen[i] = d;
            let next = covered.union(&self.wedges[i][d]);
            self.run(i + 1, next);
        }
    }
}

/// Branch-and-bound over sensors in index order, directions in order `1..=4`.
///
/// The bound adds to the current count every still-uncovered target that some
/// remaining sensor could reach. Ties keep the first assignment found, which
/// favours keeping current headings.
pub fn exact_coverage_assignment(instance: &CoverageInstance) -> DirectionAssignment {
    let n = instance.sensors.len();
    let m = instance.targets.len();
    if m == 0 || n == 0 {
        return DirectionAssignment {
            directions: vec![None; n],
            covered: vec![false; m],
            objective: 0,
        };
    }

    let wedges: Vec<[Bits; DIRECTIONS]> = (0..n)
        .map(|i| {
            std::array::from_fn(|d| {
                let mut b = Bits::zeros(m);
                for k in 0..m {
                    if instance.in_wedge(i, d, k) {
                        b.set(k);
                    }
                }
                b
            })
        })
        .collect();
    let mut reach = vec![Bits::zeros(m); n + 1];
    for i in (0..n).rev() {
        let mut r = reach[i + 1].clone();
        for w in &wedges[i] {
            r = r.union(w);
        }
        reach[i] = r;
    }

    let mut search = Search {
        wedges,
        reach,
        chosen: vec![0; n],
        best: None,
    };
    search.run(0, Bits::zeros(m));
    let (objective, chosen, covered) = search.best.expect("at least one leaf is visited");
    DirectionAssignment {
        directions: chosen.into_iter().map(|d| Some(d + 1)).collect(),
        covered: (0..m).map(|k| covered.get(k)).collect(),
        objective,
    }
}

/// Per-step policy: re-solve on the current state, then derive primitive actions.
pub fn ilp_actions(state: &WorldState, config: &EnvConfig) -> Vec<Action> {
    exact_coverage_assignment(&CoverageInstance::from_state(state, config)).actions()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(sensors: Vec<Pose>, targets: Vec<(f64, f64)>) -> CoverageInstance {
        CoverageInstance { sensors, targets, rho_max: 400.0, alpha_max: 45.0 }
    }

    #[test]
    fn no_targets() {
        let inst = instance(vec![Pose::new(0.0, 0.0, 0.0).unwrap(); 2], vec![]);
        let a = exact_coverage_assignment(&inst);
        assert_eq!(a.objective, 0);
        assert_eq!(a.selection_matrix(), vec![[0; 4]; 2]);
        assert_eq!(a.actions(), vec![Action::Stay; 2]);
    }

    #[test]
    fn quarter_turn_wedge() {
        // target 120 degrees off the current heading: only direction 2 (axis +90) sees it
        let r = 120f64.to_radians();
        let inst = instance(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![(100.0 * r.cos(), 100.0 * r.sin())],
        );
        let a = exact_coverage_assignment(&inst);
        assert_eq!(a.objective, 1);
        assert_eq!(a.directions, vec![Some(2)]);
        assert_eq!(a.selection_matrix(), vec![[0, 1, 0, 0]]);
        assert_eq!(a.actions(), vec![Action::Right]);
    }

    #[test]
    fn wedge_boundaries_are_open() {
        let r = 135f64.to_radians();
        let inst = instance(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap()],
            vec![(100.0 * r.cos(), 100.0 * r.sin())],
        );
        let hits: Vec<bool> = (0..4).map(|d| inst.in_wedge(0, d, 0)).collect();
        assert_eq!(hits.iter().filter(|&&h| h).count(), 0);
    }

    #[test]
    fn objective_matches_covered() {
        let inst = instance(
            vec![Pose::new(0.0, 0.0, 0.0).unwrap(), Pose::new(300.0, 0.0, 180.0).unwrap()],
            vec![(100.0, 0.0), (200.0, 10.0), (-50.0, 0.0), (150.0, 300.0)],
        );
        let a = exact_coverage_assignment(&inst);
        assert_eq!(a.objective, a.covered.iter().filter(|&&c| c).count());
        for row in a.selection_matrix() {
            assert!(row.iter().map(|&x| x as usize).sum::<usize>() <= 1);
        }
    }
}
