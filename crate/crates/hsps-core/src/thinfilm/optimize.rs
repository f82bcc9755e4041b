//! Layer-thickness optimization toward target transmissions.
//!
//! Deterministic given the configured RNG seed: a coordinate-descent pass
//! (scan plus golden-section refinement per layer) followed by a
//! Nelder-Mead polish, optionally repeated from perturbed starts. Only
//! improving steps are accepted, so the objective trace of the returned
//! design is non-increasing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::FilterStack;
use crate::error::{Error, Result};

/// Direction of a transmission target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    /// Penalize any deviation from `value`.
    Equal,
    /// Penalize only T above `value`.
    AtMost,
    /// Penalize only T below `value`.
    AtLeast,
}

/// One weighted transmission target.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct TransmissionTarget {
    pub wavelength_nm: f64,
    pub kind: TargetKind,
    pub value: f64,
    pub weight: f64,
}

impl TransmissionTarget {
    fn error(&self, transmittance: f64) -> f64 {
        match self.kind {
            TargetKind::Equal => transmittance - self.value,
            TargetKind::AtMost => (transmittance - self.value).max(0.0),
            TargetKind::AtLeast => (self.value - transmittance).max(0.0),
        }
    }
}

/// Constraints on the search.
#[derive(Clone, Debug)]
pub struct OptimizeConstraints {
    pub max_layers: usize,
    /// Materials the design may use; the seed design's layer materials
    /// must be among them (the optimizer varies thicknesses only).
    pub materials: Vec<crate::dispersion::MaterialIndex>,
    pub thickness_bounds_nm: (f64, f64),
}

/// Tuning knobs; the RNG seed is mandatory because restarts are
/// stochastic.
#[derive(Clone, Copy, Debug)]
pub struct OptimizeOptions {
    pub rng_seed: u64,
    /// Additional perturbed restarts beyond the plain seed-design run.
    pub restarts: usize,
    pub max_sweeps: usize,
    pub scan_points: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            rng_seed: 0,
            restarts: 2,
            max_sweeps: 40,
            scan_points: 64,
        }
    }
}

/// Optimization result: best design, its objective, and the accepted
/// objective trace of the winning run (non-increasing).
#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub stack: FilterStack,
    pub objective: f64,
    pub trace: Vec<f64>,
}

/// Minimize the weighted squared transmission error over layer
/// thicknesses, starting from `seed_design`.
pub fn optimize_stack(
    targets: &[TransmissionTarget],
    constraints: &OptimizeConstraints,
    seed_design: &FilterStack,
    options: &OptimizeOptions,
) -> Result<OptimizeOutcome> {
    if targets.is_empty() {
        return Err(Error::Config("optimizer needs at least one target".into()));
    }
    if constraints.max_layers == 0 {
        return Err(Error::Config("max_layers must be at least 1".into()));
    }
    if constraints.materials.is_empty() {
        return Err(Error::Config("optimizer needs at least one material".into()));
    }
    if seed_design.layers.len() > constraints.max_layers {
        return Err(Error::Config(format!(
            "seed design has {} layers, more than max_layers = {}",
            seed_design.layers.len(),
            constraints.max_layers
        )));
    }
    let (lo, hi) = constraints.thickness_bounds_nm;
    if !(lo >= 0.0 && hi > lo && hi < super::MAX_LAYER_THICKNESS_NM) {
        return Err(Error::Config(format!("invalid thickness bounds [{lo}, {hi}] nm")));
    }
    for layer in &seed_design.layers {
        if !constraints
            .materials
            .iter()
            .any(|m| m.name() == layer.material.name())
        {
            return Err(Error::Config(format!(
                "seed layer material {} not among the allowed materials",
                layer.material.name()
            )));
        }
    }
    for target in targets {
        if !(target.weight > 0.0) {
            return Err(Error::Config("target weights must be positive".into()));
        }
    }

    let evaluate = |thicknesses: &[f64]| -> Result<f64> {
        let mut stack = seed_design.clone();
        for (layer, &t) in stack.layers.iter_mut().zip(thicknesses) {
            layer.thickness_nm = t;
        }
        let mut total = 0.0;
        for target in targets {
            let (transmittance, _) = stack.transmission(target.wavelength_nm)?;
            let err = target.error(transmittance);
            total += target.weight * err * err;
        }
        Ok(total)
    };

    let seed_thicknesses: Vec<f64> = seed_design.layers.iter().map(|l| l.thickness_nm).collect();
    let seed_objective = evaluate(&seed_thicknesses)?;

    // A seed that already meets every target is returned unchanged.
    if seed_objective == 0.0 {
        return Ok(OptimizeOutcome {
            stack: seed_design.clone(),
            objective: 0.0,
            trace: vec![0.0],
        });
    }

    let mut rng = ChaCha12Rng::seed_from_u64(options.rng_seed);
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;

    for restart in 0..=options.restarts {
        let mut start = seed_thicknesses.clone();
        if restart > 0 {
            for t in &mut start {
                let factor: f64 = rng.gen_range(0.8..1.2);
                *t = (*t * factor).clamp(lo, hi);
            }
        }
        let (objective, thicknesses, trace) =
            descend(&evaluate, start, (lo, hi), options)?;
        let better = match &best {
            None => true,
            Some((best_obj, _, _)) => objective < *best_obj,
        };
        if better {
            best = Some((objective, thicknesses, trace));
            if objective == 0.0 {
                break;
            }
        }
    }

    let (objective, thicknesses, trace) = best.expect("at least one run");
    let mut stack = seed_design.clone();
    for (layer, t) in stack.layers.iter_mut().zip(thicknesses) {
        layer.thickness_nm = t;
    }
    Ok(OptimizeOutcome {
        stack,
        objective,
        trace,
    })
}

/// Coordinate descent with per-layer scan + golden-section refinement,
/// then a Nelder-Mead polish. Returns (objective, thicknesses, trace).
fn descend(
    evaluate: &dyn Fn(&[f64]) -> Result<f64>,
    start: Vec<f64>,
    bounds: (f64, f64),
    options: &OptimizeOptions,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let (lo, hi) = bounds;
    let mut current = start;
    let mut objective = evaluate(&current)?;
    let mut trace = vec![objective];

    if current.is_empty() {
        return Ok((objective, current, trace));
    }

    for _ in 0..options.max_sweeps {
        let mut improved = false;
        for layer in 0..current.len() {
            let mut best_t = current[layer];
            let mut best_o = objective;
            let scan = options.scan_points.max(8);
            for i in 0..=scan {
                let t = lo + (hi - lo) * (i as f64) / (scan as f64);
                let mut candidate = current.clone();
                candidate[layer] = t;
                let o = evaluate(&candidate)?;
                if o < best_o {
                    best_o = o;
                    best_t = t;
                }
            }
            // golden-section refinement around the best scan point
            let step = (hi - lo) / (scan as f64);
            let (mut a, mut b) = ((best_t - step).max(lo), (best_t + step).min(hi));
            let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
            let mut x1 = b - inv_phi * (b - a);
            let mut x2 = a + inv_phi * (b - a);
            let eval_at = |t: f64, current: &[f64]| -> Result<f64> {
                let mut candidate = current.to_vec();
                candidate[layer] = t;
                evaluate(&candidate)
            };
            let mut f1 = eval_at(x1, &current)?;
            let mut f2 = eval_at(x2, &current)?;
            for _ in 0..48 {
                if f1 > f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + inv_phi * (b - a);
                    f2 = eval_at(x2, &current)?;
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - inv_phi * (b - a);
                    f1 = eval_at(x1, &current)?;
                }
            }
            for (t, o) in [(x1, f1), (x2, f2)] {
                if o < best_o {
                    best_o = o;
                    best_t = t;
                }
            }
            if best_o < objective {
                current[layer] = best_t;
                objective = best_o;
                trace.push(objective);
                improved = true;
            }
        }
        if !improved || objective == 0.0 {
            break;
        }
    }

    if objective > 0.0 {
        nelder_mead(evaluate, &mut current, &mut objective, &mut trace, bounds)?;
    }
    Ok((objective, current, trace))
}

/// Standard Nelder-Mead on the thickness vector; out-of-bounds vertices
/// are clamped. Trace records only accepted improvements of the incumbent
/// best vertex.
fn nelder_mead(
    evaluate: &dyn Fn(&[f64]) -> Result<f64>,
    current: &mut Vec<f64>,
    objective: &mut f64,
    trace: &mut Vec<f64>,
    bounds: (f64, f64),
) -> Result<()> {
    let n = current.len();
    let (lo, hi) = bounds;
    let clamp = |v: &mut Vec<f64>| {
        for t in v.iter_mut() {
            *t = t.clamp(lo, hi);
        }
    };

    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((*objective, current.clone()));
    for i in 0..n {
        let mut vertex = current.clone();
        let step = ((hi - lo) * 0.02).max(1.0);
        vertex[i] = (vertex[i] + step).clamp(lo, hi);
        simplex.push((evaluate(&vertex)?, vertex));
    }

    for _ in 0..400 {
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        let best = simplex[0].0;
        let worst = simplex[n].0;
        if worst - best < 1e-14 {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (_, vertex) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(vertex) {
                *c += v / (n as f64);
            }
        }
        let combine = |alpha: f64| {
            let mut vertex: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n].1)
                .map(|(c, w)| c + alpha * (c - w))
                .collect();
            clamp(&mut vertex);
            vertex
        };
        let reflected = combine(1.0);
        let f_reflected = evaluate(&reflected)?;
        if f_reflected < simplex[0].0 {
            let expanded = combine(2.0);
            let f_expanded = evaluate(&expanded)?;
            simplex[n] = if f_expanded < f_reflected {
                (f_expanded, expanded)
            } else {
                (f_reflected, reflected)
            };
        } else if f_reflected < simplex[n - 1].0 {
            simplex[n] = (f_reflected, reflected);
        } else {
            let contracted = combine(-0.5);
            let f_contracted = evaluate(&contracted)?;
            if f_contracted < simplex[n].0 {
                simplex[n] = (f_contracted, contracted);
            } else {
                let best_vertex = simplex[0].1.clone();
                for (f, vertex) in simplex.iter_mut().skip(1) {
                    for (v, b) in vertex.iter_mut().zip(&best_vertex) {
                        *v = b + 0.5 * (*v - b);
                    }
                    clamp(vertex);
                    *f = evaluate(vertex)?;
                }
            }
        }
        simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
        if simplex[0].0 < *objective {
            *objective = simplex[0].0;
            *current = simplex[0].1.clone();
            trace.push(*objective);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::MaterialIndex;
    use crate::thinfilm::Layer;
    use approx::assert_abs_diff_eq;

    fn constant(name: &str, n: f64) -> MaterialIndex {
        MaterialIndex::constant(name, n).unwrap()
    }

    fn ar_setup() -> (FilterStack, Vec<TransmissionTarget>, OptimizeConstraints) {
        let n_f = (1.0f64 * 1.5).sqrt();
        let material = constant("ar", n_f);
        let stack = FilterStack::new(
            constant("inc", 1.0),
            constant("sub", 1.5),
            vec![Layer {
                material: material.clone(),
                thickness_nm: 60.0,
            }],
        )
        .unwrap();
        let targets = vec![TransmissionTarget {
            wavelength_nm: 810.0,
            kind: TargetKind::Equal,
            value: 1.0,
            weight: 1.0,
        }];
        let constraints = OptimizeConstraints {
            max_layers: 1,
            materials: vec![material],
            thickness_bounds_nm: (1.0, 650.0),
        };
        (stack, targets, constraints)
    }

    #[test]
    fn achieved_seed_returned_unchanged() {
        let (mut stack, targets, constraints) = ar_setup();
        let n_f = (1.5f64).sqrt();
        stack.layers[0].thickness_nm = 810.0 / (4.0 * n_f);
        // the exact quarter-wave seed already satisfies an at-least target
        let targets = vec![TransmissionTarget {
            kind: TargetKind::AtLeast,
            value: 0.999_999,
            ..targets[0]
        }];
        let outcome =
            optimize_stack(&targets, &constraints, &stack, &OptimizeOptions::default()).unwrap();
        assert_eq!(outcome.objective, 0.0);
        assert_eq!(
            outcome.stack.layers[0].thickness_nm,
            stack.layers[0].thickness_nm
        );
        assert_eq!(outcome.trace, vec![0.0]);
    }

    #[test]
    fn single_layer_antireflection_optimum() {
        let (stack, targets, constraints) = ar_setup();
        let outcome = optimize_stack(
            &targets,
            &constraints,
            &stack,
            &OptimizeOptions {
                rng_seed: 1,
                restarts: 0,
                ..OptimizeOptions::default()
            },
        )
        .unwrap();
        assert!(outcome.objective < 1e-8, "objective {}", outcome.objective);
        let n_f = (1.5f64).sqrt();
        let quarter = 810.0 / (4.0 * n_f);
        let half = 810.0 / (2.0 * n_f);
        let remainder = (outcome.stack.layers[0].thickness_nm - quarter).rem_euclid(half);
        let distance = remainder.min(half - remainder);
        assert!(distance < 0.5, "thickness off the quarter-wave family by {distance} nm");
    }

    #[test]
    fn trace_is_non_increasing() {
        let (stack, targets, constraints) = ar_setup();
        let outcome = optimize_stack(
            &targets,
            &constraints,
            &stack,
            &OptimizeOptions {
                rng_seed: 9,
                restarts: 2,
                ..OptimizeOptions::default()
            },
        )
        .unwrap();
        for pair in outcome.trace.windows(2) {
            assert!(pair[1] <= pair[0], "trace increased: {:?}", outcome.trace);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (stack, targets, constraints) = ar_setup();
        let options = OptimizeOptions {
            rng_seed: 77,
            restarts: 3,
            ..OptimizeOptions::default()
        };
        let a = optimize_stack(&targets, &constraints, &stack, &options).unwrap();
        let b = optimize_stack(&targets, &constraints, &stack, &options).unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(
            a.stack.layers[0].thickness_nm.to_bits(),
            b.stack.layers[0].thickness_nm.to_bits()
        );
    }

    #[test]
    fn infeasible_constraints_rejected() {
        let (stack, targets, constraints) = ar_setup();
        let no_materials = OptimizeConstraints {
            materials: vec![],
            ..constraints.clone()
        };
        assert!(matches!(
            optimize_stack(&targets, &no_materials, &stack, &OptimizeOptions::default()),
            Err(Error::Config(_))
        ));
        let zero_layers = OptimizeConstraints {
            max_layers: 0,
            ..constraints
        };
        assert!(optimize_stack(&targets, &zero_layers, &stack, &OptimizeOptions::default()).is_err());
        assert!(optimize_stack(&[], &zero_layers, &stack, &OptimizeOptions::default()).is_err());
    }
}
