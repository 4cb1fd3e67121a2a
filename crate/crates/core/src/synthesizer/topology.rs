use std::collections::HashSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    BusGroup, ConnectionGroup, DiagramKind, Entity, ObjectId, Pattern, Percentage, Topology, TopologyEdge,
};

use super::config::{PatternWeights, SynthesisConfig};
use super::SynthError;

fn draw_pattern(rng: &mut ChaCha8Rng, w: &PatternWeights) -> Pattern {
    let u: f64 = rng.random();
    if u < w.one_to_one {
        Pattern::OneToOne
    } else if u < w.one_to_one + w.one_to_many {
        Pattern::OneToMany
    } else {
        Pattern::ManyToOne
    }
}

/// Picks a parent, preferring ones that have no child yet.
fn pick_parent(rng: &mut ChaCha8Rng, parents: &[ObjectId], used: &HashSet<ObjectId>) -> ObjectId {
    let fresh: Vec<ObjectId> = parents.iter().copied().filter(|p| !used.contains(p)).collect();
    let pool = if fresh.is_empty() { parents } else { &fresh[..] };
    pool[rng.random_range(0..pool.len())]
}

fn pick_parents(rng: &mut ChaCha8Rng, parents: &[ObjectId], used: &HashSet<ObjectId>, k: usize) -> Vec<ObjectId> {
    let mut fresh: Vec<ObjectId> = parents.iter().copied().filter(|p| !used.contains(p)).collect();
    let mut stale: Vec<ObjectId> = parents.iter().copied().filter(|p| used.contains(p)).collect();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let pool = if fresh.is_empty() { &mut stale } else { &mut fresh };
        let i = rng.random_range(0..pool.len());
        out.push(pool.swap_remove(i));
    }
    out.sort_unstable();
    out
}

/// Draws a random layered topology.
///
/// Node count and level count come from the configured ranges (the level
/// count is capped by the node count). Adjacent levels are joined by a
/// sequence of pattern draws; each draw consumes one or more children of the
/// lower level. Parents left without a child receive one extra edge, and
/// lower-level nodes may gain a shortcut edge from two or more levels up.
pub fn generate_topology(kind: DiagramKind, config: &SynthesisConfig, seed: u64) -> Result<Topology, SynthError> {
    config.validate()?;
    let pool = config.entity_pool.for_kind(kind);
    let (nmin, nmax) = config.node_count_range;
    if pool.len() < nmax {
        return Err(SynthError::Config(format!(
            "entity pool for {kind} has {} names, need at least {nmax}",
            pool.len()
        )));
    }
    let distinct: HashSet<&String> = pool.iter().collect();
    if distinct.len() != pool.len() {
        return Err(SynthError::Config(format!(
            "entity pool for {kind} contains duplicate names"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(nmin..=nmax);
    let (lmin, lmax) = config.level_count_range;
    let m = if lmin > n {
        n
    } else {
        rng.random_range(lmin..=lmax.min(n))
    };

    let mut sizes = vec![1usize; m];
    for _ in m..n {
        sizes[rng.random_range(0..m)] += 1;
    }
    let picks = sample(&mut rng, pool.len(), n);
    let mut entities = Vec::with_capacity(n);
    let mut levels = Vec::with_capacity(n);
    let mut by_level: Vec<Vec<ObjectId>> = Vec::with_capacity(m);
    let mut next_id: ObjectId = 0;
    for (lvl, &size) in sizes.iter().enumerate() {
        let mut ids = Vec::with_capacity(size);
        for _ in 0..size {
            let name = pool[picks.index(next_id as usize)].clone();
            entities.push(Entity { id: next_id, name });
            levels.push(lvl);
            ids.push(next_id);
            next_id += 1;
        }
        by_level.push(ids);
    }

    let mut pairs: Vec<(ObjectId, ObjectId)> = Vec::new();
    let mut groups = Vec::new();
    for i in 0..m - 1 {
        let parents = &by_level[i];
        let children = &by_level[i + 1];
        let mut used: HashSet<ObjectId> = HashSet::new();
        let mut cursor = 0;
        while cursor < children.len() {
            let pattern = draw_pattern(&mut rng, &config.pattern_probabilities);
            let remaining = children.len() - cursor;
            let (ps, cs) = match pattern {
                Pattern::OneToOne => (vec![pick_parent(&mut rng, parents, &used)], 1),
                Pattern::OneToMany => {
                    let k = rng.random_range(2..=4usize).min(remaining);
                    (vec![pick_parent(&mut rng, parents, &used)], k)
                }
                Pattern::ManyToOne => {
                    let k = rng.random_range(2..=3usize).min(parents.len());
                    (pick_parents(&mut rng, parents, &used, k), 1)
                }
            };
            let cs: Vec<ObjectId> = children[cursor..cursor + cs].to_vec();
            cursor += cs.len();
            for &p in &ps {
                used.insert(p);
                for &c in &cs {
                    pairs.push((p, c));
                }
            }
            groups.push(ConnectionGroup {
                pattern,
                parents: ps,
                children: cs,
            });
        }
        for &p in parents {
            if !used.contains(&p) {
                let c = children[rng.random_range(0..children.len())];
                pairs.push((p, c));
            }
        }
    }

    if config.shortcut_probability > 0.0 {
        let existing: HashSet<(ObjectId, ObjectId)> = pairs.iter().copied().collect();
        for (lvl, ids) in by_level.iter().enumerate().skip(2) {
            for &c in ids {
                if rng.random_bool(config.shortcut_probability) {
                    let upper: Vec<ObjectId> = by_level[..lvl - 1].iter().flatten().copied().collect();
                    let p = upper[rng.random_range(0..upper.len())];
                    if !existing.contains(&(p, c)) {
                        pairs.push((p, c));
                    }
                }
            }
        }
    }

    let edges = pairs
        .into_iter()
        .map(|(parent, child)| TopologyEdge {
            parent,
            child,
            label: match kind {
                DiagramKind::Ownership => Some(Percentage::from_tenths(rng.random_range(1..=1000))),
                DiagramKind::Organization => None,
            },
        })
        .collect();

    let mut bus_groups = Vec::new();
    for g in &groups {
        let fan = g.parents.len() + g.children.len() >= 3;
        if fan && config.bus_probability > 0.0 && rng.random_bool(config.bus_probability) {
            bus_groups.push(BusGroup {
                parents: g.parents.clone(),
                children: g.children.clone(),
            });
        }
    }

    Ok(Topology {
        kind,
        entities,
        levels,
        edges,
        bus_groups,
        groups,
    })
}
