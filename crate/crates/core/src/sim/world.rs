//! The user base: communities of users sharing a service catalog and a few
//! request templates.
//!
//! Community `k` draws attribute ids from its own contiguous block, so
//! services of different communities never share ids. Within a community,
//! services come in families: each family has a prototype (an id set and
//! values) and its members perturb the prototype's values, so members of a
//! family have similar descriptions.

use rand::seq::index::sample;
use rand::Rng;

use super::config::WorldParams;
use crate::error::{EcoError, Result};
use crate::semantic::{AttributeTuple, SemanticDescription, UserRequest, AGENT_MAX_TUPLES, AGENT_MIN_TUPLES, ATTR_MAX};

#[derive(Clone, Debug, PartialEq)]
pub struct Community {
    pub id: usize,
    pub members: Vec<usize>,
    pub catalog: Vec<SemanticDescription>,
    /// Each template lists catalog indices, one per request part.
    pub templates: Vec<Vec<usize>>,
}

impl Community {
    pub fn template_request(&self, t: usize) -> Result<UserRequest> {
        UserRequest::new(self.templates[t].iter().map(|&i| self.catalog[i].clone()).collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub params: WorldParams,
    pub communities: Vec<Community>,
    user_community: Vec<usize>,
}

/// Width of each community's attribute-id block.
pub fn id_block(communities: usize) -> usize {
    ATTR_MAX as usize / communities.max(1)
}

fn random_service<R: Rng + ?Sized>(first_id: usize, block: usize, rng: &mut R) -> SemanticDescription {
    let n = rng.gen_range(AGENT_MIN_TUPLES..=AGENT_MAX_TUPLES.min(block));
    let tuples = sample(rng, block, n)
        .into_iter()
        .map(|i| AttributeTuple { id: (first_id + i) as u8, value: rng.gen_range(1..=ATTR_MAX) })
        .collect();
    SemanticDescription::new_agent(tuples).expect("ids distinct and in range")
}

/// Prototype values shifted by up to `spread`, clamped to the value range.
fn family_member<R: Rng + ?Sized>(proto: &SemanticDescription, spread: u8, rng: &mut R) -> SemanticDescription {
    let s = spread as i32;
    let tuples = proto
        .tuples()
        .iter()
        .map(|t| {
            let v = (t.value as i32 + rng.gen_range(-s..=s)).clamp(1, ATTR_MAX as i32);
            AttributeTuple { id: t.id, value: v as u8 }
        })
        .collect();
    SemanticDescription::new_agent(tuples).expect("prototype ids kept")
}

impl World {
    /// Users are split into contiguous, near-equal communities.
    pub fn generate<R: Rng + ?Sized>(users: usize, params: &WorldParams, rng: &mut R) -> Result<Self> {
        let c = params.communities;
        let block = id_block(c);
        if c == 0 || c > users || block < AGENT_MIN_TUPLES {
            return Err(EcoError::Config(format!("cannot split {users} users into {c} communities")));
        }
        let user_community: Vec<usize> = (0..users).map(|u| u * c / users).collect();
        let mut communities = Vec::with_capacity(c);
        for k in 0..c {
            let first_id = k * block + 1;
            let protos: Vec<SemanticDescription> =
                (0..params.families.max(1)).map(|_| random_service(first_id, block, rng)).collect();
            let catalog: Vec<SemanticDescription> = (0..params.catalog_size)
                .map(|i| family_member(&protos[i % protos.len()], params.family_spread, rng))
                .collect();
            let templates = (0..params.templates)
                .map(|_| {
                    let parts = rng.gen_range(params.min_parts..=params.max_parts);
                    let distinct = parts.min(catalog.len());
                    let mut t = sample(rng, catalog.len(), distinct).into_vec();
                    while t.len() < parts {
                        t.push(rng.gen_range(0..catalog.len()));
                    }
                    t
                })
                .collect();
            let members = (0..users).filter(|&u| user_community[u] == k).collect();
            communities.push(Community { id: k, members, catalog, templates });
        }
        Ok(World { params: *params, communities, user_community })
    }

    pub fn community_of(&self, user: usize) -> &Community {
        &self.communities[self.user_community[user]]
    }

    pub fn users(&self) -> usize {
        self.user_community.len()
    }
}

/// A request from a community: one of its templates with every value
/// jittered, and with probability `part_change_prob` one part dropped or one
/// catalog service added.
pub fn generate_request<R: Rng + ?Sized>(community: &Community, params: &WorldParams, rng: &mut R) -> Result<UserRequest> {
    let t = &community.templates[rng.gen_range(0..community.templates.len())];
    let mut parts: Vec<SemanticDescription> = Vec::with_capacity(t.len() + 1);
    for &i in t {
        let base = &community.catalog[i];
        if params.value_jitter == 0 {
            parts.push(base.clone());
            continue;
        }
        let j = params.value_jitter as i32;
        let tuples = base
            .tuples()
            .iter()
            .map(|tp| {
                let v = (tp.value as i32 + rng.gen_range(-j..=j)).clamp(1, ATTR_MAX as i32);
                AttributeTuple { id: tp.id, value: v as u8 }
            })
            .collect();
        parts.push(SemanticDescription::new(tuples)?);
    }
    if rng.gen_bool(params.part_change_prob) {
        let drop = rng.gen_bool(0.5);
        if drop && parts.len() > params.min_parts {
            let at = rng.gen_range(0..parts.len());
            parts.remove(at);
        } else if !drop && parts.len() < params.max_parts {
            parts.push(community.catalog[rng.gen_range(0..community.catalog.len())].clone());
        }
    }
    UserRequest::new(parts)
}
