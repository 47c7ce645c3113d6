use std::collections::{HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::Rng;

use super::{ProposalRequest, Strategy, StrategyMix};
use crate::catalog::DesignId;
use crate::error::{Error, Result};
use crate::imaging::Modality;
use crate::preference::{probability, squared_distance, PreferenceModel};
use crate::space::EmbeddingLookup;

/// Uniform sample scored by EXPLOIT.
pub const EXPLOIT_POOL_SIZE: usize = 300;
/// Uniform sample each THOMPSON slot takes its argmax from.
pub const THOMPSON_SAMPLE_SIZE: usize = 50;
pub const THOMPSON_RETRIES: usize = 20;
pub const NN_NEIGHBORHOOD: usize = 10;
pub const REJECTION_ATTEMPTS_PER_SLOT: usize = 200;

/// Anything that assigns a like log-odds to a design.
pub trait Scorer: Sync {
    fn logit(&self, id: DesignId) -> Result<f64>;

    fn probability(&self, id: DesignId) -> Result<f64> {
        self.logit(id).map(probability)
    }
}

impl<F> Scorer for F
where
    F: Fn(DesignId) -> f64 + Sync,
{
    fn logit(&self, id: DesignId) -> Result<f64> {
        Ok(self(id))
    }
}

/// A trained preference model bound to an embedding source.
pub struct ModelScorer<'a, L: ?Sized> {
    pub model: &'a PreferenceModel,
    pub lookup: &'a L,
}

impl<L: EmbeddingLookup + Sync + ?Sized> Scorer for ModelScorer<'_, L> {
    fn logit(&self, id: DesignId) -> Result<f64> {
        self.model.logit(self.lookup, id)
    }
}

/// Models available to the strategies for one round. `None` marks an
/// untrained (cold) model.
pub struct ProposalContext<'a> {
    pub model: Option<&'a dyn Scorer>,
    pub members: Vec<Option<&'a dyn Scorer>>,
    pub lookup: &'a (dyn EmbeddingLookup + Sync),
    pub mix: StrategyMix,
}

fn warn_short(what: &str, wanted: usize, got: usize) {
    if got < wanted {
        log::warn!("{what}: pool exhausted, proposing {got} of {wanted}");
    }
}

/// Tops `chosen` up to `target` with uniform draws from unchosen pool ids.
fn fill_uniform<R: Rng + ?Sized>(
    pool: &[DesignId],
    chosen: &mut Vec<DesignId>,
    seen: &mut HashSet<DesignId>,
    target: usize,
    rng: &mut R,
) {
    if chosen.len() >= target {
        return;
    }
    let rest: Vec<DesignId> = pool.iter().copied().filter(|id| !seen.contains(id)).collect();
    let need = (target - chosen.len()).min(rest.len());
    for i in index::sample(rng, rest.len(), need) {
        seen.insert(rest[i]);
        chosen.push(rest[i]);
    }
}

/// `n` distinct uniform draws without replacement.
pub fn propose_rand<R: Rng + ?Sized>(req: &ProposalRequest<'_>, rng: &mut R) -> Vec<DesignId> {
    let n = req.n.min(req.pool.len());
    warn_short("rand", req.n, n);
    index::sample(rng, req.pool.len(), n)
        .into_iter()
        .map(|i| req.pool[i])
        .collect()
}

/// Uniform draws accepted with the model's like-probability; after
/// `200 * n` attempts the remainder is filled uniformly.
pub fn propose_rand_rejection<R: Rng + ?Sized>(
    req: &ProposalRequest<'_>,
    model: Option<&dyn Scorer>,
    rng: &mut R,
) -> Result<Vec<DesignId>> {
    let Some(model) = model else {
        return Ok(propose_rand(req, rng));
    };
    let target = req.n.min(req.pool.len());
    warn_short("rand_reject", req.n, target);
    let mut chosen = Vec::with_capacity(target);
    let mut seen = HashSet::with_capacity(target);
    let cap = REJECTION_ATTEMPTS_PER_SLOT * req.n;
    let mut attempts = 0;
    while chosen.len() < target && attempts < cap {
        attempts += 1;
        let id = req.pool[rng.random_range(0..req.pool.len())];
        let u: f64 = rng.random();
        if seen.contains(&id) {
            continue;
        }
        if u < model.probability(id)? {
            seen.insert(id);
            chosen.push(id);
        }
    }
    fill_uniform(req.pool, &mut chosen, &mut seen, target, rng);
    Ok(chosen)
}

/// Index of the highest score, ties to the smaller id.
fn argmax(scored: &[(f64, DesignId)]) -> Option<DesignId> {
    scored
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|&(_, id)| id)
}

/// Top-`n` by model score out of a uniform sample of `pool_size` designs.
pub fn propose_exploit<R: Rng + ?Sized>(
    req: &ProposalRequest<'_>,
    model: Option<&dyn Scorer>,
    pool_size: usize,
    rng: &mut R,
) -> Result<Vec<DesignId>> {
    let Some(model) = model else {
        return Ok(propose_rand(req, rng));
    };
    let m = pool_size.min(req.pool.len());
    let mut scored = index::sample(rng, req.pool.len(), m)
        .into_iter()
        .map(|i| {
            let id = req.pool[i];
            model.logit(id).map(|s| (s, id))
        })
        .collect::<Result<Vec<_>>>()?;
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let n = req.n.min(scored.len());
    warn_short("exploit", req.n, n);
    Ok(scored.into_iter().take(n).map(|(_, id)| id).collect())
}

/// Per slot: sample an ensemble member, take its favorite out of a fresh
/// uniform sample. Untrained members score at random.
pub fn propose_thompson<R: Rng + ?Sized>(
    req: &ProposalRequest<'_>,
    members: &[Option<&dyn Scorer>],
    sample_size: usize,
    rng: &mut R,
) -> Result<Vec<DesignId>> {
    if members.is_empty() {
        return Err(Error::Config("thompson needs at least one ensemble member".into()));
    }
    let target = req.n.min(req.pool.len());
    warn_short("thompson", req.n, target);
    let mut chosen = Vec::with_capacity(target);
    let mut seen = HashSet::with_capacity(target);
    for _ in 0..target {
        let mut placed = false;
        for _ in 0..=THOMPSON_RETRIES {
            let member = members[rng.random_range(0..members.len())];
            let sample = index::sample(rng, req.pool.len(), sample_size.min(req.pool.len()));
            let scored = sample
                .into_iter()
                .map(|i| {
                    let id = req.pool[i];
                    let s = match member {
                        Some(scorer) => scorer.logit(id)?,
                        None => rng.random::<f64>(),
                    };
                    Ok((s, id))
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(best) = argmax(&scored) {
                if seen.insert(best) {
                    chosen.push(best);
                    placed = true;
                    break;
                }
            }
        }
        if !placed {
            let want = chosen.len() + 1;
            fill_uniform(req.pool, &mut chosen, &mut seen, want, rng);
        }
    }
    Ok(chosen)
}

/// Neighbors of last round's selections, alternating shape and color
/// embeddings round-robin over the selected designs.
pub fn propose_nn<R: Rng + ?Sized>(
    req: &ProposalRequest<'_>,
    lookup: &(dyn EmbeddingLookup + Sync),
    neighborhood: usize,
    rng: &mut R,
) -> Result<Vec<DesignId>> {
    if req.last_selected.is_empty() {
        return Ok(propose_rand(req, rng));
    }
    let target = req.n.min(req.pool.len());
    warn_short("nn", req.n, target);
    let pairs: Vec<(DesignId, Modality)> = req
        .last_selected
        .iter()
        .flat_map(|&id| [(id, Modality::Shape), (id, Modality::Color)])
        .collect();
    // neighbors beyond the first `neighborhood` are only needed once earlier
    // slots have consumed some of them
    let keep = neighborhood + target;
    let mut cache: HashMap<(DesignId, Modality), Vec<DesignId>> = HashMap::new();
    let mut chosen = Vec::with_capacity(target);
    let mut seen = HashSet::with_capacity(target);
    for slot in 0..target {
        let key = pairs[slot % pairs.len()];
        if !cache.contains_key(&key) {
            let (anchor, modality) = key;
            let center = lookup
                .embedding(anchor, modality)
                .ok_or_else(|| Error::MissingModality(modality.name().into()))?;
            let mut dists = req
                .pool
                .iter()
                .map(|&id| {
                    lookup
                        .embedding(id, modality)
                        .map(|v| (squared_distance(center, v), id))
                        .ok_or_else(|| Error::MissingModality(modality.name().into()))
                })
                .collect::<Result<Vec<_>>>()?;
            let cmp = |a: &(f64, DesignId), b: &(f64, DesignId)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if dists.len() > keep {
                dists.select_nth_unstable_by(keep - 1, cmp);
                dists.truncate(keep);
            }
            dists.sort_by(cmp);
            cache.insert(key, dists.into_iter().map(|(_, id)| id).collect());
        }
        let candidates: Vec<DesignId> = cache[&key]
            .iter()
            .copied()
            .filter(|id| !seen.contains(id))
            .take(neighborhood)
            .collect();
        if candidates.is_empty() {
            let want = chosen.len() + 1;
            fill_uniform(req.pool, &mut chosen, &mut seen, want, rng);
        } else {
            let id = candidates[rng.random_range(0..candidates.len())];
            seen.insert(id);
            chosen.push(id);
        }
    }
    Ok(chosen)
}

/// The combined round: rejection-sampled RAND, EXPLOIT, THOMPSON and NN in
/// the mix's proportions, cross-method duplicates replaced uniformly, then
/// shuffled.
pub fn propose_everything<R: Rng + ?Sized>(
    req: &ProposalRequest<'_>,
    ctx: &ProposalContext<'_>,
    rng: &mut R,
) -> Result<Vec<DesignId>> {
    let mix = ctx.mix;
    if mix.total() != req.n {
        return Err(Error::Config(format!(
            "strategy mix sums to {} but {} proposals requested",
            mix.total(),
            req.n
        )));
    }
    let part = |n: usize| ProposalRequest { n, ..*req };
    let mut all = propose_rand_rejection(&part(mix.rand), ctx.model, rng)?;
    all.extend(propose_exploit(&part(mix.exploit), ctx.model, EXPLOIT_POOL_SIZE, rng)?);
    all.extend(propose_thompson(&part(mix.thompson), &ctx.members, THOMPSON_SAMPLE_SIZE, rng)?);
    all.extend(propose_nn(&part(mix.nn), ctx.lookup, NN_NEIGHBORHOOD, rng)?);

    let mut seen = HashSet::with_capacity(all.len());
    let mut chosen: Vec<DesignId> = all.into_iter().filter(|id| seen.insert(*id)).collect();
    let target = req.n.min(req.pool.len());
    warn_short("everything", req.n, target);
    fill_uniform(req.pool, &mut chosen, &mut seen, target, rng);
    chosen.shuffle(rng);
    Ok(chosen)
}

/// Runs `strategy` for one round.
pub fn propose<R: Rng + ?Sized>(
    strategy: Strategy,
    req: &ProposalRequest<'_>,
    ctx: &ProposalContext<'_>,
    rng: &mut R,
) -> Result<Vec<DesignId>> {
    req.check()?;
    match strategy {
        Strategy::Rand => Ok(propose_rand(req, rng)),
        Strategy::RandReject => propose_rand_rejection(req, ctx.model, rng),
        Strategy::Exploit => propose_exploit(req, ctx.model, EXPLOIT_POOL_SIZE, rng),
        Strategy::Thompson => propose_thompson(req, &ctx.members, THOMPSON_SAMPLE_SIZE, rng),
        Strategy::Nn => propose_nn(req, ctx.lookup, NN_NEIGHBORHOOD, rng),
        Strategy::Everything => propose_everything(req, ctx, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proposer::GRID_SIZE;
    use crate::space::EmbeddingMap;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(n: u32) -> Vec<DesignId> {
        (0..n).map(DesignId).collect()
    }

    fn line_embeddings(n: u32) -> EmbeddingMap {
        let mut map = EmbeddingMap::new();
        for i in 0..n {
            map.insert(DesignId(i), Modality::Shape, vec![f64::from(i)]);
            map.insert(DesignId(i), Modality::Color, vec![-f64::from(i) * 0.5, 1.0]);
        }
        map
    }

    fn distinct(v: &[DesignId]) -> bool {
        v.iter().collect::<HashSet<_>>().len() == v.len()
    }

    #[test]
    fn rand_is_uniform() {
        let pool = ids(100);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: GRID_SIZE,
            exclusions: &none,
            last_selected: &[],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut counts = vec![0u32; 100];
        let rounds = 10_000;
        for _ in 0..rounds {
            let got = propose_rand(&req, &mut rng);
            assert_eq!(got.len(), GRID_SIZE);
            assert!(distinct(&got));
            for id in got {
                counts[id.0 as usize] += 1;
            }
        }
        let expected = f64::from(rounds) * GRID_SIZE as f64 / 100.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (f64::from(c) - expected).powi(2) / expected)
            .sum();
        // 99 degrees of freedom: mean 99, sd ~14
        assert!((chi2 - 99.0).abs() < 5.0 * (2.0f64 * 99.0).sqrt(), "chi2 {chi2}");
        for &c in &counts {
            let sd = (expected * (1.0 - 0.18)).sqrt();
            assert!((f64::from(c) - expected).abs() < 5.0 * sd);
        }
    }

    #[test]
    fn rejection_matches_model_odds() {
        // A = even ids with p = 0.9, the rest p = 0.1
        let scorer = |id: DesignId| if id.0 % 2 == 0 { 9f64.ln() } else { -9f64.ln() };
        let pool = ids(2000);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: 1,
            exclusions: &none,
            last_selected: &[],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut a, mut b) = (0u32, 0u32);
        for _ in 0..10_000 {
            let got = propose_rand_rejection(&req, Some(&scorer), &mut rng).unwrap();
            if got[0].0 % 2 == 0 {
                a += 1;
            } else {
                b += 1;
            }
        }
        let ratio = f64::from(a) / f64::from(b);
        assert!((ratio - 9.0).abs() < 0.9, "ratio {ratio}");
    }

    #[test]
    fn rejection_gives_up_on_hopeless_models() {
        let never = |_: DesignId| -1000.0;
        let pool = ids(50);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: 5,
            exclusions: &none,
            last_selected: &[],
        };
        let got = propose_rand_rejection(&req, Some(&never), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(got.len(), 5);
        assert!(distinct(&got));
    }

    #[test]
    fn exploit_takes_the_top() {
        let pool = ids(40);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: 1,
            exclusions: &none,
            last_selected: &[],
        };
        let score = |id: DesignId| -((f64::from(id.0) - 17.0).powi(2));
        let got = propose_exploit(&req, Some(&score), 40, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(got, vec![DesignId(17)]);

        let all = ProposalRequest { n: 40, ..req };
        let got = propose_exploit(&all, Some(&score), 40, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(got.iter().collect::<HashSet<_>>().len(), 40);
    }

    #[test]
    fn exploit_ignores_monotone_rescaling() {
        let pool = ids(500);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: GRID_SIZE,
            exclusions: &none,
            last_selected: &[],
        };
        let raw = |id: DesignId| (f64::from(id.0) * 0.37).sin();
        let squashed = |id: DesignId| 0.5 * raw(id).powi(3) - 2.0;
        let a = propose_exploit(&req, Some(&raw), EXPLOIT_POOL_SIZE, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = propose_exploit(&req, Some(&squashed), EXPLOIT_POOL_SIZE, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thompson_cold_members_still_fill() {
        let pool = ids(300);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: GRID_SIZE,
            exclusions: &none,
            last_selected: &[],
        };
        let members: Vec<Option<&dyn Scorer>> = vec![None; 5];
        let got = propose_thompson(&req, &members, THOMPSON_SAMPLE_SIZE, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(got.len(), GRID_SIZE);
        assert!(distinct(&got));
    }

    #[test]
    fn thompson_single_member_picks_sample_maxima() {
        let pool = ids(300);
        let none = HashSet::new();
        let req = ProposalRequest {
            pool: &pool,
            n: 10,
            exclusions: &none,
            last_selected: &[],
        };
        let score = |id: DesignId| f64::from(id.0);
        let members: Vec<Option<&dyn Scorer>> = vec![Some(&score)];
        let got = propose_thompson(&req, &members, THOMPSON_SAMPLE_SIZE, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert!(distinct(&got));
        // the max of 50 uniform draws from 300 is almost surely in the top third
        assert!(got.iter().all(|id| id.0 >= 200), "{got:?}");
    }

    #[test]
    fn nn_finds_exact_duplicates() {
        let mut map = line_embeddings(100);
        map.insert(DesignId(500), Modality::Shape, vec![40.0]);
        map.insert(DesignId(500), Modality::Color, vec![-20.0, 1.0]);
        let mut pool: Vec<DesignId> = ids(100).into_iter().filter(|id| id.0 != 40).collect();
        pool.push(DesignId(500));
        let shown: HashSet<DesignId> = [DesignId(40)].into();
        let req = ProposalRequest {
            pool: &pool,
            n: 2,
            exclusions: &shown,
            last_selected: &[DesignId(40)],
        };
        let mut hits = 0;
        for seed in 0..200 {
            let got = propose_nn(&req, &map, NN_NEIGHBORHOOD, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert!(got.iter().all(|id| id.0.abs_diff(40) <= 10 || id.0 == 500), "{got:?}");
            hits += got.iter().filter(|id| id.0 == 500).count();
        }
        assert!(hits > 0);
    }

    #[test]
    fn nn_alternates_modalities() {
        // shape neighbors of 0 are 1..=10, color neighbors of 0 (placed far
        // away in shape) are 1000..
        let mut map = EmbeddingMap::new();
        map.insert(DesignId(0), Modality::Shape, vec![0.0]);
        map.insert(DesignId(0), Modality::Color, vec![0.0]);
        for i in 1..=50 {
            map.insert(DesignId(i), Modality::Shape, vec![f64::from(i)]);
            map.insert(DesignId(i), Modality::Color, vec![1000.0 + f64::from(i)]);
            map.insert(DesignId(1000 + i), Modality::Shape, vec![1000.0 + f64::from(i)]);
            map.insert(DesignId(1000 + i), Modality::Color, vec![f64::from(i)]);
        }
        let pool: Vec<DesignId> = (1..=50).flat_map(|i| [DesignId(i), DesignId(1000 + i)]).collect();
        let shown: HashSet<DesignId> = [DesignId(0)].into();
        let req = ProposalRequest {
            pool: &pool,
            n: 4,
            exclusions: &shown,
            last_selected: &[DesignId(0)],
        };
        let got = propose_nn(&req, &map, NN_NEIGHBORHOOD, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(got.len(), 4);
        assert!(got[0].0 <= 10 && got[2].0 <= 11);
        assert!(got[1].0 > 1000 && got[3].0 > 1000);
    }

    #[test]
    fn nn_without_selection_is_uniform() {
        let pool = ids(30);
        let none = HashSet::new();
        let map = line_embeddings(30);
        let req = ProposalRequest {
            pool: &pool,
            n: 6,
            exclusions: &none,
            last_selected: &[],
        };
        let a = propose_nn(&req, &map, NN_NEIGHBORHOOD, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let b = propose_rand(&req, &mut ChaCha8Rng::seed_from_u64(8));
        assert_eq!(a, b);
    }

    fn everything_round(seed: u64, mix: StrategyMix) -> Result<Vec<DesignId>> {
        let map = line_embeddings(400);
        let pool: Vec<DesignId> = (20..400).map(DesignId).collect();
        let shown: HashSet<DesignId> = (0..20).map(DesignId).collect();
        let model = |id: DesignId| (f64::from(id.0) - 200.0) / 50.0;
        let m2 = |id: DesignId| (f64::from(id.0) - 100.0) / 30.0;
        let ctx = ProposalContext {
            model: Some(&model),
            members: vec![Some(&model), None, Some(&m2), None, None],
            lookup: &map,
            mix,
        };
        let req = ProposalRequest {
            pool: &pool,
            n: GRID_SIZE,
            exclusions: &shown,
            last_selected: &[DesignId(3), DesignId(7)],
        };
        propose(Strategy::Everything, &req, &ctx, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn everything_fills_the_grid() {
        for seed in 0..20 {
            let got = everything_round(seed, StrategyMix::default()).unwrap();
            assert_eq!(got.len(), GRID_SIZE);
            assert!(distinct(&got));
            assert!(got.iter().all(|id| id.0 >= 20));
        }
        assert_eq!(everything_round(1, StrategyMix::default()).unwrap(), everything_round(1, StrategyMix::default()).unwrap());
    }

    #[test]
    fn everything_checks_the_mix() {
        let pure = StrategyMix {
            rand: 18,
            exploit: 0,
            thompson: 0,
            nn: 0,
        };
        assert_eq!(everything_round(2, pure).unwrap().len(), GRID_SIZE);
        let short = StrategyMix { rand: 3, ..pure };
        assert!(matches!(everything_round(2, short), Err(Error::Config(_))));
    }

    #[test]
    fn excluded_pool_is_rejected() {
        let pool = ids(30);
        let shown: HashSet<DesignId> = [DesignId(4)].into();
        let map = line_embeddings(30);
        let ctx = ProposalContext {
            model: None,
            members: vec![None],
            lookup: &map,
            mix: StrategyMix::default(),
        };
        let req = ProposalRequest {
            pool: &pool,
            n: 3,
            exclusions: &shown,
            last_selected: &[],
        };
        assert!(propose(Strategy::Rand, &req, &ctx, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn short_pools_give_short_rounds() {
        let pool = ids(5);
        let none = HashSet::new();
        let map = line_embeddings(5);
        let score = |id: DesignId| f64::from(id.0);
        let ctx = ProposalContext {
            model: Some(&score),
            members: vec![Some(&score)],
            lookup: &map,
            mix: StrategyMix::default(),
        };
        let req = ProposalRequest {
            pool: &pool,
            n: GRID_SIZE,
            exclusions: &none,
            last_selected: &[DesignId(1)],
        };
        for s in Strategy::ALL {
            let got = propose(s, &req, &ctx, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
            assert_eq!(got.len(), 5, "{s}");
            assert!(distinct(&got));
        }
    }
}
