use rand::seq::index::sample;
use rand::Rng;

use super::{ParticipationMode, StragglerModel, StragglerPolicy};
use crate::channel::FadingDraw;

/// Per-client epoch counts for one round. `round(fraction·K)` clients drawn
/// uniformly by `set_rng` straggle with `E_k ~ U{1, …, E−1}` drawn from
/// `epoch_rng`; everyone else runs `E` epochs. With `E = 1` stragglers also
/// run one epoch.
pub fn assign_stragglers<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    clients: usize,
    model: &StragglerModel,
    epochs: usize,
    set_rng: &mut R1,
    epoch_rng: &mut R2,
) -> Vec<usize> {
    let mut e_k = vec![epochs; clients];
    let count = ((model.fraction * clients as f64).round() as usize).min(clients);
    if count == 0 {
        return e_k;
    }
    if epochs <= 1 {
        log::warn!("E = 1 leaves stragglers no room to do less work; they run one epoch");
    }
    let mut stragglers = sample(set_rng, clients, count).into_vec();
    stragglers.sort_unstable();
    for k in stragglers {
        e_k[k] = if epochs <= 1 { 1 } else { epoch_rng.random_range(1..epochs) };
    }
    e_k
}

/// Client ids transmitting this round, ascending. An empty result means the
/// round is skipped.
pub fn select_participants<R: Rng + ?Sized>(
    mode: ParticipationMode,
    clients: usize,
    draws: Option<&[FadingDraw]>,
    r_hat: f64,
    policy: StragglerPolicy,
    e_k: &[usize],
    epochs: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut ids: Vec<usize> = match mode {
        ParticipationMode::Full => (0..clients).collect(),
        ParticipationMode::Random { k_hat } => {
            let mut v = sample(rng, clients, k_hat.min(clients)).into_vec();
            v.sort_unstable();
            v
        }
        ParticipationMode::Fading => {
            let draws = draws.expect("fading mode needs channel draws");
            (0..clients).filter(|&k| draws[k].participates(r_hat)).collect()
        }
    };
    if policy == StragglerPolicy::Drop {
        ids.retain(|&k| e_k[k] >= epochs);
    }
    ids
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn model(fraction: f64) -> StragglerModel {
        StragglerModel {
            fraction,
            ..Default::default()
        }
    }

    #[test]
    fn no_stragglers() {
        let e = assign_stragglers(30, &model(0.0), 3, &mut rng_from_seed(1), &mut rng_from_seed(2));
        assert!(e.iter().all(|&x| x == 3));
    }

    #[test]
    fn all_stragglers_do_less() {
        let e = assign_stragglers(30, &model(1.0), 3, &mut rng_from_seed(1), &mut rng_from_seed(2));
        assert!(e.iter().all(|&x| x == 1 || x == 2));
    }

    #[test]
    fn half_straggle_exactly() {
        let e = assign_stragglers(30, &model(0.5), 4, &mut rng_from_seed(1), &mut rng_from_seed(2));
        assert_eq!(e.iter().filter(|&&x| x < 4).count(), 15);
    }

    #[test]
    fn drop_policy_removes_stragglers() {
        let e_k = vec![3, 1, 3, 2];
        let ids = select_participants(
            ParticipationMode::Full,
            4,
            None,
            0.0,
            StragglerPolicy::Drop,
            &e_k,
            3,
            &mut rng_from_seed(0),
        );
        assert_eq!(ids, vec![0, 2]);
    }

    #[test]
    fn fading_all_below_threshold_is_empty() {
        let draws = vec![FadingDraw { r: 0.1, omega: 0.0 }; 5];
        let ids = select_participants(
            ParticipationMode::Fading,
            5,
            Some(&draws),
            0.5,
            StragglerPolicy::IncludePartial,
            &[2; 5],
            2,
            &mut rng_from_seed(0),
        );
        assert!(ids.is_empty());
    }
}
