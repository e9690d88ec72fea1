//! Central-difference verification of analytic gradients.

use super::store::ParamStore;
use super::DiffError;

/// Compares the analytic gradients already accumulated in the store against
/// central differences of `loss_fn`, coordinate by coordinate over all
/// trainable parameters. Returns the maximum relative error
/// `|analytic - fd| / max(|analytic|, |fd|, 1e-8)`.
///
/// The caller runs forward + backward once beforehand so the store holds the
/// analytic gradient, and makes `loss_fn` deterministic by fixing any injected
/// noise. Frozen entries are excluded: the backward pass does not accumulate
/// into them by contract.
pub fn grad_check<F>(store: &mut ParamStore, h: f64, mut loss_fn: F) -> Result<f64, DiffError>
where
    F: FnMut(&ParamStore) -> f64,
{
    grad_check_with(store, |s| s, h, |s| loss_fn(s))
}

/// [`grad_check`] over a parameter store embedded in a larger context (an
/// agent, an executor): `store_of` exposes the store to perturb, `loss_fn`
/// re-evaluates the loss on the whole context.
pub fn grad_check_with<C, F, S>(
    ctx: &mut C,
    store_of: S,
    h: f64,
    mut loss_fn: F,
) -> Result<f64, DiffError>
where
    S: Fn(&mut C) -> &mut ParamStore,
    F: FnMut(&C) -> f64,
{
    assert!((1e-6..=1e-3).contains(&h), "h must be in [1e-6, 1e-3]");
    let (n_entries, lens): (usize, Vec<usize>) = {
        let store = store_of(ctx);
        (
            store.entries.len(),
            store.entries.iter().map(|e| e.value.len()).collect(),
        )
    };
    let mut max_err = 0.0_f64;
    for e in 0..n_entries {
        if store_of(ctx).entries[e].frozen {
            continue;
        }
        for i in 0..lens[e] {
            let orig = store_of(ctx).entries[e].value[i];
            store_of(ctx).entries[e].value[i] = orig + h;
            let up = loss_fn(ctx);
            store_of(ctx).entries[e].value[i] = orig - h;
            let down = loss_fn(ctx);
            store_of(ctx).entries[e].value[i] = orig;
            if !up.is_finite() || !down.is_finite() {
                return Err(DiffError::NonFiniteLoss);
            }
            let fd = (up - down) / (2.0 * h);
            let analytic = store_of(ctx).entries[e].grad[i];
            let denom = analytic.abs().max(fd.abs()).max(1e-8);
            max_err = max_err.max((analytic - fd).abs() / denom);
        }
    }
    Ok(max_err)
}
