use kolmo_core::par::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

#[test]
fn parallel_matches_sequential() {
    let f = |r: std::ops::Range<usize>, rng: &mut ChaCha8Rng| r.map(|i| (i, rng.gen::<u64>())).collect::<Vec<_>>();
    let a = run_batches(5000, 7, Execution::Parallel, f);
    let b = run_batches(5000, 7, Execution::Sequential, f);
    assert_eq!(a, b);
    assert_eq!(a.len(), 5000);
    assert!(a.iter().enumerate().all(|(k, (i, _))| k == *i));
}

#[test]
fn streams_differ() {
    let mut a = batch_rng(1, 0);
    let mut b = batch_rng(1, 1);
    assert_ne!(a.gen::<u64>(), b.gen::<u64>());
}
