mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use source_trace::optimizers::sample_ball;

const SEEDS: u64 = 100;

// The kick drawn by the epoch is the first draw of its generator.
fn kick(seed: u64, r: f64) -> [f64; 3] {
    sample_ball(r, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[test]
fn escape_flag_matches_decrease() {
    let pc = saddle_config(1e-2);
    for s in 0..SEEDS {
        let t = saddle_escape(s, &pc);
        assert_eq!(t.escaped, t.decrease >= pc.f_thres, "seed {s}: decrease {:e}", t.decrease);
    }
}

// Along the unstable axis the normalized trial step has negative curvature
// and is accepted at full length, so kicks dominated by `y` always escape.
// Kicks dominated by the stable axes force the step down to O(‖g‖) and
// the unstable component barely grows within t_thres.
#[test]
fn unstable_dominated_kicks_escape() {
    let pc = saddle_config(1e-2);
    let mut dominated = 0;
    let mut escaped = 0;
    for s in 0..SEEDS {
        let k = kick(s, pc.radius);
        let t = saddle_escape(s, &pc);
        escaped += usize::from(t.escaped);
        if k[1] * k[1] > k[0] * k[0] + k[2] * k[2] {
            dominated += 1;
            assert!(t.escaped, "seed {s}: kick {k:?} did not escape");
        }
    }
    assert!(dominated > 0);
    assert!(escaped >= dominated);
}
