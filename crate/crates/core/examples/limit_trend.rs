//! KS distance of normalized level sums to the compound Poisson-Laplace law
//! on the small-horizon schedule.

use revchain::diagnostics::limit_law_trend;
use revchain::schedule::engineered_schedule;
use revchain::superposed::{SuperChain, DEFAULT_BUDGET};

fn main() {
    let chain = SuperChain::new(engineered_schedule(3), 3).expect("separated levels");
    let trend = limit_law_trend(&chain, 100_000, 7, DEFAULT_BUDGET);
    for l in &trend.levels {
        println!("level {} horizon {:>9} ks {:.4} lower-level sd {:.2e}", l.level, l.horizon, l.ks, l.lower_sd);
    }
    for (j, why) in &trend.skipped {
        println!("level {j} skipped: {why}");
    }
}
