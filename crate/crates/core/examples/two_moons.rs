//! End-to-end two-moons run printing the per-iteration history.
//!
//! `cargo run --release -p sadkl-core --example two_moons -- [seed] [unlabeled_anomaly_frac]`

use sadkl_core::data::{make_two_moons, two_moons_scenario, SplitFractions, TwoMoons};
use sadkl_core::eval::{anomaly_scores, roc_auc};
use sadkl_core::sadkl::{run_sadkl, SadKlConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let ua: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0.01);
    let fractions = SplitFractions {
        labeled: 0.1,
        labeled_abnormal: 0.05,
        unlabeled_abnormal: ua,
    };
    let train =
        two_moons_scenario(&TwoMoons::new(10_000, 0, 0.3, seed), fractions).expect("training set");
    let test = make_two_moons(&TwoMoons::new(1000, 500, 0.3, seed + 1000)).expect("test set");

    let mut cfg = SadKlConfig::default();
    cfg.pretrain.seed = seed;
    cfg.seed = seed;
    let start = std::time::Instant::now();
    let out = run_sadkl(&train, &cfg).expect("training");
    let elapsed = start.elapsed();

    let setup = &out.state.setup;
    println!(
        "pretrain mse {:.4} -> {:.4}",
        out.pretrain_mse[0],
        out.pretrain_mse.last().unwrap()
    );
    println!(
        "p fit ({:.3}, {:.3})  q fit ({:.3}, {:.3})  KL {:.5}  P_D {:.6}",
        setup.normal_fit.params.c(),
        setup.normal_fit.params.k(),
        setup.unlabeled_fit.params.c(),
        setup.unlabeled_fit.params.k(),
        setup.kl,
        setup.p_d
    );
    for r in &out.state.history {
        println!(
            "t {:3}  eta {:.5}  delta {:.6}  flips {:5}  loss {:.6}  train_auc {:.4}",
            r.t,
            r.eta,
            r.delta,
            r.flips,
            r.mean_loss,
            r.train_auc.unwrap_or(f64::NAN)
        );
    }
    let scores = anomaly_scores(&out.encoder, &out.centroid, test.features()).unwrap();
    let auc = roc_auc(&scores, &test.ground_truth()).unwrap().auc;
    println!(
        "converged {}  iterations {}  test AUC {:.4}  ({:.1?})",
        out.state.converged, out.state.t, auc, elapsed
    );
}
