//! End to end tour: build a tower from its JSON descriptor, take the
//! limit, check the axioms, resolve the flagship sums, and exhibit the
//! empty sum in the tower without the doubling property.
//!
//! Run with `cargo run -p hyperlim --example tour`.

use hyperlim::groundfield::RFExpr;
use hyperlim::hyperfield::checks::{check_hyperfield, check_valuation, CheckConfig};
use hyperlim::tower::{
    builtin_tower, detect_empty_sum, induced_iso, limit_d, limit_factor_iso, limit_hyperfield,
    limit_val, triple_sum_resolve, EmptySumOutcome, StageFamily, TowerSpec,
};

fn main() -> Result<(), hyperlim::Error> {
    let t = builtin_tower("paper-0n", 8)?;
    let json = TowerSpec::of(&t).to_json();
    println!("tower descriptor:\n{json}\n");
    let t = TowerSpec::from_json(&json)?.build()?;
    let lim = limit_hyperfield(&t)?;
    println!("limit handle: {}", lim.name());

    let cfg = CheckConfig {
        seed: 7,
        trials: 64,
        probes: 3,
    };
    let hf = check_hyperfield(&lim, &cfg)?;
    let vf = check_valuation(&lim, &cfg)?;
    println!(
        "hyperfield axioms: {}; valuation axioms: {}",
        if hf.passed() { "pass" } else { "FAIL" },
        if vf.passed() { "pass" } else { "FAIL" },
    );

    let one = lim.one();
    let mone = lim.neg(&one)?;
    let x = lim.from_expr_str("x")?;
    println!("1 + (-1) + 0 = {}", lim.display_sum(&triple_sum_resolve(&lim, &one, &mone, &lim.zero())?));
    println!("1 + (-1) + x = {}", lim.display_sum(&triple_sum_resolve(&lim, &one, &mone, &x)?));
    println!("val(x) = {}", limit_val(&lim, &x)?);
    println!("d(1, 1+x) = {}", limit_d(&lim, &one, &lim.from_expr_str("1+x")?)?);

    let r = limit_factor_iso(&lim, 2, &cfg)?;
    println!("limit vs stage 2: {}", if r.passed() { "pass" } else { "FAIL" });
    let f3 = builtin_tower("f3", 8)?;
    let r = induced_iso(&f3.stage(2), &f3.stage(1), &cfg)?;
    println!("induced iso, f3 stage 2 over stage 1: {}", if r.passed() { "pass" } else { "FAIL" });

    let bad = builtin_tower("paper-1m", 8)?;
    println!("\npaper-1m limit: {}", limit_hyperfield(&bad).unwrap_err());
    let ga = StageFamily::PartialPowerSum {
        prefactor: RFExpr::Lit(1),
        var: 1,
    };
    let gb = StageFamily::PartialPowerSum {
        prefactor: RFExpr::Var(0),
        var: 1,
    };
    match detect_empty_sum(&bad, &ga, &gb, 3)? {
        EmptySumOutcome::Empty {
            stage_lo,
            stage_hi,
            detail,
        } => println!("empty sum between stages {stage_lo} and {stage_hi}:\n  {detail}"),
        other => println!("unexpected outcome: {other:?}"),
    }
    Ok(())
}
