//! Gaps under the serial and eager policies for each built-in profile,
//! compared with the human window.

use turnpilot::turnsim::{
    run_policy, LatencyProfile, TurnInput, TurnPolicy, BUILTIN_PROFILES, HUMAN_NORMS,
};

fn main() {
    let questions = [
        "how do i get from new york to boston",
        "who wrote the declaration of independence",
        "when did the first avatar movie come out",
        "what is the tallest mountain in africa",
    ];
    let turns: Vec<TurnInput> = questions
        .iter()
        .enumerate()
        .map(|(i, q)| TurnInput::new(i.to_string(), *q, 60))
        .collect();
    println!("human window {:?} ms", HUMAN_NORMS.window_ms);
    for name in BUILTIN_PROFILES {
        let profile = LatencyProfile::builtin(name).unwrap();
        for policy in [
            TurnPolicy::Serial,
            TurnPolicy::Eager { k: 1 },
            TurnPolicy::Eager { k: 2 },
        ] {
            let r = run_policy(&turns, &policy, &profile, None).unwrap();
            println!(
                "{name:<16} {:<8} mean gap {:>7.1} ms  in window {:.2}",
                r.policy,
                r.mean_gap_ms.unwrap_or(f64::NAN),
                r.fraction_in_window
            );
        }
    }
}
