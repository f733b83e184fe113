#![allow(dead_code)]

use conformal_ope::mdp::{MdpModel, Policy, Step, Trajectory};

/// Two states, two actions; reward 1 on landing in state 1.
pub fn tiny_mdp(horizon: usize) -> MdpModel {
    let t = vec![
        0.6, 0.4, 0.3, 0.7, //
        0.4, 0.6, 0.7, 0.3,
    ];
    let r = vec![0, 1, 0, 1, 0, 1, 0, 1];
    MdpModel::new(2, 2, t, r, vec![0.5, 0.5], horizon).unwrap()
}

/// Every trajectory from `start` with its probability under `policy`.
pub fn enumerate_paths(model: &MdpModel, policy: &Policy, start: usize) -> Vec<(Trajectory, f64)> {
    fn walk(model: &MdpModel, policy: &Policy, s: usize, steps: &mut Vec<Step>, mass: f64, out: &mut Vec<(Trajectory, f64)>) {
        if steps.len() == model.horizon() {
            out.push((Trajectory { steps: steps.clone(), final_state: s }, mass));
            return;
        }
        for a in 0..model.num_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for n in 0..model.num_states() {
                let pn = model.transition(s, a, n);
                if pn > 0.0 {
                    steps.push(Step { state: s, action: a, reward: model.reward(s, a, n) });
                    walk(model, policy, n, steps, mass * pa * pn, out);
                    steps.pop();
                }
            }
        }
    }
    let mut out = Vec::new();
    walk(model, policy, start, &mut Vec::new(), 1.0, &mut out);
    out
}
