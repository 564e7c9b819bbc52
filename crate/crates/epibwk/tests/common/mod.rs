//! Independent oracles for cross-checking the solvers: a top-down
//! expectimax recursion, literal policy enumeration, a hand-rolled ridge
//! solve, and vertex enumeration of the fluid linear program. None of them
//! share code with the implementation paths they check.
#![allow(dead_code)]

use epibwk::model::{ActionId, ContextId, EnvFile, EnvironmentModel};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

/// Episode optimum by unmemoized expectimax over the outcome tree:
/// chance nodes sum over contexts and conversions, decision nodes maximize
/// over the feasible set.
pub fn expectimax_opt(env: &EnvironmentModel, budget: usize) -> f64 {
    chance_value(env, 1, budget)
}

fn chance_value(env: &EnvironmentModel, h: usize, b: usize) -> f64 {
    if h > env.horizon() {
        return 0.0;
    }
    let mut total = 0.0;
    for c in 0..env.num_contexts() {
        let p = env.lambda(h, ContextId(c));
        if p > 0.0 {
            total += p * decision_value(env, h, b, ContextId(c));
        }
    }
    total
}

fn decision_value(env: &EnvironmentModel, h: usize, b: usize, theta: ContextId) -> f64 {
    let mut best = f64::NEG_INFINITY;
    for a in env.feasible_actions(b, theta).unwrap() {
        let rho = env.rho_at(h, theta, a);
        let d = env.consumption(theta, a);
        let val = rho * (env.reward(theta, a) + chance_value(env, h + 1, b - d))
            + (1.0 - rho) * chance_value(env, h + 1, b);
        if val > best {
            best = val;
        }
    }
    best
}

/// Episode optimum by enumerating every deterministic Markov policy over
/// the reachable cells and evaluating each by exact expectation. Only for
/// tiny instances; panics if the policy space exceeds `cap`.
pub fn enumerate_policies_opt(env: &EnvironmentModel, budget: usize, cap: u64) -> f64 {
    // Reachable budgets per step.
    let mut reachable: Vec<Vec<usize>> = vec![Vec::new(); env.horizon() + 1];
    reachable[0].push(budget); // step h=1 stored at index 0
    for h in 1..env.horizon() {
        let mut next: Vec<usize> = Vec::new();
        for &b in &reachable[h - 1] {
            for c in 0..env.num_contexts() {
                if env.lambda(h, ContextId(c)) == 0.0 {
                    continue;
                }
                for a in env.feasible_actions(b, ContextId(c)).unwrap() {
                    let spent = b - env.consumption(ContextId(c), a);
                    if !next.contains(&spent) {
                        next.push(spent);
                    }
                    if !next.contains(&b) {
                        next.push(b);
                    }
                }
            }
        }
        next.sort_unstable();
        reachable[h] = next;
    }

    // Cells with at least one arrival and their feasible choices.
    let mut cells: Vec<(usize, usize, ContextId, Vec<ActionId>)> = Vec::new();
    for h in 1..=env.horizon() {
        for &b in &reachable[h - 1] {
            for c in 0..env.num_contexts() {
                if env.lambda(h, ContextId(c)) == 0.0 {
                    continue;
                }
                let feas = env.feasible_actions(b, ContextId(c)).unwrap();
                cells.push((h, b, ContextId(c), feas));
            }
        }
    }
    let combos: u64 = cells.iter().map(|(_, _, _, f)| f.len() as u64).product();
    assert!(
        combos <= cap,
        "policy space {combos} too large for enumeration"
    );

    let lookup = |choice: &[usize], h: usize, b: usize, theta: ContextId| -> ActionId {
        for (i, (ch, cb, ct, feas)) in cells.iter().enumerate() {
            if *ch == h && *cb == b && *ct == theta {
                return feas[choice[i]];
            }
        }
        unreachable!("unvisited cell ({h},{b},{theta:?})");
    };

    fn policy_u(
        env: &EnvironmentModel,
        action_of: &dyn Fn(usize, usize, ContextId) -> ActionId,
        h: usize,
        b: usize,
    ) -> f64 {
        if h > env.horizon() {
            return 0.0;
        }
        let mut total = 0.0;
        for c in 0..env.num_contexts() {
            let p = env.lambda(h, ContextId(c));
            if p == 0.0 {
                continue;
            }
            let a = action_of(h, b, ContextId(c));
            let rho = env.rho_at(h, ContextId(c), a);
            let d = env.consumption(ContextId(c), a);
            let v = rho
                * (env.reward(ContextId(c), a) + policy_u(env, action_of, h + 1, b - d))
                + (1.0 - rho) * policy_u(env, action_of, h + 1, b);
            total += p * v;
        }
        total
    }

    let mut choice = vec![0usize; cells.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let value = policy_u(
            env,
            &|h, b, theta| lookup(&choice, h, b, theta),
            1,
            budget,
        );
        if value > best {
            best = value;
        }
        // Mixed-radix increment over the per-cell feasible sets.
        let mut pos = 0;
        loop {
            if pos == cells.len() {
                return best;
            }
            choice[pos] += 1;
            if choice[pos] < cells[pos].3.len() {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}

/// Ridge regression by dense normal equations with Gaussian elimination;
/// shares nothing with the crate's linear algebra.
pub fn ridge_solve(phis: &[Vec<f64>], ys: &[f64], lambda: f64) -> Vec<f64> {
    let d = phis.first().map_or(0, |p| p.len());
    let mut a = vec![vec![0.0; d + 1]; d];
    for i in 0..d {
        a[i][i] = lambda;
    }
    for (phi, y) in phis.iter().zip(ys) {
        for i in 0..d {
            for j in 0..d {
                a[i][j] += phi[i] * phi[j];
            }
            a[i][d] += y * phi[i];
        }
    }
    // Gaussian elimination with partial pivoting on the augmented system.
    for col in 0..d {
        let mut pivot = col;
        for row in col + 1..d {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        a.swap(col, pivot);
        let diag = a[col][col];
        for j in col..=d {
            a[col][j] /= diag;
        }
        for row in 0..d {
            if row != col {
                let factor = a[row][col];
                for j in col..=d {
                    a[row][j] -= factor * a[col][j];
                }
            }
        }
    }
    (0..d).map(|i| a[i][d]).collect()
}

/// Fluid-relaxation optimum by enumerating the vertices of the product of
/// per-cell simplices cut by one budget constraint: every vertex assigns a
/// pure action to each (step, context) cell except at most one cell split
/// between two actions to make the budget tight.
pub fn fluid_primal_enumeration(env: &EnvironmentModel, budget: usize) -> f64 {
    struct Cell {
        values: Vec<f64>,
        costs: Vec<f64>,
    }
    let mut cells: Vec<Cell> = Vec::new();
    for h in 1..=env.horizon() {
        for c in 0..env.num_contexts() {
            let w = env.lambda(h, ContextId(c));
            if w == 0.0 {
                continue;
            }
            let n_act = env.num_actions();
            let mut values = Vec::with_capacity(n_act);
            let mut costs = Vec::with_capacity(n_act);
            for a in 0..n_act {
                let a = ActionId(a);
                let rho = env.rho_at(h, ContextId(c), a);
                values.push(w * rho * env.reward(ContextId(c), a));
                costs.push(w * rho * env.consumption(ContextId(c), a) as f64);
            }
            cells.push(Cell { values, costs });
        }
    }
    let b = budget as f64;
    let combos: u64 = cells.iter().map(|c| c.values.len() as u64).product();
    assert!(combos <= 2_000_000, "instance too large for LP enumeration");

    let mut assign = vec![0usize; cells.len()];
    let mut best = f64::NEG_INFINITY;
    loop {
        let total_value: f64 = cells
            .iter()
            .zip(&assign)
            .map(|(cell, &a)| cell.values[a])
            .sum();
        let total_cost: f64 = cells
            .iter()
            .zip(&assign)
            .map(|(cell, &a)| cell.costs[a])
            .sum();
        if total_cost <= b + 1e-12 && total_value > best {
            best = total_value;
        }
        // Vertices with a tight budget split one cell between its assigned
        // action and an alternative.
        for (i, cell) in cells.iter().enumerate() {
            let base = assign[i];
            for alt in 0..cell.values.len() {
                if alt == base {
                    continue;
                }
                let d_cost = cell.costs[alt] - cell.costs[base];
                if d_cost.abs() < 1e-15 {
                    continue;
                }
                let beta = (b - total_cost) / d_cost;
                if (0.0..=1.0).contains(&beta) {
                    let value = total_value + beta * (cell.values[alt] - cell.values[base]);
                    if value > best {
                        best = value;
                    }
                }
            }
        }
        let mut pos = 0;
        loop {
            if pos == cells.len() {
                return best;
            }
            assign[pos] += 1;
            if assign[pos] < cells[pos].values.len() {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

/// A random small instance: payload rewards may be negative (feasibility
/// must filter them), consumptions sit in `1..=l`, arrival rows are random
/// with occasional mass on the null context.
pub fn random_small_env(
    rng: &mut ChaCha12Rng,
    max_h: usize,
    max_payload_ctx: usize,
    max_payload_act: usize,
    max_l: usize,
) -> EnvironmentModel {
    let h = rng.random_range(1..=max_h);
    let n_ctx = rng.random_range(1..=max_payload_ctx) + 1;
    let n_act = rng.random_range(1..=max_payload_act) + 1;
    let l = rng.random_range(1..=max_l);
    let r_max = 1.0;

    let mut rho = vec![vec![0.0; n_act]; n_ctx];
    let mut reward = vec![vec![0.0; n_act]; n_ctx];
    let mut consumption = vec![vec![0usize; n_act]; n_ctx];
    for c in 0..n_ctx {
        for a in 1..n_act {
            consumption[c][a] = rng.random_range(1..=l);
            if c > 0 {
                rho[c][a] = rng.random::<f64>();
                reward[c][a] = rng.random_range(-0.3..=r_max);
            }
        }
    }
    let mut lambda = Vec::with_capacity(h);
    for _ in 0..h {
        let mut row: Vec<f64> = (0..n_ctx)
            .map(|c| {
                if c == 0 && rng.random::<f64>() < 0.7 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let total: f64 = row.iter().sum();
        if total == 0.0 {
            row[n_ctx - 1] = 1.0;
        } else {
            for p in row.iter_mut() {
                *p /= total;
            }
        }
        lambda.push(row);
    }

    EnvironmentModel::from_file(EnvFile {
        h,
        l,
        r_max,
        contexts: (0..n_ctx).map(|c| vec![c as f64]).collect(),
        actions: (0..n_act).map(|a| a as f64).collect(),
        rho,
        reward,
        consumption,
        lambda,
        rho_step: None,
    })
    .expect("random env must validate")
}

/// Lowest acceptable success count for `n` trials that each succeed with
/// probability at least `p`, allowing three binomial standard deviations.
pub fn binomial_floor(p: f64, n: usize) -> usize {
    let n_f = n as f64;
    let sigma = (p * (1.0 - p) / n_f).sqrt();
    ((p - 3.0 * sigma) * n_f).floor().max(0.0) as usize
}
