//! Soft actor-critic with twin critics, target critics, automatic
//! temperature tuning and soft target updates.

use std::io::Write;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env::{Action, Context, DeploymentEnv, State, Transition};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::neural::{policy_sample, AdamState, MlpParams, PolicyOutput, SquashedSample, Trace};
use crate::scenario::Deployment;
use crate::{seeded_rng, Rng};

const INIT_STREAM: u64 = 0;
const ENV_STREAM: u64 = 1;
const AGENT_STREAM: u64 = 2;
const EVAL_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub discount: f64,
    pub tau: f64,
    /// Defaults to `−action_dim` when unset.
    pub target_entropy: Option<f64>,
    pub initial_temperature: f64,
    pub total_steps: usize,
    pub warmup_steps: usize,
    pub update_every: usize,
    pub gradient_steps: usize,
    /// 0 disables periodic evaluation.
    pub eval_every: usize,
    pub eval_episodes: usize,
    /// Filled from the experiment seed; never read from the config file.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 32],
            learning_rate: 1e-5,
            buffer_capacity: 1 << 21,
            batch_size: 1 << 9,
            discount: 0.98,
            tau: 0.005,
            target_entropy: None,
            initial_temperature: 1.0,
            total_steps: 20_000,
            warmup_steps: 1_000,
            update_every: 1,
            gradient_steps: 1,
            eval_every: 1_000,
            eval_episodes: 4,
            seed: 0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::validation(format!("solver.sac.{field}"), msg))
            }
        };
        check(!self.hidden.is_empty() && !self.hidden.contains(&0), "hidden", "need non-zero widths")?;
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", "must be positive")?;
        check(self.buffer_capacity >= 1, "buffer_capacity", "must be at least 1")?;
        check(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        check(self.batch_size <= self.buffer_capacity, "batch_size", "must not exceed buffer_capacity")?;
        check(self.discount > 0.0 && self.discount < 1.0, "discount", "must lie in (0, 1)")?;
        check(self.tau > 0.0 && self.tau <= 1.0, "tau", "must lie in (0, 1]")?;
        check(self.initial_temperature > 0.0, "initial_temperature", "must be positive")?;
        check(self.update_every >= 1, "update_every", "must be at least 1")?;
        check(self.eval_episodes >= 1, "eval_episodes", "must be at least 1")?;
        Ok(())
    }
}

/// FIFO ring buffer of transitions.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "replay buffer needs a positive capacity");
        Self { capacity, items: Vec::new(), next: 0 }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) -> Result<()> {
        if !t.reward.is_finite() {
            return Err(Error::validation("reward", "transitions must carry a finite reward"));
        }
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
        Ok(())
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(self.items[..split].iter())
    }

    /// Uniform sampling with replacement.
    pub fn sample<R: rand::Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Result<Vec<&Transition>> {
        if self.items.len() < batch_size || batch_size == 0 {
            return Err(Error::InsufficientData { have: self.items.len(), need: batch_size.max(1) });
        }
        Ok((0..batch_size).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect())
    }
}

/// All learnable parameters and optimizer moments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub actor: MlpParams,
    pub critics: [MlpParams; 2],
    pub target_critics: [MlpParams; 2],
    pub log_temperature: f64,
    pub target_entropy: f64,
    pub discount: f64,
    pub tau: f64,
    pub actor_opt: AdamState,
    pub critic_opts: [AdamState; 2],
    pub temperature_opt: AdamState,
}

fn standard_normals(n: usize, rng: &mut Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

impl AgentState {
    pub fn new(state_dim: usize, action_dim: usize, config: &SacConfig, rng: &mut Rng) -> Self {
        let actor_dims: Vec<usize> =
            std::iter::once(state_dim).chain(config.hidden.iter().copied()).chain([2 * action_dim]).collect();
        let critic_dims: Vec<usize> = std::iter::once(state_dim + action_dim)
            .chain(config.hidden.iter().copied())
            .chain([1])
            .collect();
        let actor = MlpParams::init(&actor_dims, rng);
        let critics = [MlpParams::init(&critic_dims, rng), MlpParams::init(&critic_dims, rng)];
        let lr = config.learning_rate;
        Self {
            actor_opt: AdamState::new(actor.num_params(), lr),
            critic_opts: [AdamState::new(critics[0].num_params(), lr), AdamState::new(critics[1].num_params(), lr)],
            temperature_opt: AdamState::new(1, lr),
            target_critics: critics.clone(),
            critics,
            actor,
            log_temperature: config.initial_temperature.ln(),
            target_entropy: config.target_entropy.unwrap_or(-(action_dim as f64)),
            discount: config.discount,
            tau: config.tau,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_temperature.exp()
    }

    pub fn action_dim(&self) -> usize {
        self.actor.output_dim() / 2
    }

    pub fn policy(&self, state: &[f64]) -> Result<PolicyOutput> {
        Ok(PolicyOutput::from_raw(&self.actor.forward(state)?))
    }

    /// Deterministic evaluation action `tanh(mean)`.
    pub fn greedy_action(&self, state: &State) -> Result<Action> {
        Ok(Action(self.policy(&state.0)?.greedy_action()))
    }

    pub fn sample_action(&self, state: &State, rng: &mut Rng) -> Result<(Action, f64)> {
        let out = self.policy(&state.0)?;
        let s = policy_sample(&out, &standard_normals(self.action_dim(), rng))?;
        Ok((Action(s.action), s.log_prob))
    }

    pub fn q_value(&self, critic: usize, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.critics[critic].forward(&concat(state, action))?[0])
    }

    fn target_q(&self, critic: usize, state: &[f64], action: &[f64]) -> Result<f64> {
        Ok(self.target_critics[critic].forward(&concat(state, action))?[0])
    }

    /// Bootstrap targets `r + γ(1 − done)[min_j Q̄_j(s', a') − ω log π(a'|s')]`
    /// with `a'` drawn from the current policy using `noises[i]`. Terminal
    /// transitions get `y = r` without touching any network.
    pub fn critic_targets(&self, batch: &[&Transition], noises: &[Vec<f64>]) -> Result<Vec<f64>> {
        let omega = self.temperature();
        batch
            .iter()
            .zip(noises)
            .map(|(t, noise)| {
                if t.done {
                    return Ok(t.reward);
                }
                let out = self.policy(&t.next_state.0)?;
                let next = policy_sample(&out, noise)?;
                let q1 = self.target_q(0, &t.next_state.0, &next.action)?;
                let q2 = self.target_q(1, &t.next_state.0, &next.action)?;
                Ok(t.reward + self.discount * (q1.min(q2) - omega * next.log_prob))
            })
            .collect()
    }

    /// Mean `½(Q(s, a) − y)²` of one critic and its parameter gradient.
    pub fn critic_loss_and_grad(&self, critic: usize, batch: &[&Transition], targets: &[f64]) -> Result<(f64, Vec<f64>)> {
        let net = &self.critics[critic];
        let n = batch.len() as f64;
        let mut grads = vec![0.0; net.num_params()];
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(targets) {
            let trace = net.forward_trace(&concat(&t.state.0, &t.action.0))?;
            let err = trace.output()[0] - y;
            loss += 0.5 * err * err / n;
            net.backward(&trace, &[err / n], &mut grads)?;
        }
        Ok((loss, grads))
    }

    /// One optimizer step on both critics; returns their losses.
    pub fn critic_update(&mut self, batch: &[&Transition], rng: &mut Rng) -> Result<[f64; 2]> {
        let noises: Vec<Vec<f64>> = batch.iter().map(|_| standard_normals(self.action_dim(), rng)).collect();
        let targets = self.critic_targets(batch, &noises)?;
        let mut losses = [0.0; 2];
        for (j, slot) in losses.iter_mut().enumerate() {
            let (loss, grads) = self.critic_loss_and_grad(j, batch, &targets)?;
            self.critic_opts[j].step(self.critics[j].as_mut_slice(), &grads)?;
            *slot = loss;
        }
        Ok(losses)
    }

    /// Actor loss `mean[ω log π(a|s) − min_j Q_j(s, a)]` with reparameterized
    /// actions, its gradient with respect to the actor parameters, and the
    /// log-probabilities of the sampled actions.
    pub fn actor_loss_and_grad(&self, states: &[&[f64]], noises: &[Vec<f64>]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let omega = self.temperature();
        let n = states.len() as f64;
        let d = self.action_dim();
        let mut grads = vec![0.0; self.actor.num_params()];
        let mut loss = 0.0;
        let mut log_probs = Vec::with_capacity(states.len());
        for (s, noise) in states.iter().zip(noises) {
            let trace = self.actor.forward_trace(s)?;
            let out = PolicyOutput::from_raw(trace.output());
            let sample = policy_sample(&out, noise)?;
            let (q, dq_da) = self.min_q_with_action_grad(s, &sample.action)?;
            loss += (omega * sample.log_prob - q) / n;
            log_probs.push(sample.log_prob);

            let upstream = self.actor_upstream(&out, &sample, &dq_da, omega, n, d);
            self.actor.backward(&trace, &upstream, &mut grads)?;
        }
        Ok((loss, grads, log_probs))
    }

    fn actor_upstream(
        &self,
        out: &PolicyOutput,
        sample: &SquashedSample,
        dq_da: &[f64],
        omega: f64,
        n: f64,
        d: usize,
    ) -> Vec<f64> {
        let (dlp_dmean, dlp_dlogstd) = sample.log_prob_grads(out);
        let mut upstream = vec![0.0; 2 * d];
        for k in 0..d {
            let a = sample.action[k];
            // ∂Q/∂u through the tanh squash
            let dq_du = dq_da[k] * (1.0 - a * a);
            let std = out.log_std[k].exp();
            upstream[k] = (omega * dlp_dmean[k] - dq_du) / n;
            if !out.clamped[k] {
                upstream[d + k] = (omega * dlp_dlogstd[k] - dq_du * std * sample.noise[k]) / n;
            }
        }
        upstream
    }

    /// `min_j Q_j(s, a)` and its gradient with respect to `a`, taken through
    /// whichever critic attains the minimum (critic 0 on ties).
    fn min_q_with_action_grad(&self, state: &[f64], action: &[f64]) -> Result<(f64, Vec<f64>)> {
        let input = concat(state, action);
        let traces: [Trace; 2] = [self.critics[0].forward_trace(&input)?, self.critics[1].forward_trace(&input)?];
        let j = if traces[1].output()[0] < traces[0].output()[0] { 1 } else { 0 };
        let input_grad = self.critics[j].backward_input(&traces[j], &[1.0])?;
        Ok((traces[j].output()[0], input_grad[state.len()..].to_vec()))
    }

    /// One optimizer step on the actor; returns the loss and the batch
    /// log-probabilities (reused by the temperature step).
    pub fn actor_update(&mut self, batch: &[&Transition], rng: &mut Rng) -> Result<(f64, Vec<f64>)> {
        let states: Vec<&[f64]> = batch.iter().map(|t| t.state.0.as_slice()).collect();
        let noises: Vec<Vec<f64>> = states.iter().map(|_| standard_normals(self.action_dim(), rng)).collect();
        let (loss, grads, log_probs) = self.actor_loss_and_grad(&states, &noises)?;
        self.actor_opt.step(self.actor.as_mut_slice(), &grads)?;
        Ok((loss, log_probs))
    }

    /// Temperature loss `mean[−ω log π − ω H̄]` and its derivative with
    /// respect to `log ω`.
    pub fn temperature_loss_and_grad(&self, log_probs: &[f64]) -> (f64, f64) {
        let omega = self.temperature();
        let mean_gap =
            log_probs.iter().map(|lp| lp + self.target_entropy).sum::<f64>() / log_probs.len() as f64;
        (-omega * mean_gap, -omega * mean_gap)
    }

    pub fn temperature_step(&mut self, log_probs: &[f64]) -> Result<f64> {
        let (loss, grad) = self.temperature_loss_and_grad(log_probs);
        let mut param = [self.log_temperature];
        self.temperature_opt.step(&mut param, &[grad])?;
        self.log_temperature = param[0];
        Ok(loss)
    }

    /// Samples fresh actions for the batch states and takes one temperature
    /// step.
    pub fn temperature_update(&mut self, batch: &[&Transition], rng: &mut Rng) -> Result<f64> {
        let log_probs = batch
            .iter()
            .map(|t| self.sample_action(&t.state, rng).map(|(_, lp)| lp))
            .collect::<Result<Vec<_>>>()?;
        self.temperature_step(&log_probs)
    }

    /// `φ̄ ← τφ + (1 − τ)φ̄` for both target critics.
    pub fn soft_update(&mut self) {
        for (target, online) in self.target_critics.iter_mut().zip(&self.critics) {
            target.soft_update_from(online, self.tau);
        }
    }

    /// Critic, actor and temperature steps followed by the soft update.
    pub fn update(&mut self, batch: &[&Transition], rng: &mut Rng) -> Result<UpdateStats> {
        let critic_losses = self.critic_update(batch, rng)?;
        let (actor_loss, log_probs) = self.actor_update(batch, rng)?;
        let temperature_loss = self.temperature_step(&log_probs)?;
        self.soft_update();
        Ok(UpdateStats {
            critic_loss: 0.5 * (critic_losses[0] + critic_losses[1]),
            actor_loss,
            temperature_loss,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub temperature_loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub eval_reward: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub omega: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub agent: AgentState,
    pub curve: Vec<CurvePoint>,
    /// Greedy deployment and report on the first evaluation context.
    pub greedy_deployment: Deployment,
    pub greedy_report: MetricReport,
    pub eval_ues: Vec<crate::scenario::Point2D>,
    /// Mean reporting objective of the greedy policy over the evaluation
    /// contexts after training.
    pub final_eval: f64,
}

fn eval_contexts(env: &DeploymentEnv, config: &SacConfig) -> Vec<Context> {
    let mut rng = seeded_rng(config.seed, EVAL_STREAM);
    (0..config.eval_episodes).map(|_| env.sample_context(&mut rng)).collect()
}

/// Mean reporting objective (with `1/Q` scaling) of the greedy policy.
pub fn evaluate_greedy(agent: &AgentState, env: &DeploymentEnv, contexts: &[Context]) -> Result<f64> {
    let mut total = 0.0;
    for ctx in contexts {
        let action = agent.greedy_action(&env.encode_state(ctx))?;
        total += env.report(ctx, &env.decode(&action)).objective_value;
    }
    Ok(total / contexts.len() as f64)
}

pub fn train(env: &mut DeploymentEnv, config: &SacConfig) -> Result<TrainOutput> {
    train_with_trace(env, config, None)
}

/// Trains an agent, optionally streaming one CSV row per environment step
/// (`episode,reward,<AP coordinates>`) to `trace`.
pub fn train_with_trace(
    env: &mut DeploymentEnv,
    config: &SacConfig,
    mut trace: Option<&mut dyn Write>,
) -> Result<TrainOutput> {
    config.validate()?;
    let mut init_rng = seeded_rng(config.seed, INIT_STREAM);
    let mut env_rng = seeded_rng(config.seed, ENV_STREAM);
    let mut rng = seeded_rng(config.seed, AGENT_STREAM);
    let action_dim = env.action_dim();
    let mut agent = AgentState::new(env.state_dim(), action_dim, config, &mut init_rng);
    let mut buffer = ReplayBuffer::new(config.buffer_capacity);
    let contexts = eval_contexts(env, config);
    let mut curve = Vec::new();
    let mut stats = UpdateStats::default();

    if let Some(w) = trace.as_deref_mut() {
        let coords: Vec<String> = (0..env.config().scenario.num_tx)
            .flat_map(|m| [format!("tx{m}_x"), format!("tx{m}_y")])
            .chain((0..env.config().scenario.num_rx).flat_map(|n| [format!("rx{n}_x"), format!("rx{n}_y")]))
            .collect();
        writeln!(w, "episode,reward,{}", coords.join(","))?;
    }

    let mut state = env.reset(&mut env_rng);
    for step in 0..config.total_steps {
        let action = if step < config.warmup_steps {
            Action((0..action_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        } else {
            agent.sample_action(&state, &mut rng)?.0
        };
        let outcome = env.step(&state, &action, &mut env_rng)?;
        if let Some(w) = trace.as_deref_mut() {
            let coords: Vec<String> = outcome.deployment.to_flat().iter().map(|v| v.to_string()).collect();
            writeln!(w, "{step},{},{}", outcome.reward, coords.join(","))?;
        }
        buffer.push(Transition {
            state: std::mem::replace(&mut state, outcome.next_state.clone()),
            action,
            reward: outcome.reward,
            next_state: outcome.next_state,
            done: outcome.done,
        })?;

        let ready = step + 1 > config.warmup_steps && buffer.len() >= config.batch_size;
        if ready && (step + 1) % config.update_every == 0 {
            for _ in 0..config.gradient_steps {
                let batch = buffer.sample(config.batch_size, &mut rng)?;
                stats = agent.update(&batch, &mut rng)?;
            }
        }

        if config.eval_every > 0 && (step + 1) % config.eval_every == 0 {
            curve.push(CurvePoint {
                step: step + 1,
                eval_reward: evaluate_greedy(&agent, env, &contexts)?,
                actor_loss: stats.actor_loss,
                critic_loss: stats.critic_loss,
                omega: agent.temperature(),
            });
        }
    }

    let final_eval = evaluate_greedy(&agent, env, &contexts)?;
    let first = &contexts[0];
    let greedy_deployment = env.decode(&agent.greedy_action(&env.encode_state(first))?);
    let greedy_report = env.report(first, &greedy_deployment);
    Ok(TrainOutput {
        agent,
        curve,
        greedy_report,
        greedy_deployment,
        eval_ues: first.ues.clone(),
        final_eval,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn transition(reward: f64, done: bool, state_dim: usize, action_dim: usize, fill: f64) -> Transition {
        Transition {
            state: State(vec![fill; state_dim]),
            action: Action(vec![0.1 * fill; action_dim]),
            reward,
            next_state: State(vec![-fill; state_dim]),
            done,
        }
    }

    fn small_agent(seed: u64) -> AgentState {
        let cfg = SacConfig { hidden: vec![8, 8], learning_rate: 1e-3, ..SacConfig::default() };
        AgentState::new(3, 2, &cfg, &mut seeded_rng(seed, 0))
    }

    #[test]
    fn buffer_fifo_eviction() {
        let mut buf = ReplayBuffer::new(4);
        for i in 0..5 {
            buf.push(transition(i as f64, true, 2, 2, 0.0)).unwrap();
        }
        assert_eq!(buf.len(), 4);
        let rewards: Vec<f64> = buf.iter().map(|t| t.reward).collect();
        assert_eq!(rewards, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn buffer_push_one() {
        let mut buf = ReplayBuffer::new(8);
        assert!(buf.is_empty());
        buf.push(transition(1.0, true, 2, 2, 0.0)).unwrap();
        assert_eq!(buf.len(), 1);
    }

    #[test]
    fn buffer_rejects_non_finite_reward() {
        let mut buf = ReplayBuffer::new(8);
        assert!(buf.push(transition(f64::NAN, true, 2, 2, 0.0)).is_err());
    }

    #[test]
    fn default_sizes() {
        let cfg = SacConfig::default();
        assert_eq!(cfg.buffer_capacity, 2_097_152);
        assert_eq!(cfg.batch_size, 512);
        assert_eq!(cfg.hidden, vec![64, 32]);
        assert_eq!(cfg.learning_rate, 1e-5);
        assert_eq!(cfg.discount, 0.98);
        assert_eq!(cfg.tau, 0.005);
        assert_eq!(ReplayBuffer::new(cfg.buffer_capacity).capacity(), 1 << 21);
    }

    #[test]
    fn sampling_needs_enough_data() {
        let mut buf = ReplayBuffer::new(4096);
        buf.push(transition(1.0, true, 2, 2, 0.0)).unwrap();
        let mut rng = seeded_rng(0, 0);
        assert!(matches!(buf.sample(3, &mut rng), Err(Error::InsufficientData { have: 1, need: 3 })));
        for _ in 0..99 {
            buf.push(transition(1.0, true, 2, 2, 0.0)).unwrap();
        }
        assert!(buf.sample(512, &mut rng).is_err());
    }

    #[test]
    fn sampling_is_seeded() {
        let mut buf = ReplayBuffer::new(64);
        for i in 0..50 {
            buf.push(transition(i as f64, true, 2, 2, 0.0)).unwrap();
        }
        let pick = |seed| -> Vec<f64> {
            buf.sample(16, &mut seeded_rng(seed, 5)).unwrap().iter().map(|t| t.reward).collect()
        };
        assert_eq!(pick(3), pick(3));
        assert_ne!(pick(3), pick(4));
    }

    #[test]
    fn terminal_targets_equal_reward() {
        let agent = small_agent(1);
        let batch = [transition(2.5, true, 3, 2, 0.4), transition(-1.0, true, 3, 2, -0.2)];
        let refs: Vec<&Transition> = batch.iter().collect();
        let y = agent.critic_targets(&refs, &[vec![0.3, -0.1], vec![1.0, 2.0]]).unwrap();
        assert_eq!(y, vec![2.5, -1.0]);
    }

    #[test]
    fn terminal_targets_ignore_target_networks_and_discount() {
        let mut agent = small_agent(2);
        let batch = [transition(0.7, true, 3, 2, 0.4)];
        let refs: Vec<&Transition> = batch.iter().collect();
        let noises = vec![vec![0.5, 0.5]];
        let before = agent.critic_targets(&refs, &noises).unwrap();
        for p in agent.target_critics[0].as_mut_slice() {
            *p += 3.0;
        }
        agent.discount = 0.5;
        assert_eq!(agent.critic_targets(&refs, &noises).unwrap(), before);
    }

    #[test]
    fn bootstrap_target_arithmetic() {
        // Oracle: recompute y by hand from the individual network outputs.
        let mut agent = small_agent(3);
        agent.log_temperature = 0.3f64.ln();
        let t = transition(1.25, false, 3, 2, 0.6);
        let noise = vec![0.2, -0.4];
        let out = agent.policy(&t.next_state.0).unwrap();
        let next = policy_sample(&out, &noise).unwrap();
        let q1 = agent.target_q(0, &t.next_state.0, &next.action).unwrap();
        let q2 = agent.target_q(1, &t.next_state.0, &next.action).unwrap();
        let expected = 1.25 + 0.98 * (q1.min(q2) - 0.3 * next.log_prob);
        let y = agent.critic_targets(&[&t], &[noise]).unwrap()[0];
        assert!((y - expected).abs() < 1e-12);
    }

    #[test]
    fn twin_minimum_is_used() {
        // Critics with constant outputs 2.0 and -1.0: the actor sees -1.
        let mut agent = small_agent(4);
        for (j, value) in [(0, 2.0), (1, -1.0)] {
            let net = &mut agent.critics[j];
            net.as_mut_slice().fill(0.0);
            let last = net.num_layers() - 1;
            let (_, b) = net.layer_range(last);
            net.as_mut_slice()[b][0] = value;
        }
        agent.log_temperature = -700.0;
        let states: Vec<&[f64]> = vec![&[0.1, 0.2, 0.3]];
        let (loss, grads, _) = agent.actor_loss_and_grad(&states, &[vec![0.0, 0.0]]).unwrap();
        assert!((loss - 1.0).abs() < 1e-12, "{loss}");
        // Q constant in a and ω ≈ 0: no gradient reaches the actor.
        assert!(grads.iter().all(|g| g.abs() < 1e-200));

        let (q, _) = agent.min_q_with_action_grad(&[0.0; 3], &[0.0; 2]).unwrap();
        assert_eq!(q, -1.0);
        // Bootstrap uses the target twins the same way.
        agent.target_critics = agent.critics.clone();
        agent.log_temperature = -700.0;
        let t = transition(0.0, false, 3, 2, 0.1);
        let y = agent.critic_targets(&[&t], &[vec![0.0, 0.0]]).unwrap()[0];
        assert!((y + 0.98).abs() < 1e-12);
    }

    #[test]
    fn perfect_critic_has_zero_loss() {
        let agent = small_agent(5);
        let t = transition(0.0, true, 3, 2, 0.3);
        let q = agent.q_value(0, &t.state.0, &t.action.0).unwrap();
        let (loss, grads) = agent.critic_loss_and_grad(0, &[&t], &[q]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|g| *g == 0.0));
        let mut a2 = agent.clone();
        a2.critic_opts[0].step(a2.critics[0].as_mut_slice(), &grads).unwrap();
        assert_eq!(a2.critics[0], agent.critics[0]);
    }

    #[test]
    fn larger_temperature_raises_loss_when_log_prob_positive() {
        // A near-deterministic policy has large positive log π.
        let mut agent = small_agent(6);
        let last = agent.actor.num_layers() - 1;
        let (_, b) = agent.actor.layer_range(last);
        let b = b.start;
        agent.actor.as_mut_slice()[b + 2] = -15.0;
        agent.actor.as_mut_slice()[b + 3] = -15.0;
        let states: Vec<&[f64]> = vec![&[0.0, 0.0, 0.0], &[0.5, -0.5, 0.1]];
        let noises = vec![vec![0.1, 0.2], vec![-0.3, 0.0]];
        agent.log_temperature = 0.1f64.ln();
        let (l1, _, lps) = agent.actor_loss_and_grad(&states, &noises).unwrap();
        assert!(lps.iter().all(|lp| *lp > 0.0));
        agent.log_temperature = 0.2f64.ln();
        let (l2, _, _) = agent.actor_loss_and_grad(&states, &noises).unwrap();
        assert!(l2 > l1);
    }

    #[test]
    fn temperature_stationary_at_target_entropy() {
        let agent = small_agent(7);
        let h = agent.target_entropy;
        assert_eq!(h, -2.0);
        // E[−log π] = H̄  ⇔  mean(log π) = −H̄
        let (_, grad) = agent.temperature_loss_and_grad(&[-h - 0.5, -h + 0.5]);
        assert_eq!(grad, 0.0);
    }

    #[test]
    fn temperature_rises_when_entropy_low() {
        let mut agent = small_agent(8);
        let h = agent.target_entropy;
        // Entropy below target: mean log π above −H̄.
        let lps = [-h + 3.0, -h + 1.0];
        let (_, grad) = agent.temperature_loss_and_grad(&lps);
        assert!(grad < 0.0);
        let before = agent.log_temperature;
        agent.temperature_step(&lps).unwrap();
        assert!(agent.log_temperature > before);
        let (_, grad) = agent.temperature_loss_and_grad(&[-h - 2.0]);
        assert!(grad > 0.0);
    }

    #[test]
    fn target_entropy_is_minus_action_dim() {
        let agent = AgentState::new(4, 8, &SacConfig::default(), &mut seeded_rng(0, 0));
        assert_eq!(agent.target_entropy, -8.0);
    }

    #[test]
    fn soft_update_limits() {
        let mut agent = small_agent(9);
        for p in agent.critics[0].as_mut_slice() {
            *p += 1.0;
        }
        let old = agent.target_critics.clone();
        agent.tau = 0.0;
        agent.soft_update();
        assert_eq!(agent.target_critics, old);
        agent.tau = 1.0;
        agent.soft_update();
        assert_eq!(agent.target_critics, agent.critics);
    }

    #[test]
    fn soft_update_is_exact() {
        let mut agent = small_agent(10);
        for p in agent.critics[1].as_mut_slice() {
            *p *= 1.7;
        }
        let old = agent.target_critics.clone();
        agent.tau = 0.005;
        agent.soft_update();
        for ((target, before), online) in agent.target_critics.iter().zip(&old).zip(&agent.critics) {
            for ((t, o), c) in target
                .as_slice()
                .iter()
                .zip(before.as_slice())
                .zip(online.as_slice())
            {
                assert_eq!(*t, 0.005 * c + (1.0 - 0.005) * o);
            }
        }
    }

    #[test]
    fn temperature_stays_positive() {
        let mut agent = small_agent(11);
        for _ in 0..500 {
            agent.temperature_step(&[-100.0]).unwrap();
        }
        assert!(agent.temperature() > 0.0);
    }
}
