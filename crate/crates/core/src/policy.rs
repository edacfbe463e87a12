//! Non-interactive generative policy: a conditional variational autoencoder
//! over horizon-H control sequences given an ego observation. The
//! observation deliberately excludes every other agent.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::PolicyConfig;
use crate::dataset::TrainingWindow;
use crate::dynamics::{rollout, AgentState, Control, ControlBounds, Trajectory};
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rng::{derive_seed, rng_from_seed, salt};
use crate::scalar::Scalar;
use crate::tensor::{NodeId, Tape, Tensor};

use rand::Rng;
use rand_distr::StandardNormal;

/// What one agent can see of its own task: the goal in the ego frame and
/// its preferred speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoObservation<S> {
    pub goal_x: S,
    pub goal_y: S,
    pub v_pref: S,
}

impl<S: Scalar> EgoObservation<S> {
    pub fn as_array(&self) -> [S; 3] {
        [self.goal_x, self.goal_y, self.v_pref]
    }
}

/// Goal vector rotated into the agent's frame; translation-invariant.
pub fn make_observation<S: Scalar>(
    joint_states: &[AgentState<S>],
    agent: usize,
    goal: (S, S),
    v_pref: S,
) -> EgoObservation<S> {
    let s = &joint_states[agent];
    let dx = goal.0 - s.x;
    let dy = goal.1 - s.y;
    let (sin_t, cos_t) = (s.heading.sin(), s.heading.cos());
    EgoObservation { goal_x: cos_t * dx + sin_t * dy, goal_y: -sin_t * dx + cos_t * dy, v_pref }
}

const OBS_DIM: usize = 3;
const CONTROL_DIM: usize = 2;
const CHECKPOINT_SCHEMA: &str = "invgames.policy";
const CHECKPOINT_VERSION: u32 = 1;

/// CVAE weights plus the architecture constants they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativePolicy<S> {
    pub horizon: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub sigma_rec: S,
    pub logvar_min: S,
    pub logvar_max: S,
    pub enc_w1: Tensor<S>,
    pub enc_b1: Tensor<S>,
    pub enc_w_mean: Tensor<S>,
    pub enc_b_mean: Tensor<S>,
    pub enc_w_logvar: Tensor<S>,
    pub enc_b_logvar: Tensor<S>,
    pub dec_w_obs: Tensor<S>,
    pub dec_w_z: Tensor<S>,
    pub dec_b1: Tensor<S>,
    pub dec_w2: Tensor<S>,
    pub dec_b2: Tensor<S>,
}

fn gaussian_tensor<S: Scalar>(shape: Vec<usize>, std: f64, rng: &mut impl Rng) -> Tensor<S> {
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            S::c(g * std)
        })
        .collect();
    Tensor::from_vec(shape, data).expect("finite init")
}

impl<S: Scalar> GenerativePolicy<S> {
    /// Random initialization; deterministic in the seed.
    pub fn init(cfg: &PolicyConfig, seed: u64) -> Self {
        let mut rng = rng_from_seed(derive_seed(seed, &[salt("policy-init")]));
        let (h, l, hid) = (cfg.horizon, cfg.latent_dim, cfg.hidden_dim);
        let enc_in = OBS_DIM + CONTROL_DIM * h;
        let scale = |fan_in: usize| 1.0 / (fan_in as f64).sqrt();
        GenerativePolicy {
            horizon: h,
            latent_dim: l,
            hidden_dim: hid,
            sigma_rec: S::c(cfg.sigma_rec),
            logvar_min: S::c(cfg.logvar_min),
            logvar_max: S::c(cfg.logvar_max),
            enc_w1: gaussian_tensor(vec![enc_in, hid], scale(enc_in), &mut rng),
            enc_b1: Tensor::zeros(vec![hid]),
            enc_w_mean: gaussian_tensor(vec![hid, l], 0.01, &mut rng),
            enc_b_mean: Tensor::zeros(vec![l]),
            enc_w_logvar: gaussian_tensor(vec![hid, l], 0.01, &mut rng),
            enc_b_logvar: Tensor::zeros(vec![l]),
            dec_w_obs: gaussian_tensor(vec![OBS_DIM, hid], scale(OBS_DIM), &mut rng),
            dec_w_z: gaussian_tensor(vec![l, hid], scale(l), &mut rng),
            dec_b1: Tensor::zeros(vec![hid]),
            dec_w2: gaussian_tensor(vec![hid, CONTROL_DIM * h], 0.01, &mut rng),
            dec_b2: Tensor::zeros(vec![CONTROL_DIM * h]),
        }
    }

    pub(crate) fn params(&self) -> Vec<Tensor<S>> {
        vec![
            self.enc_w1.clone(),
            self.enc_b1.clone(),
            self.enc_w_mean.clone(),
            self.enc_b_mean.clone(),
            self.enc_w_logvar.clone(),
            self.enc_b_logvar.clone(),
            self.dec_w_obs.clone(),
            self.dec_w_z.clone(),
            self.dec_b1.clone(),
            self.dec_w2.clone(),
            self.dec_b2.clone(),
        ]
    }

    pub(crate) fn set_params(&mut self, params: Vec<Tensor<S>>) {
        let mut it = params.into_iter();
        self.enc_w1 = it.next().unwrap();
        self.enc_b1 = it.next().unwrap();
        self.enc_w_mean = it.next().unwrap();
        self.enc_b_mean = it.next().unwrap();
        self.enc_w_logvar = it.next().unwrap();
        self.enc_b_logvar = it.next().unwrap();
        self.dec_w_obs = it.next().unwrap();
        self.dec_w_z = it.next().unwrap();
        self.dec_b1 = it.next().unwrap();
        self.dec_w2 = it.next().unwrap();
        self.dec_b2 = it.next().unwrap();
    }

    /// Decoder forward in value mode: one observation, one latent draw.
    pub fn decode(&self, obs: &EgoObservation<S>, z: &[S]) -> Result<Vec<Control<S>>> {
        let obs_row = Tensor::from_vec(vec![1, OBS_DIM], obs.as_array().to_vec())?;
        let z_row = Tensor::from_vec(vec![1, self.latent_dim], z.to_vec())?;
        let h = obs_row
            .matmul(&self.dec_w_obs)?
            .add(&z_row.matmul(&self.dec_w_z)?)?
            .add(&self.dec_b1)?
            .tanh()?;
        let flat = h.matmul(&self.dec_w2)?.add(&self.dec_b2)?;
        Ok(flat
            .data()
            .chunks(CONTROL_DIM)
            .map(|c| Control::new(c[0], c[1]))
            .collect())
    }
}

/// Node ids of the policy parameters on a tape, in `params()` order.
pub struct PolicyLeaves {
    pub ids: Vec<NodeId>,
}

/// Build the mean-ELBO graph for a batch. `obs` is `[B,3]`, `targets` is
/// `[B,2H]` (flattened control sequences), `eps` is `[B,L]`; the latter
/// carries the reparameterization draws so the objective is a fixed
/// deterministic function of the weights.
pub fn elbo_graph<S: Scalar>(
    tape: &mut Tape<S>,
    policy: &GenerativePolicy<S>,
    obs: &Tensor<S>,
    targets: &Tensor<S>,
    eps: &Tensor<S>,
) -> Result<(NodeId, PolicyLeaves)> {
    let batch = obs.shape()[0];
    if targets.shape() != [batch, CONTROL_DIM * policy.horizon]
        || eps.shape() != [batch, policy.latent_dim]
    {
        return Err(Error::ShapeMismatch {
            op: "elbo_graph",
            detail: format!(
                "obs {:?}, targets {:?}, eps {:?}",
                obs.shape(),
                targets.shape(),
                eps.shape()
            ),
        });
    }
    let leaves: Vec<NodeId> = policy.params().into_iter().map(|p| tape.leaf(p)).collect();
    let [enc_w1, enc_b1, enc_w_mean, enc_b_mean, enc_w_logvar, enc_b_logvar, dec_w_obs, dec_w_z, dec_b1, dec_w2, dec_b2] =
        leaves[..] else { unreachable!() };

    // encoder input is entirely constant: obs and demonstrated controls
    let mut enc_rows = Vec::with_capacity(batch * (OBS_DIM + CONTROL_DIM * policy.horizon));
    for b in 0..batch {
        enc_rows.extend_from_slice(&obs.data()[b * OBS_DIM..(b + 1) * OBS_DIM]);
        let w = CONTROL_DIM * policy.horizon;
        enc_rows.extend_from_slice(&targets.data()[b * w..(b + 1) * w]);
    }
    let enc_in = tape.leaf(Tensor::from_vec(
        vec![batch, OBS_DIM + CONTROL_DIM * policy.horizon],
        enc_rows,
    )?);
    let obs_const = tape.leaf(obs.clone());
    let target_const = tape.leaf(targets.clone());
    let eps_const = tape.leaf(eps.clone());

    let h1 = tape.matmul(enc_in, enc_w1)?;
    let h1 = tape.add(h1, enc_b1)?;
    let h1 = tape.tanh(h1)?;
    let mean = tape.matmul(h1, enc_w_mean)?;
    let mean = tape.add(mean, enc_b_mean)?;
    let logvar = tape.matmul(h1, enc_w_logvar)?;
    let logvar = tape.add(logvar, enc_b_logvar)?;
    let logvar = tape.clamp(logvar, policy.logvar_min, policy.logvar_max)?;

    let half_logvar = tape.scale(logvar, S::c(0.5))?;
    let sigma = tape.exp(half_logvar)?;
    let noise = tape.mul(eps_const, sigma)?;
    let z = tape.add(mean, noise)?;

    let hd = tape.matmul(obs_const, dec_w_obs)?;
    let hz = tape.matmul(z, dec_w_z)?;
    let hd = tape.add(hd, hz)?;
    let hd = tape.add(hd, dec_b1)?;
    let hd = tape.tanh(hd)?;
    let recon = tape.matmul(hd, dec_w2)?;
    let recon = tape.add(recon, dec_b2)?;

    // Gaussian reconstruction with fixed observation noise sigma_rec
    let diff = tape.sub(recon, target_const)?;
    let sq = tape.square(diff)?;
    let sse = tape.sum(sq)?;
    let two = S::c(2.0);
    let inv_two_var = S::one() / (two * policy.sigma_rec * policy.sigma_rec);
    let recon_nll = tape.scale(sse, inv_two_var)?;
    let log_norm = S::from_usize(batch * policy.horizon).expect("small")
        * (two * S::PI() * policy.sigma_rec * policy.sigma_rec).ln();
    let recon_nll = tape.add_const(recon_nll, log_norm)?;

    // KL(q(z|obs,a) || N(0,I)) summed over the batch
    let sum_logvar = tape.sum(logvar)?;
    let mean_sq = tape.square(mean)?;
    let sum_mean_sq = tape.sum(mean_sq)?;
    let exp_logvar = tape.exp(logvar)?;
    let sum_exp_logvar = tape.sum(exp_logvar)?;
    let inner = tape.sub(sum_logvar, sum_mean_sq)?;
    let inner = tape.sub(inner, sum_exp_logvar)?;
    let count = S::from_usize(batch * policy.latent_dim).expect("small");
    let inner = tape.add_const(inner, count)?;
    let kl = tape.scale(inner, S::c(-0.5))?;

    let neg_elbo_total = tape.add(recon_nll, kl)?;
    let inv_batch = S::one() / S::from_usize(batch).expect("small");
    let elbo_mean = tape.scale(neg_elbo_total, -inv_batch)?;
    Ok((elbo_mean, PolicyLeaves { ids: leaves }))
}

/// Evidence lower bound of one (observation, control sequence) pair with an
/// explicit reparameterization draw.
pub fn elbo<S: Scalar>(
    policy: &GenerativePolicy<S>,
    obs: &EgoObservation<S>,
    controls: &[Control<S>],
    eps: &[S],
) -> Result<S> {
    let obs_t = Tensor::from_vec(vec![1, OBS_DIM], obs.as_array().to_vec())?;
    let target = Tensor::from_vec(vec![1, CONTROL_DIM * policy.horizon], flatten_controls(controls))?;
    let eps_t = Tensor::from_vec(vec![1, policy.latent_dim], eps.to_vec())?;
    let mut tape = Tape::new();
    let (out, _) = elbo_graph(&mut tape, policy, &obs_t, &target, &eps_t)?;
    tape.value(out).item()
}

pub fn flatten_controls<S: Scalar>(controls: &[Control<S>]) -> Vec<S> {
    let mut out = Vec::with_capacity(controls.len() * CONTROL_DIM);
    for u in controls {
        out.push(u.v);
        out.push(u.omega);
    }
    out
}

/// Per-epoch mean ELBO over the training stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyTrainReport<S> {
    pub epoch_elbo: Vec<S>,
    pub diverged: bool,
}

/// Maximum-likelihood training of the non-interactive policy by Adam ascent
/// on the ELBO surrogate. Deterministic in the seed.
pub fn train_policy<S: Scalar>(
    windows: &[TrainingWindow<S>],
    cfg: &PolicyConfig,
    seed: u64,
) -> Result<(GenerativePolicy<S>, PolicyTrainReport<S>)> {
    if windows.is_empty() {
        return Err(Error::InvalidArgument { arg: "windows", detail: "no training windows".into() });
    }
    for w in windows {
        if w.controls.len() != cfg.horizon {
            return Err(Error::InvalidArgument {
                arg: "windows",
                detail: format!(
                    "window horizon {} does not match policy horizon {}",
                    w.controls.len(),
                    cfg.horizon
                ),
            });
        }
    }
    let mut policy = GenerativePolicy::<S>::init(cfg, seed);
    let mut params = policy.params();
    let mut opt = Adam::new(S::c(cfg.learning_rate), &params);
    let mut report = PolicyTrainReport { epoch_elbo: Vec::new(), diverged: false };
    let mut checkpoint = policy.clone();

    let mut order: Vec<usize> = (0..windows.len()).collect();
    'training: for epoch in 0..cfg.epochs {
        let mut rng = rng_from_seed(derive_seed(seed, &[salt("policy-epoch"), epoch as u64]));
        // deterministic Fisher-Yates shuffle
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_elbo = S::zero();
        let mut steps = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch = chunk.len();
            let mut obs_rows = Vec::with_capacity(batch * OBS_DIM);
            let mut tgt_rows = Vec::with_capacity(batch * CONTROL_DIM * cfg.horizon);
            for &i in chunk {
                obs_rows.extend_from_slice(&windows[i].observation.as_array());
                tgt_rows.extend(flatten_controls(&windows[i].controls));
            }
            let obs = Tensor::from_vec(vec![batch, OBS_DIM], obs_rows)?;
            let targets = Tensor::from_vec(vec![batch, CONTROL_DIM * cfg.horizon], tgt_rows)?;
            let eps_data: Vec<S> = (0..batch * cfg.latent_dim)
                .map(|_| {
                    let g: f64 = rng.sample(StandardNormal);
                    S::c(g)
                })
                .collect();
            let eps = Tensor::from_vec(vec![batch, cfg.latent_dim], eps_data)?;

            policy.set_params(params.clone());
            let mut tape = Tape::new();
            let step_result = (|| -> Result<S> {
                let (elbo_id, leaves) = elbo_graph(&mut tape, &policy, &obs, &targets, &eps)?;
                let loss = tape.scale(elbo_id, -S::one())?;
                let grads = tape.backward(loss)?;
                let grad_tensors: Vec<Tensor<S>> =
                    leaves.ids.iter().map(|&id| grads.get(id)).collect();
                opt.step(&mut params, &grad_tensors)?;
                tape.value(elbo_id).item()
            })();
            match step_result {
                Ok(v) => {
                    epoch_elbo = epoch_elbo + v;
                    steps += 1;
                }
                Err(Error::NonFinite { .. }) => {
                    report.diverged = true;
                    policy = checkpoint;
                    break 'training;
                }
                Err(e) => return Err(e),
            }
        }
        report
            .epoch_elbo
            .push(epoch_elbo / S::from_usize(steps.max(1)).expect("small"));
        policy.set_params(params.clone());
        checkpoint = policy.clone();
    }
    policy.set_params(params);
    if report.diverged {
        // fall back to the last finite checkpoint
        policy = checkpoint;
    }
    Ok((policy, report))
}

/// Sampled action-sequence support for one agent: K control sequences,
/// their rollouts from the current state, and latent prior log-densities.
#[derive(Debug, Clone)]
pub struct CandidateSet<S> {
    pub agent: usize,
    pub controls: Vec<Vec<Control<S>>>,
    pub rollouts: Vec<Trajectory<S>>,
    pub prior_logdensity: Vec<S>,
}

impl<S: Scalar> CandidateSet<S> {
    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.controls.first().map(|c| c.len()).unwrap_or(0)
    }
}

/// Draw K decoder samples with z ~ N(0, I), clamp to control bounds, and
/// roll out from the current state. Deterministic in the seed.
#[allow(clippy::too_many_arguments)]
pub fn sample_candidates<S: Scalar>(
    policy: &GenerativePolicy<S>,
    obs: &EgoObservation<S>,
    state: &AgentState<S>,
    agent: usize,
    k: usize,
    seed: u64,
    bounds: &ControlBounds<S>,
    dt: S,
) -> Result<CandidateSet<S>> {
    if k < 2 {
        return Err(Error::InvalidArgument { arg: "k", detail: format!("need at least 2 candidates, got {k}") });
    }
    let mut rng = rng_from_seed(seed);
    let mut controls = Vec::with_capacity(k);
    let mut rollouts = Vec::with_capacity(k);
    let mut prior = Vec::with_capacity(k);
    let half_log_2pi = S::c(0.5 * (2.0 * std::f64::consts::PI).ln());
    for _ in 0..k {
        let z: Vec<S> = (0..policy.latent_dim)
            .map(|_| {
                let g: f64 = rng.sample(StandardNormal);
                S::c(g)
            })
            .collect();
        let mut logp = S::zero();
        for &zi in &z {
            logp = logp - S::c(0.5) * zi * zi - half_log_2pi;
        }
        let seq: Vec<Control<S>> =
            policy.decode(obs, &z)?.into_iter().map(|u| u.clamped(bounds)).collect();
        let traj = rollout(state, &seq, dt, bounds)?;
        controls.push(seq);
        rollouts.push(traj);
        prior.push(logp);
    }
    Ok(CandidateSet { agent, controls, rollouts, prior_logdensity: prior })
}

#[derive(Serialize, Deserialize)]
struct WeightRecord<S> {
    name: String,
    shape: Vec<usize>,
    data: Vec<S>,
}

#[derive(Serialize, Deserialize)]
struct PolicyCheckpoint<S> {
    schema: String,
    version: u32,
    horizon: usize,
    latent_dim: usize,
    hidden_dim: usize,
    sigma_rec: S,
    logvar_min: S,
    logvar_max: S,
    weights: Vec<WeightRecord<S>>,
}

const WEIGHT_NAMES: [&str; 11] = [
    "enc_w1", "enc_b1", "enc_w_mean", "enc_b_mean", "enc_w_logvar", "enc_b_logvar",
    "dec_w_obs", "dec_w_z", "dec_b1", "dec_w2", "dec_b2",
];

pub fn save_policy<S: Scalar>(policy: &GenerativePolicy<S>, path: &Path) -> Result<()> {
    let weights = WEIGHT_NAMES
        .iter()
        .zip(policy.params())
        .map(|(name, t)| WeightRecord {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            data: t.data().to_vec(),
        })
        .collect();
    let ckpt = PolicyCheckpoint {
        schema: CHECKPOINT_SCHEMA.to_string(),
        version: CHECKPOINT_VERSION,
        horizon: policy.horizon,
        latent_dim: policy.latent_dim,
        hidden_dim: policy.hidden_dim,
        sigma_rec: policy.sigma_rec,
        logvar_min: policy.logvar_min,
        logvar_max: policy.logvar_max,
        weights,
    };
    let text = serde_json::to_string(&ckpt).map_err(|e| Error::Format { detail: e.to_string() })?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_policy<S: Scalar>(path: &Path) -> Result<GenerativePolicy<S>> {
    let text = std::fs::read_to_string(path)?;
    let ckpt: PolicyCheckpoint<S> =
        serde_json::from_str(&text).map_err(|e| Error::Format { detail: e.to_string() })?;
    if ckpt.schema != CHECKPOINT_SCHEMA || ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Format {
            detail: format!(
                "expected {CHECKPOINT_SCHEMA} v{CHECKPOINT_VERSION}, found {} v{}",
                ckpt.schema, ckpt.version
            ),
        });
    }
    if ckpt.weights.len() != WEIGHT_NAMES.len() {
        return Err(Error::Format {
            detail: format!("expected {} weight records, found {}", WEIGHT_NAMES.len(), ckpt.weights.len()),
        });
    }
    let mut tensors = Vec::with_capacity(ckpt.weights.len());
    for (name, rec) in WEIGHT_NAMES.iter().zip(ckpt.weights) {
        if rec.name != *name {
            return Err(Error::Format {
                detail: format!("weight record {} out of order, expected {name}", rec.name),
            });
        }
        tensors.push(Tensor::from_vec(rec.shape, rec.data)?);
    }
    let mut policy = GenerativePolicy {
        horizon: ckpt.horizon,
        latent_dim: ckpt.latent_dim,
        hidden_dim: ckpt.hidden_dim,
        sigma_rec: ckpt.sigma_rec,
        logvar_min: ckpt.logvar_min,
        logvar_max: ckpt.logvar_max,
        enc_w1: Tensor::zeros(vec![1]),
        enc_b1: Tensor::zeros(vec![1]),
        enc_w_mean: Tensor::zeros(vec![1]),
        enc_b_mean: Tensor::zeros(vec![1]),
        enc_w_logvar: Tensor::zeros(vec![1]),
        enc_b_logvar: Tensor::zeros(vec![1]),
        dec_w_obs: Tensor::zeros(vec![1]),
        dec_w_z: Tensor::zeros(vec![1]),
        dec_b1: Tensor::zeros(vec![1]),
        dec_w2: Tensor::zeros(vec![1]),
        dec_b2: Tensor::zeros(vec![1]),
    };
    policy.set_params(tensors);
    Ok(policy)
}
