"""Toy-scale policy-value network with hand-derived gradients.

The network scores an unordered candidate set against a context vector:
linear projections into a shared latent space, bidirectional cross-
attention, a permutation-equivariant self-attention block with a
position-wise feed-forward layer, FiLM modulation of the candidate
features by the attended context, then a softmax policy head and a
pooled linear value head.

Everything runs in float64 numpy with explicit forward caches and
mirrored backward passes, so every gradient can be audited against
central finite differences.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .catalog import Phase
from .embeddings import PhasePriors

EPS = 1e-12  # clamp for probabilities inside logs
_LN_EPS = 1e-8


class PvnError(Exception):
    """Raised for shape mismatches, bad configs, or non-finite training."""


@dataclass(frozen=True)
class PvnConfig:
    """Network and training hyperparameters.

    input_dim may be left as None in file configs and resolved from the
    embedding store before any weights are created.
    """

    input_dim: int | None
    latent_dim: int = 16
    attention_heads: int = 2
    lambda_v: float = 1.0
    learning_rate: float = 0.01
    init_seed: int = 0
    layer_norm: bool = False
    alphazero_loss: bool = False  # cross-entropy policy loss instead of KL(model||target)

    def __post_init__(self):
        if self.input_dim is not None and self.input_dim < 1:
            raise PvnError(f"input_dim must be positive, got {self.input_dim}")
        if self.latent_dim < 1:
            raise PvnError(f"latent_dim must be positive, got {self.latent_dim}")
        if self.attention_heads < 1:
            raise PvnError(f"attention_heads must be positive, got {self.attention_heads}")
        if self.latent_dim % self.attention_heads != 0:
            raise PvnError(
                f"latent_dim {self.latent_dim} not divisible by "
                f"attention_heads {self.attention_heads}"
            )
        if self.lambda_v < 0:
            raise PvnError(f"lambda_v must be >= 0, got {self.lambda_v}")
        if self.learning_rate <= 0:
            raise PvnError(f"learning_rate must be positive, got {self.learning_rate}")

    def resolved(self, input_dim: int) -> "PvnConfig":
        if self.input_dim is not None and self.input_dim != input_dim:
            raise PvnError(f"config input_dim {self.input_dim} != embedding dim {input_dim}")
        return replace(self, input_dim=input_dim)

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "latent_dim": self.latent_dim,
            "attention_heads": self.attention_heads,
            "lambda_v": self.lambda_v,
            "learning_rate": self.learning_rate,
            "init_seed": self.init_seed,
            "layer_norm": self.layer_norm,
            "alphazero_loss": self.alphazero_loss,
        }


_ATTN_BLOCKS = ("attn_cand", "attn_ctx", "attn_set")


def tensor_shapes(cfg: PvnConfig) -> dict[str, tuple[int, ...]]:
    """Canonical name -> shape map for every learnable tensor."""
    if cfg.input_dim is None:
        raise PvnError("config input_dim is unresolved")
    d, i = cfg.latent_dim, cfg.input_dim
    shapes: dict[str, tuple[int, ...]] = {"W_c": (d, i), "W_t": (d, i)}
    for block in _ATTN_BLOCKS:
        for part in ("W_q", "W_k", "W_v", "W_o"):
            shapes[f"{block}.{part}"] = (d, d)
    shapes["ff_W1"] = (d, d)
    shapes["ff_b1"] = (d,)
    shapes["ff_W2"] = (d, d)
    shapes["ff_b2"] = (d,)
    shapes["W_f"] = (2 * d, d)
    shapes["w_p"] = (d,)
    shapes["w_v"] = (2 * d,)
    return shapes


@dataclass
class PvnWeights:
    """All learnable tensors, keyed by canonical name."""

    config: PvnConfig
    tensors: dict[str, np.ndarray] = field(repr=False)

    def copy(self) -> "PvnWeights":
        return PvnWeights(self.config, {k: v.copy() for k, v in self.tensors.items()})


def init_weights(cfg: PvnConfig) -> PvnWeights:
    """Deterministic scaled-uniform initialization, bound 1/sqrt(fan_in).

    Biases start at zero; matrix fan-in is the input dimension, vector
    fan-in its own length.
    """
    rng = np.random.default_rng(cfg.init_seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in tensor_shapes(cfg).items():
        if name.startswith("ff_b"):
            tensors[name] = np.zeros(shape)
            continue
        fan_in = shape[-1] if len(shape) > 1 else shape[0]
        bound = 1.0 / math.sqrt(fan_in)
        tensors[name] = rng.uniform(-bound, bound, size=shape)
    return PvnWeights(config=cfg, tensors=tensors)


def save_weights(weights: PvnWeights, path: str | Path) -> None:
    obj = {
        "config": weights.config.to_dict(),
        "tensors": {
            name: {"shape": list(arr.shape), "data": arr.ravel().tolist()}
            for name, arr in weights.tensors.items()
        },
    }
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_weights(path: str | Path) -> PvnWeights:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = PvnConfig(**data["config"])
    expected = tensor_shapes(cfg)
    tensors = {}
    for name, shape in expected.items():
        if name not in data["tensors"]:
            raise PvnError(f"{path}: missing tensor {name!r}")
        entry = data["tensors"][name]
        arr = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        if tuple(arr.shape) != shape:
            raise PvnError(f"{path}: tensor {name!r} has shape {arr.shape}, expected {shape}")
        tensors[name] = arr
    return PvnWeights(config=cfg, tensors=tensors)


@dataclass(frozen=True)
class PvnOutput:
    """Policy over the candidate set plus a scalar state value."""

    policy: np.ndarray
    value: float
    intermediates: dict[str, np.ndarray] | None = None


def _as_vector(x) -> np.ndarray:
    values = getattr(x, "values", x)
    return np.asarray(values, dtype=np.float64)


def _softmax(x: np.ndarray) -> np.ndarray:
    shifted = x - np.max(x)
    exps = np.exp(shifted)
    return exps / exps.sum()


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    shifted = x - x.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


# --- multi-head scaled-dot-product attention -------------------------------


def _mha_forward(tensors: dict, block: str, heads: int, Q: np.ndarray, K: np.ndarray, V: np.ndarray):
    n, d = Q.shape
    m = K.shape[0]
    dk = d // heads
    scale = 1.0 / math.sqrt(dk)
    Qp = Q @ tensors[f"{block}.W_q"].T
    Kp = K @ tensors[f"{block}.W_k"].T
    Vp = V @ tensors[f"{block}.W_v"].T
    Qh = Qp.reshape(n, heads, dk).transpose(1, 0, 2)
    Kh = Kp.reshape(m, heads, dk).transpose(1, 0, 2)
    Vh = Vp.reshape(m, heads, dk).transpose(1, 0, 2)
    scores = Qh @ Kh.transpose(0, 2, 1) * scale
    attn = _softmax_rows(scores)
    Oh = attn @ Vh
    O = Oh.transpose(1, 0, 2).reshape(n, d)
    out = O @ tensors[f"{block}.W_o"].T
    cache = {"Q": Q, "K": K, "V": V, "Qh": Qh, "Kh": Kh, "Vh": Vh, "attn": attn, "O": O,
             "scale": scale, "heads": heads}
    return out, cache


def _mha_backward(tensors: dict, block: str, cache: dict, dout: np.ndarray, grads: dict):
    heads, scale = cache["heads"], cache["scale"]
    Q, K, V = cache["Q"], cache["K"], cache["V"]
    Qh, Kh, Vh, attn, O = cache["Qh"], cache["Kh"], cache["Vh"], cache["attn"], cache["O"]
    n, d = Q.shape
    m = K.shape[0]
    dk = d // heads

    grads[f"{block}.W_o"] += dout.T @ O
    dO = dout @ tensors[f"{block}.W_o"]
    dOh = dO.reshape(n, heads, dk).transpose(1, 0, 2)
    dattn = dOh @ Vh.transpose(0, 2, 1)
    dVh = attn.transpose(0, 2, 1) @ dOh
    # softmax rows: dS = A * (dA - sum(dA * A))
    dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
    dscores *= scale
    dQh = dscores @ Kh
    dKh = dscores.transpose(0, 2, 1) @ Qh
    dQp = dQh.transpose(1, 0, 2).reshape(n, d)
    dKp = dKh.transpose(1, 0, 2).reshape(m, d)
    dVp = dVh.transpose(1, 0, 2).reshape(m, d)
    grads[f"{block}.W_q"] += dQp.T @ Q
    grads[f"{block}.W_k"] += dKp.T @ K
    grads[f"{block}.W_v"] += dVp.T @ V
    dQ = dQp @ tensors[f"{block}.W_q"]
    dK = dKp @ tensors[f"{block}.W_k"]
    dV = dVp @ tensors[f"{block}.W_v"]
    return dQ, dK, dV


# --- parameter-free row layer norm ------------------------------------------


def _ln_forward(x: np.ndarray):
    mu = x.mean(axis=-1, keepdims=True)
    centered = x - mu
    sigma = np.sqrt((centered**2).mean(axis=-1, keepdims=True) + _LN_EPS)
    y = centered / sigma
    return y, {"y": y, "sigma": sigma}


def _ln_backward(dy: np.ndarray, cache: dict) -> np.ndarray:
    y, sigma = cache["y"], cache["sigma"]
    return (dy - dy.mean(axis=-1, keepdims=True) - y * (dy * y).mean(axis=-1, keepdims=True)) / sigma


# --- forward / backward ------------------------------------------------------


def _forward_full(weights: PvnWeights, context, candidates):
    """Run the network and keep every intermediate needed for backprop."""
    cfg = weights.config
    t = weights.tensors
    if len(candidates) < 1:
        raise PvnError("need at least one candidate")
    c = _as_vector(context)
    V = np.stack([_as_vector(x) for x in candidates])
    if cfg.input_dim is None:
        raise PvnError("config input_dim is unresolved")
    if c.shape != (cfg.input_dim,):
        raise PvnError(f"context has shape {c.shape}, expected ({cfg.input_dim},)")
    if V.shape[1] != cfg.input_dim:
        raise PvnError(f"candidates have dim {V.shape[1]}, expected {cfg.input_dim}")

    d = cfg.latent_dim
    heads = cfg.attention_heads
    ctilde = t["W_c"] @ c
    vtilde = V @ t["W_t"].T

    # candidate queries read the context; residual keeps per-candidate identity
    a_cand, cache_cand = _mha_forward(t, "attn_cand", heads, vtilde, ctilde[None, :], ctilde[None, :])
    H = vtilde + a_cand

    # context query attends over the candidate set
    a_ctx, cache_ctx = _mha_forward(t, "attn_ctx", heads, ctilde[None, :], vtilde, vtilde)
    G = ctilde + a_ctx[0]

    # permutation-equivariant set block: self-attention + feed-forward
    a_set, cache_set = _mha_forward(t, "attn_set", heads, H, H, H)
    S_pre = H + a_set
    if cfg.layer_norm:
        S, cache_ln1 = _ln_forward(S_pre)
    else:
        S, cache_ln1 = S_pre, None
    T1 = S @ t["ff_W1"].T + t["ff_b1"]
    T2 = np.tanh(T1)
    F = T2 @ t["ff_W2"].T + t["ff_b2"]
    U_pre = S + F
    if cfg.layer_norm:
        U, cache_ln2 = _ln_forward(U_pre)
    else:
        U, cache_ln2 = U_pre, None

    # FiLM: context-generated affine transform of the candidate features
    film = t["W_f"] @ G
    gamma, beta = film[:d], film[d:]
    Z = gamma[None, :] * U + beta[None, :]

    logits = Z @ t["w_p"]
    pi = _softmax(logits)

    pooled = Z.mean(axis=0)
    hcat = np.concatenate([pooled, G])
    value = float(t["w_v"] @ hcat)

    cache = {
        "c": c, "V": V, "ctilde": ctilde, "vtilde": vtilde,
        "cache_cand": cache_cand, "cache_ctx": cache_ctx, "cache_set": cache_set,
        "H": H, "G": G, "S": S, "T1": T1, "T2": T2, "F": F, "U": U,
        "cache_ln1": cache_ln1, "cache_ln2": cache_ln2,
        "gamma": gamma, "beta": beta, "Z": Z, "logits": logits, "pi": pi,
        "pooled": pooled, "hcat": hcat, "value": value,
    }
    return pi, value, cache


def forward(weights: PvnWeights, context, candidates, keep_intermediates: bool = False) -> PvnOutput:
    """Policy over the candidates and a scalar value for the state."""
    pi, value, cache = _forward_full(weights, context, candidates)
    intermediates = None
    if keep_intermediates:
        intermediates = {"H": cache["H"], "G": cache["G"], "U": cache["U"], "Z": cache["Z"]}
    return PvnOutput(policy=pi, value=value, intermediates=intermediates)


def _policy_loss_and_grad(pi: np.ndarray, pi_target: np.ndarray, alphazero: bool):
    """Loss over the policy simplex and dL/dpi, with eps-clamped logs."""
    clipped_pi = np.maximum(pi, EPS)
    clipped_target = np.maximum(pi_target, EPS)
    if alphazero:
        value = float(-(pi_target * np.log(clipped_pi)).sum())
        dpi = np.where(pi > EPS, -pi_target / clipped_pi, 0.0)
    else:
        value = float((pi * (np.log(clipped_pi) - np.log(clipped_target))).sum())
        dpi = np.log(clipped_pi) - np.log(clipped_target) + np.where(pi > EPS, 1.0, 0.0)
    return value, dpi


def loss(output: PvnOutput, pi_target, v_target: float, lambda_v: float,
         alphazero: bool = False) -> float:
    """Joint objective: policy divergence plus weighted squared value error."""
    pi_target = np.asarray(pi_target, dtype=np.float64)
    if pi_target.shape != output.policy.shape:
        raise PvnError(
            f"pi_target has shape {pi_target.shape}, policy has {output.policy.shape}"
        )
    policy_term, _ = _policy_loss_and_grad(output.policy, pi_target, alphazero)
    return policy_term + lambda_v * (output.value - v_target) ** 2


def _loss_and_grads(weights: PvnWeights, context, candidates, pi_target, v_target: float,
                    lambda_v: float):
    cfg = weights.config
    t = weights.tensors
    d = cfg.latent_dim
    pi, value, cache = _forward_full(weights, context, candidates)
    pi_target = np.asarray(pi_target, dtype=np.float64)
    if pi_target.shape != pi.shape:
        raise PvnError(f"pi_target has shape {pi_target.shape}, policy has {pi.shape}")

    policy_term, dpi = _policy_loss_and_grad(pi, pi_target, cfg.alphazero_loss)
    total_loss = policy_term + lambda_v * (value - v_target) ** 2

    grads = {name: np.zeros_like(arr) for name, arr in t.items()}
    n = cache["V"].shape[0]
    Z, U, G, gamma = cache["Z"], cache["U"], cache["G"], cache["gamma"]

    # policy head through the softmax
    dlogits = pi * (dpi - (dpi * pi).sum())
    grads["w_p"] += Z.T @ dlogits
    dZ = np.outer(dlogits, t["w_p"])

    # value head
    dvalue = 2.0 * lambda_v * (value - v_target)
    grads["w_v"] += dvalue * cache["hcat"]
    dG = dvalue * t["w_v"][d:]
    dZ += (dvalue * t["w_v"][:d])[None, :] / n  # mean pool

    # FiLM
    dgamma = (dZ * U).sum(axis=0)
    dbeta = dZ.sum(axis=0)
    dU = dZ * gamma[None, :]
    dfilm = np.concatenate([dgamma, dbeta])
    grads["W_f"] += np.outer(dfilm, G)
    dG = dG + t["W_f"].T @ dfilm

    # set block feed-forward (residual)
    if cfg.layer_norm:
        dU_pre = _ln_backward(dU, cache["cache_ln2"])
    else:
        dU_pre = dU
    dS = dU_pre.copy()
    dF = dU_pre
    T2, S = cache["T2"], cache["S"]
    grads["ff_W2"] += dF.T @ T2
    grads["ff_b2"] += dF.sum(axis=0)
    dT2 = dF @ t["ff_W2"]
    dT1 = dT2 * (1.0 - T2**2)
    grads["ff_W1"] += dT1.T @ S
    grads["ff_b1"] += dT1.sum(axis=0)
    dS += dT1 @ t["ff_W1"]

    # set self-attention (residual); H feeds Q, K and V
    if cfg.layer_norm:
        dS_pre = _ln_backward(dS, cache["cache_ln1"])
    else:
        dS_pre = dS
    dH = dS_pre.copy()
    dQ3, dK3, dV3 = _mha_backward(t, "attn_set", cache["cache_set"], dS_pre, grads)
    dH += dQ3 + dK3 + dV3

    # candidate-side cross attention: H = vtilde + Attn(vtilde, ctilde, ctilde)
    dvtilde = dH.copy()
    dQ1, dK1, dV1 = _mha_backward(t, "attn_cand", cache["cache_cand"], dH, grads)
    dvtilde += dQ1
    dctilde = dK1[0] + dV1[0]

    # context-side cross attention: G = ctilde + Attn(ctilde, vtilde, vtilde)
    dctilde = dctilde + dG
    dQ2, dK2, dV2 = _mha_backward(t, "attn_ctx", cache["cache_ctx"], dG[None, :], grads)
    dctilde += dQ2[0]
    dvtilde += dK2 + dV2

    # input projections
    grads["W_t"] += dvtilde.T @ cache["V"]
    grads["W_c"] += np.outer(dctilde, cache["c"])
    return total_loss, grads


def backward(weights: PvnWeights, context, candidates, pi_target, v_target: float,
             lambda_v: float) -> dict[str, np.ndarray]:
    """Exact analytic gradients of the joint loss for every tensor."""
    _, grads = _loss_and_grads(weights, context, candidates, pi_target, v_target, lambda_v)
    return grads


def train_step(weights: PvnWeights, batch, cfg: PvnConfig) -> tuple[PvnWeights, float]:
    """One plain gradient-descent step on the batch-mean loss.

    Returns the updated weights and the pre-update mean loss.
    """
    if not batch:
        raise PvnError("training batch is empty")
    total_loss = 0.0
    batch_grads = {name: np.zeros_like(arr) for name, arr in weights.tensors.items()}
    for context, candidates, pi_target, v_target in batch:
        sample_loss, grads = _loss_and_grads(
            weights, context, candidates, pi_target, v_target, cfg.lambda_v
        )
        total_loss += sample_loss
        for name in batch_grads:
            batch_grads[name] += grads[name]
    mean_loss = total_loss / len(batch)
    if not math.isfinite(mean_loss):
        raise PvnError(f"non-finite training loss {mean_loss!r} over batch of {len(batch)}")
    scale = cfg.learning_rate / len(batch)
    updated = {name: arr - scale * batch_grads[name] for name, arr in weights.tensors.items()}
    return PvnWeights(config=weights.config, tensors=updated), mean_loss


def heuristic_evaluate(context, candidates: list[tuple[Phase, str]], priors: PhasePriors,
                       values_by_rollout) -> PvnOutput:
    """Untrained fallback: phase priors as the policy, mean rollout value.

    Lets search run before any network exists; context is accepted for
    signature parity with the trained evaluator but is unused.
    """
    del context
    if not candidates:
        raise PvnError("need at least one candidate")
    raw = np.array([priors.prior(phase, tid) for phase, tid in candidates])
    total = raw.sum()
    if total > 0:
        policy = raw / total
    else:
        policy = np.full(len(candidates), 1.0 / len(candidates))
    values = [values_by_rollout(phase, tid) for phase, tid in candidates]
    return PvnOutput(policy=policy, value=float(sum(values) / len(values)))
