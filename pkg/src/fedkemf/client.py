"""Client-side local training: deep mutual learning and the plain-CE baseline."""

import math
from dataclasses import dataclass

import numpy as np

from . import nets
from .data import Dataset
from .errors import DivergenceError
from .seeding import derive_seed


@dataclass
class ClientState:
    client_id: int
    local_model: nets.Network
    train_indices: list
    val_indices: list
    epochs: int
    batch_size: int
    lr: float
    rng_seed: int  # experiment seed; per-epoch streams are derived from it


def batch_iterator(indices, batch_size, epoch_seed):
    """Deterministically shuffled batches; the final partial batch is kept."""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("cannot batch an empty index list")
    rng = np.random.default_rng(epoch_seed)
    idx = rng.permutation(idx)
    return [idx[i:i + batch_size] for i in range(0, idx.size, batch_size)]


def _check_finite(loss, client_id, epoch, batch_index):
    if not math.isfinite(loss):
        raise DivergenceError(
            f"client {client_id} diverged at epoch {epoch}, batch {batch_index}",
            client_id=client_id, epoch=epoch, batch_index=batch_index,
        )


def _checked_logits(net, x, client_id, epoch, batch_index):
    logits = nets.forward(net, x)
    if not np.all(np.isfinite(logits)):
        raise DivergenceError(
            f"client {client_id} produced non-finite logits at epoch {epoch}, batch {batch_index}",
            client_id=client_id, epoch=epoch, batch_index=batch_index,
        )
    return logits


def client_update(state: ClientState, knowledge_net: nets.Network, data: Dataset,
                  round_index: int = 0):
    """One local round of deep mutual learning.

    Per batch, the local model steps on CE plus KL toward the knowledge
    network's current distribution, then the knowledge network steps on CE
    plus KL toward the just-updated local model.  The local model persists in
    the state; only the updated knowledge copy is returned.

    Returns (updated_knowledge, mean_train_loss, local_val_accuracy).
    """
    if knowledge_net.arch.num_classes != state.local_model.arch.num_classes:
        raise ValueError("knowledge and local networks disagree on num_classes")
    kn = knowledge_net.copy()
    theta = state.local_model
    losses = []
    for epoch in range(state.epochs):
        epoch_seed = derive_seed(state.rng_seed, state.client_id, round_index, epoch)
        for b, batch_idx in enumerate(batch_iterator(state.train_indices, state.batch_size, epoch_seed)):
            x = data.features[batch_idx]
            y = data.labels[batch_idx]

            g_logits = _checked_logits(kn, x, state.client_id, epoch, b)
            t_logits = _checked_logits(theta, x, state.client_id, epoch, b)
            teacher = nets.softmax(g_logits)
            loss = nets.cross_entropy(t_logits, y) + nets.kl_from_probs(
                teacher, nets.softmax(t_logits)
            )
            _check_finite(loss, state.client_id, epoch, b)
            theta = nets.sgd_step(theta, nets.loss_gradient(theta, x, y, teacher), state.lr)
            losses.append(loss)

            t_logits = _checked_logits(theta, x, state.client_id, epoch, b)
            teacher = nets.softmax(t_logits)
            kn_loss = nets.cross_entropy(g_logits, y) + nets.kl_from_probs(
                teacher, nets.softmax(g_logits)
            )
            _check_finite(kn_loss, state.client_id, epoch, b)
            kn = nets.sgd_step(kn, nets.loss_gradient(kn, x, y, teacher), state.lr)

    state.local_model = theta
    eval_idx = state.val_indices if len(state.val_indices) else state.train_indices
    val_acc, _ = nets.evaluate(theta, data.features[eval_idx], data.labels[eval_idx])
    mean_loss = float(np.mean(losses)) if losses else 0.0
    return kn, mean_loss, val_acc


def local_train(state: ClientState, model: nets.Network, data: Dataset,
                round_index: int = 0):
    """Plain cross-entropy local training of a shared-architecture model.

    Used by the weighted-averaging baseline; the incoming model is copied.
    Returns (trained_model, mean_train_loss).
    """
    net = model.copy()
    losses = []
    for epoch in range(state.epochs):
        epoch_seed = derive_seed(state.rng_seed, state.client_id, round_index, epoch)
        for b, batch_idx in enumerate(batch_iterator(state.train_indices, state.batch_size, epoch_seed)):
            x = data.features[batch_idx]
            y = data.labels[batch_idx]
            loss = nets.cross_entropy(
                _checked_logits(net, x, state.client_id, epoch, b), y
            )
            _check_finite(loss, state.client_id, epoch, b)
            net = nets.sgd_step(net, nets.loss_gradient(net, x, y), state.lr)
            losses.append(loss)
    mean_loss = float(np.mean(losses)) if losses else 0.0
    return net, mean_loss
