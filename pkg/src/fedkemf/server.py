"""Server side: client sampling, ensembling, ensemble distillation, FedAvg."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import nets
from .client import batch_iterator, client_update, local_train
from .data import Dataset
from .errors import DivergenceError
from .seeding import SALT_DISTILL, SALT_SAMPLING, derive_seed

STRATEGIES = ("max_logits", "avg_logits", "majority_vote")
INIT_MODES = ("avg_members", "warm_start")


@dataclass
class ServerState:
    global_knowledge: nets.Network
    distill_indices: list
    distill_epochs: int
    distill_lr: float
    strategy: str = "max_logits"
    init_mode: str = "avg_members"
    batch_size: int = 32
    rng_seed: int = 0
    round: int = 0

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown ensemble strategy {self.strategy!r}")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"unknown server init mode {self.init_mode!r}")


def sample_clients(num_clients, sample_ratio, round_index, experiment_seed):
    """Uniform without-replacement client sample, deterministic in (round, seed)."""
    if not (0 < sample_ratio <= 1):
        raise ValueError("sample_ratio must be in (0, 1]")
    count = max(1, int(round(sample_ratio * num_clients)))
    rng = np.random.default_rng(derive_seed(experiment_seed, SALT_SAMPLING, round_index))
    return sorted(int(c) for c in rng.choice(num_clients, size=count, replace=False))


def ensemble_logits(member_logits, strategy):
    """Combine K member logit batches into one teacher batch.

    max_logits / avg_logits return combined logits; majority_vote returns
    per-row vote fractions (each member votes its argmax, ties to the lowest
    class index).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown ensemble strategy {strategy!r}")
    members = [np.asarray(m, dtype=np.float64) for m in member_logits]
    if not members:
        raise ValueError("need at least one ensemble member")
    shape = members[0].shape
    if any(m.shape != shape for m in members):
        raise ValueError("member logits must share one shape")
    stacked = np.stack(members)
    if strategy == "max_logits":
        return stacked.max(axis=0)
    if strategy == "avg_logits":
        # Sum in a canonical member order so the result is bit-identical under
        # member permutation (float addition is not associative).
        order = sorted(range(len(members)), key=lambda i: members[i].tobytes())
        total = np.zeros(shape)
        for i in order:
            total += members[i]
        return total / len(members)
    votes = np.argmax(stacked, axis=2)  # K x N
    n, c = shape
    fractions = np.zeros(shape)
    for k in range(len(members)):
        fractions[np.arange(n), votes[k]] += 1.0
    return fractions / len(members)


def teacher_distributions(member_logits, strategy):
    """Per-row teacher probability rows for distillation under a strategy."""
    combined = ensemble_logits(member_logits, strategy)
    if strategy == "majority_vote":
        return combined
    return nets.softmax(combined)


def average_init(members):
    """Parameter-wise mean of same-architecture networks."""
    if not members:
        raise ValueError("need at least one member")
    arch = members[0].arch
    if any(m.arch != arch for m in members):
        raise ValueError("members must share one architecture")
    return nets.Network(arch, np.mean([m.params for m in members], axis=0))


def fedavg_aggregate(members, weights):
    """Parameter-wise weighted mean; weights normalized to sum 1."""
    if len(members) != len(weights):
        raise ValueError("one weight per member required")
    w = np.asarray(weights, dtype=np.float64)
    if np.any(w < 0) or w.sum() <= 0:
        raise ValueError("weights must be non-negative with positive sum")
    arch = members[0].arch
    if any(m.arch != arch for m in members):
        raise ValueError("members must share one architecture")
    w = w / w.sum()
    params = sum(wi * m.params for wi, m in zip(w, members))
    return nets.Network(arch, params)


def distill(server: ServerState, members, data: Dataset):
    """Distill the member ensemble into a student on the server's unlabeled split.

    Student starts from the parameter average of the members (or from the
    previous global network under warm_start) and steps on batch-mean KL from
    the combined teacher distribution.  Returns (student, last_mean_kl).
    """
    if not members:
        raise ValueError("need at least one member to distill")
    if server.init_mode == "warm_start":
        student = server.global_knowledge.copy()
    else:
        student = average_init(members)
    last_loss = 0.0
    for epoch in range(server.distill_epochs):
        epoch_seed = derive_seed(server.rng_seed, SALT_DISTILL, server.round, epoch)
        epoch_losses = []
        for batch_idx in batch_iterator(server.distill_indices, server.batch_size, epoch_seed):
            x = data.features[batch_idx]
            teacher = teacher_distributions([nets.forward(m, x) for m in members], server.strategy)
            loss = nets.kl_from_probs(teacher, nets.softmax(nets.forward(student, x)))
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"distillation diverged at round {server.round}, epoch {epoch}",
                    round_index=server.round, epoch=epoch,
                )
            grad = nets.loss_gradient(student, x, teacher_probs=teacher)
            student = nets.sgd_step(student, grad, server.distill_lr)
            epoch_losses.append(loss)
        if epoch_losses:
            last_loss = float(np.mean(epoch_losses))
    return student, last_loss


def _run_clients(fn, client_ids, jobs):
    """Run per-client work, optionally in parallel; results keyed by client id."""
    if jobs <= 1 or len(client_ids) <= 1:
        return {cid: fn(cid) for cid in client_ids}
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        futures = {cid: pool.submit(fn, cid) for cid in client_ids}
        return {cid: fut.result() for cid, fut in futures.items()}


def run_round(server: ServerState, clients, data: Dataset, mode,
              sample_ratio, audit=None, jobs=1):
    """Execute one communication round; mutates server and client states.

    fedkemf: sample, broadcast the global knowledge network, mutual-train per
    client, ensemble-distill the returned knowledge copies.  fedavg: sample,
    broadcast, plain-CE local training of the shared-arch model, shard-size
    weighted averaging.

    Returns per-round stats: sampled ids, mean train loss over sampled
    clients, mean val accuracy over ALL clients' deployed models, and the
    distillation loss (0.0 in fedavg mode).
    """
    if mode not in ("fedkemf", "fedavg"):
        raise ValueError(f"unknown mode {mode!r}")
    round_index = server.round + 1
    sampled = sample_clients(len(clients), sample_ratio, round_index, server.rng_seed)
    ck_bytes = _knowledge_nbytes(server)
    distill_loss = 0.0

    if mode == "fedkemf":
        def work(cid):
            return client_update(clients[cid], server.global_knowledge, data, round_index)

        results = _run_clients(work, sampled, jobs)
        if audit is not None:
            for cid in sampled:
                audit.record_download(round_index, cid, server.global_knowledge.arch, ck_bytes)
                audit.record_upload(round_index, cid, results[cid][0].arch, ck_bytes)
        members = [results[cid][0] for cid in sampled]  # sampled is id-sorted
        train_losses = [results[cid][1] for cid in sampled]
        server.global_knowledge, distill_loss = distill(server, members, data)
        val_accs = [
            nets.evaluate(
                st.local_model,
                data.features[st.val_indices if len(st.val_indices) else st.train_indices],
                data.labels[st.val_indices if len(st.val_indices) else st.train_indices],
            )[0]
            for st in clients
        ]
    else:
        def work(cid):
            return local_train(clients[cid], server.global_knowledge, data, round_index)

        results = _run_clients(work, sampled, jobs)
        if audit is not None:
            for cid in sampled:
                audit.record_download(round_index, cid, server.global_knowledge.arch, ck_bytes)
                audit.record_upload(round_index, cid, results[cid][0].arch, ck_bytes)
        members = [results[cid][0] for cid in sampled]
        train_losses = [results[cid][1] for cid in sampled]
        weights = [len(clients[cid].train_indices) for cid in sampled]
        server.global_knowledge = fedavg_aggregate(members, weights)
        # Clients deploy the aggregated model; score it on each local val split.
        val_accs = [
            nets.evaluate(
                server.global_knowledge,
                data.features[st.val_indices if len(st.val_indices) else st.train_indices],
                data.labels[st.val_indices if len(st.val_indices) else st.train_indices],
            )[0]
            for st in clients
        ]

    server.round = round_index
    return {
        "sampled": sampled,
        "mean_train_loss": float(np.mean(train_losses)) if train_losses else 0.0,
        "mean_client_val_accuracy": float(np.mean(val_accs)),
        "distill_loss": distill_loss,
        "payload_bytes": ck_bytes,
    }


def _knowledge_nbytes(server: ServerState) -> int:
    from .checkpoint import checkpoint_nbytes

    return checkpoint_nbytes(server.global_knowledge.arch)
