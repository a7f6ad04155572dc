"""Event-driven federated rounds over the simulated network.

The coordinator never touches participant data. It sends each participant a
control message carrying the base model and the round's public keys. Each
participant trains locally and returns one (possibly masked) update. The
coordinator then aggregates once every update has arrived or the deadline
passes, whichever comes first.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

from telcofed import codec
from telcofed.agents.trainer import LocalModel, local_train, mse
from telcofed.crypto import KeyAgreement, Signer
from telcofed.federation.aggregation import (
    AttributionScore,
    GlobalModel,
    ModelUpdate,
    aggregate,
    score_contributions,
    withheld_attribution,
)
from telcofed.federation.privacy import add_dp_noise, clip_update
from telcofed.federation.scheduling import RoundPlan
from telcofed.federation.secagg import mask_update, pair_key, pairwise_seed, quantize
from telcofed.ledger import Ledger
from telcofed.rng import derive_seed
from telcofed.simnet.network import COORDINATOR, Network

TRAIN_MS_PER_SAMPLE_EPOCH = 0.01


@dataclass
class Participant:
    """One operator's side of federation; ``data`` never leaves this object."""

    operator: str
    data: Sequence[tuple[float, float]]
    agreement: KeyAgreement
    online: bool = True

    @property
    def sample_count(self) -> int:
        return len(self.data)

    @classmethod
    def create(cls, operator: str, data: Sequence[tuple[float, float]], seed: int) -> Participant:
        return cls(operator, list(data), KeyAgreement.from_seed(seed, f"x25519:{operator}"))

    def train_ms(self, epochs: int) -> int:
        return math.ceil(epochs * self.sample_count * TRAIN_MS_PER_SAMPLE_EPOCH)

    def build_update(
        self, plan: RoundPlan, model: GlobalModel, public_keys: Mapping[str, bytes], noise_seed: int
    ) -> tuple[ModelUpdate, np.ndarray]:
        """Local pipeline: train, clip, noise, quantize, then mask when the plan asks for it.

        Returns the update and the unmasked quantized vector (kept locally for tests).
        """
        trained, _ = local_train(LocalModel(model.weights), self.data, plan.local_epochs, plan.lr)
        delta = np.asarray(trained.weights) - np.asarray(model.weights)
        delta = add_dp_noise(clip_update(delta, plan.clip), plan.sigma, plan.clip, noise_seed)
        q = quantize(delta, self.sample_count)
        masked = None
        if plan.masking:
            seeds = {
                pair_key(self.operator, other): pairwise_seed(
                    self.agreement, public_keys[other], plan.round_id, self.operator, other
                )
                for other in plan.participants
                if other != self.operator
            }
            masked = mask_update(q, self.operator, list(plan.participants), seeds)
        update = ModelUpdate.build(plan.round_id, plan.base_version, self.operator, q, self.sample_count, masked)
        return update, q


@dataclass(frozen=True)
class RoundRecord:
    round_id: int
    status: str  # "completed" | "aborted"
    base_version: int
    version: int
    participants: tuple[str, ...]
    received: tuple[str, ...]
    start: int
    end: int
    eval_loss: float
    attribution: Mapping[str, float]
    attribution_method: str
    masked: bool
    model_digest: str

    @property
    def aborted(self) -> bool:
        return self.status == "aborted"

    def to_dict(self) -> dict:
        return {
            "round_id": self.round_id,
            "status": self.status,
            "base_version": self.base_version,
            "version": self.version,
            "participants": list(self.participants),
            "received": list(self.received),
            "start": self.start,
            "end": self.end,
            "eval_loss": self.eval_loss,
            "attribution": dict(self.attribution),
            "attribution_method": self.attribution_method,
            "masked": self.masked,
            "model_digest": self.model_digest,
        }


def _encode_plan(plan: RoundPlan) -> bytes:
    return (
        codec.enc_int(plan.round_id)
        + codec.enc_int(plan.base_version)
        + codec.enc_seq(codec.enc_str(p) for p in plan.participants)
        + codec.enc_int(plan.start)
        + codec.enc_int(plan.deadline)
        + codec.enc_float(plan.clip)
        + codec.enc_float(plan.sigma)
        + codec.enc_bool(plan.masking)
        + codec.enc_str(plan.weighting)
    )


def _encode_attribution(score: AttributionScore) -> bytes:
    return codec.enc_str(score.method) + codec.enc_seq(
        codec.enc_str(op) + codec.enc_float(v) for op, v in sorted(score.scores.items())
    )


@dataclass
class Coordinator:
    network: Network
    ledger: Ledger
    signer: Signer
    model: GlobalModel
    eval_set: Sequence[tuple[float, float]]
    seed: int = 0
    history: list[RoundRecord] = field(default_factory=list)
    models: list[GlobalModel] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.ledger.add_key(self.signer)
        self.models.append(self.model)

    @property
    def sim(self):
        return self.network.sim

    def eval_loss(self, model: GlobalModel | None = None) -> float:
        return mse((model or self.model).weights, self.eval_set)

    def losses(self) -> list[float]:
        """Eval loss of the initial model followed by the loss after each round."""
        first = mse(self.models[0].weights, self.eval_set)
        return [first] + [r.eval_loss for r in self.history]

    def _audit(self, entry_type: str, payload: bytes) -> None:
        self.ledger.append(payload, entry_type, self.signer, self.sim.now)

    def run_round(
        self, plan: RoundPlan, participants: Mapping[str, Participant] | Iterable[Participant]
    ) -> tuple[GlobalModel, AttributionScore, RoundRecord]:
        """Schedule the round, drive the simulator until it resolves, and return the outcome."""
        if not isinstance(participants, Mapping):
            participants = {p.operator: p for p in participants}
        missing = [op for op in plan.participants if op not in participants]
        if missing:
            raise ValueError(f"plan names unknown participants {missing}")
        if plan.base_version != self.model.version:
            raise ValueError(f"plan targets version {plan.base_version}, coordinator holds {self.model.version}")

        base = self.model
        public_keys = {op: participants[op].agreement.public_key for op in plan.participants}
        received: dict[str, ModelUpdate] = {}
        outcome: list[tuple[GlobalModel, AttributionScore, RoundRecord]] = []
        control = _encode_plan(plan) + base.encode() + codec.enc_seq(codec.enc_bytes(public_keys[op]) for op in plan.participants)

        def finish() -> None:
            if outcome:
                return
            outcome.append(self._finalize(plan, base, received))

        def on_update(op: str, update: ModelUpdate):
            def deliver(_msg) -> None:
                if outcome or self.sim.now > plan.deadline:
                    return
                received[op] = update
                self._audit("update-commitment", update.encode())
                if len(received) == len(plan.participants):
                    finish()

            return deliver

        def on_control(op: str):
            def deliver(_msg) -> None:
                p = participants[op]
                if not p.online:
                    return
                noise_seed = derive_seed(self.seed, "dp-noise", plan.round_id, op)
                update, _ = p.build_update(plan, base, public_keys, noise_seed)

                def upload() -> None:
                    self.network.send_bytes(op, COORDINATOR, "model-update", update.encode(), on_update(op, update))

                self.sim.schedule(p.train_ms(plan.local_epochs), upload, f"train:{op}")

            return deliver

        def start() -> None:
            self._audit("round-start", _encode_plan(plan) + base.digest)
            for op in plan.participants:
                self.network.send_bytes(COORDINATOR, op, "control", control, on_control(op))

        self.sim.schedule_at(max(plan.start, self.sim.now), start, f"round-start:{plan.round_id}")
        self.sim.schedule_at(max(plan.deadline, self.sim.now), finish, f"round-deadline:{plan.round_id}")
        self.sim.run(stop=lambda: bool(outcome))
        if not outcome:
            finish()
        return outcome[0]

    def _finalize(
        self, plan: RoundPlan, base: GlobalModel, received: Mapping[str, ModelUpdate]
    ) -> tuple[GlobalModel, AttributionScore, RoundRecord]:
        # Aggregate in plan order so the result is independent of arrival order.
        updates = [received[op] for op in plan.participants if op in received]
        complete = len(updates) == len(plan.participants)
        if (plan.masking and not complete) or not updates:
            reason = "masked participant missed the deadline" if updates else "no update arrived"
            self._audit(
                "round-abort",
                codec.enc_int(plan.round_id) + codec.enc_str(reason) + codec.enc_seq(codec.enc_str(op) for op in sorted(received)),
            )
            score = withheld_attribution(plan.participants) if plan.masking else AttributionScore({}, "none")
            record = self._record(plan, base, base, updates, score, "aborted")
            return base, score, record

        model = aggregate(updates, base)
        if plan.masking:
            score = withheld_attribution([u.operator for u in updates])
        else:
            score = score_contributions(updates, base, self.eval_set)
        self._audit("round-result", model.encode() + model.digest + _encode_attribution(score))
        self.model = model
        self.models.append(model)
        record = self._record(plan, base, model, updates, score, "completed")
        return model, score, record

    def _record(
        self,
        plan: RoundPlan,
        base: GlobalModel,
        model: GlobalModel,
        updates: Sequence[ModelUpdate],
        score: AttributionScore,
        status: str,
    ) -> RoundRecord:
        record = RoundRecord(
            round_id=plan.round_id,
            status=status,
            base_version=base.version,
            version=model.version,
            participants=plan.participants,
            received=tuple(u.operator for u in updates),
            start=plan.start,
            end=self.sim.now,
            eval_loss=self.eval_loss(model),
            attribution=dict(score.scores),
            attribution_method=score.method,
            masked=plan.masking,
            model_digest=model.digest.hex(),
        )
        self.history.append(record)
        return record


def run_round(
    plan: RoundPlan,
    operators: Mapping[str, Participant] | Iterable[Participant],
    network: Network,
    ledger: Ledger,
    *,
    model: GlobalModel,
    eval_set: Sequence[tuple[float, float]],
    signer: Signer,
    seed: int = 0,
) -> tuple[GlobalModel, AttributionScore, RoundRecord]:
    """One-shot round with a throwaway coordinator."""
    coord = Coordinator(network, ledger, signer, model, eval_set, seed)
    return coord.run_round(plan, operators)
