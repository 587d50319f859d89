"""Multi-scale block scheduling with query/replay batching.

A block of nominal length ``b * 2^n`` hosts learner instances at scales
``m = n .. 0``. An instance at scale ``m`` may start at any offset
``tau`` (a multiple of ``b * 2^m`` from the block start) and nominally
spans ``b * 2^m`` rounds; it is initiated independently with probability
``2^((m - n) / 2)``, so the full-span instance at ``m = n, tau = 0`` is
always present and the block is fully covered.

Hierarchical masking resolves overlaps: a round belongs to the
finest-scale initiated instance whose nominal span contains it, making
the active sets a partition of the block. Each instance queries on a
prefix of its active rounds -- ``max(1, floor(|active| / b))`` of them --
and replays its own query-batch arm frequencies on the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyReplay
from .policies import Ucb1State


@dataclass(frozen=True)
class InstanceId:
    """Identity of one scheduled instance inside a block."""

    block_scale: int  # n
    scale: int  # m, in [0, n]
    offset: int  # tau: rounds from block start, multiple of b * 2^m

    def __post_init__(self):
        if not (0 <= self.scale <= self.block_scale):
            raise ValueError(f"scale {self.scale} outside [0, {self.block_scale}]")


class Instance:
    """One scheduled learner instance and its run-time state.

    ``active_rounds`` and ``query_rounds`` hold 1-based round indices
    relative to the block start, in time order; ``query_rounds`` is
    always a prefix of ``active_rounds``. ``replay_freq`` counts how
    often each arm was selected on this instance's query rounds and
    drives arm choice on its non-query rounds.
    """

    __slots__ = (
        "id",
        "span",
        "active_rounds",
        "query_rounds",
        "policy",
        "replay_freq",
        "_replay_cum",
    )

    def __init__(self, id: InstanceId, span_length: int, arms: int | None = None,
                 policy=None):
        self.id = id
        self.span = (id.offset + 1, id.offset + span_length)
        self.active_rounds: list[int] = []
        self.query_rounds: list[int] = []
        self.policy = policy if policy is not None else (
            Ucb1State(arms) if arms is not None else None
        )
        self.replay_freq = np.zeros(arms, dtype=np.int64) if arms is not None else None
        self._replay_cum = None

    def record_query(self, arm: int) -> None:
        """Count a query-round selection into the replay frequencies."""
        self.replay_freq[arm] += 1
        self._replay_cum = None

    def replay_arm(self, rng: np.random.Generator) -> int:
        """Sample an arm proportionally to the recorded frequencies."""
        if self._replay_cum is None:
            total = int(self.replay_freq.sum())
            if total == 0:
                raise EmptyReplay(
                    f"instance {self.id} asked to replay before any query round"
                )
            self._replay_cum = np.cumsum(self.replay_freq)
        u = rng.random() * self._replay_cum[-1]
        return int(np.searchsorted(self._replay_cum, u, side="right"))

    def __repr__(self) -> str:
        return (
            f"Instance(n={self.id.block_scale}, m={self.id.scale}, "
            f"tau={self.id.offset}, active={len(self.active_rounds)}, "
            f"queries={len(self.query_rounds)})"
        )


@dataclass
class BlockSchedule:
    """All initiated instances of one block, with resolved round ownership.

    ``length`` is the effective block length (the nominal ``b * 2^n``
    unless clipped at the horizon). After resolution, ``owner[r - 1]``
    gives the index into ``instances`` of the instance active at
    relative round ``r`` and ``is_query[r - 1]`` marks its query batch.
    """

    block_scale: int
    ratio: int  # b
    length: int
    instances: list[Instance] = field(default_factory=list)
    owner: np.ndarray | None = None
    is_query: np.ndarray | None = None

    @property
    def nominal_length(self) -> int:
        return self.ratio * 2**self.block_scale


def schedule_block(
    n: int,
    b: int,
    stream_or_rng,
    length: int | None = None,
    arms: int | None = None,
    policy_factory=None,
) -> BlockSchedule:
    """Draw the instance initiations for one block.

    Offsets run over multiples of ``b``; at offset ``tau`` every scale
    ``m`` with ``tau`` divisible by ``b * 2^m`` is eligible and initiates
    independently with probability ``2^((m - n) / 2)``. One uniform is
    consumed per eligible (tau, m) pair, so the draw count is a function
    of ``n`` alone.
    """
    if n < 0 or b < 2:
        raise ValueError(f"need n >= 0 and b >= 2, got n={n}, b={b}")
    rng = stream_or_rng if isinstance(stream_or_rng, np.random.Generator) else (
        stream_or_rng.generator()
    )
    nominal = b * 2**n
    eff_length = nominal if length is None else min(int(length), nominal)
    schedule = BlockSchedule(block_scale=n, ratio=b, length=eff_length)

    def make_policy():
        if policy_factory is not None:
            return policy_factory(arms)
        return Ucb1State(arms) if arms is not None else None

    for tau in range(0, nominal, b):
        for m in range(n, -1, -1):
            period = b * 2**m
            if tau % period != 0:
                continue
            p = 2.0 ** ((m - n) / 2.0)
            if rng.random() < p:
                inst = Instance(
                    InstanceId(block_scale=n, scale=m, offset=tau),
                    span_length=period,
                    arms=arms,
                    policy=make_policy() if arms is not None else None,
                )
                schedule.instances.append(inst)
    return schedule


def resolve_active_sets(schedule: BlockSchedule) -> BlockSchedule:
    """Assign every block round to the finest initiated instance covering it.

    Fills ``owner`` and each instance's ``active_rounds``. Rounds beyond
    the effective block length (horizon clipping) are dropped before
    assignment. The result is a partition: each surviving round is
    active in exactly one instance.
    """
    length = schedule.length
    owner = np.full(length, -1, dtype=np.int64)
    # Finest scale first; same-scale spans are disjoint by construction.
    order = sorted(range(len(schedule.instances)),
                   key=lambda i: schedule.instances[i].id.scale)
    for idx in order:
        inst = schedule.instances[idx]
        start, stop = inst.span
        stop = min(stop, length)
        if start > stop:
            inst.active_rounds = []
            continue
        window = owner[start - 1 : stop]
        free = window == -1
        window[free] = idx
        inst.active_rounds = [int(r) for r in np.nonzero(free)[0] + start]
    schedule.owner = owner
    return schedule


def split_batches(instance: Instance, b: int) -> Instance:
    """Split active rounds into the query prefix and the replay remainder.

    The query batch takes the first ``max(1, floor(|active| / b))``
    active rounds in time order; instances left with no active rounds
    get none.
    """
    size = len(instance.active_rounds)
    q = max(1, size // b) if size >= 1 else 0
    instance.query_rounds = instance.active_rounds[:q]
    return instance


def build_block(
    n: int,
    b: int,
    arms: int,
    stream_or_rng,
    length: int | None = None,
    policy_factory=None,
) -> BlockSchedule:
    """Schedule, resolve and batch one block, ready for the run loop."""
    schedule = schedule_block(
        n, b, stream_or_rng, length=length, arms=arms, policy_factory=policy_factory
    )
    resolve_active_sets(schedule)
    is_query = np.zeros(schedule.length, dtype=bool)
    for inst in schedule.instances:
        split_batches(inst, b)
        for r in inst.query_rounds:
            is_query[r - 1] = True
    schedule.is_query = is_query
    return schedule


def _ranges(rounds: list[int]) -> str:
    """Compress sorted round indices into 'a-b,c,d-e' notation."""
    if not rounds:
        return "-"
    parts = []
    lo = prev = rounds[0]
    for r in rounds[1:]:
        if r == prev + 1:
            prev = r
            continue
        parts.append(f"{lo}-{prev}" if prev > lo else f"{lo}")
        lo = prev = r
    parts.append(f"{lo}-{prev}" if prev > lo else f"{lo}")
    return ",".join(parts)


def format_block_schedule(schedule: BlockSchedule) -> str:
    """Human-readable listing of a block's instances and their batches."""
    lines = [
        f"block n={schedule.block_scale} b={schedule.ratio} "
        f"length={schedule.length} instances={len(schedule.instances)}"
    ]
    for inst in sorted(schedule.instances, key=lambda i: (-i.id.scale, i.id.offset)):
        lines.append(
            f"  m={inst.id.scale} tau={inst.id.offset:>6} "
            f"span=[{inst.span[0]},{inst.span[1]}] "
            f"active={_ranges(inst.active_rounds)} "
            f"query={_ranges(inst.query_rounds)}"
        )
    return "\n".join(lines)
