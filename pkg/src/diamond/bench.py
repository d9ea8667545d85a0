"""Measurement harness: scheme timings, offline storage, radio-node energy.

Timing methodology: every run executes at least the requested operation
count with a warm cache, the offline and online phases are clocked
separately inside the same run (so TOTAL = OFFLINE + ONLINE holds per
row by construction), and the reported value is the median over the
requested number of runs, in nanoseconds per operation.

The energy model is the MICAz sensor-node profile: 4.07 nJ per CPU
cycle and 0.168 uJ per transmitted bit.  Cycle counts either come from
the caller or from wall-clock times scaled by a configurable clock
frequency.
"""

from __future__ import annotations

import math
import statistics
import time
from dataclasses import dataclass
from enum import Enum

from . import faae, famac
from .famac import AggMode
from .faae import SchemeConfig, SchemeId, SecretMaterial, make_config
from .keychain import LABEL_FSE, UpdateMechanism, build_chain
from .util import DeterministicRng, zeroize

E_CPU_NJ_PER_CYCLE = 4.07
E_TX_UJ_PER_BIT = 0.168

DEFAULT_MSG_LENS = (16, 64, 128)
DEFAULT_BATCHES = tuple(2 ** k for k in range(11))
DEFAULT_RUNS = 5
DEFAULT_OPS = 1000

CSV_HEADER = "scheme,msg_len,batch,phase,ns_per_op,bytes_storage"


class Phase(Enum):
    OFFLINE = "OFFLINE"
    ONLINE = "ONLINE"
    TOTAL = "TOTAL"
    AVERDEC_ONLINE = "AVERDEC_ONLINE"
    E2E = "E2E"


@dataclass(frozen=True)
class BenchRecord:
    scheme_id: SchemeId
    msg_len: int
    batch: int
    phase: Phase
    ns_per_op: int
    ops: int
    bytes_storage: int

    def csv_row(self) -> str:
        return (f"{self.scheme_id.wire_name},{self.msg_len},{self.batch},"
                f"{self.phase.value},{self.ns_per_op},{self.bytes_storage}")


@dataclass(frozen=True)
class EnergyModel:
    """MICAz energy constants, overridable for other radios/MCUs."""

    cpu_hz: float
    e_cpu_nj: float = E_CPU_NJ_PER_CYCLE
    e_tx_uj_per_bit: float = E_TX_UJ_PER_BIT

    def cpu_joules(self, cycles: float) -> float:
        return cycles * self.e_cpu_nj * 1e-9

    def tx_joules(self, wire_bytes: int) -> float:
        return 8 * wire_bytes * self.e_tx_uj_per_bit * 1e-6

    def total_joules(self, cycles: float, wire_bytes: int) -> float:
        return self.cpu_joules(cycles) + self.tx_joules(wire_bytes)

    def cycles_for(self, seconds: float) -> float:
        return seconds * self.cpu_hz


def _bench_config(scheme: SchemeId, msg_len: int, batch: int, ops: int,
                  agg_mode: AggMode | None = None) -> SchemeConfig:
    n = batch * math.ceil(max(ops, 1) / batch)
    return make_config(scheme, n=n, b=batch, msg_len=msg_len, agg_mode=agg_mode)


def _fresh_state(config: SchemeConfig, seed: str):
    rng = DeterministicRng(seed)
    material = SecretMaterial.generate(config, rng)
    state = faae.keygen_from_material(config, material, ctr=2 ** 64)
    material.wipe()
    return state


def _measure_authenc(config: SchemeConfig, ops: int, seed: str,
                     depth: int) -> tuple[float, float]:
    """One run; returns (offline_ns, online_ns) per operation."""
    state = _fresh_state(config, seed)
    message = bytes(config.msg_len)
    t_off = 0
    t_on = 0
    done = 0
    clock = time.perf_counter_ns
    while done < ops:
        chunk = min(config.b if depth == 0 else depth, config.n - state.period + 1,
                    ops - done)
        if chunk < 1:
            break
        t0 = clock()
        packets = faae.precompute(state, chunk)
        t1 = clock()
        for pkt in packets:
            faae.authenc_online(state, message, pkt)
        t2 = clock()
        t_off += t1 - t0
        t_on += t2 - t1
        done += chunk
    return t_off / done, t_on / done


def _measure_averdec_online(config: SchemeConfig, ops: int, seed: str) -> float:
    """Online verify+decrypt cost per message over whole epochs."""
    sender = _fresh_state(config, seed)
    receiver = _fresh_state(config, seed)
    message = bytes(config.msg_len)
    clock = time.perf_counter_ns
    t_on = 0
    done = 0
    while done < ops:
        count = min(config.b, config.n - sender.period + 1, max(ops - done, 1))
        if count < 1:
            break
        start = sender.period
        acc = None
        cts = []
        for pkt in faae.precompute(sender, count):
            ct, tag = faae.authenc_online(sender, message, pkt)
            cts.append(ct)
            acc = famac.aggregate(acc, tag, config.agg_mode,
                                  period=pkt.period, epoch_size=config.b)
        pre = faae.averdec_offline(receiver, count)
        t0 = clock()
        faae.averdec_online(receiver, cts, acc, pre)
        t1 = clock()
        t_on += t1 - t0
        done += count
    return t_on / done


def measure_update_policy(mechanism: UpdateMechanism, ops: int = DEFAULT_OPS,
                          runs: int = DEFAULT_RUNS, chains: int = 3) -> float:
    """ns per period for one full key-state update under a policy.

    Each period advances ``chains`` independent sub-chains, exactly as a
    composed key state does; the walk is batched the same way the offline
    phase batches it.
    """
    samples = []
    for r in range(runs):
        built = [build_chain(mechanism, bytes([c + 1] * 16), ops + 1, LABEL_FSE)
                 for c in range(chains)]
        t0 = time.perf_counter_ns()
        for chain in built:
            for key in chain.take_keys(ops):
                zeroize(key)
        t1 = time.perf_counter_ns()
        samples.append((t1 - t0) / ops)
    return statistics.median(samples)


def run_grid(schemes=tuple(SchemeId), msg_lens=DEFAULT_MSG_LENS,
             batches=DEFAULT_BATCHES, runs: int = DEFAULT_RUNS,
             ops: int = DEFAULT_OPS, depth: int = 0,
             phases: tuple[Phase, ...] = tuple(Phase)) -> list[BenchRecord]:
    """The full measurement grid; returns one record per (config, phase)."""
    records = []
    for scheme in schemes:
        for msg_len in msg_lens:
            for batch in batches:
                config = _bench_config(scheme, msg_len, batch, ops)
                storage = faae.offline_storage_bytes(config)
                offs, ons = [], []
                for r in range(runs):
                    off, on = _measure_authenc(config, ops, f"bench-{r}", depth)
                    offs.append(off)
                    ons.append(on)
                off_ns = statistics.median(offs)
                on_ns = statistics.median(ons)
                by_phase = {
                    Phase.OFFLINE: off_ns,
                    Phase.ONLINE: on_ns,
                    Phase.TOTAL: off_ns + on_ns,
                }
                if Phase.AVERDEC_ONLINE in phases or Phase.E2E in phases:
                    ver = statistics.median(
                        [_measure_averdec_online(config, ops, f"bench-{r}")
                         for r in range(runs)])
                    by_phase[Phase.AVERDEC_ONLINE] = ver
                    by_phase[Phase.E2E] = off_ns + on_ns + ver * batch
                for phase in phases:
                    records.append(BenchRecord(scheme, msg_len, batch, phase,
                                               int(round(by_phase[phase])), ops, storage))
    return records


def to_csv(records: list[BenchRecord]) -> str:
    return "\n".join([CSV_HEADER] + [r.csv_row() for r in records]) + "\n"
