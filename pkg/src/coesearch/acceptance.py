"""The thirteen acceptance criteria as runnable checks.

Each ``criterion_k`` returns a :class:`Outcome`. ``run_all`` prints one line
per criterion. ``scale`` multiplies trial counts; only ``scale=1`` is the real
gate, smaller values are for smoke runs.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .backend import BackendParams, LatticeBackend, PlaintextBackend, keygen
from .bench import measure, measure_e2e, speedup_estimate
from .bfscode import BfsCodeParams, bfscode_decode_records, bfscode_encode, record, stress_failure_rate
from .bloom import AlgebraicBloomFilter, HashFamily, ell_for_rate
from .coie import CoieParams, bfcoie_decode, bfcoie_encode, warmup_decode, warmup_encode
from .errors import DecryptionError
from .field import PRIME_60
from .pir import PirDatabase, RecordVault, pir_answer, pir_query, pir_reconstruct
from .pscoie import pscoie_decode, pscoie_encode

N_LARGE = 10_000
S_REFERENCE = 16
F_P = 16
Z_99 = 2.5758293035489  # two-sided 99% normal quantile


@dataclass
class Outcome:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.number:2d}. {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _trials(base: int, scale: float) -> int:
    return max(1, int(round(base * scale)))


def _indicator(backend, n: int, hot) -> list:
    bits = [0] * n
    for i in hot:
        bits[i - 1] = 1
    return backend.enc_many(bits)


# -- 1 ---------------------------------------------------------------------------

def criterion_1(scale: float = 1.0) -> Outcome:
    be = PlaintextBackend()
    counts = {sch: measure(sch, N_LARGE, S_REFERENCE, be, seed=1).hmult for sch in ("bf-coie", "ps-coie", "bfs-code")}
    return Outcome(1, "zero hmult in all encoders", all(v == 0 for v in counts.values()),
                   ", ".join(f"{k} hmult={v}" for k, v in counts.items()))


# -- 2, 3 ----------------------------------------------------------------------------

def criterion_2(scale: float = 1.0) -> Outcome:
    r = measure_e2e("ps-coie", N_LARGE, S_REFERENCE, PlaintextBackend(), seed=2)
    return Outcome(2, "PS-COIE fetch ciphertexts = s+1", r.fetch_ciphertexts == S_REFERENCE + 1,
                   f"count + encoding = {r.fetch_ciphertexts} (expected {S_REFERENCE + 1})")


def criterion_3(scale: float = 1.0) -> Outcome:
    r = measure_e2e("bf-coie", N_LARGE, S_REFERENCE, PlaintextBackend(), seed=3, f_p=F_P)
    return Outcome(3, "BF-COIE PIR instances = s+f_p", r.pir_instances == S_REFERENCE + F_P,
                   f"{r.pir_instances} PIR instances (expected {S_REFERENCE + F_P})")


# -- 4, 5 ----------------------------------------------------------------------------

@dataclass
class BfCoieTrialStats:
    trials: int
    false_negative_trials: int
    over_budget_trials: int
    max_false_positives: int


_bf_cache: dict[tuple, BfCoieTrialStats] = {}


def bf_coie_trials(trials: int, n: int = N_LARGE, s: int = S_REFERENCE, eta: int = 2, f_p: int = F_P,
                   seed: int = 4) -> BfCoieTrialStats:
    """Randomised BF-COIE round trips on the plaintext oracle, shared by
    criteria 4 and 5."""
    key = (trials, n, s, eta, f_p, seed)
    if key in _bf_cache:
        return _bf_cache[key]
    rng = random.Random(seed)
    be = PlaintextBackend()
    misses = over = worst = 0
    for t in range(trials):
        hot = rng.sample(range(1, n + 1), s)
        params = CoieParams(n, s, eta, f_p, seed=rng.getrandbits(64))
        enc = bfcoie_encode(be, _indicator(be, n, hot), params, check_sparsity=False)
        found = set(bfcoie_decode(enc.decrypt(be), params))
        if not found.issuperset(hot):
            misses += 1
        fp = len(found) - len(found.intersection(hot))
        worst = max(worst, fp)
        over += fp > f_p
    stats = BfCoieTrialStats(trials, misses, over, worst)
    _bf_cache[key] = stats
    return stats


def criterion_4(scale: float = 1.0) -> Outcome:
    st = bf_coie_trials(_trials(10_000, scale))
    return Outcome(4, "BF-COIE no false negatives", st.false_negative_trials == 0,
                   f"{st.false_negative_trials} of {st.trials} trials missed a planted index")


def criterion_5(scale: float = 1.0) -> Outcome:
    st = bf_coie_trials(_trials(10_000, scale))
    frac = st.over_budget_trials / st.trials
    return Outcome(5, "BF-COIE false positives within f_p", frac <= 1e-3,
                   f"{st.over_budget_trials}/{st.trials} trials had > {F_P} (rate {frac:.2e} <= 1e-3), "
                   f"worst {st.max_false_positives}")


# -- 6 ---------------------------------------------------------------------------

def criterion_6(scale: float = 1.0) -> Outcome:
    rng = random.Random(6)
    be = PlaintextBackend(PRIME_60)
    trials = _trials(1000, scale)
    bad = []
    for s in (8, 16, 64):
        wrong = 0
        for _ in range(trials):
            hot = sorted(rng.sample(range(1, N_LARGE + 1), s))
            enc = pscoie_encode(be, _indicator(be, N_LARGE, hot), s)
            if pscoie_decode(enc.decrypt(be), s, N_LARGE, be.modulus.p, rng=rng.getrandbits(32)) != hot:
                wrong += 1
        bad.append(wrong)
    return Outcome(6, "PS-COIE exact recovery", sum(bad) == 0,
                   f"{trials} trials per s in (8, 16, 64), p=2^60+33: failures {bad}")


# -- 7 ---------------------------------------------------------------------------

def criterion_7(scale: float = 1.0) -> Outcome:
    be = PlaintextBackend()
    stress_trials = _trials(10_000, scale)
    stress = stress_failure_rate(be, s=8, eta=4, ell=62, trials=stress_trials, n=256, seed=7)
    bound = 8 * 2.0 ** -4
    rng = random.Random(77)
    n, s = 1024, 8
    trials = _trials(1000, scale)
    fails = 0
    for t in range(trials):
        params = BfsCodeParams(n, s, lam=40, seed=rng.getrandbits(64))
        d = [0] * n
        want = set()
        for i in rng.sample(range(1, n + 1), s):
            r = record(params, i, rng.randrange(1 << params.mu))
            d[i - 1] = r.packed
            want.add((r.index, r.val))
        enc = bfscode_encode(be, be.enc_many(d), params)
        got = {(r.index, r.val) for r in bfscode_decode_records(enc.decrypt(be), params)}
        fails += got != want
    ok = stress <= bound and fails == 0
    return Outcome(7, "BFS-CODE recovery bound", ok,
                   f"stress (s=8, eta=4, ell=62) failure rate {stress:.4f} <= {bound} over {stress_trials}; "
                   f"lambda=40: {fails} failures over {trials}")


# -- 8 ---------------------------------------------------------------------------

def chernoff_bound(delta: float) -> float:
    return math.exp(delta) / (1 + delta) ** (1 + delta)


def criterion_8(scale: float = 1.0, s: int = 16, eta: int = 2, m: int = 48) -> Outcome:
    """Filters at false-positive rate at most ``1/m``; each trial makes ``m``
    non-member checks and counts the false positives."""
    trials = _trials(100_000, scale)
    ell = ell_for_rate(eta, s, m)
    deltas = (2, 4, 8)
    counts = np.zeros(trials, dtype=np.int64)
    universe = np.arange(s + m, dtype=np.uint64)
    for t in range(trials):
        fam = HashFamily(eta, ell, seed=t, domain_tag="chernoff")
        bf = AlgebraicBloomFilter(fam)
        bf.insert_many(universe[:s])
        counts[t] = int(bf.check_many(universe[s:]).sum())
    parts, ok = [], True
    for d in deltas:
        bound = chernoff_bound(d)
        emp = float((counts >= 1 + d).mean())
        allowance = Z_99 * math.sqrt(bound * (1 - bound) / trials)
        hit = emp <= bound + allowance
        ok &= hit
        parts.append(f"d={d}: {emp:.2e} <= {bound:.2e}{'' if hit else ' (violated)'}")
    return Outcome(8, "Chernoff tail of false-positive count", ok,
                   f"{trials} trials, ell={ell}, mean count {counts.mean():.3f}; " + "; ".join(parts))


# -- 9 ---------------------------------------------------------------------------

def criterion_9(scale: float = 1.0) -> Outcome:
    be = PlaintextBackend()
    n, s = 1024, 16
    rows = {}
    for sch in ("warmup", "bf-coie", "ps-coie", "bfs-code"):
        r = measure(sch, n, s, be, seed=9)  # raises on a formula mismatch
        rows[sch] = r
    w, b, p, c = rows["warmup"], rows["bf-coie"], rows["ps-coie"], rows["bfs-code"]
    t = CoieParams(n, s).t
    eta_code = BfsCodeParams(n, s).eta
    ok = (w.hadd <= n * 2 and b.hadd <= 2 * n * (t + 1) and p.smult == s * n and p.hadd == s * (n - 1)
          and c.hadd == eta_code * n)
    return Outcome(9, "operation-count formulas", ok,
                   f"warm-up hadd {w.hadd}<={2 * n}; BF-COIE hadd {b.hadd}<={2 * n * (t + 1)}; "
                   f"PS-COIE smult {p.smult}={s * n}, hadd {p.hadd}={s * (n - 1)}; "
                   f"BFS-CODE hadd {c.hadd}={eta_code * n}")


# -- 10 --------------------------------------------------------------------------

def _random_workload(rng: random.Random):
    scheme = rng.choice(("warmup", "bf-coie", "ps-coie", "bfs-code"))
    n = rng.randint(4, 96)
    s = rng.randint(0, min(8, n))
    return scheme, n, s, rng.sample(range(1, n + 1), s), rng.getrandbits(32)


def _run_workload(be, scheme, n, s, hot, seed):
    if scheme == "bfs-code":
        params = BfsCodeParams(n, s, seed=seed)
        vrng = random.Random(seed)
        d = [0] * n
        for i in hot:
            d[i - 1] = record(params, i, vrng.randrange(1 << params.mu)).packed
        enc = bfscode_encode(be, be.enc_many(d), params)
        cells = enc.decrypt(be)
        return cells, sorted((r.index, r.val) for r in bfscode_decode_records(cells, params))
    cts = _indicator(be, n, hot)
    if scheme == "warmup":
        bf = warmup_encode(be, cts, s, seed=seed).decrypt(be)
        return bf.cells.tolist(), warmup_decode(bf, n)
    if scheme == "bf-coie":
        params = CoieParams(n, s, seed=seed)
        levels = bfcoie_encode(be, cts, params).decrypt(be)
        return [lv.cells.tolist() for lv in levels], bfcoie_decode(levels, params)
    w = pscoie_encode(be, cts, s).decrypt(be)
    return w, pscoie_decode(w, s, n, be.modulus.p)


def criterion_10(scale: float = 1.0) -> Outcome:
    rng = random.Random(10)
    params = BackendParams.provision(lwe_dimension=16, max_additions=2**16)
    lattice = LatticeBackend(keygen(params, 10))
    oracle = PlaintextBackend(params.plaintext_modulus)
    trials = _trials(1000, scale)
    mismatches = overflows = 0
    for _ in range(trials):
        work = _random_workload(rng)
        want = _run_workload(oracle, *work)
        try:
            got = _run_workload(lattice, *work)
        except DecryptionError:
            overflows += 1
            continue
        mismatches += got != want
    return Outcome(10, "lattice backend matches the oracle", mismatches == 0 and overflows == 0,
                   f"{trials} workloads: {mismatches} mismatches, {overflows} noise overflows")


# -- 11 --------------------------------------------------------------------------

def criterion_11(scale: float = 1.0) -> Outcome:
    from .protocol import Predicate, SchemeConfig, SearchClient, SearchServer, SocketTransport, TcpHost, spawn_loopback

    n = 1024
    expected_rounds = {"bf-coie": 3, "ps-coie": 3, "bfs-code": 2}
    problems: list[str] = []
    runs = 0
    for kind in ("loopback", "socket"):
        server = SearchServer()
        host = None
        if kind == "loopback":
            transport = spawn_loopback(server)
        else:
            host = TcpHost(server).start()
            transport = SocketTransport.connect(*host.address)
        client = SearchClient(transport, PlaintextBackend(), config=SchemeConfig(seed=11), dummy_seed=11)
        rng = random.Random(f"criterion-11/{kind}")
        try:
            for s in (0, 1, 8, 16):
                values = [rng.randrange(100, 1 << 16) for _ in range(n)]
                picks = rng.sample(range(1, n + 1), 2 * s)
                group_a, group_b = sorted(picks[:s]), sorted(picks[s:])
                for i in group_a:
                    values[i - 1] = 1
                for i in group_b:
                    values[i - 1] = 2
                db_id = f"{kind}-{s}"
                client.upload(db_id, values)
                for scheme in ("bf-coie", "ps-coie", "bfs-code"):
                    ra = client.search(db_id, scheme, Predicate.parse("eq:1"))
                    rb = client.search(db_id, scheme, Predicate.parse("eq:2"))
                    runs += 2
                    tag = f"{kind}/{scheme}/s={s}"
                    if ra.indices != group_a or rb.indices != group_b:
                        problems.append(f"{tag}: wrong result")
                    if ra.values != [1] * s or rb.values != [2] * s:
                        problems.append(f"{tag}: wrong values")
                    if ra.transcript.rounds != expected_rounds[scheme]:
                        problems.append(f"{tag}: {ra.transcript.rounds} rounds")
                    if ra.transcript.shape() != rb.transcript.shape():
                        problems.append(f"{tag}: transcript shapes differ")
        finally:
            transport.close()
            if host is not None:
                host.stop()
    return Outcome(11, "end-to-end protocols", not problems,
                   f"{runs} searches over loopback and TCP; rounds 3/3/2; "
                   + ("all planted sets, equal shapes" if not problems else "; ".join(problems[:4])))


# -- 12 --------------------------------------------------------------------------

def criterion_12(scale: float = 1.0) -> Outcome:
    be = PlaintextBackend()
    vault = RecordVault(bytes(16))
    rng = random.Random(12)
    wrong = 0
    size_sets = []
    checked = 0

    def roundtrip(n, idx, db, recs):
        nonlocal wrong, checked
        q = pir_query(be, idx, n)
        reply = pir_answer(be, db, q)
        got = pir_reconstruct(be, idx, n, db.record_len, reply)
        wrong += got != recs[idx - 1]
        checked += 1
        return len(q), len(reply)

    for n in list(range(1, 65)) + [N_LARGE]:
        recs = [vault.seal(i, rng.randrange(1 << 16).to_bytes(2, "big")) for i in range(1, n + 1)]
        db = PirDatabase(recs, be.modulus.p)
        idxs = range(1, n + 1) if n <= 64 else rng.sample(range(1, n + 1), _trials(100, scale))
        size_sets.append({roundtrip(n, i, db, recs) for i in idxs})
    constant = all(len(sz) == 1 for sz in size_sets)
    return Outcome(12, "PIR correctness", wrong == 0 and constant,
                   f"{checked} retrievals (all indices n<=64, sampled at n={N_LARGE}): {wrong} wrong; "
                   f"sizes index-independent: {constant}")


# -- 13 --------------------------------------------------------------------------

def criterion_13(scale: float = 1.0) -> Outcome:
    est = speedup_estimate(16, 1.5, 1800)
    return Outcome(13, "speedup model ~26X", abs(est - 26) <= 0.5,
                   f"s(m+1)/(m+1/F) at s=16, m=1.5, F=1800 = {est:.3f}, target 26 +/- 0.5")


CRITERIA: dict[int, Callable[[float], Outcome]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11, 12: criterion_12,
    13: criterion_13,
}


def run_criterion(k: int, scale: float = 1.0) -> Outcome:
    start = time.perf_counter()
    try:
        out = CRITERIA[k](scale)
    except Exception as exc:  # a crash is a failure, reported on its line
        out = Outcome(k, CRITERIA[k].__name__, False, f"raised {type(exc).__name__}: {exc}")
    out.seconds = time.perf_counter() - start
    return out


def run_all(only=None, scale: float = 1.0, echo: Callable[[str], None] = print) -> list[Outcome]:
    results = []
    for k in sorted(only or CRITERIA):
        out = run_criterion(k, scale)
        echo(out.line())
        results.append(out)
    passed = sum(r.passed for r in results)
    echo(f"{passed}/{len(results)} criteria passed")
    return results
