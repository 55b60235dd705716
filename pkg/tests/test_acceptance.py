"""Acceptance criteria. Each test prints one PASS/FAIL line."""

import json
import random
import subprocess
import sys
import time

import pytest

from kflow.dsl import ParseError, parse, render
from kflow.engine import analyze, g_iterates, replay, saturate, saturate_naive
from kflow.model import OscarState, knowledge, merge, project_rules, simulate_full
from kflow.protocols import BUILTINS, cpuf_renewal, ns, nsl, otway_rees
from kflow.rules import GroundRule
from randomized import OSCAR, full_flow, ground_rules, multi_adversary_flow


@pytest.fixture
def verdict(capsys):
    def report(n, title, ok, detail=""):
        with capsys.disabled():
            line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {title}"
            print("\n" + line + (f" ({detail})" if detail else ""))
        assert ok, detail

    return report


NB = "nonce{seed=enc{key=B, plain={A, nonce{seed=eps#2, id=A}}}, id=B}"
NA = "nonce{seed=eps#2, id=A}"


def test_1_ns_attack(verdict):
    start = time.perf_counter()
    r = analyze(ns(), sessions=2, honest=2, jobs=1)
    elapsed = time.perf_counter() - start
    ciphers = sorted(s["value"] for s in r.trace if s["value"].startswith("enc"))
    expected = sorted(
        [
            f"enc{{key=O, plain={{A, {NA}}}}}",
            f"enc{{key=B, plain={{A, {NA}}}}}",
            f"enc{{key=A, plain={{{NB}, {NA}}}}}",
            f"enc{{key=O, plain={{{NB}}}}}",
        ]
    )
    values = {s["value"] for s in r.trace}
    ok = r.verdict == "Attack" and ciphers == expected and {NA, NB} <= values and elapsed < 5
    verdict(1, "NS attack with the four parallel-session ciphers", ok, f"{r.verdict}, {len(r.trace)} steps, {elapsed:.2f}s")


def test_2_nsl_secure(verdict):
    start = time.perf_counter()
    r = analyze(nsl(), sessions=2, honest=2, jobs=1)
    elapsed = time.perf_counter() - start
    ok = r.verdict == "Secure(2)" and r.bindings_explored == 20 and elapsed < 60
    verdict(2, "NSL secure at two sessions", ok, f"{r.verdict}, {r.bindings_explored} bindings, {elapsed:.2f}s")


def test_3_otway_rees_type_flaw(verdict):
    proto = otway_rees()
    r = analyze(proto, sessions=1, honest=2, jobs=1)
    witness = {w["variable"]: w["value"] for w in r.witness}
    m4 = [s for s in r.trace if s["rule"] == "or4"]
    known = {s["value"] for s in r.trace}
    key = witness.get("Q", "")
    members = [m.strip() for m in key.strip("{}").split(",")] if key else []
    ok = (
        r.verdict == "Attack"
        and len(m4) == 1
        and key in m4[0]["value"]
        and members
        and all(m in known for m in members)
    )
    verdict(3, "Otway-Rees type flaw at w=1", ok, f"{r.verdict}, m4 key {key}")


def test_4_cpuf_secure(verdict):
    start = time.perf_counter()
    r = analyze(cpuf_renewal(), sessions=1, jobs=1)
    elapsed = time.perf_counter() - start
    ok = r.verdict == "Secure(1)" and elapsed < 60
    verdict(4, "CPUF renewal secure at one session", ok, f"{r.verdict}, {elapsed:.2f}s")


def test_5_projection_lemma(verdict):
    rng = random.Random(20041)
    failures, grew = 0, 0
    for _ in range(300):
        principals, rules, k0 = full_flow(rng, max_values=6, max_rules=8, max_honest=3)
        x0 = frozenset(v for p, v in k0 if p == OSCAR)
        steps = len(knowledge(k0)) + 2
        gs = g_iterates(x0, project_rules(rules, k0, OSCAR), steps)
        k = k0
        for n in range(steps + 1):
            if frozenset(v for p, v in k if p == OSCAR) != gs[n]:
                failures += 1
                break
            k = simulate_full(rules, k, steps=1)
        grew += gs[-1] != x0
    verdict(5, "Oscar projection of f_R equals g iteration", failures == 0, f"300 instances, {grew} non-trivial, {failures} mismatches")


def test_6_merge_soundness(verdict):
    rng = random.Random(20042)
    violations = 0
    for _ in range(300):
        principals, rules, k0, adv = multi_adversary_flow(rng)
        _, merged_max, _ = merge(principals, [], simulate_full(rules, k0), adv)
        _, mrules, mk0 = merge(principals, rules, k0, adv)
        violations += not merged_max <= simulate_full(mrules, mk0)
    verdict(6, "merging adversaries loses no knowledge", violations == 0, f"300 instances, {violations} violations")


def _algebra_ok(rules, draws, universe, rng) -> str:
    s = saturate(OscarState(draws, draws), rules)
    if saturate(s, rules).known != s.known:
        return "not idempotent"
    if s.known != saturate_naive(draws, rules):
        return "differs from naive closure"
    sub = frozenset(rng.sample(sorted(draws), len(draws) // 2))
    if not saturate(OscarState(sub, sub), rules).known <= s.known:
        return "not monotone"
    shuffled = list(rules)
    rng.shuffle(shuffled)
    relabelled = [GroundRule(f"z{rng.randint(0, 5)}", r.premises, r.conclusion, r.key) for r in shuffled]
    if saturate(OscarState(draws, draws), relabelled).known != s.known:
        return "depends on rule order"
    for v, (prem, _) in s.learns.items():
        if any(s.depth[p] >= s.depth[v] for p in prem):
            return "learns has a cycle"
    closure = set(draws)
    for v in sorted(s.learns, key=s.depth.get):
        closure.add(v)
    if closure != s.known:
        return "known is not draws closed under learns"
    if not s.known <= universe:
        return "value outside the universe"
    return ""


def test_7_engine_algebra(builtin_analyses, verdict):
    rng = random.Random(20043)
    problems = []
    for _ in range(300):
        values, rules, draws = ground_rules(rng)
        msg = _algebra_ok(rules, draws, frozenset(values), rng)
        if msg:
            problems.append(msg)
    for name, a in builtin_analyses.items():
        if any(not (r.premises | {r.conclusion}) <= a.universe.values for r in a.rules):
            problems.append(f"{name}: rule outside universe")
        msg = _algebra_ok(a.rules, a.state.draws, a.universe.values, rng)
        if msg:
            problems.append(f"{name}: {msg}")
        if a.trace is not None and not set(a.trace.targets) <= replay(a.trace, a.state.draws):
            problems.append(f"{name}: trace replay")
    verdict(7, "saturation algebra on random and built-in scenarios", not problems, "; ".join(problems) or "300 random + 4 built-in")


def _cli_json(*argv):
    r = subprocess.run([sys.executable, "-m", "kflow", "analyze", *argv, "--json", "-"], capture_output=True, text=True)
    data = json.loads(r.stdout)
    data.pop("ms")
    return json.dumps(data, sort_keys=True)


def test_8_determinism(verdict):
    runs = [
        ["--protocol", "ns", "--sessions", "2"],
        ["--protocol", "nsl", "--sessions", "2"],
        ["--protocol", "otway_rees", "--sessions", "1"],
        ["--protocol", "cpuf_renewal", "--sessions", "1"],
    ]
    diffs = []
    for argv in runs:
        a = _cli_json(*argv, "--jobs", "1")
        b = _cli_json(*argv, "--jobs", "1")
        c = _cli_json(*argv, "--jobs", "2")
        if not a == b == c:
            diffs.append(argv[1])
    verdict(8, "identical JSON across runs and worker counts", not diffs, ", ".join(diffs) or "4 commands x 3 runs")


def test_9_dsl_round_trip_and_fuzz(verdict):
    bad_round_trip = [n for n, make in BUILTINS.items() if parse(render(make())) != make()]
    rng = random.Random(20044)
    seeds = [render(make()).encode() for make in BUILTINS.values()]
    crashes = 0
    for i in range(10_000):
        if i % 2:
            data = bytes(rng.randrange(256) for _ in range(rng.randrange(120)))
        else:
            data = bytearray(rng.choice(seeds))
            for _ in range(rng.randrange(1, 8)):
                data[rng.randrange(len(data))] = rng.randrange(256)
            data = bytes(data)
        try:
            parse(data)
        except ParseError:
            pass
        except Exception:
            crashes += 1
    ok = not bad_round_trip and crashes == 0
    verdict(9, "DSL round-trip and byte fuzzing", ok, f"round-trip failures {bad_round_trip}, {crashes} crashes in 10000 inputs")
