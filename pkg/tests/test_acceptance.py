"""Acceptance criteria AC1-AC10, one printed PASS/FAIL line each."""

import time
from dataclasses import replace
from functools import lru_cache

import pytest

from blowup_lab.checks import (
    check_decompose,
    check_ground_state,
    check_law,
    check_linops,
    check_profile,
    check_simulate,
)
from blowup_lab.cli import rate_study
from blowup_lab.config import (
    DecomposeCheckConfig,
    GroundStateConfig,
    LawConfig,
    LinopsConfig,
    ProfileConfig,
    RateStudyConfig,
    ValidationConfig,
)
import conftest


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


@lru_cache(maxsize=None)
def linops(dim):
    return timed(check_linops, replace(LinopsConfig(), dim=dim), 0)


@lru_cache(maxsize=None)
def profile_checks():
    return check_profile(ProfileConfig(), 0)


@lru_cache(maxsize=None)
def law_checks():
    return timed(check_law, LawConfig(), 0)


@pytest.fixture
def verdict(capsys):
    def emit(ac, checks, extra_ok=True, note=""):
        ok = bool(extra_ok) and all(c.passed for c in checks)
        bad = [c.name for c in checks if not c.passed]
        detail = note if ok else f"failed: {', '.join(bad) or note}"
        with capsys.disabled():
            print(f"\n{ac} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def pick(checks, *prefixes):
    return [c for c in checks if c.name.startswith(prefixes)]


def test_ac01_ground_state(verdict):
    checks, secs = timed(check_ground_state, GroundStateConfig(), 0)
    err = checks[0].value
    verdict("AC1", checks, secs < 10, f"max |Q - exact| = {err:.1e}, {secs:.1f} s")


def test_ac02_operator_identities(verdict):
    (c1, s1), (c2, s2) = linops(1), linops(2)
    ids = pick(c1, "Lminus", "Lplus") + pick(c2, "Lminus", "Lplus")
    worst = max(c.value for c in ids if not c.name.endswith("_order"))
    order = min(c.value for c in ids if c.name.endswith("_order"))
    verdict("AC2", ids, s1 + s2 < 30,
            f"max residual {worst:.1e}, min order {order:.2f}, {s1 + s2:.1f} s (N=1,2)")


def test_ac03_coercivity(verdict):
    checks = pick(linops(1)[0], "coercivity")
    mu, spread = checks[0].value, checks[1].value
    verdict("AC3", checks, True, f"mu = {mu:.4f}, grid spread {spread:.1e}")


def test_ac04_profile(verdict):
    checks = pick(profile_checks(), "residual", "solvability", "beta_identity")
    worst = max(c.value for c in checks if c.name.startswith("residual"))
    verdict("AC4", checks, True, f"max residual {worst:.1e}, {len(checks)} checks")


def test_ac05_energy_expansion(verdict):
    checks = pick(profile_checks(), "energy_expansion")
    verdict("AC5", checks, True, f"ratio spread {checks[0].value:.2f}")


def test_ac06_lambert(verdict):
    checks = pick(law_checks()[0], "lambert", "wprop")
    verdict("AC6", checks, True,
            f"max W residual {max(c.value for c in checks[:2]):.1e}, bounds hold")


def test_ac07_law(verdict):
    checks, secs = law_checks()
    rest = [c for c in checks if not c.name.startswith(("lambert", "wprop"))]
    verdict("AC7", rest, secs < 60, f"{len(rest)} checks, {secs:.1f} s")


def test_ac08_simulator(verdict):
    checks, secs = timed(check_simulate, ValidationConfig(), 0)
    verdict("AC8", checks, secs < 300,
            f"L2 error {checks[0].value:.1e}, mass {checks[1].value:.0e}, "
            f"energy {checks[2].value:.0e}, {secs:.1f} s")


def test_ac09_modulation(verdict):
    checks = check_decompose(DecomposeCheckConfig(), 0)
    c1 = next(c for c in checks if c.name == "sandwich_c1").value
    c2 = next(c for c in checks if c.name == "sandwich_c2").value
    verdict("AC9", checks, True, f"recovery {checks[0].value:.0e}, c1 = {c1:.3f}, c2 = {c2:.3f}")


def test_ac10_rate_study(verdict, blowup_run):
    law_cfg = replace(RateStudyConfig(), source="law", exponent_tol=0.05)
    _, _, fits, checks = rate_study(law_cfg)
    synth = checks[0]
    a, b = blowup_run.fits["A"], blowup_run.fits["B"]
    secs = sum(conftest.BLOWUP_SECONDS)
    ok = (a.decades >= 1.0 and abs(a.exponent - 0.8) < 0.15 and a.rms < b.rms and secs < 900)
    verdict("AC10", [synth], ok,
            f"synthetic {fits['A'].exponent:.3f}, simulated {a.exponent:.3f} over "
            f"{a.decades:.2f} decades, rms A/B = {a.rms / b.rms:.2f}, {secs:.0f} s")
