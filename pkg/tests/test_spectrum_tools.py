"""Sweeps, resonance flagging, CSV export, threshold extrapolation."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fiberwave.errors import (
    DimensionMismatch,
    InsufficientSamples,
    IntervalContainsThreshold,
)
from fiberwave.spectrum_tools import export_spectrum, sweep, threshold_extrapolate

from conftest import dirichlet_edge_graph, dirichlet_lead, fabry_perot_line


def edge_eigenvalues(eps: float, length: float, count: int = 3) -> list[float]:
    return [1.0 + (math.pi * p * eps / length) ** 2 for p in range(1, count + 1)]


def test_sweep_clean_lead():
    sr = sweep(dirichlet_lead(), 0.1, 1.05, 2.0, 100)
    assert len(sr.rows) == 100
    assert all(r.certified for r in sr.rows)
    assert sr.flagged_intervals == []
    assert all(abs(r.abs_t_sq[0] - 1.0) < 1e-12 for r in sr.rows)


def test_sweep_flags_edge_eigenvalues():
    eps, length = 0.1, 1.0
    g = dirichlet_edge_graph(length)
    sr = sweep(g, eps, 1.05, 2.0, 100)
    step = (2.0 - 1.05) / 99
    eigs = edge_eigenvalues(eps, length)
    assert len(sr.flagged_intervals) == 3
    for e in eigs:
        assert any(lo - step <= e <= hi + step for lo, hi in sr.flagged_intervals)
    for lo, hi in sr.flagged_intervals:
        assert any(lo - step <= e <= hi + step for e in eigs)
    # uncertified rows carry the dip conditioning, certified ones stay clean
    for r in sr.rows:
        assert r.certified == (r.rcond >= sr.flag_tol)


def test_sweep_certified_rows_conserve_flux():
    sr = sweep(dirichlet_edge_graph(1.0), 0.1, 1.05, 2.0, 200)
    for r in sr.rows:
        if r.certified:
            assert np.max(np.abs(r.flux_residual)) <= 1e-10


def test_sweep_fabry_perot_all_pass():
    sr = sweep(fabry_perot_line(1.0), 0.1, 1.05, 2.0, 120)
    assert sr.flagged_intervals == []
    for r in sr.rows:
        assert np.max(np.abs(r.abs_t_sq - 1.0)) < 1e-12


def test_sweep_rejects_threshold_in_interval():
    with pytest.raises(IntervalContainsThreshold):
        sweep(dirichlet_lead(), 0.1, 3.0, 5.0, 10)  # contains threshold 4
    with pytest.raises(IntervalContainsThreshold):
        sweep(dirichlet_lead(), 0.1, 4.0, 4.5, 10)  # endpoint collides


def test_sweep_threads_deterministic(tmp_path):
    g = dirichlet_edge_graph(1.0)
    sr1 = sweep(g, 0.1, 1.05, 1.3, 60, threads=1)
    sr2 = sweep(g, 0.1, 1.05, 1.3, 60, threads=4)
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    export_spectrum(sr1, p1)
    export_spectrum(sr2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_export_minimal_and_flagged(tmp_path):
    sr = sweep(dirichlet_lead(), 0.1, 1.5, 1.6, 2)
    path = tmp_path / "s.csv"
    export_spectrum(sr, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "lambda,col,abs_t_sq,flux_residual,rcond,certified"
    assert len(lines) == 3  # header + 2 data rows

    sr2 = sweep(dirichlet_edge_graph(1.0), 0.1, 1.08, 1.12, 40)
    path2 = tmp_path / "f.csv"
    export_spectrum(sr2, path2)
    rows = path2.read_text().splitlines()[1:]
    flagged_rows = [r for r in rows if r.endswith(",0")]
    assert flagged_rows, "expected flagged rows inside the resonance interval"

    # re-export is byte-identical
    path3 = tmp_path / "f2.csv"
    export_spectrum(sr2, path3)
    assert path2.read_bytes() == path3.read_bytes()


# ---------------------------------------------------------------------------
# threshold extrapolation


def test_extrapolate_constant_model_exact():
    zs = (0.5, 0.4, 0.3, 0.2, 0.1)
    samples = [(1.0 + z * z, -np.eye(2)) for z in zs]
    fit = threshold_extrapolate(samples, 1.0)
    assert np.max(np.abs(fit.t0 + np.eye(2))) < 1e-12
    assert fit.residual < 1e-12


def test_extrapolate_scalar_toy():
    # generating function -exp(2iz); Taylor gives T(0) = -1, T'(0) = -2i.
    # A cubic least-squares fit on these five nodes carries ~3e-3 truncation
    # error in T(0) (measured; interpolation-grade accuracy needs degree 4).
    zs = (0.5, 0.4, 0.3, 0.2, 0.1)
    samples = [(1.0 + z * z, np.array([[-np.exp(2j * z)]])) for z in zs]
    fit = threshold_extrapolate(samples, 1.0)
    assert abs(fit.t0[0, 0] - (-1.0)) <= 3e-3
    assert abs(fit.t_prime[0, 0] - (-2j)) <= 6e-2
    assert fit.residual < 5e-4


def test_extrapolate_consistency_under_subset():
    zs = (0.5, 0.45, 0.4, 0.35, 0.3, 0.2, 0.1)
    samples = [(1.0 + z * z, np.array([[-np.exp(2j * z)]])) for z in zs]
    full = threshold_extrapolate(samples, 1.0)
    sub = threshold_extrapolate([samples[i] for i in (0, 2, 4, 5, 6)], 1.0)
    change = abs(full.t0[0, 0] - sub.t0[0, 0])
    assert change < 3 * max(full.residual, sub.residual)


def test_extrapolate_errors():
    zs = (0.5, 0.4, 0.3, 0.2)
    samples = [(1.0 + z * z, -np.eye(1)) for z in zs]
    with pytest.raises(InsufficientSamples):
        threshold_extrapolate(samples, 1.0)
    zs = (0.5, 0.4, 0.3, 0.2, 0.1)
    bad = [(1.0 + z * z, -np.eye(1 if z > 0.25 else 2)) for z in zs]
    with pytest.raises(DimensionMismatch):
        threshold_extrapolate(bad, 1.0)
    increasing = [(1.0 + z * z, -np.eye(1)) for z in reversed(zs)]
    with pytest.raises(ValueError):
        threshold_extrapolate(increasing, 1.0)
