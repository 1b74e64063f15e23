"""Temporal-mode filter shapes, norms and grid sampling."""

import numpy as np
import pytest

from fluotomo.errors import FilterError
from fluotomo.filters import (
    FILTER_KINDS,
    FilterSpec,
    evaluate_filter,
    filter_bandwidth,
    filter_norm,
    sampled_weights,
)


def test_kinds_frozen():
    assert FILTER_KINDS == ("boxcar", "gaussian")


def test_spec_validation():
    with pytest.raises(FilterError):
        FilterSpec("triangle", 10.0, 1.0)
    with pytest.raises(FilterError):
        FilterSpec("boxcar", 10.0, 0.0)
    with pytest.raises(FilterError):
        FilterSpec("boxcar", 10.0, -1.0)
    with pytest.raises(FilterError):
        FilterSpec("boxcar", -0.5, 1.0)


def test_boxcar_shape():
    f = FilterSpec("boxcar", 10.0, 4.0)
    assert f.support() == (10.0, 14.0)
    assert f.center == 12.0
    amp = 1.0 / 2.0
    assert evaluate_filter(f, 10.0) == pytest.approx(amp)
    assert evaluate_filter(f, 13.999) == pytest.approx(amp)
    assert evaluate_filter(f, 9.999) == 0.0
    # half-open on the right
    assert evaluate_filter(f, 14.0) == 0.0
    vals = evaluate_filter(f, np.array([9.0, 11.0, 15.0]))
    assert vals == pytest.approx([0.0, amp, 0.0])


def test_gaussian_shape():
    f = FilterSpec("gaussian", 11.0, 2.0)
    assert f.sigma == 0.5
    assert f.center == 12.0
    lo, hi = f.support()
    assert lo == pytest.approx(10.0)
    assert hi == pytest.approx(14.0)
    # peak at the center, symmetric flanks
    assert evaluate_filter(f, 12.0) == pytest.approx(f.norm_const)
    assert evaluate_filter(f, 11.5) == pytest.approx(evaluate_filter(f, 12.5))
    with pytest.raises(FilterError):
        FilterSpec("boxcar", 10.0, 1.0).sigma


def test_norms_are_unit():
    for kind, t0, T in (
        ("boxcar", 10.0, 0.5),
        ("boxcar", 10.0, 10.0),
        ("gaussian", 11.0, 2.0),
        ("gaussian", 0.0, 3.0),  # truncated tail absorbed by norm_const
    ):
        assert filter_norm(FilterSpec(kind, t0, T)) == pytest.approx(
            1.0, abs=1e-10
        )


def test_sampled_weights_discrete_norm():
    for kind, t0, T in (("boxcar", 10.0, 1.0), ("gaussian", 11.0, 2.0)):
        f = FilterSpec(kind, t0, T)
        for dt in (1e-3, 5e-4, 2.3e-4):
            n_start, w = sampled_weights(f, dt)
            assert n_start == round(f.support()[0] / dt)
            assert np.sum(w * w) * dt == pytest.approx(1.0, abs=1e-13)


def test_sampled_weights_boxcar_flat():
    f = FilterSpec("boxcar", 10.0, 2.0)
    n_start, w = sampled_weights(f, 1e-3)
    assert n_start == 10000
    assert w.size == 2000
    assert np.ptp(w) == 0.0


def test_sampled_weights_errors():
    f = FilterSpec("boxcar", 10.0, 1.0)
    with pytest.raises(FilterError):
        sampled_weights(f, 0.0)
    with pytest.raises(FilterError):
        sampled_weights(f, -1e-3)
    # support shorter than one step
    with pytest.raises(FilterError):
        sampled_weights(FilterSpec("boxcar", 10.0, 1e-6), 1e-3)
