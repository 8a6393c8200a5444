"""Gamma lengthscale priors elicited from pairwise design distances."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ces.emulation.lengthscale_priors import (
    GammaPrior,
    elicit_lengthscale_priors,
    gamma_from_quantiles,
)


def test_gamma_log_pdf_hand_value():
    """Gamma(1, 1) is Exp(1): logpdf(x) = -x."""
    prior = GammaPrior(shape=1.0, scale=1.0)
    assert prior.log_pdf(2.5) == pytest.approx(-2.5)


def test_log_derivative_matches_finite_differences():
    prior = GammaPrior(shape=3.2, scale=0.7)
    for ell in (0.1, 1.0, 5.0):
        h = 1e-7
        fd = (prior.log_pdf(ell * np.exp(h)) - prior.log_pdf(ell * np.exp(-h))) / (2 * h)
        assert prior.dlog_pdf_dlog(ell) == pytest.approx(fd, rel=1e-5)


@given(lo=st.floats(1e-3, 1.0), ratio=st.floats(1.5, 1e4))
@settings(max_examples=40, deadline=None)
def test_quantile_round_trip(lo, ratio):
    hi = lo * ratio
    prior = gamma_from_quantiles(lo, hi)
    assert prior.quantile(0.025) == pytest.approx(lo, rel=1e-6)
    assert prior.quantile(0.975) == pytest.approx(hi, rel=1e-6)


def test_invalid_quantile_targets_rejected():
    with pytest.raises(ValueError):
        gamma_from_quantiles(1.0, 0.5)
    with pytest.raises(ValueError):
        gamma_from_quantiles(0.0, 1.0)


def test_elicitation_targets_from_two_points():
    """Design {0, 1} in one dimension: the only pairwise distance is 1, so the
    prior quantiles are (1/10, 1/3)."""
    priors = elicit_lengthscale_priors(np.array([[0.0], [1.0]]))
    assert len(priors) == 1
    assert priors[0].quantile(0.025) == pytest.approx(0.1, rel=1e-6)
    assert priors[0].quantile(0.975) == pytest.approx(1.0 / 3.0, rel=1e-6)


def test_elicitation_per_dimension():
    rng = np.random.default_rng(1)
    design = np.column_stack([rng.uniform(0, 1, 30), rng.uniform(0, 100, 30)])
    p0, p1 = elicit_lengthscale_priors(design)
    # the wider dimension should admit longer lengthscales
    assert p1.mean() > p0.mean()


def test_degenerate_dimension_gets_no_prior(caplog):
    design = np.column_stack([np.linspace(0, 1, 10), np.full(10, 2.0)])
    with caplog.at_level(logging.WARNING):
        priors = elicit_lengthscale_priors(design)
    assert priors[0] is not None and priors[1] is None
    assert any("degenerate" in rec.message for rec in caplog.records)


def test_invalid_gamma_parameters_rejected():
    with pytest.raises(ValueError):
        GammaPrior(shape=0.0, scale=1.0)
    with pytest.raises(ValueError):
        GammaPrior(shape=1.0, scale=-1.0)
