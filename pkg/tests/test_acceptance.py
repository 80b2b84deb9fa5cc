"""Acceptance gate: every criterion runs at its stated tolerance and prints
one pass/fail line (use -s to see them as they complete)."""

import pytest

from hstv import acceptance


@pytest.fixture(scope="module")
def ctx():
    return {}


def _run(criterion, ctx, **kw):
    result = criterion(ctx, **kw) if kw or criterion in (
        acceptance.criterion_4, acceptance.criterion_5,
        acceptance.criterion_6, acceptance.criterion_7,
    ) else criterion(ctx)
    print(result.line())
    assert result.passed, result.line()
    return result


def test_criterion_1_isotropic_density(ctx):
    _run(acceptance.criterion_1, ctx)


def test_criterion_2_seminorm_gap(ctx):
    _run(acceptance.criterion_2, ctx)


def test_criterion_3_anisotropic_alignment(ctx):
    _run(acceptance.criterion_3, ctx)


def test_criterion_4_alignment_exactness(ctx):
    _run(acceptance.criterion_4, ctx)


def test_criterion_5_extremality_suite(ctx):
    _run(acceptance.criterion_5, ctx)


def test_criterion_6_schatten_suite(ctx):
    _run(acceptance.criterion_6, ctx)


def test_criterion_7_field_calculus(ctx):
    _run(acceptance.criterion_7, ctx)
