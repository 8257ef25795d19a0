import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levilab.domain import get_domain, sample_boundary
from levilab.fields import coordinate, to_real
from levilab.levi import (
    FrameError,
    PreconditionError,
    build_frame,
    estimate_compare_K,
    levi_rank,
    mcneal_check,
    obstruction,
    sigma_field,
    stratify,
    tangential_levi,
)


def _pt(*z):
    return to_real(np.array(z, dtype=complex))


def test_tangential_levi_egg():
    spec = get_domain("egg2")
    assert np.allclose(tangential_levi(spec, _pt(1, 0)).entries, [[0.0]])
    assert np.allclose(tangential_levi(spec, _pt(0, 1)).entries, [[1.0]])


def test_ball3_levi_is_identity():
    L = tangential_levi(get_domain("ball3"), _pt(0, 0.6, 0.8j)).entries
    assert np.allclose(L, np.eye(2))


def test_levi_ranks():
    assert levi_rank(get_domain("egg2"), _pt(1, 0)) == 0
    assert levi_rank(get_domain("egg2"), _pt(0, 1)) == 1
    assert levi_rank(get_domain("ball3"), _pt(1, 0, 0)) == 2
    assert levi_rank(get_domain("egg3"), _pt(1, 0, 0)) == 0


def test_stratification_counts_egg2():
    spec = get_domain("egg2")
    B = sample_boundary(spec, 1000)
    strat = stratify(spec, B)
    small = np.abs(B.z[:, 1]) <= 1e-5
    assert np.array_equal(strat.ranks == 0, small)
    assert strat.counts() == {0: int(small.sum()), 1: int((~small).sum())}


def test_frames_egg2_and_ball():
    fr = build_frame(get_domain("egg2"), _pt(1, 0), 0)
    assert fr.n_weak == 1
    assert np.allclose(np.abs(fr.weak[0]), [0, 1])
    fr = build_frame(get_domain("ball2"), _pt(1, 0), 1)
    assert fr.weak.shape == (0, 2)
    assert np.allclose(np.abs(fr.strong[0]), [0, 1])


def test_frame_index_out_of_range():
    with pytest.raises(ValueError):
        build_frame(get_domain("ball2"), _pt(1, 0), 2)


def test_frame_gap_too_small():
    # ball3 Levi eigenvalues are equal, so a 1+1 split has no gap
    with pytest.raises(FrameError):
        build_frame(get_domain("ball3"), _pt(1, 0, 0), 1)


def test_frame_continuation_aligns_with_reference():
    spec = get_domain("egg3")
    ref = build_frame(spec, _pt(1, 0, 0), 0)
    th = 0.01
    fr = build_frame(spec, _pt(np.exp(1j * th), 0, 0), 0, reference=ref)
    overlap = np.abs(fr.weak.conj() @ ref.weak.T)
    assert np.allclose(np.sort(np.linalg.svd(overlap, compute_uv=False)), 1.0, atol=1e-6)


def test_obstruction_values():
    W = np.array([0, 1], dtype=complex)
    assert obstruction(get_domain("skewed-egg2"), _pt(1, 0), W) == pytest.approx(0.25, abs=1e-9)
    assert obstruction(get_domain("egg2"), _pt(1, 0), W) == pytest.approx(0.0, abs=1e-12)


def test_obstruction_needs_weak_direction():
    with pytest.raises(PreconditionError):
        obstruction(get_domain("ball2"), _pt(1, 0), np.array([0, 1], dtype=complex))


def test_sigma_is_levi_in_weak_direction():
    spec = get_domain("egg2")
    sigma = sigma_field(spec, np.array([[0, 1]], dtype=complex))
    # W0 = e2 projected onto the complex tangent space, H = diag(1, 4 r^2)
    r = 0.1
    x = np.sqrt(1 - r**4)
    N1, N2 = np.array([x, 2 * r**3]) / np.hypot(x, 2 * r**3)
    expected = (N1 * N2) ** 2 + 4 * r**2 * (1 - N2**2) ** 2
    assert sigma(_pt(x, r)[None])[0] == pytest.approx(expected, rel=1e-12)


def test_compare_ratio_within_assembled_K():
    spec = get_domain("skewed-egg2")
    B = sample_boundary(spec, 400)
    strat = stratify(spec, B)
    idx = strat.stratum(0)
    weak = np.array([build_frame(spec, B.points[i], 0).weak for i in idx])
    rep = estimate_compare_K(spec, B.subset(idx), weak)
    assert rep.within_assembled
    assert rep.constants.K == pytest.approx(8.0, rel=1e-6)


def test_mcneal_on_square():
    x = coordinate(1, 0) * coordinate(1, 0)
    rep = mcneal_check(x, np.linspace(-1, 1, 41)[:, None])
    assert rep.c_hat == pytest.approx(4.0, abs=1e-9)
    assert not rep.violations


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 5.0))
def test_mcneal_scales_with_quadratic(a):
    f = a * coordinate(1, 0) * coordinate(1, 0)
    rep = mcneal_check(f, np.linspace(-2, 2, 21)[:, None])
    # |f'|^2 / f = 4 a
    assert rep.c_hat == pytest.approx(4 * a, rel=1e-9)
