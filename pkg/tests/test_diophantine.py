import math

import numpy as np
import pytest

from kamtorus.diophantine import (
    ResonantFrequencyError,
    best_constant,
    certify_best,
    check,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def test_unit_frequency_certifies_at_one():
    cert = check([1.0], 2.0, 1.0, 100)
    assert cert.certified
    assert cert.min_witness == pytest.approx(1.0)
    assert cert.witness_k == (1,)


def test_golden_pair_certifies_at_scanned_minimum():
    cert = certify_best([1.0, GOLDEN], 2.0, 1000)
    assert cert.certified
    assert cert.min_witness > 0.2  # badly approximable: witness stays order one
    # brute force agreement on a smaller range
    small = best_constant([1.0, GOLDEN], 2.0, 50)
    assert cert.min_witness <= small + 1e-15


def test_exact_resonance_detected_with_witness():
    with pytest.raises(ResonantFrequencyError) as err:
        check([1.0, 2.0], 2.0, 1.0, 50)
    assert err.value.k == (2, -1)


def test_best_constant_small_omega():
    # |k * 0.75| * |k| = 0.75 k^2, minimized at k = 1
    assert best_constant([0.75], 2.0, 10) == pytest.approx(0.75)


def test_best_constant_monotone_in_range():
    vals = [best_constant([1.0, math.sqrt(2.0)], 2.0, k) for k in (50, 200, 500)]
    assert vals[0] >= vals[1] >= vals[2]
    assert vals[2] > 0


def test_one_dimensional_invariant():
    # any nonzero scalar frequency certifies at |omega| when gamma = 2
    for omega in (0.3, -1.7, 2.5):
        cert = check([omega], 2.0, abs(omega), 200)
        assert cert.certified
        assert cert.min_witness == pytest.approx(abs(omega))


def test_witness_scales_linearly():
    base = best_constant([1.0, math.sqrt(3.0)], 2.5, 60)
    scaled = best_constant([4.0, 4.0 * math.sqrt(3.0)], 2.5, 60)
    assert scaled == pytest.approx(4.0 * base, rel=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        check([0.0], 2.0, 1.0, 10)
    with pytest.raises(ValueError):
        check([1.0], 0.5, 1.0, 10)
    with pytest.raises(ValueError):
        check([1.0], 2.0, -1.0, 10)
    with pytest.raises(ValueError):
        check([1.0], 2.0, 1.0, 0)


def test_cert_serialization_fields():
    cert = check([1.0], 2.0, 0.5, 20)
    data = cert.to_dict()
    assert data["certified"] is True
    assert data["omega"] == [1.0]
    assert data["k_max"] == 20


def test_three_dimensional_scan():
    cert = certify_best([1.0, math.sqrt(2.0), math.sqrt(3.0)], 4.0, 12)
    assert cert.min_witness > 0
    k = np.asarray(cert.witness_k)
    value = abs(float(k @ np.asarray(cert.omega))) * float(np.sum(np.abs(k))) ** 3.0
    assert value == pytest.approx(cert.min_witness)
