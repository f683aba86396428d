import numpy as np
import pytest

from bowenlab.complex_core import Disk
from bowenlab.errors import DomainError, NoSignChange, WordBudgetExceeded
from bowenlab.ncifs import (
    NcifsSystem, PressureMethod, SimilarityLevel, audit_containment, audit_contraction,
    audit_distortion, audit_open_set_condition, audit_subexponential, bowen_dimension,
    exact_log_sups, exact_Zn, level_sum, log_Zn, lower_pressure, probe_level_sum,
    product_lower_bound, similarity_system, word_count,
)
from bowenlab.verify import moran_oracle


def test_three_quarter_maps_dimension():
    rep = bowen_dimension(similarity_system([0.25] * 3), tol=1e-8)
    lo, hi = rep.bowen_bracket
    assert lo <= np.log(3) / np.log(4) <= hi
    assert hi - lo <= 1e-8


def test_golden_ratio_dimension():
    rep = bowen_dimension(similarity_system([0.5, 0.25]), tol=1e-9)
    assert rep.estimate == pytest.approx(np.log2((1 + np.sqrt(5)) / 2), abs=1e-8)


def test_single_map_has_dimension_zero():
    rep = bowen_dimension(similarity_system([0.5]), tol=1e-6)
    assert rep.bowen_bracket[0] == 0.0
    assert rep.bowen_bracket[1] <= 1e-6


def test_exact_Zn_similarity_closed_form():
    s = similarity_system([0.5, 1 / 3])
    # Z_2(1) = (1/2 + 1/3)^2
    assert exact_Zn(s, 2, 1.0) == pytest.approx(25 / 36, rel=1e-13)
    assert exact_Zn(s, 3, 2.0) == pytest.approx((0.25 + 1 / 9) ** 3, rel=1e-13)


def test_product_bound_equals_exact_for_similarities():
    s = similarity_system([0.3, 0.2, 0.1])
    for n in (1, 2, 4):
        assert product_lower_bound(s, n, 0.7) == pytest.approx(exact_Zn(s, n, 0.7), rel=1e-12)


def test_word_count_and_budget():
    s = similarity_system([0.2] * 5)
    assert word_count(s, 3) == 125
    with pytest.raises(WordBudgetExceeded):
        exact_log_sups(s, 6, word_cap=1000)


def test_log_Zn_switches_to_product_bound():
    s = similarity_system([0.2] * 5)
    _, m1 = log_Zn(s, 2, 0.5, word_cap=100)
    _, m2 = log_Zn(s, 4, 0.5, word_cap=100)
    assert m1 is PressureMethod.EXACT and m2 is PressureMethod.PRODUCT


def test_lower_pressure_of_similarities_is_log_sum():
    s = similarity_system([0.25] * 3)
    est = lower_pressure(s, 0.5, max_depth=4)
    assert est.lower_pressure == pytest.approx(np.log(3 * 0.25 ** 0.5), abs=1e-12)
    with pytest.raises(DomainError):
        lower_pressure(s, 0.5, max_depth=3)


def test_bowen_requires_sign_change():
    with pytest.raises(NoSignChange):
        bowen_dimension(similarity_system([0.25] * 3), 0.9, 2.0)
    with pytest.raises(DomainError):
        bowen_dimension(similarity_system([0.25] * 3), 1.0, 0.5)


def test_non_stationary_list_of_levels():
    d = Disk(0, 1)
    levels = [SimilarityLevel([0.5, 0.5], [-0.5, 0.5], d) for _ in range(3)]
    s = NcifsSystem(levels, koebe_K=1.0)
    assert s.alphabet_sizes(3) == [2, 2, 2]
    with pytest.raises(IndexError):
        s.level(4)
    with pytest.raises(IndexError):
        s.level(0)
    with pytest.raises(DomainError):
        NcifsSystem(levels, koebe_K=0.5)


def test_level_sum_and_probe_sum():
    s = similarity_system([0.5, 0.25])
    lv = s.level(1)
    assert level_sum(lv, 1.0) == pytest.approx(0.75)
    assert probe_level_sum(lv, 2.0) == pytest.approx(0.25 + 0.0625)


def test_osc_audit_detects_overlap():
    d = Disk(0, 1)
    assert audit_open_set_condition(SimilarityLevel([0.3, 0.3], [-0.6, 0.6], d))
    assert not audit_open_set_condition(SimilarityLevel([0.5, 0.5], [-0.2, 0.2], d))


def test_containment_audit():
    d = Disk(0, 1)
    assert audit_containment(SimilarityLevel([0.3], [0.5], d))
    assert not audit_containment(SimilarityLevel([0.5], [0.8], d))


def test_contraction_and_subexponential_audits():
    s = similarity_system([0.25] * 3)
    assert audit_contraction(s, depth=3) == pytest.approx(0.25 ** 3)
    assert audit_distortion(s, 2) == pytest.approx(1.0)
    # alphabet of size 3 at every level: worst ratio #I^(k)/k is at k = 1
    assert audit_subexponential(s, 4) == 3.0


def test_inverse_level_matches_engine(mayer8):
    # exact Z_1 equals the level sum
    assert exact_Zn(mayer8, 1, 0.4) == pytest.approx(level_sum(mayer8.level(1), 0.4), rel=1e-12)


def test_moran_engine_agree_random():
    rng = np.random.default_rng(1)
    for _ in range(5):
        r = rng.uniform(0.1, 0.45, rng.integers(2, 6))
        assert bowen_dimension(similarity_system(r), tol=1e-8, max_depth=4).estimate == \
            pytest.approx(moran_oracle(r), abs=1e-7)
