import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bayescdm.core import QMatrix, ResponseMatrix, enumerate_patterns, ideal_conjunctive
from bayescdm.models import (
    DinaParams,
    LcdmParams,
    LlmParams,
    RdinaParams,
    RrumParams,
    TestletParams,
    class_probability_table,
    lcdm_effect_subsets,
    log_likelihood,
    logistic,
    prob_dina,
    prob_lcdm,
    prob_llm,
    prob_rdina,
    prob_rpa_dina,
    prob_rrum,
    prob_testlet_rdina,
    rdina_to_sg,
)


def sigma(x):
    return 1.0 / (1.0 + math.exp(-x))


class TestLogistic:
    def test_extreme_arguments_do_not_overflow(self):
        assert logistic(800.0) == 1.0
        assert logistic(-800.0) == 0.0

    def test_matches_reference_midrange(self):
        for x in (-5.0, -1.096, 0.0, 1.096, 4.0):
            assert logistic(x) == pytest.approx(sigma(x), abs=1e-14)


class TestDinaParams:
    def test_monotonicity_enforced_at_construction(self):
        with pytest.raises(ValueError):
            DinaParams(slip=[0.5], guess=[0.5])
        with pytest.raises(ValueError):
            DinaParams(slip=[0.3], guess=[0.8])

    def test_probability_values(self):
        p = DinaParams(slip=[0.277], guess=[0.011])
        assert prob_dina(1, p, 0) == pytest.approx(0.723, abs=1e-12)
        assert prob_dina(0, p, 0) == pytest.approx(0.011, abs=1e-12)

    def test_noiseless_master(self):
        p = DinaParams(slip=[0.0], guess=[0.0])
        assert prob_dina(1, p, 0) == 1.0

    def test_linear_form_equals_power_form(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            s = rng.uniform(0.01, 0.6)
            g = rng.uniform(0.01, min(0.6, 1 - s - 0.01))
            p = DinaParams(slip=[s], guess=[g])
            for eta in (0, 1):
                power = (1 - s) ** eta * g ** (1 - eta)
                assert prob_dina(eta, p, 0) == pytest.approx(power, abs=1e-12)


class TestRdina:
    def test_guessing_anchor(self):
        p = RdinaParams(intercept=[-1.096], kway=[0.0])
        assert prob_rdina(0, p, 0) == pytest.approx(0.25, abs=1e-3)

    def test_slipping_anchor(self):
        p = RdinaParams(intercept=[-1.096], kway=[2.192])
        assert prob_rdina(1, p, 0) == pytest.approx(0.75, abs=1e-3)

    def test_zero_effect_ignores_eta(self):
        p = RdinaParams(intercept=[0.3], kway=[0.0])
        assert prob_rdina(0, p, 0) == prob_rdina(1, p, 0) == pytest.approx(sigma(0.3))

    def test_negative_kway_rejected(self):
        with pytest.raises(ValueError):
            RdinaParams(intercept=[0.0], kway=[-0.1])

    def test_sg_map_symmetric_point(self):
        g, s = rdina_to_sg(RdinaParams(intercept=[0.0], kway=[0.0]), 0)
        assert (g, s) == (0.5, 0.5)

    def test_sg_map_anchor_point(self):
        g, s = rdina_to_sg(RdinaParams(intercept=[-1.096], kway=[2.192]), 0)
        assert g == pytest.approx(0.25, abs=1e-3)
        assert s == pytest.approx(0.25, abs=1e-3)

    def test_round_trip_against_dina(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            p = RdinaParams(intercept=[rng.normal(-1, 1)], kway=[rng.uniform(0.1, 4)])
            g, s = rdina_to_sg(p, 0)
            assert g < 1 - s
            dina = DinaParams(slip=[s], guess=[g])
            for eta in (0, 1):
                assert prob_dina(eta, dina, 0) == pytest.approx(
                    prob_rdina(eta, p, 0), abs=1e-12)


class TestLlm:
    def test_all_zero_gives_half(self):
        p = LlmParams(intercept=[0.0], main=[[0.0, 0.0]])
        assert prob_llm((1, 1), (1, 1), p, 0) == pytest.approx(0.5)

    def test_single_attribute_equals_rdina(self):
        p = LlmParams(intercept=[-1.096], main=[[2.192]])
        r = RdinaParams(intercept=[-1.096], kway=[2.192])
        assert prob_llm((1,), (1,), p, 0) == pytest.approx(prob_rdina(1, r, 0), abs=1e-12)
        assert prob_llm((1,), (1,), p, 0) == pytest.approx(0.75, abs=1e-3)

    def test_no_mastery_gives_intercept(self):
        p = LlmParams(intercept=[-0.7], main=[[1.5, 2.0]])
        assert prob_llm((0, 0), (1, 1), p, 0) == pytest.approx(sigma(-0.7))

    def test_unrequired_attribute_inert(self):
        p = LlmParams(intercept=[0.0], main=[[1.5, 2.0]])
        assert prob_llm((0, 1), (1, 0), p, 0) == pytest.approx(0.5)


class TestRrum:
    def test_full_mastery_gives_baseline(self):
        p = RrumParams(baseline=[0.894], penalty=[[0.019, 0.0]])
        assert prob_rrum((1, 1), (1, 0), p, 0) == pytest.approx(0.894)

    def test_single_missing_attribute_applies_penalty(self):
        p = RrumParams(baseline=[0.894], penalty=[[0.019, 0.0]])
        assert prob_rrum((0, 1), (1, 0), p, 0) == pytest.approx(0.894 * 0.019, abs=1e-12)

    def test_unit_penalties_ignore_alpha(self):
        p = RrumParams(baseline=[0.6], penalty=[[1.0, 1.0]])
        for alpha in itertools.product((0, 1), repeat=2):
            assert prob_rrum(alpha, (1, 1), p, 0) == pytest.approx(0.6)


class TestLcdm:
    def test_effect_subsets_canonical_order(self):
        assert lcdm_effect_subsets((1, 1, 0)) == [(0,), (1,), (0, 1)]
        assert lcdm_effect_subsets((1, 1, 1)) == [
            (0,), (1,), (2,), (0, 1), (0, 2), (1, 2), (0, 1, 2)]

    def test_direct_evaluation(self):
        p = LcdmParams(intercept=[0.0], effects=[{(0,): 1.0, (1,): 1.0, (0, 1): 2.0}])
        assert prob_lcdm((1, 1), (1, 1), p, 0) == pytest.approx(sigma(4.0), abs=1e-12)
        assert prob_lcdm((1, 1), (1, 1), p, 0) == pytest.approx(0.9820, abs=1e-4)

    def test_zeroed_interactions_reduce_to_llm(self):
        rng = np.random.default_rng(2)
        for k in (2, 3):
            q_row = tuple([1] * k)
            l0 = rng.normal(-1, 1)
            mains = rng.uniform(0, 3, k)
            effects = {(j,): mains[j] for j in range(k)}
            for subset in lcdm_effect_subsets(q_row):
                if len(subset) > 1:
                    effects[subset] = 0.0
            lcdm = LcdmParams(intercept=[l0], effects=[effects])
            llm = LlmParams(intercept=[l0], main=[mains])
            for alpha in itertools.product((0, 1), repeat=k):
                assert prob_lcdm(alpha, q_row, lcdm, 0) == pytest.approx(
                    prob_llm(alpha, q_row, llm, 0), abs=1e-12)

    def test_kway_only_reduces_to_rdina(self):
        rng = np.random.default_rng(3)
        for k in (2, 3):
            q_row = tuple([1] * k)
            l0 = rng.normal(-1, 1)
            kway = rng.uniform(0.5, 3)
            effects = {s: 0.0 for s in lcdm_effect_subsets(q_row)}
            effects[tuple(range(k))] = kway
            lcdm = LcdmParams(intercept=[l0], effects=[effects])
            rdina = RdinaParams(intercept=[l0], kway=[kway])
            for alpha in itertools.product((0, 1), repeat=k):
                eta = ideal_conjunctive(alpha, q_row)
                assert prob_lcdm(alpha, q_row, lcdm, 0) == pytest.approx(
                    prob_rdina(eta, rdina, 0), abs=1e-12)

    def test_negative_main_effect_rejected(self):
        with pytest.raises(ValueError):
            LcdmParams(intercept=[0.0], effects=[{(0,): -0.5}])


class TestRpaDina:
    def test_matches_dina_on_binary(self):
        p = DinaParams(slip=[0.2], guess=[0.1])
        for k in (1, 2, 3):
            for alpha in itertools.product((0, 1), repeat=k):
                for q_row in itertools.product((0, 1), repeat=k):
                    if sum(q_row) == 0:
                        continue
                    eta = ideal_conjunctive(alpha, q_row)
                    assert prob_rpa_dina(alpha, q_row, p, 0) == pytest.approx(
                        prob_dina(eta, p, 0), abs=1e-15)

    def test_below_level_gives_guess(self):
        p = DinaParams(slip=[0.2], guess=[0.1])
        assert prob_rpa_dina((2, 1), (1, 2), p, 0) == pytest.approx(0.1)

    def test_exact_dominance_gives_one_minus_slip(self):
        p = DinaParams(slip=[0.2], guess=[0.1])
        assert prob_rpa_dina((1, 2), (1, 2), p, 0) == pytest.approx(0.8)


class TestTestletRdina:
    def _params(self, gamma, n_items=10):
        ids = np.array([0, 0, 0, 0, 1, 1, 1, 1, 2, 2])
        return TestletParams(
            rdina=RdinaParams(intercept=np.full(n_items, -1.0), kway=np.full(n_items, 2.0)),
            gamma=gamma,
            sigma2_gamma=np.array([0.5, 0.5]),
            testlet_ids=ids,
        )

    def test_zero_gamma_equals_rdina(self):
        p = self._params(np.zeros((3, 3)))
        r = p.rdina
        for person in range(3):
            for item in range(10):
                for eta in (0, 1):
                    assert prob_testlet_rdina(eta, p, person, item) == pytest.approx(
                        prob_rdina(eta, r, item))

    def test_monotone_in_gamma(self):
        gammas = [np.full((1, 3), 0.0), np.full((1, 3), 2.0), np.full((1, 3), 50.0)]
        for g in gammas:
            g[:, 2] = 0.0
        probs = [prob_testlet_rdina(0, self._params(g), 0, 0) for g in gammas]
        assert probs[0] < probs[1] < probs[2]
        assert probs[2] > 1 - 1e-12

    def test_standalone_items_ignore_gamma(self):
        gamma = np.array([[3.0, -3.0, 0.0]])
        p = self._params(gamma)
        # items 9 and 10 sit in the standalone slot
        assert prob_testlet_rdina(1, p, 0, 8) == pytest.approx(
            prob_rdina(1, p.rdina, 8))
        assert prob_testlet_rdina(1, p, 0, 9) == pytest.approx(
            prob_rdina(1, p.rdina, 9))

    def test_nonzero_standalone_gamma_rejected(self):
        with pytest.raises(ValueError):
            self._params(np.array([[0.0, 0.0, 1.0]]))


class TestLogLikelihood:
    def test_single_cell_half(self):
        q = QMatrix(np.array([[1]]))
        p = DinaParams(slip=[0.5], guess=[0.4])
        # alpha = 1 so the success probability is 1 - s = 0.5
        for y in (0, 1):
            ll = log_likelihood("dina", p, np.array([[1]]), ResponseMatrix([[y]]), q)
            assert ll == pytest.approx(math.log(0.5), abs=1e-12)

    def test_hand_computed_two_by_two(self):
        q = QMatrix(np.array([[1, 0], [1, 1]]))
        p = DinaParams(slip=[0.2, 0.1], guess=[0.15, 0.05])
        alpha = np.array([[1, 0], [1, 1]])
        y = ResponseMatrix(np.array([[1, 0], [1, 1]]))
        # person 1: eta = (1, 0) -> p = (0.8, 0.05); person 2: eta = (1, 1) -> (0.8, 0.9)
        expected = math.log(0.8) + math.log(0.95) + math.log(0.8) + math.log(0.9)
        ll = log_likelihood("dina", p, alpha, y, q)
        assert ll == pytest.approx(expected, abs=1e-12)

    def test_impossible_observation_is_minus_inf_not_nan(self):
        q = QMatrix(np.array([[1]]))
        p = DinaParams(slip=[0.0], guess=[0.0])
        y = ResponseMatrix([[1]])
        ll = log_likelihood("dina", p, np.array([[0]]), y, q)
        assert ll == -np.inf
        assert not math.isnan(ll)

    def test_deviance_consistency_with_probability_table(self):
        rng = np.random.default_rng(4)
        q = QMatrix(np.array([[1, 0], [0, 1], [1, 1]]))
        space = enumerate_patterns(q)
        p = DinaParams(slip=rng.uniform(0.1, 0.2, 3), guess=rng.uniform(0.1, 0.2, 3))
        table = class_probability_table("dina", p, space.patterns, q)
        classes = rng.integers(0, 4, 20)
        alpha = space.patterns[classes]
        y = ResponseMatrix((rng.random((20, 3)) < table[classes]).astype(int))
        ll = log_likelihood("dina", p, alpha, y, q)
        yf = y.entries.astype(float)
        probs = table[classes]
        manual = np.sum(yf * np.log(probs) + (1 - yf) * np.log(1 - probs))
        assert ll == pytest.approx(manual, abs=1e-10)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_all_kernels_stay_in_unit_interval(data):
    k = data.draw(st.integers(1, 3))
    alpha = np.array(data.draw(st.tuples(*[st.integers(0, 1)] * k)))
    q_row = np.array(data.draw(st.tuples(*[st.integers(0, 1)] * k)))
    if q_row.sum() == 0:
        q_row[0] = 1
    s = data.draw(st.floats(0.01, 0.89))
    g = data.draw(st.floats(0.01, min(0.89, 0.99 - s)))
    dina = DinaParams(slip=[s], guess=[g])
    l0 = data.draw(st.floats(-8, 8))
    lk = data.draw(st.floats(0, 8))
    rdina = RdinaParams(intercept=[l0], kway=[lk])
    mains = np.array(data.draw(st.tuples(*[st.floats(0, 6)] * k)))
    llm = LlmParams(intercept=[l0], main=[mains])
    base = data.draw(st.floats(0.01, 0.99))
    pens = np.array(data.draw(st.tuples(*[st.floats(0.0, 1.0)] * k)))
    rrum = RrumParams(baseline=[base], penalty=[pens])
    eta = ideal_conjunctive(alpha, q_row)
    values = [
        prob_dina(eta, dina, 0),
        prob_rdina(eta, rdina, 0),
        prob_llm(alpha, q_row, llm, 0),
        prob_rrum(alpha, q_row, rrum, 0),
    ]
    for v in values:
        assert 0.0 <= v <= 1.0


def test_monotone_in_each_attribute():
    # flipping any attribute to mastered never lowers the probability
    rng = np.random.default_rng(5)
    for k in (2, 3):
        q_row = tuple([1] * k)
        l0 = rng.normal(-1, 1)
        mains = rng.uniform(0, 2, k)
        llm = LlmParams(intercept=[l0], main=[mains])
        effects = {s: (rng.uniform(0, 1.5) if len(s) == 1 else rng.uniform(0, 1))
                   for s in lcdm_effect_subsets(q_row)}
        lcdm = LcdmParams(intercept=[l0], effects=[effects])
        rrum = RrumParams(baseline=[0.9], penalty=[rng.uniform(0.1, 0.9, k)])
        for alpha in itertools.product((0, 1), repeat=k):
            for j in range(k):
                if alpha[j] == 1:
                    continue
                upper = tuple(1 if i == j else a for i, a in enumerate(alpha))
                assert prob_llm(upper, q_row, llm, 0) >= prob_llm(alpha, q_row, llm, 0)
                assert prob_lcdm(upper, q_row, lcdm, 0) >= prob_lcdm(alpha, q_row, lcdm, 0)
                assert prob_rrum(upper, q_row, rrum, 0) >= prob_rrum(alpha, q_row, rrum, 0)
