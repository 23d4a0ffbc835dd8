from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from fdmimo.complexity import (FlopModelInput, doa_precoder_terms, esprit_terms, flops_bd, flops_doa_precoder,
                               flops_esprit, flops_music, music_terms)
from fdmimo.numerics import DomainError

BASE = FlopModelInput()
LARGE = BASE.square(16)
SMALL = FlopModelInput(q=32, m1=4, m2=6, n_t=2, l=3, j=3, n_g=100)

# frozen from an independent term-by-term arithmetic evaluation
FROZEN = {
    "esprit": (494952, 5642728, 17140),
    "music": (9891784, 487099336, 483732),
    "doa": (6898688, 377556992, 328752),
    "bd": (76126080, 6096170880, 1307736),
}
MODELS = {"esprit": flops_esprit, "music": flops_music, "doa": flops_doa_precoder, "bd": flops_bd}


@pytest.mark.parametrize("name", MODELS)
def test_frozen_values(name):
    for x, expected in zip((BASE, LARGE, SMALL), FROZEN[name]):
        value = MODELS[name](x)
        assert isinstance(value, int)
        assert value == expected


def test_term_examples():
    t = esprit_terms(BASE)
    assert t["C_a"] == 64512
    assert t["C_f"] == 128
    assert (t["C_b"], t["C_c"], t["C_d"], t["C_e"]) == (71680, 352256, 3188, 3188)
    assert music_terms(BASE)["D_b"] == 6815744
    assert doa_precoder_terms(replace(LARGE, j=10, l=4))["E_a"] == 798720
    assert BASE.n_g == 360
    assert BASE.stacked_rank == 36


def test_crossovers():
    for side in (8, 12, 16, 20, 24, 32):
        x = BASE.square(side)
        assert flops_music(x) > flops_esprit(x)
        if x.n_r >= 256:
            assert flops_bd(x) > flops_doa_precoder(x)


def test_input_validation():
    with pytest.raises(DomainError):
        FlopModelInput(q=0)
    with pytest.raises(DomainError):
        FlopModelInput(l_tilde=0)
    with pytest.raises(DomainError):
        flops_bd(FlopModelInput(m1=4, m2=4, j=10, l=4))  # stacked rank 36 >= 16


FIELDS = st.sampled_from(["q", "m1", "m2", "n_t", "j", "n_g"])


@given(FIELDS, st.integers(1, 12), st.integers(1, 6))
def test_monotone(field, start, step):
    # the l argument is excluded: music and bd contain nr - l factors
    x = replace(FlopModelInput(m1=12, m2=12, j=3, l=2), **{field: start})
    y = replace(x, **{field: start + step})
    for f in MODELS.values():
        assert f(y) >= f(x)
    assert flops_esprit(replace(x, l=x.l + 1)) >= flops_esprit(x)
    assert flops_doa_precoder(replace(x, l=x.l + 1)) >= flops_doa_precoder(x)
