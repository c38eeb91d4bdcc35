import math

import pytest

from qkzlab.params import (ConfigError, ParameterDomainError, TruncationPolicy, delta_weight, derive,
                           load_config, parse_config_text)


def test_derived_quantities():
    prm = derive(0.6, 1, 0.3, (1, 1), 1)
    assert prm.p == pytest.approx(0.6**6)
    assert prm.kappa == pytest.approx(0.6 ** (-2 * (0.3 + 1 - 1 + 1)))
    assert prm.a_exponents[0] == pytest.approx(1 / 6 * (0.3 + 2 - 0.5 - 1 + 1))
    assert prm.n == 2
    assert prm.contour_feasible


@pytest.mark.parametrize("kwargs", [dict(q=1.2), dict(q=0), dict(spins=(-1,)), dict(spins=()), dict(N=-1),
                                    dict(k=-3)])
def test_domain_errors(kwargs):
    base = dict(q=0.6, k=1, L=0.3, spins=(1, 1), N=1)
    base.update(kwargs)
    with pytest.raises(ParameterDomainError):
        derive(**base)


def test_contour_feasibility_flag():
    # |p| = q^6 must be below q^(2l); fails for l = 3 at k = 1
    assert not derive(0.6, 1, 0.3, (3,), 1).contour_feasible
    assert derive(0.6, 2, 0.3, (3,), 1).contour_feasible


def test_delta_weight():
    assert delta_weight(2, 2) == pytest.approx(0.5)
    with pytest.raises(ZeroDivisionError):
        delta_weight(1, -2)


def test_truncation_policy_validation():
    with pytest.raises(ParameterDomainError):
        TruncationPolicy(max_terms=0)
    with pytest.raises(ParameterDomainError):
        TruncationPolicy(tail_tol=0)


def test_config_parse_and_echo(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nq = 0.5\nk: 2\nspins = 1, 2\nN = 1\nseed = 7\n")
    cfg = load_config(path)
    assert cfg.params.spins == (1, 2) and cfg.seed == 7
    assert cfg.echo()["q"] == 0.5 and cfg.echo()["k"] == 2
    cfg = load_config(path, {"q": "0.4", "seed": None})
    assert cfg.params.q == 0.4 and cfg.seed == 7


def test_config_complex_value():
    cfg = parse_config_text("L = 0.3+0.1i")
    assert cfg.params.L == complex(0.3, 0.1)
    assert cfg.echo()["L"] == [0.3, 0.1]


@pytest.mark.parametrize("text", ["nonsense", "foo = 1", "N = x", "q = abc"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config_text(text)


def test_defaults_are_finite():
    cfg = parse_config_text("")
    assert all(math.isfinite(abs(v)) for v in (cfg.params.q, cfg.params.k, cfg.params.L))
