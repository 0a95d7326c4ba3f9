import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from yamabe_blowup.errors import DomainError
from yamabe_blowup.integrate import integrate, sphere_rule
from yamabe_blowup.quadrature import (c2_closed_form, compute_constants, doubled_constants, green_brackets,
                                      hat_constants, verify_cancellations, verify_E0_decay, verify_identity_c2)

# Independent oracle: mpmath.quad at 30 digits on the same radial integrands.
ORACLE = {
    5: (738.81523166739624, 900.65094908025446, 2533.0807942882157, -844.36026476273856, 738.81523166739624),
    6: (8164.3955967326612, 2976.6025613087827, 10715.769220711618, -7143.8461471410786, 8164.3955967326612),
    7: (90483.409550004071, 14707.144663365741, 64343.757902225117, -64343.757902225117, 90483.409550004071),
}


@pytest.mark.parametrize("N", sorted(ORACLE))
def test_constants_match_independent_oracle(N):
    table = compute_constants(N)
    for name, ref in zip(("c1", "c2", "c3", "c4", "c5"), ORACLE[N]):
        assert getattr(table, name).value == pytest.approx(ref, rel=1e-12), name


@pytest.mark.parametrize("N", [5, 6, 7])
def test_signs(N):
    table = compute_constants(N)
    assert table.c1.value > 0 and table.c2.value > 0 and table.c5.value > 0
    assert table.c4.value < 0  # recorded sign, same for every N


@pytest.mark.parametrize("N,rate", [(5, Fraction(15, 64)), (6, Fraction(24, 35))])
def test_rate_constant_is_rational(N, rate):
    # mu0^2 t = 2 c1 / ((N + 2) c2)
    t = compute_constants(N)
    assert 2 * t.c1.value / ((N + 2) * t.c2.value) == pytest.approx(float(rate), rel=1e-13)


@pytest.mark.parametrize("N", [5, 6, 7])
def test_node_doubling_is_stable(N):
    table = compute_constants(N)
    doubled = doubled_constants(N)
    for name, val in doubled.items():
        ref = getattr(table, name).value
        assert abs(val - ref) < 1e-11 * abs(ref)


@pytest.mark.parametrize("N", [5, 6, 7])
def test_cancellations(N):
    assert max(verify_cancellations(N)) < 1e-8


@pytest.mark.parametrize("N", [5, 6, 7, 8, 9])
def test_green_brackets_vanish_exactly(N):
    assert green_brackets(N) == (0, 0)


def test_hat_constants_exact():
    assert hat_constants(5) == (Fraction(1, 12), Fraction(-1, 96), Fraction(-3, 32))


@pytest.mark.parametrize("N", [5, 6, 7])
def test_c2_identity_two_routes(N):
    assert verify_identity_c2(N) < 1e-9
    assert compute_constants(N).c2.value == pytest.approx(c2_closed_form(N), rel=1e-12)


@pytest.mark.parametrize("N", [5, 6, 7])
def test_E0_decay_and_negative_control(N):
    assert verify_E0_decay(N) == pytest.approx(-N, abs=0.1)
    assert verify_E0_decay(N, control=True) == pytest.approx(-(N - 2), abs=0.1)


def test_E0_decay_needs_a_decade():
    with pytest.raises(DomainError):
        verify_E0_decay(5, radii=[100, 200, 300, 400])


@given(st.floats(1.5, 8.0))
def test_adaptive_rule_on_algebraic_tail(a):
    # int_0^inf (1 + r^2)^{-a} dr = sqrt(pi) Gamma(a - 1/2) / (2 Gamma(a))
    exact = math.sqrt(math.pi) * math.gamma(a - 0.5) / (2 * math.gamma(a))
    assert float(integrate(lambda r: (1 + r * r) ** -a, 0.0, np.inf)) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("m", [1, 2, 4])
def test_sphere_rule_area_and_moments(m):
    pts, wts = sphere_rule(m, 6)
    area = 2 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)
    assert wts.sum() == pytest.approx(area, rel=1e-13)
    assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)
    # int x_0^2 = area / (m + 1)
    assert wts @ pts[:, 0] ** 2 == pytest.approx(area / (m + 1), rel=1e-13)
