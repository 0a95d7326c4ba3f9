"""The twelve acceptance criteria at full resolution, one PASS/FAIL line each.

Runtime is dominated by the projection-defect fits and the blow-up
simulation (several minutes each).  ``YBL_ACCEPTANCE_QUICK=1`` runs the
reduced-resolution variants instead.
"""

import os

import pytest

from yamabe_blowup.acceptance import CRITERIA

QUICK = os.environ.get("YBL_ACCEPTANCE_QUICK", "") not in ("", "0")


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda fn: f"criterion_{fn.number}")
def test_criterion(criterion, capsys):
    result = criterion(QUICK)
    with capsys.disabled():
        print("\n" + result.line())
        for check in result.checks:
            print(f"    {check.name} = {float(check.value):.6g} (tolerance {float(check.tolerance):.3g})"
                  f" {'ok' if check.passed else 'FAILED'}")
    assert result.passed, result.line()
