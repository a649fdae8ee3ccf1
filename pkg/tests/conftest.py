import pytest

from tauflat.groups import SO, SU, Sp

MATRIX_GROUPS = [SU(2), SU(3), SO(3), Sp(1)]


@pytest.fixture(params=MATRIX_GROUPS, ids=str)
def group(request):
    return request.param
