import numpy as np
import pytest

from tubelab import _pykernels, kernels
from tubelab.configurations import gen_uniform_random
from tubelab.incidence import build_spatial_index
from tubelab.tubes import atom_arrays, build_family

ck = pytest.importorskip("tubelab._ckernels")


@pytest.mark.parametrize("d,delta", [(2, 1 / 32), (3, 1 / 8), (4, 1 / 4)])
def test_backends_agree(d, delta):
    f = build_family(d, delta)
    atoms = gen_uniform_random(25, delta, d, seed=d)
    c, dm, w = atom_arrays(atoms, d)
    args = (c, dm, w, delta, f.net.centers, f.basis, f.offset_spacing, f.M, f.dir_start, f.tube_slot)
    a = ck.family_sweep(*args)
    b = _pykernels.family_sweep(*args)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

    mask = (a[0] >= 1).astype(np.uint8)
    total = int(a[0][mask.astype(bool)].sum())
    bufs = [np.empty(total, dtype=np.int64) for _ in range(4)]
    na = ck.family_sweep(*args, mask, bufs[0], bufs[1])
    nb = _pykernels.family_sweep(*args, mask, bufs[2], bufs[3])
    assert na == nb == total
    assert np.array_equal(bufs[0], bufs[2]) and np.array_equal(bufs[1], bufs[3])

    idx = build_spatial_index(atoms, delta)
    u, anc, lo, hi = f.arrays()
    wid = np.full(len(f), delta)
    iargs = (u, anc, lo, hi, wid, idx.centers, idx.diam, idx.weights, idx.cell_size, idx.side,
             idx.cell_start, idx.cell_atoms, idx.max_diameter)
    x = ck.index_sweep(*iargs)
    y = _pykernels.index_sweep(*iargs)
    assert np.array_equal(x[0], y[0]) and np.array_equal(x[0], a[0])


def test_backend_switch():
    before = kernels.BACKEND
    try:
        kernels.use("python")
        assert kernels.family_sweep is _pykernels.family_sweep
        kernels.use("cython")
        assert kernels.BACKEND == "cython"
        with pytest.raises(ValueError):
            kernels.use("fortran")
    finally:
        kernels.use(before)
