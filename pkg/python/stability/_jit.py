import functools

import numba

from shared.config import config

jit = functools.partial(numba.njit, cache=config.numba_cache, nogil=True)
