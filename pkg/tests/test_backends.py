"""The accelerated and pure-numpy kernel backends must agree exactly.

Both backends run the same source; only the jit decorator differs. A
fresh interpreter is needed per backend because the choice is made at
import time, so each side runs in a subprocess and reports a digest of
its draws.
"""

import json
import os
import subprocess
import sys

import pytest

SCRIPT = """
import hashlib, json
from sectorshare.kernels import NUMBA_ENABLED
from sectorshare.model import PriorConfig
from sectorshare.sampler import SamplerConfig
from sectorshare.simulate import SimConfig, simulate_dataset
from sectorshare.variants import fit_variant

sim = simulate_dataset(SimConfig(seed=88, n_countries=2, n_regions=1))
cfg = SamplerConfig(seed=5, n_chains=2, n_warmup=150, n_samples=150)
fit = fit_variant("full", sim.dataset, PriorConfig(), cfg)
payload = {
    "numba": NUMBA_ENABLED,
    "draws": hashlib.sha256(fit.draws.draws.tobytes()).hexdigest(),
    "rho": hashlib.sha256(fit.rho.tobytes()).hexdigest(),
    "lp": hashlib.sha256(fit.draws.lp.tobytes()).hexdigest(),
}
print(json.dumps(payload))
"""


def run_backend(no_numba: bool) -> dict:
    env = dict(os.environ)
    env.pop("SECTORSHARE_NO_NUMBA", None)
    if no_numba:
        env["SECTORSHARE_NO_NUMBA"] = "1"
    proc = subprocess.run(
        [sys.executable, "-c", SCRIPT],
        env=env,
        capture_output=True,
        text=True,
        timeout=600,
        cwd=os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
    )
    assert proc.returncode == 0, proc.stderr
    return json.loads(proc.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_backends_produce_identical_draws():
    jit = run_backend(no_numba=False)
    plain = run_backend(no_numba=True)
    assert jit["numba"] is True
    assert plain["numba"] is False
    assert jit["draws"] == plain["draws"]
    assert jit["rho"] == plain["rho"]
    assert jit["lp"] == plain["lp"]
