import numpy as np
import pytest

from riskcast.garch import EgarchParams, simulate_egarch
from riskcast.rng import make_generator
from riskcast.simstudy import gamma_profile


@pytest.fixture(scope="session")
def sim_path_1000():
    """One simulated constant-profile loss path shared across tests."""
    return simulate_egarch(EgarchParams(), 1000, 12345, gamma_profile("constant", 1000))


def simulate_garch11(omega, alpha, beta, n, seed, nu=None):
    """Independent textbook-loop GARCH(1,1) simulator (test oracle)."""
    rng = make_generator(seed)
    burn = 200
    if nu is None:
        z = rng.standard_normal(n + burn)
    else:
        z = rng.standard_t(nu, size=n + burn) * np.sqrt((nu - 2.0) / nu)
    s2 = omega / (1.0 - alpha - beta)
    out = np.empty(n + burn)
    for t in range(n + burn):
        out[t] = np.sqrt(s2) * z[t]
        s2 = omega + alpha * out[t] ** 2 + beta * s2
    return out[burn:]
